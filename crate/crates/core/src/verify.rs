//! The acceptance suite: ten property checks, each comparing library values
//! against oracles or closed forms on seeded random instances.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::channels::classify;
use crate::entropy::{closed_form, secrecy_block_formula, ClosedFormCase, Engine};
use crate::error::Result;
use crate::linalg::HermitianOperator;
use crate::oracles::{helstrom_pguess, random_channel_fidelity_lower, sigma_search_hmin, OracleReport};
use crate::sdp::SolverOptions;
use crate::state::{
    cq_to_density, maximally_entangled, random_bipartite_from, random_density_from, random_pure_from, seeded_rng,
    BipartiteState, CqEnsemble, DensityOperator,
};

pub const CRITERIA: [(usize, &str, f64); 10] = [
    (1, "zero duality gap", 1e-6),
    (2, "guessing probability", 1e-6),
    (3, "singlet fraction recovery", 1e-6),
    (4, "decoupling accuracy", 1e-6),
    (5, "closed forms", 1e-6),
    (6, "additivity", 1e-6),
    (7, "strong subadditivity", 1e-7),
    (8, "key secrecy", 1e-7),
    (9, "target fidelity", 1e-7),
    (10, "sigma search bracket", 1e-2),
];

/// Helstrom instance values quoted to six decimals.
const HELSTROM_PGUESS: f64 = 0.853553;
const HELSTROM_HMIN: f64 = 0.228447;
const CHANNEL_SAMPLES: usize = 200;
const SEARCH_RESOLUTION: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Replaces every per-criterion instance count when set.
    pub trials: Option<usize>,
    pub options: SolverOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            trials: None,
            options: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub report: OracleReport,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub tolerance: f64,
    pub worst_gap: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!(
            "[{verdict}] {:>2} {:<26} worst gap {:.3e} (tol {:.0e}, {} checks)",
            self.id,
            self.title,
            self.worst_gap,
            self.tolerance,
            self.checks.len()
        );
        if let Some(e) = &self.error {
            line.push_str(&format!(" error: {e}"));
        }
        line
    }
}

struct Collector {
    checks: Vec<Check>,
}

impl Collector {
    fn push(&mut self, report: OracleReport, tolerance: f64) {
        let passed = report.gap <= tolerance;
        self.checks.push(Check {
            report,
            tolerance,
            passed,
        });
    }

    /// Records a one-sided bound: only `main − oracle` above zero counts.
    fn push_upper(&mut self, quantity: &str, bound: f64, main: f64, method: &str, tolerance: f64) {
        let mut r = OracleReport::new(quantity, bound, main, method);
        r.gap = (main - bound).max(0.0);
        self.push(r, tolerance);
    }
}

fn criterion_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    seeded_rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream))
}

const SMALL_DIMS: [(usize, usize); 4] = [(2, 2), (2, 3), (3, 2), (3, 3)];

/// The shared random instances of criteria 1, 3 and 4.
fn random_states(seed: u64, n: usize) -> Vec<BipartiteState> {
    let mut rng = criterion_rng(seed, 0);
    (0..n)
        .map(|i| {
            let (a, b) = SMALL_DIMS[i % SMALL_DIMS.len()];
            random_bipartite_from(&mut rng, a, b)
        })
        .collect()
}

fn random_ensemble(rng: &mut ChaCha20Rng, nx: usize, d_b: usize) -> Result<CqEnsemble> {
    let raw: Vec<f64> = (0..nx).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs = raw.iter().map(|p| p / total).collect();
    let states = (0..nx).map(|_| random_density_from(rng, d_b)).collect();
    CqEnsemble::new(probs, states)
}

fn criterion_1(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    for s in random_states(cfg.seed, n) {
        let r = eng.h_min(&s)?;
        let (p, d) = (-r.certificate.primal_value, -r.certificate.dual_value);
        let mut rep = OracleReport::new(
            format!("h_min gap {}x{}", s.d_a(), s.d_b()),
            d,
            p,
            "relative |primal-dual|/(1+|value|)",
        );
        rep.gap = (p - d).abs() / (1.0 + d.abs());
        c.push(rep, 1e-6);
    }
    Ok(())
}

fn criterion_2(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 2);
    for i in 0..n {
        let d_b = 2 + i % 2;
        let e = random_ensemble(&mut rng, 2, d_b)?;
        let h = eng.h_min(&cq_to_density(&e))?;
        let oracle = helstrom_pguess(e.probs()[0], &e.states()[0], &e.states()[1])?;
        c.push(
            OracleReport::new("2^-H_min(X|B)", oracle, 2f64.powf(-h.value_bits), "Helstrom trace norm"),
            1e-6,
        );
    }
    let plus = DensityOperator::new(HermitianOperator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])?)?;
    let e = CqEnsemble::new(vec![0.5, 0.5], vec![DensityOperator::basis(2, 0), plus])?;
    let g = eng.p_guess(&e)?;
    let oracle = helstrom_pguess(0.5, &e.states()[0], &e.states()[1])?;
    c.push(OracleReport::new("p_guess |0>,|+>", oracle, g.probability, "Helstrom trace norm"), 1e-6);
    c.push(
        OracleReport::new("p_guess |0>,|+>", HELSTROM_PGUESS, g.probability, "quoted value"),
        1e-6,
    );
    let h = eng.h_min(&cq_to_density(&e))?;
    c.push(
        OracleReport::new("H_min |0>,|+>", HELSTROM_HMIN, h.value_bits, "quoted value"),
        1e-5,
    );
    Ok(())
}

fn criterion_3(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    for s in random_states(cfg.seed, n).into_iter().filter(|s| s.d_a() <= s.d_b()) {
        let q = eng.q_corr(&s)?;
        let class = classify(&q.recovery.channel)?;
        let mut cptp = OracleReport::new(
            format!("recovery CPTP {}x{}", s.d_a(), s.d_b()),
            0.0,
            class.tp_residual.max((-class.min_eigenvalue).max(0.0)),
            "classify residuals",
        );
        cptp.gap = cptp.main;
        c.push(cptp, 1e-8);
        c.push(
            OracleReport::new(
                format!("recovery overlap {}x{}", s.d_a(), s.d_b()),
                q.recovery.predicted,
                q.recovery.achieved_overlap,
                "d_A<Phi|(id x F)(rho)|Phi> vs 2^-H_min",
            ),
            1e-6,
        );
    }
    Ok(())
}

fn criterion_4(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    for s in random_states(cfg.seed, n) {
        let hmax = eng.h_max(&s)?;
        let q = eng.q_decpl_direct(&s)?;
        c.push(
            OracleReport::new(
                format!("log2 q_decpl {}x{}", s.d_a(), s.d_b()),
                hmax.value_bits,
                q.value.log2(),
                "H_max via purification",
            ),
            1e-6,
        );
    }
    Ok(())
}

fn criterion_5(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 5);
    for i in 0..n {
        let (a, b) = SMALL_DIMS[i % SMALL_DIMS.len()];
        let s = BipartiteState::product(&random_density_from(&mut rng, a), &random_density_from(&mut rng, b));
        let cf = closed_form(&s, ClosedFormCase::Product)?;
        c.push(
            OracleReport::new("H_min product", cf.h_min_bits, eng.h_min(&s)?.value_bits, "-log2 |rho_A|_inf"),
            1e-6,
        );
        c.push(
            OracleReport::new("H_max product", cf.h_max_bits, eng.h_max(&s)?.value_bits, "2 log2 tr sqrt(rho_A)"),
            1e-6,
        );
    }
    for i in 0..n {
        let (a, b) = SMALL_DIMS[i % SMALL_DIMS.len()];
        let s = BipartiteState::from_pure(&random_pure_from(&mut rng, a * b), a, b)?;
        let cf = closed_form(&s, ClosedFormCase::Pure)?;
        c.push(
            OracleReport::new("H_min pure", cf.h_min_bits, eng.h_min(&s)?.value_bits, "-2 log2 tr sqrt(rho_A)"),
            1e-6,
        );
        c.push(
            OracleReport::new("H_max pure", cf.h_max_bits, eng.h_max(&s)?.value_bits, "log2 |rho_A|_inf"),
            1e-6,
        );
    }
    for d in 2..=4 {
        let s = BipartiteState::from_pure(&maximally_entangled(d), d, d)?;
        let want = -(d as f64).log2();
        c.push(
            OracleReport::new(format!("H_min Phi_{d}"), want, eng.h_min(&s)?.value_bits, "-log2 d"),
            1e-6,
        );
        c.push(
            OracleReport::new(format!("H_max Phi_{d}"), want, eng.h_max(&s)?.value_bits, "-log2 d"),
            1e-6,
        );
    }
    Ok(())
}

fn criterion_6(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 6);
    for _ in 0..n {
        let s = random_bipartite_from(&mut rng, 2, 2);
        let t = random_bipartite_from(&mut rng, 2, 2);
        let joint = s.tensor(&t);
        let sum_min = eng.h_min(&s)?.value_bits + eng.h_min(&t)?.value_bits;
        c.push(
            OracleReport::new("H_min(AA'|BB')", sum_min, eng.h_min(&joint)?.value_bits, "sum of factors"),
            1e-6,
        );
        let sum_max = eng.h_max(&s)?.value_bits + eng.h_max(&t)?.value_bits;
        c.push(
            OracleReport::new("H_max(AA'|BB')", sum_max, eng.h_max(&joint)?.value_bits, "sum of factors"),
            1e-6,
        );
    }
    Ok(())
}

fn criterion_7(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 7);
    for _ in 0..n {
        let abc = random_bipartite_from(&mut rng, 2, 4);
        let ab = crate::linalg::partial_trace_systems(abc.op().matrix(), &[2, 2, 2], &[true, true, false])?;
        let ab = BipartiteState::new(DensityOperator::new(HermitianOperator::hermitian_part(ab))?, 2, 2)?;
        let h_bc = eng.h_min(&abc)?.value_bits;
        let h_b = eng.h_min(&ab)?.value_bits;
        c.push_upper("H_min(A|BC) <= H_min(A|B)", h_b, h_bc, "one-sided", 1e-7);
    }
    Ok(())
}

fn criterion_8(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 8);
    for i in 0..n {
        let (nx, d_b) = SMALL_DIMS[i % SMALL_DIMS.len()];
        let e = random_ensemble(&mut rng, nx, d_b)?;
        let s = eng.p_secr(&e)?;
        let block = secrecy_block_formula(&e, &s.optimizer_sigma)?;
        let hmax = eng.h_max(&cq_to_density(&e))?;
        c.push(
            OracleReport::new("p_secr block formula", 2f64.powf(hmax.value_bits), block, "2^H_max via purification"),
            1e-7,
        );
    }
    Ok(())
}

fn criterion_9(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 9);
    for i in 0..n {
        let d_b = 2 + i % 2;
        let s = random_bipartite_from(&mut rng, 2, d_b);
        let f = eng.max_fidelity_with_target(&s, &maximally_entangled(2))?;
        let q = eng.q_corr(&s)?.value;
        c.push(OracleReport::new("fidelity at Phi", q / 2.0, f, "q_corr / d_A"), 1e-7);
    }
    for _ in 0..n {
        let s = random_bipartite_from(&mut rng, 2, 2);
        let target = random_pure_from(&mut rng, 4);
        let sample_seed = rng.random::<u64>();
        let f = eng.max_fidelity_with_target(&s, &target)?;
        let lower = random_channel_fidelity_lower(&s, &target, CHANNEL_SAMPLES, sample_seed)?;
        c.push_upper(
            "sampled channels <= fidelity",
            f,
            lower,
            &format!("{CHANNEL_SAMPLES} random channels"),
            1e-6,
        );
    }
    Ok(())
}

fn criterion_10(cfg: &SuiteConfig, eng: &Engine, c: &mut Collector, n: usize) -> Result<()> {
    let mut rng = criterion_rng(cfg.seed, 10);
    for i in 0..n {
        let d_a = 2 + i % 2;
        let s = random_bipartite_from(&mut rng, d_a, 2);
        let search = sigma_search_hmin(&s, SEARCH_RESOLUTION, rng.random::<u64>())?;
        c.push(
            OracleReport::new(
                format!("H_min {d_a}x2"),
                search.h_min_bits,
                eng.h_min(&s)?.value_bits,
                format!("Nelder-Mead over sigma, resolution {SEARCH_RESOLUTION:e}"),
            ),
            1e-2,
        );
    }
    Ok(())
}

type CriterionFn = fn(&SuiteConfig, &Engine, &mut Collector, usize) -> Result<()>;

const RUNNERS: [(CriterionFn, usize); 10] = [
    (criterion_1, 50),
    (criterion_2, 20),
    (criterion_3, 50),
    (criterion_4, 50),
    (criterion_5, 20),
    (criterion_6, 10),
    (criterion_7, 20),
    (criterion_8, 20),
    (criterion_9, 10),
    (criterion_10, 5),
];

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize, cfg: &SuiteConfig) -> CriterionResult {
    assert!((1..=CRITERIA.len()).contains(&id), "criterion ids run from 1 to 10");
    let (_, title, tolerance) = CRITERIA[id - 1];
    let (runner, default_n) = RUNNERS[id - 1];
    let eng = Engine::new(cfg.options.clone());
    let mut c = Collector { checks: Vec::new() };
    let outcome = runner(cfg, &eng, &mut c, cfg.trials.unwrap_or(default_n));
    let worst_gap = c.checks.iter().map(|k| k.report.gap).fold(0.0, f64::max);
    let error = outcome.err().map(|e| e.to_string());
    let passed = error.is_none() && !c.checks.is_empty() && c.checks.iter().all(|k| k.passed);
    CriterionResult {
        id,
        title,
        tolerance,
        worst_gap,
        passed,
        checks: c.checks,
        error,
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Vec<CriterionResult> {
    (1..=CRITERIA.len()).map(|id| run_criterion(id, cfg)).collect()
}
