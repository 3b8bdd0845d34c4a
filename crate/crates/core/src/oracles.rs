//! Independent verifiers: closed forms, direct searches and sampling bounds.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{kron, support, trace_norm, CMatrix, CVector, HermitianOperator};
use crate::sdp::{solve_with, Constraint, HermitianSdp, SolverOptions, SparseHermitian, StartPoint};
use crate::state::{haar_isometry, maximally_entangled, seeded_rng, BipartiteState, DensityOperator, PureState};

/// One oracle-versus-library comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub main: f64,
    pub gap: f64,
    pub method: String,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, oracle: f64, main: f64, method: impl Into<String>) -> Self {
        Self {
            quantity: quantity.into(),
            oracle,
            main,
            gap: (oracle - main).abs(),
            method: method.into(),
        }
    }
}

/// `½(1 + ‖p₀ρ₀ − p₁ρ₁‖₁)`.
pub fn helstrom_pguess(p0: f64, rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidState(format!("probability {p0} outside [0, 1]")));
    }
    let diff = rho0.op().scale(p0).sub(&rho1.op().scale(1.0 - p0));
    Ok(0.5 * (1.0 + trace_norm(&diff)?))
}

/// Result of [`sigma_search_hmin`].
#[derive(Clone, Debug)]
pub struct SigmaSearch {
    /// `min_σ λ_max((id⊗σ)^{-1/2} ρ (id⊗σ)^{-1/2})` over the visited `σ`;
    /// an upper bound on `2^{−H_min}`.
    pub guess_upper: f64,
    /// `−log₂ guess_upper`, a lower bound on `H_min` in bits.
    pub h_min_bits: f64,
    pub sigma: DensityOperator,
    pub restarts: usize,
}

struct SigmaCost<'a> {
    rho: &'a HermitianOperator,
    d_a: usize,
    d_b: usize,
}

const SINGULAR_PENALTY: f64 = 1e6;

fn sigma_from_params(p: &[f64], d: usize) -> HermitianOperator {
    let a = CMatrix::from_fn(d, d, |i, j| Complex64::new(p[2 * (i * d + j)], p[2 * (i * d + j) + 1]));
    let w = HermitianOperator::hermitian_part(&a * a.adjoint());
    let t = w.trace();
    w.scale(1.0 / t)
}

impl SigmaCost<'_> {
    fn eval(&self, p: &[f64]) -> f64 {
        let sigma = sigma_from_params(p, self.d_b);
        if !sigma.trace().is_finite() {
            return SINGULAR_PENALTY;
        }
        let Ok(eig) = sigma.eig() else {
            return SINGULAR_PENALTY;
        };
        if eig.min() <= 1e-14 {
            return SINGULAR_PENALTY;
        }
        let inv_sqrt = eig.map(|x| 1.0 / x.sqrt());
        let k = kron(&CMatrix::identity(self.d_a, self.d_a), inv_sqrt.matrix());
        self.rho.conjugate_by(&k).lambda_max().unwrap_or(SINGULAR_PENALTY)
    }
}

impl CostFunction for SigmaCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

fn nelder_mead(cost: &SigmaCost<'_>, x0: &[f64], step: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(tol)
        .map_err(|e| Error::InvalidProblem(e.to_string()))?;
    let res = Executor::new(
        SigmaCost {
            rho: cost.rho,
            d_a: cost.d_a,
            d_b: cost.d_b,
        },
        solver,
    )
    .configure(|s| s.max_iters(20_000))
    .run()
    .map_err(|e| Error::InvalidProblem(e.to_string()))?;
    let state = res.state();
    let best = argmin::core::State::get_best_param(state)
        .cloned()
        .unwrap_or_else(|| x0.to_vec());
    let value = cost.eval(&best);
    Ok((best, value))
}

/// Direct search over normalized `σ_B = AA†/tr(AA†)` minimizing
/// `2^{D_∞(ρ_AB ‖ id_A⊗σ_B)}`, restarted until successive rounds improve by
/// less than `resolution`. Needs `d_B ≤ 3`.
pub fn sigma_search_hmin(state: &BipartiteState, resolution: f64, seed: u64) -> Result<SigmaSearch> {
    let (d_a, d_b) = (state.d_a(), state.d_b());
    if d_b > 3 {
        return Err(Error::DimensionTooLarge(d_b));
    }
    let cost = SigmaCost {
        rho: state.op(),
        d_a,
        d_b,
    };
    let n = 2 * d_b * d_b;
    let mut rng = seeded_rng(seed);
    let mut starts = Vec::new();
    let mut id = vec![0.0; n];
    for i in 0..d_b {
        id[2 * (i * d_b + i)] = 1.0;
    }
    starts.push(id);
    for _ in 0..3 {
        starts.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    }

    let tol = (resolution * resolution).max(1e-14);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let cand = nelder_mead(&cost, s, 0.3, tol)?;
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    let (mut x, mut v) = best.expect("at least one start");
    let mut restarts = 0;
    let mut step = 0.1;
    while restarts < 50 {
        let (nx, nv) = nelder_mead(&cost, &x, step, tol)?;
        restarts += 1;
        let improvement = v - nv;
        if nv < v {
            x = nx;
            v = nv;
        }
        if improvement < 1e-2 * resolution {
            if step < 1e-3 {
                break;
            }
            step *= 0.3;
        }
    }
    let sigma = DensityOperator::from_psd_normalized(&sigma_from_params(&x, d_b))?;
    Ok(SigmaSearch {
        guess_upper: v,
        h_min_bits: -v.log2(),
        sigma,
        restarts,
    })
}

/// Kraus operators `d_out × d_in` of `ρ ↦ tr(ρ)·id/d_out`.
fn trace_and_prepare_kraus(d_in: usize, d_out: usize) -> Vec<CMatrix> {
    let w = Complex64::new(1.0 / (d_out as f64).sqrt(), 0.0);
    let mut out = Vec::with_capacity(d_in * d_out);
    for j in 0..d_out {
        for b in 0..d_in {
            let mut k = CMatrix::zeros(d_out, d_in);
            k[(j, b)] = w;
            out.push(k);
        }
    }
    out
}

/// Identity on the common leading subspace; the rest of the input is sent to `|0⟩`.
fn truncation_kraus(d_in: usize, d_out: usize) -> Vec<CMatrix> {
    let one = Complex64::new(1.0, 0.0);
    let mut k0 = CMatrix::zeros(d_out, d_in);
    for i in 0..d_in.min(d_out) {
        k0[(i, i)] = one;
    }
    let mut out = vec![k0];
    for b in d_out..d_in {
        let mut k = CMatrix::zeros(d_out, d_in);
        k[(0, b)] = one;
        out.push(k);
    }
    out
}

fn haar_kraus<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, d_env: usize) -> Vec<CMatrix> {
    let v = haar_isometry(rng, d_out * d_env, d_in);
    (0..d_env)
        .map(|e| CMatrix::from_fn(d_out, d_in, |a, b| v[(a * d_env + e, b)]))
        .collect()
}

/// `⟨Ψ|(id⊗ℱ)(ρ)|Ψ⟩ = Σ_k v_k†ρv_k` with `v_k = (id⊗K_k†)|Ψ⟩`.
fn kraus_overlap(rho: &HermitianOperator, psi: &CVector, d_a: usize, kraus: &[CMatrix]) -> f64 {
    let mut total = 0.0;
    for k in kraus {
        let lift = kron(&CMatrix::identity(d_a, d_a), &k.adjoint());
        let v = lift * psi;
        total += (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
    }
    total
}

/// Largest `⟨Ψ|(id_A⊗ℱ)(ρ_AB)|Ψ⟩` over a trace-and-prepare channel, a truncation
/// channel and `samples` Haar-random Stinespring channels `B → A′`, alternating
/// between a minimal environment and one of dimension at least `d_A`.
pub fn random_channel_fidelity_lower(
    state: &BipartiteState,
    target: &PureState,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let (d_a, d_b) = (state.d_a(), state.d_b());
    if !target.dim().is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch {
            expected: d_a,
            got: target.dim(),
        });
    }
    let d_ap = target.dim() / d_a;
    let psi = target.amplitudes();
    let d_env = d_a.max(d_b.div_ceil(d_ap));
    let mut best = kraus_overlap(state.op(), psi, d_a, &trace_and_prepare_kraus(d_b, d_ap));
    best = best.max(kraus_overlap(state.op(), psi, d_a, &truncation_kraus(d_b, d_ap)));
    let mut rng = seeded_rng(seed);
    for i in 0..samples {
        // alternate isometric (pure environment) and dilated samples
        let env = if i % 2 == 0 { d_b.div_ceil(d_ap) } else { d_env };
        let kraus = haar_kraus(&mut rng, d_b, d_ap, env);
        best = best.max(kraus_overlap(state.op(), psi, d_a, &kraus));
    }
    Ok(best)
}

/// `max d_A·⟨Φ|(id⊗ℱ)(ρ)|Φ⟩` over the same channel family; a lower bound on `q_corr`.
pub fn random_channel_qcorr_lower(state: &BipartiteState, samples: usize, seed: u64) -> Result<f64> {
    let d_a = state.d_a();
    Ok(d_a as f64 * random_channel_fidelity_lower(state, &maximally_entangled(d_a), samples, seed)?)
}

/// Root fidelity through `max{Re tr X : [[ρ, X], [X†, ω]] ⪰ 0}`, with both
/// operators restricted to their supports.
pub fn fidelity_sdp(rho: &DensityOperator, omega: &DensityOperator) -> Result<f64> {
    if rho.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: omega.dim(),
        });
    }
    let (lr, v) = support(rho.op())?;
    let (lo, w) = support(omega.op())?;
    let (r, s) = (lr.len(), lo.len());
    let dim = r + s;
    let cross = v.adjoint() * &w * Complex64::new(-0.5, 0.0);
    let mut c = CMatrix::zeros(dim, dim);
    c.view_mut((0, r), (r, s)).copy_from(&cross);
    c.view_mut((r, 0), (s, r)).copy_from(&cross.adjoint());

    let mut constraints = Vec::new();
    let mut y0 = Vec::new();
    for (off, vals) in [(0, &lr), (r, &lo)] {
        let n = vals.len();
        for i in 0..n {
            for j in i..n {
                let rhs = if i == j { vals[i] } else { 0.0 };
                constraints.push(Constraint::single(
                    0,
                    SparseHermitian::real_part(dim, off + i, off + j),
                    rhs,
                ));
                y0.push(if i == j { -1.0 } else { 0.0 });
                if i != j {
                    constraints.push(Constraint::single(0, SparseHermitian::imag_part(dim, off + i, off + j), 0.0));
                    y0.push(0.0);
                }
            }
        }
    }
    let p = HermitianSdp::new(vec![dim], vec![HermitianOperator::hermitian_part(c)], constraints)?;
    let diag: Vec<f64> = lr.iter().chain(lo.iter()).copied().collect();
    let start = StartPoint {
        x: vec![HermitianOperator::from_diagonal(&diag)],
        y: y0,
    };
    let sol = solve_with(&p, &SolverOptions::default(), Some(&start))?.require_optimal()?;
    Ok(-0.5 * (sol.primal_value + sol.dual_value))
}
