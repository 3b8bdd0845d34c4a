use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qentropy::entropy::{Engine, EntropyReport};
use qentropy::io::{self, matrix_to_json};
use qentropy::linalg::HermitianOperator;
use qentropy::sdp::SolverOptions;
use qentropy::state::{
    maximally_entangled, random_bipartite_from, random_density_from, random_pure_from, seeded_rng, BipartiteState,
    CqEnsemble, DensityOperator,
};
use qentropy::verify::{run_suite, SuiteConfig};
use qentropy::Error;

/// Conditional min- and max-entropies and their operational meanings.
#[derive(Parser, Debug)]
#[command(name = "qentropy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Conditional min-entropy H_min(A|B) of a state file.
    Hmin(StateArgs),
    /// Conditional max-entropy H_max(A|B) of a state file.
    Hmax(StateArgs),
    /// Optimal guessing probability of a cq ensemble file.
    Pguess(StateArgs),
    /// Maximal singlet fraction and the recovery channel achieving it.
    Qcorr(StateArgs),
    /// Decoupling accuracy through the direct fidelity program.
    Qdecpl(StateArgs),
    /// Secrecy measure of a cq ensemble file.
    Psecr(StateArgs),
    /// Best fidelity with a pure target reachable by a channel on B.
    Fidmax(FidmaxArgs),
    /// Write a named library state to a file.
    Gen(GenArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Solver tolerance on gap and residuals.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct StateArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct FidmaxArgs {
    #[arg(long)]
    input: PathBuf,
    /// Amplitude file or rank-one state file for the target on A⊗A'.
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenName {
    /// Maximally entangled state on d_A ⊗ d_A.
    Phi,
    /// Product of two random states.
    Product,
    /// Random mixed state.
    Random,
    /// Random pure state.
    Pure,
    /// Equiprobable |0⟩, |+⟩ ensemble.
    Helstrom,
    /// Random cq ensemble with d_A outcomes.
    RandomCq,
    /// Random target amplitudes on d_A ⊗ d_B.
    Target,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(value_enum)]
    name: GenName,
    #[arg(long = "d-a", default_value_t = 2)]
    d_a: usize,
    #[arg(long = "d-b", default_value_t = 2)]
    d_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Instance count used for every criterion.
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    out: Output,
}

/// Input problems exit with 2, numerical failures with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver { .. } | Error::EigenNonConvergence(_) | Error::InvalidProblem(_) => 1,
        _ => 2,
    }
}

fn engine(out: &Output) -> Result<Engine, Error> {
    let mut options = SolverOptions::default();
    if let Some(t) = out.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidProblem(format!("tolerance must be positive, got {t}")));
        }
        options.tol = t;
    }
    Ok(Engine::new(options))
}

fn with_path<T>(path: &Path, r: Result<T, Error>) -> Result<T, (String, Error)> {
    r.map_err(|e| (path.display().to_string(), e))
}

fn op_json(op: &HermitianOperator) -> Value {
    json!(matrix_to_json(op.matrix()))
}

fn entropy_json(r: &EntropyReport) -> Value {
    let mut v = json!({
        "quantity": r.quantity,
        "value_bits": r.value_bits,
        "gap": r.gap,
        "primal_value": r.certificate.primal_value,
        "dual_value": r.certificate.dual_value,
        "status": r.certificate.status,
    });
    if let Some(s) = &r.optimizer_sigma {
        v["sigma"] = op_json(s.op());
    }
    if let Some(e) = &r.dual_optimizer {
        v["dual_optimizer"] = op_json(e.op());
    }
    v
}

/// Emits `value` either as one JSON object or as `key = value` lines.
fn emit(format: Format, v: &Value, text_keys: &[&str]) {
    match format {
        Format::Json => println!("{}", io::to_json_string(v)),
        Format::Text => {
            for k in text_keys {
                match &v[*k] {
                    Value::Number(n) => {
                        let x = n.as_f64().unwrap_or(f64::NAN);
                        if *k == "gap" {
                            println!("{k} = {x:.3e}");
                        } else {
                            println!("{k} = {x:.6}");
                        }
                    }
                    Value::Null => {}
                    other => println!("{k} = {}", other.as_str().map_or(other.to_string(), str::to_string)),
                }
            }
        }
    }
}

fn run_state<F>(args: &StateArgs, f: F) -> Result<(), (String, Error)>
where
    F: FnOnce(&Engine, &BipartiteState) -> Result<(Value, Vec<&'static str>), Error>,
{
    let eng = engine(&args.out).map_err(|e| (String::from("--tol"), e))?;
    let state = with_path(&args.input, io::read_state(&args.input))?;
    let (v, keys) = with_path(&args.input, f(&eng, &state))?;
    emit(args.out.format, &v, &keys);
    Ok(())
}

fn run_cq<F>(args: &StateArgs, f: F) -> Result<(), (String, Error)>
where
    F: FnOnce(&Engine, &CqEnsemble) -> Result<(Value, Vec<&'static str>), Error>,
{
    let eng = engine(&args.out).map_err(|e| (String::from("--tol"), e))?;
    let e = with_path(&args.input, io::read_cq(&args.input))?;
    let (v, keys) = with_path(&args.input, f(&eng, &e))?;
    emit(args.out.format, &v, &keys);
    Ok(())
}

const ENTROPY_KEYS: [&str; 3] = ["value_bits", "gap", "status"];

fn generate(args: &GenArgs) -> Result<String, Error> {
    let mut rng = seeded_rng(args.seed);
    let (a, b) = (args.d_a, args.d_b);
    if a == 0 || b == 0 {
        return Err(Error::InvalidState("dimensions must be positive".into()));
    }
    Ok(match args.name {
        GenName::Phi => io::state_to_json(&BipartiteState::from_pure(&maximally_entangled(a), a, a)?),
        GenName::Product => io::state_to_json(&BipartiteState::product(
            &random_density_from(&mut rng, a),
            &random_density_from(&mut rng, b),
        )),
        GenName::Random => io::state_to_json(&random_bipartite_from(&mut rng, a, b)),
        GenName::Pure => io::state_to_json(&BipartiteState::from_pure(&random_pure_from(&mut rng, a * b), a, b)?),
        GenName::Helstrom => {
            let plus = DensityOperator::new(HermitianOperator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])?)?;
            io::cq_to_json(&CqEnsemble::new(vec![0.5, 0.5], vec![DensityOperator::basis(2, 0), plus])?)
        }
        GenName::RandomCq => {
            let states = (0..a).map(|_| random_density_from(&mut rng, b)).collect();
            io::cq_to_json(&CqEnsemble::new(vec![1.0 / a as f64; a], states)?)
        }
        GenName::Target => io::target_to_json(&random_pure_from(&mut rng, a * b)),
    })
}

fn run(cli: Cli) -> Result<ExitCode, (String, Error)> {
    match cli.command {
        Command::Hmin(args) => run_state(&args, |eng, s| Ok((entropy_json(&eng.h_min(s)?), ENTROPY_KEYS.to_vec())))?,
        Command::Hmax(args) => run_state(&args, |eng, s| Ok((entropy_json(&eng.h_max(s)?), ENTROPY_KEYS.to_vec())))?,
        Command::Qcorr(args) => run_state(&args, |eng, s| {
            let q = eng.q_corr(s)?;
            let v = json!({
                "quantity": "q_corr",
                "value": q.value,
                "achieved_overlap": q.recovery.achieved_overlap,
                "predicted": q.recovery.predicted,
                "dims_ordered": q.recovery.dims_ordered,
                "gap": q.entropy.gap,
                "status": q.entropy.certificate.status,
                "recovery": {
                    "d_in": q.recovery.channel.d_in(),
                    "d_out": q.recovery.channel.d_out(),
                    "matrix": matrix_to_json(q.recovery.channel.op().matrix()),
                },
            });
            Ok((v, vec!["value", "achieved_overlap", "gap", "status"]))
        })?,
        Command::Qdecpl(args) => run_state(&args, |eng, s| {
            let d = eng.q_decpl_direct(s)?;
            let v = json!({
                "quantity": "q_decpl",
                "value": d.value,
                "fidelity": d.fidelity,
                "gap": d.certificate.gap,
                "status": d.certificate.status,
                "sigma": op_json(d.optimizer_sigma.op()),
            });
            Ok((v, vec!["value", "fidelity", "gap", "status"]))
        })?,
        Command::Pguess(args) => run_cq(&args, |eng, e| {
            let g = eng.p_guess(e)?;
            let v = json!({
                "quantity": "p_guess",
                "value": g.probability,
                "gap": g.certificate.gap,
                "status": g.certificate.status,
                "povm": g.povm.iter().map(op_json).collect::<Vec<_>>(),
            });
            Ok((v, vec!["value", "gap", "status"]))
        })?,
        Command::Psecr(args) => run_cq(&args, |eng, e| {
            let s = eng.p_secr(e)?;
            let v = json!({
                "quantity": "p_secr",
                "value": s.value,
                "block_formula": s.block_formula,
                "gap": s.certificate.gap,
                "status": s.certificate.status,
                "sigma": op_json(s.optimizer_sigma.op()),
            });
            Ok((v, vec!["value", "block_formula", "gap", "status"]))
        })?,
        Command::Fidmax(args) => {
            let eng = engine(&args.out).map_err(|e| (String::from("--tol"), e))?;
            let state = with_path(&args.input, io::read_state(&args.input))?;
            let target = with_path(&args.target, io::read_target(&args.target))?;
            let value = with_path(&args.target, eng.max_fidelity_with_target(&state, &target))?;
            let v = json!({ "quantity": "max_fidelity", "value": value });
            emit(args.out.format, &v, &["value"]);
        }
        Command::Gen(args) => {
            let text = generate(&args).map_err(|e| (String::from("gen"), e))?;
            match &args.output {
                Some(p) => with_path(p, std::fs::write(p, format!("{text}\n")).map_err(Error::from))?,
                None => println!("{text}"),
            }
        }
        Command::Verify(args) => {
            let eng = engine(&args.out).map_err(|e| (String::from("--tol"), e))?;
            let cfg = SuiteConfig {
                seed: args.seed,
                trials: args.trials,
                options: eng.options,
            };
            let results = run_suite(&cfg);
            let all = results.iter().all(|r| r.passed);
            match args.out.format {
                Format::Json => {
                    let v = json!({ "seed": args.seed, "passed": all, "criteria": results });
                    println!("{}", io::to_json_string(&v));
                }
                Format::Text => {
                    for r in &results {
                        println!("{}", r.summary_line());
                        for k in &r.checks {
                            let mark = if k.passed { "ok  " } else { "FAIL" };
                            println!(
                                "    {mark} {:<32} oracle {:>12.6} main {:>12.6} gap {:.2e}  [{}]",
                                k.report.quantity, k.report.oracle, k.report.main, k.report.gap, k.report.method
                            );
                        }
                    }
                    println!("{}", if all { "all criteria passed" } else { "some criteria failed" });
                }
            }
            return Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err((ctx, e)) => {
            eprintln!("error: {ctx}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
