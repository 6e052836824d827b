//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on input errors, 2 when a run stops without
//! meeting its tolerance.

pub mod io;
pub mod selfcheck;

use crate::apps::{
    build_bridge, build_correlated, build_dantzig, build_elastic_net, build_lp_regression, build_schatten_problem,
    GradNormTask, LinearMap, ProblemSpec,
};
use crate::error::{invalid, mismatch, Error, Result};
use crate::gradnorm::{minimize_grad_norm, GradNormConfig};
use crate::hardinstance::{complexity_lower_bound, empirical_queries, resisting_oracle, HardInstance};
use crate::linalg::Matrix;
use crate::oracles::make_least_squares;
use crate::regularizers::{Regularizer, Scaffold};
use crate::solver::{agd_plus, composite_grad_norm, SolverConfig, StopReason};
use crate::spaces::NormedSpace;
use crate::verification::{reference_solve, ReferenceCache};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "compcomp", version, about = "Accelerated composite minimization over lp and Schatten-p spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run AGD+ on a problem-spec file.
    Solve(SolveArgs),
    /// Drive a gradient's dual norm below a target.
    Gradnorm(GradnormArgs),
    /// Evaluate the oracle-complexity lower bound.
    Lb(LbArgs),
    /// Run AGD+ against the resisting adversary and save the transcript.
    HardRun(HardRunArgs),
    /// Run the invariant suites of every module.
    Selfcheck(SelfcheckArgs),
    /// Compute a certified reference solution.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Problem-spec JSON file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Override the spec's lambda.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Override the spec's exponent.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: SpecArgs,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Stop once the composite gradient has at most this dual norm.
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the normalized spec (with its data) to this path.
    #[arg(long)]
    pub emit_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GradnormArgs {
    #[command(flatten)]
    pub problem: SpecArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Initial distance estimate.
    #[arg(long, default_value_t = 1.0)]
    pub r_init: f64,
    #[arg(long, default_value_t = 60)]
    pub max_restarts: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LbArgs {
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 200.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Also run AGD+ on a generated instance and count queries.
    #[arg(long)]
    pub run: bool,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HardRunArgs {
    /// Number of pieces.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    /// Dimension; defaults to 2M + 2.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, default_value_t = 1.0 / 240.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Negative control: break an invariant on purpose.
    #[arg(long, value_enum)]
    pub inject_fault: Option<selfcheck::Fault>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub problem: SpecArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Directory for cached reference solutions.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builder {
    ElasticNet,
    Bridge,
    Dantzig,
    LpRegression,
    Correlated,
    Schatten,
}

/// On-disk problem description. Data paths are relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub builder: Builder,
    pub matrix: PathBuf,
    pub response: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    /// Shape of the unknown matrix for the Schatten builder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
}

/// A spec file with its data loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem {
    pub file: ProblemFile,
    pub a: Matrix,
    pub b: Vec<f64>,
}

pub enum Built {
    Composite(ProblemSpec),
    GradNorm(GradNormTask),
}

fn need(v: Option<f64>, name: &str, builder: Builder) -> Result<f64> {
    v.ok_or_else(|| invalid(format!("builder {builder:?} needs parameter {name}")))
}

impl LoadedProblem {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let file: ProblemFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let (mpath, rpath) = (base.join(&file.matrix), base.join(&file.response));
        let a = io::load_matrix(&mpath)?;
        let b = io::load_vector(&rpath)?;
        if a.rows != b.len() {
            return Err(mismatch(format!(
                "{} has {} rows but {} has {} entries",
                mpath.display(),
                a.rows,
                rpath.display(),
                b.len()
            )));
        }
        Ok(LoadedProblem { file, a, b })
    }

    /// SHA-256 over the builder parameters and the data.
    pub fn content_hash(&self) -> String {
        let mut params = self.file.clone();
        params.matrix = PathBuf::new();
        params.response = PathBuf::new();
        let body = serde_json::json!({ "params": params, "a": self.a, "b": self.b });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    pub fn build(&self) -> Result<Built> {
        let f = &self.file;
        let (a, b) = (&self.a, self.b.as_slice());
        let spec = match f.builder {
            Builder::ElasticNet => {
                build_elastic_net(a, b, f.lambda1.unwrap_or(0.0), f.lambda2.unwrap_or(0.0))?
            }
            Builder::Bridge => build_bridge(a, b, need(f.lambda, "lambda", f.builder)?, need(f.p, "p", f.builder)?)?,
            Builder::Dantzig => build_dantzig(
                a,
                b,
                need(f.lambda, "lambda", f.builder)?,
                need(f.approx_eps, "approx_eps", f.builder)?,
            )?,
            Builder::LpRegression => build_lp_regression(a, b, need(f.p, "p", f.builder)?)?,
            Builder::Correlated => {
                return Ok(Built::GradNorm(build_correlated(a, b, need(f.p_star, "p_star", f.builder)?)?))
            }
            Builder::Schatten => {
                let (r, c) = match (f.rows, f.cols) {
                    (Some(r), Some(c)) => (r, c),
                    _ => return Err(invalid("builder Schatten needs rows and cols")),
                };
                if r * c != a.cols {
                    return Err(mismatch(format!("design has {} columns, expected rows x cols = {}", a.cols, r * c)));
                }
                let ms = (0..a.rows)
                    .map(|i| Matrix::new(r, c, a.row(i).to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                build_schatten_problem(&LinearMap::Sensing(ms), b, need(f.lambda, "lambda", f.builder)?, need(f.p, "p", f.builder)?)?
            }
        };
        Ok(Built::Composite(spec))
    }

    /// Writes the spec and its data as sibling files with 17-digit floats.
    pub fn emit(&self, path: &Path) -> Result<()> {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("spec").to_string();
        let dir = path.parent().unwrap_or(Path::new("."));
        let (mname, rname) = (format!("{stem}.matrix.csv"), format!("{stem}.response.csv"));
        std::fs::write(dir.join(&mname), io::matrix_to_csv(&self.a))?;
        let col = Matrix::new(self.b.len(), 1, self.b.clone())?;
        std::fs::write(dir.join(&rname), io::matrix_to_csv(&col))?;
        let mut file = self.file.clone();
        file.matrix = mname.into();
        file.response = rname.into();
        let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

fn load_with_overrides(args: &SpecArgs) -> Result<LoadedProblem> {
    let mut lp = LoadedProblem::load(&args.spec)?;
    if args.lambda.is_some() {
        lp.file.lambda = args.lambda;
    }
    if let Some(p) = args.p {
        match lp.file.builder {
            Builder::Correlated => lp.file.p_star = Some(p),
            _ => lp.file.p = Some(p),
        }
    }
    Ok(lp)
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    if let Some(p) = path {
        let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(p, s + "\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveReport {
    final_objective: f64,
    iterations: usize,
    doublings: usize,
    elapsed_ms: f64,
    stop: StopReason,
    grad_queries: usize,
    composite_grad_norm: f64,
    spec_hash: String,
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let lp = load_with_overrides(&args.problem)?;
    if let Some(p) = &args.emit_spec {
        lp.emit(p)?;
    }
    let spec = match lp.build()? {
        Built::Composite(s) => s,
        Built::GradNorm(_) => return Err(invalid("the correlated builder is a gradnorm task; use `gradnorm`")),
    };
    let cfg = SolverConfig {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        grad_tol: Some(args.grad_tol),
        seed: args.seed,
        ..Default::default()
    };
    info!("solving {:?} with d = {}", spec.kind, spec.dim());
    let t = Instant::now();
    let sol = spec.solve(&cfg)?;
    let elapsed_ms = t.elapsed().as_secs_f64() * 1e3;
    if let Some(p) = &args.trace {
        std::fs::write(p, sol.trace.to_csv())?;
    }
    let last = sol.trace.last();
    let gnorm = composite_grad_norm(&spec.reg, &sol.y, &spec.oracle.grad(&sol.y))?;
    let report = SolveReport {
        final_objective: last.obj,
        iterations: last.k,
        doublings: sol.trace.doublings(),
        elapsed_ms,
        stop: sol.trace.stop,
        grad_queries: sol.trace.grad_queries,
        composite_grad_norm: gnorm,
        spec_hash: lp.content_hash(),
    };
    write_json(&args.report, &report)?;
    println!("objective={:.17e} iterations={} stop={:?}", report.final_objective, report.iterations, report.stop);
    Ok(match sol.trace.stop {
        StopReason::GradTol | StopReason::Target => EXIT_OK,
        _ => EXIT_NOT_CONVERGED,
    })
}

#[derive(Debug, Serialize)]
struct GradnormOutput {
    #[serde(flatten)]
    report: crate::gradnorm::GradNormReport,
    elapsed_ms: f64,
    spec_hash: String,
}

fn cmd_gradnorm(args: &GradnormArgs) -> Result<u8> {
    let lp = load_with_overrides(&args.problem)?;
    let (oracle, space) = match lp.build()? {
        Built::GradNorm(t) => (t.oracle, t.space),
        Built::Composite(_) => {
            let p = lp.file.p.unwrap_or(2.0);
            (make_least_squares(&lp.a, &lp.b)?, NormedSpace::lp(p, lp.a.cols)?)
        }
    };
    let mut cfg = GradNormConfig::new(args.epsilon);
    cfg.r_init = args.r_init;
    cfg.max_restarts = args.max_restarts;
    cfg.inner.max_iters = args.max_iters;
    cfg.inner.seed = args.seed;
    let t = Instant::now();
    let (_, report) = minimize_grad_norm(&oracle, &space, &vec![0.0; lp.a.cols], &cfg)?;
    let out = GradnormOutput { report, elapsed_ms: t.elapsed().as_secs_f64() * 1e3, spec_hash: lp.content_hash() };
    write_json(&args.report, &out)?;
    println!(
        "final_f_grad_norm={:.6e} restarts={} converged={}",
        out.report.final_f_grad_norm, out.report.restarts, out.report.converged
    );
    Ok(if out.report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_lb(args: &LbArgs) -> Result<u8> {
    let lb = complexity_lower_bound(args.p, args.kappa, args.l, args.lambda, args.epsilon, args.d, args.r);
    let regime = serde_json::to_value(lb.regime).map_err(|e| Error::Io(e.to_string()))?;
    println!("count={} regime={} valid={}", lb.count, regime.as_str().unwrap_or("?"), lb.valid);
    let run = if args.run {
        let run = empirical_queries(args.l, args.lambda, args.r, args.epsilon, args.max_iters)?;
        match run.measured {
            Some(m) => println!("measured={m} predicted={}", run.predicted),
            None => println!("measured=none predicted={}", run.predicted),
        }
        Some(run)
    } else {
        None
    };
    write_json(&args.report, &serde_json::json!({ "bound": lb, "run": run }))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct Transcript {
    instance: HardInstance,
    guarantee_bound: f64,
    replay_min: f64,
    guarantee_holds: bool,
    iterations: usize,
}

fn cmd_hard_run(args: &HardRunArgs) -> Result<u8> {
    let d = args.d.unwrap_or(2 * args.m + 2);
    let inst = HardInstance::new(d, args.m, args.p, args.kappa, args.l, args.lambda, args.eta)?;
    let shared = Arc::new(Mutex::new(inst));
    let oracle = resisting_oracle(shared.clone());
    let space = NormedSpace::lp(args.p, d)?;
    let reg = Regularizer::power_of_norm(space, args.lambda, vec![0.0; d])?;
    let sc = Scaffold::for_regularizer(&reg, &vec![0.0; d])?;
    let cfg = SolverConfig { max_iters: args.max_iters, ..Default::default() };
    let sol = agd_plus(&oracle, &reg, &sc, &vec![0.0; d], &cfg)?;
    let instance = shared.lock().map_err(|_| invalid("adversary lock poisoned"))?.clone();
    let t = Transcript {
        guarantee_bound: instance.guarantee_bound(),
        replay_min: instance.replay_min(),
        guarantee_holds: instance.replay_min() >= instance.guarantee_bound(),
        iterations: sol.trace.last().k,
        instance,
    };
    println!(
        "pieces={} replay_min={:.6e} bound={:.6e} holds={}",
        t.instance.signs.len(),
        t.replay_min,
        t.guarantee_bound,
        t.guarantee_holds
    );
    write_json(&args.transcript, &t)?;
    Ok(if t.guarantee_holds { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_selfcheck(args: &SelfcheckArgs) -> Result<u8> {
    let t = Instant::now();
    let results = selfcheck::run(args.seed, args.inject_fault);
    print!("{}", selfcheck::table(&results));
    let ok = results.iter().all(|r| r.passed);
    println!("{} in {:.2} s", if ok { "all suites passed" } else { "FAILED" }, t.elapsed().as_secs_f64());
    write_json(&args.report, &results)?;
    Ok(if ok { EXIT_OK } else { EXIT_INPUT })
}

fn cmd_reference(args: &ReferenceArgs) -> Result<u8> {
    let lp = load_with_overrides(&args.problem)?;
    let spec = match lp.build()? {
        Built::Composite(s) => s,
        Built::GradNorm(_) => return Err(invalid("the correlated builder has no composite objective")),
    };
    let r = match &args.cache {
        Some(dir) => ReferenceCache::new(dir)?.get_or_solve(&spec, args.tol)?,
        None => reference_solve(&spec, args.tol)?,
    };
    println!("f_ref={:.17e} method={:?} residual={:.3e}", r.f_ref, r.method, r.residual);
    write_json(&args.report, &r)?;
    Ok(EXIT_OK)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("COMPCOMP_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let out = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Gradnorm(a) => cmd_gradnorm(a),
        Command::Lb(a) => cmd_lb(a),
        Command::HardRun(a) => cmd_hard_run(a),
        Command::Selfcheck(a) => cmd_selfcheck(a),
        Command::Reference(a) => cmd_reference(a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
