use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plr::baselines::{chan_pairwise, mle_luo_tsai};
use plr::config::KeyValueConfig;
use plr::io::{read_joint_pmf_file, read_observations_file};
use plr::profile::fit_baseline;
use plr::projection::Truncation;
use plr::sim::settings::{Setting, SettingSpec};
use plr::sim::study::{run_study, write_outputs, Estimator, StudyOptions};
use plr::zest::{
    estimate, estimate_ipw_weights, estimate_with_bootstrap, BootstrapConfig, MissingnessSpec, StartingPoint,
};
use plr::{Estimate, Execution, FixedPointConfig, IndexFunction, PlrError, Result, SolverConfig};

#[derive(Parser)]
#[command(name = "plr", version, about = "Proportional likelihood ratio regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit β and the baseline to a CSV sample.
    Fit(FitArgs),
    /// Run a Monte Carlo study for one of the four simulation settings.
    Simulate(SimulateArgs),
    /// Exact projection diagnostics on a finite joint pmf.
    ProjectLab(LabArgs),
}

/// Numerical options shared by `fit` and `simulate`.
#[derive(Args, Default)]
struct NumericArgs {
    /// Root tolerance on the estimating function.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Central-difference step for the Jacobian.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Starting point: chan, zero, or comma-separated values.
    #[arg(long)]
    start: Option<String>,
    /// Baseline fixed-point tolerance.
    #[arg(long)]
    fp_tol: Option<f64>,
    #[arg(long)]
    fp_max_iter: Option<usize>,
    #[arg(long)]
    fp_damping: Option<f64>,
    /// Run replicates on one thread.
    #[arg(long)]
    sequential: bool,
    /// Worker threads for the parallel pool (0 = rayon default).
    #[arg(long)]
    threads: Option<usize>,
}

const NUMERIC_KEYS: [&str; 9] =
    ["tol", "max-iter", "fd-step", "start", "fp-tol", "fp-max-iter", "fp-damping", "sequential", "threads"];

#[derive(Args)]
struct FitArgs {
    /// CSV with columns y, x1..xq and optional r, w.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Index function: xy, x or x_y2.
    #[arg(long)]
    a: Option<String>,
    /// proposed, mle or chan.
    #[arg(long)]
    estimator: Option<String>,
    /// Selection-model regressors, e.g. "intercept,x2,y".
    #[arg(long)]
    ipw: Option<String>,
    /// Bootstrap replicates (0 = none).
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for estimate.csv, baseline.csv and bootstrap files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    numeric: NumericArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    setting: Option<u8>,
    /// Sample size or comma-separated list.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: proposed, mle, chan, proposed_cc, mle_ipw, chan_ipw.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    numeric: NumericArgs,
}

#[derive(Args)]
struct LabArgs {
    /// CSV with columns y, x1..xq, prob.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    a: Option<String>,
    /// Neumann series terms compared against the exact solve.
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<KeyValueConfig> {
    path.map_or_else(|| Ok(KeyValueConfig::default()), KeyValueConfig::from_file)
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| PlrError::Config(format!("missing required option --{key}")))
}

struct Numeric {
    solver: SolverConfig,
    fixed_point: FixedPointConfig,
    execution: Execution,
}

fn parse_start(s: &str) -> Result<StartingPoint> {
    match s.trim() {
        "chan" => Ok(StartingPoint::Chan),
        "zero" => Ok(StartingPoint::Zero),
        list => list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| PlrError::Config(format!("bad start value '{t}'"))))
            .collect::<Result<Vec<_>>>()
            .map(StartingPoint::Given),
    }
}

fn numeric(args: NumericArgs, cfg: &KeyValueConfig) -> Result<Numeric> {
    let mut solver = SolverConfig::default();
    let mut fixed_point = FixedPointConfig::default();
    if let Some(v) = cfg.merge(args.tol, "tol")? {
        solver.tol = v;
    }
    if let Some(v) = cfg.merge(args.max_iter, "max-iter")? {
        solver.max_iter = v;
    }
    if let Some(v) = cfg.merge(args.fd_step, "fd-step")? {
        solver.fd_step = v;
    }
    if let Some(v) = cfg.merge(args.start, "start")? {
        solver.start = parse_start(&v)?;
    }
    if let Some(v) = cfg.merge(args.fp_tol, "fp-tol")? {
        fixed_point.tol = v;
    }
    if let Some(v) = cfg.merge(args.fp_max_iter, "fp-max-iter")? {
        fixed_point.max_iter = v;
    }
    if let Some(v) = cfg.merge(args.fp_damping, "fp-damping")? {
        fixed_point.damping = v;
    }
    solver.validate()?;
    fixed_point.validate()?;
    let execution = if cfg.flag(args.sequential, "sequential")? { Execution::Sequential } else { Execution::Parallel };
    if let Some(t) = cfg.merge(args.threads, "threads")? {
        set_threads(t)?;
    }
    Ok(Numeric { solver, fixed_point, execution })
}

#[cfg(feature = "parallel")]
fn set_threads(t: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .map_err(|e| PlrError::Config(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> Result<()> {
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn write_fit_outputs(dir: &Path, est: &Estimate, estimator: &str, a: &str, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("estimate.csv"))?;
    w.write_record(["parameter", "estimate", "se", "ci_lower", "ci_upper"])?;
    for (j, b) in est.beta_hat.iter().enumerate() {
        let (se, lo, hi) = match &est.bootstrap {
            Some(s) => (s.se[j].to_string(), s.ci_lower[j].to_string(), s.ci_upper[j].to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([format!("beta{}", j + 1), b.to_string(), se, lo, hi])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("baseline.csv"))?;
    w.write_record(["y", "p"])?;
    for (y, p) in est.baseline_hat.support().iter().zip(est.baseline_hat.p()) {
        w.write_record([y.to_string(), p.to_string()])?;
    }
    w.flush()?;

    let mut meta = format!(
        "plr {}\nestimator = {estimator}\na = {a}\nseed = {seed}\npsi_norm = {}\niterations = {}\nconverged = {}\n",
        env!("CARGO_PKG_VERSION"),
        est.psi_norm,
        est.iterations,
        est.converged
    );
    if let Some(s) = &est.bootstrap {
        meta.push_str(&format!("bootstrap replicates = {}\nbootstrap failures = {}\n", s.replicates, s.failures));
        let mut w = csv::Writer::from_path(dir.join("bootstrap_draws.csv"))?;
        let header: Vec<String> = (1..=est.beta_hat.dim()).map(|j| format!("beta{j}")).collect();
        w.write_record(&header)?;
        for d in &s.draws {
            w.write_record(d.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    std::fs::write(dir.join("meta.txt"), meta)?;
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut keys = vec!["data", "a", "estimator", "ipw", "bootstrap", "seed", "out"];
    keys.extend(NUMERIC_KEYS);
    cfg.check_keys(&keys)?;

    let data_path: PathBuf = required(cfg.merge(args.data, "data")?, "data")?;
    let a_name = cfg.merge(args.a, "a")?.unwrap_or_else(|| "xy".into());
    if a_name == "custom" {
        return Err(PlrError::Config(
            "custom index functions are supplied through the library (IndexFunction::custom); use xy, x or x_y2 here"
                .into(),
        ));
    }
    let a = IndexFunction::from_name(&a_name)?;
    let estimator = cfg.merge(args.estimator, "estimator")?.unwrap_or_else(|| "proposed".into());
    let ipw = cfg.merge(args.ipw, "ipw")?.map(|s| MissingnessSpec::parse(&s)).transpose()?;
    let b: usize = cfg.merge(args.bootstrap, "bootstrap")?.unwrap_or(0);
    let seed: u64 = cfg.merge(args.seed, "seed")?.unwrap_or(1);
    let out: Option<PathBuf> = cfg.merge(args.out, "out")?;
    let num = numeric(args.numeric, &cfg)?;

    let raw = read_observations_file(&data_path)?;
    println!(
        "data: n = {}, complete = {}, q = {}, distinct responses = {}",
        raw.n(),
        raw.n_complete(),
        raw.q(),
        raw.k()
    );
    if raw.has_incomplete() && ipw.is_none() {
        println!("note: incomplete rows present and no --ipw model given; they receive zero weight");
    }

    let est = match estimator.as_str() {
        "proposed" if b > 0 => {
            let boot =
                BootstrapConfig { missingness: ipw.clone(), execution: num.execution, ..BootstrapConfig::new(b, seed) };
            estimate_with_bootstrap(&raw, &a, &num.solver, &num.fixed_point, &boot)?
        }
        other => {
            if b > 0 {
                return Err(PlrError::Config("--bootstrap is available for the proposed estimator only".into()));
            }
            let data = match &ipw {
                Some(spec) => {
                    let fit = estimate_ipw_weights(&raw, spec)?;
                    println!("selection model coefficients: [{}]", fmt_vec(&fit.coefficients));
                    fit.warnings.iter().for_each(|w| println!("warning: {w}"));
                    fit.data
                }
                None => raw.clone(),
            };
            match other {
                "proposed" => estimate(&data, &a, &num.solver, &num.fixed_point)?,
                "mle" => mle_luo_tsai(&data, &num.solver, &num.fixed_point)?,
                "chan" => {
                    let beta_hat = chan_pairwise(&data, &num.solver)?;
                    let baseline_hat = fit_baseline(&data, &beta_hat, &num.fixed_point)?;
                    Estimate {
                        beta_hat,
                        baseline_hat,
                        psi_norm: f64::NAN,
                        jacobian_condition: f64::NAN,
                        iterations: 0,
                        converged: true,
                        bootstrap: None,
                    }
                }
                e => return Err(PlrError::Config(format!("unknown estimator '{e}' (proposed, mle, chan)"))),
            }
        }
    };

    println!("estimator: {estimator} (a = {})", a.name());
    println!("beta_hat: [{}]", fmt_vec(&est.beta_hat));
    println!("iterations: {}, converged: {}, |psi|: {:e}", est.iterations, est.converged, est.psi_norm);
    println!("baseline: {} jumps, mean {:.6}", est.baseline_hat.len(), est.baseline_hat.mean());
    if let Some(s) = &est.bootstrap {
        println!("bootstrap: {} replicates ({} failed)", s.replicates, s.failures);
        println!("  se: [{}]", fmt_vec(&s.se));
        println!("  95% ci lower: [{}]", fmt_vec(&s.ci_lower));
        println!("  95% ci upper: [{}]", fmt_vec(&s.ci_upper));
    }
    if let Some(dir) = out {
        write_fit_outputs(&dir, &est, &estimator, a.name(), seed)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut keys = vec!["setting", "n", "reps", "seed", "estimators", "out"];
    keys.extend(NUMERIC_KEYS);
    cfg.check_keys(&keys)?;

    let setting = Setting::from_id(required(cfg.merge(args.setting, "setting")?, "setting")?)?;
    let ns: Vec<usize> = cfg
        .merge(args.n, "n")?
        .unwrap_or_else(|| "400".into())
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| PlrError::Config(format!("bad sample size '{t}'"))))
        .collect::<Result<_>>()?;
    let reps: usize = cfg.merge(args.reps, "reps")?.unwrap_or(100);
    let seed: u64 = cfg.merge(args.seed, "seed")?.unwrap_or(1);
    let estimators = Estimator::parse_list(
        &cfg.merge(args.estimators, "estimators")?.unwrap_or_else(|| "proposed,mle,chan".into()),
    )?;
    let out: PathBuf = required(cfg.merge(args.out, "out")?, "out")?;
    let num = numeric(args.numeric, &cfg)?;
    let opts = StudyOptions {
        solver: num.solver,
        fixed_point: num.fixed_point,
        execution: num.execution,
        ..StudyOptions::default()
    };

    let mut results = Vec::with_capacity(ns.len());
    for &n in &ns {
        // each n gets its own stream so adding sizes leaves others unchanged
        let spec = SettingSpec::new(setting, n, plr::stats::mix_seed(seed, n as u64));
        let r = run_study(&spec, reps, &estimators, &opts)?;
        for s in &r.summaries {
            println!(
                "setting {} n={} {:<12} beta=[{}] sd=[{}] G-distance {:.4} ({:.4}) ok={} failed={}",
                setting.id(),
                n,
                s.estimator.token(),
                fmt_vec(&s.beta_mean),
                fmt_vec(&s.beta_sd),
                s.g_mean,
                s.g_sd,
                s.replicates,
                s.failures
            );
        }
        results.push(r);
    }
    write_outputs(&results, &opts, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_lab(args: LabArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.check_keys(&["model", "a", "terms"])?;
    let path: PathBuf = required(cfg.merge(args.model, "model")?, "model")?;
    let a_name = cfg.merge(args.a, "a")?.unwrap_or_else(|| "xy".into());
    let terms: usize = cfg.merge(args.terms, "terms")?.unwrap_or(60);
    let model = read_joint_pmf_file(&path)?;
    let a = model.centered(&model.eval(&IndexFunction::from_name(&a_name)?));

    let c = model.contraction();
    println!("grid: K = {}, M = {}, q = {}", model.k(), model.m(), model.q());
    println!("contraction norm (mean-zero subspace): {:.12}", c.norm);
    println!("eigenvalue on constants: {:.12}", c.constant_eigenvalue);
    let p1 = model.project_lambda1(&a)?;
    let p2 = model.project_lambda2(&a);
    let perp = model.project_perp(&a, Truncation::Exact)?;
    println!("a = {a_name} (centered), |a| = {:.10}", model.norm(&a));
    println!("|Pi(a | Lambda1)| = {:.10}", model.norm(&p1));
    println!("|Pi(a | Lambda2)| = {:.10}", model.norm(&p2));
    println!("|Pi(a | Lambda-perp)| = {:.10}", model.norm(&perp));
    let exact = model.solve_hstar(&a)?;
    let series = model.series_hstar(&a, terms);
    println!("series ({terms} terms) vs exact h*: max abs error {:e}", exact.max_abs_diff(&series));
    let s_eff = model.efficient_score(Truncation::Exact)?;
    let s0 = model.efficient_score(Truncation::Terms(0))?;
    println!("|S_eff| = {:.10}, |S_eff - one-term truncation| = {:e}", model.norm(&s_eff), model.norm(&s_eff.sub(&s0)));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::ProjectLab(a) => run_lab(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
