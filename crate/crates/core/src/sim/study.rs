//! Monte Carlo study runner and its output files.

use std::fmt::Write as _;
use std::path::Path;

use crate::baselines::{chan_pairwise, mle_luo_tsai};
use crate::error::{PlrError, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{IndexFunction, ObservationSet};
use crate::profile::{fit_baseline, FixedPointConfig};
use crate::sim::gdist::{g_distance, TrueBaseline};
use crate::sim::settings::{generate, Setting, SettingSpec};
use crate::stats::{mean, mix_seed, sd};
use crate::zest::{estimate, estimate_ipw_weights, MissingnessSpec, SolverConfig};

/// Estimators a study can run. In Settings 3 and 4, `Proposed` uses
/// estimated inverse-probability weights while `Mle` and `Chan` use the
/// complete cases; without missingness all variants see the full sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Mle,
    Chan,
    Proposed,
    ProposedCc,
    MleIpw,
    /// Pair weights `ω_i ω_j`; experimental.
    ChanIpw,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Mle,
        Estimator::Chan,
        Estimator::Proposed,
        Estimator::ProposedCc,
        Estimator::MleIpw,
        Estimator::ChanIpw,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Chan => "chan",
            Estimator::Proposed => "proposed",
            Estimator::ProposedCc => "proposed_cc",
            Estimator::MleIpw => "mle_ipw",
            Estimator::ChanIpw => "chan_ipw",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Mle => "Luo & Tsai",
            Estimator::Chan => "Chan",
            Estimator::Proposed => "Proposed",
            Estimator::ProposedCc => "Proposed (complete cases)",
            Estimator::MleIpw => "Luo & Tsai (IPW)",
            Estimator::ChanIpw => "Chan (IPW, experimental)",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.token() == token.trim())
            .ok_or_else(|| PlrError::Config(format!("unknown estimator '{token}'")))
    }

    /// Comma-separated tokens, duplicates removed, order kept.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let e = Estimator::parse(t)?;
            if !out.contains(&e) {
                out.push(e);
            }
        }
        if out.is_empty() {
            return Err(PlrError::Config("no estimators requested".into()));
        }
        Ok(out)
    }

    fn weighted(self, setting: Setting) -> bool {
        setting.has_missingness() && matches!(self, Estimator::Proposed | Estimator::MleIpw | Estimator::ChanIpw)
    }

    /// How this estimator treats missing covariates in `setting`.
    pub fn data_treatment(self, setting: Setting) -> &'static str {
        if !setting.has_missingness() {
            "full sample"
        } else if self.weighted(setting) {
            "estimated inverse-probability weights"
        } else {
            "complete cases"
        }
    }
}

/// Numerical settings shared by every replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub solver: SolverConfig,
    pub fixed_point: FixedPointConfig,
    pub execution: Execution,
    pub max_failure_fraction: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            solver: SolverConfig::default(),
            fixed_point: FixedPointConfig::default(),
            execution: Execution::Parallel,
            max_failure_fraction: 0.1,
        }
    }
}

/// One estimator's output on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub beta: Vec<f64>,
    pub g_distance: f64,
}

/// Aggregates for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub beta_mean: Vec<f64>,
    pub beta_sd: Vec<f64>,
    pub g_mean: f64,
    pub g_sd: f64,
    pub replicates: usize,
    pub failures: usize,
    /// Indexed by replicate; `None` where the estimator failed.
    pub draws: Vec<Option<Draw>>,
    pub failure_messages: Vec<(usize, String)>,
}

impl EstimatorSummary {
    fn from_draws(estimator: Estimator, draws: Vec<std::result::Result<Draw, String>>, q: usize) -> Self {
        let failure_messages: Vec<(usize, String)> =
            draws.iter().enumerate().filter_map(|(i, d)| d.as_ref().err().map(|m| (i, m.clone()))).collect();
        let draws: Vec<Option<Draw>> = draws.into_iter().map(|d| d.ok()).collect();
        let ok: Vec<&Draw> = draws.iter().flatten().collect();
        let col = |j: usize| ok.iter().map(|d| d.beta[j]).collect::<Vec<_>>();
        let g: Vec<f64> = ok.iter().map(|d| d.g_distance).collect();
        EstimatorSummary {
            estimator,
            beta_mean: (0..q).map(|j| mean(&col(j))).collect(),
            beta_sd: (0..q).map(|j| sd(&col(j))).collect(),
            g_mean: mean(&g),
            g_sd: sd(&g),
            replicates: ok.len(),
            failures: failure_messages.len(),
            draws,
            failure_messages,
        }
    }

    /// Monte Carlo standard error of the mean of coordinate `j`.
    pub fn mc_se(&self, j: usize) -> f64 {
        self.beta_sd[j] / (self.replicates as f64).sqrt()
    }

    pub fn g_mc_se(&self) -> f64 {
        self.g_sd / (self.replicates as f64).sqrt()
    }
}

/// Results of one design point.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub setting: Setting,
    pub n: usize,
    pub seed: u64,
    pub beta0: Vec<f64>,
    pub requested: usize,
    pub summaries: Vec<EstimatorSummary>,
}

impl StudyResult {
    pub fn summary(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == e)
    }
}

/// Seed of replicate `rep`'s dataset.
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    mix_seed(seed, rep as u64)
}

fn ipw_spec(setting: Setting) -> Result<MissingnessSpec> {
    MissingnessSpec::parse(setting.missingness_regressors().expect("setting with missingness"))
}

fn run_one(
    estimator: Estimator,
    setting: Setting,
    full: &ObservationSet,
    complete: &ObservationSet,
    weighted: Option<&ObservationSet>,
    truth: &TrueBaseline,
    opts: &StudyOptions,
) -> Result<Draw> {
    let data = match (estimator.weighted(setting), setting.has_missingness()) {
        (true, _) => weighted.expect("weights computed when needed"),
        (false, true) => complete,
        (false, false) => full,
    };
    let (beta, baseline) = match estimator {
        Estimator::Proposed | Estimator::ProposedCc => {
            let e = estimate(data, &IndexFunction::xy(), &opts.solver, &opts.fixed_point)?;
            (e.beta_hat, e.baseline_hat)
        }
        Estimator::Mle | Estimator::MleIpw => {
            let e = mle_luo_tsai(data, &opts.solver, &opts.fixed_point)?;
            (e.beta_hat, e.baseline_hat)
        }
        Estimator::Chan | Estimator::ChanIpw => {
            let b = chan_pairwise(data, &opts.solver)?;
            let g = fit_baseline(data, &b, &opts.fixed_point)?;
            (b, g)
        }
    };
    let g_distance = g_distance(&baseline, truth)?;
    Ok(Draw { beta: beta.into_vec(), g_distance })
}

/// Runs every estimator on `replicates` datasets drawn with seeds
/// `replicate_seed(spec.seed, r)`. Replicates run under `opts.execution`
/// and land in fixed slots, so the result never depends on scheduling.
pub fn run_study(
    spec: &SettingSpec,
    replicates: usize,
    estimators: &[Estimator],
    opts: &StudyOptions,
) -> Result<StudyResult> {
    spec.validate()?;
    opts.solver.validate()?;
    opts.fixed_point.validate()?;
    if replicates < 2 {
        return Err(PlrError::Config(format!("need at least 2 replicates, got {replicates}")));
    }
    if estimators.is_empty() {
        return Err(PlrError::Config("no estimators requested".into()));
    }
    let setting = spec.setting;
    let needs_weights = estimators.iter().any(|e| e.weighted(setting));

    type Row = Vec<std::result::Result<Draw, String>>;
    let rows: Vec<Row> = map_indexed(opts.execution, replicates, |rep| {
        let rspec = SettingSpec { seed: replicate_seed(spec.seed, rep), ..spec.clone() };
        let fail_all = |msg: String| estimators.iter().map(|_| Err(msg.clone())).collect::<Row>();
        let (full, truth) = match generate(&rspec) {
            Ok(v) => v,
            Err(e) => return fail_all(format!("generation: {e}")),
        };
        let complete = if setting.has_missingness() {
            match full.complete_cases() {
                Ok(c) => c,
                Err(e) => return fail_all(format!("complete cases: {e}")),
            }
        } else {
            full.clone()
        };
        let weighted = if needs_weights {
            match ipw_spec(setting).and_then(|s| estimate_ipw_weights(&full, &s)) {
                Ok(fit) => Some(Ok(fit.data)),
                Err(e) => Some(Err(format!("selection model: {e}"))),
            }
        } else {
            None
        };
        estimators
            .iter()
            .map(|&est| {
                let w = match (&weighted, est.weighted(setting)) {
                    (Some(Err(m)), true) => return Err(m.clone()),
                    (Some(Ok(d)), _) => Some(d),
                    _ => None,
                };
                run_one(est, setting, &full, &complete, w, &truth, opts).map_err(|e| e.to_string())
            })
            .collect()
    });

    let q = spec.beta0.len();
    let mut summaries = Vec::with_capacity(estimators.len());
    for (j, &est) in estimators.iter().enumerate() {
        let column = rows.iter().map(|r| r[j].clone()).collect();
        let s = EstimatorSummary::from_draws(est, column, q);
        if s.failures as f64 > opts.max_failure_fraction * replicates as f64 || s.replicates < 2 {
            return Err(PlrError::TooManyFailures { failed: s.failures, total: replicates });
        }
        summaries.push(s);
    }
    Ok(StudyResult { setting, n: spec.n, seed: spec.seed, beta0: spec.beta0.clone(), requested: replicates, summaries })
}

/// `Σ`-combined Monte Carlo SE of the difference of two estimators'
/// coordinate-`j` means.
pub fn joint_mc_se(a: &EstimatorSummary, b: &EstimatorSummary, j: usize) -> f64 {
    (a.mc_se(j).powi(2) + b.mc_se(j).powi(2)).sqrt()
}

fn fmt_cell(mean: f64, sd: f64) -> String {
    format!("{mean:.2} ({sd:.2})")
}

/// Table layout: one row per (quantity, estimator), one column per `n`,
/// cells `mean (sd)`. All results must share a setting and estimator list.
pub fn write_results_csv(results: &[StudyResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let Some(first) = results.first() else {
        return Err(PlrError::Config("no results to write".into()));
    };
    let mut header = vec!["setting".to_string(), "quantity".into(), "estimator".into()];
    header.extend(results.iter().map(|r| format!("n={}", r.n)));
    w.write_record(&header)?;
    let q = first.beta0.len();
    let quantities: Vec<String> = (1..=q).map(|j| format!("beta{j}")).chain(["distance".into()]).collect();
    for (qi, quantity) in quantities.iter().enumerate() {
        for s in &first.summaries {
            let mut rec = vec![first.setting.id().to_string(), quantity.clone(), s.estimator.label().to_string()];
            for r in results {
                let t = r.summary(s.estimator).expect("same estimators at every n");
                rec.push(if qi < q { fmt_cell(t.beta_mean[qi], t.beta_sd[qi]) } else { fmt_cell(t.g_mean, t.g_sd) });
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format for plotting: bias of each coordinate and the mean
/// G-distance against `n`.
pub fn write_bias_vs_n_csv(results: &[StudyResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["setting", "estimator", "n", "quantity", "bias", "mean", "sd", "replicates", "failures"])?;
    for r in results {
        for s in &r.summaries {
            let base = |quantity: String, bias: f64, m: f64, d: f64| {
                vec![
                    r.setting.id().to_string(),
                    s.estimator.token().to_string(),
                    r.n.to_string(),
                    quantity,
                    bias.to_string(),
                    m.to_string(),
                    d.to_string(),
                    s.replicates.to_string(),
                    s.failures.to_string(),
                ]
            };
            for j in 0..r.beta0.len() {
                w.write_record(base(
                    format!("beta{}", j + 1),
                    s.beta_mean[j] - r.beta0[j],
                    s.beta_mean[j],
                    s.beta_sd[j],
                ))?;
            }
            w.write_record(base("distance".into(), s.g_mean, s.g_mean, s.g_sd))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text provenance: versions, seeds, numerical settings, data
/// treatment per estimator, and per-replicate failures.
pub fn meta_text(results: &[StudyResult], opts: &StudyOptions) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "plr {}", env!("CARGO_PKG_VERSION"));
    let Some(first) = results.first() else {
        return s;
    };
    let setting = first.setting;
    let _ = writeln!(s, "setting = {}", setting.id());
    let ns: Vec<String> = results.iter().map(|r| r.n.to_string()).collect();
    let _ = writeln!(s, "n = {}", ns.join(","));
    let _ = writeln!(s, "reps = {}", first.requested);
    let seeds: Vec<String> = results.iter().map(|r| format!("{}:{}", r.n, r.seed)).collect();
    let _ = writeln!(s, "study seed per n = {}", seeds.join(","));
    let _ = writeln!(s, "beta0 = {:?}", first.beta0);
    let _ = writeln!(s, "replicate seeds = splitmix64 mix of (seed, replicate index); datasets drawn with ChaCha8");
    let _ = writeln!(
        s,
        "solver: tol = {:e}, max_iter = {}, fd_step = {:e}, start = {:?}",
        opts.solver.tol, opts.solver.max_iter, opts.solver.fd_step, opts.solver.start
    );
    let _ = writeln!(
        s,
        "baseline fixed point: tol = {:e}, max_iter = {}, damping = {}",
        opts.fixed_point.tol, opts.fixed_point.max_iter, opts.fixed_point.damping
    );
    let _ = writeln!(s, "index function for proposed estimators: xy");
    if let Some(reg) = setting.missingness_regressors() {
        let _ = writeln!(s, "selection model regressors (assumed, matches generating mechanism): {reg}");
    }
    for e in &first.summaries {
        let _ = writeln!(s, "estimator {}: {}", e.estimator.token(), e.estimator.data_treatment(setting));
    }
    if !setting.is_discrete() {
        let _ =
            writeln!(s, "true G: N(0.25, 0.5^2) truncated to [0, inf); distance integrated to the 0.99999 quantile");
    }
    if setting.is_discrete() {
        let _ = writeln!(s, "true G: discrete, tail cut where remaining mass < 1e-12");
    }
    for r in results {
        for e in &r.summaries {
            let _ = writeln!(
                s,
                "n = {} {}: {} replicates, {} failures",
                r.n,
                e.estimator.token(),
                e.replicates,
                e.failures
            );
            for (rep, msg) in &e.failure_messages {
                let _ = writeln!(s, "  replicate {rep} failed: {msg}");
            }
        }
    }
    s
}

/// Writes `results.csv`, `bias_vs_n.csv` and `meta.txt` into `dir`.
pub fn write_outputs(results: &[StudyResult], opts: &StudyOptions, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_results_csv(results, &dir.join("results.csv"))?;
    write_bias_vs_n_csv(results, &dir.join("bias_vs_n.csv"))?;
    std::fs::write(dir.join("meta.txt"), meta_text(results, opts))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(Estimator::parse(e.token()).unwrap(), e);
        }
        assert_eq!(Estimator::parse_list("proposed, mle,proposed").unwrap(), vec![Estimator::Proposed, Estimator::Mle]);
        assert!(Estimator::parse_list("bogus").is_err());
    }

    #[test]
    fn treatment_by_setting() {
        assert_eq!(Estimator::Mle.data_treatment(Setting::One), "full sample");
        assert_eq!(Estimator::Mle.data_treatment(Setting::Four), "complete cases");
        assert_eq!(Estimator::Proposed.data_treatment(Setting::Three), "estimated inverse-probability weights");
        assert_eq!(Estimator::ProposedCc.data_treatment(Setting::Three), "complete cases");
    }

    #[test]
    fn too_few_replicates_rejected() {
        let spec = SettingSpec::new(Setting::One, 50, 1);
        assert!(run_study(&spec, 1, &[Estimator::Chan], &StudyOptions::default()).is_err());
    }

    #[test]
    fn small_study_is_deterministic_across_execution() {
        let spec = SettingSpec::new(Setting::Three, 60, 11);
        let ests = [Estimator::Proposed, Estimator::Mle, Estimator::Chan];
        let seq = StudyOptions { execution: Execution::Sequential, ..Default::default() };
        let par = StudyOptions { execution: Execution::Parallel, ..Default::default() };
        let a = run_study(&spec, 3, &ests, &seq).unwrap();
        let b = run_study(&spec, 3, &ests, &par).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summaries[0].replicates + a.summaries[0].failures, 3);
    }
}
