//! Z-estimation of β from `Ψ_n(β) = 0`, with the baseline profiled out at
//! every β, plus inverse-probability weights and bootstrap inference.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::chan_pairwise;
use crate::error::{PlrError, Result};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{condition_number, inf_norm, l2_norm, solve};
use crate::model::{BaselineDist, Beta, IndexFunction, ObservationSet};
use crate::profile::{fit_baseline, FixedPointConfig, ProfileSolver};
use crate::score::ScoreContext;
use crate::stats::{logistic, mean, mix_seed, percentile, sd, softplus};
use crate::tilt::TiltTable;

/// Jacobians with a larger condition estimate are treated as singular.
pub const MAX_JACOBIAN_CONDITION: f64 = 1e12;

/// Where the outer iteration starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartingPoint {
    Zero,
    /// Pairwise pseudo-likelihood estimate, falling back to zero if it fails.
    #[default]
    Chan,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Root tolerance on `‖Ψ_n‖∞` (gradient tolerance for likelihood ascent).
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step for numerical Jacobians.
    pub fd_step: f64,
    pub start: StartingPoint,
    /// Step halvings allowed per outer iteration.
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-8, max_iter: 100, fd_step: 1e-5, start: StartingPoint::Chan, max_halvings: 40 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(PlrError::Config("solver tol must be positive".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(PlrError::Config("finite-difference step must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(PlrError::Config("solver max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn starting_at(mut self, beta: &[f64]) -> Self {
        self.start = StartingPoint::Given(beta.to_vec());
        self
    }

    pub(crate) fn initial_beta(&self, data: &ObservationSet) -> Result<Beta> {
        match &self.start {
            StartingPoint::Zero => Ok(Beta::zeros(data.q())),
            StartingPoint::Given(v) => {
                let b = Beta::new(v.clone())?;
                b.check_dim(data.q())?;
                Ok(b)
            }
            StartingPoint::Chan => {
                let cfg = SolverConfig { start: StartingPoint::Zero, ..self.clone() };
                Ok(chan_pairwise(data, &cfg).unwrap_or_else(|_| Beta::zeros(data.q())))
            }
        }
    }
}

/// Per-coordinate bootstrap summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub replicates: usize,
    pub failures: usize,
    /// β̂* of every successful replicate, in replicate order.
    pub draws: Vec<Vec<f64>>,
}

/// Fitted β̂ with its profiled baseline and solver diagnostics.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub beta_hat: Beta,
    pub baseline_hat: BaselineDist,
    /// `‖Ψ_n(β̂)‖∞`, or the gradient norm for likelihood ascent.
    pub psi_norm: f64,
    pub jacobian_condition: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bootstrap: Option<BootstrapSummary>,
}

/// `Ψ_n(β)` with its profiled baseline, warm-starting the baseline solver.
struct PsiEvaluator<'a> {
    profile: ProfileSolver<'a>,
    a: &'a IndexFunction,
}

impl<'a> PsiEvaluator<'a> {
    fn new(data: &'a ObservationSet, a: &'a IndexFunction, cfg: &FixedPointConfig) -> Result<Self> {
        Ok(PsiEvaluator { profile: ProfileSolver::new(data, *cfg)?, a })
    }

    fn eval(&mut self, beta: &Beta) -> Result<(Vec<f64>, BaselineDist)> {
        let data = self.profile.data();
        let table = TiltTable::new(data, beta)?;
        let p = self.profile.fit_table(&table)?;
        let b = BaselineDist::new(data.support().to_vec(), p)?;
        let ctx = ScoreContext::from_table(data, beta, &b, table)?;
        Ok((ctx.psi(self.a)?, b))
    }

    fn jacobian(&mut self, beta: &Beta, h: f64) -> Result<DMatrix<f64>> {
        let q = beta.dim();
        let mut jac = DMatrix::zeros(q, q);
        for j in 0..q {
            let mut up = beta.as_slice().to_vec();
            let mut down = up.clone();
            up[j] += h;
            down[j] -= h;
            let (fu, _) = self.eval(&Beta::new(up)?)?;
            let (fd, _) = self.eval(&Beta::new(down)?)?;
            for i in 0..q {
                jac[(i, j)] = (fu[i] - fd[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

/// `Ψ_n(β) = Σ_i ω_i m_{n,a}(Y_i, X_i, β, p̂_W(β)) / Σ_i ω_i`.
pub fn psi(data: &ObservationSet, a: &IndexFunction, beta: &Beta, cfg: &FixedPointConfig) -> Result<Vec<f64>> {
    let b = fit_baseline(data, beta, cfg)?;
    ScoreContext::new(data, beta, &b)?.psi(a)
}

/// Central-difference Jacobian of `Ψ_n` at β with step `h`.
pub fn psi_jacobian(
    data: &ObservationSet,
    a: &IndexFunction,
    beta: &Beta,
    cfg: &FixedPointConfig,
    h: f64,
) -> Result<DMatrix<f64>> {
    let mut ev = PsiEvaluator::new(data, a, cfg)?;
    ev.eval(beta)?;
    ev.jacobian(beta, h)
}

/// Damped Newton on `Ψ_n`; step halving until `‖Ψ_n‖₂` decreases.
pub fn estimate(
    data: &ObservationSet,
    a: &IndexFunction,
    solver: &SolverConfig,
    cfg: &FixedPointConfig,
) -> Result<Estimate> {
    solver.validate()?;
    let mut beta = solver.initial_beta(data)?;
    let mut ev = PsiEvaluator::new(data, a, cfg)?;
    let (mut value, mut baseline) = ev.eval(&beta)?;
    let mut condition = f64::NAN;
    let mut iterations = 0;

    while inf_norm(&value) > solver.tol && iterations < solver.max_iter {
        let jac = ev.jacobian(&beta, solver.fd_step)?;
        condition = condition_number(&jac);
        if !(condition <= MAX_JACOBIAN_CONDITION) {
            return Err(PlrError::SingularJacobian { condition });
        }
        let neg: Vec<f64> = value.iter().map(|v| -v).collect();
        let step = solve(&jac, &neg)?;
        let current = l2_norm(&value);
        let mut accepted = None;
        let mut lambda = 1.0;
        for _ in 0..=solver.max_halvings {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + lambda * s).collect();
            if let Ok(trial) = Beta::new(trial) {
                if let Ok((v, b)) = ev.eval(&trial) {
                    if l2_norm(&v) < current {
                        accepted = Some((trial, v, b));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((b, v, base)) => {
                beta = b;
                value = v;
                baseline = base;
            }
            None => break,
        }
    }
    let psi_norm = inf_norm(&value);
    Ok(Estimate {
        beta_hat: beta,
        baseline_hat: baseline,
        psi_norm,
        jacobian_condition: condition,
        iterations,
        converged: psi_norm <= solver.tol,
        bootstrap: None,
    })
}

/// A column of the selection model's design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regressor {
    Intercept,
    Y,
    /// Zero-based covariate column.
    X(usize),
}

/// Logistic model for `pr(R = 1 | regressors)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessSpec {
    pub regressors: Vec<Regressor>,
    /// Fitted probabilities are clipped below at this value.
    pub floor: f64,
}

impl MissingnessSpec {
    pub fn new(regressors: Vec<Regressor>) -> Result<Self> {
        if regressors.is_empty() {
            return Err(PlrError::Config("missingness model needs at least one regressor".into()));
        }
        Ok(MissingnessSpec { regressors, floor: 1e-3 })
    }

    /// Comma-separated `intercept`, `y`, `x1`, `x2`, ...
    pub fn parse(s: &str) -> Result<Self> {
        let regressors = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "intercept" | "1" => Ok(Regressor::Intercept),
                "y" => Ok(Regressor::Y),
                x if x.starts_with('x') => x[1..]
                    .parse::<usize>()
                    .ok()
                    .filter(|j| *j >= 1)
                    .map(|j| Regressor::X(j - 1))
                    .ok_or_else(|| PlrError::Config(format!("bad regressor '{x}'"))),
                other => Err(PlrError::Config(format!("bad regressor '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        MissingnessSpec::new(regressors)
    }

    fn design_row(&self, data: &ObservationSet, i: usize) -> Result<Vec<f64>> {
        self.regressors
            .iter()
            .map(|r| {
                let v = match r {
                    Regressor::Intercept => 1.0,
                    Regressor::Y => data.y()[i],
                    Regressor::X(j) => {
                        if *j >= data.q() {
                            return Err(PlrError::Config(format!("regressor x{} out of range", j + 1)));
                        }
                        data.x_row(i)[*j]
                    }
                };
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(PlrError::Missingness(format!("regressor {r:?} unobserved at row {i}")))
                }
            })
            .collect()
    }
}

/// Fitted selection model and the reweighted sample.
#[derive(Debug, Clone)]
pub struct IpwFit {
    pub data: ObservationSet,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Complete rows whose fitted probability hit the floor.
    pub floored_complete_rows: usize,
    pub warnings: Vec<String>,
}

const IPW_GRAD_TOL: f64 = 1e-10;
const IPW_MAX_ITER: usize = 100;
const IPW_NEWTON_REGIME: f64 = 1e-6;
const IPW_MAX_COEF: f64 = 1e3;

/// Maximum-likelihood logistic fit of `R` on the specified regressors;
/// `w_i` becomes the fitted `pr(R_i = 1)`, floored.
pub fn estimate_ipw_weights(data: &ObservationSet, spec: &MissingnessSpec) -> Result<IpwFit> {
    if !data.has_incomplete() {
        return Err(PlrError::NoIncompleteRows);
    }
    let n = data.n();
    let d = spec.regressors.len();
    let design: Vec<Vec<f64>> = (0..n).map(|i| spec.design_row(data, i)).collect::<Result<_>>()?;
    let resp: Vec<f64> = data.r().iter().map(|r| if *r { 1.0 } else { 0.0 }).collect();

    let loglik = |g: &[f64]| -> f64 {
        design
            .iter()
            .zip(&resp)
            .map(|(z, r)| {
                let eta: f64 = z.iter().zip(g).map(|(a, b)| a * b).sum();
                r * eta - softplus(eta)
            })
            .sum::<f64>()
            / n as f64
    };

    let mut gamma = vec![0.0; d];
    let mut ll = loglik(&gamma);
    let mut iterations = 0;
    loop {
        let mut grad = vec![0.0; d];
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for (z, r) in design.iter().zip(&resp) {
            let eta: f64 = z.iter().zip(&gamma).map(|(a, b)| a * b).sum();
            let mu = logistic(eta);
            let v = mu * (1.0 - mu);
            for a in 0..d {
                grad[a] += (r - mu) * z[a] / n as f64;
                for b in 0..d {
                    hess[(a, b)] += v * z[a] * z[b] / n as f64;
                }
            }
        }
        if inf_norm(&grad) <= IPW_GRAD_TOL {
            break;
        }
        if iterations >= IPW_MAX_ITER {
            return Err(PlrError::Separation(format!(
                "logistic fit did not converge in {IPW_MAX_ITER} iterations (gradient {:e})",
                inf_norm(&grad)
            )));
        }
        let step =
            solve(&hess, &grad).map_err(|_| PlrError::Separation("singular information in selection model".into()))?;
        iterations += 1;
        // In the quadratic regime the log-likelihood differences sink below
        // rounding, so the line search is skipped there.
        if inf_norm(&grad) <= IPW_NEWTON_REGIME {
            gamma.iter_mut().zip(&step).for_each(|(g, s)| *g += s);
            ll = loglik(&gamma);
            if inf_norm(&step) <= 1e-12 * (1.0 + inf_norm(&gamma)) {
                break;
            }
            continue;
        }
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let trial: Vec<f64> = gamma.iter().zip(&step).map(|(g, s)| g + lambda * s).collect();
            let lt = loglik(&trial);
            if lt >= ll {
                gamma = trial;
                ll = lt;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if inf_norm(&gamma) > IPW_MAX_COEF {
            return Err(PlrError::Separation(format!(
                "selection-model coefficients diverging (|γ| = {:e})",
                inf_norm(&gamma)
            )));
        }
        if !moved {
            break;
        }
    }

    let mut floored = 0;
    let w: Vec<f64> = design
        .iter()
        .zip(data.r())
        .map(|(z, r)| {
            let eta: f64 = z.iter().zip(&gamma).map(|(a, b)| a * b).sum();
            let p = logistic(eta);
            if p < spec.floor {
                if *r {
                    floored += 1;
                }
                spec.floor
            } else {
                p
            }
        })
        .collect();
    let mut warnings = Vec::new();
    if floored > 0 {
        warnings.push(format!("{floored} complete rows had fitted probability at the floor {}", spec.floor));
    }
    Ok(IpwFit {
        data: data.with_weights(w)?,
        coefficients: gamma,
        iterations,
        floored_complete_rows: floored,
        warnings,
    })
}

/// Settings for nonparametric row bootstrap.
#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Re-fit the selection model on every resample.
    pub missingness: Option<MissingnessSpec>,
    pub execution: Execution,
    /// Error out when more than this fraction of replicates fail.
    pub max_failure_fraction: f64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapConfig {
            replicates,
            seed,
            missingness: None,
            execution: Execution::default(),
            max_failure_fraction: 0.1,
        }
    }
}

/// Row indices of bootstrap replicate `b`; depends only on `(seed, b, n)`.
pub fn resample_indices(seed: u64, b: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, b as u64));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// SE, percentile CI and counts from replicate estimates.
pub fn summarize_draws(draws: Vec<Vec<f64>>, failures: usize) -> BootstrapSummary {
    let q = draws.first().map(Vec::len).unwrap_or(0);
    let column = |j: usize| -> Vec<f64> { draws.iter().map(|d| d[j]).collect() };
    let se = (0..q).map(|j| sd(&column(j))).collect();
    let ci_lower = (0..q).map(|j| percentile(&column(j), 0.025)).collect();
    let ci_upper = (0..q).map(|j| percentile(&column(j), 0.975)).collect();
    BootstrapSummary { se, ci_lower, ci_upper, replicates: draws.len(), failures, draws }
}

fn fit_for_bootstrap(
    data: &ObservationSet,
    a: &IndexFunction,
    solver: &SolverConfig,
    cfg: &FixedPointConfig,
    missingness: Option<&MissingnessSpec>,
) -> Result<Estimate> {
    match missingness {
        Some(spec) => estimate(&estimate_ipw_weights(data, spec)?.data, a, solver, cfg),
        None => estimate(data, a, solver, cfg),
    }
}

/// Bootstrap SEs and 95% percentile intervals for β̂. Replicates that fail
/// are dropped and counted.
pub fn bootstrap(
    data: &ObservationSet,
    a: &IndexFunction,
    solver: &SolverConfig,
    cfg: &FixedPointConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapSummary> {
    let full = fit_for_bootstrap(data, a, solver, cfg, boot.missingness.as_ref())?;
    bootstrap_around(data, a, solver, cfg, boot, &full.beta_hat)
}

/// Replicates start from `center`, normally the full-sample β̂.
fn bootstrap_around(
    data: &ObservationSet,
    a: &IndexFunction,
    solver: &SolverConfig,
    cfg: &FixedPointConfig,
    boot: &BootstrapConfig,
    center: &Beta,
) -> Result<BootstrapSummary> {
    if boot.replicates < 2 {
        return Err(PlrError::Config("bootstrap needs at least 2 replicates".into()));
    }
    let rep_solver = solver.clone().starting_at(center.as_slice());
    let results = map_indexed(boot.execution, boot.replicates, |b| {
        let idx = resample_indices(boot.seed, b, data.n());
        data.select(&idx)
            .and_then(|d| fit_for_bootstrap(&d, a, &rep_solver, cfg, boot.missingness.as_ref()))
            .ok()
            .filter(|e| e.converged)
            .map(|e| e.beta_hat.into_vec())
    });
    let failures = results.iter().filter(|r| r.is_none()).count();
    if failures as f64 > boot.max_failure_fraction * boot.replicates as f64 {
        return Err(PlrError::TooManyFailures { failed: failures, total: boot.replicates });
    }
    let draws: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    if draws.len() < 2 {
        return Err(PlrError::TooManyFailures { failed: failures, total: boot.replicates });
    }
    Ok(summarize_draws(draws, failures))
}

/// `estimate` followed by `bootstrap`, attaching the summary.
pub fn estimate_with_bootstrap(
    data: &ObservationSet,
    a: &IndexFunction,
    solver: &SolverConfig,
    cfg: &FixedPointConfig,
    boot: &BootstrapConfig,
) -> Result<Estimate> {
    let mut est = fit_for_bootstrap(data, a, solver, cfg, boot.missingness.as_ref())?;
    est.bootstrap = Some(bootstrap_around(data, a, solver, cfg, boot, &est.beta_hat)?);
    Ok(est)
}

/// Column means of replicate vectors.
pub fn column_means(draws: &[Vec<f64>]) -> Vec<f64> {
    let q = draws.first().map(Vec::len).unwrap_or(0);
    (0..q).map(|j| mean(&draws.iter().map(|d| d[j]).collect::<Vec<_>>())).collect()
}
