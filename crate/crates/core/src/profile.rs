//! Profile maximiser of the baseline jumps for fixed β.
//!
//! For fixed β the (weighted) log-likelihood in `p` is
//! `Σ_k d_k log p_k − Σ_i ω_i log Σ_k p_k exp(t_i Y(k))` with
//! `d_k = Σ_i ω_i 1{Y_i = Y(k)}`. Its stationarity condition
//! `p_k ∝ d_k / Σ_i ω_i e_ik / S_i(p)` is iterated directly. Each sweep is
//! the maximiser of a tangent minorant, so the likelihood never decreases;
//! the iteration checks this on every sweep.

use crate::error::{PlrError, Result};
use crate::model::{log_likelihood, BaselineDist, Beta, ObservationSet};
use crate::tilt::TiltTable;

/// Settings for the self-consistency iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once `max_k |p_k^new − p_k| ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight on the previous iterate, in `[0, 1)`.
    pub damping: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { tol: 1e-10, max_iter: 10_000, damping: 0.0 }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(PlrError::Config("fixed-point tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(PlrError::Config("fixed-point max_iter must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(PlrError::Config("fixed-point damping must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Fitted baseline together with iteration diagnostics.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub baseline: BaselineDist,
    pub sweeps: usize,
    pub last_change: f64,
    /// Objective value after each sweep (p-dependent part only).
    pub trace: Vec<f64>,
}

/// `p̂(β)`, or `p̂_W(β)` when the data carry weights.
pub fn fit_baseline(data: &ObservationSet, beta: &Beta, cfg: &FixedPointConfig) -> Result<BaselineDist> {
    fit_baseline_from(data, beta, cfg, None).map(|f| f.baseline)
}

/// As [`fit_baseline`], starting from `init` when given (warm start) and
/// from the weighted empirical proportions otherwise.
pub fn fit_baseline_from(
    data: &ObservationSet,
    beta: &Beta,
    cfg: &FixedPointConfig,
    init: Option<&[f64]>,
) -> Result<BaselineFit> {
    cfg.validate()?;
    let table = TiltTable::new(data, beta)?;
    let (p, sweeps, last_change, trace) = solve(&table, cfg, init)?;
    let baseline = BaselineDist::new(data.support().to_vec(), p)?;
    Ok(BaselineFit { baseline, sweeps, last_change, trace })
}

/// `log_likelihood(data, β, p̂(β))`.
pub fn profile_log_likelihood(data: &ObservationSet, beta: &Beta, cfg: &FixedPointConfig) -> Result<f64> {
    let b = fit_baseline(data, beta, cfg)?;
    log_likelihood(data, beta, &b)
}

/// Profile fits along a sequence of nearby β values, each warm-started
/// from the previous solution. One instance per thread.
#[derive(Debug)]
pub struct ProfileSolver<'a> {
    data: &'a ObservationSet,
    cfg: FixedPointConfig,
    warm: Option<Vec<f64>>,
    pub total_sweeps: usize,
}

impl<'a> ProfileSolver<'a> {
    pub fn new(data: &'a ObservationSet, cfg: FixedPointConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ProfileSolver { data, cfg, warm: None, total_sweeps: 0 })
    }

    pub fn data(&self) -> &'a ObservationSet {
        self.data
    }

    pub fn config(&self) -> &FixedPointConfig {
        &self.cfg
    }

    pub(crate) fn fit_table(&mut self, table: &TiltTable) -> Result<Vec<f64>> {
        let (p, sweeps, _, _) = solve(table, &self.cfg, self.warm.as_deref())?;
        self.total_sweeps += sweeps;
        self.warm = Some(p.clone());
        Ok(p)
    }

    pub fn fit(&mut self, beta: &Beta) -> Result<BaselineDist> {
        let table = TiltTable::new(self.data, beta)?;
        let p = self.fit_table(&table)?;
        BaselineDist::new(self.data.support().to_vec(), p)
    }

    /// Profile log-likelihood at β, warm-started.
    pub fn profile_log_likelihood(&mut self, beta: &Beta) -> Result<f64> {
        let b = self.fit(beta)?;
        log_likelihood(self.data, beta, &b)
    }
}

/// Objective `Σ_k d_k log p_k − Σ_j ω_j log S̃_j` given normalisers.
fn objective(table: &TiltTable, p: &[f64], s: &[f64]) -> f64 {
    let mut ll: f64 = table.d.iter().zip(p).map(|(d, p)| d * p.ln()).sum();
    ll -= table.omega.iter().zip(s).map(|(w, s)| w * s.ln()).sum::<f64>();
    ll
}

pub(crate) fn solve(
    table: &TiltTable,
    cfg: &FixedPointConfig,
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, usize, f64, Vec<f64>)> {
    let k = table.k;
    let mut p: Vec<f64> = match init {
        Some(p0) if p0.len() == k && p0.iter().all(|v| *v > 0.0 && v.is_finite()) => {
            let total: f64 = p0.iter().sum();
            p0.iter().map(|v| v / total).collect()
        }
        _ => table.d.iter().map(|d| d / table.total_weight).collect(),
    };
    let mut s = Vec::with_capacity(table.len());
    let mut denom = vec![0.0; k];
    let mut next = vec![0.0; k];
    let mut trace = Vec::new();
    let mut last_change = f64::INFINITY;

    for sweep in 1..=cfg.max_iter {
        table.normalisers(&p, &mut s);
        let ll = objective(table, &p, &s);
        if let Some(&prev) = trace.last() {
            if ll < prev - 1e-10 * (1.0 + f64::abs(prev)) {
                return Err(PlrError::LikelihoodDecrease { sweep, before: prev, after: ll });
            }
        }
        trace.push(ll);

        denom.iter_mut().for_each(|v| *v = 0.0);
        for (j, (w, sj)) in table.omega.iter().zip(&s).enumerate() {
            let c = w / sj;
            for (dk, e) in denom.iter_mut().zip(table.row(j)) {
                *dk += c * e;
            }
        }
        for ((nk, dk), den) in next.iter_mut().zip(&table.d).zip(&denom) {
            *nk = dk / den;
        }
        if cfg.damping > 0.0 {
            for (nk, pk) in next.iter_mut().zip(&p) {
                *nk = (1.0 - cfg.damping) * *nk + cfg.damping * pk;
            }
        }
        let total: f64 = next.iter().sum();
        last_change = 0.0;
        for (nk, pk) in next.iter_mut().zip(p.iter_mut()) {
            *nk /= total;
            last_change = f64::max(last_change, (*nk - *pk).abs());
            *pk = *nk;
        }
        if last_change <= cfg.tol {
            table.normalisers(&p, &mut s);
            trace.push(objective(table, &p, &s));
            return Ok((p, sweep, last_change, trace));
        }
    }
    Err(PlrError::BaselineNonConvergence { iterations: cfg.max_iter, last_change, last_iterate: p })
}
