//! Domain types and evaluation of the proportional likelihood ratio model
//!
//! The conditional law of `Y` given `X = x` is the exponential tilt
//! `exp(βᵀx y) g(y) / ∫ exp(βᵀx s) dG(s)` of a baseline distribution `G`.
//! Everything here works with a discrete `G` supported on the distinct
//! observed responses.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{PlrError, Result};

/// Largest admissible |βᵀx y| for raw (unstabilised) tilt evaluation.
pub const MAX_TILT_EXPONENT: f64 = 700.0;

/// Regression parameter β.
#[derive(Debug, Clone, PartialEq)]
pub struct Beta(Vec<f64>);

impl Beta {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(PlrError::InvalidData("beta must have at least one entry".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PlrError::InvalidData("beta has non-finite entries".into()));
        }
        Ok(Beta(values))
    }

    pub fn zeros(q: usize) -> Self {
        Beta(vec![0.0; q])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// βᵀx.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    pub(crate) fn check_dim(&self, q: usize) -> Result<()> {
        if self.0.len() != q {
            return Err(PlrError::Dimension { expected: q, got: self.0.len() });
        }
        Ok(())
    }
}

impl Deref for Beta {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Beta {
    /// Panics on non-finite entries; use [`Beta::new`] for checked construction.
    fn from(v: Vec<f64>) -> Self {
        Beta::new(v).expect("finite beta")
    }
}

/// Jumps of a discrete baseline distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineDist {
    support: Vec<f64>,
    p: Vec<f64>,
}

impl BaselineDist {
    pub fn new(support: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if support.len() != p.len() {
            return Err(PlrError::Dimension { expected: support.len(), got: p.len() });
        }
        if support.is_empty() {
            return Err(PlrError::InvalidData("empty baseline support".into()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PlrError::InvalidData("baseline support must be strictly increasing".into()));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PlrError::InvalidData("baseline masses must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PlrError::InvalidData(format!("baseline masses sum to {total}, not 1")));
        }
        Ok(BaselineDist { support, p })
    }

    /// Normalises `weights` onto the simplex first.
    pub fn from_weights(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(PlrError::InvalidData("baseline weights must have positive finite sum".into()));
        }
        let p = weights.iter().map(|w| w / total).collect();
        BaselineDist::new(support, p)
    }

    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let k = support.len();
        BaselineDist::from_weights(support, vec![1.0; k])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Step cdf `Ĝ(t) = Σ_{Y(k) ≤ t} p_k`.
    pub fn cdf(&self, t: f64) -> f64 {
        let upto = self.support.partition_point(|s| *s <= t);
        self.p[..upto].iter().sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.p).map(|(y, p)| y * p).sum()
    }

    pub(crate) fn index_of(&self, y: f64) -> Option<usize> {
        self.support.binary_search_by(|s| s.total_cmp(&y)).ok()
    }
}

/// The sample consumed by every estimator.
///
/// `w` holds the selection probabilities `W_i` (or their estimates); a row
/// enters every sum with analysis weight `r_i / w_i`. Incomplete rows are
/// retained (their `x` entries may be `NaN`) but never contribute.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    y: Vec<f64>,
    x: Vec<f64>,
    q: usize,
    r: Vec<bool>,
    w: Vec<f64>,
    support: Vec<f64>,
    support_index: Vec<Option<usize>>,
}

impl ObservationSet {
    /// Fully observed, unit-weight sample.
    pub fn new(y: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        ObservationSet::with_missingness(y, x, vec![true; n], vec![1.0; n])
    }

    pub fn with_missingness(y: Vec<f64>, x: Vec<Vec<f64>>, r: Vec<bool>, w: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if x.len() != n {
            return Err(PlrError::Dimension { expected: n, got: x.len() });
        }
        let q = x.first().map(Vec::len).unwrap_or(0);
        if q == 0 {
            return Err(PlrError::InvalidData("covariate matrix has no columns".into()));
        }
        if x.iter().any(|row| row.len() != q) {
            return Err(PlrError::InvalidData("ragged covariate matrix".into()));
        }
        let flat = x.into_iter().flatten().collect();
        ObservationSet::from_flat(y, flat, q, r, w)
    }

    /// `x` is row-major `n × q`.
    pub fn from_flat(y: Vec<f64>, x: Vec<f64>, q: usize, r: Vec<bool>, w: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(PlrError::InvalidData(format!("need at least 2 observations, got {n}")));
        }
        if q == 0 || x.len() != n * q {
            return Err(PlrError::Dimension { expected: n * q.max(1), got: x.len() });
        }
        if r.len() != n {
            return Err(PlrError::Dimension { expected: n, got: r.len() });
        }
        if w.len() != n {
            return Err(PlrError::Dimension { expected: n, got: w.len() });
        }
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PlrError::InvalidData(format!("weight at row {i} is not positive")));
        }
        for i in 0..n {
            if !r[i] {
                continue;
            }
            if !y[i].is_finite() {
                return Err(PlrError::InvalidData(format!("non-finite response at complete row {i}")));
            }
            if x[i * q..(i + 1) * q].iter().any(|v| !v.is_finite()) {
                return Err(PlrError::InvalidData(format!("non-finite covariate at complete row {i}")));
            }
        }

        let mut support: Vec<f64> = (0..n).filter(|&i| r[i]).map(|i| y[i]).collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        if support.len() < 2 {
            return Err(PlrError::InvalidData(format!(
                "need at least 2 distinct complete responses, got {}",
                support.len()
            )));
        }
        let support_index =
            (0..n).map(|i| if r[i] { support.binary_search_by(|s| s.total_cmp(&y[i])).ok() } else { None }).collect();
        Ok(ObservationSet { y, x, q, r, w, support, support_index })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn r(&self) -> &[bool] {
        &self.r
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    /// Position of `y_i` in the support, `None` for incomplete rows.
    pub fn support_index(&self, i: usize) -> Option<usize> {
        self.support_index[i]
    }

    /// `r_i / w_i`.
    pub fn analysis_weight(&self, i: usize) -> f64 {
        if self.r[i] {
            1.0 / self.w[i]
        } else {
            0.0
        }
    }

    pub fn n_complete(&self) -> usize {
        self.r.iter().filter(|r| **r).count()
    }

    pub fn has_incomplete(&self) -> bool {
        self.r.iter().any(|r| !*r)
    }

    /// Weighted counts `Σ_i (r_i/w_i) 1{Y_i = Y(k)}`.
    pub fn atom_weights(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.k()];
        for i in 0..self.n() {
            if let Some(k) = self.support_index[i] {
                d[k] += self.analysis_weight(i);
            }
        }
        d
    }

    /// Same rows with new selection probabilities.
    pub fn with_weights(&self, w: Vec<f64>) -> Result<Self> {
        ObservationSet::from_flat(self.y.clone(), self.x.clone(), self.q, self.r.clone(), w)
    }

    /// Complete rows only, unit weights.
    pub fn complete_cases(&self) -> Result<Self> {
        let rows: Vec<usize> = (0..self.n()).filter(|&i| self.r[i]).collect();
        let mut sub = self.select(&rows)?;
        sub.w.iter_mut().for_each(|w| *w = 1.0);
        Ok(sub)
    }

    /// Rows at `indices` (with repetition), keeping `r` and `w`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut y = Vec::with_capacity(indices.len());
        let mut x = Vec::with_capacity(indices.len() * self.q);
        let mut r = Vec::with_capacity(indices.len());
        let mut w = Vec::with_capacity(indices.len());
        for &i in indices {
            y.push(self.y[i]);
            x.extend_from_slice(self.x_row(i));
            r.push(self.r[i]);
            w.push(self.w[i]);
        }
        ObservationSet::from_flat(y, x, self.q, r, w)
    }

    /// Empirical baseline `d_k / Σ d`.
    pub fn empirical_baseline(&self) -> BaselineDist {
        let d = self.atom_weights();
        BaselineDist::from_weights(self.support.clone(), d).expect("positive atom weights")
    }
}

type IndexFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A q-vector valued function `a(y, x)` generating an estimating equation.
#[derive(Clone)]
pub struct IndexFunction {
    name: String,
    f: Arc<IndexFn>,
}

impl IndexFunction {
    /// `f(y, x, out)` must write `out.len() == x.len()` values.
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        IndexFunction { name: name.into(), f: Arc::new(f) }
    }

    /// `a(y, x) = x y`, the approximated efficient score.
    pub fn xy() -> Self {
        IndexFunction::custom("xy", |y, x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = v * y;
            }
        })
    }

    /// `a(y, x) = x`.
    pub fn x() -> Self {
        IndexFunction::custom("x", |_, x, out| out.copy_from_slice(x))
    }

    /// `a(y, x) = x y²`.
    pub fn x_y2() -> Self {
        IndexFunction::custom("x_y2", |y, x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = v * y * y;
            }
        })
    }

    /// `a(y, x) = c`; its estimating function vanishes identically.
    pub fn constant(c: Vec<f64>) -> Self {
        IndexFunction::custom("constant", move |_, _, out| out.copy_from_slice(&c))
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "xy" => Ok(IndexFunction::xy()),
            "x" => Ok(IndexFunction::x()),
            "x_y2" => Ok(IndexFunction::x_y2()),
            other => Err(PlrError::Config(format!("unknown index function '{other}' (known: xy, x, x_y2)"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval_into(&self, y: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(y, x, out)
    }

    pub fn eval(&self, y: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(y, x, &mut out);
        out
    }
}

impl fmt::Debug for IndexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexFunction").field("name", &self.name).finish()
    }
}

/// Raw tilt kernel `exp(βᵀx Y(k))` over the baseline support.
pub fn tilt_weights(beta: &Beta, x_row: &[f64], b: &BaselineDist) -> Result<Vec<f64>> {
    beta.check_dim(x_row.len())?;
    let t = beta.dot(x_row);
    b.support()
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let e = t * y;
            if e.abs() > MAX_TILT_EXPONENT || !e.is_finite() {
                Err(PlrError::TiltOverflow { index: k, exponent: e })
            } else {
                Ok(e.exp())
            }
        })
        .collect()
}

/// `log Σ_k p_k exp(t Y(k))`, evaluated with the max-shift.
pub(crate) fn log_tilt_normaliser(t: f64, support: &[f64], p: &[f64]) -> f64 {
    let shift = support.iter().zip(p).filter(|(_, p)| **p > 0.0).map(|(y, _)| t * y).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = support.iter().zip(p).map(|(y, p)| p * (t * y - shift).exp()).sum();
    shift + s.ln()
}

/// Conditional pmf of `Y` given `X = x_row` over the baseline support.
pub fn conditional_pmf(beta: &Beta, x_row: &[f64], b: &BaselineDist) -> Result<Vec<f64>> {
    beta.check_dim(x_row.len())?;
    let t = beta.dot(x_row);
    if !t.is_finite() {
        return Err(PlrError::InvalidData("non-finite linear predictor".into()));
    }
    if t == 0.0 {
        return Ok(b.p().to_vec());
    }
    let shift = b.support().iter().map(|y| t * y).fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = b.support().iter().zip(b.p()).map(|(y, p)| p * (t * y - shift).exp()).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// Weighted log-likelihood
/// `Σ_i (r_i/w_i) [βᵀX_iY_i + log p_{k(i)} − log Σ_k p_k exp(βᵀX_iY(k))]`.
pub fn log_likelihood(data: &ObservationSet, beta: &Beta, b: &BaselineDist) -> Result<f64> {
    beta.check_dim(data.q())?;
    let mut total = 0.0;
    for i in 0..data.n() {
        let omega = data.analysis_weight(i);
        if omega == 0.0 {
            continue;
        }
        let yi = data.y()[i];
        let k = b
            .index_of(yi)
            .ok_or_else(|| PlrError::InvalidData(format!("response {yi} at row {i} not in baseline support")))?;
        let pk = b.p()[k];
        if pk <= 0.0 {
            return Err(PlrError::ZeroMass { row: i });
        }
        let t = beta.dot(data.x_row(i));
        total += omega * (t * yi + pk.ln() - log_tilt_normaliser(t, b.support(), b.p()));
    }
    Ok(total)
}
