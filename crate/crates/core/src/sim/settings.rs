//! Data generators for the four simulation settings.
//!
//! Covariates: `X2 ~ N(0, 0.5²)`, `X1 | X2 ~ Bernoulli(logistic(1 − X2))`.
//! Settings 1, 3 and 4 use the baseline density proportional to
//! `exp{−2(y − 0.25)²}` on `y ≥ 0`; setting 2 uses the discrete baseline
//! `(1 + y) 3^y e^{−3} / (4 y!)`. Settings 3 and 4 remove `X1` from rows
//! with `R = 0`, where `pr(R = 1)` is `logistic(1 − X2)` and
//! `logistic(1 − X2 − 2Y)` respectively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PlrError, Result};
use crate::model::ObservationSet;
use crate::sim::gdist::TrueBaseline;
use crate::stats::{logistic, norm_quantile, norm_sf};

/// Tail mass left out when sampling the infinite-support discrete baseline.
pub const DISCRETE_TAIL: f64 = 1e-12;

const NORMAL_MEAN: f64 = 0.25;
const NORMAL_SD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    One = 1,
    Two = 2,
    Three = 3,
    Four = 4,
}

impl Setting {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            3 => Ok(Setting::Three),
            4 => Ok(Setting::Four),
            _ => Err(PlrError::Config(format!("setting must be 1..4, got {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn has_missingness(self) -> bool {
        matches!(self, Setting::Three | Setting::Four)
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Setting::Two)
    }

    /// Baseline distribution `G` (the law of `Y` given `X = 0`).
    pub fn true_baseline(self) -> TrueBaseline {
        if self.is_discrete() {
            let (support, p) = discrete_tilted_pmf(0.0);
            TrueBaseline::discrete(support, p).expect("valid discrete baseline")
        } else {
            TrueBaseline::truncated_normal(NORMAL_MEAN, NORMAL_SD)
        }
    }

    /// Regressors of the correctly specified selection model.
    pub fn missingness_regressors(self) -> Option<&'static str> {
        match self {
            Setting::Three => Some("intercept,x2"),
            Setting::Four => Some("intercept,x2,y"),
            _ => None,
        }
    }
}

/// One simulated design point.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingSpec {
    pub setting: Setting,
    pub n: usize,
    pub seed: u64,
    pub beta0: Vec<f64>,
}

impl SettingSpec {
    pub fn new(setting: Setting, n: usize, seed: u64) -> Self {
        SettingSpec { setting, n, seed, beta0: vec![-1.0, -1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(PlrError::Config(format!("n must be at least 20, got {}", self.n)));
        }
        if self.beta0.len() != 2 || self.beta0.iter().any(|b| !b.is_finite()) {
            return Err(PlrError::Config("beta0 must be a finite 2-vector".into()));
        }
        Ok(())
    }
}

/// Draws a dataset; fully determined by `spec`.
pub fn generate(spec: &SettingSpec) -> Result<(ObservationSet, TrueBaseline)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x2_dist = Normal::new(0.0, 0.5).expect("valid normal");
    let n = spec.n;
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(2 * n);
    let mut r = Vec::with_capacity(n);
    for _ in 0..n {
        let x2: f64 = x2_dist.sample(&mut rng);
        let x1 = if rng.random::<f64>() < logistic(1.0 - x2) { 1.0 } else { 0.0 };
        let t = spec.beta0[0] * x1 + spec.beta0[1] * x2;
        let yi = if spec.setting.is_discrete() {
            sample_discrete(t, &mut rng)
        } else {
            sample_truncated_normal(NORMAL_MEAN + t / 4.0, NORMAL_SD, &mut rng)
        };
        let keep = match spec.setting {
            Setting::Three => rng.random::<f64>() < logistic(1.0 - x2),
            Setting::Four => rng.random::<f64>() < logistic(1.0 - x2 - 2.0 * yi),
            _ => true,
        };
        y.push(yi);
        x.push(if keep { x1 } else { f64::NAN });
        x.push(x2);
        r.push(keep);
    }
    let data = ObservationSet::from_flat(y, x, 2, r, vec![1.0; n])?;
    Ok((data, spec.setting.true_baseline()))
}

/// `N(mean, sd²)` truncated to `[0, ∞)`, by inversion of the upper tail.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    let alpha = -mean / sd;
    let tail = norm_sf(alpha);
    loop {
        let u: f64 = rng.random();
        if u <= 0.0 {
            continue;
        }
        let z = -norm_quantile(u * tail);
        if z.is_finite() {
            return (mean + sd * z).max(0.0);
        }
    }
}

/// Tilted discrete baseline `∝ exp(t y)(1 + y)3^y / y!`, i.e.
/// `(1 + y) λ^y e^{−λ} / {y! (1 + λ)}` with `λ = 3e^t`, cut where the
/// remaining tail mass drops below [`DISCRETE_TAIL`].
pub fn discrete_tilted_pmf(t: f64) -> (Vec<f64>, Vec<f64>) {
    let lambda = 3.0 * t.exp();
    let mut pmf = (-lambda).exp() / (1.0 + lambda);
    let mut support = Vec::new();
    let mut p = Vec::new();
    let mut cum = 0.0;
    let mut y = 0.0f64;
    loop {
        support.push(y);
        p.push(pmf);
        cum += pmf;
        if cum >= 1.0 - DISCRETE_TAIL || y > 10_000.0 {
            break;
        }
        pmf *= lambda * (2.0 + y) / ((1.0 + y) * (1.0 + y));
        y += 1.0;
    }
    (support, p)
}

fn sample_discrete<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    let lambda = 3.0 * t.exp();
    let u: f64 = rng.random();
    let mut pmf = (-lambda).exp() / (1.0 + lambda);
    let mut cum = pmf;
    let mut y = 0.0f64;
    while cum < u && cum < 1.0 - DISCRETE_TAIL && y < 10_000.0 {
        pmf *= lambda * (2.0 + y) / ((1.0 + y) * (1.0 + y));
        y += 1.0;
        cum += pmf;
    }
    y
}
