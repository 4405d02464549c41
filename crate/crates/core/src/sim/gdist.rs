//! L₁ distance `∫ |Ĝ(t) − G(t)| dt` between a fitted step baseline and the
//! true baseline cdf.

use crate::error::{PlrError, Result};
use crate::model::BaselineDist;
use crate::stats::{norm_cdf, norm_pdf, norm_quantile};

/// Upper integration limit uses this quantile of the true `G`.
pub const UPPER_QUANTILE: f64 = 0.99999;

/// The data-generating baseline distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueBaseline {
    /// `N(mean, sd²)` truncated to `[0, ∞)`.
    TruncatedNormal { mean: f64, sd: f64 },
    /// Finite-support step distribution.
    Discrete { support: Vec<f64>, p: Vec<f64> },
}

impl TrueBaseline {
    pub fn truncated_normal(mean: f64, sd: f64) -> Self {
        TrueBaseline::TruncatedNormal { mean, sd }
    }

    pub fn discrete(support: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if support.len() != p.len() || support.is_empty() {
            return Err(PlrError::InvalidData("discrete baseline support/mass mismatch".into()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PlrError::InvalidData("discrete baseline support must increase".into()));
        }
        Ok(TrueBaseline::Discrete { support, p })
    }

    fn lower_tail(mean: f64, sd: f64) -> f64 {
        norm_cdf(-mean / sd)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            TrueBaseline::TruncatedNormal { mean, sd } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let lo = Self::lower_tail(*mean, *sd);
                ((norm_cdf((t - mean) / sd) - lo) / (1.0 - lo)).clamp(0.0, 1.0)
            }
            TrueBaseline::Discrete { support, p } => {
                let upto = support.partition_point(|s| *s <= t);
                p[..upto].iter().sum::<f64>().min(1.0)
            }
        }
    }

    /// Smallest point of the support.
    pub fn lower(&self) -> f64 {
        match self {
            TrueBaseline::TruncatedNormal { .. } => 0.0,
            TrueBaseline::Discrete { support, .. } => support[0],
        }
    }

    pub fn quantile(&self, prob: f64) -> f64 {
        match self {
            TrueBaseline::TruncatedNormal { mean, sd } => {
                let lo = Self::lower_tail(*mean, *sd);
                mean + sd * norm_quantile(lo + prob * (1.0 - lo))
            }
            TrueBaseline::Discrete { support, p } => {
                let mut cum = 0.0;
                for (s, pk) in support.iter().zip(p) {
                    cum += pk;
                    if cum >= prob {
                        return *s;
                    }
                }
                *support.last().expect("non-empty")
            }
        }
    }

    /// `∫_0^t G(s) ds` for the continuous baseline.
    fn integrated_cdf(mean: f64, sd: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lo = Self::lower_tail(mean, sd);
        let z0 = -mean / sd;
        let zt = (t - mean) / sd;
        let psi = |z: f64| z * norm_cdf(z) + norm_pdf(z);
        (sd * (psi(zt) - psi(z0)) - lo * t) / (1.0 - lo)
    }

    /// `∫_a^b |c − G(t)| dt` for a constant `c`.
    fn abs_gap(&self, c: f64, a: f64, b: f64) -> f64 {
        match self {
            TrueBaseline::TruncatedNormal { mean, sd } => {
                let (mean, sd) = (*mean, *sd);
                let ig = |t: f64| Self::integrated_cdf(mean, sd, t);
                let ga = self.cdf(a);
                let gb = self.cdf(b);
                let below = |lo: f64, hi: f64| c * (hi - lo) - (ig(hi) - ig(lo));
                if gb <= c {
                    below(a, b)
                } else if ga >= c {
                    -below(a, b)
                } else {
                    // G crosses c inside (a, b)
                    let lo = Self::lower_tail(mean, sd);
                    let cross = (mean + sd * norm_quantile(lo + c * (1.0 - lo))).clamp(a, b);
                    below(a, cross) - below(cross, b)
                }
            }
            TrueBaseline::Discrete { .. } => {
                // caller splits at every breakpoint, so G is constant here
                (c - self.cdf(a)).abs() * (b - a)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TrueBaseline::TruncatedNormal { .. } => vec![0.0],
            TrueBaseline::Discrete { support, .. } => support.clone(),
        }
    }
}

/// `∫ |Ĝ(t) − G(t)| dt` over `[min(0, supports), max(Ŷ(K), G⁻¹(0.99999))]`,
/// integrated exactly between the breakpoints of both cdfs.
pub fn g_distance(b_hat: &BaselineDist, truth: &TrueBaseline) -> Result<f64> {
    let lower = 0f64.min(b_hat.support()[0]).min(truth.lower());
    let upper = b_hat.support()[b_hat.len() - 1].max(truth.quantile(UPPER_QUANTILE));
    if !(upper > lower) {
        return Err(PlrError::InvalidData("g_distance: empty integration range".into()));
    }
    let mut cuts: Vec<f64> =
        b_hat.support().iter().copied().chain(truth.breakpoints()).filter(|t| *t > lower && *t < upper).collect();
    cuts.push(lower);
    cuts.push(upper);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += truth.abs_gap(b_hat.cdf(a), a, b);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_discrete_is_zero() {
        let b = BaselineDist::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let g = TrueBaseline::discrete(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert!(g_distance(&b, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn point_masses_unit_rectangle() {
        let b = BaselineDist::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let g = TrueBaseline::discrete(vec![1.0], vec![1.0]).unwrap();
        assert!((g_distance(&b, &g).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_step_hand_example() {
        // Ĝ: 0.5 on [0,2), 1 from 2; G: 0 on [0,1), 1 from 1.
        // ∫ = 0.5·1 + 0.5·1 = 1
        let b = BaselineDist::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let g = TrueBaseline::discrete(vec![1.0], vec![1.0]).unwrap();
        assert!((g_distance(&b, &g).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn continuous_matches_quadrature() {
        let g = TrueBaseline::truncated_normal(0.25, 0.5);
        let b = BaselineDist::new(vec![0.1, 0.4, 0.9, 1.6], vec![0.3, 0.3, 0.25, 0.15]).unwrap();
        let exact = g_distance(&b, &g).unwrap();
        let upper = g.quantile(UPPER_QUANTILE).max(1.6);
        let m = 2_000_000;
        let h = upper / m as f64;
        let quad: f64 = (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (b.cdf(t) - g.cdf(t)).abs() * h
            })
            .sum();
        assert!((exact - quad).abs() < 1e-6, "{exact} vs {quad}");
    }

    #[test]
    fn cdf_and_quantile_agree() {
        let g = TrueBaseline::truncated_normal(0.25, 0.5);
        for p in [0.01, 0.3, 0.5, 0.9, 0.99999] {
            assert!((g.cdf(g.quantile(p)) - p).abs() < 1e-9);
        }
        assert_eq!(g.cdf(-1.0), 0.0);
    }
}
