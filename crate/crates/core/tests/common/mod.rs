//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod lab;

use plr::model::{log_likelihood, BaselineDist, Beta, ObservationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// False when the responses of the `x₂ = 0` and `x₂ = 1` groups are
/// ordered, i.e. the design is quasi-separated along `x₂` and no finite
/// estimate exists.
fn responses_overlap(y: &[f64], x: &[Vec<f64>]) -> bool {
    let range = |g: f64| {
        y.iter()
            .zip(x)
            .filter(|(_, r)| r[1] == g)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v)))
    };
    let (a, b) = (range(0.0), range(1.0));
    a.1 > b.0 && b.1 > a.0
}

/// Tiny tilt-model sample: `K` response levels `0..K`, two covariates,
/// redrawn until all levels appear and the design is not separated in `x₂`.
pub fn tiny_instance(seed: u64, n: usize, k: usize) -> ObservationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = [-0.5, 0.5];
    loop {
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            let xi = vec![rng.random_range(-1.0..1.0), if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 }];
            let t = beta[0] * xi[0] + beta[1] * xi[1];
            let w: Vec<f64> = (0..k).map(|l| (t * l as f64).exp()).collect();
            let u = rng.random::<f64>() * w.iter().sum::<f64>();
            let mut acc = 0.0;
            let mut yi = k - 1;
            for (l, wl) in w.iter().enumerate() {
                acc += wl;
                if u < acc {
                    yi = l;
                    break;
                }
            }
            y.push(yi as f64);
            x.push(xi);
        }
        if !responses_overlap(&y, &x) {
            continue;
        }
        if let Ok(d) = ObservationSet::new(y, x) {
            if d.k() == k {
                return d;
            }
        }
    }
}

/// Nested grids `(half-width, step)`: the whole box, then windows
/// around each winner. Final resolution 5e-4.
pub const GRID_LEVELS: [(f64, f64); 3] = [(4.0, 0.1), (0.2, 0.01), (0.02, 5e-4)];

/// Grid minimiser of `f` over `[-r, r]²` refined through `levels`, each
/// level centred on the previous winner.
pub fn grid_min_2d<F: Fn(f64, f64) -> f64>(f: F, levels: &[(f64, f64)]) -> ([f64; 2], f64) {
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for &(half, step) in levels {
        let c = best.0;
        let steps = (2.0 * half / step).round() as i64;
        for i in 0..=steps {
            for j in 0..=steps {
                let p = [c[0] - half + i as f64 * step, c[1] - half + j as f64 * step];
                let v = f(p[0], p[1]);
                if v < best.1 {
                    best = (p, v);
                }
            }
        }
    }
    best
}

/// Maximiser of the log-likelihood over the 1-simplex for `K = 2`, by a
/// grid on `p₁` at `step`.
pub fn simplex_grid_max_k2(data: &ObservationSet, beta: &Beta, step: f64) -> (f64, f64) {
    let steps = (1.0 / step).round() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 1..steps {
        let p1 = i as f64 * step;
        let b = BaselineDist::new(data.support().to_vec(), vec![1.0 - p1, p1]).unwrap();
        let v = log_likelihood(data, beta, &b).unwrap();
        if v > best.1 {
            best = (p1, v);
        }
    }
    best
}

/// Pair differences with plain loops, independent of the library.
pub fn pair_differences(y: &[f64], x: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            let dy = y[i] - y[j];
            let d = [(x[i][0] - x[j][0]) * dy, (x[i][1] - x[j][1]) * dy];
            if d != [0.0, 0.0] {
                out.push(d);
            }
        }
    }
    out
}

/// Logistic regression of an all-ones response on `d` without intercept,
/// by undamped Newton with a 2×2 Cramer solve.
pub fn logistic_all_ones(d: &[[f64; 2]]) -> [f64; 2] {
    let mut b = [0.0f64; 2];
    for _ in 0..200 {
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for di in d {
            let eta = b[0] * di[0] + b[1] * di[1];
            let s = 1.0 / (1.0 + eta.exp()); // 1 − σ(η)
            let v = s * (1.0 - s);
            for r in 0..2 {
                g[r] += di[r] * s;
                for c in 0..2 {
                    h[r][c] += v * di[r] * di[c];
                }
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det];
        b = [b[0] + step[0], b[1] + step[1]];
        if step[0].abs().max(step[1].abs()) < 1e-14 {
            break;
        }
    }
    b
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> (f64, f64) {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let lambda = d * (n * m / (n + m)).sqrt();
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        p += 2.0 * if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}
