mod common;

use plr::baselines::{chan_pairwise, chan_pairwise_with, mle_luo_tsai, pair_design, profile_gradient};
use plr::model::{Beta, IndexFunction, ObservationSet};
use plr::profile::{fit_baseline, profile_log_likelihood, FixedPointConfig};
use plr::score::ScoreContext;
use plr::sim::settings::{generate, Setting, SettingSpec};
use plr::zest::{
    bootstrap, estimate, estimate_ipw_weights, psi, psi_jacobian, summarize_draws, BootstrapConfig, MissingnessSpec,
    SolverConfig, StartingPoint,
};
use plr::{Execution, PlrError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fp() -> FixedPointConfig {
    FixedPointConfig::default()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn proposed_root_matches_grid_search() {
    let d = common::tiny_instance(17, 30, 2);
    let a = IndexFunction::xy();
    let est = estimate(&d, &a, &SolverConfig::default(), &fp()).unwrap();
    assert!(est.converged);
    let (g, _) = common::grid_min_2d(
        |b1, b2| psi(&d, &a, &Beta::new(vec![b1, b2]).unwrap(), &fp()).map_or(f64::INFINITY, |v| norm2(&v)),
        &common::GRID_LEVELS,
    );
    for j in 0..2 {
        assert!((est.beta_hat[j] - g[j]).abs() <= 2e-3, "{:?} vs grid {:?}", est.beta_hat, g);
    }
}

#[test]
fn psi_at_beta_zero_matches_direct_composition() {
    let d = common::tiny_instance(3, 12, 2);
    let a = IndexFunction::xy();
    let got = psi(&d, &a, &Beta::zeros(2), &fp()).unwrap();
    // At β = 0, p̂ is the empirical pmf and every tilt is one.
    let n = d.n() as f64;
    let support = d.support().to_vec();
    let p: Vec<f64> = support.iter().map(|s| d.y().iter().filter(|y| *y == s).count() as f64 / n).collect();
    let av = |y: f64, x: &[f64]| a.eval(y, x);
    let u = |y: f64| {
        let mut out = vec![0.0; 2];
        for i in 0..d.n() {
            let v = av(y, d.x_row(i));
            out[0] += v[0] / n;
            out[1] += v[1] / n;
        }
        out
    };
    let mut expect = [0.0; 2];
    for i in 0..d.n() {
        let (yi, xi) = (d.y()[i], d.x_row(i));
        let mut m = av(yi, xi);
        let ui = u(yi);
        for j in 0..2 {
            let s: f64 = support.iter().zip(&p).map(|(y, pk)| av(*y, xi)[j] * pk).sum();
            let v: f64 = support.iter().zip(&p).map(|(y, pk)| u(*y)[j] * pk).sum();
            m[j] += -s - ui[j] + v;
            expect[j] += m[j] / n;
        }
    }
    for j in 0..2 {
        assert!((got[j] - expect[j]).abs() < 1e-13);
    }
}

#[test]
fn constant_index_function_gives_zero_psi() {
    let d = common::tiny_instance(8, 25, 3);
    let a = IndexFunction::constant(vec![2.5, -1.0]);
    for b in [[0.0, 0.0], [1.0, -2.0], [-0.5, 0.7]] {
        let v = psi(&d, &a, &Beta::new(b.to_vec()).unwrap(), &fp()).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-12), "{v:?}");
    }
}

#[test]
fn duplicated_dataset_same_psi_and_estimate() {
    let d = common::tiny_instance(9, 25, 3);
    let dd = d.select(&(0..d.n()).chain(0..d.n()).collect::<Vec<_>>()).unwrap();
    let a = IndexFunction::xy();
    let b = Beta::new(vec![-0.3, 0.4]).unwrap();
    let p1 = psi(&d, &a, &b, &fp()).unwrap();
    let p2 = psi(&dd, &a, &b, &fp()).unwrap();
    for (u, v) in p1.iter().zip(&p2) {
        assert!((u - v).abs() < 1e-12);
    }
    let e1 = estimate(&d, &a, &SolverConfig::default(), &fp()).unwrap();
    let e2 = estimate(&dd, &a, &SolverConfig::default(), &fp()).unwrap();
    for (u, v) in e1.beta_hat.iter().zip(e2.beta_hat.iter()) {
        assert!((u - v).abs() < 1e-7);
    }
}

#[test]
fn unit_weights_reproduce_unweighted_path_exactly() {
    let d = common::tiny_instance(10, 30, 3);
    let x: Vec<Vec<f64>> = (0..d.n()).map(|i| d.x_row(i).to_vec()).collect();
    let w = ObservationSet::with_missingness(d.y().to_vec(), x, vec![true; d.n()], vec![1.0; d.n()]).unwrap();
    let a = IndexFunction::xy();
    let e1 = estimate(&d, &a, &SolverConfig::default(), &fp()).unwrap();
    let e2 = estimate(&w, &a, &SolverConfig::default(), &fp()).unwrap();
    assert_eq!(e1.beta_hat, e2.beta_hat);
    assert_eq!(e1.baseline_hat, e2.baseline_hat);
}

#[test]
fn weight_rescaling_invariance() {
    let (full, _) = generate(&SettingSpec::new(Setting::Three, 200, 4)).unwrap();
    let fit = estimate_ipw_weights(&full, &MissingnessSpec::parse("intercept,x2").unwrap()).unwrap();
    let scaled = fit.data.with_weights(fit.data.w().iter().map(|w| 0.37 * w).collect()).unwrap();
    let a = IndexFunction::xy();
    let e1 = estimate(&fit.data, &a, &SolverConfig::default(), &fp()).unwrap();
    let e2 = estimate(&scaled, &a, &SolverConfig::default(), &fp()).unwrap();
    for (u, v) in e1.beta_hat.iter().zip(e2.beta_hat.iter()) {
        assert!((u - v).abs() < 1e-7);
    }
    for (u, v) in e1.baseline_hat.p().iter().zip(e2.baseline_hat.p()) {
        assert!((u - v).abs() < 1e-9);
    }
}

#[test]
fn numerical_jacobian_converges_at_second_order() {
    let d = common::tiny_instance(11, 30, 3);
    let a = IndexFunction::xy();
    let b = Beta::new(vec![-0.4, 0.6]).unwrap();
    let j1 = psi_jacobian(&d, &a, &b, &fp(), 1e-3).unwrap();
    let j2 = psi_jacobian(&d, &a, &b, &fp(), 5e-4).unwrap();
    let j3 = psi_jacobian(&d, &a, &b, &fp(), 2.5e-4).unwrap();
    let e12 = (&j1 - &j2).abs().max();
    let e23 = (&j2 - &j3).abs().max();
    // successive differences shrink by about four for an O(h²) scheme
    assert!(e12 < 1e-5, "{e12}");
    assert!(e23 < 0.5 * e12 || e23 < 1e-9, "{e12} {e23}");
}

#[test]
fn singular_problem_flagged() {
    // collinear covariates: Ψ depends on β only through β₁ + 2β₂
    let d = ObservationSet::new(
        vec![0.0, 1.0, 2.0, 1.0, 0.0],
        vec![vec![0.1, 0.2], vec![0.7, 1.4], vec![-0.3, -0.6], vec![1.0, 2.0], vec![0.4, 0.8]],
    )
    .unwrap();
    let r =
        estimate(&d, &IndexFunction::xy(), &SolverConfig { start: StartingPoint::Zero, ..Default::default() }, &fp());
    assert!(matches!(r, Err(PlrError::SingularJacobian { .. })), "{r:?}");
}

#[test]
fn sample_orthogonality_probe() {
    let spec = SettingSpec::new(Setting::One, 2000, 99);
    let (d, _) = generate(&spec).unwrap();
    let beta = Beta::new(spec.beta0.clone()).unwrap();
    let base = fit_baseline(&d, &beta, &fp()).unwrap();
    let ctx = ScoreContext::new(&d, &beta, &base).unwrap();
    let rows = ctx.m_rows(&IndexFunction::xy()).unwrap();
    let phis: [fn(&[f64]) -> f64; 4] = [|x| x[0], |x| x[1], |x| x[1] * x[1], |x| (3.0 * x[1]).sin() + x[0]];
    let total: f64 = rows.iter().map(|(_, w, _)| w).sum();
    for phi in phis {
        for j in 0..2 {
            let v: f64 = rows.iter().map(|(i, w, m)| w * m[j] * phi(d.x_row(*i))).sum::<f64>() / total;
            assert!(v.abs() <= 0.05, "{v}");
        }
    }
}

#[test]
fn ipw_recovers_selection_coefficients() {
    let (d3, _) = generate(&SettingSpec::new(Setting::Three, 40_000, 5)).unwrap();
    let f3 = estimate_ipw_weights(&d3, &MissingnessSpec::parse("intercept,x2").unwrap()).unwrap();
    assert!((f3.coefficients[0] - 1.0).abs() < 0.1, "{:?}", f3.coefficients);
    assert!((f3.coefficients[1] + 1.0).abs() < 0.1, "{:?}", f3.coefficients);

    let (d4, _) = generate(&SettingSpec::new(Setting::Four, 40_000, 6)).unwrap();
    let f4 = estimate_ipw_weights(&d4, &MissingnessSpec::parse("intercept,x2,y").unwrap()).unwrap();
    let want = [1.0, -1.0, -2.0];
    for (c, w) in f4.coefficients.iter().zip(want) {
        assert!((c - w).abs() < 0.15, "{:?}", f4.coefficients);
    }
}

#[test]
fn ipw_requires_incomplete_rows() {
    let d = common::tiny_instance(1, 20, 2);
    let r = estimate_ipw_weights(&d, &MissingnessSpec::parse("intercept,x1").unwrap());
    assert!(matches!(r, Err(PlrError::NoIncompleteRows)));
}

#[test]
fn ipw_rejects_unobserved_regressor() {
    let (d, _) = generate(&SettingSpec::new(Setting::Three, 100, 2)).unwrap();
    assert!(estimate_ipw_weights(&d, &MissingnessSpec::parse("intercept,x1").unwrap()).is_err());
}

#[test]
fn bootstrap_is_deterministic_and_schedule_free() {
    let (d, _) = generate(&SettingSpec::new(Setting::One, 80, 12)).unwrap();
    let a = IndexFunction::xy();
    let run = |exec, seed| {
        let cfg = BootstrapConfig { execution: exec, ..BootstrapConfig::new(20, seed) };
        bootstrap(&d, &a, &SolverConfig::default(), &fp(), &cfg).unwrap()
    };
    let s1 = run(Execution::Sequential, 5);
    let s2 = run(Execution::Parallel, 5);
    let s3 = run(Execution::Sequential, 6);
    assert_eq!(s1, s2);
    assert_ne!(s1.draws, s3.draws);
    assert_eq!(s1.replicates + s1.failures, 20);
}

#[test]
fn bootstrap_with_ipw_refits_weights() {
    let (d, _) = generate(&SettingSpec::new(Setting::Three, 150, 13)).unwrap();
    let cfg = BootstrapConfig {
        missingness: Some(MissingnessSpec::parse("intercept,x2").unwrap()),
        execution: Execution::Sequential,
        ..BootstrapConfig::new(10, 1)
    };
    let s = bootstrap(&d, &IndexFunction::xy(), &SolverConfig::default(), &fp(), &cfg).unwrap();
    assert!(s.se.iter().all(|v| *v > 0.0));
}

#[test]
fn identical_draws_have_zero_se() {
    let s = summarize_draws(vec![vec![1.0, -2.0], vec![1.0, -2.0]], 0);
    assert_eq!(s.se, vec![0.0, 0.0]);
    assert_eq!(s.ci_lower, vec![1.0, -2.0]);
}

#[test]
fn mle_matches_profile_grid_and_envelope() {
    let d = common::tiny_instance(21, 30, 3);
    let est = mle_luo_tsai(&d, &SolverConfig::default(), &fp()).unwrap();
    assert!(est.converged);
    let top = profile_log_likelihood(&d, &est.beta_hat, &fp()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let b = Beta::new(vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).unwrap();
        assert!(top >= profile_log_likelihood(&d, &b, &fp()).unwrap() - 1e-10);
    }
    let (g, _) = common::grid_min_2d(
        |b1, b2| -profile_log_likelihood(&d, &Beta::new(vec![b1, b2]).unwrap(), &fp()).unwrap_or(f64::NEG_INFINITY),
        &common::GRID_LEVELS,
    );
    for j in 0..2 {
        assert!((est.beta_hat[j] - g[j]).abs() <= 2e-3, "{:?} vs {:?}", est.beta_hat, g);
    }
}

#[test]
fn mle_gradient_vanishes_by_finite_differences() {
    let d = common::tiny_instance(22, 30, 3);
    let est = mle_luo_tsai(&d, &SolverConfig::default(), &fp()).unwrap();
    let n = d.n() as f64;
    let h = 1e-5;
    for j in 0..2 {
        let mut up = est.beta_hat.to_vec();
        let mut dn = est.beta_hat.to_vec();
        up[j] += h;
        dn[j] -= h;
        let g = (profile_log_likelihood(&d, &Beta::new(up).unwrap(), &fp()).unwrap()
            - profile_log_likelihood(&d, &Beta::new(dn).unwrap(), &fp()).unwrap())
            / (2.0 * h)
            / n;
        assert!(g.abs() < 1e-6, "{g}");
    }
    let env = profile_gradient(&d, &est.beta_hat, &fp()).unwrap();
    assert!(env.iter().all(|g| g.abs() <= 1e-8));
}

#[test]
fn chan_matches_logistic_oracle() {
    let y = vec![0.0, 1.0, 2.0, 1.0, 3.0, 0.5];
    let x = vec![vec![0.5, 1.0], vec![-0.2, 0.0], vec![0.9, 1.0], vec![1.4, 0.0], vec![-0.7, 1.0], vec![0.1, 0.0]];
    let d = ObservationSet::new(y.clone(), x.clone()).unwrap();
    let b = chan_pairwise(&d, &SolverConfig { tol: 1e-12, ..Default::default() }).unwrap();
    let oracle = common::logistic_all_ones(&common::pair_differences(&y, &x));
    for j in 0..2 {
        assert!((b[j] - oracle[j]).abs() < 1e-8, "{:?} vs {:?}", b, oracle);
    }
}

#[test]
fn chan_symmetries() {
    let d = common::tiny_instance(30, 30, 3);
    let s = SolverConfig::default();
    let b = chan_pairwise(&d, &s).unwrap();

    let x: Vec<Vec<f64>> = (0..d.n()).map(|i| d.x_row(i).to_vec()).collect();
    let neg = ObservationSet::new(d.y().iter().map(|v| -v).collect(), x.clone()).unwrap();
    let bn = chan_pairwise(&neg, &s).unwrap();

    let shifted = ObservationSet::new(
        d.y().iter().map(|v| v + 4.0).collect(),
        x.iter().map(|r| vec![r[0] - 1.5, r[1] + 2.0]).collect(),
    )
    .unwrap();
    let bs = chan_pairwise(&shifted, &s).unwrap();

    let perm: Vec<usize> = (0..d.n()).rev().collect();
    let bp = chan_pairwise(&d.select(&perm).unwrap(), &s).unwrap();
    let bpar = chan_pairwise_with(&d, &s, Execution::Parallel).unwrap();
    for j in 0..2 {
        assert!((b[j] + bn[j]).abs() < 1e-9);
        assert!((b[j] - bs[j]).abs() < 1e-9);
        assert!((b[j] - bp[j]).abs() < 1e-9);
        assert_eq!(b[j], bpar[j]);
    }
}

#[test]
fn chan_degenerate_designs() {
    let d = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![vec![1.0]; 3]).unwrap();
    assert!(matches!(chan_pairwise(&d, &SolverConfig::default()), Err(PlrError::PairwiseDegenerate)));
    // perfectly ordered: every d_ij points the same way
    let sep = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    assert!(matches!(chan_pairwise(&sep, &SolverConfig::default()), Err(PlrError::Separation(_))));
    let (diffs, w) = pair_design(&sep);
    assert_eq!(w.len(), 3);
    assert_eq!(diffs, vec![1.0, 4.0, 1.0]);
}
