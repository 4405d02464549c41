mod common;

use common::lab::{self, normal_equations_perp, random_lambda2, random_xy, random_y};
use nalgebra::DMatrix;
use plr::model::{BaselineDist, Beta, IndexFunction, ObservationSet};
use plr::projection::{FiniteModel, TiltModel, Truncation};
use plr::score::ScoreContext;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(seed: u64, floor: f64) -> FiniteModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, m, q) = (rng.random_range(2..=6), rng.random_range(2..=6), rng.random_range(1..=2));
    FiniteModel::random(&mut rng, k, m, q, floor).unwrap()
}

#[test]
fn efficient_score_matches_normal_equations_on_two_by_two() {
    let tilt = TiltModel::new(vec![0.0, 1.0], vec![vec![-0.5], vec![0.5]], vec![-1.0], vec![0.4, 0.6], vec![0.5, 0.5])
        .unwrap();
    let model = tilt.finite_model().unwrap();
    let seff = model.efficient_score(Truncation::Exact).unwrap();
    let oracle = normal_equations_perp(&model, &model.score_beta());
    assert!(seff.max_abs_diff(&oracle) < 1e-10, "{}", seff.max_abs_diff(&oracle));
}

#[test]
fn projection_matches_normal_equations_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for seed in 0..30 {
        let model = random_model(seed, 0.0);
        let a = model.centered(&random_xy(&mut rng, &model));
        let ours = model.project_perp(&a, Truncation::Exact).unwrap();
        let oracle = normal_equations_perp(&model, &a);
        assert!(ours.max_abs_diff(&oracle) < 1e-9, "seed {seed}: {}", ours.max_abs_diff(&oracle));
    }
}

#[test]
fn efficient_score_orthogonal_to_tangent_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for seed in 0..20 {
        let model = random_model(seed, 0.0);
        let seff = model.efficient_score(Truncation::Exact).unwrap();
        for _ in 0..50 {
            let l1 = model.lambda1_element(&random_y(&mut rng, &model));
            let l2 = random_lambda2(&mut rng, &model);
            assert!(model.inner(&seff, &l1).abs() <= 1e-10);
            assert!(model.inner(&seff, &l2).abs() <= 1e-10);
        }
    }
}

#[test]
fn one_term_truncation_is_the_approximated_score_plus_a_lambda1_correction() {
    // J = 0 subtracts h₀(Y) − E[h₀|X] with h₀ = 𝓚a; the approximated
    // projection subtracts E[a|Y] − E[E[a|Y]|X]. They differ by the Λ₁
    // element generated by c = E[E[a|X]|Y].
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for seed in 0..10 {
        let model = random_model(seed, 0.0);
        let a = model.centered(&random_xy(&mut rng, &model));
        let j0 = model.project_perp(&a, Truncation::Terms(0)).unwrap();
        let approx = model.centered(&model.approximated_projection(&a));
        let c = model.cond_given_y(&model.cond_given_x(&a));
        let correction = model.lambda1_element(&c);
        assert!(approx.add(&correction).max_abs_diff(&j0) < 1e-12);
    }
}

#[test]
fn population_estimating_function_equals_approximated_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..10 {
        let (k, m, q) = (rng.random_range(2..=5), rng.random_range(2..=5), rng.random_range(1..=2));
        let tilt = TiltModel::random(&mut rng, k, m, q).unwrap();
        let model = tilt.finite_model().unwrap();
        let joint = model.joint();
        let min = joint.min();
        let (mut y, mut x, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..k {
            for j in 0..m {
                y.push(model.y_grid()[i]);
                x.push(model.x_grid()[j].clone());
                // analysis weight 1/w is proportional to the cell mass
                w.push(min / joint[(i, j)]);
            }
        }
        let n = y.len();
        let data = ObservationSet::with_missingness(y, x, vec![true; n], w).unwrap();
        let beta = Beta::new(tilt.beta().to_vec()).unwrap();
        let base = BaselineDist::new(tilt.y_grid().to_vec(), tilt.g().to_vec()).unwrap();
        let ctx = ScoreContext::new(&data, &beta, &base).unwrap();
        let a = IndexFunction::xy();
        let target = model.approximated_projection(&model.eval(&a));
        for i in 0..k {
            for j in 0..m {
                let got = ctx.m_hat(&a, model.y_grid()[i], &model.x_grid()[j]).unwrap();
                for (g, t) in got.iter().zip(target.at(i, j)) {
                    assert!((g - t).abs() < 1e-10, "{g} vs {t}");
                }
            }
        }
    }
}

#[test]
fn independence_collapses_the_series() {
    let py = [0.2, 0.5, 0.3];
    let px = [0.6, 0.4];
    let joint = DMatrix::from_fn(3, 2, |i, j| py[i] * px[j]);
    let model = FiniteModel::new(vec![0.0, 1.0, 3.0], vec![vec![1.0], vec![-2.0]], joint).unwrap();
    let exact = model.efficient_score(Truncation::Exact).unwrap();
    let j0 = model.efficient_score(Truncation::Terms(0)).unwrap();
    assert!(exact.max_abs_diff(&j0) < 1e-12);
    assert!(model.contraction_norm() < 1e-12);
}

#[test]
fn score_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let (k, m, q) = (rng.random_range(2..=6), rng.random_range(2..=6), rng.random_range(1..=2));
        let tilt = TiltModel::random(&mut rng, k, m, q).unwrap();
        let model = tilt.finite_model().unwrap();
        let fd = tilt.score_beta_fd(1e-4);
        assert!(model.score_beta().max_abs_diff(&fd) <= 1e-6);
    }
}

#[test]
fn singular_model_is_reported() {
    let joint = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
    let model = FiniteModel::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], joint).unwrap();
    assert!(model.efficient_score(Truncation::Exact).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_spaces_are_orthogonal(seed in 0u64..10_000) {
        let model = random_model(seed, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let l1 = model.lambda1_element(&random_y(&mut rng, &model));
        let l2 = random_lambda2(&mut rng, &model);
        prop_assert!(model.inner(&l1, &l2).abs() <= 1e-12);
    }

    #[test]
    fn lambda1_projection_is_idempotent(seed in 0u64..10_000) {
        let model = random_model(seed, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d);
        let a = random_xy(&mut rng, &model);
        let p = model.project_lambda1(&a).unwrap();
        let pp = model.project_lambda1(&p).unwrap();
        prop_assert!(p.max_abs_diff(&pp) <= 1e-10);
    }

    #[test]
    fn pythagoras(seed in 0u64..10_000) {
        let model = random_model(seed, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let a = model.centered(&random_xy(&mut rng, &model));
        let tangent = model.project_lambda1(&a).unwrap().add(&model.project_lambda2(&a));
        let perp = model.project_perp(&a, Truncation::Exact).unwrap();
        let lhs = model.norm(&a).powi(2);
        let rhs = model.norm(&tangent).powi(2) + model.norm(&perp).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn series_error_decays_geometrically(seed in 0u64..10_000) {
        let model = random_model(seed, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e);
        let a = model.centered(&random_xy(&mut rng, &model));
        let rho = model.contraction_norm();
        prop_assert!(rho < 1.0);
        let exact = model.solve_hstar(&a).unwrap();
        let ka = model.norm(&model.lift_y(&model.op_k(&a)));
        for terms in [0usize, 1, 2, 5, 10, 20, 40] {
            let s = model.series_hstar(&a, terms);
            let diff = plr::projection::YFunction::new(
                model.k(),
                model.q(),
                s.values().iter().zip(exact.values()).map(|(u, v)| u - v).collect(),
            )
            .unwrap();
            let err = model.norm(&model.lift_y(&diff));
            let bound = ka * rho.powi(terms as i32 + 1) / (1.0 - rho);
            prop_assert!(err <= bound * (1.0 + 1e-8) + 1e-12, "J={terms} err={err} bound={bound}");
        }
    }

    #[test]
    fn truncated_series_matches_exact_projection(seed in 0u64..10_000) {
        let model = random_model(seed, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0);
        let e = lab::lab_errors(&mut rng, &model, 60, 10);
        prop_assert!(e.contraction < 1.0);
        prop_assert!(e.series_vs_exact <= 1e-10);
        prop_assert!(e.series_identity <= 1e-10);
        prop_assert!(e.score_orthogonality <= 1e-10);
    }
}
