//! Oracles and error probes for the finite projection lab.

use nalgebra::{DMatrix, DVector};
use plr::projection::{FiniteModel, Truncation, XYFunction, YFunction};
use rand::Rng;

pub fn random_y<R: Rng>(rng: &mut R, model: &FiniteModel) -> YFunction {
    let v = (0..model.k() * model.q()).map(|_| rng.random_range(-2.0..2.0)).collect();
    YFunction::new(model.k(), model.q(), v).unwrap()
}

pub fn random_xy<R: Rng>(rng: &mut R, model: &FiniteModel) -> XYFunction {
    let v = (0..model.k() * model.m() * model.q()).map(|_| rng.random_range(-2.0..2.0)).collect();
    XYFunction::new(model.k(), model.m(), model.q(), v).unwrap()
}

/// A random centred element of `Λ₂`.
pub fn random_lambda2<R: Rng>(rng: &mut R, model: &FiniteModel) -> XYFunction {
    let alpha: Vec<f64> = (0..model.m() * model.q()).map(|_| rng.random_range(-2.0..2.0)).collect();
    model.centered(&model.lift_x(&alpha).unwrap())
}

/// `a − Π(a | Λ₁ ⊕ Λ₂)` by weighted least squares on an explicit spanning set,
/// solved with an SVD pseudo-inverse. Uses only the joint pmf.
pub fn normal_equations_perp(model: &FiniteModel, a: &XYFunction) -> XYFunction {
    let (k, m, q) = (model.k(), model.m(), model.q());
    let dim = k * m * q;
    let joint = model.joint();
    let px: Vec<f64> = (0..m).map(|j| (0..k).map(|i| joint[(i, j)]).sum()).collect();
    let weight = |idx: usize| {
        let cell = idx / q;
        joint[(cell / m, cell % m)]
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // Λ₁: e_l(Y) e_c − E[e_l(Y) | X] e_c
    for l in 0..k {
        for c in 0..q {
            let mut v = vec![0.0; dim];
            for i in 0..k {
                for j in 0..m {
                    let cond = joint[(l, j)] / px[j];
                    v[(i * m + j) * q + c] = f64::from(u8::from(i == l)) - cond;
                }
            }
            basis.push(v);
        }
    }
    // Λ₂: (1{X = x_s} − P(X = x_s)) e_c
    for (s, ps) in px.iter().enumerate() {
        for c in 0..q {
            let mut v = vec![0.0; dim];
            for i in 0..k {
                for j in 0..m {
                    v[(i * m + j) * q + c] = f64::from(u8::from(j == s)) - ps;
                }
            }
            basis.push(v);
        }
    }
    let p = basis.len();
    let phi = DMatrix::from_fn(dim, p, |r, c| basis[c][r]);
    let w = DVector::from_iterator(dim, (0..dim).map(weight));
    let wphi = DMatrix::from_fn(dim, p, |r, c| w[r] * phi[(r, c)]);
    let gram = phi.transpose() * &wphi;
    let rhs = wphi.transpose() * DVector::from_column_slice(a.values());
    let coef = gram.svd(true, true).solve(&rhs, 1e-12).unwrap();
    let fitted = &phi * coef;
    let v: Vec<f64> = a.values().iter().zip(fitted.iter()).map(|(x, f)| x - f).collect();
    XYFunction::new(k, m, q, v).unwrap()
}

/// Worst-case errors of one model against the lab's identities.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabErrors {
    pub contraction: f64,
    pub series_vs_exact: f64,
    pub lambda_orthogonality: f64,
    pub score_orthogonality: f64,
    pub series_identity: f64,
}

impl LabErrors {
    pub fn max(self, o: LabErrors) -> LabErrors {
        LabErrors {
            contraction: self.contraction.max(o.contraction),
            series_vs_exact: self.series_vs_exact.max(o.series_vs_exact),
            lambda_orthogonality: self.lambda_orthogonality.max(o.lambda_orthogonality),
            score_orthogonality: self.score_orthogonality.max(o.score_orthogonality),
            series_identity: self.series_identity.max(o.series_identity),
        }
    }
}

/// `a − E[a|X] − Σ_{j≤J} (𝓑ʲ𝓚a − E[𝓑ʲ𝓚a | X])`, built term by term.
pub fn truncated_perp_series(model: &FiniteModel, a: &XYFunction, terms: usize) -> XYFunction {
    let mut out = a.sub(&model.cond_given_x(a));
    let mut term = model.op_k(a);
    for j in 0..=terms {
        if j > 0 {
            term = model.apply_b(&term);
        }
        out = out.sub(&model.lambda1_element(&term));
    }
    out
}

pub fn lab_errors<R: Rng>(rng: &mut R, model: &FiniteModel, terms: usize, directions: usize) -> LabErrors {
    let a = model.centered(&random_xy(rng, model));
    let exact = model.solve_hstar(&a).unwrap();
    let series = model.series_hstar(&a, terms);
    let mut e = LabErrors {
        contraction: model.contraction_norm(),
        series_vs_exact: exact.max_abs_diff(&series),
        ..Default::default()
    };
    let seff = model.efficient_score(Truncation::Exact).unwrap();
    for _ in 0..directions {
        let l1 = model.lambda1_element(&random_y(rng, model));
        let l2 = random_lambda2(rng, model);
        e.lambda_orthogonality = e.lambda_orthogonality.max(model.inner(&l1, &l2).abs());
        e.score_orthogonality =
            e.score_orthogonality.max(model.inner(&seff, &l1).abs()).max(model.inner(&seff, &l2).abs());
    }
    let perp = model.project_perp(&a, Truncation::Exact).unwrap();
    e.series_identity = truncated_perp_series(model, &a, terms).max_abs_diff(&perp);
    e
}
