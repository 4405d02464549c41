//! Comparator estimators: the profile maximum-likelihood estimator and the
//! pairwise pseudo-likelihood estimator.

use nalgebra::DMatrix;

use crate::error::{PlrError, Result};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{inf_norm, solve};
use crate::model::{conditional_pmf, BaselineDist, Beta, ObservationSet};
use crate::profile::{FixedPointConfig, ProfileSolver};
use crate::stats::{logistic, softplus};
use crate::zest::{Estimate, SolverConfig};

/// Profile log-likelihood and its β-gradient, both divided by `Σ ω_i`.
///
/// The gradient is `Σ_i ω_i X_i {Y_i − E_p̂(Y | X_i)}`: because `p̂(β)`
/// maximises the likelihood over the simplex, the indirect term through
/// `p̂` vanishes.
fn profile_value_and_gradient(solver: &mut ProfileSolver<'_>, beta: &Beta) -> Result<(f64, Vec<f64>, BaselineDist)> {
    let data = solver.data();
    let b = solver.fit(beta)?;
    let value = crate::model::log_likelihood(data, beta, &b)?;
    let q = data.q();
    let mut grad = vec![0.0; q];
    let mut total = 0.0;
    for i in 0..data.n() {
        let w = data.analysis_weight(i);
        if w == 0.0 {
            continue;
        }
        total += w;
        let x = data.x_row(i);
        let pi = conditional_pmf(beta, x, &b)?;
        let ey: f64 = b.support().iter().zip(&pi).map(|(y, p)| y * p).sum();
        let resid = data.y()[i] - ey;
        for (g, xv) in grad.iter_mut().zip(x) {
            *g += w * xv * resid;
        }
    }
    grad.iter_mut().for_each(|g| *g /= total);
    Ok((value / total, grad, b))
}

/// Mean profile log-likelihood gradient at β (envelope form).
pub fn profile_gradient(data: &ObservationSet, beta: &Beta, cfg: &FixedPointConfig) -> Result<Vec<f64>> {
    let mut solver = ProfileSolver::new(data, *cfg)?;
    profile_value_and_gradient(&mut solver, beta).map(|(_, g, _)| g)
}

/// Fixed-p information `Σ ω X Xᵀ Var_p(Y | X) / Σ ω`, used to scale the
/// first quasi-Newton step.
fn fixed_p_information(data: &ObservationSet, beta: &Beta, b: &BaselineDist) -> Result<DMatrix<f64>> {
    let q = data.q();
    let mut info = DMatrix::zeros(q, q);
    let mut total = 0.0;
    for i in 0..data.n() {
        let w = data.analysis_weight(i);
        if w == 0.0 {
            continue;
        }
        total += w;
        let x = data.x_row(i);
        let pi = conditional_pmf(beta, x, b)?;
        let m: f64 = b.support().iter().zip(&pi).map(|(y, p)| y * p).sum();
        let v: f64 = b.support().iter().zip(&pi).map(|(y, p)| (y - m) * (y - m) * p).sum();
        for r in 0..q {
            for c in 0..q {
                info[(r, c)] += w * v * x[r] * x[c];
            }
        }
    }
    Ok(info / total)
}

/// Profile maximum-likelihood estimate by BFGS ascent with backtracking.
pub fn mle_luo_tsai(data: &ObservationSet, solver: &SolverConfig, cfg: &FixedPointConfig) -> Result<Estimate> {
    solver.validate()?;
    let q = data.q();
    let mut beta = solver.initial_beta(data)?;
    let mut prof = ProfileSolver::new(data, *cfg)?;
    let (mut value, mut grad, mut baseline) = profile_value_and_gradient(&mut prof, &beta)?;
    let mut trace = vec![value];

    let info = fixed_p_information(data, &beta, &baseline)?;
    let mut h_inv = info
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| DMatrix::identity(q, q));
    let mut iterations = 0;

    while inf_norm(&grad) > solver.tol && iterations < solver.max_iter {
        let g = nalgebra::DVector::from_column_slice(&grad);
        let mut dir = &h_inv * &g;
        if dir.dot(&g) <= 0.0 {
            h_inv = DMatrix::identity(q, q);
            dir = g.clone();
        }
        let slope = dir.dot(&g);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=solver.max_halvings {
            let trial: Vec<f64> = beta.iter().zip(dir.iter()).map(|(b, d)| b + lambda * d).collect();
            if let Ok(trial) = Beta::new(trial) {
                if let Ok((v, gr, b)) = profile_value_and_gradient(&mut prof, &trial) {
                    if v >= value + 1e-4 * lambda * slope {
                        accepted = Some((trial, v, gr, b));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        let Some((new_beta, v, gr, b)) = accepted else {
            // Near the optimum the Armijo test drowns in fixed-point noise.
            if inf_norm(&grad) <= 1e3 * solver.tol {
                break;
            }
            return Err(PlrError::AscentFailure {
                message: format!("no ascent after {} halvings at gradient {:e}", solver.max_halvings, inf_norm(&grad)),
                trace,
            });
        };
        // BFGS update on the negated objective
        let s = nalgebra::DVector::from_iterator(q, new_beta.iter().zip(beta.iter()).map(|(a, b)| a - b));
        let yv = nalgebra::DVector::from_iterator(q, grad.iter().zip(&gr).map(|(g0, g1)| g0 - g1));
        let sy = s.dot(&yv);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let ident = DMatrix::<f64>::identity(q, q);
            let left = &ident - rho * &s * yv.transpose();
            let right = &ident - rho * &yv * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
        }
        beta = new_beta;
        value = v;
        grad = gr;
        baseline = b;
        trace.push(value);
    }
    let psi_norm = inf_norm(&grad);
    Ok(Estimate {
        beta_hat: beta,
        baseline_hat: baseline,
        psi_norm,
        jacobian_condition: crate::linalg::condition_number(&info),
        iterations,
        converged: psi_norm <= solver.tol,
        bootstrap: None,
    })
}

/// Pair differences `d_ij = (X_i − X_j)(Y_i − Y_j)` and weights `ω_i ω_j`
/// for `i < j` among contributing rows; zero differences are dropped.
pub fn pair_design(data: &ObservationSet) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<usize> = (0..data.n()).filter(|&i| data.analysis_weight(i) > 0.0).collect();
    let mut diffs = Vec::new();
    let mut weights = Vec::new();
    for (a, &i) in rows.iter().enumerate() {
        let (xi, yi, wi) = (data.x_row(i), data.y()[i], data.analysis_weight(i));
        for &j in &rows[a + 1..] {
            let dy = yi - data.y()[j];
            if dy == 0.0 {
                continue;
            }
            let xj = data.x_row(j);
            let start = diffs.len();
            diffs.extend(xi.iter().zip(xj).map(|(u, v)| (u - v) * dy));
            if diffs[start..].iter().all(|v| *v == 0.0) {
                diffs.truncate(start);
                continue;
            }
            weights.push(wi * data.analysis_weight(j));
        }
    }
    (diffs, weights)
}

const PAIR_BLOCK: usize = 4096;

/// Objective, gradient and negative Hessian of `Σ c log σ(βᵀd)`, summed in
/// fixed blocks so any schedule gives the same floating-point result.
fn pair_terms(
    diffs: &[f64],
    weights: &[f64],
    q: usize,
    beta: &[f64],
    exec: Execution,
) -> (f64, Vec<f64>, DMatrix<f64>) {
    let blocks = weights.len().div_ceil(PAIR_BLOCK);
    let parts = map_indexed(exec, blocks, |blk| {
        let lo = blk * PAIR_BLOCK;
        let hi = (lo + PAIR_BLOCK).min(weights.len());
        let mut obj = 0.0;
        let mut grad = vec![0.0; q];
        let mut info = DMatrix::<f64>::zeros(q, q);
        for p in lo..hi {
            let d = &diffs[p * q..(p + 1) * q];
            let c = weights[p];
            let eta: f64 = d.iter().zip(beta).map(|(a, b)| a * b).sum();
            obj -= c * softplus(-eta);
            let s = logistic(-eta);
            let v = s * (1.0 - s);
            for r in 0..q {
                grad[r] += c * d[r] * s;
                for k in 0..q {
                    info[(r, k)] += c * v * d[r] * d[k];
                }
            }
        }
        (obj, grad, info)
    });
    let mut obj = 0.0;
    let mut grad = vec![0.0; q];
    let mut info = DMatrix::zeros(q, q);
    for (o, g, h) in parts {
        obj += o;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        info += h;
    }
    (obj, grad, info)
}

const CHAN_MAX_NORM: f64 = 1e4;
fn separation_check(diffs: &[f64], q: usize, beta: Vec<f64>) -> Result<Beta> {
    let margin =
        diffs.chunks(q).map(|d| d.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).fold(f64::INFINITY, f64::min);
    // At a finite root, βᵀΣ c d σ(-βᵀd) = 0 forces some βᵀd_ij < 0.
    if margin > 0.0 {
        return Err(PlrError::Separation("pair differences are separable".into()));
    }
    Beta::new(beta)
}

/// Root of the pairwise pseudo-score `Σ_{i<j} c_ij d_ij / {1 + exp(βᵀd_ij)}`.
pub fn chan_pairwise(data: &ObservationSet, solver: &SolverConfig) -> Result<Beta> {
    chan_pairwise_with(data, solver, Execution::Sequential)
}

/// As [`chan_pairwise`], with the pair sums scheduled by `exec`.
pub fn chan_pairwise_with(data: &ObservationSet, solver: &SolverConfig, exec: Execution) -> Result<Beta> {
    solver.validate()?;
    let q = data.q();
    let (diffs, weights) = pair_design(data);
    if weights.is_empty() {
        return Err(PlrError::PairwiseDegenerate);
    }
    let total: f64 = weights.iter().sum();
    let mut beta = match &solver.start {
        crate::zest::StartingPoint::Given(v) if v.len() == q => v.clone(),
        _ => vec![0.0; q],
    };
    let (mut obj, mut grad, mut info) = pair_terms(&diffs, &weights, q, &beta, exec);
    for _ in 0..solver.max_iter {
        if inf_norm(&grad) / total <= solver.tol {
            return separation_check(&diffs, q, beta);
        }
        let step = solve(&info, &grad).map_err(|_| PlrError::Separation("pairwise information singular".into()))?;
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..=solver.max_halvings {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + lambda * s).collect();
            let (o, g, h) = pair_terms(&diffs, &weights, q, &trial, exec);
            if o >= obj {
                beta = trial;
                obj = o;
                grad = g;
                info = h;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if inf_norm(&beta) > CHAN_MAX_NORM {
            return Err(PlrError::Separation("pairwise pseudo-likelihood has no finite maximiser".into()));
        }
        if !moved {
            break;
        }
    }
    if inf_norm(&grad) / total <= solver.tol * 1e3 {
        return separation_check(&diffs, q, beta);
    }
    Err(PlrError::Separation(format!(
        "pairwise Newton did not converge (gradient {:e}, |β| {:e})",
        inf_norm(&grad) / total,
        inf_norm(&beta)
    )))
}
