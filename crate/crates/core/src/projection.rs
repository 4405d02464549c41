//! Exact finite-dimensional versions of the nuisance-tangent-space
//! operators.
//!
//! A [`FiniteModel`] is a joint pmf on a `K × M` grid of `(Y, X)` values.
//! Functions of `(Y, X)` are stored densely and every conditional
//! expectation is an exact finite sum, so the projection identities can be
//! checked to rounding error. Inner products are `E[a₁ᵀ a₂]` under the joint
//! pmf.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PlrError, Result};
use crate::linalg::{condition_number, inf_norm};
use crate::model::IndexFunction;

const SUM_TOLERANCE: f64 = 1e-9;
const MAX_OPERATOR_CONDITION: f64 = 1e12;

/// A `q`-vector valued function of `Y` on the grid, row-major `K × q`.
#[derive(Debug, Clone, PartialEq)]
pub struct YFunction {
    k: usize,
    q: usize,
    v: Vec<f64>,
}

impl YFunction {
    pub fn new(k: usize, q: usize, v: Vec<f64>) -> Result<Self> {
        if v.len() != k * q {
            return Err(PlrError::Dimension { expected: k * q, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(PlrError::InvalidModel("non-finite function value".into()));
        }
        Ok(YFunction { k, q, v })
    }

    pub fn zeros(k: usize, q: usize) -> Self {
        YFunction { k, q, v: vec![0.0; k * q] }
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.v[k * self.q..(k + 1) * self.q]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn max_abs_diff(&self, other: &YFunction) -> f64 {
        self.v.iter().zip(&other.v).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

/// A `q`-vector valued function of `(Y, X)`, stored `[(k·M + m)·q + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct XYFunction {
    k: usize,
    m: usize,
    q: usize,
    v: Vec<f64>,
}

impl XYFunction {
    pub fn new(k: usize, m: usize, q: usize, v: Vec<f64>) -> Result<Self> {
        if v.len() != k * m * q {
            return Err(PlrError::Dimension { expected: k * m * q, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(PlrError::InvalidModel("non-finite function value".into()));
        }
        Ok(XYFunction { k, m, q, v })
    }

    pub fn zeros(k: usize, m: usize, q: usize) -> Self {
        XYFunction { k, m, q, v: vec![0.0; k * m * q] }
    }

    fn idx(&self, k: usize, m: usize) -> usize {
        (k * self.m + m) * self.q
    }

    pub fn at(&self, k: usize, m: usize) -> &[f64] {
        let i = self.idx(k, m);
        &self.v[i..i + self.q]
    }

    fn at_mut(&mut self, k: usize, m: usize) -> &mut [f64] {
        let i = self.idx(k, m);
        &mut self.v[i..i + self.q]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn max_abs(&self) -> f64 {
        inf_norm(&self.v)
    }

    pub fn max_abs_diff(&self, other: &XYFunction) -> f64 {
        self.v.iter().zip(&other.v).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// Entrywise `self + c·other`.
    pub fn axpy(&self, c: f64, other: &XYFunction) -> XYFunction {
        let v = self.v.iter().zip(&other.v).map(|(a, b)| a + c * b).collect();
        XYFunction { v, ..*self }
    }

    pub fn sub(&self, other: &XYFunction) -> XYFunction {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &XYFunction) -> XYFunction {
        self.axpy(1.0, other)
    }
}

/// How many terms of the Neumann series to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `(I − 𝓑)⁻¹` by a dense solve.
    Exact,
    /// `Σ_{j=0}^{J} 𝓑ʲ`.
    Terms(usize),
}

/// Spectral summary of `𝓑` in `L₂(p_Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    /// Operator norm on mean-zero functions.
    pub norm: f64,
    /// Rayleigh quotient on constants; 1 up to rounding.
    pub constant_eigenvalue: f64,
}

/// Joint pmf on a finite `(Y, X)` grid with full support in every row and
/// column.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    y_grid: Vec<f64>,
    x_grid: Vec<Vec<f64>>,
    q: usize,
    /// `K × M`
    joint: DMatrix<f64>,
    py: Vec<f64>,
    px: Vec<f64>,
}

impl FiniteModel {
    /// Entries are rescaled to sum to exactly one after a 1e-9 check.
    pub fn new(y_grid: Vec<f64>, x_grid: Vec<Vec<f64>>, joint: DMatrix<f64>) -> Result<Self> {
        let (k, m) = (y_grid.len(), x_grid.len());
        if k == 0 || m == 0 {
            return Err(PlrError::InvalidModel("empty grid".into()));
        }
        if joint.nrows() != k || joint.ncols() != m {
            return Err(PlrError::Dimension { expected: k * m, got: joint.len() });
        }
        let q = x_grid[0].len();
        if q == 0 || x_grid.iter().any(|x| x.len() != q) {
            return Err(PlrError::InvalidModel("covariate points must share a positive dimension".into()));
        }
        if y_grid.iter().chain(x_grid.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(PlrError::InvalidModel("non-finite grid value".into()));
        }
        if joint.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(PlrError::InvalidModel("probabilities must be finite and non-negative".into()));
        }
        let total = joint.sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(PlrError::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        let joint = joint / total;
        let py: Vec<f64> = joint.row_iter().map(|r| r.sum()).collect();
        let px: Vec<f64> = joint.column_iter().map(|c| c.sum()).collect();
        if let Some(k) = py.iter().position(|p| *p <= 0.0) {
            return Err(PlrError::InvalidModel(format!("response value {} has no mass", y_grid[k])));
        }
        if let Some(m) = px.iter().position(|p| *p <= 0.0) {
            return Err(PlrError::InvalidModel(format!("covariate point {m} has no mass")));
        }
        Ok(FiniteModel { y_grid, x_grid, q, joint, py, px })
    }

    /// Builds the grid from `(y, x, prob)` cells; unlisted cells get zero
    /// mass, repeated cells are an error.
    pub fn from_cells(cells: &[(f64, Vec<f64>, f64)]) -> Result<Self> {
        let mut ys: Vec<f64> = cells.iter().map(|c| c.0).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let mut xs: Vec<Vec<f64>> = cells.iter().map(|c| c.1.clone()).collect();
        xs.sort_by(|a, b| {
            a.iter().zip(b).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
        });
        xs.dedup();
        let mut joint = DMatrix::from_element(ys.len(), xs.len(), f64::NAN);
        for (y, x, p) in cells {
            let k = ys.iter().position(|v| v == y).expect("y in grid");
            let m = xs.iter().position(|v| v == x).expect("x in grid");
            if !joint[(k, m)].is_nan() {
                return Err(PlrError::InvalidModel(format!("cell (y={y}, x={x:?}) listed twice")));
            }
            joint[(k, m)] = *p;
        }
        joint.iter_mut().filter(|p| p.is_nan()).for_each(|p| *p = 0.0);
        Self::new(ys, xs, joint)
    }

    /// Joint pmf with entries proportional to `floor + U(0, 1)`, grid points
    /// drawn from standard normals. Larger floors give weaker dependence.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, k: usize, m: usize, q: usize, floor: f64) -> Result<Self> {
        let y_grid = random_grid(rng, k);
        let x_grid = (0..m).map(|_| (0..q).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let raw = DMatrix::from_fn(k, m, |_, _| floor + rng.random::<f64>());
        let total = raw.sum();
        Self::new(y_grid, x_grid, raw / total)
    }

    pub fn k(&self) -> usize {
        self.y_grid.len()
    }

    pub fn m(&self) -> usize {
        self.x_grid.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn y_grid(&self) -> &[f64] {
        &self.y_grid
    }

    pub fn x_grid(&self) -> &[Vec<f64>] {
        &self.x_grid
    }

    pub fn joint(&self) -> &DMatrix<f64> {
        &self.joint
    }

    pub fn p_y(&self) -> &[f64] {
        &self.py
    }

    pub fn p_x(&self) -> &[f64] {
        &self.px
    }

    pub fn p_y_given_x(&self, k: usize, m: usize) -> f64 {
        self.joint[(k, m)] / self.px[m]
    }

    pub fn p_x_given_y(&self, m: usize, k: usize) -> f64 {
        self.joint[(k, m)] / self.py[k]
    }

    /// `a` tabulated on the grid.
    pub fn eval(&self, a: &IndexFunction) -> XYFunction {
        let mut out = XYFunction::zeros(self.k(), self.m(), self.q);
        for k in 0..self.k() {
            for m in 0..self.m() {
                a.eval_into(self.y_grid[k], &self.x_grid[m], out.at_mut(k, m));
            }
        }
        out
    }

    /// `h(Y)` viewed as a function of `(Y, X)`.
    pub fn lift_y(&self, h: &YFunction) -> XYFunction {
        let mut out = XYFunction::zeros(self.k(), self.m(), self.q);
        for k in 0..self.k() {
            for m in 0..self.m() {
                out.at_mut(k, m).copy_from_slice(h.at(k));
            }
        }
        out
    }

    /// `α(X)` from an `M × q` row-major table.
    pub fn lift_x(&self, alpha: &[f64]) -> Result<XYFunction> {
        if alpha.len() != self.m() * self.q {
            return Err(PlrError::Dimension { expected: self.m() * self.q, got: alpha.len() });
        }
        let mut out = XYFunction::zeros(self.k(), self.m(), self.q);
        for k in 0..self.k() {
            for m in 0..self.m() {
                out.at_mut(k, m).copy_from_slice(&alpha[m * self.q..(m + 1) * self.q]);
            }
        }
        Ok(out)
    }

    pub fn expectation(&self, a: &XYFunction) -> Vec<f64> {
        let mut out = vec![0.0; self.q];
        for k in 0..self.k() {
            for m in 0..self.m() {
                let p = self.joint[(k, m)];
                out.iter_mut().zip(a.at(k, m)).for_each(|(o, v)| *o += p * v);
            }
        }
        out
    }

    /// `E[a₁ᵀ a₂]`.
    pub fn inner(&self, a1: &XYFunction, a2: &XYFunction) -> f64 {
        let mut s = 0.0;
        for k in 0..self.k() {
            for m in 0..self.m() {
                let dot: f64 = a1.at(k, m).iter().zip(a2.at(k, m)).map(|(u, v)| u * v).sum();
                s += self.joint[(k, m)] * dot;
            }
        }
        s
    }

    pub fn norm(&self, a: &XYFunction) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// `a − E[a]`.
    pub fn centered(&self, a: &XYFunction) -> XYFunction {
        let mean = self.expectation(a);
        let mut out = a.clone();
        for c in out.v.chunks_mut(self.q) {
            c.iter_mut().zip(&mean).for_each(|(v, e)| *v -= e);
        }
        out
    }

    /// `E[a | X]` as a function of `(Y, X)`.
    pub fn cond_given_x(&self, a: &XYFunction) -> XYFunction {
        let q = self.q;
        let mut table = vec![0.0; self.m() * q];
        for m in 0..self.m() {
            for k in 0..self.k() {
                let p = self.p_y_given_x(k, m);
                for (o, v) in table[m * q..(m + 1) * q].iter_mut().zip(a.at(k, m)) {
                    *o += p * v;
                }
            }
        }
        self.lift_x(&table).expect("table has M·q entries")
    }

    /// `E[a | Y]`.
    pub fn cond_given_y(&self, a: &XYFunction) -> YFunction {
        let q = self.q;
        let mut out = YFunction::zeros(self.k(), q);
        for k in 0..self.k() {
            for m in 0..self.m() {
                let p = self.p_x_given_y(m, k);
                for (o, v) in out.v[k * q..(k + 1) * q].iter_mut().zip(a.at(k, m)) {
                    *o += p * v;
                }
            }
        }
        out
    }

    /// `𝓚a = E[a | Y] − E[E[a | X] | Y]`.
    pub fn op_k(&self, a: &XYFunction) -> YFunction {
        let first = self.cond_given_y(a);
        let second = self.cond_given_y(&self.cond_given_x(a));
        let v = first.v.iter().zip(&second.v).map(|(u, w)| u - w).collect();
        YFunction { k: self.k(), q: self.q, v }
    }

    /// `K × K` kernel `B[k, l] = Σ_m P(x_m | y_k) P(y_l | x_m)`; `𝓑` acts
    /// on each coordinate of a `YFunction` through it.
    pub fn b_kernel(&self) -> DMatrix<f64> {
        let (k, m) = (self.k(), self.m());
        DMatrix::from_fn(k, k, |a, b| (0..m).map(|j| self.p_x_given_y(j, a) * self.p_y_given_x(b, j)).sum())
    }

    /// `𝓑` as a `Kq × Kq` matrix on the row-major `YFunction` layout.
    pub fn op_b(&self) -> DMatrix<f64> {
        let b = self.b_kernel();
        let q = self.q;
        let n = self.k() * q;
        DMatrix::from_fn(n, n, |r, c| if r % q == c % q { b[(r / q, c / q)] } else { 0.0 })
    }

    pub fn apply_b(&self, h: &YFunction) -> YFunction {
        let b = self.b_kernel();
        apply_kernel(&b, h)
    }

    /// `𝓑` is self-adjoint in `L₂(p_Y)`; with `D = diag(p_Y)` the matrix
    /// `D^{1/2} B D^{-1/2}` is symmetric with eigenvector `√p_Y` at 1.
    /// Deflating it leaves the norm on mean-zero functions.
    pub fn contraction(&self) -> Contraction {
        let k = self.k();
        let a = DMatrix::from_fn(k, self.m(), |i, j| self.joint[(i, j)] / (self.py[i] * self.px[j]).sqrt());
        let s = &a * a.transpose();
        let v = nalgebra::DVector::from_iterator(k, self.py.iter().map(|p| p.sqrt()));
        let constant_eigenvalue = (v.transpose() * &s * &v)[(0, 0)];
        let deflated = s - &v * v.transpose();
        let norm = deflated.symmetric_eigenvalues().iter().fold(0.0, |m: f64, e| m.max(e.abs()));
        Contraction { norm, constant_eigenvalue }
    }

    pub fn contraction_norm(&self) -> f64 {
        self.contraction().norm
    }

    /// Mean-zero `h*` with `(I − 𝓑)h* = 𝓚a`, solved through
    /// `(I − B + 1 p_Yᵀ) h = 𝓚a`, which is nonsingular exactly when `I − 𝓑`
    /// is on the mean-zero subspace. `𝓚a` has `p_Y`-mean zero, so the
    /// solution does too.
    pub fn solve_hstar(&self, a: &XYFunction) -> Result<YFunction> {
        let rhs = self.op_k(a);
        let k = self.k();
        let b = self.b_kernel();
        let op = DMatrix::from_fn(k, k, |r, c| f64::from(u8::from(r == c)) - b[(r, c)] + self.py[c]);
        let cond = condition_number(&op);
        if !(cond <= MAX_OPERATOR_CONDITION) {
            return Err(PlrError::SingularOperator(format!(
                "I - B is singular on mean-zero functions (condition {cond:e})"
            )));
        }
        let lu = op.lu();
        let q = self.q;
        let mut out = YFunction::zeros(k, q);
        for j in 0..q {
            let col = nalgebra::DVector::from_iterator(k, (0..k).map(|r| rhs.v[r * q + j]));
            let sol = lu.solve(&col).ok_or_else(|| PlrError::SingularOperator("LU solve failed".into()))?;
            for r in 0..k {
                out.v[r * q + j] = sol[r];
            }
        }
        Ok(out)
    }

    /// `Σ_{j=0}^{J} 𝓑ʲ 𝓚a`.
    pub fn series_hstar(&self, a: &XYFunction, terms: usize) -> YFunction {
        let b = self.b_kernel();
        let mut term = self.op_k(a);
        let mut sum = term.clone();
        for _ in 0..terms {
            term = apply_kernel(&b, &term);
            sum.v.iter_mut().zip(&term.v).for_each(|(s, t)| *s += t);
        }
        sum
    }

    fn hstar(&self, a: &XYFunction, trunc: Truncation) -> Result<YFunction> {
        match trunc {
            Truncation::Exact => self.solve_hstar(a),
            Truncation::Terms(j) => Ok(self.series_hstar(a, j)),
        }
    }

    /// `h(Y) − E[h | X]`, the element of `Λ₁` generated by `h`.
    pub fn lambda1_element(&self, h: &YFunction) -> XYFunction {
        let lifted = self.lift_y(h);
        lifted.sub(&self.cond_given_x(&lifted))
    }

    /// `Π(a | Λ₁) = h*(Y) − E[h* | X]`.
    pub fn project_lambda1(&self, a: &XYFunction) -> Result<XYFunction> {
        self.project_lambda1_with(a, Truncation::Exact)
    }

    pub fn project_lambda1_with(&self, a: &XYFunction, trunc: Truncation) -> Result<XYFunction> {
        Ok(self.lambda1_element(&self.hstar(a, trunc)?))
    }

    /// `Π(a | Λ₂) = E[a | X] − E[a]`.
    pub fn project_lambda2(&self, a: &XYFunction) -> XYFunction {
        self.centered(&self.cond_given_x(a))
    }

    /// `a − Π(a | Λ₁) − Π(a | Λ₂)`; for mean-zero `a` this is the
    /// projection onto `Λ⊥`.
    pub fn project_perp(&self, a: &XYFunction, trunc: Truncation) -> Result<XYFunction> {
        let p1 = self.project_lambda1_with(a, trunc)?;
        Ok(a.sub(&p1).sub(&self.project_lambda2(a)))
    }

    /// `S_β = XY − E(XY | X)`.
    pub fn score_beta(&self) -> XYFunction {
        let xy = self.eval(&IndexFunction::xy());
        xy.sub(&self.cond_given_x(&xy))
    }

    /// `S_β` with the `Λ₁` component removed exactly or by a truncated
    /// series (`S_β` is already orthogonal to `Λ₂`).
    pub fn efficient_score(&self, trunc: Truncation) -> Result<XYFunction> {
        self.project_perp(&self.score_beta(), trunc)
    }

    /// `a − E[a|X] − E[a|Y] + E[E[a|Y] | X]`, the approximated projection
    /// targeted by the sample estimating function.
    pub fn approximated_projection(&self, a: &XYFunction) -> XYFunction {
        let ey = self.lift_y(&self.cond_given_y(a));
        a.sub(&self.cond_given_x(a)).sub(&ey).add(&self.cond_given_x(&ey))
    }
}

fn apply_kernel(b: &DMatrix<f64>, h: &YFunction) -> YFunction {
    let (k, q) = (h.k, h.q);
    let mut out = YFunction::zeros(k, q);
    for r in 0..k {
        for c in 0..k {
            let w = b[(r, c)];
            for j in 0..q {
                out.v[r * q + j] += w * h.v[c * q + j];
            }
        }
    }
    out
}

fn random_grid<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    // increasing with gaps ≥ 0.1 so the grid is never degenerate
    let mut y = Vec::with_capacity(k);
    let mut cur = rng.sample::<f64, _>(StandardNormal);
    for _ in 0..k {
        y.push(cur);
        cur += 0.1 + rng.random::<f64>();
    }
    y
}

/// A model of the form `p(y, x) = η(x) exp(βᵀx y) g(y) / Σ_l exp(βᵀx y_l) g(y_l)`.
#[derive(Debug, Clone)]
pub struct TiltModel {
    y_grid: Vec<f64>,
    x_grid: Vec<Vec<f64>>,
    beta: Vec<f64>,
    g: Vec<f64>,
    eta: Vec<f64>,
}

impl TiltModel {
    /// `g` and `eta` are normalised; both must be strictly positive.
    pub fn new(y_grid: Vec<f64>, x_grid: Vec<Vec<f64>>, beta: Vec<f64>, g: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if g.len() != y_grid.len() {
            return Err(PlrError::Dimension { expected: y_grid.len(), got: g.len() });
        }
        if eta.len() != x_grid.len() {
            return Err(PlrError::Dimension { expected: x_grid.len(), got: eta.len() });
        }
        if x_grid.iter().any(|x| x.len() != beta.len()) {
            return Err(PlrError::Dimension { expected: beta.len(), got: x_grid[0].len() });
        }
        if g.iter().chain(&eta).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PlrError::InvalidModel("g and eta must be strictly positive".into()));
        }
        let gs: f64 = g.iter().sum();
        let es: f64 = eta.iter().sum();
        Ok(TiltModel {
            y_grid,
            x_grid,
            beta,
            g: g.into_iter().map(|v| v / gs).collect(),
            eta: eta.into_iter().map(|v| v / es).collect(),
        })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, k: usize, m: usize, q: usize) -> Result<Self> {
        let y_grid = random_grid(rng, k);
        let x_grid = (0..m).map(|_| (0..q).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let beta = (0..q).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let g = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
        let eta = (0..m).map(|_| 0.2 + rng.random::<f64>()).collect();
        Self::new(y_grid, x_grid, beta, g, eta)
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Normalised baseline jumps.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn y_grid(&self) -> &[f64] {
        &self.y_grid
    }

    pub fn x_grid(&self) -> &[Vec<f64>] {
        &self.x_grid
    }

    /// `log p(y_k, x_m)` at an arbitrary β with `g`, `η` held fixed.
    pub fn log_joint(&self, beta: &[f64]) -> DMatrix<f64> {
        let (k, m) = (self.y_grid.len(), self.x_grid.len());
        let mut out = DMatrix::zeros(k, m);
        for j in 0..m {
            let t: f64 = self.x_grid[j].iter().zip(beta).map(|(x, b)| x * b).sum();
            let logits: Vec<f64> = (0..k).map(|i| t * self.y_grid[i] + self.g[i].ln()).collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
            for i in 0..k {
                out[(i, j)] = self.eta[j].ln() + logits[i] - lse;
            }
        }
        out
    }

    pub fn finite_model(&self) -> Result<FiniteModel> {
        let joint = self.log_joint(&self.beta).map(f64::exp);
        let total = joint.sum();
        FiniteModel::new(self.y_grid.clone(), self.x_grid.clone(), joint / total)
    }

    /// Central-difference derivative of `log p` in β, step `h`.
    pub fn score_beta_fd(&self, h: f64) -> XYFunction {
        let (k, m, q) = (self.y_grid.len(), self.x_grid.len(), self.beta.len());
        let mut out = XYFunction::zeros(k, m, q);
        for j in 0..q {
            let mut up = self.beta.clone();
            let mut dn = self.beta.clone();
            up[j] += h;
            dn[j] -= h;
            let (lu, ld) = (self.log_joint(&up), self.log_joint(&dn));
            for a in 0..k {
                for b in 0..m {
                    out.at_mut(a, b)[j] = (lu[(a, b)] - ld[(a, b)]) / (2.0 * h);
                }
            }
        }
        out
    }
}
