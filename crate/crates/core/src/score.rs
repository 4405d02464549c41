//! Empirical building blocks `Ŝ_a`, `Û_a`, `V̂_a` and the estimating
//! function `m_{n,a}`.
//!
//! With `π_i(k)` the fitted conditional pmf of `Y` given `X_i` and
//! `u_i(k) = exp(βᵀX_i Y(k)) / Ŝ₁(X_i)`:
//!
//! * `Ŝ_a(x)/Ŝ₁(x)` is `Σ_k a(Y(k), x) π_x(k)`,
//! * `Û_a(y) = Σ_i ω_i a(y, X_i) u_i(y) / Σ_i ω_i`,
//! * `V̂_a(x) = Σ_k {Û_a(Y(k)) / Û₁(Y(k))} π_x(k)`,
//!
//! where `ω_i = r_i / w_i`; with unit weights the averages are the plain
//! `1/n` means.

use crate::error::{PlrError, Result};
use crate::model::{tilt_weights, BaselineDist, Beta, IndexFunction, ObservationSet};
use crate::tilt::TiltTable;

/// Caches shared by every evaluation at a fixed `(data, β, p)`.
#[derive(Debug, Clone)]
pub struct ScoreContext<'a> {
    data: &'a ObservationSet,
    beta: Beta,
    baseline: BaselineDist,
    table: TiltTable,
    /// shifted normalisers `S̃_j`, `Ŝ₁(X_j) = exp(shift_j) S̃_j`
    s_tilde: Vec<f64>,
    /// `u_j(k)`, row-major over contributing rows
    u: Vec<f64>,
    /// `Û₁(Y(k))`
    u1: Vec<f64>,
}

/// `Û_a(Y(k)) / Û₁(Y(k))` at every support point, row-major `K × q`.
#[derive(Debug, Clone)]
pub struct URatios {
    q: usize,
    values: Vec<f64>,
}

impl URatios {
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.q..(k + 1) * self.q]
    }
}

impl<'a> ScoreContext<'a> {
    pub fn new(data: &'a ObservationSet, beta: &Beta, baseline: &BaselineDist) -> Result<Self> {
        let table = TiltTable::new(data, beta)?;
        Self::from_table(data, beta, baseline, table)
    }

    pub(crate) fn from_table(
        data: &'a ObservationSet,
        beta: &Beta,
        baseline: &BaselineDist,
        table: TiltTable,
    ) -> Result<Self> {
        if baseline.support() != data.support() {
            return Err(PlrError::InvalidData("baseline support differs from the data's distinct responses".into()));
        }
        let p = baseline.p();
        let k = table.k;
        let mut s_tilde = Vec::new();
        table.normalisers(p, &mut s_tilde);
        let mut u = Vec::with_capacity(table.len() * k);
        let mut u1 = vec![0.0; k];
        for (j, s) in s_tilde.iter().enumerate() {
            if !(*s > 0.0) {
                return Err(PlrError::ZeroNormaliser { row: table.rows[j] });
            }
            let w = table.omega[j];
            for (kk, e) in table.row(j).iter().enumerate() {
                let v = e / s;
                u.push(v);
                u1[kk] += w * v;
            }
        }
        let total = table.total_weight;
        u1.iter_mut().for_each(|v| *v /= total);
        Ok(ScoreContext { data, beta: beta.clone(), baseline: baseline.clone(), table, s_tilde, u, u1 })
    }

    pub fn data(&self) -> &'a ObservationSet {
        self.data
    }

    pub fn beta(&self) -> &Beta {
        &self.beta
    }

    pub fn baseline(&self) -> &BaselineDist {
        &self.baseline
    }

    fn q(&self) -> usize {
        self.data.q()
    }

    fn u_row(&self, j: usize) -> &[f64] {
        &self.u[j * self.table.k..(j + 1) * self.table.k]
    }

    /// Cached `Ŝ₁(X_i)` for every contributing row `i`.
    pub fn s1_at_rows(&self) -> Vec<(usize, f64)> {
        self.table
            .rows
            .iter()
            .zip(self.s_tilde.iter().zip(&self.table.shift))
            .map(|(i, (s, c))| (*i, s * c.exp()))
            .collect()
    }

    /// `Ŝ_a(x, β, p) = Σ_k a(Y(k), x) exp(βᵀx Y(k)) p_k`.
    pub fn s_hat(&self, a: &IndexFunction, x_row: &[f64]) -> Result<Vec<f64>> {
        let q = self.q();
        let tilts = tilt_weights(&self.beta, x_row, &self.baseline)?;
        let mut out = vec![0.0; q];
        let mut av = vec![0.0; q];
        for ((y, p), e) in self.baseline.support().iter().zip(self.baseline.p()).zip(&tilts) {
            a.eval_into(*y, x_row, &mut av);
            for (o, v) in out.iter_mut().zip(&av) {
                *o += v * e * p;
            }
        }
        Ok(out)
    }

    /// `Ŝ_a(x)/Ŝ₁(x)`, the fitted `E{a(Y, x) | X = x}`.
    pub fn s_ratio(&self, a: &IndexFunction, x_row: &[f64]) -> Result<Vec<f64>> {
        let pi = crate::model::conditional_pmf(&self.beta, x_row, &self.baseline)?;
        let mut out = vec![0.0; self.q()];
        let mut av = vec![0.0; self.q()];
        for (y, pk) in self.baseline.support().iter().zip(&pi) {
            a.eval_into(*y, x_row, &mut av);
            for (o, v) in out.iter_mut().zip(&av) {
                *o += v * pk;
            }
        }
        Ok(out)
    }

    /// `Û_a(y, β, p)`; `y` need not be a support point.
    pub fn u_hat(&self, a: &IndexFunction, y: f64) -> Result<Vec<f64>> {
        let q = self.q();
        let mut out = vec![0.0; q];
        let mut av = vec![0.0; q];
        for (j, &i) in self.table.rows.iter().enumerate() {
            let x = self.data.x_row(i);
            let ratio = (self.table.t[j] * y - self.table.shift[j]).exp() / self.s_tilde[j];
            if !ratio.is_finite() {
                return Err(PlrError::TiltOverflow { index: i, exponent: self.table.t[j] * y });
            }
            a.eval_into(y, x, &mut av);
            let c = self.table.omega[j] * ratio;
            for (o, v) in out.iter_mut().zip(&av) {
                *o += c * v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.table.total_weight);
        Ok(out)
    }

    /// `Û_a(Y(k)) / Û₁(Y(k))` for all `k`, computed in one pass.
    pub fn u_ratios(&self, a: &IndexFunction) -> Result<URatios> {
        let q = self.q();
        let k = self.table.k;
        let support = self.data.support();
        let mut values = vec![0.0; k * q];
        let mut av = vec![0.0; q];
        for (j, &i) in self.table.rows.iter().enumerate() {
            let x = self.data.x_row(i);
            let w = self.table.omega[j];
            for (kk, u) in self.u_row(j).iter().enumerate() {
                a.eval_into(support[kk], x, &mut av);
                let c = w * u;
                for (o, v) in values[kk * q..(kk + 1) * q].iter_mut().zip(&av) {
                    *o += c * v;
                }
            }
        }
        let total = self.table.total_weight;
        for kk in 0..k {
            let u1 = self.u1[kk];
            if !(u1 > 0.0 && u1.is_finite()) {
                return Err(PlrError::DegenerateRatio { index: kk });
            }
            // Û_a / Û₁ with the common 1/Σω cancelled
            for v in &mut values[kk * q..(kk + 1) * q] {
                *v /= u1 * total;
            }
        }
        Ok(URatios { q, values })
    }

    /// `V̂_a(x, β, p)`.
    pub fn v_hat(&self, a: &IndexFunction, x_row: &[f64]) -> Result<Vec<f64>> {
        let ratios = self.u_ratios(a)?;
        let pi = crate::model::conditional_pmf(&self.beta, x_row, &self.baseline)?;
        Ok(self.v_from(&ratios, &pi))
    }

    fn v_from(&self, ratios: &URatios, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        for (kk, pk) in pi.iter().enumerate() {
            for (o, r) in out.iter_mut().zip(ratios.at(kk)) {
                *o += r * pk;
            }
        }
        out
    }

    /// `m_{n,a}(y, x) = a(y,x) − Ŝ_a/Ŝ₁(x) − Û_a/Û₁(y) + V̂_a(x)`.
    pub fn m_hat(&self, a: &IndexFunction, y: f64, x_row: &[f64]) -> Result<Vec<f64>> {
        let ratios = self.u_ratios(a)?;
        self.m_with(a, &ratios, y, x_row)
    }

    /// `m_hat` reusing precomputed `Û_a/Û₁` ratios.
    pub fn m_with(&self, a: &IndexFunction, ratios: &URatios, y: f64, x_row: &[f64]) -> Result<Vec<f64>> {
        let q = self.q();
        let u_term = match self.baseline.index_of(y) {
            Some(k) => ratios.at(k).to_vec(),
            None => {
                let ua = self.u_hat(a, y)?;
                let u1 = self.u_hat(&IndexFunction::constant(vec![1.0; q]), y)?[0];
                if !(u1 > 0.0) {
                    return Err(PlrError::DegenerateRatio { index: usize::MAX });
                }
                ua.iter().map(|v| v / u1).collect()
            }
        };
        let pi = crate::model::conditional_pmf(&self.beta, x_row, &self.baseline)?;
        let mut out = a.eval(y, x_row);
        let mut av = vec![0.0; q];
        for (kk, pk) in pi.iter().enumerate() {
            a.eval_into(self.baseline.support()[kk], x_row, &mut av);
            for (o, (v, r)) in out.iter_mut().zip(av.iter().zip(ratios.at(kk))) {
                *o += (r - v) * pk;
            }
        }
        for (o, u) in out.iter_mut().zip(&u_term) {
            *o -= u;
        }
        Ok(out)
    }

    /// Per-row `m_{n,a}(Y_i, X_i)` for every contributing row, with its
    /// analysis weight. Uses the cached tilt table, O(nKq).
    pub fn m_rows(&self, a: &IndexFunction) -> Result<Vec<(usize, f64, Vec<f64>)>> {
        let q = self.q();
        let ratios = self.u_ratios(a)?;
        let support = self.data.support();
        let p = self.baseline.p();
        let mut av = vec![0.0; q];
        let mut rows = Vec::with_capacity(self.table.len());
        for (j, &i) in self.table.rows.iter().enumerate() {
            let x = self.data.x_row(i);
            let mut m = a.eval(self.data.y()[i], x);
            for (o, r) in m.iter_mut().zip(ratios.at(self.table.atom[j])) {
                *o -= r;
            }
            for (kk, u) in self.u_row(j).iter().enumerate() {
                let pi = p[kk] * u;
                a.eval_into(support[kk], x, &mut av);
                for (o, (v, r)) in m.iter_mut().zip(av.iter().zip(ratios.at(kk))) {
                    *o += (r - v) * pi;
                }
            }
            rows.push((i, self.table.omega[j], m));
        }
        Ok(rows)
    }

    /// `Σ_i ω_i m_{n,a}(Y_i, X_i) / Σ_i ω_i`.
    pub fn psi(&self, a: &IndexFunction) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.q()];
        for (_, w, m) in self.m_rows(a)? {
            for (o, v) in out.iter_mut().zip(&m) {
                *o += w * v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.table.total_weight);
        Ok(out)
    }
}
