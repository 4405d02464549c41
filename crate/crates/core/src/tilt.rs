use crate::error::{PlrError, Result};
use crate::model::{Beta, ObservationSet};

/// Shifted tilt kernel `exp(t_i Y(k) − c_i)` for every contributing row,
/// with `t_i = βᵀX_i` and `c_i = max_k t_i Y(k)`.
#[derive(Debug, Clone)]
pub(crate) struct TiltTable {
    /// data row of each contributing row
    pub rows: Vec<usize>,
    pub omega: Vec<f64>,
    pub t: Vec<f64>,
    pub shift: Vec<f64>,
    /// row-major `rows.len() × k`
    pub e: Vec<f64>,
    /// support index of each contributing row's response
    pub atom: Vec<usize>,
    pub k: usize,
    pub total_weight: f64,
    /// weighted atom counts `d_k`
    pub d: Vec<f64>,
}

impl TiltTable {
    pub fn new(data: &ObservationSet, beta: &Beta) -> Result<Self> {
        beta.check_dim(data.q())?;
        let support = data.support();
        let k = support.len();
        let (ymin, ymax) = (support[0], support[k - 1]);
        let mut rows = Vec::new();
        let mut omega = Vec::new();
        let mut t = Vec::new();
        let mut shift = Vec::new();
        let mut atom = Vec::new();
        for i in 0..data.n() {
            let w = data.analysis_weight(i);
            if w == 0.0 {
                continue;
            }
            let ti = beta.dot(data.x_row(i));
            if !ti.is_finite() {
                return Err(PlrError::InvalidData(format!("non-finite linear predictor at row {i}")));
            }
            rows.push(i);
            omega.push(w);
            t.push(ti);
            shift.push((ti * ymin).max(ti * ymax));
            atom.push(data.support_index(i).expect("complete row has a support index"));
        }
        let mut e = Vec::with_capacity(rows.len() * k);
        for (ti, ci) in t.iter().zip(&shift) {
            e.extend(support.iter().map(|y| (ti * y - ci).exp()));
        }
        let mut d = vec![0.0; k];
        for (a, w) in atom.iter().zip(&omega) {
            d[*a] += w;
        }
        if let Some(index) = d.iter().position(|v| *v <= 0.0) {
            return Err(PlrError::EmptySupportAtom { index });
        }
        let total_weight = omega.iter().sum();
        Ok(TiltTable { rows, omega, t, shift, e, atom, k, total_weight, d })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.e[j * self.k..(j + 1) * self.k]
    }

    /// Shifted normalisers `S̃_j = Σ_k p_k e_jk`.
    pub fn normalisers(&self, p: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.len()).map(|j| dot(self.row(j), p)));
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
