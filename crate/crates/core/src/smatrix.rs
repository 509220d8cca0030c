//! Full transition matrices in canonical state order, with lookup by
//! external label.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{GridModel, TransitionLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Qda,
    Numeric,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qda => "qda",
            Method::Numeric => "numeric",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `S_{j j'}` maps amplitudes at `-t'` (column `j'`) to amplitudes at `t''`
/// (row `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    matrix: DMatrix<C64>,
    method: Method,
    fingerprint: u64,
    est_error: f64,
    labels: Vec<usize>,
}

impl TransitionMatrix {
    pub fn new(grid: &GridModel, matrix: DMatrix<C64>, method: Method, est_error: f64) -> Result<Self> {
        let n = grid.n_states();
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix is {}x{}, grid has {n} states",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, method, fingerprint: grid.fingerprint(), est_error, labels: grid.labels().to_vec() })
    }

    /// Matrix in canonical (sorted) state order.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Fingerprint of the grid this matrix was computed for.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn est_error(&self) -> f64 {
        self.est_error
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn canonical(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::InvalidLabel { index: label, len: self.labels.len() })
    }

    /// Amplitude `S_{to, from}` for external labels.
    pub fn amplitude(&self, t: TransitionLabel) -> Result<C64> {
        let from = self.canonical(t.from_state)?;
        let to = self.canonical(t.to_state)?;
        Ok(self.matrix[(to, from)])
    }

    /// `|S_{to, from}|^2` for external labels.
    pub fn probability(&self, t: TransitionLabel) -> Result<f64> {
        Ok(self.amplitude(t)?.norm_sqr())
    }

    /// Matrix re-ordered to external label order.
    pub fn external_matrix(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(self.labels[r] - 1, self.labels[c] - 1)] = self.matrix[(r, c)];
            }
        }
        out
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }
}

/// `max |S^H S - I|`.
pub fn unitarity_defect(s: &DMatrix<C64>) -> f64 {
    let p = s.adjoint() * s;
    let mut worst: f64 = 0.0;
    for r in 0..p.nrows() {
        for c in 0..p.ncols() {
            let want = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((p[(r, c)] - want).norm());
        }
    }
    worst
}

/// `max |A_jk - B_jk|`.
pub fn max_elementwise_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
