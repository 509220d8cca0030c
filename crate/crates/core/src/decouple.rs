//! Decoupling transformation: the singular value decomposition
//! `g_jk = sum_l conj(X_lj) g_l Y_lk` of the cross-set coupling matrix and
//! the potentials seen by the decoupled channels,
//! `Va = X diag(V_j) X^H`, `Vb = Y diag(V_{n1+k}) Y^H`.
//!
//! Rows of `X` and `Y` are the singular vectors. Rows beyond the effective
//! rank `n` span the null space; inside it the gauge is fixed so that the
//! null-space blocks of `Va` and `Vb` are diagonal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{bandwidths, GridModel};

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

const UNITARITY_TOL: f64 = 1e-10;

/// SVD factors in row convention.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSvd {
    /// `n1 x n1` unitary, rows are left singular vectors.
    pub x: DMatrix<C64>,
    /// `n2 x n2` unitary, rows are right singular vectors.
    pub y: DMatrix<C64>,
    /// `min(n1, n2)` singular values, descending, exactly zero past `n`.
    pub g: Vec<f64>,
    /// Effective rank.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoupledSystem {
    x: DMatrix<C64>,
    y: DMatrix<C64>,
    g: Vec<f64>,
    n: usize,
    va: DMatrix<C64>,
    vb: DMatrix<C64>,
    rank_tol: f64,
}

impl DecoupledSystem {
    pub fn x(&self) -> &DMatrix<C64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<C64> {
        &self.y
    }

    /// Singular values, `min(n1, n2)` of them.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Coupling of channel `l` (0-based); zero for channels without a
    /// partner in the other set.
    pub fn channel_coupling(&self, l: usize) -> f64 {
        self.g.get(l).copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn va(&self) -> &DMatrix<C64> {
        &self.va
    }

    pub fn vb(&self) -> &DMatrix<C64> {
        &self.vb
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn n1(&self) -> usize {
        self.x.nrows()
    }

    pub fn n2(&self) -> usize {
        self.y.nrows()
    }

    /// Assemble a system from externally chosen factors, without any gauge
    /// fixing. Checks unitarity and reconstruction of the grid's coupling.
    pub fn from_parts(grid: &GridModel, svd: CouplingSvd, rank_tol: f64) -> Result<Self> {
        let (n1, n2) = (grid.n1(), grid.n2());
        if svd.x.shape() != (n1, n1) || svd.y.shape() != (n2, n2) || svd.g.len() != n1.min(n2) {
            return Err(Error::DimensionMismatch("decoupling factors".into()));
        }
        if unitarity_defect(&svd.x) > UNITARITY_TOL || unitarity_defect(&svd.y) > UNITARITY_TOL {
            return Err(Error::InvalidArgument("decoupling factors are not unitary".into()));
        }
        let scale = grid.coupling().iter().map(|g| g.norm()).fold(0.0, f64::max);
        if reconstruction_residual(grid.coupling(), &svd) > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument("factors do not reproduce the coupling matrix".into()));
        }
        let va = potential_matrix(&svd.x, grid.v_horizontal());
        let vb = potential_matrix(&svd.y, grid.v_slanted());
        Ok(Self { x: svd.x, y: svd.y, g: svd.g, n: svd.n, va, vb, rank_tol })
    }
}

fn conj_transpose(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.adjoint()
}

/// `max |M M^H - I|`.
pub fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let p = m * conj_transpose(m);
    let id = DMatrix::<C64>::identity(m.nrows(), m.nrows());
    (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max_jk |g_jk - sum_l conj(X_lj) g_l Y_lk|`.
pub fn reconstruction_residual(coupling: &DMatrix<C64>, svd: &CouplingSvd) -> f64 {
    let (n1, n2) = coupling.shape();
    let mut worst: f64 = 0.0;
    for j in 0..n1 {
        for k in 0..n2 {
            let mut acc = C64::new(0.0, 0.0);
            for (l, &gl) in svd.g.iter().enumerate() {
                acc += svd.x[(l, j)].conj() * gl * svd.y[(l, k)];
            }
            worst = worst.max((coupling[(j, k)] - acc).norm());
        }
    }
    worst
}

/// `M_ll' = sum_j U_lj V_j conj(U_l'j)`.
pub fn potential_matrix(u: &DMatrix<C64>, v: &[f64]) -> DMatrix<C64> {
    let n = u.nrows();
    DMatrix::from_fn(n, n, |l, lp| {
        (0..v.len()).map(|j| u[(l, j)] * v[j] * u[(lp, j)].conj()).sum()
    })
}

/// Extend `rows` orthonormal rows of `m` (the first `rows` rows) to a full
/// unitary by Gram-Schmidt against the standard basis.
fn complete_rows(m: &mut DMatrix<C64>, rows: usize) {
    let n = m.ncols();
    let mut filled = rows;
    let project_out = |m: &DMatrix<C64>, filled: usize, v: &mut DVector<C64>| {
        for _ in 0..2 {
            for r in 0..filled {
                let row = m.row(r);
                let overlap: C64 = (0..n).map(|j| row[j].conj() * v[j]).sum();
                for j in 0..n {
                    v[j] -= overlap * row[j];
                }
            }
        }
    };
    while filled < n {
        // pick the basis vector with the largest residual
        let mut best: Option<(f64, DVector<C64>)> = None;
        for e in 0..n {
            let mut v = DVector::<C64>::zeros(n);
            v[e] = C64::new(1.0, 0.0);
            project_out(m, filled, &mut v);
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        let v = v / C64::new(norm, 0.0);
        for j in 0..n {
            m[(filled, j)] = v[j];
        }
        filled += 1;
    }
}

/// Phase that makes the first non-negligible entry of `row` real positive.
fn canonical_phase(m: &DMatrix<C64>, row: usize) -> C64 {
    let scale = m.row(row).iter().map(|z| z.norm()).fold(0.0, f64::max);
    for z in m.row(row).iter() {
        if z.norm() > 1e-8 * scale {
            return z.conj() / z.norm();
        }
    }
    C64::new(1.0, 0.0)
}

fn scale_row(m: &mut DMatrix<C64>, row: usize, phase: C64) {
    for j in 0..m.ncols() {
        m[(row, j)] *= phase;
    }
}

/// Fix the phase of each coupled pair of rows so the first entry of the X
/// row is real positive, and count the effective rank.
fn canonicalize(mut x: DMatrix<C64>, mut y: DMatrix<C64>, mut g: Vec<f64>, rank_tol: f64) -> CouplingSvd {
    let gmax = g.iter().copied().fold(0.0, f64::max);
    let n = if gmax > 0.0 { g.iter().filter(|&&v| v > rank_tol * gmax).count() } else { 0 };
    for v in g.iter_mut().skip(n) {
        *v = 0.0;
    }
    for l in 0..n {
        let p = canonical_phase(&x, l);
        scale_row(&mut x, l, p);
        scale_row(&mut y, l, p);
    }
    CouplingSvd { x, y, g, n }
}

/// Canonical SVD of the coupling matrix: real non-negative singular values
/// in descending order, `n` counts those above `rank_tol * max(g)`.
pub fn svd_couplings(coupling: &DMatrix<C64>, rank_tol: f64) -> Result<CouplingSvd> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must be positive, got {rank_tol}")));
    }
    if coupling.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
        return Err(Error::NonFinite("coupling"));
    }
    let (n1, n2) = coupling.shape();
    let r = n1.min(n2);
    let svd = coupling.clone().try_svd(true, true, f64::EPSILON, 10_000).ok_or(Error::SvdFailure)?;
    let u = svd.u.ok_or(Error::SvdFailure)?;
    let v_t = svd.v_t.ok_or(Error::SvdFailure)?;
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut x = DMatrix::<C64>::zeros(n1, n1);
    let mut y = DMatrix::<C64>::zeros(n2, n2);
    let mut g = Vec::with_capacity(r);
    for (l, &src) in order.iter().enumerate() {
        g.push(svd.singular_values[src]);
        for j in 0..n1 {
            x[(l, j)] = u[(j, src)].conj();
        }
        for k in 0..n2 {
            y[(l, k)] = v_t[(src, k)];
        }
    }
    complete_rows(&mut x, r);
    complete_rows(&mut y, r);
    Ok(canonicalize(x, y, g, rank_tol))
}

/// Analytic decomposition of a separable coupling `g_jk = conj(xi_j) eta_k`:
/// the first rows are the normalised `xi` and `eta`, `g_1 = |xi| |eta|`.
pub fn separable_svd(xi: &[C64], eta: &[C64]) -> Result<CouplingSvd> {
    let nx = xi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ny = eta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if xi.is_empty() || eta.is_empty() {
        return Err(Error::DimensionMismatch("empty separable factor".into()));
    }
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::InvalidArgument("separable factors must be non-zero".into()));
    }
    let (n1, n2) = (xi.len(), eta.len());
    let mut x = DMatrix::<C64>::zeros(n1, n1);
    let mut y = DMatrix::<C64>::zeros(n2, n2);
    for (j, z) in xi.iter().enumerate() {
        x[(0, j)] = z / nx;
    }
    for (k, z) in eta.iter().enumerate() {
        y[(0, k)] = z / ny;
    }
    complete_rows(&mut x, 1);
    complete_rows(&mut y, 1);
    let mut g = vec![0.0; n1.min(n2)];
    g[0] = nx * ny;
    Ok(canonicalize(x, y, g, DEFAULT_RANK_TOL))
}

/// Rotate the null-space rows `from..` so the corresponding block of
/// `U diag(v) U^H` becomes diagonal, eigenvalues ascending.
fn diagonalize_null_block(u: &mut DMatrix<C64>, v: &[f64], from: usize) {
    let dim = u.nrows();
    if dim - from < 2 {
        for r in from..dim {
            let p = canonical_phase(u, r);
            scale_row(u, r, p);
        }
        return;
    }
    let full = potential_matrix(u, v);
    let block = full.view((from, from), (dim - from, dim - from)).into_owned();
    let eig = block.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim - from).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let old = u.rows(from, dim - from).into_owned();
    for (new_r, &src) in order.iter().enumerate() {
        // new row = sum_m conj(W_m,src) old_row_m
        for j in 0..u.ncols() {
            u[(from + new_r, j)] = (0..dim - from)
                .map(|m| eig.eigenvectors[(m, src)].conj() * old[(m, j)])
                .sum();
        }
        let p = canonical_phase(u, from + new_r);
        scale_row(u, from + new_r, p);
    }
}

/// Fix the null-space gauge and compute the decoupled-channel potentials.
pub fn transformed_potentials(grid: &GridModel, svd: CouplingSvd, rank_tol: f64) -> Result<DecoupledSystem> {
    if svd.x.shape() != (grid.n1(), grid.n1()) || svd.y.shape() != (grid.n2(), grid.n2()) {
        return Err(Error::DimensionMismatch("decoupling factors do not match the grid".into()));
    }
    let CouplingSvd { mut x, mut y, g, n } = svd;
    diagonalize_null_block(&mut x, grid.v_horizontal(), n);
    diagonalize_null_block(&mut y, grid.v_slanted(), n);
    let va = potential_matrix(&x, grid.v_horizontal());
    let vb = potential_matrix(&y, grid.v_slanted());
    Ok(DecoupledSystem { x, y, g, n, va, vb, rank_tol })
}

/// Full decoupling of a grid with the default pipeline.
pub fn decouple(grid: &GridModel, rank_tol: f64) -> Result<DecoupledSystem> {
    let svd = svd_couplings(grid.coupling(), rank_tol)?;
    transformed_potentials(grid, svd, rank_tol)
}

/// Both sides of the off-diagonal bound for each set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffdiagBound {
    /// `sum_{l != l'} |Va_ll'|^2` summed directly.
    pub lhs1: f64,
    /// The same quantity as `sum_j V_j^2 - sum_l Va_ll^2`.
    pub lhs1_trace: f64,
    /// `n1 dV1^2 / 4`.
    pub rhs1: f64,
    pub lhs2: f64,
    pub lhs2_trace: f64,
    pub rhs2: f64,
}

impl OffdiagBound {
    pub fn holds(&self) -> bool {
        let slack = |rhs: f64| 1e-12 * rhs.max(f64::MIN_POSITIVE);
        self.lhs1 <= self.rhs1 + slack(self.rhs1) && self.lhs2 <= self.rhs2 + slack(self.rhs2)
    }
}

fn offdiag_power(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for l in 0..n {
        for lp in 0..n {
            if l != lp {
                acc += m[(l, lp)].norm_sqr();
            }
        }
    }
    acc
}

fn trace_form(v: &[f64], m: &DMatrix<C64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() - (0..m.nrows()).map(|l| m[(l, l)].re.powi(2)).sum::<f64>()
}

pub fn offdiag_bound(grid: &GridModel, va: &DMatrix<C64>, vb: &DMatrix<C64>) -> OffdiagBound {
    let (dv1, dv2) = bandwidths(grid);
    OffdiagBound {
        lhs1: offdiag_power(va),
        lhs1_trace: trace_form(grid.v_horizontal(), va),
        rhs1: grid.n1() as f64 * dv1 * dv1 / 4.0,
        lhs2: offdiag_power(vb),
        lhs2_trace: trace_form(grid.v_slanted(), vb),
        rhs2: grid.n2() as f64 * dv2 * dv2 / 4.0,
    }
}

/// Decoupled-channel amplitudes `a = X phi_1`, `b = Y phi_2`.
pub fn decoupled_amplitudes(x: &DMatrix<C64>, y: &DMatrix<C64>, phi: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    let (n1, n2) = (x.nrows(), y.nrows());
    if phi.len() != n1 + n2 {
        return Err(Error::DimensionMismatch(format!("state has {} entries, expected {}", phi.len(), n1 + n2)));
    }
    let a = (0..n1).map(|l| (0..n1).map(|j| x[(l, j)] * phi[j]).sum()).collect();
    let b = (0..n2).map(|l| (0..n2).map(|k| y[(l, k)] * phi[n1 + k]).sum()).collect();
    Ok((a, b))
}

/// `|rho| = |dv / (Va_22 - Va_11)|`: ratio of the original gap to the gap of
/// the first two decoupled channels. `None` when the decoupled gap vanishes.
pub fn gap_ratio(dec: &DecoupledSystem, dv: f64) -> Option<f64> {
    diag_gap_ratio(&dec.va, dv)
}

/// As [`gap_ratio`], from the slanted-set potentials.
pub fn gap_ratio_slanted(dec: &DecoupledSystem, dv: f64) -> Option<f64> {
    diag_gap_ratio(&dec.vb, dv)
}

fn diag_gap_ratio(m: &DMatrix<C64>, dv: f64) -> Option<f64> {
    if m.nrows() < 2 {
        return None;
    }
    let gap = m[(1, 1)].re - m[(0, 0)].re;
    let scale = m.iter().map(|z| z.norm()).fold(dv.abs(), f64::max);
    if gap.abs() <= 1e-9 * scale {
        return None;
    }
    Some((dv / gap).abs())
}
