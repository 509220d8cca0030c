//! Direct propagation of the full coupled equations, the reference against
//! which the decoupled approximation is checked.
//!
//! The Hamiltonian is `H_ii(t) = offset_i + slope_i t` on the diagonal with a
//! constant coupling block between the first `n1` states and the rest. In
//! the interaction picture the diagonal phases
//! `theta_i(t) = offset_i t + slope_i t^2 / 2` are removed analytically and
//! only the coupling terms `g_jk exp(i (theta_j - theta_k))` are integrated.

mod dop853;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::GridModel;
use crate::smatrix::{Method, TransitionMatrix};

pub use crate::smatrix::unitarity_defect;
pub use dop853::StepStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Schrodinger,
    Interaction,
}

/// Tolerances in [`PropagationSettings`] are targets for the whole run;
/// each step is held to this fraction of them, since local errors
/// accumulate over the ~10^4 steps of a typical grid.
const LOCAL_TOL_FACTOR: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub picture: Picture,
    pub max_steps: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            picture: Picture::Interaction,
            max_steps: 5_000_000,
        }
    }
}

impl PropagationSettings {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-13..=1e-6).contains(&self.rel_tol) {
            return Err(Error::InvalidArgument(format!("rel_tol {} outside [1e-13, 1e-6]", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::InvalidArgument(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidArgument("max_step must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Largest norm drift tolerated before a run is rejected.
    pub fn drift_limit(&self) -> f64 {
        100.0 * self.rel_tol
    }

    fn controls(&self) -> dop853::Controls {
        dop853::Controls {
            rel_tol: self.rel_tol * LOCAL_TOL_FACTOR,
            abs_tol: self.abs_tol * LOCAL_TOL_FACTOR,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

/// Two sets of linear potentials with arbitrary slopes and a constant
/// cross-set coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHamiltonian {
    offsets: Vec<f64>,
    slopes: Vec<f64>,
    n1: usize,
    coupling: DMatrix<C64>,
}

impl LinearHamiltonian {
    pub fn new(offsets: Vec<f64>, slopes: Vec<f64>, coupling: DMatrix<C64>) -> Result<Self> {
        let (n1, n2) = coupling.shape();
        if offsets.len() != n1 + n2 || slopes.len() != n1 + n2 {
            return Err(Error::DimensionMismatch(format!(
                "{} offsets and {} slopes for a {n1}x{n2} coupling",
                offsets.len(),
                slopes.len()
            )));
        }
        if offsets.iter().chain(&slopes).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("hamiltonian"));
        }
        if coupling.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
            return Err(Error::NonFinite("coupling"));
        }
        Ok(Self { offsets, slopes, n1, coupling })
    }

    pub fn from_grid(grid: &GridModel) -> Self {
        let offsets = (0..grid.n_states()).map(|i| grid.offset(i)).collect();
        let slopes = (0..grid.n_states()).map(|i| if i < grid.n1() { 0.0 } else { grid.beta() }).collect();
        Self { offsets, slopes, n1: grid.n1(), coupling: grid.coupling().clone() }
    }

    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    /// `theta_i(t) = offset_i t + slope_i t^2 / 2`.
    pub fn phase(&self, i: usize, t: f64) -> f64 {
        self.offsets[i] * t + 0.5 * self.slopes[i] * t * t
    }

    fn phase_difference(&self, i: usize, k: usize, t: f64) -> f64 {
        (self.offsets[i] - self.offsets[k]) * t + 0.5 * (self.slopes[i] - self.slopes[k]) * t * t
    }
}

/// Result of propagating a batch of states (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPropagation {
    pub states: DMatrix<C64>,
    /// Largest relative change of a column norm.
    pub norm_drift: f64,
    pub stats: StepStats,
}

/// Result of propagating a single state.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub state: Vec<C64>,
    pub norm_drift: f64,
    pub stats: StepStats,
}

fn column_norms(m: &DMatrix<C64>) -> Vec<f64> {
    m.column_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect()
}

/// Propagate every column of `states` from `t_from` to `t_to` (either
/// direction).
pub fn propagate_hamiltonian(
    h: &LinearHamiltonian,
    t_from: f64,
    t_to: f64,
    states: &DMatrix<C64>,
    settings: &PropagationSettings,
) -> Result<BatchPropagation> {
    settings.validate()?;
    let n = h.dim();
    if states.nrows() != n {
        return Err(Error::DimensionMismatch(format!("states have {} rows, hamiltonian has {n}", states.nrows())));
    }
    if !(t_from.is_finite() && t_to.is_finite()) {
        return Err(Error::NonFinite("propagation interval"));
    }
    let norms0 = column_norms(states);
    if norms0.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("initial state has zero norm".into()));
    }
    let n1 = h.n1;
    let n2 = n - n1;
    let cols = states.ncols();
    let mut y = states.clone();
    let ctl = settings.controls();

    let stats = match settings.picture {
        Picture::Interaction => {
            for i in 0..n {
                let p = C64::from_polar(1.0, h.phase(i, t_from));
                y.row_mut(i).iter_mut().for_each(|z| *z *= p);
            }
            let mut u = vec![C64::new(0.0, 0.0); n1 * n2];
            let rhs = |t: f64, c: &[C64], dc: &mut [C64]| {
                for j in 0..n1 {
                    for k in 0..n2 {
                        u[j * n2 + k] = h.coupling[(j, k)] * C64::from_polar(1.0, h.phase_difference(j, n1 + k, t));
                    }
                }
                for col in 0..cols {
                    let c = &c[col * n..(col + 1) * n];
                    let d = &mut dc[col * n..(col + 1) * n];
                    for j in 0..n1 {
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..n2 {
                            acc += u[j * n2 + k] * c[n1 + k];
                        }
                        d[j] = C64::new(acc.im, -acc.re);
                    }
                    for k in 0..n2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..n1 {
                            acc += u[j * n2 + k].conj() * c[j];
                        }
                        d[n1 + k] = C64::new(acc.im, -acc.re);
                    }
                }
            };
            let stats = dop853::integrate(rhs, t_from, t_to, y.as_mut_slice(), &ctl)?;
            for i in 0..n {
                let p = C64::from_polar(1.0, -h.phase(i, t_to));
                y.row_mut(i).iter_mut().for_each(|z| *z *= p);
            }
            stats
        }
        Picture::Schrodinger => {
            let rhs = |t: f64, c: &[C64], dc: &mut [C64]| {
                for col in 0..cols {
                    let c = &c[col * n..(col + 1) * n];
                    let d = &mut dc[col * n..(col + 1) * n];
                    for i in 0..n {
                        d[i] = c[i] * (h.offsets[i] + h.slopes[i] * t);
                    }
                    for j in 0..n1 {
                        for k in 0..n2 {
                            let g = h.coupling[(j, k)];
                            d[j] += g * c[n1 + k];
                            d[n1 + k] += g.conj() * c[j];
                        }
                    }
                    for z in d.iter_mut() {
                        *z = C64::new(z.im, -z.re);
                    }
                }
            };
            dop853::integrate(rhs, t_from, t_to, y.as_mut_slice(), &ctl)?
        }
    };

    let norm_drift = column_norms(&y)
        .iter()
        .zip(&norms0)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    if !(norm_drift <= settings.drift_limit()) {
        return Err(Error::NormDrift { drift: norm_drift, limit: settings.drift_limit() });
    }
    Ok(BatchPropagation { states: y, norm_drift, stats })
}

/// Propagate `phi0` over the grid interval `[-t', t'']`.
pub fn propagate(grid: &GridModel, phi0: &[C64], settings: &PropagationSettings) -> Result<Propagation> {
    let n = grid.n_states();
    if phi0.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state has {} entries, grid has {n}", phi0.len())));
    }
    let h = LinearHamiltonian::from_grid(grid);
    let start = DMatrix::from_column_slice(n, 1, phi0);
    let out = propagate_hamiltonian(&h, -grid.t_minus(), grid.t_plus(), &start, settings)?;
    Ok(Propagation { state: out.states.as_slice().to_vec(), norm_drift: out.norm_drift, stats: out.stats })
}

/// Propagator of a Hamiltonian between two times.
pub fn propagator(h: &LinearHamiltonian, t_from: f64, t_to: f64, settings: &PropagationSettings) -> Result<BatchPropagation> {
    let id = DMatrix::<C64>::identity(h.dim(), h.dim());
    propagate_hamiltonian(h, t_from, t_to, &id, settings)
}

/// Transition matrix of the grid from all basis states propagated together.
pub fn numeric_smatrix(grid: &GridModel, settings: &PropagationSettings) -> Result<TransitionMatrix> {
    let h = LinearHamiltonian::from_grid(grid);
    let out = propagator(&h, -grid.t_minus(), grid.t_plus(), settings)?;
    let defect = unitarity_defect(&out.states);
    TransitionMatrix::new(grid, out.states, Method::Numeric, defect.max(10.0 * settings.rel_tol))
}
