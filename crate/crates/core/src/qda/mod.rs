//! Quasidegeneracy approximation: drop the off-diagonal decoupled
//! potentials, solve each channel as a two-state linear crossing and map
//! the channel S-matrices back to the original states.
//!
//! Channel `l` couples `a_l` (potential `Va_ll`) to `b_l` (potential
//! `Vb_ll + beta t`) with strength `g_l`. With `tau = t - t_l`,
//! `z = -i beta tau^2 / 2` and `e = exp(-i Va_ll t)` the fundamental pair is
//!
//! ```text
//! A1 = M(-i lambda/2, 1/2, z) e          B1 = (beta tau / g) M'(-i lambda/2, 1/2, z) e
//! A2 = tau M(1/2 - i lambda/2, 3/2, z) e B2 = (i / g) (G + 2 z G') e,  G = M(1/2 - i lambda/2, 3/2, z)
//! ```
//!
//! and the channel S-matrix follows from the two pairs at `-t'` and `t''`.

mod criteria;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;

use crate::decouple::{decouple, DecoupledSystem, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::integrate::{propagator, LinearHamiltonian, PropagationSettings};
use crate::model::GridModel;
use crate::parallel::map_ordered;
use crate::smatrix::{Method, TransitionMatrix};
use crate::specfun::{kummer_m, KummerQuery, DEFAULT_REL_TOL};

pub use criteria::{
    criteria_margin, first_order_corrections, oscillation_period, CriteriaReport, CriteriaThresholds, FirstOrderEstimates,
    PairMargin, PotentialSet, Verdict,
};

/// Two-state data of a coupled channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub l: usize,
    pub g: f64,
    /// `g^2 / beta`.
    pub lambda: f64,
    /// Crossing time `(Va_ll - Vb_ll) / beta`.
    pub t_l: f64,
    pub va: f64,
    pub vb: f64,
}

impl ChannelParams {
    pub fn new(l: usize, g: f64, va: f64, vb: f64, beta: f64) -> Self {
        Self { l, g, lambda: g * g / beta, t_l: (va - vb) / beta, va, vb }
    }
}

/// Parameters of every coupled channel `l < n`.
pub fn channel_params(dec: &DecoupledSystem, beta: f64) -> Vec<ChannelParams> {
    (0..dec.rank())
        .map(|l| ChannelParams::new(l, dec.channel_coupling(l), dec.va()[(l, l)].re, dec.vb()[(l, l)].re, beta))
        .collect()
}

/// The fundamental solutions of one channel at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalPair {
    pub a1: C64,
    pub a2: C64,
    pub b1: C64,
    pub b2: C64,
    /// Largest relative error of the underlying 1F1 evaluations.
    pub est_error: f64,
    /// False when any 1F1 evaluation fell back to an uncertified estimate.
    pub certified: bool,
}

impl FundamentalPair {
    pub fn wronskian(&self) -> C64 {
        self.a1 * self.b2 - self.a2 * self.b1
    }
}

pub fn fundamental_solutions(ch: &ChannelParams, beta: f64, t: f64, kummer_tol: f64) -> Result<FundamentalPair> {
    if !(ch.g > 0.0) {
        return Err(Error::UncoupledChannel { channel: ch.l });
    }
    let tau = t - ch.t_l;
    let z = C64::new(0.0, -0.5 * beta * tau * tau);
    let half_l = 0.5 * ch.lambda;
    let f = kummer_m(&KummerQuery::new(C64::new(0.0, -half_l), 0.5, z).with_tol(kummer_tol))?;
    let g = kummer_m(&KummerQuery::new(C64::new(0.5, -half_l), 1.5, z).with_tol(kummer_tol))?;
    let e = C64::from_polar(1.0, -ch.va * t);
    let i = C64::i();
    Ok(FundamentalPair {
        a1: f.value * e,
        a2: g.value * tau * e,
        b1: f.deriv * (beta * tau / ch.g) * e,
        b2: i / ch.g * (g.value + 2.0 * z * g.deriv) * e,
        est_error: f.est_error.max(g.est_error),
        certified: f.certified() && g.certified(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelMethod {
    Analytic,
    Ode,
}

/// How channel S-matrices are computed. `Auto` uses the analytic form when
/// every 1F1 evaluation is certified and integrates the channel otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Analytic,
    Ode,
}

/// `[[S_aa, S_ab], [S_ba, S_bb]]` of one channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSMatrix {
    pub s: Matrix2<C64>,
    pub method: ChannelMethod,
    pub est_error: f64,
}

impl ChannelSMatrix {
    pub fn aa(&self) -> C64 {
        self.s[(0, 0)]
    }
    pub fn ab(&self) -> C64 {
        self.s[(0, 1)]
    }
    pub fn ba(&self) -> C64 {
        self.s[(1, 0)]
    }
    pub fn bb(&self) -> C64 {
        self.s[(1, 1)]
    }

    pub fn unitarity_defect(&self) -> f64 {
        let p = self.s.adjoint() * self.s;
        let d = p - Matrix2::identity();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QdaSettings {
    pub method: MethodChoice,
    pub kummer_tol: f64,
    pub ode: PropagationSettings,
    pub rank_tol: f64,
}

impl Default for QdaSettings {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            kummer_tol: DEFAULT_REL_TOL,
            ode: PropagationSettings::default(),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

fn analytic_smatrix(ch: &ChannelParams, beta: f64, t_minus: f64, t_plus: f64, kummer_tol: f64) -> Result<Option<ChannelSMatrix>> {
    let p = fundamental_solutions(ch, beta, -t_minus, kummer_tol)?;
    let q = fundamental_solutions(ch, beta, t_plus, kummer_tol)?;
    if !(p.certified && q.certified) {
        return Ok(None);
    }
    let d = p.wronskian();
    let scale = (p.a1.norm() * p.b2.norm()).max(p.a2.norm() * p.b1.norm());
    if d.norm() <= 1e-13 * scale || d.norm() == 0.0 {
        return Err(Error::DegenerateWronskian(d.norm()));
    }
    let s = Matrix2::new(
        (q.a1 * p.b2 - q.a2 * p.b1) / d,
        (q.a2 * p.a1 - q.a1 * p.a2) / d,
        (q.b1 * p.b2 - q.b2 * p.b1) / d,
        (q.b2 * p.a1 - q.b1 * p.a2) / d,
    );
    // rounding of each product relative to |D|
    let amplification = [
        q.a1.norm() * p.b2.norm() + q.a2.norm() * p.b1.norm(),
        q.a2.norm() * p.a1.norm() + q.a1.norm() * p.a2.norm(),
        q.b1.norm() * p.b2.norm() + q.b2.norm() * p.b1.norm(),
        q.b2.norm() * p.a1.norm() + q.b1.norm() * p.a2.norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
        / d.norm();
    let mut out = ChannelSMatrix { s, method: ChannelMethod::Analytic, est_error: 0.0 };
    out.est_error = (2.0 * p.est_error.max(q.est_error) * amplification).max(out.unitarity_defect());
    Ok(Some(out))
}

fn ode_smatrix(ch: &ChannelParams, beta: f64, t_minus: f64, t_plus: f64, settings: &PropagationSettings) -> Result<ChannelSMatrix> {
    let h = LinearHamiltonian::new(vec![ch.va, ch.vb], vec![0.0, beta], DMatrix::from_element(1, 1, C64::new(ch.g, 0.0)))?;
    let u = propagator(&h, -t_minus, t_plus, settings)?.states;
    let s = Matrix2::new(u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let mut out = ChannelSMatrix { s, method: ChannelMethod::Ode, est_error: 0.0 };
    out.est_error = out.unitarity_defect().max(10.0 * settings.rel_tol);
    Ok(out)
}

/// S-matrix of a coupled channel from `-t'` to `t''`.
pub fn two_state_smatrix(ch: &ChannelParams, beta: f64, t_minus: f64, t_plus: f64, settings: &QdaSettings) -> Result<ChannelSMatrix> {
    if !(t_minus + t_plus > 0.0) {
        return Err(Error::InvalidInterval { t_minus, t_plus });
    }
    if !(ch.g > 0.0) {
        return Err(Error::UncoupledChannel { channel: ch.l });
    }
    match settings.method {
        MethodChoice::Ode => ode_smatrix(ch, beta, t_minus, t_plus, &settings.ode),
        MethodChoice::Analytic => analytic_smatrix(ch, beta, t_minus, t_plus, settings.kummer_tol)?.ok_or_else(|| {
            Error::KummerNonConvergence {
                a: format!("-{}i", ch.lambda / 2.0),
                b: "1/2".into(),
                z: format!("-{}i", beta * (t_minus + ch.t_l).abs().max((t_plus - ch.t_l).abs()).powi(2) / 2.0),
            }
        }),
        MethodChoice::Auto => match analytic_smatrix(ch, beta, t_minus, t_plus, settings.kummer_tol) {
            Ok(Some(s)) => Ok(s),
            Ok(None) | Err(Error::KummerNonConvergence { .. }) => ode_smatrix(ch, beta, t_minus, t_plus, &settings.ode),
            Err(e) => Err(e),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Phase acquired by an uncoupled channel of potential `v` over `[-t', t'']`.
pub fn uncoupled_phase(side: Side, v: f64, beta: f64, t_minus: f64, t_plus: f64) -> C64 {
    let mut phase = -v * (t_minus + t_plus);
    if side == Side::B {
        phase -= 0.5 * beta * (t_plus * t_plus - t_minus * t_minus);
    }
    C64::from_polar(1.0, phase)
}

/// Map channel S-matrices back to the original states. `channels[l]` belongs
/// to channel `l < n`; the remaining channels contribute free phases.
pub fn assemble_smatrix(grid: &GridModel, dec: &DecoupledSystem, channels: &[ChannelSMatrix]) -> Result<TransitionMatrix> {
    let (n1, n2, n) = (grid.n1(), grid.n2(), dec.rank());
    if dec.n1() != n1 || dec.n2() != n2 {
        return Err(Error::DimensionMismatch("decoupled system does not match the grid".into()));
    }
    if channels.len() < n {
        return Err(Error::MissingChannel(channels.len()));
    }
    let (x, y) = (dec.x(), dec.y());
    let (beta, tm, tp) = (grid.beta(), grid.t_minus(), grid.t_plus());
    let a_phase: Vec<C64> = (n..n1).map(|l| uncoupled_phase(Side::A, dec.va()[(l, l)].re, beta, tm, tp)).collect();
    let b_phase: Vec<C64> = (n..n2).map(|l| uncoupled_phase(Side::B, dec.vb()[(l, l)].re, beta, tm, tp)).collect();

    let mut s = DMatrix::<C64>::zeros(n1 + n2, n1 + n2);
    for j in 0..n1 {
        for jp in 0..n1 {
            let mut acc: C64 = (0..n).map(|l| x[(l, j)].conj() * channels[l].aa() * x[(l, jp)]).sum();
            acc += (n..n1).map(|l| x[(l, j)].conj() * a_phase[l - n] * x[(l, jp)]).sum::<C64>();
            s[(j, jp)] = acc;
        }
        for kp in 0..n2 {
            s[(j, n1 + kp)] = (0..n).map(|l| x[(l, j)].conj() * channels[l].ab() * y[(l, kp)]).sum();
        }
    }
    for k in 0..n2 {
        for jp in 0..n1 {
            s[(n1 + k, jp)] = (0..n).map(|l| y[(l, k)].conj() * channels[l].ba() * x[(l, jp)]).sum();
        }
        for kp in 0..n2 {
            let mut acc: C64 = (0..n).map(|l| y[(l, k)].conj() * channels[l].bb() * y[(l, kp)]).sum();
            acc += (n..n2).map(|l| y[(l, k)].conj() * b_phase[l - n] * y[(l, kp)]).sum::<C64>();
            s[(n1 + k, n1 + kp)] = acc;
        }
    }
    let err: f64 = channels[..n].iter().map(|c| c.est_error).sum();
    TransitionMatrix::new(grid, s, Method::Qda, err.max(1e-14))
}

/// Everything produced by a QDA run.
#[derive(Clone, Debug, PartialEq)]
pub struct QdaSolution {
    pub smatrix: TransitionMatrix,
    pub decoupled: DecoupledSystem,
    pub channels: Vec<ChannelParams>,
    pub channel_smatrices: Vec<ChannelSMatrix>,
}

/// Full QDA solution of a grid. Channels are solved in parallel.
pub fn solve(grid: &GridModel, settings: &QdaSettings) -> Result<QdaSolution> {
    if !(grid.beta() > 0.0) {
        return Err(Error::NonPositiveSlope(grid.beta()));
    }
    let dec = decouple(grid, settings.rank_tol)?;
    let channels = channel_params(&dec, grid.beta());
    let solved = map_ordered(&channels, |ch| two_state_smatrix(ch, grid.beta(), grid.t_minus(), grid.t_plus(), settings));
    let channel_smatrices = solved.into_iter().collect::<Result<Vec<_>>>()?;
    let smatrix = assemble_smatrix(grid, &dec, &channel_smatrices)?;
    Ok(QdaSolution { smatrix, decoupled: dec, channels, channel_smatrices })
}

#[cfg(test)]
mod tests;
