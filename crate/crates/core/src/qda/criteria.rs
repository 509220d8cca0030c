//! Applicability of the approximation: bandwidth margins per channel pair,
//! first-order estimates of the neglected couplings and the interference
//! period of the decoupled channels.

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64 as C64;

use crate::decouple::{gap_ratio, DecoupledSystem};
use crate::error::{Error, Result};
use crate::model::{bandwidths, GridModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Marginal,
    Violated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Marginal => "marginal",
            Verdict::Violated => "violated",
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Satisfied => 0,
            Verdict::Marginal => 1,
            Verdict::Violated => 2,
        }
    }
}

/// Largest margins still counted as satisfied and as marginal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriteriaThresholds {
    pub satisfied: f64,
    pub marginal: f64,
}

impl Default for CriteriaThresholds {
    fn default() -> Self {
        Self { satisfied: 0.2, marginal: 0.5 }
    }
}

impl CriteriaThresholds {
    pub fn verdict(&self, margin: f64) -> Verdict {
        if margin <= self.satisfied {
            Verdict::Satisfied
        } else if margin <= self.marginal {
            Verdict::Marginal
        } else {
            Verdict::Violated
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialSet {
    Horizontal,
    Slanted,
}

/// Margin `lhs / rhs` for one channel pair of one set, with
/// `lhs = (t' + t'') dV` and
/// `rhs = 1 + |g_l - g_l'| min(t' + t'', (g_l + g_l') / beta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMargin {
    pub set: PotentialSet,
    pub l: usize,
    pub lp: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// First-order estimates `|dS_ll'|` of the neglected off-diagonal terms.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderEstimates {
    pub horizontal: DMatrix<f64>,
    pub slanted: DMatrix<f64>,
    /// Whether the resonance-denominator form was used (every channel far
    /// from both truncation times).
    pub asymptotic: bool,
}

impl FirstOrderEstimates {
    pub fn max(&self) -> f64 {
        self.horizontal.iter().chain(self.slanted.iter()).copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriteriaReport {
    /// `dV1 (t' + t'')`.
    pub dv1_duration: f64,
    /// `dV2 (t' + t'')`.
    pub dv2_duration: f64,
    pub pairs: Vec<PairMargin>,
    pub worst_margin: f64,
    pub corrections: FirstOrderEstimates,
    pub thresholds: CriteriaThresholds,
    pub verdict: Verdict,
}

/// Couplings of all channels of a set, zero past the partnered ones.
fn set_couplings(dec: &DecoupledSystem, len: usize) -> Vec<f64> {
    (0..len).map(|l| if l < dec.rank() { dec.channel_coupling(l) } else { 0.0 }).collect()
}

fn pair_margins(set: PotentialSet, g: &[f64], lhs: f64, duration: f64, beta: f64, out: &mut Vec<PairMargin>) {
    for l in 0..g.len() {
        for lp in 0..g.len() {
            if l == lp {
                continue;
            }
            let rhs = 1.0 + (g[l] - g[lp]).abs() * duration.min((g[l] + g[lp]) / beta);
            out.push(PairMargin { set, l, lp, lhs, rhs, margin: lhs / rhs });
        }
    }
}

pub fn criteria_margin(grid: &GridModel, dec: &DecoupledSystem, thresholds: CriteriaThresholds) -> CriteriaReport {
    let duration = grid.duration();
    let beta = grid.beta().abs();
    let (dv1, dv2) = bandwidths(grid);
    let mut pairs = Vec::new();
    pair_margins(PotentialSet::Horizontal, &set_couplings(dec, grid.n1()), dv1 * duration, duration, beta, &mut pairs);
    pair_margins(PotentialSet::Slanted, &set_couplings(dec, grid.n2()), dv2 * duration, duration, beta, &mut pairs);
    let worst_margin = pairs.iter().map(|p| p.margin).fold(0.0, f64::max);
    CriteriaReport {
        dv1_duration: dv1 * duration,
        dv2_duration: dv2 * duration,
        pairs,
        worst_margin,
        corrections: first_order_corrections(grid, dec),
        thresholds,
        verdict: thresholds.verdict(worst_margin),
    }
}

fn estimates(v: DMatrixView<C64>, lambda: &[f64], duration: f64, asymptotic: bool) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |l, lp| {
        if l == lp {
            return 0.0;
        }
        let mut est = v[(l, lp)].norm() * duration;
        if asymptotic {
            est /= C64::new(1.0, lambda[lp] - lambda[l]).norm();
        }
        est
    })
}

/// Estimates of the first-order corrections for both sets. The resonance
/// denominator `|1 + i (lambda_l' - lambda_l)|` applies only when every
/// coupled channel crosses at least `10 g_l / beta` away from both ends of
/// the interval; otherwise the plain bound `|V_ll'| (t' + t'')` is used.
pub fn first_order_corrections(grid: &GridModel, dec: &DecoupledSystem) -> FirstOrderEstimates {
    let beta = grid.beta().abs();
    let (tm, tp) = (grid.t_minus(), grid.t_plus());
    let asymptotic = (0..dec.rank()).all(|l| {
        let g = dec.channel_coupling(l);
        let t_l = (dec.va()[(l, l)].re - dec.vb()[(l, l)].re) / grid.beta();
        let reach = 10.0 * g / beta;
        tm + t_l >= reach && tp - t_l >= reach
    });
    let lambda = |len: usize| -> Vec<f64> { set_couplings(dec, len).iter().map(|g| g * g / beta).collect() };
    FirstOrderEstimates {
        horizontal: estimates(dec.va().as_view(), &lambda(grid.n1()), grid.duration(), asymptotic),
        slanted: estimates(dec.vb().as_view(), &lambda(grid.n2()), grid.duration(), asymptotic),
        asymptotic,
    }
}

/// Period in `dV` of the interference between the first two decoupled
/// channels, `2 pi |rho| / (t' + t'')`.
pub fn oscillation_period(dec: &DecoupledSystem, dv: f64, t_minus: f64, t_plus: f64) -> Result<f64> {
    if !(t_minus + t_plus > 0.0) {
        return Err(Error::InvalidInterval { t_minus, t_plus });
    }
    let rho = gap_ratio(dec, dv).ok_or(Error::NoInterference)?;
    Ok(2.0 * std::f64::consts::PI * rho / (t_minus + t_plus))
}
