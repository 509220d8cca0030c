//! Kummer's confluent hypergeometric function `M(a, b, z) = 1F1(a; b; z)`
//! for complex `a`, real `b` and complex `z`, tuned for the purely imaginary
//! arguments that appear in the linear two-state crossing.
//!
//! Two regimes are tried, each returning its own error estimate:
//!
//! * a Taylor series summed in double-double arithmetic, which survives the
//!   heavy cancellation of the series on the imaginary axis up to
//!   `|z| ~ 45`;
//! * the large-`|z|` asymptotic expansion with both exponential sectors
//!   (on the imaginary axis neither is subdominant), optimally truncated at
//!   the smallest term.
//!
//! The series is tried first for `|z| <= z_switch`, the asymptotic form
//! first beyond it. When neither meets the requested tolerance the result
//! is tagged [`Regime::OdeFallback`] and carries its best estimate; callers
//! are expected to switch to direct integration.

mod dd;
pub mod gamma;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use dd::{CDd, Dd};
use gamma::{is_gamma_pole, ln_gamma};

pub const DEFAULT_Z_SWITCH: f64 = 30.0;
pub const DEFAULT_REL_TOL: f64 = 1e-12;

const EPS: f64 = f64::EPSILON;
/// unit roundoff of double-double
const DD_EPS: f64 = 4.93e-32;
const MAX_SERIES_TERMS: usize = 20_000;
const MAX_ASYMPTOTIC_TERMS: usize = 2_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KummerQuery {
    pub a: C64,
    pub b: f64,
    pub z: C64,
    pub rel_tol: f64,
    pub z_switch: f64,
}

impl KummerQuery {
    pub fn new(a: C64, b: f64, z: C64) -> Self {
        Self { a, b, z, rel_tol: DEFAULT_REL_TOL, z_switch: DEFAULT_Z_SWITCH }
    }

    pub fn with_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.a.re.is_finite() && self.a.im.is_finite() && self.b.is_finite())
            || !(self.z.re.is_finite() && self.z.im.is_finite())
        {
            return Err(Error::NonFinite("1F1 argument"));
        }
        if self.b <= 0.0 && self.b.fract() == 0.0 {
            return Err(Error::InvalidArgument(format!("b = {} is a non-positive integer", self.b)));
        }
        if !(1e-14..=1e-6).contains(&self.rel_tol) {
            return Err(Error::InvalidArgument(format!("rel_tol {} outside [1e-14, 1e-6]", self.rel_tol)));
        }
        if !(self.z_switch > 0.0) {
            return Err(Error::InvalidArgument("z_switch must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Series,
    Asymptotic,
    OdeFallback,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KummerResult {
    pub value: C64,
    /// `dM/dz = (a / b) M(a + 1, b + 1, z)`.
    pub deriv: C64,
    pub regime: Regime,
    /// Estimated relative error, the larger of value and derivative.
    pub est_error: f64,
}

impl KummerResult {
    pub fn certified(&self) -> bool {
        self.regime != Regime::OdeFallback
    }
}

/// A single-regime evaluation with its relative error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub rel_error: f64,
}

/// Taylor series `sum (a)_s z^s / ((b)_s s!)` in double-double arithmetic.
/// Returns `None` if the series does not settle within the term budget.
pub fn kummer_series(a: C64, b: f64, z: C64) -> Option<Estimate> {
    let zd = CDd::from_c64(z);
    let (ar, ai, bd) = (Dd::from_f64(a.re), Dd::from_f64(a.im), Dd::from_f64(b));
    let mut term = CDd::from_c64(C64::new(1.0, 0.0));
    let mut sum = term;
    // running bound on accumulated rounding, in units of DD_EPS
    let mut rounding = 1.0;
    for s in 0..MAX_SERIES_TERMS {
        let sd = Dd::from_f64(s as f64);
        let num = CDd { re: ar + sd, im: ai };
        let den = (bd + sd) * Dd::from_f64(s as f64 + 1.0);
        term = (term * num * zd).scale_div(den);
        sum = sum + term;
        let mag = term.norm();
        if !mag.is_finite() {
            return None;
        }
        rounding += mag * (6.0 * (s as f64 + 1.0) + 8.0);
        if mag == 0.0 {
            break;
        }
        // past the peak the terms decay at least geometrically with ratio r
        let r = (C64::new(a.re + s as f64 + 1.0, a.im) * z).norm() / ((b + s as f64 + 1.0) * (s as f64 + 2.0));
        if r < 0.5 && mag <= 1e-34 * sum.norm().max(f64::MIN_POSITIVE) {
            let value = sum.to_c64();
            let abs_err = rounding * DD_EPS + 2.0 * mag;
            return Some(finish(value, abs_err));
        }
    }
    let value = sum.to_c64();
    // terminating series (a a non-positive integer) land here via break
    if term.norm() == 0.0 {
        return Some(finish(value, rounding * DD_EPS));
    }
    None
}

fn finish(value: C64, abs_err: f64) -> Estimate {
    let m = value.norm();
    let rel_error = if m > 0.0 { abs_err / m + EPS } else { f64::INFINITY };
    Estimate { value, rel_error }
}

/// Optimally truncated `sum_s (p)_s (q)_s / s! w^{-s}`. Returns
/// `(sum, truncation error, sum of term magnitudes)`.
fn asymptotic_sum(p: C64, q: C64, w: C64) -> (C64, f64, f64) {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut total = 1.0;
    let mut prev = 1.0;
    for s in 0..MAX_ASYMPTOTIC_TERMS {
        let sf = s as f64;
        let next = term * (p + sf) * (q + sf) / ((sf + 1.0) * w);
        let mag = next.norm();
        if mag == 0.0 {
            return (sum, 0.0, total);
        }
        if mag > prev {
            // smallest term reached; the omitted remainder is about one term
            return (sum, prev, total);
        }
        sum += next;
        total += mag;
        term = next;
        prev = mag;
        if mag < 1e-18 * sum.norm() {
            return (sum, mag, total);
        }
    }
    (sum, prev, total)
}

/// Large-`|z|` expansion
/// `M(a,b,z) = Gamma(b) [ (-z)^{-a} / Gamma(b-a) S1 + e^z z^{a-b} / Gamma(a) S2 ]`
/// with principal branches, valid for `z` off the positive and negative
/// real axes where one sector would be exponentially dominant anyway.
pub fn kummer_asymptotic(a: C64, b: f64, z: C64) -> Option<Estimate> {
    if z.norm() == 0.0 {
        return None;
    }
    let bc = C64::new(b, 0.0);
    let ln_gb = ln_gamma(bc);
    let mut value = C64::new(0.0, 0.0);
    let mut abs_err = 0.0;

    if !is_gamma_pole(bc - a) {
        let log_pref = ln_gb - ln_gamma(bc - a) - a * (-z).ln();
        let pref = log_pref.exp();
        let (s, trunc, total) = asymptotic_sum(a, a - bc + 1.0, -z);
        let pm = pref.norm();
        value += pref * s;
        abs_err += pm * (trunc + total * 4.0 * EPS + s.norm() * (log_pref.norm() + 30.0) * 10.0 * EPS);
    }
    if !is_gamma_pole(a) {
        // e^z applied separately: folding a large imaginary z into the
        // logarithm would round its phase at ulp(|z|)
        let log_pref = ln_gb - ln_gamma(a) + (a - bc) * z.ln();
        let pref = log_pref.exp() * z.exp();
        let (s, trunc, total) = asymptotic_sum(bc - a, 1.0 - a, z);
        let pm = pref.norm();
        value += pref * s;
        abs_err += pm * (trunc + total * 4.0 * EPS + s.norm() * (log_pref.norm() + 30.0) * 10.0 * EPS);
    }
    if !(value.re.is_finite() && value.im.is_finite()) {
        return None;
    }
    Some(finish(value, abs_err))
}

fn evaluate(a: C64, b: f64, z: C64, rel_tol: f64, z_switch: f64) -> Result<(Estimate, Regime)> {
    if z.norm() == 0.0 {
        return Ok((Estimate { value: C64::new(1.0, 0.0), rel_error: 0.0 }, Regime::Series));
    }
    let attempt = |regime: Regime| match regime {
        Regime::Series => kummer_series(a, b, z),
        _ => kummer_asymptotic(a, b, z),
    };
    let order = if z.norm() <= z_switch {
        [Regime::Series, Regime::Asymptotic]
    } else {
        [Regime::Asymptotic, Regime::Series]
    };
    let mut best: Option<Estimate> = None;
    for regime in order {
        let Some(est) = attempt(regime) else { continue };
        if est.rel_error <= rel_tol {
            return Ok((est, regime));
        }
        if best.is_none_or(|b| est.rel_error < b.rel_error) {
            best = Some(est);
        }
    }
    match best {
        Some(e) if e.value.re.is_finite() && e.value.im.is_finite() => Ok((e, Regime::OdeFallback)),
        _ => Err(Error::KummerNonConvergence { a: a.to_string(), b: b.to_string(), z: z.to_string() }),
    }
}

/// `M(a, b, z)` and its `z`-derivative with a certified regime.
pub fn kummer_m(q: &KummerQuery) -> Result<KummerResult> {
    q.validate()?;
    let (value, r1) = evaluate(q.a, q.b, q.z, q.rel_tol, q.z_switch)?;
    let (deriv, r2) = if q.a.norm() == 0.0 {
        (Estimate { value: C64::new(0.0, 0.0), rel_error: 0.0 }, Regime::Series)
    } else {
        let (m, r) = evaluate(q.a + 1.0, q.b + 1.0, q.z, q.rel_tol, q.z_switch)?;
        (Estimate { value: q.a / q.b * m.value, rel_error: m.rel_error }, r)
    };
    let regime = if r1 == Regime::OdeFallback || r2 == Regime::OdeFallback {
        Regime::OdeFallback
    } else {
        r1
    };
    Ok(KummerResult {
        value: value.value,
        deriv: deriv.value,
        regime,
        est_error: value.rel_error.max(deriv.rel_error),
    })
}

/// Relative residual of Kummer's transformation
/// `M(a, b, z) = e^z M(b - a, b, -z)`.
pub fn kummer_pair_check(q: &KummerQuery) -> Result<f64> {
    let lhs = kummer_m(q)?;
    let rhs = kummer_m(&KummerQuery { a: C64::new(q.b, 0.0) - q.a, z: -q.z, ..*q })?;
    let rhs = q.z.exp() * rhs.value;
    Ok((lhs.value - rhs).norm() / lhs.value.norm())
}
