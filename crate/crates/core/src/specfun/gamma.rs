//! Complex log-gamma (Lanczos, g = 7, nine terms). The relative error of
//! the gamma function is about 1e-15 near the real axis and grows roughly
//! like `|Im z| ln|z|` ulps away from it.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// True when `z` is a pole of the gamma function (0, -1, -2, ...).
pub fn is_gamma_pole(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// `ln sin(pi z)` on a branch continuous enough for the reflection formula.
/// Only `exp` of the result is used, so the imaginary part is taken modulo 2 pi.
fn ln_sin_pi(z: C64) -> C64 {
    let i = C64::i();
    if z.im.abs() < 10.0 {
        (z * PI).sin().ln()
    } else if z.im > 0.0 {
        // sin(pi z) = (e^{-i pi z} / -2i) (1 - e^{2 i pi z})
        -i * PI * z - (-2.0 * i).ln() + (1.0 - (2.0 * i * PI * z).exp()).ln()
    } else {
        i * PI * z - (2.0 * i).ln() + (1.0 - (-2.0 * i * PI * z).exp()).ln()
    }
}

/// `ln Gamma(z)` for any non-pole `z`. The imaginary part is not the
/// principal-branch continuation; callers only exponentiate it.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // reflection: Gamma(z) Gamma(1 - z) = pi / sin(pi z)
        return C64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = C64::new(LANCZOS[0], 0.0);
    for (k, &p) in LANCZOS.iter().enumerate().skip(1) {
        acc += p / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn real_values() {
        assert!(rel(ln_gamma(C64::new(0.5, 0.0)).exp().re, PI.sqrt()) < 1e-14);
        assert!(rel(ln_gamma(C64::new(5.0, 0.0)).exp().re, 24.0) < 1e-14);
        assert!(rel(ln_gamma(C64::new(1.5, 0.0)).exp().re, PI.sqrt() / 2.0) < 1e-14);
        // reflection branch: Gamma(-0.5) = -2 sqrt(pi)
        assert!(rel(ln_gamma(C64::new(-0.5, 0.0)).exp().re, -2.0 * PI.sqrt()) < 1e-14);
    }

    #[test]
    fn modulus_on_critical_lines() {
        for y in [0.1, 1.0, 7.5, 25.0, 60.0] {
            // |Gamma(1/2 + iy)|^2 = pi / cosh(pi y)
            let l = ln_gamma(C64::new(0.5, y)).re * 2.0;
            let want = PI.ln() - (PI * y + (1.0 + (-2.0 * PI * y).exp()).ln() - 2f64.ln());
            assert!((l - want).abs() < 1e-13 * want.abs().max(1.0), "y = {y}");
            // |Gamma(iy)|^2 = pi / (y sinh pi y), reached through reflection
            let l = ln_gamma(C64::new(0.0, y)).re * 2.0;
            let want = PI.ln() - y.ln() - (PI * y + (1.0 - (-2.0 * PI * y).exp()).ln() - 2f64.ln());
            assert!((l - want).abs() < 1e-13 * want.abs().max(1.0), "y = {y}");
        }
    }

    #[test]
    fn recurrence_holds_off_axis() {
        for z in [C64::new(0.3, 2.0), C64::new(-2.7, -4.0), C64::new(3.0, -30.0), C64::new(-0.2, 15.0), C64::new(-0.2, -15.0)] {
            let lhs = (ln_gamma(z + 1.0) - ln_gamma(z)).exp();
            assert!((lhs - z).norm() < 1e-12 * z.norm(), "z = {z}");
        }
    }

    #[test]
    fn complex_values_far_from_real_axis() {
        // 30-digit references
        for (z, want) in [
            (C64::new(0.0, -10.0), C64::new(1.1284479695846292885e-7, 3.918929270881377214e-8)),
            (C64::new(0.3, 25.0), C64::new(2.0867465165161420345e-18, -1.1420116649072155572e-17)),
            (C64::new(-2.5, -40.0), C64::new(-1.1863751735012781239e-32, -1.6282764197909750025e-32)),
        ] {
            let got = ln_gamma(z).exp();
            assert!((got - want).norm() < 5e-13 * want.norm(), "z = {z}: {got} vs {want}");
        }
    }

    #[test]
    fn detects_poles() {
        assert!(is_gamma_pole(C64::new(0.0, 0.0)));
        assert!(is_gamma_pole(C64::new(-3.0, 0.0)));
        assert!(!is_gamma_pole(C64::new(-3.0, 1e-9)));
        assert!(!is_gamma_pole(C64::new(0.5, 0.0)));
    }
}
