//! Dormand-Prince 8(5,3) explicit Runge-Kutta pair for complex linear
//! systems. Coefficients and the step-size controller follow Hairer's
//! DOP853 as distributed with scipy's `solve_ivp`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const N_STAGES: usize = 12;

const C: [f64; N_STAGES] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

const A: [&[f64]; N_STAGES] = [
    &[],
    &[0.05260015195876773],
    &[0.0197250569845379, 0.0591751709536137],
    &[0.02958758547680685, 0.0, 0.08876275643042054],
    &[0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792],
    &[0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242],
    &[0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125],
    &[
        0.03709200011850479,
        0.0,
        0.0,
        0.17038392571223998,
        0.10726203044637328,
        -0.015319437748624402,
        0.008273789163814023,
    ],
    &[
        0.6241109587160757,
        0.0,
        0.0,
        -3.3608926294469414,
        -0.868219346841726,
        27.59209969944671,
        20.154067550477894,
        -43.48988418106996,
    ],
    &[
        0.47766253643826434,
        0.0,
        0.0,
        -2.4881146199716677,
        -0.590290826836843,
        21.230051448181193,
        15.279233632882423,
        -33.28821096898486,
        -0.020331201708508627,
    ],
    &[
        -0.9371424300859873,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -18.52006565999696,
        22.739487099350505,
        2.4936055526796523,
        -3.0467644718982196,
    ],
    &[
        2.273310147516538,
        0.0,
        0.0,
        -10.53449546673725,
        -2.0008720582248625,
        -17.9589318631188,
        27.94888452941996,
        -2.8589982771350235,
        -8.87285693353063,
        12.360567175794303,
        0.6433927460157636,
    ],
];

const B: [f64; N_STAGES] = [
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
];

const E3: [f64; N_STAGES + 1] = [
    -0.18980075407240762,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    -0.4226823213237919,
    -0.1521609496625161,
    0.20136540080403034,
    0.02265179219836082,
    0.0,
];

const E5: [f64; N_STAGES + 1] = [
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130175,
    0.08192320648511571,
    -0.022355307863886294,
    0.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Controls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[C64], f0: &[C64], dir: f64, span: f64, ctl: &Controls) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|y| ctl.abs_tol + y.norm() * ctl.rel_tol).collect();
    let d0 = rms(y0.iter().zip(&scale).map(|(y, s)| y.norm() / s), n);
    let d1 = rms(f0.iter().zip(&scale).map(|(y, s)| y.norm() / s), n);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<C64> = y0.iter().zip(f0).map(|(y, d)| y + d * (h0 * dir)).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); n];
    f(t0 + h0 * dir, &y1, &mut f1);
    let d2 = rms(f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (a - b).norm() / s), n) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(span).min(ctl.max_step)
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction), in place.
pub(crate) fn integrate<F>(mut f: F, t0: f64, t1: f64, y: &mut [C64], ctl: &Controls) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    let mut stats = StepStats::default();
    if t0 == t1 || n == 0 {
        return Ok(stats);
    }
    let dir = (t1 - t0).signum();
    let zero = C64::new(0.0, 0.0);
    let mut k = vec![vec![zero; n]; N_STAGES + 1];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.rhs_evals += 1;
    let mut h_abs = initial_step(&mut f, t0, y, &k[0], dir, (t1 - t0).abs(), ctl);
    stats.rhs_evals += 1;

    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::StepBudget { max_steps: ctl.max_steps, t });
        }
        let min_step = 10.0 * (next_toward(t, dir) - t).abs();
        h_abs = h_abs.min(ctl.max_step);
        let mut rejected = false;
        loop {
            if h_abs < min_step {
                return Err(Error::StepUnderflow { t });
            }
            let mut h = h_abs * dir;
            let mut t_new = t + h;
            if (t_new - t1) * dir > 0.0 {
                t_new = t1;
            }
            h = t_new - t;
            let step = h.abs();

            for s in 1..N_STAGES {
                for i in 0..n {
                    let mut acc = zero;
                    for (m, &a) in A[s].iter().enumerate() {
                        if a != 0.0 {
                            acc += k[m][i] * a;
                        }
                    }
                    stage[i] = y[i] + acc * h;
                }
                f(t + C[s] * h, &stage, &mut k[s]);
            }
            for i in 0..n {
                let mut acc = zero;
                for (m, &b) in B.iter().enumerate() {
                    if b != 0.0 {
                        acc += k[m][i] * b;
                    }
                }
                y_new[i] = y[i] + acc * h;
            }
            f(t_new, &y_new, &mut k[N_STAGES]);
            stats.rhs_evals += N_STAGES;

            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..n {
                let scale = ctl.abs_tol + y[i].norm().max(y_new[i].norm()) * ctl.rel_tol;
                let mut e5 = zero;
                let mut e3 = zero;
                for m in 0..=N_STAGES {
                    e5 += k[m][i] * E5[m];
                    e3 += k[m][i] * E3[m];
                }
                err5 += (e5 / scale).norm_sqr();
                err3 += (e3 / scale).norm_sqr();
            }
            let error_norm = if err5 == 0.0 && err3 == 0.0 {
                0.0
            } else {
                step * err5 / ((err5 + 0.01 * err3) * n as f64).sqrt()
            };

            if error_norm < 1.0 {
                let mut factor = if error_norm == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * error_norm.powf(ERROR_EXPONENT))
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                h_abs = step * factor;
                t = t_new;
                y.copy_from_slice(&y_new);
                let last = std::mem::take(&mut k[N_STAGES]);
                k[N_STAGES] = std::mem::replace(&mut k[0], last);
                stats.accepted += 1;
                break;
            }
            h_abs = step * MIN_FACTOR.max(SAFETY * error_norm.powf(ERROR_EXPONENT));
            rejected = true;
            stats.rejected += 1;
            if stats.accepted + stats.rejected >= ctl.max_steps {
                return Err(Error::StepBudget { max_steps: ctl.max_steps, t });
            }
        }
    }
    Ok(stats)
}

fn next_toward(t: f64, dir: f64) -> f64 {
    if dir > 0.0 {
        t.next_up()
    } else {
        t.next_down()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl(rel_tol: f64) -> Controls {
        Controls { rel_tol, abs_tol: 1e-14, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }

    #[test]
    fn exponential_growth_and_rotation() {
        // y' = (0.3 + 2i) y
        let rate = C64::new(0.3, 2.0);
        let mut y = [C64::new(1.0, 0.0)];
        let stats = integrate(|_, y, d| d[0] = rate * y[0], 0.0, 5.0, &mut y, &ctl(1e-12)).unwrap();
        let want = (rate * 5.0).exp();
        assert!((y[0] - want).norm() < 1e-10 * want.norm(), "{} vs {}", y[0], want);
        assert!(stats.accepted > 5);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let f = |t: f64, y: &[C64], d: &mut [C64]| {
            d[0] = C64::new(0.0, -t) * y[0] + C64::new(0.0, -0.5) * y[1];
            d[1] = C64::new(0.0, -0.5) * y[0] + C64::new(0.0, t) * y[1];
        };
        let y0 = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let mut y = y0;
        integrate(f, -3.0, 4.0, &mut y, &ctl(1e-12)).unwrap();
        integrate(f, 4.0, -3.0, &mut y, &ctl(1e-12)).unwrap();
        assert!((y[0] - y0[0]).norm() < 1e-10 && (y[1] - y0[1]).norm() < 1e-10);
    }

    #[test]
    fn polynomial_is_integrated_exactly() {
        // y' = 7 t^6 has a degree-7 solution, within the order of the method
        let mut y = [C64::new(0.0, 0.0)];
        integrate(|t, _, d| d[0] = C64::new(7.0 * t.powi(6), 0.0), 0.0, 2.0, &mut y, &ctl(1e-10)).unwrap();
        assert!((y[0].re - 128.0).abs() < 1e-10);
    }

    #[test]
    fn step_budget_is_enforced() {
        let mut y = [C64::new(1.0, 0.0)];
        let c = Controls { max_steps: 3, ..ctl(1e-12) };
        let r = integrate(|_, y, d| d[0] = C64::new(0.0, 50.0) * y[0], 0.0, 100.0, &mut y, &c);
        assert!(matches!(r, Err(Error::StepBudget { max_steps: 3, .. })));
    }
}
