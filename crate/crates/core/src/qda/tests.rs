use std::f64::consts::PI;

use super::*;
use crate::decouple::{CouplingSvd, DecoupledSystem};
use crate::integrate::{numeric_smatrix, propagate_hamiltonian};
use crate::model::presets::{equal_coupling, gap_grid, phase_coupling};
use crate::model::TransitionLabel;
use crate::smatrix::{max_elementwise_diff, unitarity_defect};

fn ode_only() -> QdaSettings {
    QdaSettings { method: MethodChoice::Ode, ..QdaSettings::default() }
}

fn max_diff2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn fundamental_pair_at_crossing() {
    let ch = ChannelParams::new(0, 0.8, 0.3, -0.5, 2.0);
    assert!((ch.t_l - 0.4).abs() < 1e-15);
    let p = fundamental_solutions(&ch, 2.0, ch.t_l, 1e-12).unwrap();
    assert!((p.a1 - C64::from_polar(1.0, -0.3 * 0.4)).norm() < 1e-15);
    assert_eq!(p.a2, C64::new(0.0, 0.0));
    assert!((p.wronskian().norm() - 1.0 / 0.8).abs() < 1e-14);
    let uncoupled = ChannelParams::new(3, 0.0, 0.0, 0.0, 1.0);
    assert_eq!(fundamental_solutions(&uncoupled, 1.0, 0.0, 1e-12), Err(Error::UncoupledChannel { channel: 3 }));
}

#[test]
fn fundamental_pair_solves_channel_equations() {
    // lambda = 1, t_l = 0, Va = 0: start both solutions at t = 0 and integrate to t = 2
    let ch = ChannelParams::new(0, 1.0, 0.0, 0.0, 1.0);
    let start = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)]);
    let h = LinearHamiltonian::new(vec![0.0, 0.0], vec![0.0, 1.0], DMatrix::from_element(1, 1, C64::new(1.0, 0.0))).unwrap();
    let out = propagate_hamiltonian(&h, 0.0, 2.0, &start, &PropagationSettings::with_tol(1e-12)).unwrap().states;
    let p = fundamental_solutions(&ch, 1.0, 2.0, 1e-13).unwrap();
    for (got, want) in [(p.a1, out[(0, 0)]), (p.b1, out[(1, 0)]), (p.a2, out[(0, 1)]), (p.b2, out[(1, 1)])] {
        assert!((got - want).norm() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn first_channel_equation_residual() {
    let ch = ChannelParams::new(0, 0.9, 0.3, -0.1, 1.0);
    let h = 1e-5;
    for t in [-3.0, -0.5, 0.7, 4.0] {
        let at = |t: f64| fundamental_solutions(&ch, 1.0, t, 1e-13).unwrap();
        let (lo, mid, hi) = (at(t - h), at(t), at(t + h));
        for (dm, a, b) in [((hi.a1 - lo.a1) / (2.0 * h), mid.a1, mid.b1), ((hi.a2 - lo.a2) / (2.0 * h), mid.a2, mid.b2)] {
            let resid = (C64::i() * dm - ch.va * a - ch.g * b).norm();
            assert!(resid <= 1e-8 * (a.norm() + b.norm()) * ch.g, "t = {t}: {resid:e}");
        }
    }
}

#[test]
fn wronskian_modulus_is_constant() {
    for lambda in [0.5f64, 3.0] {
        let ch = ChannelParams::new(0, lambda.sqrt(), 0.1, 0.0, 1.0);
        let want = 1.0 / ch.g;
        let mut checked = 0;
        let mut t = -100.0;
        while t <= 100.0 {
            let p = fundamental_solutions(&ch, 1.0, t, 1e-12).unwrap();
            if p.certified {
                checked += 1;
                assert!((p.wronskian().norm() - want).abs() <= 1e-8 * want, "lambda {lambda}, t {t}");
            }
            t += 3.7;
        }
        assert!(checked >= 50, "only {checked} certified samples");
    }
}

#[test]
fn landau_zener_limit_is_approached() {
    let ch = ChannelParams::new(0, 1.0, 0.0, 0.0, 1.0);
    let lz = (-2.0 * PI).exp();
    let resid: Vec<f64> = [100.0, 300.0, 1000.0]
        .iter()
        .map(|&t| {
            let s = two_state_smatrix(&ch, 1.0, t, t, &QdaSettings::default()).unwrap();
            (s.aa().norm_sqr() - lz).abs()
        })
        .collect();
    assert!(resid[0] > resid[1] && resid[1] > resid[2], "{resid:?}");
    assert!(resid[2] <= 2e-4);
    let s = two_state_smatrix(&ch, 1.0, 100.0, 100.0, &QdaSettings::default()).unwrap();
    assert!((s.aa().norm_sqr() - lz).abs() <= 0.02 * lz.max(s.aa().norm_sqr()) || resid[0] < 2e-3);
}

#[test]
fn analytic_and_ode_channels_agree() {
    for lambda in [0.1f64, 1.0, 5.0] {
        let ch = ChannelParams::new(0, lambda.sqrt(), 0.0, 0.0, 1.0);
        let a = two_state_smatrix(&ch, 1.0, 100.0, 100.0, &QdaSettings { method: MethodChoice::Analytic, ..QdaSettings::default() }).unwrap();
        let o = two_state_smatrix(&ch, 1.0, 100.0, 100.0, &ode_only()).unwrap();
        assert_eq!(a.method, ChannelMethod::Analytic);
        assert_eq!(o.method, ChannelMethod::Ode);
        assert!(max_diff2(&a.s, &o.s) <= 1e-6, "lambda {lambda}");
        assert!(a.unitarity_defect() <= 1e-8 && o.unitarity_defect() <= 1e-8);
    }
}

#[test]
fn large_lambda_falls_back_to_ode() {
    let ch = ChannelParams::new(0, 10.0, 0.0, 0.0, 1.0);
    let forced = QdaSettings { method: MethodChoice::Analytic, ..QdaSettings::default() };
    assert!(matches!(two_state_smatrix(&ch, 1.0, 20.0, 20.0, &forced), Err(Error::KummerNonConvergence { .. })));
    let auto = two_state_smatrix(&ch, 1.0, 20.0, 20.0, &QdaSettings::default()).unwrap();
    assert_eq!(auto.method, ChannelMethod::Ode);
    assert!(auto.unitarity_defect() < 1e-8);
    let uncoupled = ChannelParams::new(1, 0.0, 0.0, 0.0, 1.0);
    assert!(matches!(two_state_smatrix(&uncoupled, 1.0, 20.0, 20.0, &auto_settings()), Err(Error::UncoupledChannel { channel: 1 })));
}

fn auto_settings() -> QdaSettings {
    QdaSettings::default()
}

#[test]
fn uncoupled_phases() {
    assert_eq!(uncoupled_phase(Side::A, 0.0, 1.0, 50.0, 50.0), C64::new(1.0, 0.0));
    assert_eq!(uncoupled_phase(Side::B, 0.0, 1.0, 50.0, 50.0), C64::new(1.0, 0.0));
    assert!((uncoupled_phase(Side::A, PI / 100.0, 1.0, 50.0, 50.0) + 1.0).norm() < 1e-15);

    let (va, vb, beta, tm, tp) = (0.13, -0.07, 1.3, 30.0, 45.0);
    let h = LinearHamiltonian::new(vec![va, vb], vec![0.0, beta], DMatrix::zeros(1, 1)).unwrap();
    let u = crate::integrate::propagator(&h, -tm, tp, &PropagationSettings::default()).unwrap().states;
    assert!((u[(0, 0)] - uncoupled_phase(Side::A, va, beta, tm, tp)).norm() < 1e-12);
    assert!((u[(1, 1)] - uncoupled_phase(Side::B, vb, beta, tm, tp)).norm() < 1e-12);
}

#[test]
fn zero_coupling_gives_diagonal_phases() {
    let grid = gap_grid(0.2, 1.0, DMatrix::zeros(2, 2), 40.0, 40.0).unwrap();
    let q = solve(&grid, &QdaSettings::default()).unwrap();
    assert_eq!(q.decoupled.rank(), 0);
    let n = numeric_smatrix(&grid, &PropagationSettings::default()).unwrap();
    assert!(max_elementwise_diff(q.smatrix.matrix(), n.matrix()) < 1e-10);
}

#[test]
fn weak_coupling_with_gap_is_flagged() {
    // the decoupling rotation mixes the horizontal levels, the criteria must catch it
    let grid = gap_grid(0.2, 1.0, phase_coupling(2, 1e-7), 40.0, 40.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(criteria_margin(&grid, &dec, CriteriaThresholds::default()).verdict, Verdict::Violated);
}

#[test]
fn exact_for_degenerate_sets() {
    for (m, g0) in [(1, 0.5), (0, 2.0), (3, 5.0)] {
        let grid = gap_grid(0.0, 1.0, phase_coupling(m, g0), 30.0, 30.0).unwrap();
        let q = solve(&grid, &QdaSettings::default()).unwrap();
        let n = numeric_smatrix(&grid, &PropagationSettings::default()).unwrap();
        let d = max_elementwise_diff(q.smatrix.matrix(), n.matrix());
        assert!(d <= 1e-6, "m {m}, g0 {g0}: {d:e}");
    }
}

#[test]
fn assembled_matrix_is_unitary_to_channel_error() {
    for (dv, m, g0, t) in [(0.01, 1, 0.5, 100.0), (0.05, 0, 5.0, 20.0), (0.0, 3, 2.0, 50.0)] {
        let q = solve(&gap_grid(dv, 1.0, phase_coupling(m, g0), t, t).unwrap(), &QdaSettings::default()).unwrap();
        let budget: f64 = q.channel_smatrices.iter().map(|c| c.est_error).sum();
        assert!(unitarity_defect(q.smatrix.matrix()) <= 10.0 * budget.max(1e-14), "{dv} {m} {g0}");
    }
}

fn regauged(grid: &GridModel, dec: &DecoupledSystem, phases_x: &[f64], phases_y: &[f64]) -> DecoupledSystem {
    let mut x = dec.x().clone();
    let mut y = dec.y().clone();
    for (l, &p) in phases_x.iter().enumerate() {
        let z = C64::from_polar(1.0, p);
        x.row_mut(l).iter_mut().for_each(|v| *v *= z);
    }
    for (l, &p) in phases_y.iter().enumerate() {
        let z = C64::from_polar(1.0, p);
        y.row_mut(l).iter_mut().for_each(|v| *v *= z);
    }
    let svd = CouplingSvd { x, y, g: dec.g().to_vec(), n: dec.rank() };
    DecoupledSystem::from_parts(grid, svd, dec.rank_tol()).unwrap()
}

fn assemble_with(grid: &GridModel, dec: &DecoupledSystem) -> TransitionMatrix {
    let channels: Vec<ChannelSMatrix> = channel_params(dec, grid.beta())
        .iter()
        .map(|ch| two_state_smatrix(ch, grid.beta(), grid.t_minus(), grid.t_plus(), &QdaSettings::default()).unwrap())
        .collect();
    assemble_smatrix(grid, dec, &channels).unwrap()
}

#[test]
fn gauge_invariance_under_row_phases() {
    // rank one: the pair row shares one phase, the null rows are free
    let grid = gap_grid(0.01, 1.0, phase_coupling(0, 0.5), 50.0, 50.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    let base = assemble_with(&grid, &dec);
    let other = assemble_with(&grid, &regauged(&grid, &dec, &[0.7, -2.1], &[0.7, 1.3]));
    assert!(max_elementwise_diff(base.matrix(), other.matrix()) <= 1e-10);

    // rank two with distinct singular values: each pair shares its phase
    let grid = gap_grid(0.01, 1.0, phase_coupling(2, 0.5), 50.0, 50.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    let base = assemble_with(&grid, &dec);
    let other = assemble_with(&grid, &regauged(&grid, &dec, &[PI, 0.4], &[PI, 0.4]));
    assert!(max_elementwise_diff(base.matrix(), other.matrix()) <= 1e-10);
}

#[test]
fn gauge_invariance_in_degenerate_subspace() {
    // coupling proportional to a unitary with degenerate sets: any common
    // rotation R of the X and Y rows is an equally valid decomposition
    let grid = gap_grid(0.0, 1.0, DMatrix::<C64>::identity(2, 2).map(|z| z * 0.6), 40.0, 40.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    let (c, s) = (0.6f64.cos(), 0.6f64.sin());
    let r = DMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(0.0, s), C64::new(0.0, s), C64::new(c, 0.0)]);
    let svd = CouplingSvd { x: &r * dec.x(), y: &r * dec.y(), g: dec.g().to_vec(), n: dec.rank() };
    let rotated = DecoupledSystem::from_parts(&grid, svd, dec.rank_tol()).unwrap();
    let d = max_elementwise_diff(assemble_with(&grid, &dec).matrix(), assemble_with(&grid, &rotated).matrix());
    assert!(d <= 1e-10, "{d:e}");
}

#[test]
fn counterintuitive_saturation_depends_on_phase() {
    let p = |m: i32| {
        let grid = gap_grid(0.0, 1.0, phase_coupling(m, 5.0), 100.0, 100.0).unwrap();
        solve(&grid, &QdaSettings::default()).unwrap().smatrix.probability(TransitionLabel::new(2, 1)).unwrap()
    };
    let (p0, p3) = (p(0), p(3));
    assert!(p0 > 10.0 * p3, "{p0} vs {p3}");
}

#[test]
fn counterintuitive_probability_shrinks_with_interval() {
    let mut last = f64::INFINITY;
    for t in [25.0, 50.0, 100.0, 200.0, 400.0] {
        let grid = gap_grid(0.01, 1.0, phase_coupling(1, 0.5), t, t).unwrap();
        let s = numeric_smatrix(&grid, &PropagationSettings::with_tol(1e-8)).unwrap();
        let p = s.probability(TransitionLabel::new(2, 1)).unwrap();
        assert!(p <= last, "t = {t}: {p} after {last}");
        last = p;
    }
}

#[test]
fn criteria_verdicts() {
    let th = CriteriaThresholds::default();
    let report = |dv: f64, g0: f64, m: i32, t: f64| {
        let grid = gap_grid(dv, 1.0, phase_coupling(m, g0), t, t).unwrap();
        criteria_margin(&grid, &decouple(&grid, DEFAULT_RANK_TOL).unwrap(), th)
    };
    let r = report(0.0, 0.5, 1, 100.0);
    assert_eq!(r.verdict, Verdict::Satisfied);
    assert_eq!(r.worst_margin, 0.0);
    assert_eq!(r.corrections.max(), 0.0);

    assert_eq!(report(0.5 / 200.0, 0.5, 1, 100.0).verdict, Verdict::Marginal);
    assert_eq!(report(5.0 / 200.0, 0.1, 1, 100.0).verdict, Verdict::Violated);

    // high coupling tolerates dV (t' + t'') up to about 0.2 lambda_max
    let lambda_max = 4.0 * 25.0;
    assert_eq!(report(0.15 * lambda_max / 40.0, 5.0, 1, 20.0).verdict, Verdict::Satisfied);
    assert_eq!(report(0.6 * lambda_max / 40.0, 5.0, 1, 20.0).verdict, Verdict::Violated);

    // padding channels enter the pair list: rank one still gives two pairs per set
    let r = report(0.001, 0.5, 0, 100.0);
    assert_eq!(r.pairs.len(), 4);
    assert!(r.pairs.iter().all(|p| p.rhs >= 1.0));

    let custom = CriteriaThresholds { satisfied: 0.01, marginal: 0.02 };
    assert_eq!(custom.verdict(0.015), Verdict::Marginal);
    assert_eq!(Verdict::Violated.exit_code(), 2);
}

#[test]
fn first_order_estimates() {
    // equal singular values: resonance denominator is one
    let grid = gap_grid(0.02, 1.0, DMatrix::<C64>::identity(2, 2).map(|z| z * 0.5), 100.0, 100.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    let est = first_order_corrections(&grid, &dec);
    assert!(est.asymptotic);
    assert!((est.horizontal[(0, 1)] - dec.va()[(0, 1)].norm() * 200.0).abs() < 1e-12);
    assert_eq!(est.horizontal[(0, 1)], est.horizontal[(1, 0)]);

    // distinct lambdas inside the window shrink the estimate
    let grid = gap_grid(2.5e-3, 1.0, phase_coupling(1, 0.5), 100.0, 100.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    let est = first_order_corrections(&grid, &dec);
    assert!(est.asymptotic);
    let plain = dec.va()[(0, 1)].norm() * 200.0;
    assert!(est.horizontal[(0, 1)] < plain && est.horizontal[(0, 1)] > 0.0);

    // a short interval fails the window and keeps the plain bound
    let short = grid.with_interval(3.0, 3.0).unwrap();
    let est = first_order_corrections(&short, &dec);
    assert!(!est.asymptotic);
    assert!((est.horizontal[(0, 1)] - dec.va()[(0, 1)].norm() * 6.0).abs() < 1e-15);
}

#[test]
fn first_order_estimate_tracks_observed_error() {
    let grid = gap_grid(2.5e-3, 1.0, phase_coupling(1, 0.5), 100.0, 100.0).unwrap();
    let q = solve(&grid, &QdaSettings::default()).unwrap();
    let n = numeric_smatrix(&grid, &PropagationSettings::default()).unwrap();
    let observed = max_elementwise_diff(q.smatrix.matrix(), n.matrix());
    let est = first_order_corrections(&grid, &q.decoupled).max();
    // same order of magnitude, the estimate on the high side
    assert!(observed <= 3.0 * est && observed >= est / 30.0, "observed {observed:e}, estimate {est:e}");
}

#[test]
fn oscillation_periods() {
    let period = |m: i32| {
        let grid = gap_grid(0.01, 1.0, phase_coupling(m, 1.0), 50.0, 50.0).unwrap();
        oscillation_period(&decouple(&grid, DEFAULT_RANK_TOL).unwrap(), 0.01, 50.0, 50.0).unwrap()
    };
    assert!((period(0) - 2.0 * PI * 5.6 / 100.0).abs() <= 2.0 * PI * 0.1 / 100.0);
    assert!((period(3) - 2.0 * PI * 2.5 / 100.0).abs() <= 2.0 * PI * 0.1 / 100.0);
    let grid = gap_grid(0.01, 1.0, equal_coupling(2, 2, 1.0), 50.0, 50.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(oscillation_period(&dec, 0.01, 50.0, 50.0), Err(Error::NoInterference));
}

#[test]
fn missing_channels_are_rejected() {
    let grid = gap_grid(0.01, 1.0, phase_coupling(2, 0.5), 20.0, 20.0).unwrap();
    let dec = decouple(&grid, DEFAULT_RANK_TOL).unwrap();
    let ch = channel_params(&dec, 1.0);
    let one = two_state_smatrix(&ch[0], 1.0, 20.0, 20.0, &QdaSettings::default()).unwrap();
    assert_eq!(assemble_smatrix(&grid, &dec, &[one]), Err(Error::MissingChannel(1)));
}
