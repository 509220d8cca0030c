use std::fmt::Write as _;

use lingrid::decouple::{decouple, gap_ratio, gap_ratio_slanted, offdiag_bound};
use lingrid::model::{bandwidths, GridModel};
use lingrid::qda::{criteria_margin, oscillation_period, CriteriaReport, PotentialSet};
use lingrid::smatrix::{max_elementwise_diff, TransitionMatrix};
use lingrid::specfun::{kummer_m, KummerQuery, Regime};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::scenario::{Scenario, SweepParam};
use crate::table::{comment_block, fmt_num, smatrix, sweep_table, Curve};
use crate::CliError;

fn set_name(set: PotentialSet) -> &'static str {
    match set {
        PotentialSet::Horizontal => "a",
        PotentialSet::Slanted => "b",
    }
}

pub fn criteria_report(scenario: &Scenario) -> Result<(CriteriaReport, String), CliError> {
    let grid = scenario.build()?;
    let dec = decouple(&grid, scenario.run.rank_tol)?;
    let report = criteria_margin(&grid, &dec, scenario.thresholds());
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", report.verdict.as_str());
    let _ = writeln!(s, "worst margin: {}", fmt_num(report.worst_margin));
    let _ = writeln!(
        s,
        "thresholds: satisfied <= {}, marginal <= {}",
        report.thresholds.satisfied, report.thresholds.marginal
    );
    let _ = writeln!(s, "dV1 (t' + t''): {}", fmt_num(report.dv1_duration));
    let _ = writeln!(s, "dV2 (t' + t''): {}", fmt_num(report.dv2_duration));
    let _ = writeln!(s, "pairs (set l l' lhs rhs margin):");
    for p in &report.pairs {
        let _ = writeln!(
            s,
            "  {} {} {} {} {} {}",
            set_name(p.set),
            p.l + 1,
            p.lp + 1,
            fmt_num(p.lhs),
            fmt_num(p.rhs),
            fmt_num(p.margin)
        );
    }
    let c = &report.corrections;
    let _ = writeln!(
        s,
        "first-order estimate: {} ({})",
        fmt_num(c.max()),
        if c.asymptotic { "resonance form" } else { "plain bound" }
    );
    let dv = bandwidths(&grid).0;
    match oscillation_period(&dec, dv, grid.t_minus(), grid.t_plus()) {
        Ok(p) => {
            let _ = writeln!(s, "interference period in dV: {}", fmt_num(p));
        }
        Err(_) => {
            let _ = writeln!(s, "interference period in dV: none");
        }
    }
    Ok((report, s))
}

fn matrix_csv(out: &mut String, method: &str, s: &TransitionMatrix) {
    let m = s.external_matrix();
    for to in 0..m.nrows() {
        for from in 0..m.ncols() {
            let z = m[(to, from)];
            let _ = writeln!(
                out,
                "{method},{},{},{},{},{}",
                from + 1,
                to + 1,
                fmt_num(z.re),
                fmt_num(z.im),
                fmt_num(z.norm_sqr())
            );
        }
    }
}

/// S-matrix CSV in external labels, with the scenario echo and the criteria
/// report as comments.
pub fn solve(scenario: &Scenario) -> Result<String, CliError> {
    let grid = scenario.build()?;
    let (_, criteria) = criteria_report(scenario)?;
    let mut results = Vec::new();
    for m in scenario.run.method.methods() {
        results.push((m, smatrix(scenario, &grid, m)?));
    }
    let mut head = String::from("lingrid solve\n\n");
    head.push_str(&scenario.to_toml());
    head.push('\n');
    head.push_str(&criteria);
    for (m, s) in &results {
        let _ = writeln!(head, "unitarity defect ({m}): {}", fmt_num(s.unitarity_defect()));
        let _ = writeln!(head, "estimated error ({m}): {}", fmt_num(s.est_error()));
    }
    if let [(_, a), (_, b)] = results.as_slice() {
        let _ = writeln!(head, "max |S_numeric - S_qda|: {}", fmt_num(max_elementwise_diff(a.matrix(), b.matrix())));
    }
    let mut out = comment_block(&head);
    out.push_str("method,from,to,re,im,probability\n");
    for (m, s) in &results {
        matrix_csv(&mut out, m.as_str(), s);
    }
    Ok(out)
}

/// Sweep CSV: the parameter, then one probability column per transition and
/// method, then the largest unitarity defect per method.
pub fn sweep(scenario: &Scenario, param: Option<SweepParam>) -> Result<String, CliError> {
    let mut section = scenario.sweep.clone().ok_or_else(|| CliError::Scenario("scenario has no [sweep] section".into()))?;
    if let Some(p) = param {
        section.param = p;
    }
    let mut echo = scenario.clone();
    echo.sweep = Some(section.clone());
    echo.validate()?;
    let values = section.values()?;
    let table = sweep_table(&[Curve { label: None, scenario: echo.clone() }], section.param, &values)?;
    Ok(table.to_csv(&format!("lingrid sweep\n\n{}", echo.to_toml())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

fn text_matrix(out: &mut String, name: &str, m: &DMatrix<C64>) {
    let _ = writeln!(out, "{name}:");
    for r in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols()).map(|c| format!("({}, {})", fmt_num(m[(r, c)].re), fmt_num(m[(r, c)].im))).collect();
        let _ = writeln!(out, "  {}", cells.join("  "));
    }
}

fn csv_matrix(out: &mut String, name: &str, m: &DMatrix<C64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let _ = writeln!(out, "{name},{},{},{},{}", r + 1, c + 1, fmt_num(m[(r, c)].re), fmt_num(m[(r, c)].im));
        }
    }
}

/// Dump of the decoupled representation: X, Y, g, Va, Vb and the gap ratios.
pub fn report_decouple(scenario: &Scenario, format: ReportFormat) -> Result<String, CliError> {
    let grid: GridModel = scenario.build()?;
    let dec = decouple(&grid, scenario.run.rank_tol)?;
    let dv = bandwidths(&grid).0;
    let rho_a = gap_ratio(&dec, dv);
    let rho_b = gap_ratio_slanted(&dec, dv);
    let bound = offdiag_bound(&grid, dec.va(), dec.vb());
    let g = DMatrix::from_iterator(1, dec.g().len(), dec.g().iter().map(|&x| C64::new(x, 0.0)));
    let rho = |r: Option<f64>| r.map_or_else(|| "none".to_string(), fmt_num);
    let mut out = String::new();
    match format {
        ReportFormat::Text => {
            let _ = writeln!(out, "rank: {}", dec.rank());
            let _ = writeln!(out, "g: {}", dec.g().iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(" "));
            text_matrix(&mut out, "X", dec.x());
            text_matrix(&mut out, "Y", dec.y());
            text_matrix(&mut out, "Va", dec.va());
            text_matrix(&mut out, "Vb", dec.vb());
            let _ = writeln!(out, "rho (a): {}", rho(rho_a));
            let _ = writeln!(out, "rho (b): {}", rho(rho_b));
            let _ = writeln!(out, "off-diagonal bound holds: {}", bound.holds());
        }
        ReportFormat::Csv => {
            out.push_str(&comment_block(&format!("lingrid report decouple\n\n{}", scenario.to_toml())));
            out.push_str("quantity,row,col,re,im\n");
            csv_matrix(&mut out, "g", &g);
            csv_matrix(&mut out, "X", dec.x());
            csv_matrix(&mut out, "Y", dec.y());
            csv_matrix(&mut out, "Va", dec.va());
            csv_matrix(&mut out, "Vb", dec.vb());
            for (name, r) in [("rho_a", rho_a), ("rho_b", rho_b)] {
                if let Some(r) = r {
                    let _ = writeln!(out, "{name},1,1,{},{}", fmt_num(r), fmt_num(0.0));
                }
            }
        }
    }
    Ok(out)
}

pub fn specfun_eval(a: C64, b: f64, z: C64, tol: f64) -> Result<String, CliError> {
    let r = kummer_m(&KummerQuery::new(a, b, z).with_tol(tol))?;
    let regime = match r.regime {
        Regime::Series => "series",
        Regime::Asymptotic => "asymptotic",
        Regime::OdeFallback => "ode_fallback",
    };
    Ok(format!(
        "value {} {}\nderiv {} {}\nregime {regime}\nest_error {}\n",
        fmt_num(r.value.re),
        fmt_num(r.value.im),
        fmt_num(r.deriv.re),
        fmt_num(r.deriv.im),
        fmt_num(r.est_error)
    ))
}
