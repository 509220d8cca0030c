//! Hard-coded figure presets. All use beta = 1.
//!
//! | name  | swept         | fixed                         | curves            |
//! |-------|---------------|-------------------------------|-------------------|
//! | fig2a | g0 in [0, 5]  | dV = 0, t' = t'' = 100        | m = 0..3          |
//! | fig2b | g0 in [0, 5]  | dV = 2.5e-3, t' = t'' = 100   | m = 0..3          |
//! | fig3a | dV in [0, 5e-3] | g0 = 0.5, t' = t'' = 100    | m = 0..3          |
//! | fig3b | dV in [0, 1]  | g0 = 5, t' = t'' = 20         | m = 0..3          |
//! | fig4a | dV in [0, 1.2] | g0 = 5, t' = t'' = 50        | m = 4             |
//! | fig4b | dV in [0, 1.2] | g0 = 5, t' = t'' = 50        | m = 0             |
//! | fig4c | dV in [0, 1.2] | g0 = 5, t' = t'' = 50        | equal couplings   |
//!
//! fig2a carries the numeric method only; the others carry both.

use crate::scenario::{
    ChannelMethodName, CouplingPreset, CouplingSection, GridSection, MethodSet, PictureName, RunSection, Scale, Scenario,
    SweepParam, SweepSection,
};
use crate::table::{sweep_table, Curve, Table};
use crate::CliError;

/// Global tolerance of the numeric curves in every preset.
pub const FIGURE_REL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig4c,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FigureOptions {
    pub points: Option<usize>,
    pub range: Option<(f64, f64)>,
}

impl Figure {
    pub const ALL: [Figure; 7] =
        [Figure::Fig2a, Figure::Fig2b, Figure::Fig3a, Figure::Fig3b, Figure::Fig4a, Figure::Fig4b, Figure::Fig4c];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig4c => "fig4c",
        }
    }

    pub fn parse(name: &str) -> Option<Figure> {
        Figure::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    pub fn param(self) -> SweepParam {
        match self {
            Figure::Fig2a | Figure::Fig2b => SweepParam::G0,
            _ => SweepParam::Dv,
        }
    }

    pub fn default_points(self) -> usize {
        match self {
            Figure::Fig4a | Figure::Fig4b | Figure::Fig4c => 400,
            _ => 200,
        }
    }

    pub fn default_range(self) -> (f64, f64) {
        match self {
            Figure::Fig2a | Figure::Fig2b => (0.0, 5.0),
            Figure::Fig3a => (0.0, 5e-3),
            Figure::Fig3b => (0.0, 1.0),
            Figure::Fig4a | Figure::Fig4b | Figure::Fig4c => (0.0, 1.2),
        }
    }

    /// `(t' = t'', fixed dV, fixed g0)`; the swept one is a placeholder.
    fn fixed(self) -> (f64, f64, f64) {
        match self {
            Figure::Fig2a => (100.0, 0.0, 1.0),
            Figure::Fig2b => (100.0, 2.5e-3, 1.0),
            Figure::Fig3a => (100.0, 0.0, 0.5),
            Figure::Fig3b => (20.0, 0.0, 5.0),
            Figure::Fig4a | Figure::Fig4b | Figure::Fig4c => (50.0, 0.0, 5.0),
        }
    }

    pub fn method(self) -> MethodSet {
        match self {
            Figure::Fig2a => MethodSet::Numeric,
            _ => MethodSet::Both,
        }
    }

    pub fn transitions(self) -> Vec<[usize; 2]> {
        match self {
            Figure::Fig4a | Figure::Fig4b | Figure::Fig4c => vec![[2, 1], [1, 2], [1, 3], [1, 4], [4, 2], [4, 3]],
            _ => vec![[2, 1], [3, 4]],
        }
    }

    /// `(label, preset, m)` per curve.
    fn couplings(self) -> Vec<(String, CouplingPreset, Option<i32>)> {
        match self {
            Figure::Fig4a => vec![("m=4".into(), CouplingPreset::Eq22, Some(4))],
            Figure::Fig4b => vec![("m=0".into(), CouplingPreset::Eq22, Some(0))],
            Figure::Fig4c => vec![("equal".into(), CouplingPreset::Equal, None)],
            _ => (0..4).map(|m| (format!("m={m}"), CouplingPreset::Eq22, Some(m))).collect(),
        }
    }

    pub fn curves(self, opts: FigureOptions) -> Vec<Curve> {
        let (t, dv, g0) = self.fixed();
        let (from, to) = opts.range.unwrap_or_else(|| self.default_range());
        let sweep = SweepSection {
            param: self.param(),
            from,
            to,
            points: opts.points.unwrap_or_else(|| self.default_points()),
            scale: Scale::Linear,
        };
        self.couplings()
            .into_iter()
            .map(|(label, preset, m)| Curve {
                label: Some(label),
                scenario: Scenario {
                    grid: GridSection {
                        beta: 1.0,
                        t_minus: t,
                        t_plus: t,
                        dv: Some(dv),
                        v_horizontal: None,
                        v_slanted: None,
                        require_interior_crossings: false,
                    },
                    coupling: CouplingSection { preset, m, g0: Some(g0), n1: None, n2: None, matrix: None },
                    run: RunSection {
                        method: self.method(),
                        transitions: self.transitions(),
                        rel_tol: FIGURE_REL_TOL,
                        picture: PictureName::Interaction,
                        channel_method: ChannelMethodName::Auto,
                        ..RunSection::default()
                    },
                    sweep: Some(sweep.clone()),
                },
            })
            .collect()
    }

    pub fn table(self, opts: FigureOptions) -> Result<Table, CliError> {
        let curves = self.curves(opts);
        let section = curves[0].scenario.sweep.clone().expect("presets carry a sweep");
        for c in &curves {
            c.scenario.validate()?;
        }
        sweep_table(&curves, section.param, &section.values()?)
    }

    pub fn render(self, opts: FigureOptions) -> Result<String, CliError> {
        let table = self.table(opts)?;
        let mut head = format!("lingrid figure {}\n", self.name());
        for c in self.curves(opts) {
            head.push_str(&format!("\ncurve {}\n", c.label.as_deref().unwrap_or("")));
            head.push_str(&c.scenario.to_toml());
        }
        Ok(table.to_csv(&head))
    }
}
