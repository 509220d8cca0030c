//! TOML scenario files.
//!
//! ```toml
//! [grid]
//! beta = 1.0
//! t_minus = 100.0
//! t_plus = 100.0
//! dv = 2.5e-3                # or v_horizontal = [...] and v_slanted = [...]
//!
//! [coupling]
//! preset = "eq22"            # eq22 | equal | matrix
//! m = 1
//! g0 = 0.5
//!
//! [run]
//! method = "both"            # qda | numeric | both
//! transitions = [[2, 1], [3, 4]]
//!
//! [sweep]
//! param = "dV"               # g0 | dV | t
//! from = 0.0
//! to = 5e-3
//! points = 200
//! scale = "linear"           # linear | log
//! ```

use std::path::Path;

use lingrid::integrate::{Picture, PropagationSettings};
use lingrid::model::presets::{equal_coupling, phase_coupling, spread};
use lingrid::model::{build_grid, GridConfig, GridModel, TransitionLabel};
use lingrid::qda::{CriteriaThresholds, MethodChoice, QdaSettings};
use lingrid::smatrix::Method;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSection,
    pub coupling: CouplingSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "unit")]
    pub beta: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    /// Gap of an evenly spread grid; both sets span `[-dv/2, dv/2]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_horizontal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_slanted: Option<Vec<f64>>,
    #[serde(default)]
    pub require_interior_crossings: bool,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingPreset {
    /// `g0 [[1/1.2, 1], [1, 1.2 exp(i m pi/4)]]`
    Eq22,
    Equal,
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub preset: CouplingPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i32>,
    /// Coupling strength; for `matrix` a scale factor (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    /// Rows of `[re, im]` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSet {
    Qda,
    Numeric,
    Both,
}

impl MethodSet {
    /// Methods in output order.
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSet::Qda => vec![Method::Qda],
            MethodSet::Numeric => vec![Method::Numeric],
            MethodSet::Both => vec![Method::Numeric, Method::Qda],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PictureName {
    Interaction,
    Schrodinger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMethodName {
    Auto,
    Analytic,
    Ode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub method: MethodSet,
    /// `[from, to]` external labels; empty means every within-set transition.
    pub transitions: Vec<[usize; 2]>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub picture: PictureName,
    pub channel_method: ChannelMethodName,
    pub kummer_tol: f64,
    pub rank_tol: f64,
    pub satisfied: f64,
    pub marginal: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let prop = PropagationSettings::default();
        let qda = QdaSettings::default();
        let th = CriteriaThresholds::default();
        Self {
            method: MethodSet::Both,
            transitions: Vec::new(),
            rel_tol: prop.rel_tol,
            abs_tol: prop.abs_tol,
            picture: PictureName::Interaction,
            channel_method: ChannelMethodName::Auto,
            kummer_tol: qda.kummer_tol,
            rank_tol: qda.rank_tol,
            satisfied: th.satisfied,
            marginal: th.marginal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "g0")]
    G0,
    #[serde(rename = "dV")]
    Dv,
    #[serde(rename = "t")]
    T,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::G0 => "g0",
            SweepParam::Dv => "dV",
            SweepParam::T => "t",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "g0" => Ok(SweepParam::G0),
            "dV" | "dv" => Ok(SweepParam::Dv),
            "t" => Ok(SweepParam::T),
            _ => Err(CliError::Scenario(format!("unknown sweep parameter '{s}' (expected g0, dV or t)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub scale: Scale,
}

fn linear() -> Scale {
    Scale::Linear
}

impl SweepSection {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err(CliError::Scenario("sweep bounds must be finite".into()));
        }
        if self.points < 2 {
            return Err(CliError::Scenario(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        if self.from == self.to {
            return Err(CliError::Scenario(format!("zero-width sweep: from = to = {}", self.from)));
        }
        let last = (self.points - 1) as f64;
        Ok(match self.scale {
            Scale::Linear => (0..self.points)
                .map(|i| {
                    if i + 1 == self.points {
                        self.to
                    } else {
                        self.from + (self.to - self.from) * i as f64 / last
                    }
                })
                .collect(),
            Scale::Log => {
                if !(self.from > 0.0 && self.to > 0.0) {
                    return Err(CliError::Scenario("log sweep needs positive bounds".into()));
                }
                let (a, b) = (self.from.ln(), self.to.ln());
                (0..self.points)
                    .map(|i| if i + 1 == self.points { self.to } else { (a + (b - a) * i as f64 / last).exp() })
                    .collect()
            }
        })
    }
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| CliError::Parse { origin: origin.to_string(), message: e.to_string() })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.coupling_matrix()?;
        self.grid_config()?;
        if let Some(s) = &self.sweep {
            s.values()?;
            if s.param == SweepParam::Dv && self.grid.dv.is_none() {
                return Err(CliError::Scenario("a dV sweep needs grid.dv instead of explicit potentials".into()));
            }
        }
        let th = self.thresholds();
        if !(th.satisfied > 0.0 && th.satisfied <= th.marginal) {
            return Err(CliError::Scenario("criteria thresholds need 0 < satisfied <= marginal".into()));
        }
        Ok(())
    }

    /// Echo for CSV header comments.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn coupling_matrix(&self) -> Result<DMatrix<C64>, CliError> {
        let c = &self.coupling;
        let need_g0 = || c.g0.ok_or_else(|| CliError::Scenario("coupling.g0 is required for this preset".into()));
        match c.preset {
            CouplingPreset::Eq22 => {
                let m = c.m.ok_or_else(|| CliError::Scenario("coupling.m is required for preset eq22".into()))?;
                Ok(phase_coupling(m, need_g0()?))
            }
            CouplingPreset::Equal => Ok(equal_coupling(c.n1.unwrap_or(2), c.n2.unwrap_or(2), need_g0()?)),
            CouplingPreset::Matrix => {
                let rows = c
                    .matrix
                    .as_ref()
                    .ok_or_else(|| CliError::Scenario("coupling.matrix is required for preset matrix".into()))?;
                let n1 = rows.len();
                let n2 = rows.first().map_or(0, Vec::len);
                if n1 == 0 || n2 == 0 || rows.iter().any(|r| r.len() != n2) {
                    return Err(CliError::Scenario("coupling.matrix must be a non-empty rectangular array".into()));
                }
                let scale = c.g0.unwrap_or(1.0);
                Ok(DMatrix::from_fn(n1, n2, |j, k| C64::new(rows[j][k][0], rows[j][k][1]) * scale))
            }
        }
    }

    pub fn grid_config(&self) -> Result<GridConfig, CliError> {
        let coupling = self.coupling_matrix()?;
        let (n1, n2) = coupling.shape();
        let g = &self.grid;
        let (v_horizontal, v_slanted) = match (g.dv, &g.v_horizontal, &g.v_slanted) {
            (Some(dv), None, None) => (spread(n1, dv), spread(n2, dv)),
            (None, Some(h), Some(s)) => (h.clone(), s.clone()),
            _ => {
                return Err(CliError::Scenario(
                    "grid needs either dv or both v_horizontal and v_slanted".into(),
                ))
            }
        };
        Ok(GridConfig {
            v_horizontal,
            v_slanted,
            beta: g.beta,
            coupling,
            t_minus: g.t_minus,
            t_plus: g.t_plus,
            require_interior_crossings: g.require_interior_crossings,
        })
    }

    pub fn build(&self) -> Result<GridModel, CliError> {
        Ok(build_grid(&self.grid_config()?)?)
    }

    /// Copy with the sweep parameter set to `value`.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self, CliError> {
        let mut s = self.clone();
        match param {
            SweepParam::G0 => s.coupling.g0 = Some(value),
            SweepParam::Dv => {
                if s.grid.dv.is_none() {
                    return Err(CliError::Scenario("a dV sweep needs grid.dv".into()));
                }
                s.grid.dv = Some(value);
            }
            SweepParam::T => {
                s.grid.t_minus = value;
                s.grid.t_plus = value;
            }
        }
        Ok(s)
    }

    pub fn transitions(&self, grid: &GridModel) -> Result<Vec<TransitionLabel>, CliError> {
        if self.run.transitions.is_empty() {
            let (n1, n) = (grid.n1(), grid.n_states());
            let mut out = Vec::new();
            for (lo, hi) in [(1, n1), (n1 + 1, n)] {
                for from in lo..=hi {
                    for to in lo..=hi {
                        if from != to {
                            out.push(TransitionLabel::new(from, to));
                        }
                    }
                }
            }
            return Ok(out);
        }
        let n = grid.n_states();
        self.run
            .transitions
            .iter()
            .map(|&[from, to]| {
                for label in [from, to] {
                    if label == 0 || label > n {
                        return Err(CliError::Scenario(format!("transition {from}->{to}: label out of range 1..={n}")));
                    }
                }
                Ok(TransitionLabel::new(from, to))
            })
            .collect()
    }

    pub fn propagation(&self) -> PropagationSettings {
        PropagationSettings {
            rel_tol: self.run.rel_tol,
            abs_tol: self.run.abs_tol,
            picture: match self.run.picture {
                PictureName::Interaction => Picture::Interaction,
                PictureName::Schrodinger => Picture::Schrodinger,
            },
            ..PropagationSettings::default()
        }
    }

    pub fn qda(&self) -> QdaSettings {
        QdaSettings {
            method: match self.run.channel_method {
                ChannelMethodName::Auto => MethodChoice::Auto,
                ChannelMethodName::Analytic => MethodChoice::Analytic,
                ChannelMethodName::Ode => MethodChoice::Ode,
            },
            kummer_tol: self.run.kummer_tol,
            ode: self.propagation(),
            rank_tol: self.run.rank_tol,
        }
    }

    pub fn thresholds(&self) -> CriteriaThresholds {
        CriteriaThresholds { satisfied: self.run.satisfied, marginal: self.run.marginal }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[grid]
t_minus = 100.0
t_plus = 100.0
dv = 0.0025

[coupling]
preset = "eq22"
m = 1
g0 = 0.5

[sweep]
param = "g0"
from = 0.0
to = 5.0
points = 11
"#;

    #[test]
    fn parses_and_builds() {
        let s = Scenario::parse(BASIC, "basic").unwrap();
        assert_eq!(s.run.method, MethodSet::Both);
        let grid = s.build().unwrap();
        assert_eq!(grid.n_states(), 4);
        assert_eq!(s.transitions(&grid).unwrap().len(), 4);
        let v = s.sweep.as_ref().unwrap().values().unwrap();
        assert_eq!(v.len(), 11);
        assert_eq!(v[10], 5.0);
        assert!((v[3] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn echo_round_trips() {
        let s = Scenario::parse(BASIC, "basic").unwrap();
        assert_eq!(Scenario::parse(&s.to_toml(), "echo").unwrap(), s);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Scenario::parse("[grid]\nt_minus = = 3\n", "bad.toml").unwrap_err().to_string();
        assert!(err.contains("bad.toml") && err.contains("line 2"), "{err}");
        let err = Scenario::parse(&BASIC.replace("m = 1", "m = 1\nbogus = 2"), "x").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn rejects_bad_sweeps() {
        for (from, to, points) in [("1.0", "1.0", "5"), ("0.0", "1.0", "1"), ("0.0", "inf", "5")] {
            let text = BASIC.replace("from = 0.0", &format!("from = {from}")).replace("to = 5.0", &format!("to = {to}")).replace("points = 11", &format!("points = {points}"));
            assert!(Scenario::parse(&text, "x").is_err(), "{from} {to} {points}");
        }
        let log = BASIC.replace("points = 11", "points = 3\nscale = \"log\"");
        assert!(Scenario::parse(&log, "x").is_err());
        let log = log.replace("from = 0.0", "from = 0.05");
        let v = Scenario::parse(&log, "x").unwrap().sweep.unwrap().values().unwrap();
        assert!((v[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn explicit_matrix_and_potentials() {
        let text = r#"
[grid]
t_minus = 10.0
t_plus = 10.0
v_horizontal = [0.5, -0.5]
v_slanted = [0.0]

[coupling]
preset = "matrix"
matrix = [[[0.1, 0.0]], [[0.0, 0.2]]]

[run]
method = "numeric"
transitions = [[1, 2]]
"#;
        let s = Scenario::parse(text, "x").unwrap();
        let c = s.coupling_matrix().unwrap();
        assert_eq!(c[(1, 0)], C64::new(0.0, 0.2));
        let grid = s.build().unwrap();
        assert_eq!(s.transitions(&grid).unwrap(), vec![TransitionLabel::new(1, 2)]);
        assert!(s.with_param(SweepParam::Dv, 0.1).is_err());
        let bad = text.replace("[[1, 2]]", "[[1, 9]]");
        let s = Scenario::parse(&bad, "x").unwrap();
        assert!(s.transitions(&s.build().unwrap()).is_err());
    }
}
