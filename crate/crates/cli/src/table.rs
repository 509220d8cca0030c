//! Sweep evaluation and the CSV dialect shared by `sweep` and `figure`.

use lingrid::integrate::numeric_smatrix;
use lingrid::model::TransitionLabel;
use lingrid::parallel::map_ordered;
use lingrid::qda;
use lingrid::smatrix::{Method, TransitionMatrix};

use crate::scenario::{Scenario, SweepParam};
use crate::CliError;

/// Fixed 12-significant-digit format. Negative zero prints as zero.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// Prefix every line with `# `.
pub fn comment_block(text: &str) -> String {
    text.lines().map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") }).collect()
}

pub fn smatrix(scenario: &Scenario, grid: &lingrid::model::GridModel, method: Method) -> Result<TransitionMatrix, CliError> {
    Ok(match method {
        Method::Qda => qda::solve(grid, &scenario.qda())?.smatrix,
        Method::Numeric => numeric_smatrix(grid, &scenario.propagation())?,
    })
}

/// One sweep curve: a scenario whose sweep parameter is overwritten per point.
#[derive(Clone, Debug)]
pub struct Curve {
    pub label: Option<String>,
    pub scenario: Scenario,
}

struct Point {
    /// per transition, per method
    probs: Vec<f64>,
    /// per method
    defects: Vec<f64>,
}

fn evaluate(scenario: &Scenario, transitions: &[TransitionLabel]) -> Result<Point, CliError> {
    let grid = scenario.build()?;
    let methods = scenario.run.method.methods();
    let mut per_method = Vec::with_capacity(methods.len());
    for &m in &methods {
        per_method.push(smatrix(scenario, &grid, m)?);
    }
    let mut probs = Vec::with_capacity(transitions.len() * methods.len());
    for &t in transitions {
        for s in &per_method {
            probs.push(s.probability(t)?);
        }
    }
    Ok(Point { probs, defects: per_method.iter().map(TransitionMatrix::unitarity_defect).collect() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub param: SweepParam,
    pub columns: Vec<String>,
    /// First entry of each row is the parameter value.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self, comments: &str) -> String {
        let mut out = comment_block(comments);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn probability_column(curve: Option<&str>, t: TransitionLabel, method: Method) -> String {
    match curve {
        Some(c) => format!("P({t})@{c}/{method}"),
        None => format!("P({t})/{method}"),
    }
}

/// Evaluate every curve at every value. Rows come out in the order of
/// `values` whatever the thread count.
pub fn sweep_table(curves: &[Curve], param: SweepParam, values: &[f64]) -> Result<Table, CliError> {
    let mut columns = vec![param.as_str().to_string()];
    let mut transitions = Vec::with_capacity(curves.len());
    let mut all_methods: Vec<Method> = Vec::new();
    for c in curves {
        let grid = c.scenario.with_param(param, values[0])?.build()?;
        let ts = c.scenario.transitions(&grid)?;
        let methods = c.scenario.run.method.methods();
        for &t in &ts {
            for &m in &methods {
                columns.push(probability_column(c.label.as_deref(), t, m));
            }
        }
        for m in methods {
            if !all_methods.contains(&m) {
                all_methods.push(m);
            }
        }
        transitions.push(ts);
    }
    all_methods.sort_by_key(|m| m.as_str() != "numeric");
    for m in &all_methods {
        columns.push(format!("defect/{m}"));
    }

    let tasks: Vec<(usize, f64)> = values.iter().flat_map(|&v| (0..curves.len()).map(move |c| (c, v))).collect();
    let results = map_ordered(&tasks, |&(c, v)| {
        let s = curves[c].scenario.with_param(param, v)?;
        evaluate(&s, &transitions[c]).map_err(|e| CliError::Point { param: param.as_str(), value: v, source: Box::new(e) })
    });

    let mut rows = Vec::with_capacity(values.len());
    let mut it = results.into_iter();
    for &v in values {
        let mut row = vec![v];
        let mut defects = vec![0.0f64; all_methods.len()];
        for c in curves {
            let p = it.next().expect("one result per task")?;
            row.extend_from_slice(&p.probs);
            for (m, d) in c.scenario.run.method.methods().iter().zip(&p.defects) {
                let k = all_methods.iter().position(|x| x == m).expect("method listed");
                defects[k] = defects[k].max(*d);
            }
        }
        row.extend(defects);
        rows.push(row);
    }
    Ok(Table { param, columns, rows })
}
