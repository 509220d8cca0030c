//! The truncated linear grid: a set of `n1` horizontal potentials `V_j`
//! crossed by `n2` parallel slanted potentials `V_{n1+k} + beta t`, coupled
//! only across the two sets, on the interval `[-t', t'']` (units with
//! hbar = 1).
//!
//! Grids are stored in canonical order: both potential sets sorted ascending.
//! External state labels are 1-based (horizontal states first, then slanted)
//! and survive the sort through a stored permutation.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Plain scenario description accepted by [`build_grid`]. Order of the
/// potentials is arbitrary; state `i` of the config becomes external label
/// `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub v_horizontal: Vec<f64>,
    pub v_slanted: Vec<f64>,
    pub beta: f64,
    /// `n1 x n2` cross-set coupling matrix `g_jk`.
    pub coupling: DMatrix<C64>,
    pub t_minus: f64,
    pub t_plus: f64,
    pub require_interior_crossings: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridModel {
    v_horizontal: Vec<f64>,
    v_slanted: Vec<f64>,
    beta: f64,
    coupling: DMatrix<C64>,
    t_minus: f64,
    t_plus: f64,
    /// `labels[i]` is the external 1-based label of canonical state `i`.
    labels: Vec<usize>,
}

/// A state-to-state transition between external (1-based) labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransitionLabel {
    pub from_state: usize,
    pub to_state: usize,
}

impl TransitionLabel {
    pub fn new(from_state: usize, to_state: usize) -> Self {
        Self { from_state, to_state }
    }
}

impl std::fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.from_state, self.to_state)
    }
}

impl std::str::FromStr for TransitionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse transition '{s}', expected 'FROM->TO'"));
        let (from, to) = s.split_once("->").ok_or_else(bad)?;
        let from = from.trim().parse().map_err(|_| bad())?;
        let to = to.trim().parse().map_err(|_| bad())?;
        Ok(Self::new(from, to))
    }
}

/// Time ordering of the two-step paths of a within-set transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOrder {
    /// Every path crosses in forward time order.
    Intuitive,
    /// Every path needs its second crossing before the first.
    Counterintuitive,
    /// Degenerate potentials: both crossings coincide.
    Tie,
}

fn sort_permutation(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // stable: ties keep the user's order
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

/// Validate a scenario and bring it into canonical order.
pub fn build_grid(config: &GridConfig) -> Result<GridModel> {
    let n1 = config.v_horizontal.len();
    let n2 = config.v_slanted.len();
    if n1 == 0 || n2 == 0 {
        return Err(Error::DimensionMismatch(format!(
            "both potential sets must be non-empty (n1 = {n1}, n2 = {n2})"
        )));
    }
    if config.coupling.shape() != (n1, n2) {
        return Err(Error::DimensionMismatch(format!(
            "coupling is {}x{}, expected {n1}x{n2}",
            config.coupling.nrows(),
            config.coupling.ncols()
        )));
    }
    if config.v_horizontal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("v_horizontal"));
    }
    if config.v_slanted.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("v_slanted"));
    }
    if config.coupling.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
        return Err(Error::NonFinite("coupling"));
    }
    if !config.beta.is_finite() {
        return Err(Error::NonFinite("beta"));
    }
    if config.beta == 0.0 {
        return Err(Error::ZeroSlope);
    }
    let (tm, tp) = (config.t_minus, config.t_plus);
    if !(tm.is_finite() && tp.is_finite()) || tm + tp <= 0.0 {
        return Err(Error::InvalidInterval { t_minus: tm, t_plus: tp });
    }

    let ph = sort_permutation(&config.v_horizontal);
    let ps = sort_permutation(&config.v_slanted);
    let v_horizontal: Vec<f64> = ph.iter().map(|&i| config.v_horizontal[i]).collect();
    let v_slanted: Vec<f64> = ps.iter().map(|&i| config.v_slanted[i]).collect();
    let coupling = DMatrix::from_fn(n1, n2, |j, k| config.coupling[(ph[j], ps[k])]);
    let labels = ph
        .iter()
        .map(|&i| i + 1)
        .chain(ps.iter().map(|&i| n1 + i + 1))
        .collect();

    let grid = GridModel {
        v_horizontal,
        v_slanted,
        beta: config.beta,
        coupling,
        t_minus: tm,
        t_plus: tp,
        labels,
    };
    if config.require_interior_crossings {
        if let Some(&(j, k, t)) = grid.exterior_crossings().first() {
            return Err(Error::InvalidArgument(format!(
                "crossing of states {} and {} at t = {t} lies outside [-{tm}, {tp}]",
                grid.labels[j],
                grid.labels[n1 + k]
            )));
        }
    }
    Ok(grid)
}

impl GridModel {
    pub fn n1(&self) -> usize {
        self.v_horizontal.len()
    }

    pub fn n2(&self) -> usize {
        self.v_slanted.len()
    }

    pub fn n_states(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn v_horizontal(&self) -> &[f64] {
        &self.v_horizontal
    }

    pub fn v_slanted(&self) -> &[f64] {
        &self.v_slanted
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn coupling(&self) -> &DMatrix<C64> {
        &self.coupling
    }

    pub fn t_minus(&self) -> f64 {
        self.t_minus
    }

    pub fn t_plus(&self) -> f64 {
        self.t_plus
    }

    /// Total interval length `t' + t''`.
    pub fn duration(&self) -> f64 {
        self.t_minus + self.t_plus
    }

    /// External labels in canonical order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Energy offset of canonical state `i` (horizontal states first).
    pub fn offset(&self, i: usize) -> f64 {
        if i < self.n1() {
            self.v_horizontal[i]
        } else {
            self.v_slanted[i - self.n1()]
        }
    }

    /// Canonical 0-based position of an external 1-based label.
    pub fn canonical_index(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::InvalidLabel { index: label, len: self.n_states() })
    }

    /// Crossing time of horizontal state `j` and slanted state `k`
    /// (canonical 0-based indices).
    pub fn crossing_time(&self, j: usize, k: usize) -> f64 {
        (self.v_horizontal[j] - self.v_slanted[k]) / self.beta
    }

    /// Crossings that do not lie strictly inside `(-t', t'')`, as
    /// `(j, k, t_jk)` in canonical indices.
    pub fn exterior_crossings(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.n1() {
            for k in 0..self.n2() {
                let t = self.crossing_time(j, k);
                if !(t > -self.t_minus && t < self.t_plus) {
                    out.push((j, k, t));
                }
            }
        }
        out
    }

    /// Copy with the coupling matrix replaced (canonical order).
    pub fn with_coupling(&self, coupling: DMatrix<C64>) -> Result<Self> {
        if coupling.shape() != self.coupling.shape() {
            return Err(Error::DimensionMismatch("replacement coupling shape".into()));
        }
        Ok(Self { coupling, ..self.clone() })
    }

    /// Copy with new truncation times.
    pub fn with_interval(&self, t_minus: f64, t_plus: f64) -> Result<Self> {
        if !(t_minus.is_finite() && t_plus.is_finite()) || t_minus + t_plus <= 0.0 {
            return Err(Error::InvalidInterval { t_minus, t_plus });
        }
        Ok(Self { t_minus, t_plus, ..self.clone() })
    }

    /// Stable 64-bit fingerprint of every parameter, for tagging results.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the raw bit patterns
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.n1() as u64);
        eat(self.n2() as u64);
        self.v_horizontal.iter().for_each(|v| eat(v.to_bits()));
        self.v_slanted.iter().for_each(|v| eat(v.to_bits()));
        eat(self.beta.to_bits());
        for g in self.coupling.iter() {
            eat(g.re.to_bits());
            eat(g.im.to_bits());
        }
        eat(self.t_minus.to_bits());
        eat(self.t_plus.to_bits());
        self.labels.iter().for_each(|&l| eat(l as u64));
        h
    }
}

/// Map a grid whose two sets carry slopes `(slope_first, slope_second)` onto
/// the canonical form with a horizontal first set and `beta = slope_second -
/// slope_first`. The `beta` stored in `grid` is ignored. The map multiplies
/// every amplitude by the common phase `exp(i slope_first t^2 / 2)`, so
/// transition probabilities are unchanged.
pub fn gauge_reduce(slope_first: f64, slope_second: f64, grid: &GridModel) -> Result<GridModel> {
    if !(slope_first.is_finite() && slope_second.is_finite()) {
        return Err(Error::NonFinite("slope"));
    }
    if slope_first == slope_second {
        return Err(Error::EqualSlopes(slope_first));
    }
    Ok(GridModel { beta: slope_second - slope_first, ..grid.clone() })
}

/// Rescale a grid to slope `new_beta` using the invariance of the coupled
/// equations under `g -> s g`, `V -> s V`, `t -> t / s` with
/// `s = sqrt(new_beta / beta)`.
pub fn rescale_beta(grid: &GridModel, new_beta: f64) -> Result<GridModel> {
    if !(new_beta > 0.0) || !new_beta.is_finite() {
        return Err(Error::NonPositiveSlope(new_beta));
    }
    if grid.beta <= 0.0 {
        return Err(Error::NonPositiveSlope(grid.beta));
    }
    let s = (new_beta / grid.beta).sqrt();
    Ok(GridModel {
        v_horizontal: grid.v_horizontal.iter().map(|v| v * s).collect(),
        v_slanted: grid.v_slanted.iter().map(|v| v * s).collect(),
        beta: new_beta,
        coupling: grid.coupling.map(|g| g * s),
        t_minus: grid.t_minus / s,
        t_plus: grid.t_plus / s,
        labels: grid.labels.clone(),
    })
}

/// Bandwidths `(dV1, dV2)` of the horizontal and slanted sets.
pub fn bandwidths(grid: &GridModel) -> (f64, f64) {
    let spread = |v: &[f64]| v[v.len() - 1] - v[0];
    (spread(&grid.v_horizontal), spread(&grid.v_slanted))
}

/// Time ordering of the two-step paths connecting two states of the same set.
pub fn path_order(grid: &GridModel, label: TransitionLabel) -> Result<PathOrder> {
    let from = grid.canonical_index(label.from_state)?;
    let to = grid.canonical_index(label.to_state)?;
    let n1 = grid.n1();
    if (from < n1) != (to < n1) {
        return Err(Error::CrossSetLabel { from: label.from_state, to: label.to_state });
    }
    // Path from -> m -> to through an intermediate m of the other set:
    // counterintuitive iff the second crossing happens first. For parallel
    // sets the sign of t(to, m) - t(from, m) is the same for every m.
    let (v_from, v_to) = (grid.offset(from), grid.offset(to));
    if v_from == v_to {
        return Ok(PathOrder::Tie);
    }
    let dt = if from < n1 {
        (v_to - v_from) / grid.beta
    } else {
        (v_from - v_to) / grid.beta
    };
    Ok(if dt < 0.0 { PathOrder::Counterintuitive } else { PathOrder::Intuitive })
}

pub fn is_counterintuitive(grid: &GridModel, label: TransitionLabel) -> Result<bool> {
    Ok(path_order(grid, label)? == PathOrder::Counterintuitive)
}

/// Builtin couplings and the two-by-two grid used throughout the figures.
pub mod presets {
    use super::*;

    /// `g0 * [[1/1.2, 1], [1, 1.2 exp(i m pi / 4)]]`.
    pub fn phase_coupling(m: i32, g0: f64) -> DMatrix<C64> {
        let phase = C64::from_polar(1.2, f64::from(m) * std::f64::consts::FRAC_PI_4);
        DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0 / 1.2, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), phase],
        )
        .map(|g| g * g0)
    }

    /// All couplings equal to `g0`.
    pub fn equal_coupling(n1: usize, n2: usize, g0: f64) -> DMatrix<C64> {
        DMatrix::from_element(n1, n2, C64::new(g0, 0.0))
    }

    /// Equally spaced potentials spanning `[-dv/2, dv/2]` (a single potential
    /// sits at zero).
    pub fn spread(n: usize, dv: f64) -> Vec<f64> {
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| -dv / 2.0 + dv * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Grid with both sets spread over the gap `dv`, slope `beta` and the
    /// given coupling; for a 2x2 coupling this is `V1 = V3 = -dv/2`,
    /// `V2 = V4 = dv/2`.
    pub fn gap_grid(dv: f64, beta: f64, coupling: DMatrix<C64>, t_minus: f64, t_plus: f64) -> Result<GridModel> {
        let (n1, n2) = coupling.shape();
        build_grid(&GridConfig {
            v_horizontal: spread(n1, dv),
            v_slanted: spread(n2, dv),
            beta,
            coupling,
            t_minus,
            t_plus,
            require_interior_crossings: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    fn two_state(g: f64) -> GridConfig {
        GridConfig {
            v_horizontal: vec![0.0],
            v_slanted: vec![0.0],
            beta: 1.0,
            coupling: DMatrix::from_element(1, 1, C64::new(g, 0.0)),
            t_minus: 10.0,
            t_plus: 10.0,
            require_interior_crossings: true,
        }
    }

    #[test]
    fn builds_section_v_model() {
        let g = gap_grid(0.1, 1.0, phase_coupling(1, 0.5), 100.0, 100.0).unwrap();
        assert_eq!((g.n1(), g.n2()), (2, 2));
        assert_eq!(g.v_horizontal(), &[-0.05, 0.05]);
        assert_eq!(g.labels(), &[1, 2, 3, 4]);
        assert_eq!(bandwidths(&g), (0.1, 0.1));
    }

    #[test]
    fn uncoupled_two_state_is_valid() {
        let g = build_grid(&two_state(0.0)).unwrap();
        assert_eq!(g.n_states(), 2);
        assert_eq!(bandwidths(&g), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = two_state(1.0);
        c.beta = 0.0;
        assert_eq!(build_grid(&c), Err(Error::ZeroSlope));

        let mut c = two_state(1.0);
        c.v_slanted.push(1.0);
        assert!(matches!(build_grid(&c), Err(Error::DimensionMismatch(_))));

        let mut c = two_state(1.0);
        c.coupling[(0, 0)] = C64::new(f64::NAN, 0.0);
        assert_eq!(build_grid(&c), Err(Error::NonFinite("coupling")));

        let mut c = two_state(1.0);
        c.v_horizontal = vec![50.0];
        assert!(matches!(build_grid(&c), Err(Error::InvalidArgument(_))));
        c.require_interior_crossings = false;
        let g = build_grid(&c).unwrap();
        assert_eq!(g.exterior_crossings(), vec![(0, 0, 50.0)]);
    }

    #[test]
    fn canonical_order_keeps_labels() {
        let coupling = DMatrix::from_fn(2, 3, |j, k| C64::new((10 * j + k) as f64, 0.0));
        let g = build_grid(&GridConfig {
            v_horizontal: vec![1.0, -1.0],
            v_slanted: vec![0.5, -0.5, 0.0],
            beta: 1.0,
            coupling,
            t_minus: 5.0,
            t_plus: 5.0,
            require_interior_crossings: true,
        })
        .unwrap();
        assert_eq!(g.v_horizontal(), &[-1.0, 1.0]);
        assert_eq!(g.v_slanted(), &[-0.5, 0.0, 0.5]);
        assert_eq!(g.labels(), &[2, 1, 4, 5, 3]);
        // user entry (row 1, col 0) = 10 now sits at canonical (0, 2)
        assert_eq!(g.coupling()[(0, 2)].re, 10.0);
        assert_eq!(g.canonical_index(3).unwrap(), 4);
    }

    #[test]
    fn gauge_reduce_cases() {
        let g = gap_grid(0.1, 1.0, phase_coupling(0, 1.0), 10.0, 10.0).unwrap();
        assert_eq!(gauge_reduce(0.0, 1.0, &g).unwrap(), g);
        assert_eq!(gauge_reduce(-0.5, 0.5, &g).unwrap().beta(), 1.0);
        assert_eq!(gauge_reduce(1.0, 1.0, &g), Err(Error::EqualSlopes(1.0)));
    }

    #[test]
    fn rescale_beta_cases() {
        let g = gap_grid(0.1, 1.0, phase_coupling(0, 1.0), 100.0, 100.0).unwrap();
        assert_eq!(rescale_beta(&g, 1.0).unwrap(), g);
        let r = rescale_beta(&g, 4.0).unwrap();
        assert_eq!(r.t_minus(), 50.0);
        assert_eq!(r.v_horizontal(), &[-0.1, 0.1]);
        assert!((r.coupling()[(0, 1)].re - 2.0).abs() < 1e-15);
        assert_eq!(rescale_beta(&g, 0.0), Err(Error::NonPositiveSlope(0.0)));
    }

    #[test]
    fn counterintuitive_predicate() {
        // two horizontal potentials crossed by three slanted ones
        let g = build_grid(&GridConfig {
            v_horizontal: vec![-1.0, 1.0],
            v_slanted: vec![-2.0, 0.0, 2.0],
            beta: 1.0,
            coupling: DMatrix::from_element(2, 3, C64::new(0.1, 0.0)),
            t_minus: 10.0,
            t_plus: 10.0,
            require_interior_crossings: true,
        })
        .unwrap();
        for (from, to) in [(2, 1), (3, 4), (3, 5), (4, 5)] {
            assert!(is_counterintuitive(&g, TransitionLabel::new(from, to)).unwrap(), "{from}->{to}");
            assert!(!is_counterintuitive(&g, TransitionLabel::new(to, from)).unwrap(), "{to}->{from}");
        }
        assert!(matches!(
            is_counterintuitive(&g, TransitionLabel::new(1, 3)),
            Err(Error::CrossSetLabel { .. })
        ));

        let v = gap_grid(0.1, 1.0, phase_coupling(1, 1.0), 10.0, 10.0).unwrap();
        assert!(!is_counterintuitive(&v, TransitionLabel::new(1, 2)).unwrap());
        let flat = gap_grid(0.0, 1.0, phase_coupling(1, 1.0), 10.0, 10.0).unwrap();
        assert_eq!(path_order(&flat, TransitionLabel::new(2, 1)).unwrap(), PathOrder::Tie);
    }

    #[test]
    fn parses_transition_labels() {
        let t: TransitionLabel = "2->1".parse().unwrap();
        assert_eq!(t, TransitionLabel::new(2, 1));
        assert_eq!(t.to_string(), "2->1");
        assert!("2-1".parse::<TransitionLabel>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bandwidths_ignore_common_shift(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, shift in -10.0..10.0f64) {
                let cfg = |s: f64| GridConfig {
                    v_horizontal: vec![a + s, b + s],
                    v_slanted: vec![c + s, s],
                    beta: 1.0,
                    coupling: DMatrix::from_element(2, 2, C64::new(1.0, 0.0)),
                    t_minus: 100.0,
                    t_plus: 100.0,
                    require_interior_crossings: false,
                };
                let (x1, x2) = bandwidths(&build_grid(&cfg(0.0)).unwrap());
                let (y1, y2) = bandwidths(&build_grid(&cfg(shift)).unwrap());
                prop_assert!((x1 - y1).abs() < 1e-12 && (x2 - y2).abs() < 1e-12);
            }

            #[test]
            fn counterintuitive_is_antisymmetric(a in -5.0..5.0f64, b in -5.0..5.0f64, beta in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64]) {
                prop_assume!(a != b);
                let g = build_grid(&GridConfig {
                    v_horizontal: vec![a, b],
                    v_slanted: vec![b, a],
                    beta,
                    coupling: DMatrix::from_element(2, 2, C64::new(1.0, 0.0)),
                    t_minus: 100.0,
                    t_plus: 100.0,
                    require_interior_crossings: false,
                }).unwrap();
                for (x, y) in [(1, 2), (3, 4)] {
                    let fwd = is_counterintuitive(&g, TransitionLabel::new(x, y)).unwrap();
                    let bwd = is_counterintuitive(&g, TransitionLabel::new(y, x)).unwrap();
                    prop_assert_eq!(fwd, !bwd);
                }
            }
        }
    }
}
