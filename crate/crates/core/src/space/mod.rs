//! Point universes, metrics and S-metrics.
//!
//! A universe is either a finite set of labeled points or a real interval
//! sampled on a regular grid. An S-metric over a universe is given by a
//! complete table of triples, by a metric `d` (generating
//! `S(x, y, z) = d(x, z) + d(y, z)`), or by a formula in `x, y, z`.

mod axioms;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

pub use axioms::{
    check_axioms, check_metric, check_triangle, generating_metric_check, induced_d_s, s_converges,
    s_from_metric, s_is_cauchy, AxiomReport, GeneratedVerdict, GenerationWitness, S1Violation,
    S2Violation, TriangleReport, TriangleViolation,
};

/// Default tolerance for verification checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A point: a label in a finite universe, or a real coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Label(String),
    Real(f64),
}

impl Point {
    pub fn label(s: impl Into<String>) -> Self {
        Point::Label(s.into())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Label(s) => f.write_str(s),
            Point::Real(v) => write!(f, "{v}"),
        }
    }
}

/// Finite set of uniquely labeled points. Labels that parse as finite
/// numbers carry that number as their coordinate.
#[derive(Debug, Clone)]
pub struct FiniteSet {
    labels: Vec<String>,
    coords: Vec<Option<f64>>,
    index: HashMap<String, usize>,
}

impl FiniteSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Empty("finite universe"));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::config("space.points", format!("duplicate label `{l}`")));
            }
        }
        let coords = labels
            .iter()
            .map(|l| l.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        Ok(FiniteSet { labels, coords, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn coordinate(&self, i: usize) -> Option<f64> {
        self.coords[i]
    }

    fn find_by_coordinate(&self, v: f64) -> Option<usize> {
        self.coords.iter().position(|c| match c {
            Some(c) => (c - v).abs() <= 1e-12 * c.abs().max(1.0),
            None => false,
        })
    }
}

/// Regular grid `lo, lo + step, ..., <= hi`.
///
/// Grid values are rounded to the decimal precision of `lo` and `step`, so
/// a grid with step 0.01 contains exactly the doubles nearest to the
/// decimals `k / 100`.
#[derive(Debug, Clone)]
pub struct RealGrid {
    lo: f64,
    hi: f64,
    step: f64,
    values: Vec<f64>,
}

fn decimal_places(v: f64) -> Option<i32> {
    (0..=12).find(|&k| {
        let scaled = v * 10f64.powi(k);
        (scaled - scaled.round()).abs() <= 1e-9 * scaled.abs().max(1.0)
    })
}

impl RealGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::config("space", "grid bounds and step must be finite"));
        }
        if step <= 0.0 {
            return Err(Error::config("space.step", "step must be > 0"));
        }
        if lo >= hi {
            return Err(Error::config("space.lo", "lo must be < hi"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if count > 10_000_000 {
            return Err(Error::config("space.step", format!("grid would have {count} points")));
        }
        let places = match (decimal_places(lo), decimal_places(step)) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        let values = (0..count)
            .map(|i| {
                let v = lo + i as f64 * step;
                match places {
                    Some(k) => {
                        let scale = 10f64.powi(k);
                        (v * scale).round() / scale
                    }
                    None => v,
                }
            })
            .collect();
        Ok(RealGrid { lo, hi, step, values })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nearest grid value, if `v` lies within one step of it.
    pub fn snap(&self, v: f64) -> Option<f64> {
        if !v.is_finite() {
            return None;
        }
        let raw = ((v - self.lo) / self.step).round();
        let idx = raw.clamp(0.0, (self.values.len() - 1) as f64) as usize;
        let g = self.values[idx];
        ((v - g).abs() <= self.step * (1.0 + 1e-9)).then_some(g)
    }

    /// Whether `v` lies in the closed interval `[lo, hi]`.
    pub fn in_interval(&self, v: f64) -> bool {
        let slack = 1e-12 * self.step;
        v >= self.lo - slack && v <= self.hi + slack
    }
}

#[derive(Debug, Clone)]
pub enum Universe {
    Finite(FiniteSet),
    Grid(RealGrid),
}

impl Universe {
    pub fn finite<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        FiniteSet::new(labels).map(Universe::Finite)
    }

    pub fn grid(lo: f64, hi: f64, step: f64) -> Result<Self> {
        RealGrid::new(lo, hi, step).map(Universe::Grid)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Universe::Finite(_))
    }

    pub fn len(&self) -> usize {
        match self {
            Universe::Finite(s) => s.len(),
            Universe::Grid(g) => g.values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every point of the universe, in declaration (or grid) order.
    pub fn points(&self) -> Vec<Point> {
        match self {
            Universe::Finite(s) => s.labels.iter().cloned().map(Point::Label).collect(),
            Universe::Grid(g) => g.values.iter().copied().map(Point::Real).collect(),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (Universe::Finite(s), Point::Label(l)) => s.index.contains_key(l),
            (Universe::Grid(g), Point::Real(v)) => g.snap(*v) == Some(*v),
            _ => false,
        }
    }

    /// Numeric coordinate of a point, as used by formula definitions.
    pub fn coordinate(&self, p: &Point) -> Result<f64> {
        match p {
            Point::Real(v) => Ok(*v),
            Point::Label(l) => match self {
                Universe::Finite(s) => {
                    let i = s.index_of(l).ok_or_else(|| Error::UnknownPoint(l.clone()))?;
                    s.coords[i].ok_or_else(|| Error::NoCoordinate(l.clone()))
                }
                Universe::Grid(_) => Err(Error::UnknownPoint(l.clone())),
            },
        }
    }

    /// Index of a labeled point in a finite universe.
    pub fn index(&self, p: &Point) -> Result<usize> {
        match (self, p) {
            (Universe::Finite(s), Point::Label(l)) => s.index_of(l).ok_or_else(|| Error::UnknownPoint(l.clone())),
            (Universe::Finite(s), Point::Real(v)) => {
                s.find_by_coordinate(*v).ok_or_else(|| Error::UnknownPoint(v.to_string()))
            }
            (Universe::Grid(_), p) => Err(Error::Unsupported(format!("table lookup of `{p}` on a real grid"))),
        }
    }

    /// Canonical point for a computed coordinate: the matching label in a
    /// finite universe, otherwise the raw real.
    pub fn point_at(&self, v: f64) -> Point {
        match self {
            Universe::Finite(s) => match s.find_by_coordinate(v) {
                Some(i) => Point::Label(s.labels[i].clone()),
                None => Point::Real(v),
            },
            Universe::Grid(_) => Point::Real(v),
        }
    }

    /// Resolves a user-supplied reference (label or number) against this universe.
    pub fn resolve(&self, p: &Point) -> Result<Point> {
        match (self, p) {
            (Universe::Finite(s), Point::Label(l)) => {
                s.index_of(l).ok_or_else(|| Error::UnknownPoint(l.clone()))?;
                Ok(p.clone())
            }
            (Universe::Finite(s), Point::Real(v)) => s
                .find_by_coordinate(*v)
                .map(|i| Point::Label(s.labels[i].clone()))
                .ok_or_else(|| Error::UnknownPoint(v.to_string())),
            (Universe::Grid(g), Point::Real(v)) => {
                if g.in_interval(*v) {
                    Ok(Point::Real(g.snap(*v).filter(|s| (s - v).abs() <= 1e-9 * g.step).unwrap_or(*v)))
                } else {
                    Err(Error::UnknownPoint(v.to_string()))
                }
            }
            (Universe::Grid(_), Point::Label(l)) => match l.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => self.resolve(&Point::Real(v)).map_err(|_| Error::UnknownPoint(l.clone())),
                _ => Err(Error::UnknownPoint(l.clone())),
            },
        }
    }
}

/// Dense table over ordered tuples of a finite universe.
#[derive(Debug, Clone)]
pub struct Table {
    labels: Vec<String>,
    arity: u32,
    values: Vec<f64>,
}

impl Table {
    fn build<const K: usize>(
        set: &FiniteSet,
        entries: impl IntoIterator<Item = ([String; K], f64)>,
        what: &str,
    ) -> Result<Self> {
        let n = set.len();
        let size = n.pow(K as u32);
        let mut values = vec![f64::NAN; size];
        let mut filled = vec![false; size];
        for (key, v) in entries {
            let mut idx = 0;
            for l in &key {
                let i = set.index_of(l).ok_or_else(|| Error::UnknownPoint(l.clone()))?;
                idx = idx * n + i;
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("{what} entry ({})", key.join(", ")),
                    value: v,
                });
            }
            values[idx] = v;
            filled[idx] = true;
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            let mut rest = missing;
            let mut key = vec![String::new(); K];
            for slot in key.iter_mut().rev() {
                *slot = set.labels[rest % n].clone();
                rest /= n;
            }
            return Err(Error::TableMiss(key.join(", ")));
        }
        Ok(Table {
            labels: set.labels.clone(),
            arity: K as u32,
            values,
        })
    }

    fn get(&self, universe: &Universe, points: &[&Point]) -> Result<f64> {
        let n = self.labels.len();
        let mut idx = 0;
        for p in points {
            idx = idx * n + universe.index(p)?;
        }
        Ok(self.values[idx])
    }

    fn matches(&self, set: &FiniteSet) -> bool {
        self.labels == set.labels
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }
}

/// A two-argument distance `d(x, y)`.
#[derive(Debug, Clone)]
pub enum MetricDef {
    Table(Table),
    Formula(Expr),
}

impl MetricDef {
    pub fn table(set: &FiniteSet, entries: impl IntoIterator<Item = ([String; 2], f64)>) -> Result<Self> {
        Table::build(set, entries, "metric").map(MetricDef::Table)
    }

    /// Builds a table from a row-major matrix in universe order.
    pub fn matrix(set: &FiniteSet, rows: &[Vec<f64>]) -> Result<Self> {
        let n = set.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::config("metric.matrix", format!("expected a {n}x{n} matrix")));
        }
        let entries = (0..n).flat_map(|i| {
            (0..n).map(move |j| ([set.labels[i].clone(), set.labels[j].clone()], rows[i][j]))
        });
        MetricDef::table(set, entries)
    }

    pub fn formula(expr: Expr) -> Self {
        MetricDef::Formula(expr)
    }

    pub fn eval(&self, universe: &Universe, x: &Point, y: &Point) -> Result<f64> {
        let v = match self {
            MetricDef::Table(t) => t.get(universe, &[x, y])?,
            MetricDef::Formula(e) => e.eval(&[universe.coordinate(x)?, universe.coordinate(y)?])?,
        };
        finite(v, || format!("d({x}, {y})"))
    }

    fn validate(&self, universe: &Universe) -> Result<()> {
        match self {
            MetricDef::Table(t) => match universe {
                Universe::Finite(s) if t.matches(s) => Ok(()),
                _ => Err(Error::config("smetric", "table does not match the universe")),
            },
            MetricDef::Formula(_) => require_coordinates(universe),
        }
    }
}

/// A three-argument S-metric definition.
#[derive(Debug, Clone)]
pub enum SMetricDef {
    Table(Table),
    Generated(MetricDef),
    Formula(Expr),
}

impl SMetricDef {
    pub fn table(set: &FiniteSet, entries: impl IntoIterator<Item = ([String; 3], f64)>) -> Result<Self> {
        Table::build(set, entries, "S-metric").map(SMetricDef::Table)
    }

    pub fn formula(expr: Expr) -> Self {
        SMetricDef::Formula(expr)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SMetricDef::Table(_) => "table",
            SMetricDef::Generated(_) => "generated",
            SMetricDef::Formula(_) => "formula",
        }
    }
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what: what(), value: v })
    }
}

fn require_coordinates(universe: &Universe) -> Result<()> {
    if let Universe::Finite(s) = universe {
        if let Some(i) = s.coords.iter().position(Option::is_none) {
            return Err(Error::NoCoordinate(s.labels[i].clone()));
        }
    }
    Ok(())
}

/// A universe equipped with an S-metric.
#[derive(Debug, Clone)]
pub struct Space {
    universe: Universe,
    smetric: SMetricDef,
}

impl Space {
    pub fn new(universe: Universe, smetric: SMetricDef) -> Result<Self> {
        match &smetric {
            SMetricDef::Table(t) => match &universe {
                Universe::Finite(s) if t.matches(s) => {}
                _ => return Err(Error::config("smetric", "table does not match the universe")),
            },
            SMetricDef::Generated(d) => d.validate(&universe)?,
            SMetricDef::Formula(_) => require_coordinates(&universe)?,
        }
        Ok(Space { universe, smetric })
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn smetric(&self) -> &SMetricDef {
        &self.smetric
    }

    pub fn points(&self) -> Vec<Point> {
        self.universe.points()
    }

    /// `S(x, y, z)`.
    pub fn eval_s(&self, x: &Point, y: &Point, z: &Point) -> Result<f64> {
        let v = match &self.smetric {
            SMetricDef::Table(t) => t.get(&self.universe, &[x, y, z])?,
            SMetricDef::Generated(d) => d.eval(&self.universe, x, z)? + d.eval(&self.universe, y, z)?,
            SMetricDef::Formula(e) => e.eval(&[
                self.universe.coordinate(x)?,
                self.universe.coordinate(y)?,
                self.universe.coordinate(z)?,
            ])?,
        };
        finite(v, || format!("S({x}, {y}, {z})"))
    }

    /// `S(x, x, y)`, the form every contraction quantity is built from.
    pub fn s2(&self, x: &Point, y: &Point) -> Result<f64> {
        self.eval_s(x, x, y)
    }
}

/// A universe equipped with an ordinary metric.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    universe: Universe,
    metric: MetricDef,
}

impl MetricSpace {
    pub fn new(universe: Universe, metric: MetricDef) -> Result<Self> {
        metric.validate(&universe)?;
        Ok(MetricSpace { universe, metric })
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn metric(&self) -> &MetricDef {
        &self.metric
    }

    pub fn eval_d(&self, x: &Point, y: &Point) -> Result<f64> {
        self.metric.eval(&self.universe, x, y)
    }

    /// The S-metric space generated by this metric.
    pub fn generated(&self) -> Space {
        Space {
            universe: self.universe.clone(),
            smetric: SMetricDef::Generated(self.metric.clone()),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    #[test]
    fn eval_s_example_formula() {
        let sp = skew_line(&["0", "1", "2", "4"]);
        assert_eq!(sp.eval_s(&pt("0"), &pt("1"), &pt("2")).unwrap(), 2.0);
        assert_eq!(sp.eval_s(&pt("0"), &pt("0"), &pt("4")).unwrap(), 8.0);
        assert_eq!(sp.eval_s(&pt("1"), &pt("1"), &pt("1")).unwrap(), 0.0);
    }

    #[test]
    fn unknown_label_is_an_error() {
        let sp = skew_line(&["0", "1"]);
        assert!(matches!(sp.eval_s(&pt("0"), &pt("7"), &pt("1")), Err(Error::UnknownPoint(_))));
    }

    #[test]
    fn formula_needs_numeric_labels() {
        let u = Universe::finite(["a", "b"]).unwrap();
        let e = crate::expr::parse(SKEW_S, &["x", "y", "z"]).unwrap();
        assert!(matches!(Space::new(u, SMetricDef::formula(e)), Err(Error::NoCoordinate(_))));
    }

    #[test]
    fn table_must_be_complete() {
        let set = FiniteSet::new(["p", "q"]).unwrap();
        let entries = vec![(["p".to_string(), "p".to_string(), "p".to_string()], 0.0)];
        match SMetricDef::table(&set, entries) {
            Err(Error::TableMiss(k)) => assert_eq!(k, "p, p, q"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(FiniteSet::new(["a", "a"]).is_err());
        assert!(FiniteSet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn generated_from_table() {
        let set = FiniteSet::new(["a", "b"]).unwrap();
        let d = MetricDef::matrix(&set, &[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let ms = MetricSpace::new(Universe::Finite(set), d).unwrap();
        let sp = ms.generated();
        let (a, b) = (pt("a"), pt("b"));
        assert_eq!(sp.eval_s(&a, &a, &b).unwrap(), 6.0);
        assert_eq!(sp.eval_s(&a, &b, &b).unwrap(), 3.0);
        assert_eq!(sp.eval_s(&b, &b, &b).unwrap(), 0.0);
    }

    #[test]
    fn grid_values_are_decimal() {
        let g = RealGrid::new(-10.0, 10.0, 0.01).unwrap();
        assert_eq!(g.values().len(), 2001);
        assert_eq!(g.values()[0], -10.0);
        assert_eq!(g.values()[1100], 1.0);
        assert_eq!(g.values()[900], -1.0);
        assert_eq!(g.values()[1301], 3.01);
        assert_eq!(*g.values().last().unwrap(), 10.0);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(RealGrid::new(0.0, 1.0, 0.0), Err(Error::Config { ref path, .. }) if path == "space.step"));
        assert!(matches!(RealGrid::new(1.0, 1.0, 0.1), Err(Error::Config { ref path, .. }) if path == "space.lo"));
    }

    #[test]
    fn snapping() {
        let g = RealGrid::new(0.0, 10.0, 1.0).unwrap();
        assert_eq!(g.snap(3.4), Some(3.0));
        assert_eq!(g.snap(10.9), Some(10.0));
        assert_eq!(g.snap(11.0), Some(10.0));
        assert_eq!(g.snap(11.5), None);
        assert_eq!(g.snap(-1.5), None);
    }

    #[test]
    fn resolve_points() {
        let u = Universe::finite(["0", "2", "4", "8"]).unwrap();
        assert_eq!(u.resolve(&Point::Real(4.0)).unwrap(), pt("4"));
        assert!(u.resolve(&Point::Real(5.0)).is_err());
        let g = Universe::grid(0.0, 2.0, 0.5).unwrap();
        assert_eq!(g.resolve(&Point::Real(1.0)).unwrap(), Point::Real(1.0));
        assert_eq!(g.resolve(&Point::Real(1.2)).unwrap(), Point::Real(1.2));
        assert!(g.resolve(&Point::Real(2.5)).is_err());
        assert_eq!(g.resolve(&pt("1.5")).unwrap(), Point::Real(1.5));
    }
}
