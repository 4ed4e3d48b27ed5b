//! Experiment files: the JSON schema and its validation into runnable checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contraction::{ConditionMode, ContractionParams};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::map::MapDef;
use crate::solver::{ApproachSequence, Continuity, LimitOptions};
use crate::space::{s_from_metric, FiniteSet, MetricDef, Point, SMetricDef, Space, Universe, DEFAULT_TOLERANCE};

/// Environment variable consulted for the default tolerance.
pub const TOLERANCE_ENV: &str = "SMETRIC_LAB_TOLERANCE";

const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub space: SpaceSource,
    pub smetric: SMetricSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSource>,
    /// Default sample for every check that takes one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<Point>>,
    #[serde(default)]
    pub checks: Vec<CheckSource>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSource {
    Finite { points: Vec<Point> },
    RealGrid { lo: f64, hi: f64, step: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry<const K: usize> {
    #[serde(with = "serde_arrays")]
    pub at: [Point; K],
    pub value: f64,
}

// serde only derives fixed-size arrays for concrete lengths.
mod serde_arrays {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::space::Point;

    pub fn serialize<S: Serializer, const K: usize>(v: &[Point; K], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const K: usize>(d: D) -> Result<[Point; K], D::Error> {
        let v = Vec::<Point>::deserialize(d)?;
        let n = v.len();
        v.try_into()
            .map_err(|_| D::Error::custom(format!("expected {K} points, found {n}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SMetricSource {
    Formula { expr: String },
    Table { entries: Vec<TableEntry<3>> },
    Generated { metric: MetricSource },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSource {
    Formula { expr: String },
    Table { entries: Vec<TableEntry<2>> },
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSource {
    Formula { expr: String },
    Table { entries: BTreeMap<String, Point> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSource {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSource {
    pub id: String,
    /// Term formula in `n`, evaluated for `n = n_from ..= n_to`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_from: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_to: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Point>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSource {
    Axioms {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    Triangle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    Generated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    PhiGauge {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<Vec<f64>>,
    },
    ConditionI {
        #[serde(default)]
        mode: ConditionMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    ConditionIi {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        eps: Vec<f64>,
        /// Overrides `gauge.delta` for this check.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    Xi {},
    Solve {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<OneOrMany<Point>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
    },
    SolvePower {
        m: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<OneOrMany<Point>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
    },
    Descent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<OneOrMany<Point>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
    },
    FixSet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Vec<Point>>,
    },
    Discontinuity {
        u: Point,
        #[serde(default)]
        sequences: Vec<SequenceSource>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit_tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Continuity>,
    },
    Rho {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    Circle {
        x0: Point,
        /// Defaults to `ρ`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    Zamfirescu {
        x0: Point,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
    FixedCircle {
        x0: Point,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Point>>,
    },
}

/// Which CLI subcommand a check belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Axioms,
    Verify,
    Solve,
    Circle,
}

/// A validated check with every expression parsed and point resolved.
#[derive(Debug, Clone)]
pub enum Check {
    Axioms { sample: Vec<Point> },
    Triangle { sample: Vec<Point> },
    Generated { sample: Vec<Point> },
    PhiGauge { t: Option<Vec<f64>>, sample: Vec<Point> },
    ConditionI { mode: ConditionMode, sample: Vec<Point> },
    ConditionIi { eps: Vec<f64>, delta: Expr, sample: Vec<Point> },
    Xi,
    Solve { x0: Vec<Point>, max_iter: usize },
    SolvePower { m: u32, x0: Vec<Point>, max_iter: usize },
    Descent { x0: Vec<Point>, max_iter: usize },
    FixSet { expect: Option<Vec<Point>> },
    Discontinuity {
        u: Point,
        sequences: Vec<ApproachSequence>,
        opts: LimitOptions,
        expect: Option<Continuity>,
    },
    Rho { expect: Option<f64>, sample: Vec<Point> },
    Circle { x0: Point, r: Option<f64>, sample: Vec<Point> },
    Zamfirescu { x0: Point, a: f64, b: f64, sample: Vec<Point> },
    FixedCircle { x0: Point, a: f64, b: f64, sample: Vec<Point> },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Axioms { .. } => "axioms",
            Check::Triangle { .. } => "triangle",
            Check::Generated { .. } => "generated",
            Check::PhiGauge { .. } => "phi_gauge",
            Check::ConditionI { .. } => "condition_i",
            Check::ConditionIi { .. } => "condition_ii",
            Check::Xi => "xi",
            Check::Solve { .. } => "solve",
            Check::SolvePower { .. } => "solve_power",
            Check::Descent { .. } => "descent",
            Check::FixSet { .. } => "fix_set",
            Check::Discontinuity { .. } => "discontinuity",
            Check::Rho { .. } => "rho",
            Check::Circle { .. } => "circle",
            Check::Zamfirescu { .. } => "zamfirescu",
            Check::FixedCircle { .. } => "fixed_circle",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Check::Axioms { .. } | Check::Triangle { .. } | Check::Generated { .. } => Family::Axioms,
            Check::PhiGauge { .. } | Check::ConditionI { .. } | Check::ConditionIi { .. } | Check::Xi => {
                Family::Verify
            }
            Check::Solve { .. }
            | Check::SolvePower { .. }
            | Check::Descent { .. }
            | Check::FixSet { .. }
            | Check::Discontinuity { .. } => Family::Solve,
            Check::Rho { .. } | Check::Circle { .. } | Check::Zamfirescu { .. } | Check::FixedCircle { .. } => {
                Family::Circle
            }
        }
    }
}

/// A loaded, fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub file: ExperimentFile,
    pub sha256: String,
    pub tolerance: f64,
    pub space: Space,
    pub map: Option<MapDef>,
    pub params: Option<ContractionParams>,
    pub phi: Option<Expr>,
    pub delta: Option<Expr>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Wins over the file's own `tolerance`.
    pub tolerance: Option<f64>,
    /// Used when neither the override nor the file sets a tolerance.
    pub fallback_tolerance: Option<f64>,
}

impl LoadOptions {
    /// Fallback taken from the environment, if set and valid.
    pub fn from_env() -> Result<Self> {
        let fallback_tolerance = match std::env::var(TOLERANCE_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(TOLERANCE_ENV, e.to_string()))?,
            ),
            Err(_) => None,
        };
        Ok(LoadOptions {
            tolerance: None,
            fallback_tolerance,
        })
    }
}

pub fn load_experiment(path: impl AsRef<Path>) -> Result<Experiment> {
    load_experiment_with(path, LoadOptions::default())
}

pub fn load_experiment_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Experiment> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_experiment(&text, opts)
}

pub fn parse_experiment(text: &str, opts: LoadOptions) -> Result<Experiment> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ExperimentFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    let sha256 = Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    resolve(file, sha256, opts)
}

fn expr_at(path: &str, text: &str, vars: &[&str]) -> Result<Expr> {
    parse(text, vars).map_err(|e| Error::config(path, e.to_string()))
}

fn at_path(path: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let path = path.into();
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    }
}

fn label_of(p: &Point) -> String {
    match p {
        Point::Label(l) => l.clone(),
        Point::Real(v) => v.to_string(),
    }
}

fn build_universe(src: &SpaceSource) -> Result<Universe> {
    match src {
        SpaceSource::Finite { points } => Universe::finite(points.iter().map(label_of)).map_err(at_path("space.points")),
        SpaceSource::RealGrid { lo, hi, step } => Universe::grid(*lo, *hi, *step),
    }
}

fn finite_set<'a>(universe: &'a Universe, path: &str) -> Result<&'a FiniteSet> {
    match universe {
        Universe::Finite(s) => Ok(s),
        Universe::Grid(_) => Err(Error::config(path, "tables need a finite space")),
    }
}

fn build_metric(src: &MetricSource, universe: &Universe, path: &str) -> Result<MetricDef> {
    match src {
        MetricSource::Formula { expr } => Ok(MetricDef::formula(expr_at(&format!("{path}.expr"), expr, &["x", "y"])?)),
        MetricSource::Table { entries } => {
            let set = finite_set(universe, path)?;
            MetricDef::table(set, entries.iter().map(|e| (e.at.each_ref().map(label_of), e.value)))
                .map_err(at_path(format!("{path}.entries")))
        }
        MetricSource::Matrix { rows } => {
            let set = finite_set(universe, path)?;
            MetricDef::matrix(set, rows).map_err(at_path(format!("{path}.rows")))
        }
    }
}

/// Evenly spaced subsample (endpoints included) of at most `k` points.
pub fn thin(points: &[Point], k: usize) -> Vec<Point> {
    let n = points.len();
    if n <= k || k < 2 {
        return points.to_vec();
    }
    let mut out: Vec<Point> = Vec::with_capacity(k);
    for i in 0..k {
        let idx = ((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize;
        if out.last() != Some(&points[idx]) {
            out.push(points[idx].clone());
        }
    }
    out
}

fn build_smetric(src: &SMetricSource, universe: &Universe, tol: f64) -> Result<SMetricDef> {
    match src {
        SMetricSource::Formula { expr } => Ok(SMetricDef::formula(expr_at("smetric.expr", expr, &["x", "y", "z"])?)),
        SMetricSource::Table { entries } => {
            let set = finite_set(universe, "smetric")?;
            SMetricDef::table(set, entries.iter().map(|e| (e.at.each_ref().map(label_of), e.value)))
                .map_err(at_path("smetric.entries"))
        }
        SMetricSource::Generated { metric } => {
            let d = build_metric(metric, universe, "smetric.metric")?;
            // Grids are checked on a subsample: the triangle scan is cubic.
            let sample = thin(&universe.points(), 41);
            s_from_metric(d, universe, &sample, tol).map_err(at_path("smetric.metric"))
        }
    }
}

fn build_map(src: &MapSource, universe: &Universe) -> Result<MapDef> {
    let map = match src {
        MapSource::Formula { expr } => MapDef::formula(expr_at("map.expr", expr, &["x"])?),
        MapSource::Table { entries } => MapDef::table(entries.iter().map(|(k, v)| (k.clone(), label_of(v)))),
    };
    map.validate(universe)?;
    Ok(map)
}

struct Ctx<'a> {
    universe: &'a Universe,
    default_sample: Option<Vec<Point>>,
    has_map: bool,
    params: Option<ContractionParams>,
    has_phi: bool,
    delta: Option<&'a Expr>,
}

impl Ctx<'_> {
    fn point(&self, p: &Point, path: &str) -> Result<Point> {
        self.universe.resolve(p).map_err(at_path(path))
    }

    fn points(&self, ps: &[Point], path: &str) -> Result<Vec<Point>> {
        ps.iter()
            .enumerate()
            .map(|(i, p)| self.point(p, &format!("{path}[{i}]")))
            .collect()
    }

    /// Explicit sample, else the file-wide sample, else the universe
    /// thinned to `cap` points on grids.
    fn sample(&self, own: &Option<Vec<Point>>, path: &str, cap: usize) -> Result<Vec<Point>> {
        let pts = match (own, &self.default_sample) {
            (Some(s), _) => self.points(s, &format!("{path}.sample"))?,
            (None, Some(s)) => self.points(s, "sample")?,
            (None, None) if self.universe.is_finite() => self.universe.points(),
            (None, None) => thin(&self.universe.points(), cap),
        };
        if pts.is_empty() {
            return Err(Error::config(format!("{path}.sample"), "sample is empty"));
        }
        Ok(pts)
    }

    fn starts(&self, x0: &Option<OneOrMany<Point>>, path: &str) -> Result<Vec<Point>> {
        match x0 {
            Some(v) => self.points(&v.to_vec(), &format!("{path}.x0")),
            None if self.universe.is_finite() => Ok(self.universe.points()),
            None => Err(Error::config(format!("{path}.x0"), "required on a real grid")),
        }
    }

    fn need_map(&self, path: &str) -> Result<()> {
        if self.has_map {
            Ok(())
        } else {
            Err(Error::config("map", format!("required by {path}")))
        }
    }

    fn need_params(&self, path: &str) -> Result<ContractionParams> {
        self.params
            .ok_or_else(|| Error::config("params", format!("required by {path}")))
    }

    fn ab(&self, a: Option<f64>, b: Option<f64>, path: &str) -> Result<(f64, f64)> {
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                let p = self.need_params(path)?;
                (a.unwrap_or(p.a), b.unwrap_or(p.b))
            }
        };
        for (name, v) in [("a", a), ("b", b)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("{path}.{name}"), format!("{v} must lie in [0, 1)")));
            }
        }
        Ok((a, b))
    }
}

// Subsample caps on real grids, by the cost of each scan.
const CAP_QUADRUPLES: usize = 21;
const CAP_TRIPLES: usize = 41;
const CAP_PAIRS: usize = 201;
const CAP_WINDOW: usize = 41;

fn resolve_check(src: &CheckSource, i: usize, ctx: &Ctx) -> Result<Check> {
    let path = format!("checks[{i}]");
    let p = path.as_str();
    Ok(match src {
        CheckSource::Axioms { sample } => Check::Axioms {
            sample: ctx.sample(sample, p, CAP_QUADRUPLES)?,
        },
        CheckSource::Triangle { sample } => Check::Triangle {
            sample: ctx.sample(sample, p, CAP_TRIPLES)?,
        },
        CheckSource::Generated { sample } => Check::Generated {
            sample: ctx.sample(sample, p, CAP_TRIPLES)?,
        },
        CheckSource::PhiGauge { t } => {
            if !ctx.has_phi {
                return Err(Error::config("gauge.phi", format!("required by {p}")));
            }
            if t.is_none() {
                ctx.need_map(p)?;
                ctx.need_params(p)?;
            }
            Check::PhiGauge {
                t: t.clone(),
                sample: ctx.sample(&None, p, CAP_PAIRS)?,
            }
        }
        CheckSource::ConditionI { mode, sample } => {
            ctx.need_map(p)?;
            ctx.need_params(p)?;
            if *mode != ConditionMode::Strict && !ctx.has_phi {
                return Err(Error::config("gauge.phi", format!("required by {p}")));
            }
            Check::ConditionI {
                mode: *mode,
                sample: ctx.sample(sample, p, CAP_PAIRS)?,
            }
        }
        CheckSource::ConditionIi { eps, delta, sample } => {
            ctx.need_map(p)?;
            ctx.need_params(p)?;
            let delta = match (delta, ctx.delta) {
                (Some(text), _) => expr_at(&format!("{p}.delta"), text, &["eps"])?,
                (None, Some(d)) => d.clone(),
                (None, None) => return Err(Error::config("gauge.delta", format!("required by {p}"))),
            };
            if let Some(bad) = eps.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(Error::config(format!("{p}.eps[{bad}]"), "ε must be positive"));
            }
            Check::ConditionIi {
                eps: eps.clone(),
                delta,
                sample: ctx.sample(sample, p, CAP_WINDOW)?,
            }
        }
        CheckSource::Xi {} => {
            ctx.need_params(p)?;
            Check::Xi
        }
        CheckSource::Solve { x0, max_iter } => {
            ctx.need_map(p)?;
            Check::Solve {
                x0: ctx.starts(x0, p)?,
                max_iter: max_iter.unwrap_or(DEFAULT_MAX_ITER),
            }
        }
        CheckSource::SolvePower { m, x0, max_iter } => {
            ctx.need_map(p)?;
            if *m == 0 {
                return Err(Error::config(format!("{p}.m"), "power must be >= 1"));
            }
            Check::SolvePower {
                m: *m,
                x0: ctx.starts(x0, p)?,
                max_iter: max_iter.unwrap_or(DEFAULT_MAX_ITER),
            }
        }
        CheckSource::Descent { x0, max_iter } => {
            ctx.need_map(p)?;
            ctx.need_params(p)?;
            Check::Descent {
                x0: ctx.starts(x0, p)?,
                max_iter: max_iter.unwrap_or(DEFAULT_MAX_ITER),
            }
        }
        CheckSource::FixSet { expect } => {
            ctx.need_map(p)?;
            Check::FixSet {
                expect: expect
                    .as_ref()
                    .map(|e| ctx.points(e, &format!("{p}.expect")))
                    .transpose()?,
            }
        }
        CheckSource::Discontinuity {
            u,
            sequences,
            window,
            limit_tol,
            expect,
        } => {
            ctx.need_map(p)?;
            ctx.need_params(p)?;
            let defaults = LimitOptions::default();
            let opts = LimitOptions {
                window: window.unwrap_or(defaults.window),
                limit_tol: limit_tol.unwrap_or(defaults.limit_tol),
            };
            if opts.window == 0 {
                return Err(Error::config(format!("{p}.window"), "must be >= 1"));
            }
            if !(opts.limit_tol > 0.0) {
                return Err(Error::config(format!("{p}.limit_tol"), "must be positive"));
            }
            let seqs = sequences
                .iter()
                .enumerate()
                .map(|(j, s)| build_sequence(s, &format!("{p}.sequences[{j}]"), ctx))
                .collect::<Result<Vec<_>>>()?;
            Check::Discontinuity {
                u: ctx.point(u, &format!("{p}.u"))?,
                sequences: seqs,
                opts,
                expect: *expect,
            }
        }
        CheckSource::Rho { expect, sample } => {
            ctx.need_map(p)?;
            Check::Rho {
                expect: *expect,
                sample: ctx.sample(sample, p, usize::MAX)?,
            }
        }
        CheckSource::Circle { x0, r, sample } => {
            if r.is_none() {
                ctx.need_map(p)?;
            }
            if let Some(r) = r {
                if !(*r >= 0.0 && r.is_finite()) {
                    return Err(Error::config(format!("{p}.r"), "radius must be nonnegative"));
                }
            }
            Check::Circle {
                x0: ctx.point(x0, &format!("{p}.x0"))?,
                r: *r,
                sample: ctx.sample(sample, p, usize::MAX)?,
            }
        }
        CheckSource::Zamfirescu { x0, a, b, sample } => {
            ctx.need_map(p)?;
            let (a, b) = ctx.ab(*a, *b, p)?;
            Check::Zamfirescu {
                x0: ctx.point(x0, &format!("{p}.x0"))?,
                a,
                b,
                sample: ctx.sample(sample, p, usize::MAX)?,
            }
        }
        CheckSource::FixedCircle { x0, a, b, sample } => {
            ctx.need_map(p)?;
            let (a, b) = ctx.ab(*a, *b, p)?;
            Check::FixedCircle {
                x0: ctx.point(x0, &format!("{p}.x0"))?,
                a,
                b,
                sample: ctx.sample(sample, p, usize::MAX)?,
            }
        }
    })
}

fn build_sequence(src: &SequenceSource, path: &str, ctx: &Ctx) -> Result<ApproachSequence> {
    let raw: Vec<Point> = match (&src.formula, &src.points) {
        (Some(f), None) => {
            let e = expr_at(&format!("{path}.formula"), f, &["n"])?;
            let from = src.n_from.unwrap_or(1);
            let to = src
                .n_to
                .ok_or_else(|| Error::config(format!("{path}.n_to"), "required with a formula"))?;
            if to < from {
                return Err(Error::config(format!("{path}.n_to"), "must be >= n_from"));
            }
            (from..=to)
                .map(|n| e.eval1(n as f64).map(Point::Real).map_err(Error::from))
                .collect::<Result<_>>()
                .map_err(at_path(format!("{path}.formula")))?
        }
        (None, Some(pts)) => pts.clone(),
        _ => {
            return Err(Error::config(path, "give exactly one of `formula` or `points`"));
        }
    };
    // Finite spaces have no nontrivial approach sequences; terms are not resolved there.
    let points = if ctx.universe.is_finite() {
        raw
    } else {
        ctx.points(&raw, &format!("{path}.points"))?
    };
    Ok(ApproachSequence {
        id: src.id.clone(),
        points,
    })
}

fn resolve(file: ExperimentFile, sha256: String, opts: LoadOptions) -> Result<Experiment> {
    let tolerance = opts
        .tolerance
        .or(file.tolerance)
        .or(opts.fallback_tolerance)
        .unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::config("tolerance", format!("{tolerance} must be finite and nonnegative")));
    }
    let universe = build_universe(&file.space)?;
    let smetric = build_smetric(&file.smetric, &universe, tolerance)?;
    let space = Space::new(universe, smetric).map_err(at_path("smetric"))?;
    let map = file
        .map
        .as_ref()
        .map(|m| build_map(m, space.universe()))
        .transpose()?;
    let params = file
        .params
        .as_ref()
        .map(|p| ContractionParams::new(p.a, p.b, p.c).map_err(at_path("params")))
        .transpose()?;
    let gauge = file.gauge.as_ref();
    let phi = gauge
        .and_then(|g| g.phi.as_deref())
        .map(|t| expr_at("gauge.phi", t, &["t"]))
        .transpose()?;
    let delta = gauge
        .and_then(|g| g.delta.as_deref())
        .map(|t| expr_at("gauge.delta", t, &["eps"]))
        .transpose()?;
    let ctx = Ctx {
        universe: space.universe(),
        default_sample: file.sample.clone(),
        has_map: map.is_some(),
        params,
        has_phi: phi.is_some(),
        delta: delta.as_ref(),
    };
    let checks = file
        .checks
        .iter()
        .enumerate()
        .map(|(i, c)| resolve_check(c, i, &ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        file,
        sha256,
        tolerance,
        space,
        map,
        params,
        phi,
        delta,
        checks,
    })
}

impl Experiment {
    /// Resolves an extra check against this experiment, as if it had been
    /// declared in the file at position `index`.
    pub fn resolve_check(&self, src: &CheckSource, index: usize) -> Result<Check> {
        let ctx = Ctx {
            universe: self.space.universe(),
            default_sample: self.file.sample.clone(),
            has_map: self.map.is_some(),
            params: self.params,
            has_phi: self.phi.is_some(),
            delta: self.delta.as_ref(),
        };
        resolve_check(src, index, &ctx)
    }
}
