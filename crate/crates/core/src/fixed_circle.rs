//! Fixed circles and discs: the radius `ρ`, membership scans, the
//! Zamfirescu-type x0-mapping condition and the combined fixed-circle check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::MapDef;
use crate::space::{Point, Space};

/// Circle `{x : S(x,x,x0) = r}` / disc `{x : S(x,x,x0) <= r}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleSpec {
    pub x0: Point,
    pub r: f64,
}

impl CircleSpec {
    pub fn new(space: &Space, x0: &Point, r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!("radius {r} must be a finite nonnegative number")));
        }
        let x0 = space.universe().resolve(x0)?;
        Ok(CircleSpec { x0, r })
    }
}

fn nonempty(sample: &[Point]) -> Result<()> {
    if sample.is_empty() {
        Err(Error::Empty("sample"))
    } else {
        Ok(())
    }
}

/// `S(Tx, Tx, x)`.
fn displacement(space: &Space, map: &MapDef, x: &Point) -> Result<f64> {
    let tx = map.apply(space.universe(), x)?;
    space.s2(&tx, x).map_err(|e| Error::at([x], e))
}

/// `inf S(Tx,Tx,x)` over sampled points with `S(Tx,Tx,x) > tol`, or 0 when
/// every sampled point is fixed.
pub fn rho(space: &Space, map: &MapDef, sample: &[Point], tol: f64) -> Result<f64> {
    nonempty(sample)?;
    let mut best: Option<f64> = None;
    for x in sample {
        let d = displacement(space, map, x)?;
        if d > tol {
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    Ok(best.unwrap_or(0.0))
}

/// Membership tolerance for `S(x,x,x0) = r`.
///
/// On a grid this is half the largest jump of `f(x) = S(x,x,x0)` between
/// neighbouring sample points whose values bracket `r`, and never less
/// than `tol`. On a finite universe it is `tol`.
pub fn membership_tolerance(space: &Space, spec: &CircleSpec, sample: &[Point], tol: f64) -> Result<f64> {
    if space.universe().is_finite() {
        return Ok(tol);
    }
    let mut vals = Vec::with_capacity(sample.len());
    for x in sample {
        let c = space.universe().coordinate(x)?;
        vals.push((c, space.s2(x, &spec.x0)?));
    }
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut half_jump = 0.0f64;
    for w in vals.windows(2) {
        let (f1, f2) = (w[0].1, w[1].1);
        if f1.min(f2) <= spec.r && spec.r <= f1.max(f2) {
            half_jump = half_jump.max((f2 - f1).abs() / 2.0);
        }
    }
    Ok(half_jump.max(tol))
}

pub fn circle_points(space: &Space, spec: &CircleSpec, sample: &[Point], tol_circle: f64) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for x in sample {
        if (space.s2(x, &spec.x0)? - spec.r).abs() <= tol_circle {
            out.push(x.clone());
        }
    }
    Ok(out)
}

pub fn disc_points(space: &Space, spec: &CircleSpec, sample: &[Point], tol_circle: f64) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for x in sample {
        if space.s2(x, &spec.x0)? <= spec.r + tol_circle {
            out.push(x.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZamfirescuViolation {
    pub x: Point,
    /// `S(Tx, Tx, x)`
    pub lhs: f64,
    /// `max{ a S(x,x,x0), b/2 [S(Tx0,Tx0,x) + S(Tx,Tx,x0)] }`
    pub rhs: f64,
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidParams(format!("a = {a} must lie in [0, 1)")));
    }
    if !(0.0..1.0).contains(&b) {
        return Err(Error::InvalidParams(format!("b = {b} must lie in [0, 1)")));
    }
    Ok(())
}

/// Tests the x0-mapping inequality at every sampled non-fixed point.
pub fn verify_zamfirescu_x0(
    space: &Space,
    map: &MapDef,
    a: f64,
    b: f64,
    x0: &Point,
    sample: &[Point],
    tol: f64,
) -> Result<Vec<ZamfirescuViolation>> {
    check_ab(a, b)?;
    let u = space.universe();
    let x0 = u.resolve(x0)?;
    let tx0 = map.apply(u, &x0)?;
    let mut out = Vec::new();
    for x in sample {
        let tx = map.apply(u, x)?;
        let lhs = space.s2(&tx, x)?;
        if lhs <= tol {
            continue;
        }
        let rhs = (a * space.s2(x, &x0)?).max(b / 2.0 * (space.s2(&tx0, x)? + space.s2(&tx, &x0)?));
        if lhs > rhs + tol {
            out.push(ZamfirescuViolation { x: x.clone(), lhs, rhs });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisViolation {
    pub x: Point,
    /// `S(Tx, Tx, x0)`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedVerdict {
    pub circle_fixed: bool,
    pub disc_fixed: bool,
    /// Disc points (hence also circle points) with `S(Tx,Tx,x) > tol`.
    pub nonfixed_witnesses: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypotheses {
    pub zamfirescu: bool,
    /// `S(Tx,Tx,x0) <= ρ` on every circle point, up to the membership tolerance.
    pub circle: bool,
    /// `S(Tx,Tx,x0) <= ρ` on every disc point.
    pub disc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleReport {
    pub x0: Point,
    pub rho: f64,
    pub tau_circle: f64,
    pub sample_size: usize,
    pub circle_points: Vec<Point>,
    pub disc_points: Vec<Point>,
    pub zamfirescu_violations: Vec<ZamfirescuViolation>,
    pub hypothesis_violations: Vec<HypothesisViolation>,
    pub hypotheses: Hypotheses,
    pub x0_fixed: bool,
    pub fixed_verdict: FixedVerdict,
    /// Every hypothesis holds yet a circle or disc point moves.
    pub inconsistency: bool,
}

impl CircleReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.zamfirescu && self.hypotheses.circle
    }
}

/// Computes `ρ`, the circle and disc of radius `ρ` about `x0`, checks the
/// hypotheses of the fixed-circle and fixed-disc results and tests
/// `Tx = x` directly on every circle and disc point.
pub fn check_fixed_circle(
    space: &Space,
    map: &MapDef,
    a: f64,
    b: f64,
    x0: &Point,
    sample: &[Point],
    tol: f64,
) -> Result<CircleReport> {
    nonempty(sample)?;
    check_ab(a, b)?;
    let u = space.universe();
    let r = rho(space, map, sample, tol)?;
    let spec = CircleSpec::new(space, x0, r)?;
    let tau_circle = membership_tolerance(space, &spec, sample, tol)?;
    let circle = circle_points(space, &spec, sample, tau_circle)?;
    let disc = disc_points(space, &spec, sample, tau_circle)?;
    let zamfirescu_violations = verify_zamfirescu_x0(space, map, a, b, &spec.x0, sample, tol)?;

    let mut hypothesis_violations = Vec::new();
    let mut circle_hyp = true;
    let mut nonfixed_witnesses = Vec::new();
    let mut circle_fixed = true;
    for x in &disc {
        let tx = map.apply(u, x)?;
        let value = space.s2(&tx, &spec.x0)?;
        let on_circle = circle.contains(x);
        if value > r + tau_circle {
            circle_hyp &= !on_circle;
            hypothesis_violations.push(HypothesisViolation { x: x.clone(), value });
        }
        if space.s2(&tx, x)? > tol {
            circle_fixed &= !on_circle;
            nonfixed_witnesses.push(x.clone());
        }
    }
    let hypotheses = Hypotheses {
        zamfirescu: zamfirescu_violations.is_empty(),
        circle: circle_hyp,
        disc: hypothesis_violations.is_empty(),
    };
    let fixed_verdict = FixedVerdict {
        circle_fixed,
        disc_fixed: nonfixed_witnesses.is_empty(),
        nonfixed_witnesses,
    };
    let x0_fixed = displacement(space, map, &spec.x0)? <= tol;
    let inconsistency = hypotheses.zamfirescu
        && ((hypotheses.circle && !fixed_verdict.circle_fixed) || (hypotheses.disc && !fixed_verdict.disc_fixed));
    Ok(CircleReport {
        x0: spec.x0,
        rho: r,
        tau_circle,
        sample_size: sample.len(),
        circle_points: circle,
        disc_points: disc,
        zamfirescu_violations,
        hypothesis_violations,
        hypotheses,
        x0_fixed,
        fixed_verdict,
        inconsistency,
    })
}
