//! Picard iteration, step-gap monitoring, exhaustive fixed-point search and
//! the discontinuity criterion at a fixed point.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::contraction::{m_z_s, ContractionParams};
use crate::error::{Error, Result};
use crate::map::MapDef;
use crate::space::s_converges;
use crate::space::{Point, Space, Universe};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Converged { u: Point, steps: usize },
    MaxIterReached,
    CycleDetected { period: usize },
}

/// Orbit `x_0, x_1 = T x_0, ...` with step gaps `α_n = S(x_n, x_n, x_{n+1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub points: Vec<Point>,
    pub alphas: Vec<f64>,
    pub outcome: Outcome,
}

impl IterationTrace {
    pub fn converged(&self) -> Option<&Point> {
        match &self.outcome {
            Outcome::Converged { u, .. } => Some(u),
            _ => None,
        }
    }
}

fn point_key(p: &Point) -> String {
    match p {
        Point::Label(l) => format!("l:{l}"),
        Point::Real(v) => format!("r:{:x}", v.to_bits()),
    }
}

/// Iterates `x_{n+1} = T x_n` from `x0`.
///
/// Stops when the raw residual `S(x_n, x_n, T x_n)` drops to `tol`, when
/// the orbit revisits a point, or after `max_iter` applications of `T`.
/// On a grid the recorded images are snapped, so a snapped orbit that
/// stalls with a positive raw residual shows up as a cycle of period 1.
pub fn picard(space: &Space, map: &MapDef, x0: &Point, max_iter: usize, tol: f64) -> Result<IterationTrace> {
    if max_iter == 0 {
        return Err(Error::InvalidParams("max_iter must be >= 1".into()));
    }
    let u = space.universe();
    let x0 = u.resolve(x0)?;
    if !u.contains(&x0) {
        return Err(Error::UnknownPoint(x0.to_string()));
    }
    let mut points = vec![x0.clone()];
    let mut alphas = Vec::new();
    let mut seen = HashMap::from([(point_key(&x0), 0usize)]);
    let mut cur = x0;
    for n in 0..max_iter {
        let next = map.apply_within(u, &cur)?;
        let raw = map.apply(u, &cur)?;
        let alpha = space.s2(&cur, &next)?;
        let residual = space.s2(&cur, &raw)?;
        points.push(next.clone());
        alphas.push(alpha);
        if residual <= tol {
            return Ok(IterationTrace {
                points,
                alphas,
                outcome: Outcome::Converged { u: cur, steps: n },
            });
        }
        if let Some(&j) = seen.get(&point_key(&next)) {
            return Ok(IterationTrace {
                points,
                alphas,
                outcome: Outcome::CycleDetected { period: n + 1 - j },
            });
        }
        seen.insert(point_key(&next), n + 1);
        cur = next;
    }
    Ok(IterationTrace {
        points,
        alphas,
        outcome: Outcome::MaxIterReached,
    })
}

/// Every `x` with `Tx = x`, by exhaustive scan of a finite universe.
pub fn fix_set(space: &Space, map: &MapDef) -> Result<Vec<Point>> {
    let u = space.universe();
    if !u.is_finite() {
        return Err(Error::Unsupported("fix_set needs a finite universe".into()));
    }
    let mut out = Vec::new();
    for x in u.points() {
        if map.apply(u, &x).map_err(|e| Error::at([&x], e))? == x {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSolve {
    pub m: u32,
    pub trace: IterationTrace,
    /// `S(Tu, Tu, u) <= tol` for the limit `u` of the `T^m` orbit.
    pub verified: Option<bool>,
}

/// Picard on `T^m`; on convergence to `u` also tests whether `Tu = u`.
pub fn solve_power(
    space: &Space,
    map: &MapDef,
    m: u32,
    x0: &Point,
    max_iter: usize,
    tol: f64,
) -> Result<PowerSolve> {
    if m == 0 {
        return Err(Error::InvalidParams("power m must be >= 1".into()));
    }
    let trace = picard(space, &map.power(m), x0, max_iter, tol)?;
    let verified = match trace.converged() {
        Some(u) => {
            let tu = map.apply(space.universe(), u)?;
            Some(space.s2(&tu, u)? <= tol)
        }
        None => None,
    };
    Ok(PowerSolve { m, trace, verified })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentViolation {
    pub step: usize,
    pub alpha_prev: f64,
    pub alpha_next: f64,
    pub rule: &'static str,
}

/// Checks `α_{n+1} <= α_n - tol` (or `α_{n+1} <= tol`) and
/// `α_{n+1} <= ξ α_n + tol` along a trace.
pub fn check_descent(trace: &IterationTrace, xi: f64, tol: f64) -> Vec<DescentViolation> {
    let mut out = Vec::new();
    for (n, w) in trace.alphas.windows(2).enumerate() {
        let (prev, next) = (w[0], w[1]);
        if prev <= tol {
            continue;
        }
        if !(next <= prev - tol || next <= tol) {
            out.push(DescentViolation {
                step: n + 1,
                alpha_prev: prev,
                alpha_next: next,
                rule: "strict_decrease",
            });
        }
        if next > xi * prev + tol {
            out.push(DescentViolation {
                step: n + 1,
                alpha_prev: prev,
                alpha_next: next,
                rule: "geometric",
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ApproachSequence {
    pub id: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Copy)]
pub struct LimitOptions {
    /// Number of final terms averaged for the limit estimate.
    pub window: usize,
    /// Convergence tolerance for `x_n -> u` and threshold for a nonzero limit.
    pub limit_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            window: 50,
            limit_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceLimit {
    pub id: String,
    pub estimate: f64,
    /// max - min of `M(x_n, u)` over the window.
    pub spread: f64,
    pub conclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    ContinuousAtU,
    DiscontinuousAtU,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscontinuityVerdict {
    pub per_sequence_limits: Vec<SequenceLimit>,
    /// Largest conclusive estimate.
    pub overall_limsup: Option<f64>,
    pub classification: Continuity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Estimates `lim M(x_n, u)` along each sequence and classifies `T` at `u`.
///
/// A nonzero limit along any sequence certifies discontinuity; limits that
/// all vanish are evidence of continuity, not proof.
pub fn discontinuity_criterion(
    space: &Space,
    map: &MapDef,
    params: &ContractionParams,
    u: &Point,
    sequences: &[ApproachSequence],
    opts: LimitOptions,
    tol: f64,
) -> Result<DiscontinuityVerdict> {
    if opts.window == 0 {
        return Err(Error::InvalidParams("limit window must be >= 1".into()));
    }
    let uni = space.universe();
    let u = uni.resolve(u)?;
    let tu = map.apply(uni, &u)?;
    if space.s2(&u, &tu)? > tol {
        return Err(Error::InvalidParams(format!("`{u}` is not a fixed point")));
    }
    if let Universe::Finite(_) = uni {
        return Ok(DiscontinuityVerdict {
            per_sequence_limits: Vec::new(),
            overall_limsup: None,
            classification: Continuity::Inconclusive,
            note: Some("no nontrivial approach sequences in a finite space".into()),
        });
    }
    if sequences.is_empty() {
        return Err(Error::Empty("sequences"));
    }
    let mut limits = Vec::new();
    for seq in sequences {
        let pts = seq
            .points
            .iter()
            .map(|p| uni.resolve(p))
            .collect::<Result<Vec<_>>>()?;
        if pts.len() < opts.window {
            return Err(Error::InvalidParams(format!(
                "sequence `{}` has {} terms, fewer than the window {}",
                seq.id,
                pts.len(),
                opts.window
            )));
        }
        let tail = pts.len() - opts.window;
        if !s_converges(space, &pts, &u, opts.limit_tol, tail)? {
            return Err(Error::NotConvergent {
                id: seq.id.clone(),
                target: u.to_string(),
            });
        }
        let ms = pts[tail..]
            .iter()
            .map(|x| m_z_s(space, map, params, x, &u).map_err(|e| Error::at([x, &u], e)))
            .collect::<Result<Vec<_>>>()?;
        let estimate = ms.iter().sum::<f64>() / ms.len() as f64;
        let hi = ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ms.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = hi - lo;
        limits.push(SequenceLimit {
            id: seq.id.clone(),
            estimate,
            spread,
            conclusive: spread <= 10.0 * opts.limit_tol,
        });
    }
    let overall = limits
        .iter()
        .filter(|l| l.conclusive)
        .map(|l| l.estimate)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let classification = match overall {
        Some(v) if v > opts.limit_tol => Continuity::DiscontinuousAtU,
        Some(_) if limits.iter().all(|l| l.conclusive) => Continuity::ContinuousAtU,
        _ => Continuity::Inconclusive,
    };
    Ok(DiscontinuityVerdict {
        per_sequence_limits: limits,
        overall_limsup: overall,
        classification,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contraction::{all_pairs, verify_condition_i, xi, ConditionMode};
    use crate::expr::parse;
    use crate::space::testing::*;
    use crate::space::SMetricDef;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;
    const STEP_X: &[&str] = &["0", "2", "4", "8"];

    fn step_map() -> MapDef {
        MapDef::formula(parse("piecewise(x <= 4 : 4, else : 2)", &["x"]).unwrap())
    }

    fn identity() -> MapDef {
        MapDef::formula(parse("x", &["x"]).unwrap())
    }

    fn usual_s(lo: f64, hi: f64, step: f64) -> Space {
        Space::new(
            Universe::grid(lo, hi, step).unwrap(),
            SMetricDef::formula(parse("abs(x-z)+abs(y-z)", &["x", "y", "z"]).unwrap()),
        )
        .unwrap()
    }

    fn unit_step() -> MapDef {
        MapDef::formula(parse("piecewise(x <= 1 : 1, else : 0)", &["x"]).unwrap())
    }

    fn approach(id: &str, f: impl Fn(f64) -> f64) -> ApproachSequence {
        ApproachSequence {
            id: id.into(),
            points: (1..=1000).map(|n| Point::Real(f(n as f64))).collect(),
        }
    }

    #[test]
    fn picard_on_example() {
        let sp = skew_line(STEP_X);
        let t = picard(&sp, &step_map(), &pt("0"), 50, TOL).unwrap();
        assert_eq!(t.points, vec![pt("0"), pt("4"), pt("4")]);
        assert_eq!(t.alphas, vec![8.0, 0.0]);
        assert_eq!(t.outcome, Outcome::Converged { u: pt("4"), steps: 1 });
        for x0 in ["0", "2", "8"] {
            let t = picard(&sp, &step_map(), &pt(x0), 50, TOL).unwrap();
            match t.outcome {
                Outcome::Converged { u, steps } => {
                    assert_eq!(u, pt("4"));
                    assert!(steps <= 2);
                }
                o => panic!("{o:?}"),
            }
        }
    }

    #[test]
    fn picard_from_fixed_point() {
        let sp = skew_line(STEP_X);
        let t = picard(&sp, &step_map(), &pt("4"), 50, TOL).unwrap();
        assert_eq!(t.outcome, Outcome::Converged { u: pt("4"), steps: 0 });
        assert_eq!(t.alphas, vec![0.0]);
    }

    #[test]
    fn picard_leaves_the_grid() {
        let sp = usual_s(0.0, 10.0, 1.0);
        let shift = MapDef::formula(parse("x + 1", &["x"]).unwrap());
        let r = picard(&sp, &shift, &Point::Real(0.0), 100, TOL);
        assert!(matches!(r, Err(Error::OutsideUniverse { .. })));
    }

    #[test]
    fn picard_snapped_stall_is_a_cycle() {
        let sp = usual_s(0.0, 10.0, 1.0);
        let nudge = MapDef::formula(parse("x + 0.25", &["x"]).unwrap());
        let t = picard(&sp, &nudge, &Point::Real(3.0), 100, TOL).unwrap();
        assert_eq!(t.outcome, Outcome::CycleDetected { period: 1 });
    }

    #[test]
    fn picard_detects_cycles_and_limits() {
        let sp = skew_line(&["0", "1"]);
        let swap = MapDef::table([("0", "1"), ("1", "0")]);
        let t = picard(&sp, &swap, &pt("0"), 50, TOL).unwrap();
        assert_eq!(t.outcome, Outcome::CycleDetected { period: 2 });
        assert_eq!(t.points, vec![pt("0"), pt("1"), pt("0")]);
        let t = picard(&sp, &swap, &pt("0"), 1, TOL).unwrap();
        assert_eq!(t.outcome, Outcome::MaxIterReached);
        assert!(picard(&sp, &swap, &pt("0"), 0, TOL).is_err());
        assert!(picard(&sp, &swap, &pt("7"), 5, TOL).is_err());
    }

    #[test]
    fn fix_sets() {
        assert_eq!(fix_set(&skew_line(STEP_X), &step_map()).unwrap(), vec![pt("4")]);
        let sp = skew_line(&["-4", "-2", "0", "2", "4"]);
        assert_eq!(fix_set(&sp, &identity()).unwrap(), sp.points());
        let t33 = MapDef::formula(parse("piecewise(abs(x) <= 3 : x, else : x + 1)", &["x"]).unwrap());
        assert_eq!(fix_set(&sp, &t33).unwrap(), vec![pt("-2"), pt("0"), pt("2")]);
        assert!(matches!(fix_set(&usual_s(0.0, 1.0, 0.5), &identity()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn power_variant() {
        let sp = skew_line(STEP_X);
        let one = solve_power(&sp, &step_map(), 1, &pt("8"), 50, TOL).unwrap();
        assert_eq!(one.trace, picard(&sp, &step_map(), &pt("8"), 50, TOL).unwrap());
        let two = solve_power(&sp, &step_map(), 2, &pt("8"), 50, TOL).unwrap();
        assert_eq!(two.trace.converged(), Some(&pt("4")));
        assert_eq!(two.verified, Some(true));

        let sp = skew_line(&["0", "1"]);
        let swap = MapDef::table([("0", "1"), ("1", "0")]);
        let r = solve_power(&sp, &swap, 2, &pt("0"), 50, TOL).unwrap();
        assert_eq!(r.trace.outcome, Outcome::Converged { u: pt("0"), steps: 0 });
        assert_eq!(r.verified, Some(false));
        assert!(solve_power(&sp, &swap, 0, &pt("0"), 50, TOL).is_err());
    }

    #[test]
    fn descent_on_example() {
        let sp = skew_line(STEP_X);
        let p = ContractionParams::new(0.75, 0.0, 0.0).unwrap();
        for x0 in sp.points() {
            let t = picard(&sp, &step_map(), &x0, 50, TOL).unwrap();
            assert!(check_descent(&t, xi(&p), TOL).is_empty());
        }
        let bad = IterationTrace {
            points: vec![],
            alphas: vec![1.0, 1.0, 0.9],
            outcome: Outcome::MaxIterReached,
        };
        let v = check_descent(&bad, 0.5, TOL);
        assert_eq!(v.iter().filter(|d| d.rule == "strict_decrease").count(), 1);
        assert_eq!(v.iter().filter(|d| d.rule == "geometric").count(), 2);
    }

    #[test]
    fn discontinuity_from_the_right() {
        let sp = usual_s(0.0, 2.0, 0.01);
        let p = ContractionParams::new(0.0, 0.5, 0.0).unwrap();
        let seqs = [approach("right", |n| 1.0 + 1.0 / n), approach("left", |n| 1.0 - 1.0 / n)];
        let v = discontinuity_criterion(&sp, &unit_step(), &p, &Point::Real(1.0), &seqs, LimitOptions::default(), TOL)
            .unwrap();
        assert!((v.per_sequence_limits[0].estimate - 0.5).abs() <= 0.01);
        assert!(v.per_sequence_limits[1].estimate <= 0.01);
        assert_eq!(v.classification, Continuity::DiscontinuousAtU);
        assert_eq!(v.overall_limsup, Some(v.per_sequence_limits[0].estimate));
    }

    #[test]
    fn identity_is_continuous() {
        let sp = usual_s(0.0, 2.0, 0.01);
        let p = ContractionParams::new(0.3, 0.5, 0.2).unwrap();
        let seqs = [approach("right", |n| 0.5 + 1.0 / n), approach("left", |n| 0.5 - 0.4 / n)];
        let v = discontinuity_criterion(&sp, &identity(), &p, &Point::Real(0.5), &seqs, LimitOptions::default(), TOL)
            .unwrap();
        assert_eq!(v.classification, Continuity::ContinuousAtU);
    }

    #[test]
    fn discontinuity_rejections() {
        let sp = usual_s(0.0, 2.0, 0.01);
        let p = ContractionParams::new(0.0, 0.5, 0.0).unwrap();
        let off = [approach("off", |n| 1.5 + 0.4 / n)];
        let r = discontinuity_criterion(&sp, &unit_step(), &p, &Point::Real(1.0), &off, LimitOptions::default(), TOL);
        assert!(matches!(r, Err(Error::NotConvergent { id, .. }) if id == "off"));
        let seqs = [approach("right", |n| 1.0 + 1.0 / n)];
        let r = discontinuity_criterion(&sp, &unit_step(), &p, &Point::Real(0.5), &seqs, LimitOptions::default(), TOL);
        assert!(matches!(r, Err(Error::InvalidParams(_))));

        let fin = skew_line(STEP_X);
        let v = discontinuity_criterion(&fin, &step_map(), &p, &pt("4"), &[], LimitOptions::default(), TOL).unwrap();
        assert_eq!(v.classification, Continuity::Inconclusive);
        assert!(v.note.is_some());
    }

    #[test]
    fn uniqueness_cross_check() {
        let sp = skew_line(STEP_X);
        let p = ContractionParams::new(0.75, 0.0, 0.0).unwrap();
        let phi = parse("piecewise(t >= 6 : 5, else : t / 2)", &["t"]).unwrap();
        let pairs = all_pairs(&sp.points());
        assert!(verify_condition_i(&sp, &step_map(), &p, Some(&phi), &pairs, ConditionMode::Full, TOL)
            .unwrap()
            .is_empty());
        let fix = fix_set(&sp, &step_map()).unwrap();
        assert_eq!(fix.len(), 1);
        for x0 in sp.points() {
            let t = picard(&sp, &step_map(), &x0, 50, TOL).unwrap();
            assert_eq!(t.converged(), Some(&fix[0]));
        }
    }

    fn arb_table_map() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0usize..5, 5)
    }

    proptest! {
        #[test]
        fn picard_trace_invariants(images in arb_table_map(), start in 0usize..5) {
            let labels = ["0", "1", "2", "3", "4"];
            let sp = skew_line(&labels);
            let map = MapDef::table(labels.iter().zip(&images).map(|(k, &v)| (*k, labels[v])));
            let x0 = pt(labels[start]);
            let t = picard(&sp, &map, &x0, 20, TOL).unwrap();
            prop_assert_eq!(&t, &picard(&sp, &map, &x0, 20, TOL).unwrap());
            prop_assert_eq!(t.alphas.len() + 1, t.points.len());
            for n in 0..t.alphas.len() {
                prop_assert_eq!(&t.points[n + 1], &map.apply(sp.universe(), &t.points[n]).unwrap());
                prop_assert_eq!(t.alphas[n], sp.s2(&t.points[n], &t.points[n + 1]).unwrap());
            }
            if let Some(u) = t.converged() {
                prop_assert!(sp.s2(u, &map.apply(sp.universe(), u).unwrap()).unwrap() <= TOL);
                prop_assert!(fix_set(&sp, &map).unwrap().contains(u));
            } else {
                let cycled = matches!(t.outcome, Outcome::CycleDetected { .. });
                prop_assert!(cycled);
            }
        }
    }
}
