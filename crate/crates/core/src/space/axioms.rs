//! Axiom checks and sequence predicates over sampled points.

use serde::Serialize;

use super::{MetricDef, Point, SMetricDef, Space, Universe};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S1Violation {
    pub triple: [Point; 3],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S2Violation {
    pub quadruple: [Point; 4],
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AxiomReport {
    pub s1_violations: Vec<S1Violation>,
    pub s2_violations: Vec<S2Violation>,
    pub checked_triples: usize,
    pub checked_quadruples: usize,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.s1_violations.is_empty() && self.s2_violations.is_empty()
    }
}

fn nonempty(sample: &[Point]) -> Result<()> {
    if sample.is_empty() {
        Err(Error::Empty("sample"))
    } else {
        Ok(())
    }
}

/// All values `S(p_i, p_j, p_k)`, row-major.
fn triple_cube(space: &Space, sample: &[Point]) -> Result<Vec<f64>> {
    let n = sample.len();
    let mut cube = Vec::with_capacity(n * n * n);
    for x in sample {
        for y in sample {
            for z in sample {
                let v = space.eval_s(x, y, z).map_err(|e| Error::at([x, y, z], e))?;
                cube.push(v);
            }
        }
    }
    Ok(cube)
}

/// Checks S1 over every sampled triple and S2 over every sampled quadruple.
///
/// S1 is read as: `S >= 0`, `S <= tol` on the diagonal and `S > tol`
/// elsewhere. S2 is `S(x,y,z) <= S(x,x,a) + S(y,y,a) + S(z,z,a) + tol`.
pub fn check_axioms(space: &Space, sample: &[Point], tol: f64) -> Result<AxiomReport> {
    nonempty(sample)?;
    let n = sample.len();
    let cube = triple_cube(space, sample)?;
    let at = |i: usize, j: usize, k: usize| cube[(i * n + j) * n + k];
    let mut report = AxiomReport::default();

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = at(i, j, k);
                let diagonal = sample[i] == sample[j] && sample[j] == sample[k];
                let bad = v < 0.0 || if diagonal { v > tol } else { v <= tol };
                if bad {
                    report.s1_violations.push(S1Violation {
                        triple: [sample[i].clone(), sample[j].clone(), sample[k].clone()],
                        value: v,
                    });
                }
                report.checked_triples += 1;
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = at(i, j, k);
                for a in 0..n {
                    let rhs = at(i, i, a) + at(j, j, a) + at(k, k, a);
                    if lhs > rhs + tol {
                        report.s2_violations.push(S2Violation {
                            quadruple: [sample[i].clone(), sample[j].clone(), sample[k].clone(), sample[a].clone()],
                            lhs,
                            rhs,
                        });
                    }
                    report.checked_quadruples += 1;
                }
            }
        }
    }
    Ok(report)
}

/// `d_S(x, y) = S(x, x, y) + S(y, y, x)`.
pub fn induced_d_s(space: &Space, x: &Point, y: &Point) -> Result<f64> {
    Ok(space.eval_s(x, x, y)? + space.eval_s(y, y, x)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleViolation {
    pub x: Point,
    pub y: Point,
    pub z: Point,
    /// `d_S(x, y)`
    pub lhs: f64,
    /// `d_S(x, z) + d_S(z, y)`
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TriangleReport {
    pub violations: Vec<TriangleViolation>,
    pub checked_triples: usize,
}

impl TriangleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Triangle inequality for the induced distance `d_S` over sampled triples.
pub fn check_triangle(space: &Space, sample: &[Point], tol: f64) -> Result<TriangleReport> {
    nonempty(sample)?;
    let n = sample.len();
    let mut d = vec![0.0; n * n];
    for (i, x) in sample.iter().enumerate() {
        for (j, y) in sample.iter().enumerate() {
            d[i * n + j] = induced_d_s(space, x, y).map_err(|e| Error::at([x, y], e))?;
        }
    }
    let mut report = TriangleReport::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = d[i * n + j];
                let rhs = d[i * n + k] + d[k * n + j];
                if lhs > rhs + tol {
                    report.violations.push(TriangleViolation {
                        x: sample[i].clone(),
                        y: sample[j].clone(),
                        z: sample[k].clone(),
                        lhs,
                        rhs,
                    });
                }
                report.checked_triples += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationWitness {
    pub triple: [Point; 3],
    /// `S(x, y, z)`
    pub s_value: f64,
    /// `d(x, z) + d(y, z)` for the candidate `d(u, v) = S(u, u, v) / 2`
    pub candidate_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedVerdict {
    pub generated: bool,
    pub witness: Option<GenerationWitness>,
    pub checked_triples: usize,
}

/// Decides whether the S-metric is generated by a metric on the sample.
///
/// A generating metric must satisfy `S(x, x, z) = 2 d(x, z)`, so the only
/// candidate is `d(x, z) = S(x, x, z) / 2`; the check compares
/// `S(x, y, z)` against `d(x, z) + d(y, z)`. Triples of pairwise distinct
/// points are scanned first, so the reported witness is a genuinely
/// three-point one whenever such a mismatch exists.
pub fn generating_metric_check(space: &Space, sample: &[Point], tol: f64) -> Result<GeneratedVerdict> {
    nonempty(sample)?;
    let n = sample.len();
    let cube = triple_cube(space, sample)?;
    let at = |i: usize, j: usize, k: usize| cube[(i * n + j) * n + k];
    let distinct = |i: usize, j: usize, k: usize| {
        sample[i] != sample[j] && sample[j] != sample[k] && sample[i] != sample[k]
    };
    let mut order: Vec<(usize, usize, usize)> = Vec::with_capacity(n * n * n);
    for pass in [true, false] {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if distinct(i, j, k) == pass {
                        order.push((i, j, k));
                    }
                }
            }
        }
    }
    for &(i, j, k) in &order {
        let s = at(i, j, k);
        let candidate = at(i, i, k) / 2.0 + at(j, j, k) / 2.0;
        if (s - candidate).abs() > tol {
            return Ok(GeneratedVerdict {
                generated: false,
                witness: Some(GenerationWitness {
                    triple: [sample[i].clone(), sample[j].clone(), sample[k].clone()],
                    s_value: s,
                    candidate_sum: candidate,
                }),
                checked_triples: order.len(),
            });
        }
    }
    Ok(GeneratedVerdict {
        generated: true,
        witness: None,
        checked_triples: order.len(),
    })
}

/// Checks the metric axioms for `d` over the sample: nonnegativity,
/// `d(x, x) = 0`, `d(x, y) > 0` for `x != y`, symmetry and the triangle
/// inequality, all within `tol`. Returns the first failure.
pub fn check_metric(d: &MetricDef, universe: &Universe, sample: &[Point], tol: f64) -> Result<()> {
    nonempty(sample)?;
    let n = sample.len();
    let mut m = vec![0.0; n * n];
    for (i, x) in sample.iter().enumerate() {
        for (j, y) in sample.iter().enumerate() {
            m[i * n + j] = d.eval(universe, x, y).map_err(|e| Error::at([x, y], e))?;
        }
    }
    let fail = |axiom: &'static str, pts: &[&Point], detail: String| Error::MetricAxiom {
        axiom,
        witness: pts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "),
        detail,
    };
    for i in 0..n {
        for j in 0..n {
            let v = m[i * n + j];
            let (x, y) = (&sample[i], &sample[j]);
            if v < 0.0 {
                return Err(fail("nonnegativity", &[x, y], format!("d = {v}")));
            }
            if x == y && v > tol {
                return Err(fail("identity", &[x, y], format!("d = {v}")));
            }
            if x != y && v <= tol {
                return Err(fail("separation", &[x, y], format!("d = {v}")));
            }
            let back = m[j * n + i];
            if (v - back).abs() > tol {
                return Err(fail("symmetry", &[x, y], format!("d(x,y) = {v}, d(y,x) = {back}")));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = m[i * n + j];
                let rhs = m[i * n + k] + m[k * n + j];
                if lhs > rhs + tol {
                    return Err(fail(
                        "triangle",
                        &[&sample[i], &sample[j], &sample[k]],
                        format!("d(x,y) = {lhs} > d(x,z) + d(z,y) = {rhs}"),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// The S-metric generated by `d`, after checking the metric axioms on the sample.
pub fn s_from_metric(d: MetricDef, universe: &Universe, sample: &[Point], tol: f64) -> Result<SMetricDef> {
    check_metric(&d, universe, sample, tol)?;
    Ok(SMetricDef::Generated(d))
}

fn tail_of(seq: &[Point], tail: usize) -> Result<&[Point]> {
    if seq.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    if tail >= seq.len() {
        return Err(Error::InvalidParams(format!(
            "tail index {tail} leaves no terms in a sequence of length {}",
            seq.len()
        )));
    }
    Ok(&seq[tail..])
}

/// Finite-horizon convergence: `S(x_n, x_n, u) <= tol` for every `n >= tail`.
pub fn s_converges(space: &Space, seq: &[Point], u: &Point, tol: f64, tail: usize) -> Result<bool> {
    for x in tail_of(seq, tail)? {
        if space.eval_s(x, x, u)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finite-horizon Cauchy test: `S(x_n, x_n, x_m) <= tol` for all `n, m >= tail`.
pub fn s_is_cauchy(space: &Space, seq: &[Point], tol: f64, tail: usize) -> Result<bool> {
    let rest = tail_of(seq, tail)?;
    for x in rest {
        for y in rest {
            if space.eval_s(x, x, y)? > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{FiniteSet, MetricSpace};
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn labels(vals: &[f64]) -> Vec<String> {
        vals.iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn skew_line_on_small_grid_passes() {
        let sp = skew_line(&["-2", "-1", "0", "1", "2"]);
        let r = check_axioms(&sp, &sp.points(), TOL).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.checked_triples, 125);
        assert_eq!(r.checked_quadruples, 625);
    }

    #[test]
    fn generated_on_0_2_4_8_passes() {
        let sp = abs_metric(&["0", "2", "4", "8"]).generated();
        assert!(check_axioms(&sp, &sp.points(), TOL).unwrap().passed());
        assert_eq!(sp.eval_s(&pt("0"), &pt("0"), &pt("4")).unwrap(), 8.0);
    }

    #[test]
    fn negated_table_entry_is_reported() {
        let set = FiniteSet::new(["p", "q"]).unwrap();
        let mut entries = Vec::new();
        for x in ["p", "q"] {
            for y in ["p", "q"] {
                for z in ["p", "q"] {
                    let v = if x == y && y == z { 0.0 } else { 1.0 };
                    entries.push(([x.to_string(), y.to_string(), z.to_string()], v));
                }
            }
        }
        let table = SMetricDef::table(&set, entries.clone()).unwrap();
        let sp = Space::new(Universe::Finite(set.clone()), table).unwrap();
        assert!(check_axioms(&sp, &sp.points(), TOL).unwrap().passed());

        entries[1].1 = -1.0; // (p, p, q)
        let sp = Space::new(Universe::Finite(set.clone()), SMetricDef::table(&set, entries).unwrap()).unwrap();
        let r = check_axioms(&sp, &sp.points(), TOL).unwrap();
        assert!(!r.passed());
        assert_eq!(r.s1_violations, vec![S1Violation { triple: [pt("p"), pt("p"), pt("q")], value: -1.0 }]);
    }

    #[test]
    fn zero_off_diagonal_is_s1_violation() {
        let set = FiniteSet::new(["p", "q"]).unwrap();
        let mut entries = Vec::new();
        for x in ["p", "q"] {
            for y in ["p", "q"] {
                for z in ["p", "q"] {
                    entries.push(([x.to_string(), y.to_string(), z.to_string()], 0.0));
                }
            }
        }
        let sp = Space::new(Universe::Finite(set.clone()), SMetricDef::table(&set, entries).unwrap()).unwrap();
        let r = check_axioms(&sp, &sp.points(), TOL).unwrap();
        assert_eq!(r.s1_violations.len(), 6);
    }

    #[test]
    fn s2_violation_detected() {
        // d(x, y) = (x - y)^2 is not a metric; its generated S fails S2.
        let u = Universe::finite(["0", "1", "2"]).unwrap();
        let d = MetricDef::formula(crate::expr::parse("(x-y)*(x-y)", &["x", "y"]).unwrap());
        let sp = Space::new(u.clone(), SMetricDef::Generated(d.clone())).unwrap();
        let r = check_axioms(&sp, &sp.points(), TOL).unwrap();
        assert!(r.s1_violations.is_empty());
        assert!(!r.s2_violations.is_empty());
        let err = s_from_metric(d, &u, &u.points(), TOL).unwrap_err();
        assert!(matches!(err, Error::MetricAxiom { axiom: "triangle", .. }), "{err}");
    }

    #[test]
    fn s_from_metric_examples() {
        let ms = abs_metric(&["0", "1", "2", "4", "8"]);
        let u = ms.universe().clone();
        let s = s_from_metric(ms.metric().clone(), &u, &u.points(), TOL).unwrap();
        let sp = Space::new(u, s).unwrap();
        assert_eq!(sp.eval_s(&pt("0"), &pt("1"), &pt("2")).unwrap(), 3.0);
        assert_eq!(sp.eval_s(&pt("4"), &pt("4"), &pt("4")).unwrap(), 0.0);
        assert_eq!(sp.eval_s(&pt("0"), &pt("0"), &pt("4")).unwrap(), 8.0);
    }

    #[test]
    fn asymmetric_table_metric_rejected() {
        let set = FiniteSet::new(["a", "b"]).unwrap();
        let d = MetricDef::matrix(&set, &[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let u = Universe::Finite(set);
        let err = s_from_metric(d, &u, &u.points(), TOL).unwrap_err();
        assert!(matches!(err, Error::MetricAxiom { axiom: "symmetry", .. }));
    }

    #[test]
    fn induced_distance_examples() {
        let sp = skew_line(&["0", "1", "4"]);
        assert_eq!(induced_d_s(&sp, &pt("0"), &pt("1")).unwrap(), 4.0);
        assert_eq!(induced_d_s(&sp, &pt("4"), &pt("4")).unwrap(), 0.0);
        let sd = abs_metric(&["0", "4"]).generated();
        assert_eq!(induced_d_s(&sd, &pt("0"), &pt("4")).unwrap(), 16.0);
    }

    #[test]
    fn triangle_checks_pass_on_examples() {
        let sp = skew_line(&["-2", "-1", "0", "1", "2"]);
        assert!(check_triangle(&sp, &sp.points(), TOL).unwrap().passed());
        let one = skew_line(&["3"]);
        assert!(check_triangle(&one, &one.points(), TOL).unwrap().passed());
        let sd = abs_metric(&["0", "2", "4", "8"]).generated();
        assert!(check_triangle(&sd, &sd.points(), TOL).unwrap().passed());
    }

    #[test]
    fn triangle_failure_is_listed() {
        // A valid-looking table whose induced distance breaks the triangle inequality.
        let set = FiniteSet::new(["a", "b", "c"]).unwrap();
        let mut entries = Vec::new();
        for x in set.labels() {
            for y in set.labels() {
                for z in set.labels() {
                    let v = if x == y && y == z {
                        0.0
                    } else if (x == "a" && y == "a" && z == "c") || (x == "c" && y == "c" && z == "a") {
                        10.0
                    } else {
                        1.0
                    };
                    entries.push(([x.clone(), y.clone(), z.clone()], v));
                }
            }
        }
        let sp = Space::new(Universe::Finite(set.clone()), SMetricDef::table(&set, entries).unwrap()).unwrap();
        let r = check_triangle(&sp, &sp.points(), TOL).unwrap();
        assert!(!r.passed());
        assert!(r.violations.iter().any(|v| v.x == pt("a") && v.y == pt("c") && v.z == pt("b")));
    }

    #[test]
    fn skew_line_is_not_generated() {
        let sp = skew_line(&["0", "1", "2"]);
        let v = generating_metric_check(&sp, &sp.points(), TOL).unwrap();
        assert!(!v.generated);
        let w = v.witness.unwrap();
        assert_eq!(w.triple, [pt("0"), pt("1"), pt("2")]);
        assert_eq!(w.s_value, 2.0);
        assert_eq!(w.candidate_sum, 3.0);
    }

    #[test]
    fn generated_and_singleton_spaces_are_generated() {
        let sd = abs_metric(&["0", "2", "4", "8"]).generated();
        assert!(generating_metric_check(&sd, &sd.points(), TOL).unwrap().generated);
        let one = skew_line(&["5"]);
        assert!(generating_metric_check(&one, &one.points(), TOL).unwrap().generated);
    }

    #[test]
    fn convergence_predicates() {
        let u = Universe::grid(0.0, 2.0, 0.5).unwrap();
        let sp = Space::new(u, SMetricDef::formula(crate::expr::parse(SKEW_S, &["x", "y", "z"]).unwrap())).unwrap();
        let constant = vec![Point::Real(1.0); 10];
        assert!(s_converges(&sp, &constant, &Point::Real(1.0), 1e-9, 0).unwrap());
        assert!(s_is_cauchy(&sp, &constant, 1e-9, 0).unwrap());

        let seq: Vec<Point> = (1..=1000).map(|n| Point::Real(1.0 + 1.0 / n as f64)).collect();
        assert!(s_converges(&sp, &seq, &Point::Real(1.0), 0.02, 200).unwrap());
        assert!(!s_converges(&sp, &seq, &Point::Real(1.0), 0.02, 50).unwrap());

        let alt: Vec<Point> = (0..100).map(|n| Point::Real(if n % 2 == 0 { 0.0 } else { 2.0 })).collect();
        assert!(!s_is_cauchy(&sp, &alt, 0.1, 50).unwrap());

        assert!(matches!(s_converges(&sp, &[], &Point::Real(1.0), 0.1, 0), Err(Error::Empty(_))));
        assert!(s_converges(&sp, &constant, &Point::Real(1.0), 0.1, 10).is_err());
    }

    /// Random metric on up to 8 points from Euclidean coordinates in the plane.
    fn arb_metric_space() -> impl Strategy<Value = MetricSpace> {
        prop::collection::vec((-50i32..50, -50i32..50), 1..=8).prop_map(|mut pts| {
            pts.sort();
            pts.dedup();
            let set = FiniteSet::new((0..pts.len()).map(|i| format!("p{i}"))).unwrap();
            let rows: Vec<Vec<f64>> = pts
                .iter()
                .map(|a| {
                    pts.iter()
                        .map(|b| (((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64).sqrt())
                        .collect()
                })
                .collect();
            let d = MetricDef::matrix(&set, &rows).unwrap();
            MetricSpace::new(Universe::Finite(set), d).unwrap()
        })
    }

    proptest! {
        #[test]
        fn generated_spaces_pass_axioms(ms in arb_metric_space()) {
            let sp = ms.generated();
            let pts = sp.points();
            prop_assert!(check_axioms(&sp, &pts, TOL).unwrap().passed());
        }

        #[test]
        fn s_xxy_is_symmetric(ms in arb_metric_space()) {
            let sp = ms.generated();
            for x in sp.points() {
                for y in sp.points() {
                    let a = sp.eval_s(&x, &x, &y).unwrap();
                    let b = sp.eval_s(&y, &y, &x).unwrap();
                    prop_assert!((a - b).abs() <= TOL);
                }
            }
        }

        #[test]
        fn generated_round_trip(ms in arb_metric_space()) {
            let sp = ms.generated();
            let pts = sp.points();
            prop_assert!(generating_metric_check(&sp, &pts, TOL).unwrap().generated);
            for x in &pts {
                for y in &pts {
                    let recovered = sp.eval_s(x, x, y).unwrap() / 2.0;
                    prop_assert!((recovered - ms.eval_d(x, y).unwrap()).abs() <= TOL);
                }
            }
        }

        #[test]
        fn induced_distance_symmetric_and_separating(ms in arb_metric_space()) {
            let sp = ms.generated();
            for x in sp.points() {
                for y in sp.points() {
                    let dxy = induced_d_s(&sp, &x, &y).unwrap();
                    prop_assert!((dxy - induced_d_s(&sp, &y, &x).unwrap()).abs() <= TOL);
                    prop_assert_eq!(dxy <= TOL, x == y);
                }
            }
        }

        #[test]
        fn example_formula_passes_axioms_on_random_points(vals in prop::collection::btree_set(-20i32..20, 1..6)) {
            let vals: Vec<f64> = vals.into_iter().map(f64::from).collect();
            let ls = labels(&vals);
            let sp = skew_line(&ls.iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert!(check_axioms(&sp, &sp.points(), TOL).unwrap().passed());
            prop_assert!(check_triangle(&sp, &sp.points(), TOL).unwrap().passed());
        }
    }
}
