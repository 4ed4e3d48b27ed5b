//! Experiment runs: executes the checks of a loaded experiment in order and
//! assembles a deterministic report.

pub mod config;
mod output;

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::contraction::{
    all_pairs, verify_condition_i, verify_condition_ii, verify_phi_gauge, xi, ConditionMode, ContractionParams,
};
use crate::error::{Error, Result};
use crate::fixed_circle::{
    check_fixed_circle, circle_points, disc_points, membership_tolerance, rho, verify_zamfirescu_x0, CircleSpec,
};
use crate::map::MapDef;
use crate::solver::{check_descent, discontinuity_criterion, fix_set, picard, solve_power, Continuity};
use crate::space::{check_axioms, check_triangle, generating_metric_check, Point};

pub use config::{
    load_experiment, load_experiment_with, parse_experiment, Check, CheckSource, Experiment, ExperimentFile, Family,
    LoadOptions, TOLERANCE_ENV,
};
pub use output::{render_text, to_json};

/// Witness lists in reports are cut to this many entries.
pub const MAX_WITNESSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Aborted,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pass,
    Fail,
    Aborted,
}

impl RunStatus {
    /// Process exit code: 0 all pass, 1 some check failed, 2 aborted.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::Fail => 1,
            RunStatus::Aborted => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub index: usize,
    pub check: &'static str,
    pub verdict: Verdict,
    pub headline: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Echo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub sha256: String,
    pub tolerance: f64,
    pub resolved: ExperimentFile,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub total_ms: f64,
    pub per_check_ms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub experiment: Echo,
    pub status: RunStatus,
    pub checks: Vec<CheckRecord>,
    /// Wall-clock times; the only nondeterministic part of a report.
    pub timing: Timing,
}

impl RunReport {
    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.check == name)
    }
}

struct Outcome {
    verdict: Verdict,
    headline: String,
    summary: Value,
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn capped<T: Serialize>(items: &[T]) -> Value {
    json!({
        "count": items.len(),
        "shown": &items[..items.len().min(MAX_WITNESSES)],
    })
}

fn need<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::config(what, "missing"))
}

/// Runs every check of the experiment in declaration order.
///
/// A failing check is report content. An evaluation error marks that
/// check and every later one as aborted.
pub fn run(exp: &Experiment) -> RunReport {
    let start = Instant::now();
    let mut records = Vec::with_capacity(exp.checks.len());
    let mut per_check_ms = Vec::with_capacity(exp.checks.len());
    let mut aborted = false;
    for (index, check) in exp.checks.iter().enumerate() {
        let t0 = Instant::now();
        let rec = if aborted {
            CheckRecord {
                index,
                check: check.name(),
                verdict: Verdict::Aborted,
                headline: "not run: an earlier check aborted".into(),
                summary: Value::Null,
                error: None,
            }
        } else {
            match run_check(exp, check) {
                Ok(o) => CheckRecord {
                    index,
                    check: check.name(),
                    verdict: o.verdict,
                    headline: o.headline,
                    summary: o.summary,
                    error: None,
                },
                Err(Error::Unsupported(msg)) => CheckRecord {
                    index,
                    check: check.name(),
                    verdict: Verdict::Unsupported,
                    headline: msg,
                    summary: Value::Null,
                    error: None,
                },
                Err(e) => {
                    aborted = true;
                    CheckRecord {
                        index,
                        check: check.name(),
                        verdict: Verdict::Aborted,
                        headline: format!("check `{}` aborted", check.name()),
                        summary: Value::Null,
                        error: Some(e.to_string()),
                    }
                }
            }
        };
        per_check_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        records.push(rec);
    }
    let status = if aborted {
        RunStatus::Aborted
    } else if records.iter().any(|r| r.verdict == Verdict::Fail) {
        RunStatus::Fail
    } else {
        RunStatus::Pass
    };
    RunReport {
        tool: ToolInfo::default(),
        experiment: Echo {
            id: exp.file.id.clone(),
            sha256: exp.sha256.clone(),
            tolerance: exp.tolerance,
            resolved: exp.file.clone(),
        },
        status,
        checks: records,
        timing: Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
            per_check_ms,
        },
    }
}

/// Default `t` grid for the gauge check: every positive realized `M`
/// plus 100 evenly spaced values up to twice the largest.
fn gauge_grid(exp: &Experiment, map: &MapDef, params: &ContractionParams, sample: &[Point]) -> Result<Vec<f64>> {
    let mut ts = Vec::new();
    for (x, y) in all_pairs(sample) {
        let m = crate::contraction::m_z_s(&exp.space, map, params, &x, &y)?;
        if m > 0.0 {
            ts.push(m);
        }
    }
    let top = ts.iter().copied().fold(1.0f64, f64::max) * 2.0;
    ts.extend((1..=100).map(|k| top * k as f64 / 100.0));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts)
}

fn run_check(exp: &Experiment, check: &Check) -> Result<Outcome> {
    let tol = exp.tolerance;
    let space = &exp.space;
    Ok(match check {
        Check::Axioms { sample } => {
            let r = check_axioms(space, sample, tol)?;
            Outcome {
                verdict: pass_if(r.passed()),
                headline: format!(
                    "{} S1 and {} S2 violations over {} points",
                    r.s1_violations.len(),
                    r.s2_violations.len(),
                    sample.len()
                ),
                summary: json!({
                    "sample_size": sample.len(),
                    "checked_triples": r.checked_triples,
                    "checked_quadruples": r.checked_quadruples,
                    "s1_violations": capped(&r.s1_violations),
                    "s2_violations": capped(&r.s2_violations),
                }),
            }
        }
        Check::Triangle { sample } => {
            let r = check_triangle(space, sample, tol)?;
            Outcome {
                verdict: pass_if(r.passed()),
                headline: format!("{} triangle violations for d_S", r.violations.len()),
                summary: json!({
                    "sample_size": sample.len(),
                    "checked_triples": r.checked_triples,
                    "violations": capped(&r.violations),
                }),
            }
        }
        Check::Generated { sample } => {
            let r = generating_metric_check(space, sample, tol)?;
            let headline = match &r.witness {
                None => "consistent with a generating metric".to_string(),
                Some(w) => format!(
                    "not generated: S({}, {}, {}) = {} vs {}",
                    w.triple[0], w.triple[1], w.triple[2], w.s_value, w.candidate_sum
                ),
            };
            Outcome {
                // Informational: either answer is a valid outcome.
                verdict: Verdict::Pass,
                headline,
                summary: serde_json::to_value(&r).expect("serializable"),
            }
        }
        Check::PhiGauge { t, sample } => {
            let phi = need(&exp.phi, "gauge.phi")?;
            let grid = match t {
                Some(t) => t.clone(),
                None => gauge_grid(exp, need(&exp.map, "map")?, need(&exp.params, "params")?, sample)?,
            };
            let v = verify_phi_gauge(phi, &grid, tol)?;
            Outcome {
                verdict: pass_if(v.is_empty()),
                headline: format!("φ(t) < t fails at {} of {} grid values", v.len(), grid.len()),
                summary: json!({ "phi": phi.to_string(), "grid_size": grid.len(), "violations": capped(&v) }),
            }
        }
        Check::ConditionI { mode, sample } => {
            let map = need(&exp.map, "map")?;
            let params = need(&exp.params, "params")?;
            let pairs = all_pairs(sample);
            let phi = if *mode == ConditionMode::Strict { None } else { exp.phi.as_ref() };
            let v = verify_condition_i(space, map, params, phi, &pairs, *mode, tol)?;
            Outcome {
                verdict: pass_if(v.is_empty()),
                headline: format!("{} of {} pairs violate the gauge condition", v.len(), pairs.len()),
                summary: json!({
                    "mode": mode,
                    "phi": phi.map(|p| p.to_string()),
                    "pairs": pairs.len(),
                    "violations": capped(&v),
                }),
            }
        }
        Check::ConditionIi { eps, delta, sample } => {
            let map = need(&exp.map, "map")?;
            let params = need(&exp.params, "params")?;
            let pairs = all_pairs(sample);
            let v = verify_condition_ii(space, map, params, delta, &pairs, eps, tol)?;
            let mut bad_eps: Vec<f64> = v.iter().filter_map(|p| p.epsilon).collect();
            bad_eps.sort_by(f64::total_cmp);
            bad_eps.dedup();
            Outcome {
                verdict: pass_if(v.is_empty()),
                headline: if v.is_empty() {
                    format!("no window violations over {} pairs", pairs.len())
                } else {
                    format!("{} window violations at {} values of ε", v.len(), bad_eps.len())
                },
                summary: json!({
                    "delta": delta.to_string(),
                    "user_eps": eps,
                    "pairs": pairs.len(),
                    "violating_eps": bad_eps,
                    "violations": capped(&v),
                }),
            }
        }
        Check::Xi => {
            let params = need(&exp.params, "params")?;
            let x = xi(params);
            Outcome {
                verdict: pass_if(x < 1.0),
                headline: format!("ξ = {x}"),
                summary: json!({ "params": params, "xi": x }),
            }
        }
        Check::Solve { x0, max_iter } => {
            let map = need(&exp.map, "map")?;
            let mut runs = Vec::new();
            let mut limits: Vec<Point> = Vec::new();
            let mut all = true;
            for p in x0 {
                let t = picard(space, map, p, *max_iter, tol)?;
                match t.converged() {
                    Some(u) if !limits.contains(u) => limits.push(u.clone()),
                    Some(_) => {}
                    None => all = false,
                }
                runs.push(json!({ "x0": p, "steps": t.alphas.len(), "trace": t }));
            }
            Outcome {
                verdict: pass_if(all),
                headline: format!(
                    "{} of {} orbits converged; limits {}",
                    runs.len() - runs.iter().filter(|r| r["trace"]["outcome"]["kind"] != "converged").count(),
                    runs.len(),
                    join(&limits)
                ),
                summary: json!({ "fixed_points": limits, "runs": runs }),
            }
        }
        Check::SolvePower { m, x0, max_iter } => {
            let map = need(&exp.map, "map")?;
            let mut runs = Vec::new();
            let mut all = true;
            for p in x0 {
                let r = solve_power(space, map, *m, p, *max_iter, tol)?;
                all &= r.verified == Some(true);
                runs.push(json!({ "x0": p, "result": r }));
            }
            Outcome {
                verdict: pass_if(all),
                headline: format!(
                    "T^{m}: {} of {} orbits reach a fixed point of T",
                    runs.iter().filter(|r| r["result"]["verified"] == true).count(),
                    runs.len()
                ),
                summary: json!({ "m": m, "runs": runs }),
            }
        }
        Check::Descent { x0, max_iter } => {
            let map = need(&exp.map, "map")?;
            let x = xi(need(&exp.params, "params")?);
            let mut runs = Vec::new();
            let mut total = 0;
            for p in x0 {
                let t = picard(space, map, p, *max_iter, tol)?;
                let v = check_descent(&t, x, tol);
                total += v.len();
                runs.push(json!({ "x0": p, "alphas": t.alphas, "violations": v }));
            }
            Outcome {
                verdict: pass_if(total == 0),
                headline: format!("{total} step-gap descent violations over {} orbits (ξ = {x})", runs.len()),
                summary: json!({ "xi": x, "runs": runs }),
            }
        }
        Check::FixSet { expect } => {
            let map = need(&exp.map, "map")?;
            let fs = fix_set(space, map)?;
            let ok = expect.as_ref().is_none_or(|e| {
                e.len() == fs.len() && e.iter().all(|p| fs.contains(p))
            });
            Outcome {
                verdict: pass_if(ok),
                headline: format!("Fix(T) = {{{}}}", join(&fs)),
                summary: json!({ "fixed_points": fs, "expected": expect }),
            }
        }
        Check::Discontinuity {
            u,
            sequences,
            opts,
            expect,
        } => {
            let map = need(&exp.map, "map")?;
            let params = need(&exp.params, "params")?;
            let v = discontinuity_criterion(space, map, params, u, sequences, *opts, tol)?;
            let ok = expect.is_none_or(|e| e == v.classification);
            let class = match v.classification {
                Continuity::ContinuousAtU => "continuous at u (evidence only)",
                Continuity::DiscontinuousAtU => "discontinuous at u",
                Continuity::Inconclusive => "inconclusive",
            };
            Outcome {
                verdict: pass_if(ok),
                headline: format!("{class}; limsup estimate {}", fmt_opt(v.overall_limsup)),
                summary: json!({
                    "u": u,
                    "window": opts.window,
                    "limit_tol": opts.limit_tol,
                    "expected": expect,
                    "verdict": v,
                }),
            }
        }
        Check::Rho { expect, sample } => {
            let map = need(&exp.map, "map")?;
            let r = rho(space, map, sample, tol)?;
            let ok = expect.is_none_or(|e| (r - e).abs() <= tol);
            Outcome {
                verdict: pass_if(ok),
                headline: format!("ρ = {r} over {} sampled points", sample.len()),
                summary: json!({ "rho": r, "expected": expect, "sample_size": sample.len() }),
            }
        }
        Check::Circle { x0, r, sample } => {
            let radius = match r {
                Some(r) => *r,
                None => rho(space, need(&exp.map, "map")?, sample, tol)?,
            };
            let spec = CircleSpec::new(space, x0, radius)?;
            let tc = membership_tolerance(space, &spec, sample, tol)?;
            let c = circle_points(space, &spec, sample, tc)?;
            let d = disc_points(space, &spec, sample, tc)?;
            Outcome {
                verdict: Verdict::Pass,
                headline: format!("circle of radius {radius} about {x0}: {} points, disc {} points", c.len(), d.len()),
                summary: json!({
                    "x0": x0,
                    "r": radius,
                    "tau_circle": tc,
                    "circle_points": c,
                    "disc_points": capped(&d),
                }),
            }
        }
        Check::Zamfirescu { x0, a, b, sample } => {
            let map = need(&exp.map, "map")?;
            let v = verify_zamfirescu_x0(space, map, *a, *b, x0, sample, tol)?;
            Outcome {
                verdict: pass_if(v.is_empty()),
                headline: format!("{} x0-mapping violations over {} points", v.len(), sample.len()),
                summary: json!({ "x0": x0, "a": a, "b": b, "violations": capped(&v) }),
            }
        }
        Check::FixedCircle { x0, a, b, sample } => {
            let map = need(&exp.map, "map")?;
            let rep = check_fixed_circle(space, map, *a, *b, x0, sample, tol)?;
            let fv = &rep.fixed_verdict;
            let headline = if rep.inconsistency {
                "inconsistency: hypotheses hold but a point moves".to_string()
            } else if !rep.hypotheses_hold() {
                format!(
                    "hypotheses not satisfied (x0-mapping: {}, circle bound: {})",
                    rep.hypotheses.zamfirescu, rep.hypotheses.circle
                )
            } else {
                format!(
                    "ρ = {}; circle fixed: {}, disc fixed: {}",
                    rep.rho, fv.circle_fixed, fv.disc_fixed
                )
            };
            let ok = rep.hypotheses_hold() && fv.circle_fixed && !rep.inconsistency;
            Outcome {
                verdict: pass_if(ok),
                headline,
                summary: json!({
                    "a": a,
                    "b": b,
                    "rho": rep.rho,
                    "tau_circle": rep.tau_circle,
                    "sample_size": rep.sample_size,
                    "x0": rep.x0,
                    "x0_fixed": rep.x0_fixed,
                    "circle_points": rep.circle_points,
                    "disc_points": capped(&rep.disc_points),
                    "hypotheses": rep.hypotheses,
                    "zamfirescu_violations": capped(&rep.zamfirescu_violations),
                    "hypothesis_violations": capped(&rep.hypothesis_violations),
                    "fixed_verdict": {
                        "circle_fixed": fv.circle_fixed,
                        "disc_fixed": fv.disc_fixed,
                        "nonfixed_witnesses": capped(&fv.nonfixed_witnesses),
                    },
                    "inconsistency": rep.inconsistency,
                }),
            }
        }
    })
}

fn join(ps: &[Point]) -> String {
    ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

/// Replaces the checks of `exp` with those of one CLI family.
///
/// Declared checks of the family are kept in order. When there are none,
/// the family's defaults are used; `x0` feeds the solve and circle
/// defaults.
pub fn select_family(exp: &mut Experiment, family: Family, x0: Option<Point>) -> Result<()> {
    let declared: Vec<Check> = exp.checks.iter().filter(|c| c.family() == family).cloned().collect();
    if !declared.is_empty() {
        exp.checks = declared;
        return Ok(());
    }
    let mode = ConditionMode::default();
    let x0_many = x0.clone().map(config::OneOrMany::One);
    let srcs: Vec<CheckSource> = match family {
        Family::Axioms => vec![
            CheckSource::Axioms { sample: None },
            CheckSource::Triangle { sample: None },
            CheckSource::Generated { sample: None },
        ],
        Family::Verify => {
            let mut v = vec![CheckSource::Xi {}];
            if exp.phi.is_some() {
                v.push(CheckSource::ConditionI { mode, sample: None });
            }
            if exp.delta.is_some() {
                v.push(CheckSource::ConditionIi {
                    eps: Vec::new(),
                    delta: None,
                    sample: None,
                });
            }
            v
        }
        Family::Solve => {
            let mut v = vec![CheckSource::Solve {
                x0: x0_many,
                max_iter: None,
            }];
            if exp.space.universe().is_finite() {
                v.push(CheckSource::FixSet { expect: None });
            }
            v
        }
        Family::Circle => {
            let x0 = x0.ok_or_else(|| Error::config("x0", "the circle command needs a center"))?;
            vec![
                CheckSource::Rho {
                    expect: None,
                    sample: None,
                },
                CheckSource::FixedCircle {
                    x0,
                    a: None,
                    b: None,
                    sample: None,
                },
            ]
        }
    };
    exp.checks = srcs
        .iter()
        .enumerate()
        .map(|(i, s)| exp.resolve_check(s, i))
        .collect::<Result<_>>()?;
    Ok(())
}
