//! Zamfirescu-type contraction quantities and the two contractive
//! conditions: the gauge inequality `S(Tx,Tx,Ty) <= φ(M(x,y))` and the
//! ε-δ window condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::map::MapDef;
use crate::space::{MetricSpace, Point, Space};

/// Weights of the three terms of `M`: `a, b ∈ [0, 1)`, `c ∈ [0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ContractionParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..1.0).contains(&v);
        if !in_unit(a) {
            return Err(Error::InvalidParams(format!("a = {a} must lie in [0, 1)")));
        }
        if !in_unit(b) {
            return Err(Error::InvalidParams(format!("b = {b} must lie in [0, 1)")));
        }
        if !(0.0..=0.5).contains(&c) {
            return Err(Error::InvalidParams(format!("c = {c} must lie in [0, 1/2]")));
        }
        Ok(ContractionParams { a, b, c })
    }

    fn combine(&self, xy: f64, x_tx: f64, y_ty: f64, x_ty: f64, y_tx: f64) -> f64 {
        let a_term = self.a * xy;
        let b_term = self.b / 2.0 * (x_tx + y_ty);
        let c_term = self.c / 2.0 * (x_ty + y_tx);
        a_term.max(b_term).max(c_term)
    }
}

/// The gauge `φ` (over `t`) and window width `δ` (over `eps`).
#[derive(Debug, Clone)]
pub struct GaugeSpec {
    pub phi: Option<Expr>,
    pub delta: Option<Expr>,
}

/// `M^S(x, y) = max{ a S(x,x,y), b/2 [S(x,x,Tx) + S(y,y,Ty)], c/2 [S(x,x,Ty) + S(y,y,Tx)] }`.
pub fn m_z_s(space: &Space, map: &MapDef, params: &ContractionParams, x: &Point, y: &Point) -> Result<f64> {
    let u = space.universe();
    let tx = map.apply(u, x)?;
    let ty = map.apply(u, y)?;
    Ok(params.combine(
        space.s2(x, y)?,
        space.s2(x, &tx)?,
        space.s2(y, &ty)?,
        space.s2(x, &ty)?,
        space.s2(y, &tx)?,
    ))
}

/// The metric form `M(x, y)` with `d` in place of `S(·,·,·)`.
pub fn m_z_metric(ms: &MetricSpace, map: &MapDef, params: &ContractionParams, x: &Point, y: &Point) -> Result<f64> {
    let u = ms.universe();
    let tx = map.apply(u, x)?;
    let ty = map.apply(u, y)?;
    Ok(params.combine(
        ms.eval_d(x, y)?,
        ms.eval_d(x, &tx)?,
        ms.eval_d(y, &ty)?,
        ms.eval_d(x, &ty)?,
        ms.eval_d(y, &tx)?,
    ))
}

/// `M^{S*}(x, y)`: `M^S` with `T` replaced by `T^m`.
pub fn m_z_s_star(
    space: &Space,
    map: &MapDef,
    m: u32,
    params: &ContractionParams,
    x: &Point,
    y: &Point,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParams("power m must be >= 1".into()));
    }
    m_z_s(space, &map.power(m), params, x, y)
}

/// Step-gap contraction factor `ξ = max{ a, b/(2-b), c/(2-2c) }`.
pub fn xi(params: &ContractionParams) -> f64 {
    let ContractionParams { a, b, c } = *params;
    a.max(b / (2.0 - b)).max(c / (2.0 - 2.0 * c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeViolation {
    pub t: f64,
    pub phi: f64,
}

/// Checks `φ(t) <= t - tol` at every grid point.
pub fn verify_phi_gauge(phi: &Expr, t_grid: &[f64], tol: f64) -> Result<Vec<GaugeViolation>> {
    let mut out = Vec::new();
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::InvalidParams(format!("gauge grid value {t} is not positive")));
        }
        let v = phi.eval1(t)?;
        if !(v <= t - tol) {
            out.push(GaugeViolation { t, phi: v });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionMode {
    /// `S(Tx,Tx,Ty) <= φ(M(x,y))`
    #[default]
    Full,
    /// `S(Tx,Tx,Ty) <= φ(S(x,x,y))`
    Simple,
    /// `S(Tx,Tx,Ty) < M(x,y)` whenever `M(x,y) > 0`
    Strict,
}

impl ConditionMode {
    fn context(self) -> &'static str {
        match self {
            ConditionMode::Full => "condition_i/full",
            ConditionMode::Simple => "condition_i/simple",
            ConditionMode::Strict => "condition_i/strict",
        }
    }
}

/// Outcome of one contractive-condition test on a pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairVerdict {
    pub x: Point,
    pub y: Point,
    pub m_value: f64,
    /// `S(Tx, Tx, Ty)`
    pub s_t_value: f64,
    /// The right-hand side the image distance was compared against.
    pub bound: f64,
    pub ok: bool,
    pub context: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Every ordered pair over the sample.
pub fn all_pairs(sample: &[Point]) -> Vec<(Point, Point)> {
    sample
        .iter()
        .flat_map(|x| sample.iter().map(move |y| (x.clone(), y.clone())))
        .collect()
}

struct PairValues {
    m: f64,
    s_t: f64,
    s_xy: f64,
}

fn pair_values(space: &Space, map: &MapDef, params: &ContractionParams, x: &Point, y: &Point) -> Result<PairValues> {
    let u = space.universe();
    let tx = map.apply(u, x)?;
    let ty = map.apply(u, y)?;
    let s_xy = space.s2(x, y)?;
    let m = params.combine(s_xy, space.s2(x, &tx)?, space.s2(y, &ty)?, space.s2(x, &ty)?, space.s2(y, &tx)?);
    let s_t = space.s2(&tx, &ty)?;
    Ok(PairValues { m, s_t, s_xy })
}

fn nonempty_pairs(pairs: &[(Point, Point)]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::Empty("pairs"))
    } else {
        Ok(())
    }
}

/// Checks the gauge condition on every pair and returns the violations.
pub fn verify_condition_i(
    space: &Space,
    map: &MapDef,
    params: &ContractionParams,
    phi: Option<&Expr>,
    pairs: &[(Point, Point)],
    mode: ConditionMode,
    tol: f64,
) -> Result<Vec<PairVerdict>> {
    nonempty_pairs(pairs)?;
    let need_phi = || phi.ok_or_else(|| Error::config("gauge.phi", "condition (i) in this mode needs φ"));
    let mut out = Vec::new();
    for (x, y) in pairs {
        let v = pair_values(space, map, params, x, y).map_err(|e| Error::at([x, y], e))?;
        let (bound, ok) = match mode {
            ConditionMode::Full => {
                let b = need_phi()?.eval1(v.m).map_err(|e| Error::at([x, y], e.into()))?;
                (b, v.s_t <= b + tol)
            }
            ConditionMode::Simple => {
                let b = need_phi()?.eval1(v.s_xy).map_err(|e| Error::at([x, y], e.into()))?;
                (b, v.s_t <= b + tol)
            }
            ConditionMode::Strict => (v.m - tol, v.m <= tol || v.s_t <= v.m - tol),
        };
        if !ok {
            out.push(PairVerdict {
                x: x.clone(),
                y: y.clone(),
                m_value: v.m,
                s_t_value: v.s_t,
                bound,
                ok,
                context: mode.context(),
                epsilon: None,
            });
        }
    }
    Ok(out)
}

/// Candidate ε values for the window condition.
///
/// Anchors are the distinct realized values `r_i`; the grid is
/// `{0.9 r_i, r_i - 10 tol}` plus midpoints of consecutive anchors plus the
/// user's values, keeping positives only. A pair can only fail at an ε
/// below both its `M` and its image distance, so both kinds of realized
/// value are used as anchors.
pub fn epsilon_grid(realized: &[f64], user: &[f64], tol: f64) -> Vec<f64> {
    let mut anchors: Vec<f64> = realized.iter().copied().filter(|v| v.is_finite()).collect();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    let mut grid: Vec<f64> = Vec::with_capacity(anchors.len() * 3 + user.len());
    for r in &anchors {
        grid.push(0.9 * r);
        grid.push(r - 10.0 * tol.max(f64::EPSILON * r));
    }
    for w in anchors.windows(2) {
        grid.push((w[0] + w[1]) / 2.0);
    }
    grid.extend_from_slice(user);
    grid.retain(|e| *e > 0.0 && e.is_finite());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Checks the ε-δ condition: for each grid ε and each pair with
/// `ε < M(x,y) < ε + δ(ε)` (exact comparisons), `S(Tx,Tx,Ty) <= ε + tol`.
pub fn verify_condition_ii(
    space: &Space,
    map: &MapDef,
    params: &ContractionParams,
    delta: &Expr,
    pairs: &[(Point, Point)],
    user_eps: &[f64],
    tol: f64,
) -> Result<Vec<PairVerdict>> {
    nonempty_pairs(pairs)?;
    let mut values = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        values.push(pair_values(space, map, params, x, y).map_err(|e| Error::at([x, y], e))?);
    }
    let realized: Vec<f64> = values.iter().flat_map(|v| [v.m, v.s_t]).collect();
    let grid = epsilon_grid(&realized, user_eps, tol);

    let mut out = Vec::new();
    for eps in grid {
        let d = delta.eval1(eps)?;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::config("gauge.delta", format!("δ({eps}) = {d} is not positive")));
        }
        for ((x, y), v) in pairs.iter().zip(&values) {
            let in_window = eps < v.m && v.m < eps + d;
            if in_window && v.s_t > eps + tol {
                out.push(PairVerdict {
                    x: x.clone(),
                    y: y.clone(),
                    m_value: v.m,
                    s_t_value: v.s_t,
                    bound: eps,
                    ok: false,
                    context: "condition_ii",
                    epsilon: Some(eps),
                });
            }
        }
    }
    Ok(out)
}
