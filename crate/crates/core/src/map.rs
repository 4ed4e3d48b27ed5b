//! Self-mappings `T`, given as a label table or a formula in `x`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::space::{Point, Universe};

#[derive(Debug, Clone)]
pub enum MapDef {
    Table(HashMap<String, String>),
    Formula(Expr),
    /// `m`-fold composite of the inner map.
    Power(Box<MapDef>, u32),
}

impl MapDef {
    pub fn table<S: Into<String>>(entries: impl IntoIterator<Item = (S, S)>) -> Self {
        MapDef::Table(entries.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    pub fn formula(expr: Expr) -> Self {
        MapDef::Formula(expr)
    }

    /// The composite `T^m`. `m = 1` returns a plain clone.
    pub fn power(&self, m: u32) -> Self {
        if m == 1 {
            self.clone()
        } else {
            MapDef::Power(Box::new(self.clone()), m)
        }
    }

    /// Checks that a table map is total on a finite universe.
    pub fn validate(&self, universe: &Universe) -> Result<()> {
        match (self, universe) {
            (MapDef::Power(inner, _), _) => inner.validate(universe),
            (MapDef::Table(t), Universe::Finite(s)) => {
                for l in s.labels() {
                    let img = t.get(l).ok_or_else(|| Error::config(format!("map.entries.{l}"), "missing image"))?;
                    if s.index_of(img).is_none() {
                        return Err(Error::config(format!("map.entries.{l}"), format!("image `{img}` is not a point")));
                    }
                }
                Ok(())
            }
            (MapDef::Table(_), Universe::Grid(_)) => Err(Error::config("map", "table maps need a finite universe")),
            (MapDef::Formula(_), _) => Ok(()),
        }
    }

    /// `T(p)` without any universe constraint: for a formula map on a
    /// finite universe the image is the matching label if one exists and a
    /// bare coordinate otherwise.
    pub fn apply(&self, universe: &Universe, p: &Point) -> Result<Point> {
        match self {
            MapDef::Power(inner, m) => inner.apply_pow(universe, p, *m),
            MapDef::Table(t) => {
                let key = match universe.resolve(p)? {
                    Point::Label(l) => l,
                    Point::Real(v) => return Err(Error::UnknownPoint(v.to_string())),
                };
                t.get(&key).map(|l| Point::Label(l.clone())).ok_or(Error::UnknownPoint(key))
            }
            MapDef::Formula(e) => {
                let x = universe.coordinate(p)?;
                let v = e.eval1(x)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { what: format!("T({p})"), value: v });
                }
                Ok(universe.point_at(v))
            }
        }
    }

    /// `T(p)` constrained to the universe. On a grid an image inside
    /// `[lo, hi]` is snapped to the nearest grid value (at most one step
    /// away); an image outside the interval is an error.
    pub fn apply_within(&self, universe: &Universe, p: &Point) -> Result<Point> {
        if let MapDef::Power(inner, m) = self {
            return inner.apply_pow_within(universe, p, *m);
        }
        let img = self.apply(universe, p)?;
        let outside = |img: &Point| Error::OutsideUniverse {
            point: p.to_string(),
            image: img.to_string(),
        };
        match (universe, &img) {
            (Universe::Finite(_), Point::Label(_)) => Ok(img),
            (Universe::Finite(_), Point::Real(_)) => Err(outside(&img)),
            (Universe::Grid(g), Point::Real(v)) => g
                .snap(*v)
                .filter(|_| g.in_interval(*v))
                .map(Point::Real)
                .ok_or_else(|| outside(&img)),
            (Universe::Grid(_), Point::Label(_)) => Err(outside(&img)),
        }
    }

    /// `T^m(p)`, unconstrained.
    pub fn apply_pow(&self, universe: &Universe, p: &Point, m: u32) -> Result<Point> {
        let mut cur = p.clone();
        for _ in 0..m {
            cur = self.apply(universe, &cur)?;
        }
        Ok(cur)
    }

    /// `T^m(p)`, each step constrained to the universe.
    pub fn apply_pow_within(&self, universe: &Universe, p: &Point, m: u32) -> Result<Point> {
        let mut cur = p.clone();
        for _ in 0..m {
            cur = self.apply_within(universe, &cur)?;
        }
        Ok(cur)
    }
}
