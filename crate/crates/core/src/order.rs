//! Componentwise partial order on `R^r` and order intervals.
//!
//! `x <= y` iff `x_i <= y_i` for every `i`; `x < y` iff `x <= y` and
//! `x != y`; `x << y` iff `x_i < y_i` for every `i`. The `*_tol` variants
//! treat coordinates within `tol` of each other as equal, which is what
//! flow-propagated points need.

use std::ops::{Add, Index, Mul, Sub};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// A state in `R^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("point must have at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(Point(coords))
    }

    /// Builds a point without validation. Callers guarantee finiteness.
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point(self.0.iter().map(|c| c * s).collect())
    }

    /// `self + s * dir`.
    pub fn offset(&self, s: f64, dir: &Point) -> Point {
        Point(self.0.iter().zip(&dir.0).map(|(a, d)| a + s * d).collect())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        self.scaled(s)
    }
}

/// `x <= y` componentwise.
pub fn leq(x: &Point, y: &Point) -> Result<bool> {
    leq_tol(x, y, 0.0)
}

pub fn leq_tol(x: &Point, y: &Point, tol: f64) -> Result<bool> {
    ensure_dim(x.dim(), y.dim())?;
    Ok(x.0.iter().zip(&y.0).all(|(a, b)| *a <= *b + tol))
}

/// `x < y`: `x <= y` and `x != y`.
pub fn strictly_less(x: &Point, y: &Point) -> Result<bool> {
    strictly_less_tol(x, y, 0.0)
}

pub fn strictly_less_tol(x: &Point, y: &Point, tol: f64) -> Result<bool> {
    Ok(leq_tol(x, y, tol)? && !approx_eq(x, y, tol))
}

/// `x << y`: strict inequality in every coordinate.
pub fn strongly_less(x: &Point, y: &Point) -> Result<bool> {
    ensure_dim(x.dim(), y.dim())?;
    Ok(x.0.iter().zip(&y.0).all(|(a, b)| a < b))
}

/// Strong order robust to flow error: every coordinate gap exceeds `tol`.
pub fn strongly_less_tol(x: &Point, y: &Point, tol: f64) -> Result<bool> {
    ensure_dim(x.dim(), y.dim())?;
    Ok(x.0.iter().zip(&y.0).all(|(a, b)| *a + tol < *b))
}

fn approx_eq(x: &Point, y: &Point, tol: f64) -> bool {
    x.0.iter().zip(&y.0).all(|(a, b)| (a - b).abs() <= tol)
}

/// True iff no two members of `set` are related by `<`.
pub fn is_unordered_set(set: &[Point], tol: f64) -> Result<bool> {
    if set.is_empty() {
        return Err(Error::InvalidInput("unordered-set test needs a nonempty set".into()));
    }
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            if strictly_less_tol(a, b, tol)? || strictly_less_tol(b, a, tol)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `[lo, hi]` (closed) or `[[lo, hi]]` (open) order interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderInterval {
    lo: Point,
    hi: Point,
    open: bool,
}

impl OrderInterval {
    pub fn closed(lo: Point, hi: Point) -> Result<Self> {
        if !leq(&lo, &hi)? {
            return Err(Error::InvalidInput("closed order interval needs lo <= hi".into()));
        }
        Ok(OrderInterval { lo, hi, open: false })
    }

    pub fn open(lo: Point, hi: Point) -> Result<Self> {
        if !strongly_less(&lo, &hi)? {
            return Err(Error::InvalidInput("open order interval needs lo << hi".into()));
        }
        Ok(OrderInterval { lo, hi, open: true })
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        if self.open {
            Ok(strongly_less(&self.lo, x)? && strongly_less(x, &self.hi)?)
        } else {
            Ok(leq(&self.lo, x)? && leq(x, &self.hi)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn leq_examples() {
        assert!(leq(&p(&[1.0, 2.0]), &p(&[1.0, 3.0])).unwrap());
        assert!(leq(&p(&[1.0, 2.0]), &p(&[1.0, 2.0])).unwrap());
        assert!(!leq(&p(&[2.0, 1.0]), &p(&[1.0, 2.0])).unwrap());
    }

    #[test]
    fn strict_and_strong_examples() {
        assert!(strictly_less(&p(&[1.0, 2.0]), &p(&[1.0, 3.0])).unwrap());
        assert!(!strongly_less(&p(&[1.0, 2.0]), &p(&[1.0, 3.0])).unwrap());
        assert!(strongly_less(&p(&[0.0, 0.0]), &p(&[1.0, 1.0])).unwrap());
        assert!(!strictly_less(&p(&[1.0, 2.0]), &p(&[1.0, 2.0])).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = leq(&p(&[1.0]), &p(&[1.0, 2.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
        assert!(strongly_less(&p(&[1.0]), &p(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn unordered_sets() {
        assert!(is_unordered_set(&[p(&[0.0, 1.0]), p(&[1.0, 0.0])], 0.0).unwrap());
        assert!(!is_unordered_set(&[p(&[0.0, 0.0]), p(&[1.0, 1.0])], 0.0).unwrap());
        assert!(is_unordered_set(&[p(&[2.0, 3.0])], 0.0).unwrap());
        assert!(is_unordered_set(&[], 0.0).is_err());
    }

    #[test]
    fn tolerance_absorbs_flow_error() {
        let a = p(&[1.0, 2.0]);
        let b = p(&[1.0 + 1e-12, 2.0 - 1e-12]);
        assert!(!leq(&a, &b).unwrap());
        assert!(leq_tol(&a, &b, 1e-9).unwrap());
        assert!(!strictly_less_tol(&a, &b, 1e-9).unwrap());
    }

    #[test]
    fn intervals() {
        let iv = OrderInterval::open(p(&[0.0, 0.0]), p(&[1.0, 1.0])).unwrap();
        assert!(iv.contains(&p(&[0.5, 0.5])).unwrap());
        assert!(!iv.contains(&p(&[0.0, 0.5])).unwrap());
        let closed = OrderInterval::closed(p(&[0.0, 0.0]), p(&[0.0, 1.0])).unwrap();
        assert!(closed.contains(&p(&[0.0, 0.5])).unwrap());
        assert!(OrderInterval::open(p(&[0.0, 0.0]), p(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn points_reject_non_finite() {
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert!(serde_json::from_str::<Point>("[1.0, 2.0]").is_ok());
    }

    fn coords3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3i32..=3, 3).prop_map(|v| v.into_iter().map(f64::from).collect())
    }

    proptest! {
        #[test]
        fn partial_order_laws(a in coords3(), b in coords3(), c in coords3()) {
            let (x, y, z) = (p(&a), p(&b), p(&c));
            prop_assert!(leq(&x, &x).unwrap());
            if leq(&x, &y).unwrap() && leq(&y, &x).unwrap() {
                prop_assert_eq!(&x, &y);
            }
            if leq(&x, &y).unwrap() && leq(&y, &z).unwrap() {
                prop_assert!(leq(&x, &z).unwrap());
            }
        }

        #[test]
        fn strong_implies_strict_implies_leq(
            a in prop::collection::vec(-5.0f64..5.0, 2),
            b in prop::collection::vec(-5.0f64..5.0, 2),
        ) {
            let (x, y) = (p(&a), p(&b));
            if strongly_less(&x, &y).unwrap() {
                prop_assert!(strictly_less(&x, &y).unwrap());
            }
            if strictly_less(&x, &y).unwrap() {
                prop_assert!(leq(&x, &y).unwrap());
            }
        }
    }
}
