//! Axis-aligned box primitives.
//!
//! Boxes are closed sets `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]`. A box with
//! `lo[k] == hi[k]` on some axis is a valid (degenerate) set with empty interior.
//! All membership and intersection tests compare endpoints exactly.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("box must have at least one axis")]
    ZeroDimension,
    #[error("non-finite coordinate on axis {axis}")]
    NonFinite { axis: usize },
    #[error("inverted interval on axis {axis}: lo {lo} > hi {hi}")]
    Inverted { axis: usize, lo: f64, hi: f64 },
    #[error("point {point} lies outside the domain")]
    OutsideDomain { point: Point },
    #[error("reach radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<(), GeometryError> {
    if expected == actual {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, actual })
    }
}

/// A point of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<&[f64]> for Point {
    fn from(c: &[f64]) -> Self {
        Point(c.to_vec())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAabb {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAabb")]
pub struct Aabb {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawAabb> for Aabb {
    type Error = GeometryError;

    fn try_from(raw: RawAabb) -> Result<Self, Self::Error> {
        Aabb::new(raw.lo, raw.hi)
    }
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(GeometryError::NonFinite { axis });
            }
            if l > h {
                return Err(GeometryError::Inverted { axis, lo: l, hi: h });
            }
        }
        Ok(Aabb { lo, hi })
    }

    /// The box `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Aabb::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn degenerate(p: &[f64]) -> Result<Self, GeometryError> {
        Aabb::new(p.to_vec(), p.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Point {
        Point(self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect())
    }

    /// Closed membership. Panics in debug builds on dimension mismatch.
    #[inline]
    pub fn contains(&self, p: &[f64]) -> bool {
        debug_assert_eq!(p.len(), self.dim());
        self.lo.iter().zip(&self.hi).zip(p).all(|((l, h), x)| l <= x && x <= h)
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.dim() == other.dim()
            && self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| b <= a)
    }

    /// True when every axis has strictly positive width.
    pub fn has_interior(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| h > l)
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        euclidean(&self.lo, &self.hi)
    }

    /// All `2^d` corners, in binary order of the axis mask (bit k set means `hi` on axis k).
    pub fn corners(&self) -> impl Iterator<Item = Point> + '_ {
        let d = self.dim();
        (0..1usize << d).map(move |mask| {
            Point(
                (0..d)
                    .map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] })
                    .collect(),
            )
        })
    }

    /// Per-axis clamp of `p` into the box.
    #[inline]
    pub fn clamp(&self, p: &[f64]) -> Point {
        Point(
            p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(&x, (&l, &h))| x.max(l).min(h))
                .collect(),
        )
    }

    /// Euclidean distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&l, &h))| {
                let gap = if x < l {
                    l - x
                } else if x > h {
                    x - h
                } else {
                    0.0
                };
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Bit pattern of the endpoints, usable as an exact hash key.
    pub(crate) fn bits_key(&self) -> Vec<u64> {
        self.lo.iter().chain(&self.hi).map(|v| v.to_bits()).collect()
    }
}

impl fmt::Display for Aabb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.dim() {
            if k > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{}, {}]", self.lo[k], self.hi[k])?;
        }
        Ok(())
    }
}

/// Euclidean distance between two coordinate slices of equal length.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sup-norm distance.
#[inline]
pub fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn box_intersect(a: &Aabb, b: &Aabb) -> Result<Option<Aabb>, GeometryError> {
    check_dim(a.dim(), b.dim())?;
    Ok(intersect_unchecked(a, b))
}

#[inline]
pub(crate) fn intersect_unchecked(a: &Aabb, b: &Aabb) -> Option<Aabb> {
    let mut lo = Vec::with_capacity(a.dim());
    let mut hi = Vec::with_capacity(a.dim());
    for k in 0..a.dim() {
        let l = a.lo[k].max(b.lo[k]);
        let h = a.hi[k].min(b.hi[k]);
        if l > h {
            return None;
        }
        lo.push(l);
        hi.push(h);
    }
    Some(Aabb { lo, hi })
}

/// Closest point of `b` to `p` and its Euclidean distance.
pub fn nearest_point(p: &[f64], b: &Aabb) -> Result<(Point, f64), GeometryError> {
    check_dim(b.dim(), p.len())?;
    let q = b.clamp(p);
    let d = euclidean(p, &q);
    Ok((q, d))
}

/// `sup_{x in from} dist(x, to)`; the supremum of a convex function over a box
/// is attained at one of its corners.
fn directed_hausdorff(from: &Aabb, to: &Aabb) -> f64 {
    from.corners().map(|c| to.distance_to(&c)).fold(0.0, f64::max)
}

/// Exact Hausdorff distance between two boxes under the 2-norm.
pub fn hausdorff_boxes(a: &Aabb, b: &Aabb) -> Result<f64, GeometryError> {
    check_dim(a.dim(), b.dim())?;
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Sup-norm ball of radius `rho` around `x`, clipped to `domain`.
pub fn reach_box(x: &[f64], rho: f64, domain: &Aabb) -> Result<Aabb, GeometryError> {
    check_dim(domain.dim(), x.len())?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(GeometryError::BadRadius(rho));
    }
    if !domain.contains(x) {
        return Err(GeometryError::OutsideDomain { point: Point::from(x) });
    }
    Ok(reach_unchecked(x, rho, domain))
}

#[inline]
pub(crate) fn reach_unchecked(x: &[f64], rho: f64, domain: &Aabb) -> Aabb {
    let lo = x.iter().zip(&domain.lo).map(|(&c, &l)| (c - rho).max(l)).collect();
    let hi = x.iter().zip(&domain.hi).map(|(&c, &h)| (c + rho).min(h)).collect();
    Aabb { lo, hi }
}

/// Movement cost: the Euclidean norm of `x - y`.
pub fn cost(x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
    check_dim(x.len(), y.len())?;
    Ok(euclidean(x, y))
}
