//! Simplex primitives: contents, edge statistics, heights, polar and elevation
//! sines, and the discrete Menger-type curvatures.
//!
//! A simplex is an ordered tuple `(x_0, ..., x_n)` of points in `R^D`. The
//! zeroth vertex is distinguished: edge statistics "at x_0" and the polar sine
//! at a vertex are measured from it.
//!
//! Contents are computed from an orthogonalization of the edge vectors
//! (modified Gram-Schmidt with one re-orthogonalization pass) rather than by
//! forming the Gram matrix. The product of the residual norms equals the
//! square root of the Gram determinant, but degenerate simplices come out at
//! the level of rounding in the coordinates instead of its square root.
//!
//! The slice-based functions in [`kernel`] accept any `&[P]` with
//! `P: AsRef<[f64]>` so hot loops can run without building a [`Tuple`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("index {index} out of range for tuple of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("coordinate 0 cannot be replaced")]
    ReplaceBase,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector has no coordinates")]
    EmptyVector,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("tuple needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(Degeneracy),
}

/// Why a quantity was reported through a zero convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    /// Two vertices coincide (the tuple is not in `S`).
    CoincidingVertices,
    /// Edge vectors are linearly dependent.
    RankDeficient,
    /// More edges than ambient dimensions; content vanishes by rank.
    ExcessDimension,
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Degeneracy::CoincidingVertices => "coinciding vertices",
            Degeneracy::RankDeficient => "rank-deficient edges",
            Degeneracy::ExcessDimension => "more edges than ambient dimensions",
        };
        f.write_str(s)
    }
}

/// A value together with the degeneracy that forced a zero convention, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub flag: Option<Degeneracy>,
}

impl Flagged {
    fn ok(value: f64) -> Self {
        Flagged { value, flag: None }
    }

    fn zero(flag: Degeneracy) -> Self {
        Flagged {
            value: 0.0,
            flag: Some(flag),
        }
    }
}

/// Numerical tolerances shared by the geometric routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Threshold on the scale-free Gram determinant (squared polar sine of
    /// the edges at `x_0`) below which a simplex counts as degenerate.
    pub degeneracy_eps: f64,
    /// Relative tolerance for algebraic identities (product formula, the two
    /// curvature forms, symmetrization).
    pub identity_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            degeneracy_eps: 1e-12,
            identity_rtol: 1e-9,
        }
    }
}

/// A point of `R^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::EmptyVector);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        dist(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<&[f64]> for Vector {
    /// Panics on empty or non-finite input; use [`Vector::new`] for checked
    /// construction.
    fn from(c: &[f64]) -> Self {
        Vector::new(c.to_vec()).expect("invalid vector")
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(c: [f64; N]) -> Self {
        Vector::new(c.to_vec()).expect("invalid vector")
    }
}

/// An ordered tuple of points; an `(n+1)`-tuple represents an `n`-simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tuple {
    points: Vec<Vector>,
}

impl Tuple {
    pub fn new(points: Vec<Vector>) -> Result<Self, GeometryError> {
        let first = points.first().ok_or(GeometryError::TooFewPoints {
            needed: 1,
            got: 0,
        })?;
        let dim = first.dim();
        for p in &points {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        Ok(Tuple { points })
    }

    /// Builds a tuple from raw coordinate arrays; panics on invalid input.
    pub fn from_coords<const N: usize>(coords: &[[f64; N]]) -> Self {
        Tuple::new(coords.iter().map(|c| Vector::from(*c)).collect()).expect("invalid tuple")
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The simplex order `n` of an `(n+1)`-tuple.
    pub fn order(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn ambient_dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn vertex(&self, i: usize) -> &Vector {
        &self.points[i]
    }

    /// `X(i)`: the tuple with coordinate `i` removed.
    pub fn remove_coordinate(&self, i: usize) -> Result<Tuple, GeometryError> {
        if i >= self.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        if self.len() == 1 {
            return Err(GeometryError::TooFewPoints { needed: 2, got: 1 });
        }
        let mut points = self.points.clone();
        points.remove(i);
        Ok(Tuple { points })
    }

    /// `X(y, i)`: the tuple with coordinate `i >= 1` replaced by `y`.
    pub fn replace_coordinate(&self, y: &Vector, i: usize) -> Result<Tuple, GeometryError> {
        if i == 0 {
            return Err(GeometryError::ReplaceBase);
        }
        if i >= self.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        if y.dim() != self.ambient_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: y.dim(),
            });
        }
        let mut points = self.points.clone();
        points[i] = y.clone();
        Ok(Tuple { points })
    }

    /// Swaps coordinates `a` and `b`.
    pub fn transpose(&self, a: usize, b: usize) -> Result<Tuple, GeometryError> {
        for idx in [a, b] {
            if idx >= self.len() {
                return Err(GeometryError::IndexOutOfRange {
                    index: idx,
                    len: self.len(),
                });
            }
        }
        let mut points = self.points.clone();
        points.swap(a, b);
        Ok(Tuple { points })
    }

    /// `M_n(X)`: the `n`-content, `sqrt(det <x_i - x_0, x_j - x_0>)`.
    ///
    /// Flags `ExcessDimension` when `n > D` (content is zero by rank).
    pub fn gram_content(&self) -> Flagged {
        let n = self.order();
        if n > self.ambient_dim() {
            return Flagged::zero(Degeneracy::ExcessDimension);
        }
        let v = kernel::content(&self.points, 0);
        if v == 0.0 {
            if kernel::min_edge(&self.points) == 0.0 {
                Flagged::zero(Degeneracy::CoincidingVertices)
            } else {
                Flagged::zero(Degeneracy::RankDeficient)
            }
        } else {
            Flagged::ok(v)
        }
    }

    pub fn diam(&self) -> f64 {
        kernel::diam(&self.points)
    }

    pub fn min_edge(&self) -> f64 {
        kernel::min_edge(&self.points)
    }

    pub fn max_at0(&self) -> Result<f64, GeometryError> {
        let (_, max) = self.edge_range_at0()?;
        Ok(max)
    }

    pub fn min_at0(&self) -> Result<f64, GeometryError> {
        let (min, _) = self.edge_range_at0()?;
        Ok(min)
    }

    /// `min_at0 / max_at0`, in `(0, 1]` for simplices without a vertex at `x_0`.
    pub fn scale_at0(&self) -> Result<f64, GeometryError> {
        let (min, max) = self.edge_range_at0()?;
        Ok(min / max)
    }

    fn edge_range_at0(&self) -> Result<(f64, f64), GeometryError> {
        if self.len() < 2 {
            return Err(GeometryError::TooFewPoints {
                needed: 2,
                got: self.len(),
            });
        }
        let (min, max) = kernel::edge_range_at0(&self.points);
        if max == 0.0 {
            return Err(GeometryError::Degenerate(Degeneracy::CoincidingVertices));
        }
        Ok((min, max))
    }

    /// `h_{x_i}(X)`: distance from `x_i` to the affine hull of `X(i)`.
    pub fn height(&self, i: usize) -> Result<f64, GeometryError> {
        if i >= self.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        if self.len() < 2 {
            return Err(GeometryError::TooFewPoints { needed: 2, got: 1 });
        }
        Ok(kernel::height(&self.points, i))
    }

    /// `h(X)`: the minimal height.
    pub fn min_height(&self) -> f64 {
        (0..self.len())
            .map(|i| kernel::height(&self.points, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Polar sine at vertex `i`; zero when any edge at `x_i` vanishes or the
    /// simplex is degenerate.
    pub fn polar_sine(&self, i: usize) -> Result<f64, GeometryError> {
        if i >= self.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(kernel::polar_sine(&self.points, i))
    }

    /// Sine of the elevation angle of `x_i - x_0` over the face `X(i)`.
    pub fn elevation_sine(&self, i: usize) -> Result<f64, GeometryError> {
        if i == 0 || i >= self.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let edge = dist(self.points[i].coords(), self.points[0].coords());
        if edge == 0.0 {
            return Err(GeometryError::Degenerate(Degeneracy::CoincidingVertices));
        }
        Ok((kernel::height(&self.points, i) / edge).clamp(0.0, 1.0))
    }

    /// Classical Menger curvature: the inverse circumradius of three points.
    pub fn menger_curvature_1d(&self) -> Result<Flagged, GeometryError> {
        if self.len() != 3 {
            return Err(GeometryError::TooFewPoints {
                needed: 3,
                got: self.len(),
            });
        }
        let p = &self.points;
        let a = p[1].distance(&p[2]);
        let b = p[0].distance(&p[2]);
        let c = p[0].distance(&p[1]);
        if a == 0.0 || b == 0.0 || c == 0.0 {
            return Ok(Flagged::zero(Degeneracy::CoincidingVertices));
        }
        // 4 * area / (abc), with M_2 = 2 * area.
        let m2 = kernel::content(p, 0);
        Ok(Flagged::ok(2.0 * m2 / (a * b * c)))
    }

    /// The discrete Menger-type curvature `c_d(X)` of a `(d+2)`-tuple, in
    /// polar-sine form.
    pub fn discrete_curvature(&self) -> Result<Flagged, GeometryError> {
        self.check_curvature_len()?;
        if self.diam() == 0.0 || self.min_edge() == 0.0 {
            return Ok(Flagged::zero(Degeneracy::CoincidingVertices));
        }
        let c2 = kernel::curvature_sq(&self.points);
        if c2 == 0.0 {
            let flag = if self.order() > self.ambient_dim() {
                Degeneracy::ExcessDimension
            } else {
                Degeneracy::RankDeficient
            };
            return Ok(Flagged::zero(flag));
        }
        Ok(Flagged::ok(c2.sqrt()))
    }

    /// `c_d^2(X)` from the volume form (content squared times the sum of the
    /// inverse squared edge products). Kept as an independent route for
    /// cross-checking the polar-sine form.
    pub fn discrete_curvature_sq_volume_form(&self) -> Result<f64, GeometryError> {
        self.check_curvature_len()?;
        Ok(kernel::curvature_sq_volume_form(&self.points))
    }

    /// Direct generalization of the Menger curvature: content over the
    /// product of all edge lengths taken over ordered pairs `i != j`.
    pub fn direct_menger(&self) -> Result<Flagged, GeometryError> {
        self.check_curvature_len()?;
        let mut denom = 1.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j {
                    denom *= self.points[i].distance(&self.points[j]);
                }
            }
        }
        if denom == 0.0 {
            return Ok(Flagged::zero(Degeneracy::CoincidingVertices));
        }
        let content = self.gram_content();
        if content.flag.is_some() {
            return Ok(content);
        }
        Ok(Flagged::ok(content.value / denom))
    }

    /// True iff the edges at `x_0` are linearly independent, measured by the
    /// scale-free Gram determinant exceeding `tol`.
    pub fn is_nondegenerate(&self, tol: f64) -> bool {
        if self.order() > self.ambient_dim() || self.len() < 2 {
            return false;
        }
        let s = kernel::polar_sine(&self.points, 0);
        s * s > tol
    }

    fn check_curvature_len(&self) -> Result<(), GeometryError> {
        if self.len() < 3 {
            return Err(GeometryError::TooFewPoints {
                needed: 3,
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// Distance from `x` to the affine span of the points of `tuple`.
pub fn affine_hull_distance(x: &Vector, tuple: &Tuple) -> f64 {
    kernel::hull_distance(x.coords(), tuple.points())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Allocation-light routines on point slices.
pub mod kernel {
    use super::{dist, dot, norm};

    /// Relative size below which an orthogonalized edge counts as dependent
    /// when projecting onto a hull.
    const RANK_RTOL: f64 = 1e-13;

    /// Incremental orthonormal basis with re-orthogonalization.
    struct Basis {
        dim: usize,
        vecs: Vec<f64>,
        count: usize,
    }

    impl Basis {
        fn new(dim: usize, capacity: usize) -> Self {
            Basis {
                dim,
                vecs: Vec::with_capacity(dim * capacity),
                count: 0,
            }
        }

        /// Removes the span component of `v` in place, twice.
        fn reduce(&self, v: &mut [f64]) {
            for _ in 0..2 {
                for k in 0..self.count {
                    let q = &self.vecs[k * self.dim..(k + 1) * self.dim];
                    let c = dot(q, v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
        }

        /// Orthogonalizes `v` against the basis and appends it. Returns the
        /// residual norm; nothing is appended when it is zero.
        fn push(&mut self, v: &mut [f64]) -> f64 {
            self.reduce(v);
            let r = norm(v);
            if r > 0.0 {
                self.vecs.extend(v.iter().map(|x| x / r));
                self.count += 1;
            }
            r
        }
    }

    fn edge(from: &[f64], to: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(to).zip(from) {
            *o = a - b;
        }
    }

    /// Content of the parallelotope on the edges at vertex `base`.
    pub fn content<P: AsRef<[f64]>>(points: &[P], base: usize) -> f64 {
        let n = points.len().saturating_sub(1);
        if n == 0 {
            return 1.0;
        }
        let x0 = points[base].as_ref();
        let dim = x0.len();
        if n > dim {
            return 0.0;
        }
        let mut basis = Basis::new(dim, n);
        let mut v = vec![0.0; dim];
        let mut prod = 1.0;
        for (j, p) in points.iter().enumerate() {
            if j == base {
                continue;
            }
            edge(x0, p.as_ref(), &mut v);
            let r = basis.push(&mut v);
            if r == 0.0 {
                return 0.0;
            }
            prod *= r;
        }
        prod
    }

    /// Polar sine at vertex `i`: content on the unit edges at `x_i`.
    pub fn polar_sine<P: AsRef<[f64]>>(points: &[P], i: usize) -> f64 {
        let n = points.len().saturating_sub(1);
        if n == 0 {
            return 0.0;
        }
        let xi = points[i].as_ref();
        let dim = xi.len();
        if n > dim {
            return 0.0;
        }
        let mut basis = Basis::new(dim, n);
        let mut v = vec![0.0; dim];
        let mut prod = 1.0;
        for (j, p) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            edge(xi, p.as_ref(), &mut v);
            let len = norm(&v);
            if len == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|c| *c /= len);
            let r = basis.push(&mut v);
            if r == 0.0 {
                return 0.0;
            }
            prod *= r;
        }
        prod.min(1.0)
    }

    /// Distance from `x` to the affine span of `points`.
    pub fn hull_distance<P: AsRef<[f64]>>(x: &[f64], points: &[P]) -> f64 {
        let x0 = points[0].as_ref();
        let dim = x0.len();
        let mut basis = Basis::new(dim, points.len());
        let mut v = vec![0.0; dim];
        for p in &points[1..] {
            edge(x0, p.as_ref(), &mut v);
            let len = norm(&v);
            if len == 0.0 {
                continue;
            }
            basis.reduce(&mut v);
            if norm(&v) > RANK_RTOL * len {
                basis.push(&mut v);
            }
        }
        edge(x0, x, &mut v);
        basis.reduce(&mut v);
        norm(&v)
    }

    /// Height through vertex `i`.
    pub fn height<P: AsRef<[f64]>>(points: &[P], i: usize) -> f64 {
        let rest: Vec<&[f64]> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p.as_ref())
            .collect();
        hull_distance(points[i].as_ref(), &rest)
    }

    pub fn diam<P: AsRef<[f64]>>(points: &[P]) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                m = m.max(dist(points[i].as_ref(), points[j].as_ref()));
            }
        }
        m
    }

    pub fn min_edge<P: AsRef<[f64]>>(points: &[P]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                m = m.min(dist(points[i].as_ref(), points[j].as_ref()));
            }
        }
        m
    }

    /// `(min_at0, max_at0)` over the edges `x_i - x_0`, `i >= 1`.
    pub fn edge_range_at0<P: AsRef<[f64]>>(points: &[P]) -> (f64, f64) {
        let x0 = points[0].as_ref();
        points[1..]
            .iter()
            .map(|p| dist(x0, p.as_ref()))
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), e| (lo.min(e), hi.max(e)))
    }

    fn intrinsic_order<P>(points: &[P]) -> i32 {
        points.len() as i32 - 2
    }

    /// `c_d^2` as the mean over vertices of `psin^2 / diam^{d(d+1)}`.
    pub fn curvature_sq<P: AsRef<[f64]>>(points: &[P]) -> f64 {
        let d = intrinsic_order(points);
        let diam = diam(points);
        if diam == 0.0 {
            return 0.0;
        }
        let sum: f64 = (0..points.len())
            .map(|i| {
                let s = polar_sine(points, i);
                s * s
            })
            .sum();
        sum / (points.len() as f64 * diam.powi(d * (d + 1)))
    }

    /// `psin_{x_0}^2 / diam^{d(d+1)}`; its integral against `mu^{d+2}` equals
    /// that of `c_d^2` by symmetry.
    pub fn base_curvature_sq<P: AsRef<[f64]>>(points: &[P]) -> f64 {
        let d = intrinsic_order(points);
        let diam = diam(points);
        if diam == 0.0 {
            return 0.0;
        }
        let s = polar_sine(points, 0);
        s * s / diam.powi(d * (d + 1))
    }

    /// `c_d^2` from the content and the edge products.
    pub fn curvature_sq_volume_form<P: AsRef<[f64]>>(points: &[P]) -> f64 {
        let d = intrinsic_order(points);
        let diam = diam(points);
        if diam == 0.0 {
            return 0.0;
        }
        let m = points.len();
        let mut inv_sum = 0.0;
        for i in 0..m {
            let mut prod = 1.0;
            for j in 0..m {
                if j != i {
                    let e = dist(points[i].as_ref(), points[j].as_ref());
                    prod *= e * e;
                }
            }
            if prod == 0.0 {
                return 0.0;
            }
            inv_sum += 1.0 / prod;
        }
        let vol = content(points, 0);
        vol * vol * inv_sum / (m as f64 * diam.powi(d * (d + 1)))
    }

    /// Smallest pairwise distance, used for the separation filter.
    pub fn min_pairwise<P: AsRef<[f64]>>(points: &[P]) -> f64 {
        min_edge(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(c: &[[f64; 2]]) -> Tuple {
        Tuple::from_coords(c)
    }

    fn equilateral() -> Tuple {
        t(&[[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]])
    }

    #[test]
    fn remove_coordinate_examples() {
        let x = Tuple::from_coords(&[[1.0], [2.0], [3.0]]);
        assert_eq!(x.remove_coordinate(1).unwrap(), Tuple::from_coords(&[[1.0], [3.0]]));
        let ab = Tuple::from_coords(&[[1.0], [2.0]]);
        assert_eq!(ab.remove_coordinate(0).unwrap(), Tuple::from_coords(&[[2.0]]));
        let five = Tuple::from_coords(&[[0.0], [1.0], [2.0], [3.0], [4.0]]);
        assert_eq!(
            five.remove_coordinate(1).unwrap(),
            Tuple::from_coords(&[[0.0], [2.0], [3.0], [4.0]])
        );
        assert!(matches!(
            x.remove_coordinate(3),
            Err(GeometryError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn replace_coordinate_examples() {
        let x = Tuple::from_coords(&[[1.0], [2.0], [3.0]]);
        let y = Vector::from([9.0]);
        assert_eq!(
            x.replace_coordinate(&y, 2).unwrap(),
            Tuple::from_coords(&[[1.0], [2.0], [9.0]])
        );
        let once = x.replace_coordinate(&y, 1).unwrap();
        assert_eq!(once, Tuple::from_coords(&[[1.0], [9.0], [3.0]]));
        assert_eq!(once.replace_coordinate(&y, 1).unwrap(), once);
        assert_eq!(x.replace_coordinate(&y, 0), Err(GeometryError::ReplaceBase));
        assert!(x.replace_coordinate(&y, 3).is_err());
    }

    #[test]
    fn content_examples() {
        assert_relative_eq!(t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).gram_content().value, 1.0);
        assert_relative_eq!(t(&[[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]).gram_content().value, 6.0);
        let collinear = t(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).gram_content();
        assert!(collinear.value < 1e-15);
        let excess = t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).gram_content();
        assert_eq!(excess, Flagged::zero(Degeneracy::ExcessDimension));
    }

    #[test]
    fn edge_statistics() {
        let x = t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_relative_eq!(x.diam(), 2f64.sqrt());
        assert_relative_eq!(x.min_edge(), 1.0);
        assert_eq!(t(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).min_edge(), 0.0);
        let seg = Tuple::from_coords(&[[0.0], [3.0]]);
        assert_eq!(seg.diam(), 3.0);
        assert_eq!(seg.min_edge(), 3.0);

        assert_eq!(x.max_at0().unwrap(), 1.0);
        assert_eq!(x.min_at0().unwrap(), 1.0);
        assert_eq!(x.scale_at0().unwrap(), 1.0);
        let line = Tuple::from_coords(&[[0.0], [1.0], [4.0]]);
        assert_eq!(line.max_at0().unwrap(), 4.0);
        assert_eq!(line.scale_at0().unwrap(), 0.25);
        let scaled = Tuple::from_coords(&[[0.0], [2.0], [8.0]]);
        assert_eq!(scaled.scale_at0().unwrap(), 0.25);
        let collapsed = Tuple::from_coords(&[[1.0], [1.0], [1.0]]);
        assert!(matches!(collapsed.scale_at0(), Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn hull_distance_examples() {
        let line = t(&[[0.0, 0.0], [1.0, 0.0]]);
        assert_relative_eq!(affine_hull_distance(&Vector::from([0.0, 1.0]), &line), 1.0);
        assert!(affine_hull_distance(&Vector::from([0.5, 0.0]), &line) < 1e-15);
        let plane = Tuple::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_relative_eq!(affine_hull_distance(&Vector::from([0.0, 0.0, 2.0]), &plane), 2.0);
        // rank-deficient hull: the repeated direction is skipped
        let doubled = Tuple::from_coords(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_relative_eq!(affine_hull_distance(&Vector::from([5.0, 3.0]), &doubled), 3.0);
    }

    #[test]
    fn height_examples() {
        let x = t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        // distance from the origin to the line x + y = 1
        assert_relative_eq!(x.height(0).unwrap(), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        for i in 0..3 {
            assert_relative_eq!(equilateral().height(i).unwrap(), 3f64.sqrt() / 2.0, epsilon = 1e-15);
        }
        assert!(t(&[[0.0, 0.0], [1.0, 1.0], [3.0, 3.0]]).min_height() < 1e-15);
    }

    #[test]
    fn polar_sine_examples() {
        let x = t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_relative_eq!(x.polar_sine(0).unwrap(), 1.0);
        for i in 0..3 {
            assert_relative_eq!(equilateral().polar_sine(i).unwrap(), 3f64.sqrt() / 2.0, epsilon = 1e-15);
        }
        assert!(t(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).polar_sine(0).unwrap() < 1e-15);
        assert_eq!(t(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).polar_sine(0).unwrap(), 0.0);
    }

    #[test]
    fn elevation_sine_examples() {
        let x = t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_relative_eq!(x.elevation_sine(2).unwrap(), 1.0);
        let flat = t(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        assert!(flat.elevation_sine(2).unwrap() < 1e-15);
        // x_1 at perpendicular height h over the face X(1), edge length l
        let (h, a) = (0.7, 0.4);
        let tet = Tuple::from_coords(&[
            [0.0, 0.0, 0.0],
            [a, 0.3, h],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]);
        let l = (a * a + 0.09 + h * h).sqrt();
        assert_relative_eq!(tet.elevation_sine(1).unwrap(), h / l, epsilon = 1e-14);
        assert!(x.elevation_sine(0).is_err());
        let coincide = t(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        assert!(coincide.elevation_sine(1).is_err());
    }

    #[test]
    fn menger_examples() {
        assert_relative_eq!(equilateral().menger_curvature_1d().unwrap().value, 3f64.sqrt(), epsilon = 1e-14);
        let col = t(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).menger_curvature_1d().unwrap();
        assert_eq!(col.value, 0.0);
        let right = t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).menger_curvature_1d().unwrap();
        assert_relative_eq!(right.value, 2f64.sqrt(), epsilon = 1e-14);
        let dup = t(&[[0.0, 0.0], [0.0, 0.0], [0.0, 1.0]]).menger_curvature_1d().unwrap();
        assert_eq!(dup, Flagged::zero(Degeneracy::CoincidingVertices));
    }

    #[test]
    fn discrete_curvature_examples() {
        let c = equilateral().discrete_curvature().unwrap();
        assert_relative_eq!(c.value, 3f64.sqrt() / 2.0, epsilon = 1e-14);
        let vf = equilateral().discrete_curvature_sq_volume_form().unwrap();
        assert_relative_eq!(vf, 0.75, epsilon = 1e-14);
        let deg = t(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).discrete_curvature().unwrap();
        assert_eq!(deg.value, 0.0);
        assert_eq!(deg.flag, Some(Degeneracy::RankDeficient));
        let same = t(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).discrete_curvature().unwrap();
        assert_eq!(same, Flagged::zero(Degeneracy::CoincidingVertices));
        // equilateral attains the upper comparability bound c_1^2 = c_M^2 / 4
        let cm = equilateral().menger_curvature_1d().unwrap().value;
        assert_relative_eq!(c.value * c.value, cm * cm / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn direct_menger_examples() {
        assert_eq!(t(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).direct_menger().unwrap().value, 0.0);
        assert_relative_eq!(equilateral().direct_menger().unwrap().value, 3f64.sqrt() / 2.0, epsilon = 1e-14);
        // degree (d+1) - (d+1)(d+2) = -4 for d = 1
        let x = t(&[[0.0, 0.0], [1.3, 0.2], [0.4, 0.9]]);
        let x2 = t(&[[0.0, 0.0], [2.6, 0.4], [0.8, 1.8]]);
        let ratio = x2.direct_menger().unwrap().value / x.direct_menger().unwrap().value;
        assert_relative_eq!(ratio, 2f64.powi(-4), epsilon = 1e-14);
    }

    #[test]
    fn nondegeneracy() {
        let tol = Tolerances::default().degeneracy_eps;
        assert!(t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_nondegenerate(tol));
        assert!(!t(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_nondegenerate(tol));
        assert!(!t(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).is_nondegenerate(tol));
    }

    #[test]
    fn tuple_rejects_mixed_dimensions() {
        let r = Tuple::new(vec![Vector::from([0.0]), Vector::from([0.0, 1.0])]);
        assert!(matches!(r, Err(GeometryError::DimensionMismatch { .. })));
        assert!(Vector::new(vec![f64::NAN]).is_err());
        assert!(Vector::new(vec![]).is_err());
    }
}
