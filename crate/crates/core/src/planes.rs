//! Affine `d`-planes, deviations of simplices from planes, weighted
//! least-squares plane fitting and `beta_2` numbers.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dot, norm, Tuple, Vector};
use crate::measure::{Ball, WeightedPointCloud};

const FRAME_TOL: f64 = 1e-12;
/// Relative gap below which two covariance eigenvalues count as tied.
const TIE_RTOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaneError {
    #[error("frame is not orthonormal")]
    NotOrthonormal,
    #[error("plane dimension {d} must be below ambient dimension {dim}")]
    TooLarge { d: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty restriction")]
    EmptyRestriction,
}

/// An affine plane `base + span(frame)` with an orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePlane {
    base: Vector,
    frame: Vec<Vector>,
}

impl AffinePlane {
    pub fn new(base: Vector, frame: Vec<Vector>) -> Result<Self, PlaneError> {
        let dim = base.dim();
        if frame.len() >= dim {
            return Err(PlaneError::TooLarge { d: frame.len(), dim });
        }
        for f in &frame {
            if f.dim() != dim {
                return Err(PlaneError::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
        }
        for (a, fa) in frame.iter().enumerate() {
            for (b, fb) in frame.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                if (dot(fa.coords(), fb.coords()) - target).abs() > FRAME_TOL {
                    return Err(PlaneError::NotOrthonormal);
                }
            }
        }
        Ok(AffinePlane { base, frame })
    }

    /// Orthonormalizes `directions` (which must be independent) first.
    pub fn from_directions(base: Vector, directions: &[Vec<f64>]) -> Result<Self, PlaneError> {
        let mut frame: Vec<Vec<f64>> = Vec::new();
        for dir in directions {
            let mut v = dir.clone();
            for _ in 0..2 {
                for q in &frame {
                    let c = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
                }
            }
            let n = norm(&v);
            if n == 0.0 {
                return Err(PlaneError::NotOrthonormal);
            }
            frame.push(v.into_iter().map(|x| x / n).collect());
        }
        let frame = frame.into_iter().map(|f| Vector::new(f).expect("finite")).collect();
        AffinePlane::new(base, frame)
    }

    /// The plane through the origin spanned by the first `d` axes.
    pub fn coordinate(d: usize, dim: usize) -> Result<Self, PlaneError> {
        AffinePlane::new(Vector::zeros(dim), (0..d).map(|k| axis(k, dim)).collect())
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    pub fn frame(&self) -> &[Vector] {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.dim()
    }

    /// Distance from the raw coordinates `x` to the plane.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut v: Vec<f64> = x.iter().zip(self.base.coords()).map(|(a, b)| a - b).collect();
        for _ in 0..2 {
            for f in &self.frame {
                let c = dot(f.coords(), &v);
                v.iter_mut().zip(f.coords()).for_each(|(x, fi)| *x -= c * fi);
            }
        }
        norm(&v)
    }
}

fn axis(k: usize, dim: usize) -> Vector {
    let mut e = vec![0.0; dim];
    e[k] = 1.0;
    Vector::new(e).expect("finite")
}

pub fn distance_to_plane(x: &Vector, plane: &AffinePlane) -> f64 {
    plane.distance(x.coords())
}

/// `D_2(X, L)`: the l2 norm of the vertex distances to `L`.
pub fn deviation_d2(x: &Tuple, plane: &AffinePlane) -> f64 {
    x.points()
        .iter()
        .map(|p| {
            let t = plane.distance(p.coords());
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Fits the weighted least-squares `d`-plane to the points of `cloud` in
/// `ball`.
pub fn fit_plane(cloud: &WeightedPointCloud, ball: &Ball, d: usize) -> Result<AffinePlane, PlaneError> {
    fit_plane_indices(cloud, &cloud.points_in_ball(ball), d)
}

/// Weighted PCA on the points `indices`: the plane through the weighted
/// centroid spanned by the top `d` covariance eigenvectors. Eigenvalue ties
/// are resolved by projecting the coordinate axes into each tied eigenspace
/// in order, which picks the lexicographically first orthonormal basis.
pub fn fit_plane_indices(cloud: &WeightedPointCloud, indices: &[usize], d: usize) -> Result<AffinePlane, PlaneError> {
    let dim = cloud.dim();
    if d >= dim {
        return Err(PlaneError::TooLarge { d, dim });
    }
    if indices.is_empty() {
        return Err(PlaneError::EmptyRestriction);
    }
    let mass = cloud.mass_of(indices);
    let mut centroid = vec![0.0; dim];
    for &i in indices {
        let w = cloud.weight(i);
        centroid.iter_mut().zip(cloud.point(i).coords()).for_each(|(c, x)| *c += w * x);
    }
    centroid.iter_mut().for_each(|c| *c /= mass);
    let base = Vector::new(centroid.clone()).expect("finite centroid");
    if d == 0 {
        return AffinePlane::new(base, Vec::new());
    }

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut v = vec![0.0; dim];
    for &i in indices {
        let w = cloud.weight(i);
        v.iter_mut()
            .zip(cloud.point(i).coords())
            .zip(&centroid)
            .for_each(|((vi, x), c)| *vi = x - c);
        for a in 0..dim {
            for b in a..dim {
                cov[(a, b)] += w * v[a] * v[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].abs();
    let tie = TIE_RTOL * top.max(f64::MIN_POSITIVE);

    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut start = 0;
    while frame.len() < d {
        let mut end = start + 1;
        while end < dim && eig.eigenvalues[order[start]] - eig.eigenvalues[order[end]] <= tie {
            end += 1;
        }
        let cluster: Vec<Vec<f64>> = order[start..end]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        for b in canonical_basis(&cluster, dim) {
            if frame.len() == d {
                break;
            }
            frame.push(b);
        }
        start = end;
    }
    let frame = frame.into_iter().map(|f| Vector::new(f).expect("finite")).collect();
    AffinePlane::new(base, frame)
}

/// A canonical orthonormal basis of `span(cluster)`: projections of
/// `e_1, e_2, ...` orthogonalized in turn, each with a positive leading
/// entry.
fn canonical_basis(cluster: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    if cluster.len() == 1 {
        let mut v = cluster[0].clone();
        fix_sign(&mut v);
        return vec![v];
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cluster.len());
    for k in 0..dim {
        if out.len() == cluster.len() {
            break;
        }
        let mut v = vec![0.0; dim];
        for q in cluster {
            let c = q[k];
            v.iter_mut().zip(q).for_each(|(x, qi)| *x += c * qi);
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            fix_sign(&mut v);
            out.push(v);
        }
    }
    out
}

fn fix_sign(v: &mut [f64]) {
    if let Some(&lead) = v.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `beta_2(B, L)`; zero when `mu(B) = 0`.
pub fn beta2_with_plane(cloud: &WeightedPointCloud, ball: &Ball, plane: &AffinePlane) -> f64 {
    beta2_sq_indices(cloud, &cloud.points_in_ball(ball), ball.diam(), plane).sqrt()
}

/// `beta_2^2` of the points `indices` against `plane` at ball diameter `diam`.
pub fn beta2_sq_indices(cloud: &WeightedPointCloud, indices: &[usize], diam: f64, plane: &AffinePlane) -> f64 {
    let mass = cloud.mass_of(indices);
    if mass == 0.0 {
        return 0.0;
    }
    let s: f64 = indices
        .iter()
        .map(|&i| {
            let t = plane.distance(cloud.point(i).coords()) / diam;
            cloud.weight(i) * t * t
        })
        .sum();
    s / mass
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beta2Result {
    pub value: f64,
    /// The optimal plane; `None` for an empty restriction.
    pub plane: Option<AffinePlane>,
    pub mass: f64,
    pub empty: bool,
}

/// `beta_2(B)`, realized at the weighted least-squares plane.
pub fn beta2(cloud: &WeightedPointCloud, ball: &Ball, d: usize) -> Result<Beta2Result, PlaneError> {
    beta2_indices(cloud, &cloud.points_in_ball(ball), ball.diam(), d)
}

pub fn beta2_indices(cloud: &WeightedPointCloud, indices: &[usize], diam: f64, d: usize) -> Result<Beta2Result, PlaneError> {
    if d >= cloud.dim() {
        // the whole space is the best fit
        return Ok(Beta2Result {
            value: 0.0,
            plane: None,
            mass: cloud.mass_of(indices),
            empty: indices.is_empty(),
        });
    }
    match fit_plane_indices(cloud, indices, d) {
        Ok(plane) => Ok(Beta2Result {
            value: beta2_sq_indices(cloud, indices, diam, &plane).sqrt(),
            mass: cloud.mass_of(indices),
            plane: Some(plane),
            empty: false,
        }),
        Err(PlaneError::EmptyRestriction) => Ok(Beta2Result {
            value: 0.0,
            plane: None,
            mass: 0.0,
            empty: true,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cloud(points: &[[f64; 2]], weights: &[f64]) -> WeightedPointCloud {
        WeightedPointCloud::new(points.iter().map(|p| Vector::from(*p)).collect(), weights.to_vec(), 1).unwrap()
    }

    #[test]
    fn distance_examples() {
        let xy = AffinePlane::coordinate(2, 3).unwrap();
        assert_eq!(distance_to_plane(&Vector::from([0.0, 0.0, 1.0]), &xy), 1.0);
        assert_eq!(distance_to_plane(&Vector::from([3.0, -2.0, 0.0]), &xy), 0.0);
        let tilted = AffinePlane::from_directions(Vector::from([1.0, 2.0, 3.0]), &[vec![1.0, 1.0, 0.0]]).unwrap();
        let x = [0.3, -0.4, 2.0];
        let shifted = [x[0] + 5.0, x[1] + 5.0, x[2]];
        assert_relative_eq!(tilted.distance(&x), tilted.distance(&shifted), epsilon = 1e-14);
    }

    #[test]
    fn deviation_examples() {
        let xaxis = AffinePlane::coordinate(1, 2).unwrap();
        let on = Tuple::from_coords(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(deviation_d2(&on, &xaxis), 0.0);
        let off = Tuple::from_coords(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]);
        assert_relative_eq!(deviation_d2(&off, &xaxis), 3f64.sqrt());
        let more = Tuple::from_coords(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [0.0, 0.5]]);
        assert!(deviation_d2(&more, &xaxis) > deviation_d2(&off, &xaxis));
    }

    #[test]
    fn plane_validation() {
        let bad = AffinePlane::new(Vector::zeros(2), vec![Vector::from([1.0, 1.0])]);
        assert_eq!(bad, Err(PlaneError::NotOrthonormal));
        let full = AffinePlane::coordinate(2, 2);
        assert!(matches!(full, Err(PlaneError::TooLarge { .. })));
    }

    #[test]
    fn fit_line_through_collinear_points() {
        let c = cloud(&[[0.0, 1.0], [1.0, 2.0], [2.0, 3.0], [-1.0, 0.0]], &[1.0, 2.0, 1.0, 0.5]);
        let ball = Ball::new(Vector::from([0.0, 0.0]), 10.0).unwrap();
        let l = fit_plane(&c, &ball, 1).unwrap();
        for p in c.points() {
            assert!(l.distance(p.coords()) < 1e-14);
        }
        assert!(beta2(&c, &ball, 1).unwrap().value < 1e-14);
    }

    #[test]
    fn square_corners_tie_is_canonical() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], &[1.0; 4]);
        let ball = Ball::new(Vector::from([0.5, 0.5]), 2f64.sqrt() / 2.0).unwrap();
        let l = fit_plane(&c, &ball, 1).unwrap();
        assert_eq!(l.frame()[0].coords(), &[1.0, 0.0]);
        let residual: f64 = c.points().iter().map(|p| l.distance(p.coords()).powi(2)).sum();
        assert_relative_eq!(residual, 1.0, epsilon = 1e-14);
        // brute force over lines through the centroid
        let oracle = (0..3600)
            .map(|k| {
                let th = k as f64 * std::f64::consts::PI / 3600.0;
                let (s, co) = th.sin_cos();
                c.points()
                    .iter()
                    .map(|p| {
                        let (x, y) = (p.coords()[0] - 0.5, p.coords()[1] - 0.5);
                        let t = -s * x + co * y;
                        t * t
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(oracle, 1.0, epsilon = 1e-12);
        // beta_2^2 = mean (dist / diam)^2 = (1/4) / 2
        let b = beta2(&c, &ball, 1).unwrap();
        assert_relative_eq!(b.value, 0.125f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(b.mass, 4.0);
    }

    #[test]
    fn single_point_gets_axis_frame() {
        let c = cloud(&[[0.3, 0.7]], &[1.0]);
        let ball = Ball::new(Vector::from([0.3, 0.7]), 1.0).unwrap();
        let l = fit_plane(&c, &ball, 1).unwrap();
        assert_eq!(l.base().coords(), &[0.3, 0.7]);
        assert_eq!(l.frame()[0].coords(), &[1.0, 0.0]);
    }

    #[test]
    fn empty_ball() {
        let c = cloud(&[[0.0, 0.0]], &[1.0]);
        let far = Ball::new(Vector::from([5.0, 5.0]), 1.0).unwrap();
        assert_eq!(fit_plane(&c, &far, 1), Err(PlaneError::EmptyRestriction));
        let b = beta2(&c, &far, 1).unwrap();
        assert!(b.empty && b.value == 0.0 && b.plane.is_none());
        let l = AffinePlane::coordinate(1, 2).unwrap();
        assert_eq!(beta2_with_plane(&c, &far, &l), 0.0);
    }

    #[test]
    fn two_points_at_unit_distance() {
        let c = cloud(&[[0.0, 1.0], [0.0, -1.0]], &[1.0, 1.0]);
        let ball = Ball::new(Vector::from([0.0, 0.0]), 1.0).unwrap();
        let xaxis = AffinePlane::coordinate(1, 2).unwrap();
        // each term (1/2)^2, averaged: 1/4
        assert_relative_eq!(beta2_with_plane(&c, &ball, &xaxis), 0.5, epsilon = 1e-15);
        assert!(beta2(&c, &ball, 1).unwrap().value <= 0.5);
    }
}
