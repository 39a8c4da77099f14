//! Weighted point clouds as empirical measures.
//!
//! All integrals against the measure become weighted sums over the cloud.
//! Balls are closed throughout.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dist, dist_sq, GeometryError, Tuple, Vector};

/// Clouds up to this size get an exact support diameter.
pub const EXACT_DIAMETER_LIMIT: usize = 20_000;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("cloud has no points")]
    Empty,
    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("weight {value} at index {index} is not positive and finite")]
    BadWeight { index: usize, value: f64 },
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("empty restriction")]
    EmptyRestriction,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A closed ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self, MeasureError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(MeasureError::BadRadius(radius));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `2 * radius`, the diameter used in beta numbers.
    pub fn diam(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist_sq(self.center.coords(), x) <= self.radius * self.radius
    }

    /// The concentric ball with radius scaled by `gamma`.
    pub fn blow_up(&self, gamma: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * gamma,
        }
    }

    /// Closed balls meet iff the centers are within the sum of the radii.
    pub fn intersects(&self, other: &Ball) -> bool {
        dist(self.center.coords(), other.center.coords()) <= self.radius + other.radius
    }
}

/// A finite weighted point cloud standing in for a `d`-regular measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedPointCloud {
    points: Vec<Vector>,
    weights: Vec<f64>,
    support_diameter: f64,
    diameter_exact: bool,
    intrinsic_d: usize,
}

impl WeightedPointCloud {
    pub fn new(points: Vec<Vector>, weights: Vec<f64>, intrinsic_d: usize) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::Empty);
        }
        if points.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let dim = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            }
            .into());
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(MeasureError::BadWeight { index, value });
            }
        }
        let (support_diameter, diameter_exact) = support_diameter(&points);
        Ok(WeightedPointCloud {
            points,
            weights,
            support_diameter,
            diameter_exact,
            intrinsic_d,
        })
    }

    /// Equal weights summing to one.
    pub fn uniform(points: Vec<Vector>, intrinsic_d: usize) -> Result<Self, MeasureError> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self::new(points, weights, intrinsic_d)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn intrinsic_d(&self) -> usize {
        self.intrinsic_d
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Vector {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn support_diameter(&self) -> f64 {
        self.support_diameter
    }

    /// False when the diameter is the centroid-based upper bound.
    pub fn diameter_is_exact(&self) -> bool {
        self.diameter_exact
    }

    pub fn points_in_ball(&self, ball: &Ball) -> Vec<usize> {
        (0..self.len()).filter(|&i| ball.contains(self.points[i].coords())).collect()
    }

    pub fn ball_mass(&self, ball: &Ball) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| ball.contains(p.coords()))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn mass_of(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.weights[i]).sum()
    }

    /// The restriction `mu|_B` as a new cloud, or `None` if `B` misses the
    /// support.
    pub fn restrict(&self, ball: &Ball) -> Option<WeightedPointCloud> {
        self.subset(&self.points_in_ball(ball))
    }

    pub fn subset(&self, indices: &[usize]) -> Option<WeightedPointCloud> {
        if indices.is_empty() {
            return None;
        }
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let weights = indices.iter().map(|&i| self.weights[i]).collect();
        WeightedPointCloud::new(points, weights, self.intrinsic_d).ok()
    }

    /// Applies `x -> scale * x + shift` to every point.
    pub fn affine_image(&self, scale: f64, shift: &[f64]) -> WeightedPointCloud {
        let points = self
            .points
            .iter()
            .map(|p| {
                let c = p.coords().iter().zip(shift).map(|(x, s)| scale * x + s).collect();
                Vector::new(c).expect("finite image")
            })
            .collect();
        WeightedPointCloud::new(points, self.weights.clone(), self.intrinsic_d).expect("valid image")
    }

    /// Distance from each point to its `k`-th nearest other point
    /// (`f64::INFINITY` when fewer than `k` other points exist).
    pub fn kth_neighbor_distances(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1, "k must be at least 1");
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                if self.len() <= k {
                    return f64::INFINITY;
                }
                let xi = self.points[i].coords();
                let mut d: Vec<f64> = (0..self.len())
                    .filter(|&j| j != i)
                    .map(|j| dist(xi, self.points[j].coords()))
                    .collect();
                let (_, kth, _) = d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
                *kth
            })
            .collect()
    }

    /// Median nearest-neighbour distance, the empirical resolution.
    pub fn resolution(&self) -> f64 {
        let mut nn = self.kth_neighbor_distances(1);
        if nn.iter().all(|d| d.is_infinite()) {
            return 0.0;
        }
        nn.sort_by(|a, b| a.total_cmp(b));
        nn[nn.len() / 2]
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim={}", self.dim());
        for (p, w) in self.points.iter().zip(&self.weights) {
            for c in p.coords() {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{w}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MeasureError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parses the `dim=D` CSV format. The intrinsic dimension is not part of
    /// the file and must be supplied.
    pub fn from_csv_str(text: &str, intrinsic_d: usize) -> Result<Self, MeasureError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(MeasureError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&d| d >= 1)
            .ok_or(MeasureError::Parse {
                line: 1,
                msg: format!("expected `dim=D`, got `{header}`"),
            })?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(MeasureError::Parse {
                    line: line_no,
                    msg: format!("expected {} fields, got {}", dim + 1, fields.len()),
                });
            }
            let mut vals = Vec::with_capacity(dim + 1);
            for f in fields {
                let v: f64 = f.parse().map_err(|_| MeasureError::Parse {
                    line: line_no,
                    msg: format!("not a number: `{f}`"),
                })?;
                vals.push(v);
            }
            let w = vals.pop().expect("weight field");
            if !(w > 0.0 && w.is_finite()) {
                return Err(MeasureError::Parse {
                    line: line_no,
                    msg: format!("weight must be positive, got {w}"),
                });
            }
            points.push(Vector::new(vals).map_err(|e| MeasureError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?);
            weights.push(w);
        }
        WeightedPointCloud::new(points, weights, intrinsic_d)
    }

    pub fn read_csv(path: &Path, intrinsic_d: usize) -> Result<Self, MeasureError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, intrinsic_d)
    }
}

fn support_diameter(points: &[Vector]) -> (f64, bool) {
    if points.len() <= EXACT_DIAMETER_LIMIT {
        let d = (0..points.len())
            .into_par_iter()
            .map(|i| {
                let xi = points[i].coords();
                points[i + 1..]
                    .iter()
                    .map(|p| dist_sq(xi, p.coords()))
                    .fold(0.0_f64, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        return (d.sqrt(), true);
    }
    // 2 * max distance from the centroid bounds the diameter from above.
    let dim = points[0].dim();
    let mut c = vec![0.0; dim];
    for p in points {
        for (ci, x) in c.iter_mut().zip(p.coords()) {
            *ci += x;
        }
    }
    c.iter_mut().for_each(|x| *x /= points.len() as f64);
    let r = points.iter().map(|p| dist(&c, p.coords())).fold(0.0, f64::max);
    (2.0 * r, false)
}

/// Draws indices with probability proportional to weight.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    indices: Vec<usize>,
    cumulative: Vec<f64>,
}

impl IndexSampler {
    pub fn new(cloud: &WeightedPointCloud, indices: Vec<usize>) -> Result<Self, MeasureError> {
        if indices.is_empty() {
            return Err(MeasureError::EmptyRestriction);
        }
        let mut acc = 0.0;
        let cumulative = indices
            .iter()
            .map(|&i| {
                acc += cloud.weight(i);
                acc
            })
            .collect();
        Ok(IndexSampler { indices, cumulative })
    }

    pub fn over_ball(cloud: &WeightedPointCloud, restriction: Option<&Ball>) -> Result<Self, MeasureError> {
        let idx = match restriction {
            Some(b) => cloud.points_in_ball(b),
            None => (0..cloud.len()).collect(),
        };
        Self::new(cloud, idx)
    }

    pub fn mass(&self) -> f64 {
        *self.cumulative.last().expect("nonempty")
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.mass();
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.indices[k.min(self.indices.len() - 1)]
    }
}

/// `m` i.i.d. draws from the normalized restriction of the cloud.
pub fn sample_tuple<R: Rng + ?Sized>(
    cloud: &WeightedPointCloud,
    restriction: Option<&Ball>,
    m: usize,
    rng: &mut R,
) -> Result<Tuple, MeasureError> {
    let sampler = IndexSampler::over_ball(cloud, restriction)?;
    let pts = (0..m).map(|_| cloud.point(sampler.draw(rng)).clone()).collect();
    Ok(Tuple::new(pts)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularitySample {
    pub center: usize,
    pub radius: f64,
    pub mass_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub estimated_cmu: f64,
    pub samples: Vec<RegularitySample>,
    pub degenerate: bool,
}

/// Estimates the regularity constant from `n_centers x n_radii` balls with
/// centers drawn from the measure and radii log-uniform between the median
/// nearest-neighbour distance and the support diameter.
pub fn regularity_constant<R: Rng + ?Sized>(
    cloud: &WeightedPointCloud,
    d: usize,
    n_centers: usize,
    n_radii: usize,
    rng: &mut R,
) -> RegularityReport {
    let r_max = cloud.support_diameter();
    let r_min = cloud.resolution();
    if cloud.len() < 2 || r_max == 0.0 || r_min == 0.0 {
        return RegularityReport {
            estimated_cmu: 1.0,
            samples: Vec::new(),
            degenerate: true,
        };
    }
    let sampler = IndexSampler::over_ball(cloud, None).expect("nonempty cloud");
    let mut samples = Vec::with_capacity(n_centers * n_radii);
    for _ in 0..n_centers {
        let c = sampler.draw(rng);
        for _ in 0..n_radii {
            let r = r_min * (r_max / r_min).powf(rng.gen::<f64>());
            samples.push(regularity_sample(cloud, c, r, d));
        }
    }
    regularity_report(samples)
}

/// The same estimate over explicit centers and radii.
pub fn regularity_on_grid(cloud: &WeightedPointCloud, d: usize, centers: &[usize], radii: &[f64]) -> RegularityReport {
    let samples = centers
        .iter()
        .flat_map(|&c| radii.iter().map(move |&r| (c, r)))
        .map(|(c, r)| regularity_sample(cloud, c, r, d))
        .collect();
    regularity_report(samples)
}

fn regularity_sample(cloud: &WeightedPointCloud, center: usize, radius: f64, d: usize) -> RegularitySample {
    let ball = Ball::new(cloud.point(center).clone(), radius).expect("positive radius");
    RegularitySample {
        center,
        radius,
        mass_ratio: cloud.ball_mass(&ball) / radius.powi(d as i32),
    }
}

fn regularity_report(samples: Vec<RegularitySample>) -> RegularityReport {
    let c = samples
        .iter()
        .map(|s| s.mass_ratio.max(1.0 / s.mass_ratio))
        .fold(1.0, f64::max);
    RegularityReport {
        estimated_cmu: c,
        samples,
        degenerate: false,
    }
}

fn random_frame<R: Rng + ?Sized>(d: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for q in &frame {
                let c: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            v.iter_mut().for_each(|x| *x /= n);
            frame.push(v);
        }
    }
    frame
}

fn check_dims(d: usize, dim: usize, n: usize) -> Result<(), MeasureError> {
    if d == 0 || dim == 0 || n == 0 {
        return Err(MeasureError::BadParameter("d, D and N must be positive".into()));
    }
    if d > dim {
        return Err(MeasureError::BadParameter(format!("d = {d} exceeds D = {dim}")));
    }
    Ok(())
}

/// `N` uniform points on a random `d`-dimensional unit cube patch in `R^D`.
/// Returns the cloud and the generating plane as `(base, frame)`.
pub fn gen_plane_patch_with_frame<R: Rng + ?Sized>(
    d: usize,
    dim: usize,
    n: usize,
    rng: &mut R,
) -> Result<(WeightedPointCloud, Vec<f64>, Vec<Vec<f64>>), MeasureError> {
    check_dims(d, dim, n)?;
    let frame = random_frame(d, dim, rng);
    let base: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let points = (0..n)
        .map(|_| {
            let mut p = base.clone();
            for f in &frame {
                let u: f64 = rng.gen_range(-1.0..1.0);
                p.iter_mut().zip(f).for_each(|(x, fi)| *x += u * fi);
            }
            Vector::new(p).expect("finite")
        })
        .collect();
    Ok((WeightedPointCloud::uniform(points, d)?, base, frame))
}

pub fn gen_plane_patch<R: Rng + ?Sized>(d: usize, dim: usize, n: usize, rng: &mut R) -> Result<WeightedPointCloud, MeasureError> {
    gen_plane_patch_with_frame(d, dim, n, rng).map(|(c, _, _)| c)
}

/// `N` uniform points on the unit sphere of `R^D` (intrinsic dimension `D-1`).
pub fn gen_sphere<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Result<WeightedPointCloud, MeasureError> {
    if dim < 2 || n == 0 {
        return Err(MeasureError::BadParameter("sphere needs D >= 2 and N >= 1".into()));
    }
    let points = (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r2: f64 = v.iter().map(|x| x * x).sum();
            if r2 > 1e-6 && r2 <= 1.0 {
                let r = r2.sqrt();
                break Vector::new(v.into_iter().map(|x| x / r).collect()).expect("finite");
            }
        })
        .collect();
    WeightedPointCloud::uniform(points, dim - 1)
}

/// `N` points on the graph of a smooth map `[-1,1]^d -> R^{D-d}` whose
/// Lipschitz constant is at most `lipschitz`.
pub fn gen_lipschitz_graph<R: Rng + ?Sized>(
    d: usize,
    dim: usize,
    lipschitz: f64,
    n: usize,
    rng: &mut R,
) -> Result<WeightedPointCloud, MeasureError> {
    check_dims(d, dim, n)?;
    if d == dim {
        return Err(MeasureError::BadParameter("graph needs D > d".into()));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(MeasureError::BadParameter("Lipschitz constant must be finite and >= 0".into()));
    }
    const FREQ: f64 = 3.0;
    let codim = dim - d;
    let amp = lipschitz / (codim as f64).sqrt() / FREQ;
    let dirs = random_frame(codim.min(d).max(1), d, rng);
    let components: Vec<(Vec<f64>, f64)> = (0..codim)
        .map(|k| (dirs[k % dirs.len()].clone(), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    let points = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut p = x.clone();
            for (u, phase) in &components {
                let t: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
                p.push(amp * (FREQ * t + phase).sin());
            }
            Vector::new(p).expect("finite")
        })
        .collect();
    WeightedPointCloud::uniform(points, d)
}

/// Level-`n` four-corner Cantor set in `[-1/2, 1/2]^2`: `4^n` cell centers of
/// weight `4^-n`, each step keeping the four corner cells of side 1/4.
pub fn gen_four_corner_cantor(level: u32) -> Result<WeightedPointCloud, MeasureError> {
    if level > 10 {
        return Err(MeasureError::BadParameter(format!("level {level} too deep")));
    }
    let mut cells = vec![([0.0_f64, 0.0_f64], 0.5_f64)];
    for _ in 0..level {
        let mut next = Vec::with_capacity(cells.len() * 4);
        for ([cx, cy], h) in cells {
            let o = 0.75 * h;
            for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                next.push(([cx + sx * o, cy + sy * o], h / 4.0));
            }
        }
        cells = next;
    }
    let points = cells.into_iter().map(|(c, _)| Vector::from(c)).collect();
    WeightedPointCloud::uniform(points, 1)
}
