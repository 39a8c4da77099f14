//! Nets, ball families, partitions and Jones-type flatness.
//!
//! Level `n` works at the length `a^n` where `a = alpha0`. Its net is an
//! `a^n`-separated subset of the support whose closed `a^n`-balls cover it;
//! the ball family keeps balls `B(x, 4 a^n)` whose quarter blow-ups are
//! disjoint, and the partition assigns every point to one kept ball.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::dist;
use crate::measure::{Ball, WeightedPointCloud};
use crate::planes::{beta2_indices, PlaneError};
use crate::rng;

/// Hard cap on the number of levels in one family.
pub const MAX_LEVELS: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiscaleError {
    #[error("alpha0 must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("level {0} is not built in this family")]
    LevelNotBuilt(i32),
    #[error("ball has zero diameter")]
    ZeroDiameter,
    #[error("scale ratio must lie in (0, 1), got {0}")]
    BadRatio(f64),
    #[error(transparent)]
    Plane(#[from] PlaneError),
}

/// `alpha0^n` for possibly negative `n`.
pub fn level_length(alpha0: f64, n: i32) -> f64 {
    alpha0.powi(n)
}

/// Greedy net at level `n`: scans `ordering` and admits a point iff it is
/// farther than `alpha0^n` from every admitted point.
pub fn build_net(cloud: &WeightedPointCloud, n: i32, alpha0: f64, ordering: &[usize]) -> Vec<usize> {
    let r = level_length(alpha0, n);
    let mut net: Vec<usize> = Vec::new();
    for &i in ordering {
        let xi = cloud.point(i).coords();
        if net.iter().all(|&j| dist(xi, cloud.point(j).coords()) > r) {
            net.push(i);
        }
    }
    net
}

/// Keeps, in net order, the candidates `B(x, 4 alpha0^n)` whose quarter
/// balls stay disjoint from those already kept. Closed balls of radius
/// `alpha0^n` are disjoint iff their centers are more than `2 alpha0^n` apart.
/// Returns the kept center indices.
pub fn build_ball_family(cloud: &WeightedPointCloud, n: i32, alpha0: f64, net: &[usize]) -> Vec<usize> {
    let r = level_length(alpha0, n);
    let mut kept: Vec<usize> = Vec::new();
    for &i in net {
        let xi = cloud.point(i).coords();
        if kept.iter().all(|&j| dist(xi, cloud.point(j).coords()) > 2.0 * r) {
            kept.push(i);
        }
    }
    kept
}

/// Assigns every point a ball index `j` (into `kept`).
///
/// A point inside some kept quarter ball goes to the first such ball. The
/// remaining points lie in the quarter balls `B'_1, B'_2, ...` of the dropped
/// candidates (in net order); a point goes to the first `B'_m` containing it,
/// which the recursive trimming makes its unique piece, and that piece is
/// handed to the first kept ball whose quarter ball meets `B'_m`.
pub fn build_partition(cloud: &WeightedPointCloud, n: i32, alpha0: f64, net: &[usize], kept: &[usize]) -> Vec<usize> {
    let r = level_length(alpha0, n);
    let leftovers: Vec<usize> = net.iter().copied().filter(|i| !kept.contains(i)).collect();
    let owner: Vec<usize> = leftovers
        .iter()
        .map(|&m| {
            let xm = cloud.point(m).coords();
            kept.iter()
                .position(|&j| dist(xm, cloud.point(j).coords()) <= 2.0 * r)
                .expect("maximal family meets every dropped quarter ball")
        })
        .collect();
    (0..cloud.len())
        .map(|p| {
            let xp = cloud.point(p).coords();
            if let Some(j) = kept.iter().position(|&c| dist(xp, cloud.point(c).coords()) <= r) {
                return j;
            }
            let m = leftovers
                .iter()
                .position(|&c| dist(xp, cloud.point(c).coords()) <= r)
                .expect("net quarter balls cover the support");
            owner[m]
        })
        .collect()
}

/// `m(Q)`: the smallest integer with `alpha0^m <= diam Q`.
pub fn m_of_q(q: &Ball, alpha0: f64) -> i32 {
    m_of_diam(q.diam(), alpha0)
}

pub fn m_of_diam(diam: f64, alpha0: f64) -> i32 {
    let mut m = (diam.ln() / alpha0.ln()).ceil() as i32;
    // guard the ceiling against rounding in the logarithms
    while alpha0.powi(m) > diam {
        m += 1;
    }
    while alpha0.powi(m - 1) <= diam {
        m -= 1;
    }
    m
}

/// One level of a multiresolution family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetLevel {
    pub n: i32,
    /// `alpha0^n`.
    pub length: f64,
    pub net_points: Vec<usize>,
    /// Center indices of the kept balls, in index order `j = 0, 1, ...`.
    pub ball_centers: Vec<usize>,
    pub balls: Vec<Ball>,
    /// Point index to ball index.
    pub partition: Vec<usize>,
}

impl NetLevel {
    pub fn build(cloud: &WeightedPointCloud, n: i32, alpha0: f64, ordering: &[usize]) -> Self {
        let length = level_length(alpha0, n);
        let net_points = build_net(cloud, n, alpha0, ordering);
        let ball_centers = build_ball_family(cloud, n, alpha0, &net_points);
        let partition = build_partition(cloud, n, alpha0, &net_points, &ball_centers);
        let balls = ball_centers
            .iter()
            .map(|&c| Ball::new(cloud.point(c).clone(), 4.0 * length).expect("positive radius"))
            .collect();
        NetLevel {
            n,
            length,
            net_points,
            ball_centers,
            balls,
            partition,
        }
    }

    /// Point indices of the cell `P_{n,j}`.
    pub fn cell(&self, j: usize) -> Vec<usize> {
        (0..self.partition.len()).filter(|&p| self.partition[p] == j).collect()
    }

    /// Exhaustive check of the net, family and partition axioms.
    pub fn verify(&self, cloud: &WeightedPointCloud) -> LevelCheck {
        let r = self.length;
        let pt = |i: usize| cloud.point(i).coords();
        let separation = self.net_points.iter().enumerate().all(|(a, &i)| {
            self.net_points[a + 1..].iter().all(|&j| dist(pt(i), pt(j)) > r)
        });
        let covering = (0..cloud.len()).all(|p| self.net_points.iter().any(|&c| dist(pt(p), pt(c)) <= r));
        let quarter_disjoint = self.ball_centers.iter().enumerate().all(|(a, &i)| {
            self.ball_centers[a + 1..].iter().all(|&j| dist(pt(i), pt(j)) > 2.0 * r)
        });
        let family_covers = (0..cloud.len()).all(|p| self.balls.iter().any(|b| b.contains(pt(p))));
        let partition_total =
            self.partition.len() == cloud.len() && self.partition.iter().all(|&j| j < self.balls.len());
        let sandwich = partition_total
            && (0..cloud.len()).all(|p| {
                let own = self.partition[p];
                let c = pt(self.ball_centers[own]);
                let in_three_quarter = dist(pt(p), c) <= 3.0 * r;
                // a point of a quarter ball must belong to that ball's cell
                let quarter_ok = self
                    .ball_centers
                    .iter()
                    .enumerate()
                    .all(|(j, &cj)| dist(pt(p), pt(cj)) > r || j == own);
                in_three_quarter && quarter_ok
            });
        LevelCheck {
            n: self.n,
            separation,
            covering,
            quarter_disjoint,
            family_covers,
            partition_total,
            sandwich,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub n: i32,
    pub separation: bool,
    pub covering: bool,
    pub quarter_disjoint: bool,
    pub family_covers: bool,
    pub partition_total: bool,
    pub sandwich: bool,
}

impl LevelCheck {
    pub fn all(&self) -> bool {
        self.separation
            && self.covering
            && self.quarter_disjoint
            && self.family_covers
            && self.partition_total
            && self.sandwich
    }
}

/// Net scan order: index order, or a seeded shuffle of it.
pub fn net_ordering(len: usize, seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    if let Some(s) = seed {
        order.shuffle(&mut rng::at(s, rng::streams::NET_ORDER, 0));
    }
    order
}

/// First level at which every ball `B(x, 4 alpha0^n)` centered on the
/// support holds at most `d + 1` points, so every beta number vanishes.
/// `None` when the cloud has repeated points and no such level exists.
pub fn resolution_floor(cloud: &WeightedPointCloud, alpha0: f64, d: usize) -> Option<i32> {
    let gap = cloud
        .kth_neighbor_distances(d + 1)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if gap == 0.0 {
        return None;
    }
    if gap.is_infinite() {
        return Some(i32::MIN);
    }
    // smallest n with 4 alpha0^n < gap
    let mut n = ((gap / 4.0).ln() / alpha0.ln()).floor() as i32;
    while 4.0 * alpha0.powi(n) >= gap {
        n += 1;
    }
    while 4.0 * alpha0.powi(n - 1) < gap {
        n -= 1;
    }
    Some(n)
}

/// The levels `n_min ..= n_max` of a multiresolution family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiresolutionFamily {
    pub alpha0: f64,
    pub levels: Vec<NetLevel>,
}

impl MultiresolutionFamily {
    pub fn build(
        cloud: &WeightedPointCloud,
        alpha0: f64,
        n_min: i32,
        n_max: i32,
        ordering: &[usize],
    ) -> Result<Self, MultiscaleError> {
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(MultiscaleError::BadAlpha(alpha0));
        }
        let levels = (n_min..=n_max)
            .map(|n| NetLevel::build(cloud, n, alpha0, ordering))
            .collect();
        Ok(MultiresolutionFamily { alpha0, levels })
    }

    /// Builds levels from `n_min` down to the last level with a nonzero
    /// beta number (see [`resolution_floor`]), at most [`MAX_LEVELS`].
    pub fn to_resolution(
        cloud: &WeightedPointCloud,
        alpha0: f64,
        d: usize,
        n_min: i32,
        ordering: &[usize],
    ) -> Result<Self, MultiscaleError> {
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(MultiscaleError::BadAlpha(alpha0));
        }
        let cap = n_min + MAX_LEVELS as i32 - 1;
        let n_max = match resolution_floor(cloud, alpha0, d) {
            Some(f) => (f - 1).min(cap),
            None => cap,
        };
        Self::build(cloud, alpha0, n_min, n_max.max(n_min - 1), ordering)
    }

    pub fn n_min(&self) -> Option<i32> {
        self.levels.first().map(|l| l.n)
    }

    pub fn n_max(&self) -> Option<i32> {
        self.levels.last().map(|l| l.n)
    }

    pub fn level(&self, n: i32) -> Option<&NetLevel> {
        let first = self.n_min()?;
        if n < first {
            return None;
        }
        self.levels.get((n - first) as usize)
    }
}

/// A ball of the family, addressed by level and index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyBall {
    pub level: i32,
    pub j: usize,
    pub ball: Ball,
}

/// `D(Q)`: the balls of levels `n >= m(Q)` that meet `Q`, by the
/// center-distance rule. Levels deeper than the family are treated as empty
/// contributions; a family starting below `m(Q)` is an error.
pub fn local_family(family: &MultiresolutionFamily, q: &Ball) -> Result<Vec<FamilyBall>, MultiscaleError> {
    let m = m_of_q(q, family.alpha0);
    match family.n_min() {
        Some(first) if first > m => return Err(MultiscaleError::LevelNotBuilt(m)),
        None => return Ok(Vec::new()),
        _ => {}
    }
    Ok(family
        .levels
        .iter()
        .filter(|l| l.n >= m)
        .flat_map(|l| {
            l.balls
                .iter()
                .enumerate()
                .filter(|(_, b)| b.intersects(q))
                .map(move |(j, b)| FamilyBall {
                    level: l.n,
                    j,
                    ball: b.clone(),
                })
        })
        .collect())
}

/// `Lambda_n(Q)`: indices `j` whose cell `P_{n,j}` meets `Q`.
pub fn lambda_n(cloud: &WeightedPointCloud, level: &NetLevel, q: &Ball) -> Vec<usize> {
    let mut hit = vec![false; level.balls.len()];
    for p in 0..cloud.len() {
        if q.contains(cloud.point(p).coords()) {
            hit[level.partition[p]] = true;
        }
    }
    (0..hit.len()).filter(|&j| hit[j]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlatnessTerm {
    Discrete {
        level: i32,
        j: usize,
        beta2sq: f64,
        mass: f64,
    },
    Continuous {
        x: usize,
        t: f64,
        beta2sq: f64,
        weight: f64,
    },
}

impl FlatnessTerm {
    pub fn contribution(&self) -> f64 {
        match *self {
            FlatnessTerm::Discrete { beta2sq, mass, .. } => beta2sq * mass,
            FlatnessTerm::Continuous { beta2sq, weight, .. } => beta2sq * weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub total: f64,
    pub terms: Vec<FlatnessTerm>,
}

impl FlatnessReport {
    fn from_terms(terms: Vec<FlatnessTerm>) -> Self {
        let total = terms.iter().map(FlatnessTerm::contribution).sum();
        FlatnessReport { total, terms }
    }
}

/// `J^D(Q) = sum over B in D(Q) of beta_2^2(B) mu(B)`.
pub fn jones_flatness_discrete(
    cloud: &WeightedPointCloud,
    q: &Ball,
    family: &MultiresolutionFamily,
    d: usize,
) -> Result<FlatnessReport, MultiscaleError> {
    let balls = local_family(family, q)?;
    let terms = balls
        .par_iter()
        .map(|fb| {
            let idx = cloud.points_in_ball(&fb.ball);
            let b = beta2_indices(cloud, &idx, fb.ball.diam(), d)?;
            Ok(FlatnessTerm::Discrete {
                level: fb.level,
                j: fb.j,
                beta2sq: b.value * b.value,
                mass: b.mass,
            })
        })
        .collect::<Result<Vec<_>, MultiscaleError>>()?;
    Ok(FlatnessReport::from_terms(terms))
}

/// Quadrature of `int_0^{diam B} int_B beta_2^2(x, t) dmu(x) dt/t` on the grid
/// `t_j = diam(B) rho^j`, each level weighted by `ln(1/rho)`.
///
/// With `x_subsample = Some(k)` only `k` evenly strided points of `B` are
/// used, reweighted to carry the full mass of `B`. Scales below the
/// `(d+1)`-th neighbour distance of `x` are skipped since their beta numbers
/// vanish.
pub fn jones_flatness_continuous(
    cloud: &WeightedPointCloud,
    b: &Ball,
    d: usize,
    rho: f64,
    x_subsample: Option<usize>,
) -> Result<FlatnessReport, MultiscaleError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(MultiscaleError::BadRatio(rho));
    }
    let inside = cloud.points_in_ball(b);
    if inside.is_empty() {
        return Ok(FlatnessReport::from_terms(Vec::new()));
    }
    let xs: Vec<usize> = match x_subsample {
        Some(k) if k > 0 && k < inside.len() => (0..k).map(|i| inside[i * inside.len() / k]).collect(),
        _ => inside.clone(),
    };
    let reweight = cloud.mass_of(&inside) / cloud.mass_of(&xs);
    let gaps = cloud.kth_neighbor_distances(d + 1);
    let dt = (1.0 / rho).ln();
    let top = b.diam();
    let terms = xs
        .par_iter()
        .map(|&x| {
            let mut out = Vec::new();
            let mut t = top;
            let mut steps = 0;
            while t >= gaps[x] && steps < 4 * MAX_LEVELS {
                let ball = Ball::new(cloud.point(x).clone(), t).expect("positive radius");
                let idx = cloud.points_in_ball(&ball);
                let beta = beta2_indices(cloud, &idx, ball.diam(), d)?;
                out.push(FlatnessTerm::Continuous {
                    x,
                    t,
                    beta2sq: beta.value * beta.value,
                    weight: cloud.weight(x) * reweight * dt,
                });
                t *= rho;
                steps += 1;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, MultiscaleError>>()?;
    Ok(FlatnessReport::from_terms(terms.into_iter().flatten().collect()))
}
