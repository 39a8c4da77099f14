//! Curvature integrals against product measures, scale classification of
//! simplices, and the concentration sets.
//!
//! Integrals over `mu^{d+2}` are evaluated exactly, by enumerating every
//! ordered tuple, whenever the number of tuples is at most
//! [`McOptions::exact_limit`]; otherwise by Monte Carlo with i.i.d. draws from
//! the normalized restriction. Draw `s` always uses random stream block `s`,
//! and partial sums are combined in sample order, so results are identical
//! for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dist, kernel, GeometryError, Tuple, Vector};
use crate::measure::{Ball, IndexSampler, MeasureError, WeightedPointCloud};
use crate::planes::{beta2_indices, PlaneError};
use crate::rng;

/// Samples per parallel work unit.
const CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("empty restriction")]
    EmptyRestriction,
    #[error("tuple has coinciding vertices at x_0")]
    Coinciding,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Plane(#[from] PlaneError),
}

impl From<MeasureError> for EstimatorError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::EmptyRestriction => EstimatorError::EmptyRestriction,
            other => EstimatorError::BadParameter(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// Scale classification

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ScaleKind {
    WellScaled,
    Scaled {
        k: u32,
        p: u32,
        handles: usize,
        handle_indices: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleClass {
    pub kind: ScaleKind,
    pub scale: f64,
}

fn scale_of(x: &Tuple) -> Result<(f64, f64), EstimatorError> {
    let (min, max) = kernel::edge_range_at0(x.points());
    if min == 0.0 || max == 0.0 {
        return Err(EstimatorError::Coinciding);
    }
    Ok((min / max, max))
}

/// The `k` with `alpha0^{k+1} < s <= alpha0^k`.
pub fn scale_index(s: f64, alpha0: f64) -> u32 {
    let mut k = (s.ln() / alpha0.ln()).floor().max(0.0) as i64;
    while k > 0 && s > alpha0.powi(k as i32) {
        k -= 1;
    }
    while s <= alpha0.powi(k as i32 + 1) {
        k += 1;
    }
    k as u32
}

/// Handles at level `k`: indices `i >= 1` with `|x_i - x_0| / max_at0 > alpha0^k`.
/// A longest edge always counts as a handle, which only matters at `k = 0`.
pub fn handle_indices(x: &Tuple, alpha0: f64, k: u32) -> Vec<usize> {
    let pts = x.points();
    let (_, max) = kernel::edge_range_at0(pts);
    let threshold = alpha0.powi(k as i32);
    (1..pts.len())
        .filter(|&i| {
            let e = dist(pts[i].coords(), pts[0].coords());
            e / max > threshold || e == max
        })
        .collect()
}

/// Classifies `X` at `x_0`. For `p = 1` the index `k` is unique; for larger
/// `p` the smallest admissible `k` is chosen.
pub fn classify_scale(x: &Tuple, alpha0: f64, p: u32) -> Result<ScaleClass, EstimatorError> {
    if p == 0 {
        return Err(EstimatorError::BadParameter("p must be at least 1".into()));
    }
    let (s, _) = scale_of(x)?;
    if s > alpha0.powi(3) {
        return Ok(ScaleClass {
            kind: ScaleKind::WellScaled,
            scale: s,
        });
    }
    let k1 = scale_index(s, alpha0);
    let k = k1.saturating_sub(p - 1);
    let handle_indices = handle_indices(x, alpha0, k);
    Ok(ScaleClass {
        kind: ScaleKind::Scaled {
            k,
            p,
            handles: handle_indices.len(),
            handle_indices,
        },
        scale: s,
    })
}

/// Handle indices if `X` lies in `S_{k,p}`, i.e. `alpha0^{k+p} < scale <= alpha0^k`.
pub fn in_scale_class(x: &Tuple, alpha0: f64, k: u32, p: u32) -> Option<Vec<usize>> {
    let (s, _) = scale_of(x).ok()?;
    let inside = s <= alpha0.powi(k as i32) && s > alpha0.powi((k + p) as i32);
    inside.then(|| handle_indices(x, alpha0, k))
}

/// Membership in the canonical cell whose handles are exactly `1..=n`.
pub fn in_canonical_cell(x: &Tuple, alpha0: f64, k: u32, p: u32, n: usize) -> bool {
    in_scale_class(x, alpha0, k, p).is_some_and(|h| h == (1..=n).collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// Integration engine

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Enumerate exactly when the tuple count is at most this.
    pub exact_limit: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_samples: 100_000,
            seed: 0,
            exact_limit: 1e7,
        }
    }
}

impl McOptions {
    pub fn monte_carlo(n_samples: usize, seed: u64) -> Self {
        McOptions {
            n_samples,
            seed,
            exact_limit: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    /// `mean * mass_factor`.
    pub estimate: f64,
    pub mean: f64,
    /// Standard error of `estimate`; zero in exact mode.
    pub std_error: f64,
    pub n_samples: u64,
    /// `mu(Q)^{d+2}`.
    pub mass_factor: f64,
    pub exact: bool,
}

struct Integral<const K: usize> {
    means: [f64; K],
    std_errors: [f64; K],
    n: u64,
    mass_factor: f64,
    exact: bool,
}

impl<const K: usize> Integral<K> {
    fn estimate(&self, k: usize) -> MCEstimate {
        MCEstimate {
            estimate: self.means[k] * self.mass_factor,
            mean: self.means[k],
            std_error: self.std_errors[k] * self.mass_factor,
            n_samples: self.n,
            mass_factor: self.mass_factor,
            exact: self.exact,
        }
    }
}

fn tuple_count(k: usize, m: usize) -> f64 {
    (k as f64).powi(m as i32)
}

/// Integrates `f` over ordered `m`-tuples from the normalized restriction of
/// `cloud` to `indices`.
fn integrate<const K: usize, F>(
    cloud: &WeightedPointCloud,
    indices: Vec<usize>,
    m: usize,
    opts: &McOptions,
    f: F,
) -> Result<Integral<K>, EstimatorError>
where
    F: Fn(&[&[f64]]) -> [f64; K] + Sync,
{
    if indices.is_empty() {
        return Err(EstimatorError::EmptyRestriction);
    }
    let mass = cloud.mass_of(&indices);
    let mass_factor = mass.powi(m as i32);
    if tuple_count(indices.len(), m) <= opts.exact_limit {
        let sums = exhaustive_sum(cloud, &indices, m, &f);
        let mut means = [0.0; K];
        for k in 0..K {
            means[k] = sums[k] / mass_factor;
        }
        return Ok(Integral {
            means,
            std_errors: [0.0; K],
            n: tuple_count(indices.len(), m) as u64,
            mass_factor,
            exact: true,
        });
    }
    if opts.n_samples == 0 {
        return Err(EstimatorError::BadParameter("n_samples must be positive".into()));
    }
    let values = sample_values(cloud, indices, m, opts, &f)?;
    let n = values.len() as f64;
    let mut means = [0.0; K];
    let mut std_errors = [0.0; K];
    for k in 0..K {
        let mean = values.iter().map(|v| v[k]).sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        means[k] = mean;
        std_errors[k] = (var / n).sqrt();
    }
    Ok(Integral {
        means,
        std_errors,
        n: values.len() as u64,
        mass_factor,
        exact: false,
    })
}

/// Per-sample values of `f` on `opts.n_samples` i.i.d. tuples, in sample order.
fn sample_values<const K: usize, F>(
    cloud: &WeightedPointCloud,
    indices: Vec<usize>,
    m: usize,
    opts: &McOptions,
    f: &F,
) -> Result<Vec<[f64; K]>, EstimatorError>
where
    F: Fn(&[&[f64]]) -> [f64; K] + Sync,
{
    let sampler = IndexSampler::new(cloud, indices)?;
    let n_chunks = opts.n_samples.div_ceil(CHUNK);
    let chunks: Vec<Vec<[f64; K]>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(opts.n_samples);
            let mut buf: Vec<&[f64]> = Vec::with_capacity(m);
            (lo..hi)
                .map(|s| {
                    let mut r = rng::at(opts.seed, rng::streams::TUPLES, s as u64);
                    buf.clear();
                    for _ in 0..m {
                        buf.push(cloud.point(sampler.draw(&mut r)).coords());
                    }
                    f(&buf)
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// `sum over ordered tuples of prod w_i * f(tuple)`, parallel over the first
/// coordinate and summed in index order.
fn exhaustive_sum<const K: usize, F>(cloud: &WeightedPointCloud, indices: &[usize], m: usize, f: &F) -> [f64; K]
where
    F: Fn(&[&[f64]]) -> [f64; K] + Sync,
{
    let len = indices.len();
    let partial: Vec<[f64; K]> = (0..len)
        .into_par_iter()
        .map(|a| {
            let mut acc = [0.0; K];
            let mut digits = vec![0usize; m];
            digits[0] = a;
            let mut buf: Vec<&[f64]> = Vec::with_capacity(m);
            loop {
                buf.clear();
                let mut w = 1.0;
                for &dgt in &digits {
                    let i = indices[dgt];
                    w *= cloud.weight(i);
                    buf.push(cloud.point(i).coords());
                }
                let v = f(&buf);
                for k in 0..K {
                    acc[k] += w * v[k];
                }
                // odometer over digits 1..m
                let mut pos = m;
                loop {
                    if pos == 1 {
                        return acc;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < len {
                        break;
                    }
                    digits[pos] = 0;
                }
            }
        })
        .collect();
    let mut total = [0.0; K];
    for p in partial {
        for k in 0..K {
            total[k] += p[k];
        }
    }
    total
}

fn check_order(d: usize) -> Result<(), EstimatorError> {
    if d == 0 {
        return Err(EstimatorError::BadParameter("d must be at least 1".into()));
    }
    Ok(())
}

fn restriction_indices(cloud: &WeightedPointCloud, q: Option<&Ball>) -> Vec<usize> {
    match q {
        Some(b) => cloud.points_in_ball(b),
        None => (0..cloud.len()).collect(),
    }
}

/// Curvature integral with its by-products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEstimate {
    /// `c_d^2(mu|_Q)` from the symmetric (all-vertex) form.
    pub curvature: MCEstimate,
    /// The same integral from `psin_{x_0}^2 / diam^{d(d+1)}` alone.
    pub base_form: MCEstimate,
    /// Largest relative gap between the polar-sine and volume forms of
    /// `c_d^2` over the evaluated tuples.
    pub identity_gap: f64,
}

/// `c_d^2(mu|_Q) = int c_d^2 dmu|_Q^{d+2}`.
pub fn continuous_curvature_sq(
    cloud: &WeightedPointCloud,
    q: Option<&Ball>,
    d: usize,
    opts: &McOptions,
) -> Result<CurvatureEstimate, EstimatorError> {
    check_order(d)?;
    let integral = integrate(cloud, restriction_indices(cloud, q), d + 2, opts, |t| {
        [kernel::curvature_sq(t), kernel::base_curvature_sq(t)]
    })?;
    let identity_gap = max_identity_gap(cloud, q, d, opts);
    Ok(CurvatureEstimate {
        curvature: integral.estimate(0),
        base_form: integral.estimate(1),
        identity_gap,
    })
}

/// Maximum relative gap between the two curvature forms on the first
/// (at most 2048) tuples of the sample stream.
fn max_identity_gap(cloud: &WeightedPointCloud, q: Option<&Ball>, d: usize, opts: &McOptions) -> f64 {
    let probe = McOptions::monte_carlo(opts.n_samples.clamp(1, CHUNK), opts.seed);
    let Ok(values) = sample_values(cloud, restriction_indices(cloud, q), d + 2, &probe, &|t: &[&[f64]]| {
        let c2 = kernel::curvature_sq(t);
        let vol = kernel::curvature_sq_volume_form(t);
        let scale = c2.max(vol);
        if scale > 0.0 && kernel::polar_sine(t, 0) > 1e-6 {
            [(c2 - vol).abs() / scale]
        } else {
            [0.0]
        }
    }) else {
        return 0.0;
    };
    values.iter().map(|v| v[0]).fold(0.0, f64::max)
}

/// Exhaustive `c_d^2(mu|_Q)` regardless of the tuple count.
pub fn exhaustive_curvature_sq(cloud: &WeightedPointCloud, q: Option<&Ball>, d: usize) -> Result<f64, EstimatorError> {
    check_order(d)?;
    let idx = restriction_indices(cloud, q);
    if idx.is_empty() {
        return Err(EstimatorError::EmptyRestriction);
    }
    Ok(exhaustive_sum(cloud, &idx, d + 2, &|t: &[&[f64]]| [kernel::curvature_sq(t)])[0])
}

/// `int_{U_lambda(B)} c_d^2 dmu^{d+2}`: tuples in `B` whose minimal pairwise
/// distance is at least `lambda * radius(B)`.
pub fn curvature_over_ulambda(
    cloud: &WeightedPointCloud,
    b: &Ball,
    lambda: f64,
    d: usize,
    opts: &McOptions,
) -> Result<MCEstimate, EstimatorError> {
    check_order(d)?;
    if !(lambda > 0.0) {
        return Err(EstimatorError::BadParameter("lambda must be positive".into()));
    }
    let sep = lambda * b.radius();
    let integral = integrate(cloud, cloud.points_in_ball(b), d + 2, opts, |t| {
        if kernel::min_pairwise(t) >= sep {
            [kernel::curvature_sq(t)]
        } else {
            [0.0]
        }
    })?;
    Ok(integral.estimate(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioFlag {
    /// Both sides vanish; the ratio is reported as 0.
    ZeroOverZero,
    /// `beta_2 = 0` but the left side does not vanish.
    ZeroDenominator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop11Ratio {
    pub lhs: MCEstimate,
    pub beta2sq: f64,
    pub mass: f64,
    pub ratio: f64,
    pub flag: Option<RatioFlag>,
}

/// Quantities below this count as zero in ratio conventions.
pub const RATIO_ZERO: f64 = 1e-24;

/// `int_{U_lambda(B(x,t))} c_d^2 / (beta_2^2(x,t) mu(B(x,t)))`.
pub fn prop11_ratio(
    cloud: &WeightedPointCloud,
    x: &Vector,
    t: f64,
    lambda: f64,
    d: usize,
    opts: &McOptions,
) -> Result<Prop11Ratio, EstimatorError> {
    let b = Ball::new(x.clone(), t).map_err(|e| EstimatorError::BadParameter(e.to_string()))?;
    let lhs = curvature_over_ulambda(cloud, &b, lambda, d, opts)?;
    let idx = cloud.points_in_ball(&b);
    let beta = beta2_indices(cloud, &idx, b.diam(), d)?;
    let beta2sq = beta.value * beta.value;
    let denom = beta2sq * beta.mass;
    let (ratio, flag) = if denom > RATIO_ZERO {
        (lhs.estimate / denom, None)
    } else if lhs.estimate.abs() <= RATIO_ZERO {
        (0.0, Some(RatioFlag::ZeroOverZero))
    } else {
        (f64::INFINITY, Some(RatioFlag::ZeroDenominator))
    };
    Ok(Prop11Ratio {
        lhs,
        beta2sq,
        mass: beta.mass,
        ratio,
        flag,
    })
}

// ---------------------------------------------------------------------------
// Concentration sets

fn psin0_replaced(x: &Tuple, y: &[f64], i: usize) -> f64 {
    let pts: Vec<&[f64]> = x
        .points()
        .iter()
        .enumerate()
        .map(|(k, p)| if k == i { y } else { p.coords() })
        .collect();
    kernel::polar_sine(&pts, 0)
}

/// `y in U_C(X, i, j)`: `psin(X) <= C (psin(X(y,i)) + psin(X(y,j)))`.
pub fn concentration_set_member(x: &Tuple, i: usize, j: usize, y: &Vector, c: f64) -> Result<bool, EstimatorError> {
    let n = x.len();
    if !(1 <= i && i < j && j < n) {
        return Err(EstimatorError::BadParameter(format!("need 1 <= i < j <= {}", n - 1)));
    }
    let lhs = kernel::polar_sine(x.points(), 0);
    let rhs = c * (psin0_replaced(x, y.coords(), i) + psin0_replaced(x, y.coords(), j));
    Ok(lhs <= rhs)
}

/// `mu(U_C(X,i,j) cap B(x_0, r)) / mu(B(x_0, r))` by an exact weighted scan.
pub fn concentration_fraction(
    cloud: &WeightedPointCloud,
    x: &Tuple,
    i: usize,
    j: usize,
    r: f64,
    c: f64,
) -> Result<f64, EstimatorError> {
    let ball = Ball::new(x.vertex(0).clone(), r).map_err(|e| EstimatorError::BadParameter(e.to_string()))?;
    let idx = cloud.points_in_ball(&ball);
    if idx.is_empty() {
        return Err(EstimatorError::EmptyRestriction);
    }
    let mut inside = 0.0;
    for &p in &idx {
        if concentration_set_member(x, i, j, cloud.point(p), c)? {
            inside += cloud.weight(p);
        }
    }
    Ok(inside / cloud.mass_of(&idx))
}

// ---------------------------------------------------------------------------
// Decomposition by scale and handle count

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCell {
    pub k: u32,
    pub n: usize,
    /// Estimate of the integral over `S^n_{k,1}`.
    pub estimate: f64,
    pub count: u64,
    /// `binom(d+1, n)` times the estimate over the canonical cell with
    /// handles `1..=n`; equal to `estimate` in expectation.
    pub canonical_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub total: MCEstimate,
    pub well_scaled: f64,
    pub well_scaled_count: u64,
    pub cells: Vec<DecompositionCell>,
    /// Classes deeper than `k_max`.
    pub tail: f64,
    pub tail_count: u64,
    /// Tuples with a vertex at `x_0` (integrand zero).
    pub degenerate_count: u64,
    /// `|sum of classes - total| / max(|total|, tiny)`.
    pub bookkeeping_gap: f64,
    /// Every sample fell in exactly one class.
    pub partition_ok: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Splits the estimator of `int psin_{x_0}^2 / diam^{d(d+1)}` over the
/// well-scaled class and the cells `S^n_{k,1}`, on one sample stream.
pub fn decomposition_check(
    cloud: &WeightedPointCloud,
    q: Option<&Ball>,
    d: usize,
    alpha0: f64,
    k_max: u32,
    opts: &McOptions,
) -> Result<DecompositionReport, EstimatorError> {
    check_order(d)?;
    let idx = restriction_indices(cloud, q);
    if idx.is_empty() {
        return Err(EstimatorError::EmptyRestriction);
    }
    let m = d + 2;
    let mass_factor = cloud.mass_of(&idx).powi(m as i32);
    let sampler = IndexSampler::new(cloud, idx)?;
    // (value, class) per sample, in order
    #[derive(Clone, Copy)]
    enum Class {
        Degenerate,
        Well,
        Cell { k: u32, n: usize, canonical: bool },
        Tail,
    }
    let samples: Vec<(f64, Class)> = (0..opts.n_samples)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|s| {
            let mut r = rng::at(opts.seed, rng::streams::TUPLES, s as u64);
            let pts: Vec<Vector> = (0..m).map(|_| cloud.point(sampler.draw(&mut r)).clone()).collect();
            let t = Tuple::new(pts).expect("consistent dimensions");
            let v = kernel::base_curvature_sq(t.points());
            let class = match classify_scale(&t, alpha0, 1) {
                Err(_) => Class::Degenerate,
                Ok(ScaleClass {
                    kind: ScaleKind::WellScaled,
                    ..
                }) => Class::Well,
                Ok(ScaleClass {
                    kind: ScaleKind::Scaled { k, handle_indices, .. },
                    ..
                }) => {
                    if k > k_max {
                        Class::Tail
                    } else {
                        let n = handle_indices.len();
                        let canonical = handle_indices == (1..=n).collect::<Vec<_>>();
                        Class::Cell { k, n, canonical }
                    }
                }
            };
            (v, class)
        })
        .collect();

    let n = samples.len() as f64;
    let scale = mass_factor / n;
    let mut total = 0.0;
    let mut sq = 0.0;
    let mut well = (0.0, 0u64);
    let mut tail = (0.0, 0u64);
    let mut degenerate = 0u64;
    let cells_k = (3..=k_max.max(3)).collect::<Vec<u32>>();
    let mut cells = vec![vec![(0.0, 0u64, 0.0); d + 2]; cells_k.len()];
    let mut classified = 0u64;
    for &(v, class) in &samples {
        total += v;
        sq += v * v;
        match class {
            Class::Degenerate => {
                degenerate += 1;
                classified += 1;
            }
            Class::Well => {
                well.0 += v;
                well.1 += 1;
                classified += 1;
            }
            Class::Tail => {
                tail.0 += v;
                tail.1 += 1;
                classified += 1;
            }
            Class::Cell { k, n: h, canonical } => {
                let cell = &mut cells[(k - 3) as usize][h];
                cell.0 += v;
                cell.1 += 1;
                if canonical {
                    cell.2 += v;
                }
                classified += 1;
            }
        }
    }
    let mean = total / n;
    let var = if n > 1.0 { (sq / n - mean * mean).max(0.0) * n / (n - 1.0) } else { 0.0 };
    let mut out_cells = Vec::new();
    let mut class_sum = well.0 + tail.0;
    for (ki, row) in cells.iter().enumerate() {
        for (h, &(s, c, canon)) in row.iter().enumerate() {
            class_sum += s;
            if c > 0 || canon > 0.0 {
                out_cells.push(DecompositionCell {
                    k: cells_k[ki],
                    n: h,
                    estimate: s * scale,
                    count: c,
                    canonical_weighted: binomial(d + 1, h) * canon * scale,
                });
            }
        }
    }
    let bookkeeping_gap = (class_sum - total).abs() / total.abs().max(f64::MIN_POSITIVE);
    Ok(DecompositionReport {
        total: MCEstimate {
            estimate: mean * mass_factor,
            mean,
            std_error: (var / n).sqrt() * mass_factor,
            n_samples: samples.len() as u64,
            mass_factor,
            exact: false,
        },
        well_scaled: well.0 * scale,
        well_scaled_count: well.1,
        cells: out_cells,
        tail: tail.0 * scale,
        tail_count: tail.1,
        degenerate_count: degenerate,
        bookkeeping_gap,
        partition_ok: classified == samples.len() as u64,
    })
}
