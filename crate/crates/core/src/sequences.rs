//! Constants, well-scaled and rake sequences, augmented-set predicates and
//! the samplers that draw pieces for them.
//!
//! The sequence constructors are generic over the element type so that they
//! can be exercised on symbolic labels as well as on points. Tuple positions
//! are 0-based with `x_0` at position 0, so "coordinate `i`" is position `i`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{handle_indices, in_scale_class};
use crate::geometry::{dist, kernel, Tuple, Vector};
use crate::measure::{IndexSampler, WeightedPointCloud};
use crate::rng;

/// Relative slack when comparing the two sides of an inequality that holds
/// exactly in real arithmetic.
pub const INEQUALITY_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("expected {expected} {what}, got {got}")]
    Size {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

// ---------------------------------------------------------------------------
// Constants

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub d: usize,
    pub cmu: f64,
    pub cp: f64,
    pub alpha0: f64,
    /// True when `alpha0` was replaced by [`Constants::with_alpha0`].
    pub alpha0_overridden: bool,
}

/// `C_p(d, C_mu)` and `alpha0(d, C_mu)`.
pub fn constants(d: usize, cmu: f64) -> Result<Constants, SequenceError> {
    if d == 0 {
        return Err(SequenceError::BadParameter("d must be at least 1".into()));
    }
    if !(cmu >= 1.0 && cmu.is_finite()) {
        return Err(SequenceError::BadParameter(format!("C_mu must be >= 1, got {cmu}")));
    }
    let (cp, alpha0) = if d == 1 {
        (1.0, 1.0 / (4.0 * cmu * cmu))
    } else {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let arg = 2f64.powf(-(2.5 * d as f64 + 1.0)) / (cmu * cmu);
        let cp = 5f64.sqrt() * pi2 / (4.0 * arg.asin());
        let a = 1.0 / (2.0 * cp * cp);
        let other = (1.0 / (4.0 * cmu * cmu)).powf(1.0 / d as f64);
        assert!(a <= other, "alpha0 minimum resolves to the polar-sine term for d > 1");
        (cp, a)
    };
    Ok(Constants {
        d,
        cmu,
        cp,
        alpha0,
        alpha0_overridden: false,
    })
}

impl Constants {
    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        self.alpha0_overridden = true;
        self
    }

    pub fn with_cp(mut self, cp: f64) -> Self {
        self.cp = cp;
        self
    }
}

/// `N_k = (k+1) d + 2`, the length of a simplex with a well-scaled piece.
pub fn n_k(k: usize, d: usize) -> usize {
    (k + 1) * d + 2
}

/// `N_n = 2^{n-1} - 1`, the length of a short-scale piece.
pub fn short_piece_len(n: usize) -> usize {
    (1usize << (n - 1)) - 1
}

/// `M_n = d + 1 + 2^{n-1}`, the length of a simplex with a short-scale piece.
pub fn m_n(n: usize, d: usize) -> usize {
    d + 1 + (1usize << (n - 1))
}

/// The element of `{2, ..., d+1}` congruent to `a` modulo `d`.
pub fn bar_index(a: usize, d: usize) -> usize {
    let mut r = a % d;
    while r < 2 {
        r += d;
    }
    r
}

/// `k - ceil(q/d)`: the annulus index of the `q`-th point of a well-scaled piece.
pub fn piece_level(q: usize, k: usize, d: usize) -> usize {
    k - q.div_ceil(d)
}

/// `y in A_m(x, r) = B(x, alpha0^m r) \ B(x, alpha0^{m+1} r)`.
pub fn in_annulus(x: &[f64], r: f64, m: usize, alpha0: f64, y: &[f64]) -> bool {
    let t = dist(x, y);
    t <= alpha0.powi(m as i32) * r && t > alpha0.powi(m as i32 + 1) * r
}

// ---------------------------------------------------------------------------
// Augmented elements

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    WellScaled(Vec<Vector>),
    ShortScale(Vec<Vector>),
}

/// A simplex together with the piece used to interpolate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedElement {
    pub x: Tuple,
    pub piece: Piece,
    pub k: usize,
    pub p: usize,
    pub n: usize,
}

impl AugmentedElement {
    /// Total number of points: `N_k` or `M_n`.
    pub fn len(&self) -> usize {
        self.x.len()
            + match &self.piece {
                Piece::WellScaled(y) => y.len(),
                Piece::ShortScale(z) => z.len(),
            }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Checks the annulus invariants of the piece.
    pub fn piece_in_annuli(&self, alpha0: f64) -> bool {
        let d = self.x.order() - 1;
        let x0 = self.x.vertex(0).coords();
        let Ok(m) = self.x.max_at0() else {
            return false;
        };
        match &self.piece {
            Piece::WellScaled(y) => y
                .iter()
                .enumerate()
                .all(|(i, yq)| in_annulus(x0, m, piece_level(i + 1, self.k, d), alpha0, yq.coords())),
            Piece::ShortScale(z) => z.iter().all(|zs| in_annulus(x0, m, self.k, alpha0, zs.coords())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceBundle {
    pub auxiliary: Vec<Tuple>,
    pub main: Vec<Tuple>,
}

// ---------------------------------------------------------------------------
// Well-scaled sequences

fn check_sizes<T>(x: &[T], y: &[T], k: usize, d: usize) -> Result<(), SequenceError> {
    if d == 0 || k == 0 {
        return Err(SequenceError::BadParameter("need d >= 1 and k >= 1".into()));
    }
    if x.len() != d + 2 {
        return Err(SequenceError::Size {
            what: "simplex points",
            expected: d + 2,
            got: x.len(),
        });
    }
    if y.len() != k * d {
        return Err(SequenceError::Size {
            what: "piece points",
            expected: k * d,
            got: y.len(),
        });
    }
    Ok(())
}

fn replaced<T: Clone>(x: &[T], y: &T, i: usize) -> Vec<T> {
    let mut out = x.to_vec();
    out[i] = y.clone();
    out
}

/// `X~_0 = X`, `X~_q = X~_{q-1}(y_q, bar(q+1))` for `q = 1..kd`.
pub fn auxiliary_sequence<T: Clone>(x: &[T], y: &[T], k: usize, d: usize) -> Result<Vec<Vec<T>>, SequenceError> {
    check_sizes(x, y, k, d)?;
    let mut seq = Vec::with_capacity(k * d + 1);
    seq.push(x.to_vec());
    for q in 1..=k * d {
        let next = replaced(&seq[q - 1], &y[q - 1], bar_index(q + 1, d));
        seq.push(next);
    }
    Ok(seq)
}

/// `X_q = X~_{q-1}(y_q, 1)` for `q = 1..kd`, then `X_{kd+1} = X~_{kd}`.
pub fn well_scaled_sequence<T: Clone>(x: &[T], y: &[T], k: usize, d: usize) -> Result<Vec<Vec<T>>, SequenceError> {
    let aux = auxiliary_sequence(x, y, k, d)?;
    let mut seq: Vec<Vec<T>> = (1..=k * d).map(|q| replaced(&aux[q - 1], &y[q - 1], 1)).collect();
    seq.push(aux[k * d].clone());
    Ok(seq)
}

fn to_tuple(points: Vec<Vector>) -> Tuple {
    Tuple::new(points).expect("points share a dimension")
}

/// Both sequences as tuples.
pub fn well_scaled_bundle(x: &Tuple, y: &[Vector], k: usize, d: usize) -> Result<SequenceBundle, SequenceError> {
    let aux = auxiliary_sequence(x.points(), y, k, d)?;
    let main = well_scaled_sequence(x.points(), y, k, d)?;
    Ok(SequenceBundle {
        auxiliary: aux.into_iter().map(to_tuple).collect(),
        main: main.into_iter().map(to_tuple).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    /// 1-based sequence index.
    pub q: usize,
    pub reason: String,
}

/// Checks the scale bounds of a well-scaled sequence `seq = (X_1, ..., X_{kd+1})`.
pub fn check_well_scaled_bounds(seq: &[Tuple], x: &Tuple, k: usize, d: usize, alpha0: f64) -> Result<(), BoundViolation> {
    let m = x.max_at0().map_err(|_| BoundViolation {
        q: 0,
        reason: "X has max_at0 = 0".into(),
    })?;
    if seq.len() != k * d + 1 {
        return Err(BoundViolation {
            q: 0,
            reason: format!("sequence length {} != {}", seq.len(), k * d + 1),
        });
    }
    let well = alpha0.powi(3);
    for (i, xq) in seq.iter().enumerate() {
        let q = i + 1;
        let (lo, hi) = kernel::edge_range_at0(xq.points());
        let fail = |reason: String| Err(BoundViolation { q, reason });
        if lo == 0.0 {
            return fail("coinciding vertices at x_0".into());
        }
        if q <= k * d {
            let e = piece_level(q, k, d) as i32;
            if !(alpha0.powi(e + 1) * m < hi && hi <= alpha0.powi(e) * m) {
                return fail(format!("max_at0 = {hi} outside (a^{}, a^{e}] * {m}", e + 1));
            }
        } else {
            if !(lo > alpha0 * m) {
                return fail(format!("min_at0 = {lo} <= alpha0 * {m}"));
            }
            if (hi - m).abs() > INEQUALITY_RTOL * m {
                return fail(format!("max_at0 = {hi} != {m}"));
            }
        }
        if !(lo / hi > well) {
            return fail(format!("not well-scaled: scale {}", lo / hi));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipCheck {
    pub member: bool,
    /// First failing inequality: `(q, 0)` for the augmented set, `(j, m)` for
    /// the rake set.
    pub first_violation: Option<(usize, usize)>,
}

fn psin0<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    kernel::polar_sine(points, 0)
}

/// Evaluates `psin(X~_q) <= C_p (psin(X_{q+1}) + psin(X~_{q+1}))` for
/// `0 <= q < kd`. A violation is reported as `(q, 0)`.
pub fn is_in_augmented_set(x: &Tuple, y: &[Vector], k: usize, d: usize, cp: f64) -> Result<MembershipCheck, SequenceError> {
    let aux = auxiliary_sequence(x.points(), y, k, d)?;
    let main = well_scaled_sequence(x.points(), y, k, d)?;
    for q in 0..k * d {
        if !two_term(psin0(&aux[q]), psin0(&main[q]), psin0(&aux[q + 1]), cp) {
            return Ok(MembershipCheck {
                member: false,
                first_violation: Some((q, 0)),
            });
        }
    }
    Ok(MembershipCheck {
        member: true,
        first_violation: None,
    })
}

fn two_term(lhs: f64, a: f64, b: f64, cp: f64) -> bool {
    lhs <= cp * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            holds: lhs <= rhs * (1.0 + INEQUALITY_RTOL),
            lhs,
            rhs,
        }
    }
}

/// `psin^2(X) <= (kd+1) C_p^{2kd} sum_q psin^2(X_q)`.
pub fn multiscale_inequality_check(
    x: &Tuple,
    y: &[Vector],
    cp: f64,
    k: usize,
    d: usize,
) -> Result<InequalityCheck, SequenceError> {
    let main = well_scaled_sequence(x.points(), y, k, d)?;
    let lhs = psin0(x.points()).powi(2);
    let sum: f64 = main.iter().map(|t| psin0(t).powi(2)).sum();
    let kd = (k * d) as i32;
    let rhs = (kd + 1) as f64 * cp.powi(2 * kd) * sum;
    Ok(InequalityCheck::new(lhs, rhs))
}

// ---------------------------------------------------------------------------
// Rake trees

fn check_rake_sizes<T>(x: &[T], z: &[T], n: usize, d: usize) -> Result<(), SequenceError> {
    if !(n >= 2 && n <= d) {
        return Err(SequenceError::BadParameter(format!("need 1 < n <= d, got n = {n}, d = {d}")));
    }
    if x.len() != d + 2 {
        return Err(SequenceError::Size {
            what: "simplex points",
            expected: d + 2,
            got: x.len(),
        });
    }
    if z.len() != short_piece_len(n) {
        return Err(SequenceError::Size {
            what: "piece points",
            expected: short_piece_len(n),
            got: z.len(),
        });
    }
    Ok(())
}

/// Index `s` of the piece point used below node `(j, m)` (1-based `m`).
pub fn rake_piece_index(j: usize, m: usize) -> usize {
    (1 << j) + m - 1
}

/// Children of `Z^j_m`: `Z^{j+1}_{2m-1} = Z^j_m(z_s, n-j)` and
/// `Z^{j+1}_{2m} = sigma_j(Z^j_m(z_s, n-j-1))` with `sigma_j` swapping
/// coordinates `n-j-1` and `n-j`.
fn rake_children<T: Clone>(node: &[T], z: &T, n: usize, j: usize) -> (Vec<T>, Vec<T>) {
    let left = replaced(node, z, n - j);
    let mut right = replaced(node, z, n - j - 1);
    right.swap(n - j - 1, n - j);
    (left, right)
}

/// The rake tree as levels `j = 0..n-1`, level `j` holding `Z^j_1..Z^j_{2^j}`.
pub fn rake_tree<T: Clone>(x: &[T], z: &[T], n: usize, d: usize) -> Result<Vec<Vec<Vec<T>>>, SequenceError> {
    check_rake_sizes(x, z, n, d)?;
    let mut levels = vec![vec![x.to_vec()]];
    for j in 0..n - 1 {
        let mut next = Vec::with_capacity(1 << (j + 1));
        for (mi, node) in levels[j].iter().enumerate() {
            let s = rake_piece_index(j, mi + 1);
            let (l, r) = rake_children(node, &z[s - 1], n, j);
            next.push(l);
            next.push(r);
        }
        levels.push(next);
    }
    Ok(levels)
}

/// The leaves `X^s = Z^{n-1}_s`.
pub fn rake_sequence<T: Clone>(x: &[T], z: &[T], n: usize, d: usize) -> Result<Vec<Vec<T>>, SequenceError> {
    Ok(rake_tree(x, z, n, d)?.pop().expect("at least one level"))
}

pub fn rake_bundle(x: &Tuple, z: &[Vector], n: usize, d: usize) -> Result<SequenceBundle, SequenceError> {
    let tree = rake_tree(x.points(), z, n, d)?;
    let main = tree.last().expect("levels").iter().cloned().map(to_tuple).collect();
    Ok(SequenceBundle {
        auxiliary: tree.into_iter().flatten().map(to_tuple).collect(),
        main,
    })
}

/// Verifies that every leaf is a single-handled element of `S_{k',2}` for
/// some `0 <= k' <= k-1`; returns the first failing leaf (1-based).
pub fn check_rake_property(leaves: &[Tuple], k: usize, alpha0: f64) -> Result<(), usize> {
    for (s, leaf) in leaves.iter().enumerate() {
        let ok = (0..k as u32).any(|kp| in_scale_class(leaf, alpha0, kp, 2).is_some_and(|h| h.len() == 1));
        if !ok {
            return Err(s + 1);
        }
    }
    Ok(())
}

/// `psin(Z^j_m) <= C_p (psin(Z^{j+1}_{2m-1}) + psin(Z^{j+1}_{2m}))` at every
/// node; a violation is reported as `(j, m)`.
pub fn is_in_overline_set(x: &Tuple, z: &[Vector], n: usize, cp: f64) -> Result<MembershipCheck, SequenceError> {
    let d = x.order() - 1;
    let tree = rake_tree(x.points(), z, n, d)?;
    for j in 0..n - 1 {
        for (mi, node) in tree[j].iter().enumerate() {
            let l = &tree[j + 1][2 * mi];
            let r = &tree[j + 1][2 * mi + 1];
            if !two_term(psin0(node), psin0(l), psin0(r), cp) {
                return Ok(MembershipCheck {
                    member: false,
                    first_violation: Some((j, mi + 1)),
                });
            }
        }
    }
    Ok(MembershipCheck {
        member: true,
        first_violation: None,
    })
}

/// `psin^2(X) <= 2^{n-1} C_p^{2(n-1)} sum_s psin^2(X^s)`.
pub fn rake_inequality_check(x: &Tuple, z: &[Vector], cp: f64, n: usize) -> Result<InequalityCheck, SequenceError> {
    let d = x.order() - 1;
    let leaves = rake_sequence(x.points(), z, n, d)?;
    let lhs = psin0(x.points()).powi(2);
    let sum: f64 = leaves.iter().map(|t| psin0(t).powi(2)).sum();
    let rhs = (1u64 << (n - 1)) as f64 * cp.powi(2 * (n as i32 - 1)) * sum;
    Ok(InequalityCheck::new(lhs, rhs))
}

// ---------------------------------------------------------------------------
// Samplers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PieceFailure {
    /// No cloud point lies in the required annulus.
    EmptyAnnulus { coordinate: usize },
    /// Every draw for this coordinate was rejected.
    Exhausted { coordinate: usize, attempts: usize },
    BadInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPiece {
    pub points: Vec<Vector>,
    /// Draws used per coordinate (1 = first candidate accepted).
    pub attempts: Vec<usize>,
}

fn annulus_sampler(cloud: &WeightedPointCloud, x0: &[f64], r: f64, level: usize, alpha0: f64) -> Option<IndexSampler> {
    let idx: Vec<usize> = (0..cloud.len())
        .filter(|&i| in_annulus(x0, r, level, alpha0, cloud.point(i).coords()))
        .collect();
    IndexSampler::new(cloud, idx).ok()
}

/// Draws a well-scaled piece for `X` point by point from the cloud: `y_q` is
/// drawn from the cloud's restriction to its annulus and kept iff the `q`-th
/// two-term inequality holds, with up to `max_attempts` draws per coordinate.
#[allow(clippy::too_many_arguments)]
pub fn sample_well_scaled_piece(
    cloud: &WeightedPointCloud,
    x: &Tuple,
    k: usize,
    cp: f64,
    alpha0: f64,
    max_attempts: usize,
    seed: u64,
    element: u64,
) -> Result<SampledPiece, PieceFailure> {
    let d = x.order().checked_sub(1).filter(|&d| d >= 1).ok_or(PieceFailure::BadInput("X needs d + 2 >= 3 points".into()))?;
    let m = x.max_at0().map_err(|e| PieceFailure::BadInput(e.to_string()))?;
    let x0 = x.vertex(0).coords().to_vec();
    let stream_seed = rng::derive(seed, element);
    let mut prev = x.points().to_vec();
    let mut points = Vec::with_capacity(k * d);
    let mut attempts = Vec::with_capacity(k * d);
    for q in 1..=k * d {
        let level = piece_level(q, k, d);
        let sampler = annulus_sampler(cloud, &x0, m, level, alpha0).ok_or(PieceFailure::EmptyAnnulus { coordinate: q })?;
        let mut r = rng::at(stream_seed, rng::streams::PIECE, q as u64);
        let lhs = psin0(&prev);
        let bar = bar_index(q + 1, d);
        let mut accepted = None;
        for a in 1..=max_attempts {
            let y = cloud.point(sampler.draw(&mut r));
            let main = replaced(&prev, y, 1);
            let aux = replaced(&prev, y, bar);
            if two_term(lhs, psin0(&main), psin0(&aux), cp) {
                accepted = Some((y.clone(), aux, a));
                break;
            }
        }
        let (y, aux, a) = accepted.ok_or(PieceFailure::Exhausted {
            coordinate: q,
            attempts: max_attempts,
        })?;
        points.push(y);
        attempts.push(a);
        prev = aux;
    }
    Ok(SampledPiece { points, attempts })
}

/// Draws a short-scale piece for `X` from the cloud's restriction to
/// `A_k(x_0, max_at0(X))`, accepting `z_s` iff the inequality at the tree
/// node it completes holds.
#[allow(clippy::too_many_arguments)]
pub fn sample_short_scale_piece(
    cloud: &WeightedPointCloud,
    x: &Tuple,
    k: usize,
    n: usize,
    cp: f64,
    alpha0: f64,
    max_attempts: usize,
    seed: u64,
    element: u64,
) -> Result<SampledPiece, PieceFailure> {
    let d = x.order().checked_sub(1).ok_or(PieceFailure::BadInput("X too short".into()))?;
    if !(n >= 2 && n <= d) {
        return Err(PieceFailure::BadInput(format!("need 1 < n <= d, got n = {n}")));
    }
    let m = x.max_at0().map_err(|e| PieceFailure::BadInput(e.to_string()))?;
    let x0 = x.vertex(0).coords().to_vec();
    let sampler = annulus_sampler(cloud, &x0, m, k, alpha0).ok_or(PieceFailure::EmptyAnnulus { coordinate: 1 })?;
    let stream_seed = rng::derive(seed, element);
    let mut levels: Vec<Vec<Vec<Vector>>> = vec![vec![x.points().to_vec()]];
    let mut points = Vec::new();
    let mut attempts = Vec::new();
    for j in 0..n - 1 {
        let mut next = Vec::with_capacity(1 << (j + 1));
        for mi in 0..levels[j].len() {
            let s = rake_piece_index(j, mi + 1);
            let node = &levels[j][mi];
            let lhs = psin0(node);
            let mut r = rng::at(stream_seed, rng::streams::SHORT_PIECE, s as u64);
            let mut accepted = None;
            for a in 1..=max_attempts {
                let z = cloud.point(sampler.draw(&mut r));
                let (l, rr) = rake_children(node, z, n, j);
                if two_term(lhs, psin0(&l), psin0(&rr), cp) {
                    accepted = Some((z.clone(), l, rr, a));
                    break;
                }
            }
            let (z, l, rr, a) = accepted.ok_or(PieceFailure::Exhausted {
                coordinate: s,
                attempts: max_attempts,
            })?;
            points.push(z);
            attempts.push(a);
            next.push(l);
            next.push(rr);
        }
        levels.push(next);
    }
    Ok(SampledPiece { points, attempts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusMass {
    /// Mass of the two-term set inside the annulus.
    pub g: f64,
    pub annulus_mass: f64,
    /// `mu(B(x_0, alpha0^{k - ceil(q/d)} M))`.
    pub ball_mass: f64,
    pub lower_bound_holds: bool,
    pub upper_bound_holds: bool,
}

/// The mass of `U_{C_p}(X~_{q-1}, 1, bar(q+1))` inside
/// `A_{k - ceil(q/d)}(x_0, M)`, where `M = |x_1 - x_0|` is carried unchanged
/// through the auxiliary sequence, compared with half and all of the mass of
/// the enclosing ball.
pub fn annulus_conditional_mass(
    cloud: &WeightedPointCloud,
    x_tilde_prev: &Tuple,
    q: usize,
    k: usize,
    cp: f64,
    alpha0: f64,
) -> Result<AnnulusMass, SequenceError> {
    let d = x_tilde_prev
        .order()
        .checked_sub(1)
        .filter(|&d| d >= 1)
        .ok_or(SequenceError::BadParameter("tuple too short".into()))?;
    if q == 0 || q > k * d {
        return Err(SequenceError::BadParameter(format!("q must lie in 1..={}", k * d)));
    }
    let pts = x_tilde_prev.points();
    let x0 = pts[0].coords();
    let m = dist(x0, pts[1].coords());
    let level = piece_level(q, k, d);
    let bar = bar_index(q + 1, d);
    let lhs = psin0(pts);
    let r_outer = alpha0.powi(level as i32) * m;
    let mut g = 0.0;
    let mut annulus_mass = 0.0;
    let mut ball_mass = 0.0;
    for (p, w) in cloud.points().iter().zip(cloud.weights()) {
        let y = p.coords();
        if dist(x0, y) <= r_outer {
            ball_mass += w;
        }
        if !in_annulus(x0, m, level, alpha0, y) {
            continue;
        }
        annulus_mass += w;
        let main = replaced(pts, p, 1);
        let aux = replaced(pts, p, bar);
        if two_term(lhs, psin0(&main), psin0(&aux), cp) {
            g += w;
        }
    }
    Ok(AnnulusMass {
        g,
        annulus_mass,
        ball_mass,
        lower_bound_holds: g >= 0.5 * ball_mass,
        upper_bound_holds: g <= ball_mass,
    })
}

// ---------------------------------------------------------------------------
// Planted configurations

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn offset(x0: &[f64], len: f64, dir: &[f64]) -> Vector {
    Vector::new(x0.iter().zip(dir).map(|(a, u)| a + len * u).collect()).expect("finite")
}

/// Draws `u` strictly inside `(lo, hi)` away from both ends.
fn interior<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(0.05..0.95)
}

/// A simplex in `R^dim` at `x0` whose handles are exactly `x_1..x_n` (with
/// `|x_1 - x_0| = 1` the longest edge) and whose tines have ratio in
/// `(alpha0^{k+p}, alpha0^k)`, so it lies in the canonical cell of
/// `S^n_{k,p}`.
#[allow(clippy::too_many_arguments)]
pub fn plant_canonical_simplex<R: Rng + ?Sized>(
    x0: &[f64],
    d: usize,
    k: usize,
    p: usize,
    n: usize,
    alpha0: f64,
    rng: &mut R,
) -> Tuple {
    let dim = x0.len();
    let mut pts = vec![Vector::new(x0.to_vec()).expect("finite")];
    for i in 1..=d + 1 {
        let len = if i == 1 {
            1.0
        } else if i <= n {
            alpha0.powf(k as f64 * interior(rng))
        } else {
            alpha0.powf(k as f64 + p as f64 * interior(rng))
        };
        pts.push(offset(x0, len, &random_unit(dim, rng)));
    }
    to_tuple(pts)
}

/// A well-scaled piece with each `y_q` placed inside its annulus.
pub fn plant_well_scaled_piece<R: Rng + ?Sized>(x: &Tuple, k: usize, alpha0: f64, rng: &mut R) -> Vec<Vector> {
    let d = x.order() - 1;
    let m = x.max_at0().expect("nondegenerate");
    let x0 = x.vertex(0).coords();
    (1..=k * d)
        .map(|q| {
            let e = piece_level(q, k, d) as f64;
            offset(x0, m * alpha0.powf(e + interior(rng)), &random_unit(x0.len(), rng))
        })
        .collect()
}

/// A short-scale piece with every point inside `A_k(x_0, max_at0)`.
pub fn plant_short_scale_piece<R: Rng + ?Sized>(x: &Tuple, k: usize, n: usize, alpha0: f64, rng: &mut R) -> Vec<Vector> {
    let m = x.max_at0().expect("nondegenerate");
    let x0 = x.vertex(0).coords();
    (0..short_piece_len(n))
        .map(|_| offset(x0, m * alpha0.powf(k as f64 + interior(rng)), &random_unit(x0.len(), rng)))
        .collect()
}

/// Handle indices of a simplex at level `k` (re-exported for reports).
pub fn handles(x: &Tuple, alpha0: f64, k: usize) -> Vec<usize> {
    handle_indices(x, alpha0, k as u32)
}
