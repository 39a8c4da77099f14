//! Verification suites and ratio experiments.
//!
//! Each `check_*` function evaluates one family of properties on seeded
//! synthetic data and returns named [`Check`]s. Suites group them; reports
//! contain no timings so that equal seeds give byte-identical JSON.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{
    concentration_fraction, continuous_curvature_sq, exhaustive_curvature_sq, prop11_ratio, McOptions, RatioFlag,
};
use crate::geometry::{dist, kernel, Tuple, Vector};
use crate::measure::{
    gen_four_corner_cantor, gen_lipschitz_graph, gen_plane_patch, gen_sphere, Ball, WeightedPointCloud,
};
use crate::multiscale::{
    jones_flatness_continuous, jones_flatness_discrete, m_of_diam, m_of_q, net_ordering, MultiresolutionFamily, NetLevel,
};
use crate::planes::{beta2_indices, deviation_d2, AffinePlane};
use crate::rng;
use crate::sequences::{
    self, annulus_conditional_mass, auxiliary_sequence, check_rake_property, check_well_scaled_bounds, constants,
    is_in_augmented_set, is_in_overline_set, multiscale_inequality_check, plant_canonical_simplex,
    plant_short_scale_piece, plant_well_scaled_piece, rake_bundle, rake_inequality_check, rake_tree,
    sample_short_scale_piece, sample_well_scaled_piece, well_scaled_bundle, well_scaled_sequence,
};

/// Regularity constant assumed when evaluating the constants.
pub const CMU: f64 = 1.0;
/// Scale parameter used by the multiscale checks and the samplers for
/// `d >= 2`, where the nominal value is far below any sample resolution.
pub const WORKING_ALPHA0: f64 = 0.25;
pub const IDENTITY_RTOL: f64 = 1e-9;
pub const RANGE_SLACK: f64 = 1e-12;
pub const FLAT_TOL: f64 = 1e-10;
pub const EXACT_RTOL: f64 = 1e-12;
pub const MC_SIGMAS: f64 = 3.0;
pub const CONCENTRATION_D1: f64 = 0.99;
pub const CONCENTRATION_D2: f64 = 0.70;
pub const CONCENTRATION_NOMINAL_D2: f64 = 0.75;
pub const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            value: None,
            limit: None,
            detail: detail.into(),
        }
    }

    pub fn measured(mut self, value: f64, limit: f64) -> Self {
        self.value = Some(value);
        self.limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, seed: u64, checks: Vec<Check>) -> Self {
        SuiteReport {
            suite: suite.into(),
            seed,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geometry,
    Sequences,
    Multiscale,
    Inequalities,
    All,
    /// A fixture with a deliberately broken invariant.
    Planted,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "geometry" => Suite::Geometry,
            "sequences" => Suite::Sequences,
            "multiscale" => Suite::Multiscale,
            "inequalities" => Suite::Inequalities,
            "all" => Suite::All,
            "planted" => Suite::Planted,
            other => return Err(format!("unknown suite `{other}`")),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Geometry => "geometry",
            Suite::Sequences => "sequences",
            Suite::Multiscale => "multiscale",
            Suite::Inequalities => "inequalities",
            Suite::All => "all",
            Suite::Planted => "planted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Random configurations per geometric property.
    pub trials: usize,
    /// Planted or sampled augmented elements per sequence property.
    pub elements: usize,
    /// Monte Carlo samples per integral.
    pub mc_samples: usize,
    /// Replaces [`WORKING_ALPHA0`] in the multiscale checks.
    pub alpha0: Option<f64>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 0,
            trials: 10_000,
            elements: 1000,
            mc_samples: 100_000,
            alpha0: None,
        }
    }
}

impl HarnessConfig {
    fn working_alpha0(&self) -> f64 {
        self.alpha0.unwrap_or(WORKING_ALPHA0)
    }
}

pub fn run_suite(suite: Suite, cfg: &HarnessConfig) -> SuiteReport {
    let checks = match suite {
        Suite::Geometry => geometry_checks(cfg),
        Suite::Sequences => sequence_checks(cfg),
        Suite::Multiscale => multiscale_checks(cfg),
        Suite::Inequalities => inequality_checks(cfg),
        Suite::All => {
            let mut all = geometry_checks(cfg);
            all.extend(sequence_checks(cfg));
            all.extend(multiscale_checks(cfg));
            all.extend(inequality_checks(cfg));
            all
        }
        Suite::Planted => vec![planted_violation(cfg.seed)],
    };
    SuiteReport::new(suite.to_string(), cfg.seed, checks)
}

fn geometry_checks(cfg: &HarnessConfig) -> Vec<Check> {
    let mut v = vec![
        check_menger_comparability(cfg.seed, cfg.trials),
        check_product_formula(cfg.seed, cfg.trials),
    ];
    v.extend(check_range_and_deviation(cfg.seed, cfg.trials));
    v.push(check_similarity(cfg.seed, cfg.trials / 10));
    v
}

fn sequence_checks(cfg: &HarnessConfig) -> Vec<Check> {
    let mut v = vec![check_golden_sequences()];
    v.extend(check_scale_bounds(cfg.seed, cfg.elements));
    v
}

fn multiscale_checks(cfg: &HarnessConfig) -> Vec<Check> {
    let mut v = check_flat_vanishing(cfg.seed, 2000, cfg.mc_samples, cfg.working_alpha0());
    v.push(check_net_axioms(cfg.seed, cfg.working_alpha0()));
    v
}

fn inequality_checks(cfg: &HarnessConfig) -> Vec<Check> {
    let mut v = check_exhaustive_equivalence(cfg.seed, cfg.mc_samples);
    v.extend(check_membership_inequalities(cfg.seed, cfg.elements));
    v.extend(check_concentration(cfg.seed, 20));
    v
}

// ---------------------------------------------------------------------------
// Random helpers

/// Independent generator for bulk draws under `(seed, tag)`.
fn fresh(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(rng::derive(seed, tag))
}

fn uniform_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v = uniform_point(dim, rng);
        let n = kernel_norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn kernel_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn vec_of(v: Vec<f64>) -> Vector {
    Vector::new(v).expect("finite")
}

fn random_tuple<R: Rng + ?Sized>(m: usize, dim: usize, rng: &mut R) -> Tuple {
    Tuple::new((0..m).map(|_| vec_of(uniform_point(dim, rng))).collect()).expect("same dimension")
}

/// A simplex at a random base point whose edges at `x_0` have log-uniform
/// lengths over three decades.
fn multiscale_tuple<R: Rng + ?Sized>(m: usize, dim: usize, rng: &mut R) -> Tuple {
    let x0 = uniform_point(dim, rng);
    let mut pts = vec![vec_of(x0.clone())];
    for _ in 1..m {
        let r = 10f64.powf(-3.0 * rng.gen::<f64>());
        let u = unit(dim, rng);
        pts.push(vec_of(x0.iter().zip(&u).map(|(a, b)| a + r * b).collect()));
    }
    Tuple::new(pts).expect("same dimension")
}

fn psin0(t: &Tuple) -> f64 {
    kernel::polar_sine(t.points(), 0)
}

// ---------------------------------------------------------------------------
// Geometry

/// `c_M^2 / 12 <= c_1^2 <= c_M^2 / 4` on random triangles, with equality on
/// the right for the equilateral triangle.
pub fn check_menger_comparability(seed: u64, trials: usize) -> Check {
    let mut r = fresh(seed, 1);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let x = random_tuple(3, 2 + t % 2, &mut r);
        let (Ok(c1), Ok(cm)) = (x.discrete_curvature(), x.menger_curvature_1d()) else {
            continue;
        };
        let (c1sq, cmsq) = (c1.value * c1.value, cm.value * cm.value);
        let eps = IDENTITY_RTOL * cmsq;
        if c1sq < cmsq / 12.0 - eps || c1sq > cmsq / 4.0 + eps {
            violations += 1;
        }
        if cmsq > 0.0 {
            worst = worst.max((cmsq / 12.0 - c1sq).max(c1sq - cmsq / 4.0) / cmsq);
        }
    }
    let eq = Tuple::from_coords(&[[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]);
    let c1 = eq.discrete_curvature().expect("equilateral").value;
    let cm = eq.menger_curvature_1d().expect("equilateral").value;
    let gap = (c1 * c1 - cm * cm / 4.0).abs() / (cm * cm);
    Check::new(
        "geometry.menger_comparability",
        violations == 0 && gap <= 1e-12,
        format!("{violations} violations in {trials} triangles; equilateral gap {gap:.3e}; worst excess {worst:.3e}"),
    )
    .measured(violations as f64, 0.0)
}

/// `psin_{x_0}(X) = sin(theta_i) psin_{x_0}(X(i))` for every `i >= 1`.
pub fn check_product_formula(seed: u64, trials: usize) -> Check {
    let mut r = fresh(seed, 2);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut evaluated = 0usize;
    let mut t = 0usize;
    while evaluated < trials {
        let d = 1 + t % 3;
        let dim = d + 1 + (t / 3) % 2;
        t += 1;
        let x = random_tuple(d + 2, dim, &mut r);
        let p = psin0(&x);
        if p < 1e-6 {
            continue;
        }
        evaluated += 1;
        for i in 1..=d + 1 {
            let sub = x.remove_coordinate(i).expect("index in range");
            let elev = x.elevation_sine(i).expect("nonzero edge");
            let err = (p - elev * psin0(&sub)).abs() / p;
            worst = worst.max(err);
            if err > IDENTITY_RTOL {
                violations += 1;
            }
        }
    }
    Check::new(
        "geometry.product_formula",
        violations == 0,
        format!("{violations} violations over {evaluated} simplices (d = 1..3); worst relative error {worst:.3e}"),
    )
    .measured(worst, IDENTITY_RTOL)
}

/// Range of the polar sine and the deviation bounds, on poorly and well
/// scaled simplices against random planes and planes through `d + 1` of the
/// vertices.
pub fn check_range_and_deviation(seed: u64, trials: usize) -> Vec<Check> {
    let mut r = fresh(seed, 3);
    let mut range_bad = 0usize;
    let mut max_psin = 0.0f64;
    let (mut before_bad, mut height_bad, mut dev_bad) = (0usize, 0usize, 0usize);
    for t in 0..trials {
        let d = 1 + t % 3;
        let dim = d + 1 + (t / 3) % 2;
        let x = multiscale_tuple(d + 2, dim, &mut r);
        for i in 0..x.len() {
            let p = kernel::polar_sine(x.points(), i);
            max_psin = max_psin.max(p);
            if !(0.0..=1.0 + RANGE_SLACK).contains(&p) {
                range_bad += 1;
            }
        }
        let plane = if t % 2 == 0 {
            let base = vec_of(uniform_point(dim, &mut r));
            let dirs: Vec<Vec<f64>> = (0..d).map(|_| unit(dim, &mut r)).collect();
            AffinePlane::from_directions(base, &dirs)
        } else {
            let p0 = x.vertex(0).coords();
            let dirs: Vec<Vec<f64>> = (1..=d)
                .map(|k| x.vertex(k).coords().iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            AffinePlane::from_directions(x.vertex(0).clone(), &dirs)
        };
        let Ok(plane) = plane else { continue };
        let p = psin0(&x);
        let s = x.scale_at0().expect("distinct vertices");
        let diam = x.diam();
        let h = x.min_height();
        let d2 = deviation_d2(&x, &plane);
        let slack = 1.0 + RANGE_SLACK;
        let df = d as f64;
        if p > 2.0 * (df + 1.0) / s * h / diam * slack {
            before_bad += 1;
        }
        if h > 2f64.sqrt() * (d + 1).div_ceil(2) as f64 * d2 * slack {
            height_bad += 1;
        }
        if p > 2f64.sqrt() * (df + 1.0) * (df + 2.0) / s * d2 / diam * slack {
            dev_bad += 1;
        }
    }
    let named = |name: &str, bad: usize, what: &str| {
        Check::new(name, bad == 0, format!("{bad} violations of the {what} over {trials} pairs")).measured(bad as f64, 0.0)
    };
    vec![
        Check::new(
            "geometry.polar_sine_range",
            range_bad == 0,
            format!("{range_bad} out of range; max polar sine {max_psin:.17}"),
        )
        .measured(max_psin, 1.0 + RANGE_SLACK),
        named("geometry.height_bound", before_bad, "height bound"),
        named("geometry.height_deviation", height_bad, "height-deviation bound"),
        named("geometry.deviation_bound", dev_bad, "deviation bound"),
    ]
}

/// Invariance of the polar and elevation sines and the scale under rigid
/// motions and scaling, and `c_d(2X) = 2^{-d(d+1)/2} c_d(X)`.
pub fn check_similarity(seed: u64, trials: usize) -> Check {
    let mut r = fresh(seed, 4);
    let mut worst = 0.0f64;
    for t in 0..trials.max(1) {
        let d = 1 + t % 3;
        let dim = d + 1;
        let x = random_tuple(d + 2, dim, &mut r);
        if psin0(&x) < 1e-3 {
            continue;
        }
        // random rotation by Gram-Schmidt, a shift and a scale
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < dim {
            let mut v = unit(dim, &mut r);
            for b in &q {
                let c: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= c * b);
            }
            let n = kernel_norm(&v);
            if n > 1e-3 {
                q.push(v.into_iter().map(|a| a / n).collect());
            }
        }
        let shift = uniform_point(dim, &mut r);
        let lam = 0.5 + 2.0 * r.gen::<f64>();
        let map = |p: &Vector| -> Vector {
            vec_of(
                (0..dim)
                    .map(|k| lam * q[k].iter().zip(p.coords()).map(|(a, b)| a * b).sum::<f64>() + shift[k])
                    .collect(),
            )
        };
        let y = Tuple::new(x.points().iter().map(map).collect()).expect("same dimension");
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-300);
        for i in 0..x.len() {
            worst = worst.max(rel(kernel::polar_sine(x.points(), i), kernel::polar_sine(y.points(), i)));
        }
        for i in 1..x.len() {
            worst = worst.max(rel(x.elevation_sine(i).unwrap(), y.elevation_sine(i).unwrap()));
        }
        worst = worst.max(rel(x.scale_at0().unwrap(), y.scale_at0().unwrap()));
        let doubled = Tuple::new(x.points().iter().map(|p| vec_of(p.coords().iter().map(|c| 2.0 * c).collect())).collect())
            .expect("same dimension");
        let expect = x.discrete_curvature().unwrap().value * 2f64.powf(-((d * (d + 1)) as f64) / 2.0);
        worst = worst.max(rel(expect, doubled.discrete_curvature().unwrap().value));
    }
    Check::new(
        "geometry.similarity_invariance",
        worst <= IDENTITY_RTOL,
        format!("worst relative change {worst:.3e}"),
    )
    .measured(worst, IDENTITY_RTOL)
}

// ---------------------------------------------------------------------------
// Sequences

fn labels(prefix: &str, from: usize, to: usize) -> Vec<String> {
    (from..=to).map(|i| format!("{prefix}{i}")).collect()
}

fn show(t: &[String]) -> String {
    format!("({})", t.join(","))
}

/// The worked lists for `d = 3` and `d = 1` and the `d = 3, n = 3` rake tree.
pub fn check_golden_sequences() -> Check {
    let mut mismatches = Vec::new();
    let mut expect = |what: &str, got: Vec<String>, want: &[&str]| {
        if got != want {
            mismatches.push(format!("{what}: got {got:?}"));
        }
    };
    let x = labels("x", 0, 4);
    let y = labels("y", 1, 6);
    let aux = auxiliary_sequence(&x, &y, 2, 3).expect("sizes");
    expect(
        "auxiliary d=3",
        aux[1..].iter().map(|t| show(t)).collect(),
        &[
            "(x0,x1,y1,x3,x4)",
            "(x0,x1,y1,y2,x4)",
            "(x0,x1,y1,y2,y3)",
            "(x0,x1,y4,y2,y3)",
            "(x0,x1,y4,y5,y3)",
            "(x0,x1,y4,y5,y6)",
        ],
    );
    let main = well_scaled_sequence(&x, &y, 2, 3).expect("sizes");
    expect(
        "well-scaled d=3",
        main.iter().map(|t| show(t)).collect(),
        &[
            "(x0,y1,x2,x3,x4)",
            "(x0,y2,y1,x3,x4)",
            "(x0,y3,y1,y2,x4)",
            "(x0,y4,y1,y2,y3)",
            "(x0,y5,y4,y2,y3)",
            "(x0,y6,y4,y5,y3)",
            "(x0,x1,y4,y5,y6)",
        ],
    );
    let x1 = labels("x", 0, 2);
    let y1 = labels("y", 1, 3);
    let aux1 = auxiliary_sequence(&x1, &y1, 3, 1).expect("sizes");
    expect(
        "auxiliary d=1",
        aux1[1..].iter().map(|t| show(t)).collect(),
        &["(x0,x1,y1)", "(x0,x1,y2)", "(x0,x1,y3)"],
    );
    let main1 = well_scaled_sequence(&x1, &y1, 3, 1).expect("sizes");
    expect(
        "well-scaled d=1",
        main1.iter().map(|t| show(t)).collect(),
        &["(x0,y1,x2)", "(x0,y2,y1)", "(x0,y3,y2)", "(x0,x1,y3)"],
    );
    let z = labels("z", 1, 3);
    let tree = rake_tree(&x, &z, 3, 3).expect("sizes");
    expect("rake root", vec![show(&tree[0][0])], &["(x0,x1,x2,x3,x4)"]);
    expect(
        "rake level 1",
        tree[1].iter().map(|t| show(t)).collect(),
        &["(x0,x1,x2,z1,x4)", "(x0,x1,x3,z1,x4)"],
    );
    expect(
        "rake level 2",
        tree[2].iter().map(|t| show(t)).collect(),
        &["(x0,x1,z2,z1,x4)", "(x0,x2,z2,z1,x4)", "(x0,x1,z3,z1,x4)", "(x0,x3,z3,z1,x4)"],
    );
    Check::new(
        "sequences.golden",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "all worked lists reproduced".to_string()
        } else {
            mismatches.join("; ")
        },
    )
}

/// Scale bounds of well-scaled sequences and the single-handle property of
/// rake leaves over planted configurations with `d <= 3`, `k <= 5`,
/// `n <= 3`, using the nominal `alpha0(d)` and `x_0` at the origin.
pub fn check_scale_bounds(seed: u64, configs: usize) -> Vec<Check> {
    let results: Vec<(bool, Option<bool>, String)> = (0..configs)
        .into_par_iter()
        .map(|i| {
            let d = 1 + i % 3;
            let k = 1 + (i / 3) % 5;
            let p = 1 + (i / 15) % 2;
            let alpha0 = constants(d, CMU).expect("valid").alpha0;
            let mut r = rng::at(seed, rng::streams::HARNESS, 8_000_000 + i as u64);
            let origin = vec![0.0; d + 1];
            let x = plant_canonical_simplex(&origin, d, k, p, 1, alpha0, &mut r);
            let y = plant_well_scaled_piece(&x, k, alpha0, &mut r);
            let main = well_scaled_bundle(&x, &y, k, d).expect("sizes").main;
            let bounds = check_well_scaled_bounds(&main, &x, k, d, alpha0);
            let mut note = String::new();
            if let Err(v) = &bounds {
                note = format!("config {i} (d={d}, k={k}, p={p}): q={} {}", v.q, v.reason);
            }
            let rake = (d >= 2).then(|| {
                let n = 2 + i % (d - 1);
                let xr = plant_canonical_simplex(&origin, d, k, 1, n, alpha0, &mut r);
                let z = plant_short_scale_piece(&xr, k, n, alpha0, &mut r);
                let leaves = rake_bundle(&xr, &z, n, d).expect("sizes").main;
                let ok = check_rake_property(&leaves, k, alpha0);
                if let Err(s) = ok {
                    note = format!("config {i} (d={d}, k={k}, n={n}): leaf {s} is not a single-handled rake");
                }
                ok.is_ok()
            });
            (bounds.is_ok(), rake, note)
        })
        .collect();
    let bound_bad = results.iter().filter(|r| !r.0).count();
    let rakes = results.iter().filter(|r| r.1.is_some()).count();
    let rake_bad = results.iter().filter(|r| r.1 == Some(false)).count();
    let first = results.iter().find(|r| !r.2.is_empty()).map(|r| r.2.clone()).unwrap_or_default();
    vec![
        Check::new(
            "sequences.scale_bounds",
            bound_bad == 0,
            format!("{bound_bad} violations over {configs} planted pieces{}", if first.is_empty() { String::new() } else { format!("; first: {first}") }),
        )
        .measured(bound_bad as f64, 0.0),
        Check::new(
            "sequences.rake_leaves",
            rake_bad == 0,
            format!("{rake_bad} violations over {rakes} planted rakes"),
        )
        .measured(rake_bad as f64, 0.0),
    ]
}

/// A fixture whose scale-bound check must fail: a planted piece with `y_2`
/// moved outside its annulus.
pub fn planted_violation(seed: u64) -> Check {
    let alpha0 = WORKING_ALPHA0;
    let mut r = rng::at(seed, rng::streams::HARNESS, 99);
    let x = plant_canonical_simplex(&[0.0, 0.0, 0.0], 2, 3, 1, 1, alpha0, &mut r);
    let mut y = plant_well_scaled_piece(&x, 3, alpha0, &mut r);
    y[1] = Vector::from([3.0, 0.0, 0.0]);
    let main = well_scaled_bundle(&x, &y, 3, 2).expect("sizes").main;
    match check_well_scaled_bounds(&main, &x, 3, 2, alpha0) {
        Ok(()) => Check::new("sequences.scale_bounds", true, "planted violation not detected"),
        Err(v) => Check::new("sequences.scale_bounds", false, format!("q={}: {}", v.q, v.reason)),
    }
}

// ---------------------------------------------------------------------------
// Multiscale

fn plane_patch(d: usize, dim: usize, n: usize, seed: u64, tag: u64) -> WeightedPointCloud {
    gen_plane_patch(d, dim, n, &mut fresh(seed, tag)).expect("valid parameters")
}

/// A ball around the support containing every point.
pub fn enclosing_ball(cloud: &WeightedPointCloud) -> Ball {
    let dim = cloud.dim();
    let mut c = vec![0.0; dim];
    for p in cloud.points() {
        c.iter_mut().zip(p.coords()).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().for_each(|a| *a /= cloud.len() as f64);
    let r = cloud.points().iter().map(|p| dist(&c, p.coords())).fold(0.0, f64::max);
    Ball::new(vec_of(c), r.max(1e-12) * (1.0 + 1e-9)).expect("positive radius")
}

/// Family from `m(Q)` down to the resolution floor.
pub fn family_for(cloud: &WeightedPointCloud, q: &Ball, alpha0: f64, d: usize) -> MultiresolutionFamily {
    MultiresolutionFamily::to_resolution(cloud, alpha0, d, m_of_q(q, alpha0), &net_ordering(cloud.len(), None))
        .expect("valid alpha0")
}

/// Beta numbers, discrete flatness and curvature of flat measures vanish.
pub fn check_flat_vanishing(seed: u64, n_points: usize, mc_samples: usize, alpha0: f64) -> Vec<Check> {
    let mut out = Vec::new();
    for (tag, (d, dim)) in [(1usize, 2usize), (2, 3)].into_iter().enumerate() {
        let cloud = plane_patch(d, dim, n_points, seed, 40 + tag as u64);
        let q = enclosing_ball(&cloud);
        let family = family_for(&cloud, &q, alpha0, d);
        let betas: Vec<f64> = family
            .levels
            .par_iter()
            .flat_map_iter(|l| l.balls.iter().map(|b| (b.clone(), l.n)).collect::<Vec<_>>())
            .map(|(b, _)| {
                let idx = cloud.points_in_ball(&b);
                beta2_indices(&cloud, &idx, b.diam(), d).expect("d < D").value
            })
            .collect();
        let max_beta = betas.iter().copied().fold(0.0, f64::max);
        let flat = jones_flatness_discrete(&cloud, &q, &family, d).expect("family covers Q").total;
        let mc = continuous_curvature_sq(&cloud, None, d, &McOptions::monte_carlo(mc_samples, seed))
            .expect("nonempty")
            .curvature
            .estimate;
        let small = cloud.subset(&(0..if d == 1 { 100 } else { 40 }).collect::<Vec<_>>()).expect("nonempty");
        let exact = exhaustive_curvature_sq(&small, None, d).expect("nonempty");
        let worst = max_beta.max(flat).max(mc).max(exact);
        out.push(
            Check::new(
                format!("multiscale.flat_vanishing_d{d}"),
                worst <= FLAT_TOL,
                format!(
                    "{} balls, max beta {max_beta:.3e}; discrete flatness {flat:.3e}; MC curvature {mc:.3e}; exhaustive curvature {exact:.3e}",
                    betas.len()
                ),
            )
            .measured(worst, FLAT_TOL),
        );
    }
    out
}

/// Net separation and covering, quarter-ball disjointness, family cover and
/// the partition sandwich on five clouds at four levels.
pub fn check_net_axioms(seed: u64, alpha0: f64) -> Check {
    let clouds = test_clouds(seed, 500);
    let mut failures = Vec::new();
    let mut levels_checked = 0;
    for (name, cloud) in &clouds {
        let ordering = net_ordering(cloud.len(), Some(rng::derive(seed, 6)));
        let n0 = m_of_diam(cloud.support_diameter(), alpha0);
        for n in n0..n0 + 4 {
            let level = NetLevel::build(cloud, n, alpha0, &ordering);
            let chk = level.verify(cloud);
            levels_checked += 1;
            if !chk.all() {
                failures.push(format!("{name} level {n}: {chk:?}"));
            }
        }
    }
    Check::new(
        "multiscale.net_partition_axioms",
        failures.is_empty(),
        std::iter::once(format!("{levels_checked} levels checked")).chain(failures.iter().cloned()).collect::<Vec<_>>().join("; "),
    )
    .measured(failures.len() as f64, 0.0)
}

/// Five seeded clouds of about `n` points each.
pub fn test_clouds(seed: u64, n: usize) -> Vec<(&'static str, WeightedPointCloud)> {
    let square: Vec<Vector> = {
        let mut r = fresh(seed, 50);
        (0..n).map(|_| vec_of(vec![r.gen::<f64>(), r.gen::<f64>()])).collect()
    };
    vec![
        ("circle", gen_sphere(2, n, &mut fresh(seed, 51)).expect("valid")),
        ("plane", plane_patch(2, 3, n, seed, 52)),
        ("graph", gen_lipschitz_graph(1, 2, 1.0, n, &mut fresh(seed, 53)).expect("valid")),
        ("square", WeightedPointCloud::uniform(square, 2).expect("valid")),
        ("cantor", gen_four_corner_cantor(4).expect("valid")),
    ]
}

// ---------------------------------------------------------------------------
// Estimators

/// Sine of the angle at vertex `a` of triangle `(a, b, c)` from Heron's
/// formula in Kahan's stable form.
fn heron_sine(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let (ab, ac, bc) = (dist(a, b), dist(a, c), dist(b, c));
    if ab == 0.0 || ac == 0.0 {
        return 0.0;
    }
    let mut s = [ab, ac, bc];
    s.sort_by(|x, y| y.total_cmp(x));
    let [p, q, r] = s;
    let prod = (p + (q + r)) * (r - (p - q)) * (r + (p - q)) * (p + (q - r));
    let area = 0.25 * prod.max(0.0).sqrt();
    (2.0 * area / (ab * ac)).min(1.0)
}

/// `c_1^2` of a triangle through angle sines, independent of the Gram
/// computations in the library.
pub fn triangle_curvature_oracle(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let diam = dist(a, b).max(dist(a, c)).max(dist(b, c));
    if diam == 0.0 {
        return 0.0;
    }
    let s = heron_sine(a, b, c).powi(2) + heron_sine(b, a, c).powi(2) + heron_sine(c, a, b).powi(2);
    s / (3.0 * diam * diam)
}

/// Weighted sum over all ordered triples of [`triangle_curvature_oracle`].
pub fn triple_sum_oracle(cloud: &WeightedPointCloud) -> f64 {
    let n = cloud.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    let c = triangle_curvature_oracle(
                        cloud.point(i).coords(),
                        cloud.point(j).coords(),
                        cloud.point(k).coords(),
                    );
                    acc += cloud.weight(i) * cloud.weight(j) * cloud.weight(k) * c;
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// Small noisy circles with random weights, `d = 1`.
fn small_clouds(seed: u64) -> Vec<WeightedPointCloud> {
    [12usize, 25, 40]
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let mut r = fresh(seed, 60 + c as u64);
            let pts = (0..n)
                .map(|_| {
                    let t = r.gen_range(0.0..std::f64::consts::TAU);
                    let rad = 1.0 + 0.2 * r.gen::<f64>();
                    vec_of(vec![rad * t.cos(), rad * t.sin()])
                })
                .collect();
            let w = (0..n).map(|_| r.gen_range(0.5..1.5) / n as f64).collect();
            WeightedPointCloud::new(pts, w, 1).expect("valid")
        })
        .collect()
}

/// Exact mode against the angle-based oracle, and Monte Carlo within
/// `MC_SIGMAS` standard errors of it.
pub fn check_exhaustive_equivalence(seed: u64, mc_samples: usize) -> Vec<Check> {
    let mut exact_worst = 0.0f64;
    let mut mc_worst = 0.0f64;
    let mut details = Vec::new();
    for (c, cloud) in small_clouds(seed).iter().enumerate() {
        let oracle = triple_sum_oracle(cloud);
        let exact = continuous_curvature_sq(cloud, None, 1, &McOptions::default()).expect("nonempty").curvature;
        let mc = continuous_curvature_sq(cloud, None, 1, &McOptions::monte_carlo(mc_samples, rng::derive(seed, c as u64)))
            .expect("nonempty")
            .curvature;
        let rel = (exact.estimate - oracle).abs() / oracle;
        let z = (mc.estimate - oracle).abs() / mc.std_error.max(f64::MIN_POSITIVE);
        exact_worst = exact_worst.max(if exact.exact { rel } else { f64::INFINITY });
        mc_worst = mc_worst.max(z);
        details.push(format!("N={}: oracle {oracle:.12e}, MC {:.6e} ({z:.2} se)", cloud.len(), mc.estimate));
    }
    vec![
        Check::new("estimators.exact_matches_oracle", exact_worst <= EXACT_RTOL, format!("worst relative gap {exact_worst:.3e}"))
            .measured(exact_worst, EXACT_RTOL),
        Check::new("estimators.mc_within_3se", mc_worst <= MC_SIGMAS, details.join("; ")).measured(mc_worst, MC_SIGMAS),
    ]
}

/// Uniform weights on a round `d`-sphere of radius 1 tangent to the origin
/// at `x_0 = 0` (point 0), with geodesic radii log-uniform from `r_min` to 2,
/// so every dyadic-type annulus around the origin is populated.
pub fn multiscale_sphere(d: usize, n: usize, r_min: f64, seed: u64) -> WeightedPointCloud {
    let mut r = fresh(seed, 70 + d as u64);
    let (lo, hi) = (r_min.ln(), 2f64.ln());
    let mut pts = vec![Vector::zeros(d + 1)];
    for _ in 1..n {
        let theta = (lo + (hi - lo) * r.gen::<f64>()).exp();
        let u = unit(d, &mut r);
        let mut p: Vec<f64> = u.iter().map(|c| theta.sin() * c).collect();
        p.push(1.0 - theta.cos());
        pts.push(vec_of(p));
    }
    WeightedPointCloud::uniform(pts, d).expect("valid")
}

struct Tally {
    accepted: usize,
    failed: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            accepted: 0,
            failed: 0,
            violations: 0,
            worst: 0.0,
        }
    }
}

/// Picks a simplex at the origin with handles `x_1..x_n` (`x_1` the point
/// closest to distance 1) and tines in `A_k(0, M)`.
fn pick_simplex<R: Rng + ?Sized>(cloud: &WeightedPointCloud, d: usize, k: usize, n: usize, alpha0: f64, rng: &mut R) -> Option<Tuple> {
    let o = cloud.point(0).coords();
    let radii: Vec<f64> = cloud.points().iter().map(|p| dist(o, p.coords())).collect();
    let far: Vec<usize> = (1..cloud.len()).filter(|&i| radii[i] > 0.8 && radii[i] <= 1.2).collect();
    let x1 = *far.choose(rng)?;
    let m = radii[x1];
    let lo = alpha0.powi(k as i32) * m;
    let handles: Vec<usize> = (1..cloud.len()).filter(|&i| radii[i] > lo && radii[i] < m).collect();
    let tines: Vec<usize> = (1..cloud.len())
        .filter(|&i| radii[i] <= lo && radii[i] > alpha0 * lo)
        .collect();
    let mut idx = vec![0, x1];
    idx.extend(handles.choose_multiple(rng, n - 1));
    idx.extend(tines.choose_multiple(rng, d + 1 - n));
    (idx.len() == d + 2).then(|| Tuple::new(idx.iter().map(|&i| cloud.point(i).clone()).collect()).expect("same dim"))
}

/// Membership implies the multiscale inequalities, on rejection-sampled
/// augmented elements drawn from multiscale spheres.
pub fn check_membership_inequalities(seed: u64, elements: usize) -> Vec<Check> {
    let a1 = constants(1, CMU).expect("valid");
    let c2 = constants(2, CMU).expect("valid");
    // (d, C_p, alpha0, share of the element budget)
    let well_groups = [(1usize, a1.cp, a1.alpha0, 2usize), (2, c2.cp, WORKING_ALPHA0, 1), (2, 1.0, WORKING_ALPHA0, 1)];
    let rake_groups = [(2usize, 2usize, c2.cp, 2usize), (2, 2, 1.0, 2)];
    let mut checks = Vec::new();

    let mut well = Tally::new();
    let mut group_notes = Vec::new();
    for (g, &(d, cp, alpha0, share)) in well_groups.iter().enumerate() {
        let target = elements * share / 4;
        let cloud = multiscale_sphere(d, 20_000, alpha0.powi(6) * 0.5, seed);
        let kmax = 3 / d;
        let t = sample_group(target, |e| {
            let mut r = rng::at(seed, rng::streams::HARNESS, 9_000_000 + 100_000 * g as u64 + e as u64);
            let k = 1 + e % kmax.max(1);
            let x = pick_simplex(&cloud, d, k, 1, alpha0, &mut r)?;
            let piece = sample_well_scaled_piece(&cloud, &x, k, cp, alpha0, MAX_ATTEMPTS, seed, e as u64);
            Some(piece.ok().map(|p| {
                let member = is_in_augmented_set(&x, &p.points, k, d, cp).expect("sizes").member;
                let ineq = multiscale_inequality_check(&x, &p.points, cp, k, d).expect("sizes");
                (member && ineq.holds, ineq.lhs / ineq.rhs.max(f64::MIN_POSITIVE))
            }))
        });
        group_notes.push(format!("d={d} Cp={cp:.4}: {} accepted, {} exhausted", t.accepted, t.failed));
        well.accepted += t.accepted;
        well.failed += t.failed;
        well.violations += t.violations;
        well.worst = well.worst.max(t.worst);
    }
    checks.push(
        Check::new(
            "sequences.well_scaled_inequality",
            well.violations == 0 && well.accepted >= elements,
            format!("{} violations; {}; worst lhs/rhs {:.3e}", well.violations, group_notes.join(", "), well.worst),
        )
        .measured(well.violations as f64, 0.0),
    );

    let mut rake = Tally::new();
    let mut notes = Vec::new();
    for (g, &(d, n, cp, share)) in rake_groups.iter().enumerate() {
        let target = elements * share / 4;
        let alpha0 = WORKING_ALPHA0;
        let cloud = multiscale_sphere(d, 20_000, alpha0.powi(6) * 0.5, seed);
        let t = sample_group(target, |e| {
            let mut r = rng::at(seed, rng::streams::HARNESS, 9_500_000 + 100_000 * g as u64 + e as u64);
            let k = 1 + e % 3;
            let x = pick_simplex(&cloud, d, k, n, alpha0, &mut r)?;
            let piece = sample_short_scale_piece(&cloud, &x, k, n, cp, alpha0, MAX_ATTEMPTS, seed, e as u64);
            Some(piece.ok().map(|p| {
                let member = is_in_overline_set(&x, &p.points, n, cp).expect("sizes").member;
                let ineq = rake_inequality_check(&x, &p.points, cp, n).expect("sizes");
                (member && ineq.holds, ineq.lhs / ineq.rhs.max(f64::MIN_POSITIVE))
            }))
        });
        notes.push(format!("d={d} n={n} Cp={cp:.4}: {} accepted, {} exhausted", t.accepted, t.failed));
        rake.accepted += t.accepted;
        rake.failed += t.failed;
        rake.violations += t.violations;
        rake.worst = rake.worst.max(t.worst);
    }
    checks.push(
        Check::new(
            "sequences.rake_inequality",
            rake.violations == 0 && rake.accepted >= elements,
            format!("{} violations; {}; worst lhs/rhs {:.3e}", rake.violations, notes.join(", "), rake.worst),
        )
        .measured(rake.violations as f64, 0.0),
    );
    checks
}

/// Runs `draw(e)` for `e = 0, 1, ...` until `target` elements are accepted
/// or `4 * target` draws were made. `draw` returns `None` when no simplex
/// could be formed, `Some(None)` when the sampler gave up, and
/// `Some(Some((ok, ratio)))` for an accepted element.
fn sample_group<F>(target: usize, draw: F) -> Tally
where
    F: Fn(usize) -> Option<Option<(bool, f64)>> + Sync,
{
    let mut tally = Tally::new();
    let mut next = 0usize;
    let cap = 4 * target.max(1);
    while tally.accepted < target && next < cap {
        let batch = (target - tally.accepted).min(cap - next);
        let results: Vec<_> = (next..next + batch).into_par_iter().map(&draw).collect();
        next += batch;
        for res in results {
            match res {
                None => {}
                Some(None) => tally.failed += 1,
                Some(Some((ok, ratio))) => {
                    tally.accepted += 1;
                    if !ok {
                        tally.violations += 1;
                    }
                    tally.worst = tally.worst.max(ratio);
                }
            }
        }
    }
    tally
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub config: usize,
    pub radius: f64,
    pub fraction: f64,
}

/// Minimum concentration fraction over `configs` random simplices from
/// `cloud` and radii spanning the support.
pub fn concentration_rows(cloud: &WeightedPointCloud, d: usize, c: f64, configs: usize, seed: u64, tag: u64) -> Vec<ConcentrationRow> {
    let diam = cloud.support_diameter();
    let mut out = Vec::new();
    for cfg in 0..configs {
        let mut r = rng::at(seed, rng::streams::HARNESS, tag * 1000 + cfg as u64);
        let idx: Vec<usize> = rand::seq::index::sample(&mut r, cloud.len(), d + 2).into_vec();
        let x = Tuple::new(idx.iter().map(|&i| cloud.point(i).clone()).collect()).expect("same dim");
        let i = r.gen_range(1..=d);
        let j = r.gen_range(i + 1..=d + 1);
        for frac in [0.125, 0.25, 0.5, 1.0] {
            let radius = frac * diam;
            if let Ok(f) = concentration_fraction(cloud, &x, i, j, radius, c) {
                out.push(ConcentrationRow {
                    config: cfg,
                    radius,
                    fraction: f,
                });
            }
        }
    }
    out
}

fn min_fraction(rows: &[ConcentrationRow]) -> f64 {
    rows.iter().map(|r| r.fraction).fold(1.0, f64::min)
}

/// Concentration fractions: circles with `C_p = 1`, the unit square and a
/// curved surface in `R^3` with `C_p(2, C_mu)`.
pub fn check_concentration(seed: u64, configs: usize) -> Vec<Check> {
    let circle = gen_sphere(2, 4000, &mut fresh(seed, 80)).expect("valid");
    let d1 = min_fraction(&concentration_rows(&circle, 1, 1.0, configs, seed, 81));
    let cp2 = constants(2, CMU).expect("valid").cp;
    let square: Vec<Vector> = {
        let mut r = fresh(seed, 82);
        (0..4000).map(|_| vec_of(vec![r.gen::<f64>(), r.gen::<f64>()])).collect()
    };
    let square = WeightedPointCloud::uniform(square, 2).expect("valid");
    let sq = min_fraction(&concentration_rows(&square, 2, cp2, configs, seed, 83));
    let graph = gen_lipschitz_graph(2, 3, 1.0, 4000, &mut fresh(seed, 84)).expect("valid");
    let gr = min_fraction(&concentration_rows(&graph, 2, cp2, configs, seed, 85));
    let note = |v: f64| {
        if v < CONCENTRATION_NOMINAL_D2 {
            format!(" (below the nominal {CONCENTRATION_NOMINAL_D2} by {:.3})", CONCENTRATION_NOMINAL_D2 - v)
        } else {
            String::new()
        }
    };
    vec![
        Check::new("estimators.concentration_d1", d1 >= CONCENTRATION_D1, format!("min fraction {d1:.4} over {configs} circle configurations"))
            .measured(d1, CONCENTRATION_D1),
        Check::new(
            "estimators.concentration_d2_square",
            sq >= CONCENTRATION_D2,
            format!("min fraction {sq:.4}{}", note(sq)),
        )
        .measured(sq, CONCENTRATION_D2),
        Check::new(
            "estimators.concentration_d2_surface",
            gr >= CONCENTRATION_D2,
            format!("min fraction {gr:.4}{}", note(gr)),
        )
        .measured(gr, CONCENTRATION_D2),
    ]
}

/// Lower and upper bounds on the annulus mass over random configurations.
pub fn annulus_mass_rows(cloud: &WeightedPointCloud, d: usize, cp: f64, alpha0: f64, configs: usize, seed: u64) -> Vec<sequences::AnnulusMass> {
    (0..configs)
        .filter_map(|c| {
            let mut r = rng::at(seed, rng::streams::HARNESS, 7_000 + c as u64);
            let idx: Vec<usize> = rand::seq::index::sample(&mut r, cloud.len(), d + 2).into_vec();
            let x = Tuple::new(idx.iter().map(|&i| cloud.point(i).clone()).collect()).ok()?;
            annulus_conditional_mass(cloud, &x, 1, 1, cp, alpha0).ok()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ratio experiments

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Curvature against discrete flatness.
    Thm12,
    /// Curvature against mass.
    Thm13,
    /// Separated-simplex curvature against `beta_2^2 mu(B)`.
    Prop11,
    /// Discrete against continuous flatness.
    Prop43,
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "thm12" => Experiment::Thm12,
            "thm13" => Experiment::Thm13,
            "prop11" => Experiment::Prop11,
            "prop43" => Experiment::Prop43,
            other => return Err(format!("unknown experiment `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub ball: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub mass: f64,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl RatioRow {
    pub const CSV_HEADER: &'static str = "ball,center,radius,lambda,lhs,rhs,mass,ratio,std_error,flag";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let center: Vec<String> = self.center.iter().map(|c| c.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.ball,
            center.join(" "),
            self.radius,
            opt(self.lambda),
            self.lhs,
            self.rhs,
            self.mass,
            self.ratio,
            opt(self.std_error),
            self.flag.clone().unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioParams {
    pub d: usize,
    pub seed: u64,
    pub n_balls: usize,
    /// Radii are drawn uniformly from this range, as fractions of the
    /// support radius.
    pub radius_range: (f64, f64),
    pub mc_samples: usize,
    pub alpha0: f64,
    /// Quadrature ratio and subsample size for continuous flatness.
    pub rho: f64,
    pub x_subsample: usize,
}

impl Default for RatioParams {
    fn default() -> Self {
        RatioParams {
            d: 1,
            seed: 0,
            n_balls: 20,
            radius_range: (0.3, 1.0),
            mc_samples: 100_000,
            alpha0: WORKING_ALPHA0,
            rho: 0.5,
            x_subsample: 200,
        }
    }
}

/// Balls centered at seeded support points.
pub fn sample_balls(cloud: &WeightedPointCloud, params: &RatioParams) -> Vec<Ball> {
    let half = 0.5 * cloud.support_diameter();
    (0..params.n_balls)
        .map(|b| {
            let mut r = rng::at(params.seed, rng::streams::HARNESS, 5_000 + b as u64);
            let c = cloud.point(r.gen_range(0..cloud.len())).clone();
            let (lo, hi) = params.radius_range;
            Ball::new(c, half * r.gen_range(lo..=hi)).expect("positive radius")
        })
        .collect()
}

fn ratio(lhs: f64, rhs: f64) -> (f64, Option<String>) {
    if rhs > RATIO_FLOOR {
        (lhs / rhs, None)
    } else if lhs.abs() <= RATIO_FLOOR {
        (0.0, Some(flag_name(RatioFlag::ZeroOverZero)))
    } else {
        (f64::INFINITY, Some(flag_name(RatioFlag::ZeroDenominator)))
    }
}

const RATIO_FLOOR: f64 = crate::estimators::RATIO_ZERO;

fn flag_name(f: RatioFlag) -> String {
    match f {
        RatioFlag::ZeroOverZero => "zero_over_zero".into(),
        RatioFlag::ZeroDenominator => "zero_denominator".into(),
    }
}

/// Discrete flatness of `mu|_B`, with the family built on the restriction.
pub fn restricted_discrete_flatness(cloud: &WeightedPointCloud, b: &Ball, d: usize, alpha0: f64) -> f64 {
    let Some(sub) = cloud.restrict(b) else { return 0.0 };
    let family = family_for(&sub, b, alpha0, d);
    jones_flatness_discrete(&sub, b, &family, d).expect("family starts at m(B)").total
}

/// Runs one ratio experiment over seeded balls (and `lambdas` for the
/// separated-simplex experiment).
pub fn ratio_experiment(
    cloud: &WeightedPointCloud,
    experiment: Experiment,
    params: &RatioParams,
    lambdas: &[f64],
) -> Vec<RatioRow> {
    let d = params.d;
    let balls = sample_balls(cloud, params);
    let mut rows = Vec::new();
    for (bi, b) in balls.iter().enumerate() {
        let opts = McOptions {
            n_samples: params.mc_samples,
            seed: rng::derive(params.seed, bi as u64),
            ..McOptions::default()
        };
        let mass = cloud.ball_mass(b);
        let base = |lambda, lhs: f64, rhs: f64, se: Option<f64>| {
            let (ratio, flag) = ratio(lhs, rhs);
            RatioRow {
                ball: bi,
                center: b.center().coords().to_vec(),
                radius: b.radius(),
                lambda,
                lhs,
                rhs,
                mass,
                ratio,
                std_error: se,
                flag,
            }
        };
        match experiment {
            Experiment::Thm13 | Experiment::Thm12 => {
                let c = continuous_curvature_sq(cloud, Some(b), d, &opts).expect("center is a support point").curvature;
                let rhs = if experiment == Experiment::Thm13 {
                    mass
                } else {
                    restricted_discrete_flatness(cloud, b, d, params.alpha0)
                };
                rows.push(base(None, c.estimate, rhs, Some(c.std_error)));
            }
            Experiment::Prop11 => {
                for &lambda in lambdas {
                    let p = prop11_ratio(cloud, b.center(), b.radius(), lambda, d, &opts).expect("valid ball");
                    let mut row = base(Some(lambda), p.lhs.estimate, p.beta2sq * p.mass, Some(p.lhs.std_error));
                    row.ratio = p.ratio;
                    row.flag = p.flag.map(flag_name);
                    rows.push(row);
                }
            }
            Experiment::Prop43 => {
                let lhs = restricted_discrete_flatness(cloud, b, d, params.alpha0);
                let wide = b.blow_up(6.0);
                let rhs = jones_flatness_continuous(cloud, &wide, d, params.rho, Some(params.x_subsample))
                    .expect("valid ratio")
                    .total;
                rows.push(base(None, lhs, rhs, None));
            }
        }
    }
    rows
}

/// `ratio * lambda^{d(d+1)+4}` for each row of a separated-simplex table.
pub fn scaled_prop11(rows: &[RatioRow], d: usize) -> Vec<f64> {
    let e = (d * (d + 1) + 4) as i32;
    rows.iter()
        .filter_map(|r| r.lambda.map(|l| r.ratio * l.powi(e)))
        .collect()
}

/// `max / median` of the finite positive entries.
pub fn max_over_median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    v[n - 1] / median
}

/// `max / min` of the finite positive entries.
pub fn spread(values: &[f64]) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
}
