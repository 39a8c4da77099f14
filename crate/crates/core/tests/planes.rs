use menger_core::planes::{beta2, beta2_with_plane, deviation_d2};
use menger_core::{AffinePlane, Ball, Tuple, Vector, WeightedPointCloud};
use proptest::prelude::*;

fn vec_of(v: Vec<f64>) -> Vector {
    Vector::new(v).unwrap()
}

fn cloud_strategy(dim: usize) -> impl Strategy<Value = WeightedPointCloud> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, dim), 0.1f64..2.0), 6..40).prop_map(|rows| {
        let (pts, w): (Vec<_>, Vec<_>) = rows.into_iter().map(|(p, w)| (vec_of(p), w)).unzip();
        WeightedPointCloud::new(pts, w, 1).unwrap()
    })
}

fn plane_strategy(d: usize, dim: usize) -> impl Strategy<Value = AffinePlane> {
    (
        prop::collection::vec(-1.0f64..1.0, dim),
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), d),
    )
        .prop_filter_map("independent directions", |(b, dirs)| AffinePlane::from_directions(vec_of(b), &dirs).ok())
}

/// Rotation in the `(0, 1)` coordinate plane followed by a shift.
fn isometry(theta: f64, shift: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |p: &[f64]| {
        let mut q = p.to_vec();
        q[0] = theta.cos() * p[0] - theta.sin() * p[1];
        q[1] = theta.sin() * p[0] + theta.cos() * p[1];
        q.iter_mut().zip(shift).for_each(|(a, b)| *a += b);
        q
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fitted_plane_is_optimal(
        cloud in cloud_strategy(3),
        d in 1usize..=2,
        planes in prop::collection::vec(plane_strategy(2, 3), 20),
        lines in prop::collection::vec(plane_strategy(1, 3), 20),
    ) {
        let ball = Ball::new(Vector::zeros(3), 1.2).unwrap();
        let best = beta2(&cloud, &ball, d).unwrap().value;
        let candidates = if d == 1 { &lines } else { &planes };
        for l in candidates {
            prop_assert!(beta2_with_plane(&cloud, &ball, l) >= best - 1e-12);
        }
    }

    #[test]
    fn beta_is_rigid_motion_invariant(
        cloud in cloud_strategy(3),
        theta in 0.0f64..6.3,
        shift in prop::collection::vec(-3.0f64..3.0, 3),
        plane in plane_strategy(1, 3),
    ) {
        let f = isometry(theta, &shift);
        let moved = WeightedPointCloud::new(
            cloud.points().iter().map(|p| vec_of(f(p.coords()))).collect(),
            cloud.weights().to_vec(),
            1,
        ).unwrap();
        let ball = Ball::new(vec_of(vec![0.1, -0.2, 0.0]), 0.9).unwrap();
        let ball2 = Ball::new(vec_of(f(ball.center().coords())), 0.9).unwrap();
        let (a, b) = (beta2(&cloud, &ball, 1).unwrap().value, beta2(&moved, &ball2, 1).unwrap().value);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(b) + 1e-12, "{} vs {}", a, b);
        let base = vec_of(f(plane.base().coords()));
        let origin = f(&[0.0, 0.0, 0.0]);
        let dir: Vec<f64> = f(plane.frame()[0].coords()).iter().zip(&origin).map(|(a, b)| a - b).collect();
        let moved_plane = AffinePlane::from_directions(base, &[dir]).unwrap();
        let (a, b) = (beta2_with_plane(&cloud, &ball, &plane), beta2_with_plane(&moved, &ball2, &moved_plane));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(b) + 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn deviation_bound_on_random_planes(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 4),
        plane in plane_strategy(2, 3),
    ) {
        let x = Tuple::new(pts.into_iter().map(vec_of).collect()).unwrap();
        let psin = x.polar_sine(0).unwrap();
        prop_assume!(psin > 1e-6);
        let d = 2.0;
        let bound = 2f64.sqrt() * (d + 1.0) * (d + 2.0) * deviation_d2(&x, &plane)
            / (x.scale_at0().unwrap() * x.diam());
        prop_assert!(psin <= bound * (1.0 + 1e-12), "{} > {}", psin, bound);
    }
}

#[test]
fn collinear_cloud_has_zero_beta() {
    let pts: Vec<Vector> = (0..10).map(|i| vec_of(vec![i as f64 * 0.1, 2.0 * i as f64 * 0.1])).collect();
    let cloud = WeightedPointCloud::uniform(pts, 1).unwrap();
    let ball = Ball::new(vec_of(vec![0.45, 0.9]), 2.0).unwrap();
    assert!(beta2(&cloud, &ball, 1).unwrap().value < 1e-12);
}

#[test]
fn rectangle_about_its_midline() {
    // rectangle 0.5 x 2h with h < 0.25: the best line is y = 0 and every
    // point is at distance h, so beta_2 = h / diam
    let h = 0.2;
    let cloud = WeightedPointCloud::new(
        vec![vec_of(vec![0.0, h]), vec_of(vec![0.0, -h]), vec_of(vec![0.5, h]), vec_of(vec![0.5, -h])],
        vec![0.25; 4],
        1,
    )
    .unwrap();
    let ball = Ball::new(vec_of(vec![0.25, 0.0]), 1.0).unwrap();
    let b = beta2(&cloud, &ball, 1).unwrap().value;
    let expect = h / 2.0;
    assert!((b - expect).abs() < 1e-12, "{b} vs {expect}");
}
