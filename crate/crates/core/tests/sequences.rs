use menger_core::measure::{gen_sphere, WeightedPointCloud};
use menger_core::rng;
use menger_core::sequences::*;
use menger_core::{Tuple, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn labels(prefix: &str, from: usize, to: usize) -> Vec<String> {
    (from..=to).map(|i| format!("{prefix}{i}")).collect()
}

fn show(t: &[String]) -> String {
    format!("({})", t.join(","))
}

#[test]
fn golden_d3_auxiliary() {
    let x = labels("x", 0, 4);
    let y = labels("y", 1, 6);
    let aux = auxiliary_sequence(&x, &y, 2, 3).unwrap();
    let got: Vec<String> = aux[1..].iter().map(|t| show(t)).collect();
    assert_eq!(
        got,
        [
            "(x0,x1,y1,x3,x4)",
            "(x0,x1,y1,y2,x4)",
            "(x0,x1,y1,y2,y3)",
            "(x0,x1,y4,y2,y3)",
            "(x0,x1,y4,y5,y3)",
            "(x0,x1,y4,y5,y6)",
        ]
    );
    assert_eq!(aux[0], x);
}

#[test]
fn golden_d3_well_scaled() {
    let x = labels("x", 0, 4);
    let y = labels("y", 1, 6);
    let seq = well_scaled_sequence(&x, &y, 2, 3).unwrap();
    let got: Vec<String> = seq.iter().map(|t| show(t)).collect();
    assert_eq!(
        got,
        [
            "(x0,y1,x2,x3,x4)",
            "(x0,y2,y1,x3,x4)",
            "(x0,y3,y1,y2,x4)",
            "(x0,y4,y1,y2,y3)",
            "(x0,y5,y4,y2,y3)",
            "(x0,y6,y4,y5,y3)",
            "(x0,x1,y4,y5,y6)",
        ]
    );
}

#[test]
fn golden_d3_rake_tree() {
    let x = labels("x", 0, 4);
    let z = labels("z", 1, 3);
    let tree = rake_tree(&x, &z, 3, 3).unwrap();
    assert_eq!(tree.len(), 3);
    assert_eq!(tree[0][0], x);
    let l1: Vec<String> = tree[1].iter().map(|t| show(t)).collect();
    assert_eq!(l1, ["(x0,x1,x2,z1,x4)", "(x0,x1,x3,z1,x4)"]);
    let l2: Vec<String> = tree[2].iter().map(|t| show(t)).collect();
    assert_eq!(
        l2,
        [
            "(x0,x1,z2,z1,x4)",
            "(x0,x2,z2,z1,x4)",
            "(x0,x1,z3,z1,x4)",
            "(x0,x3,z3,z1,x4)",
        ]
    );
    let leaves = rake_sequence(&x, &z, 3, 3).unwrap();
    assert_eq!(show(&leaves[1]), "(x0,x2,z2,z1,x4)");
}

/// Closed form of the auxiliary sequence for `j d < q < (j+1) d`, written
/// out independently of the recursion: coordinates `2..=r` hold the current
/// block, `r+1..=d+1` the previous block (or the original tines).
fn closed_form(q: usize, d: usize) -> Vec<String> {
    let j = q / d;
    let r = q % d + 1;
    let mut out = vec!["x0".to_string(), "x1".to_string()];
    for c in 2..=d + 1 {
        if c <= r {
            out.push(format!("y{}", j * d + c - 1));
        } else if j == 0 {
            out.push(format!("x{c}"));
        } else {
            out.push(format!("y{}", (j - 1) * d + c - 1));
        }
    }
    out
}

#[test]
fn auxiliary_closed_form_d2_k3() {
    let (d, k) = (2, 3);
    let x = labels("x", 0, d + 1);
    let y = labels("y", 1, k * d);
    let aux = auxiliary_sequence(&x, &y, k, d).unwrap();
    for q in 1..k * d {
        if q % d != 0 {
            assert_eq!(aux[q], closed_form(q, d), "q = {q}");
        }
    }
}

#[test]
fn size_mismatch_rejected() {
    let x = labels("x", 0, 4);
    assert!(auxiliary_sequence(&x, &labels("y", 1, 5), 2, 3).is_err());
    assert!(rake_tree(&x, &labels("z", 1, 2), 3, 3).is_err());
    assert!(rake_tree(&x, &labels("z", 1, 1), 1, 3).is_err());
}

fn planted(d: usize, k: usize, p: usize, seed: u64) -> (Tuple, Vec<Vector>, f64) {
    let alpha0 = 0.25;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let origin = vec![0.3; d + 1];
    let x = plant_canonical_simplex(&origin, d, k, p, 1, alpha0, &mut r);
    let y = plant_well_scaled_piece(&x, k, alpha0, &mut r);
    (x, y, alpha0)
}

#[test]
fn planted_bounds_d2_k3() {
    let (x, y, a) = planted(2, 3, 2, 11);
    let bundle = well_scaled_bundle(&x, &y, 3, 2).unwrap();
    assert_eq!(bundle.main.len(), 7);
    assert_eq!(bundle.main.last(), bundle.auxiliary.last());
    check_well_scaled_bounds(&bundle.main, &x, 3, 2, a).unwrap();
}

#[test]
fn corrupted_piece_fails_at_its_index() {
    let (x, mut y, a) = planted(2, 3, 2, 12);
    y[2] = Vector::from([5.0, 5.0, 5.0]);
    let bundle = well_scaled_bundle(&x, &y, 3, 2).unwrap();
    let err = check_well_scaled_bounds(&bundle.main, &x, 3, 2, a).unwrap_err();
    assert_eq!(err.q, 3);
}

#[test]
fn planted_d1_k3_hand_oracle() {
    // x0 at the origin, x1 = (1,0), tine x2 at angle 90 degrees, ratio 1/100.
    let a = 0.25;
    let x = Tuple::from_coords(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.01]]);
    let y: Vec<Vector> = vec![
        Vector::from([0.0, 0.03]),
        Vector::from([0.12, 0.0]),
        Vector::from([0.0, 0.5]),
    ];
    let bundle = well_scaled_bundle(&x, &y, 3, 1).unwrap();
    check_well_scaled_bounds(&bundle.main, &x, 3, 1, a).unwrap();
    // Every main element is a right or degenerate triangle at the origin:
    // X_1 = (0, y1, x2) collinear, X_2 = (0, y2, y1) right angle,
    // X_3 = (0, y3, y2) right angle, X_4 = (0, x1, y3) right angle.
    let chk = multiscale_inequality_check(&x, &y, 1.0, 3, 1).unwrap();
    assert!((chk.lhs - 1.0).abs() < 1e-15);
    assert!((chk.rhs - 12.0).abs() < 1e-12);
    assert!(chk.holds);
}

#[test]
fn rake_planted_d3_n3_k4() {
    let a = 0.25;
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let x = plant_canonical_simplex(&[0.0; 4], 3, 4, 1, 3, a, &mut r);
    let z = plant_short_scale_piece(&x, 4, 3, a, &mut r);
    let bundle = rake_bundle(&x, &z, 3, 3).unwrap();
    assert_eq!(bundle.main.len(), 4);
    check_rake_property(&bundle.main, 4, a).unwrap();

    let mut bad = z.clone();
    bad[0] = Vector::from([0.9, 0.0, 0.0, 0.0]);
    let leaves = rake_bundle(&x, &bad, 3, 3).unwrap().main;
    assert!(check_rake_property(&leaves, 4, a).is_err());
}

#[test]
fn rake_planted_n2_minimal() {
    let a = 0.25;
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let x = plant_canonical_simplex(&[0.0; 3], 2, 1, 1, 2, a, &mut r);
    let z = plant_short_scale_piece(&x, 1, 2, a, &mut r);
    let leaves = rake_bundle(&x, &z, 2, 2).unwrap().main;
    check_rake_property(&leaves, 1, a).unwrap();
}

#[test]
fn overline_violation_located() {
    // A flat root with a curved child pair cannot violate; a curved root
    // with flat children (z on the line x0-x1) violates at the root.
    let x = Tuple::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.01]]);
    let z = vec![Vector::from([0.0, 0.0, 0.0])];
    let chk = is_in_overline_set(&x, &z, 2, 10.0).unwrap();
    assert_eq!(chk.first_violation, Some((0, 1)));
    assert!(!chk.member);
}

#[test]
fn augmented_and_overline_degenerate() {
    let x = Tuple::from_coords(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.25, 0.0, 0.0]]);
    let z = vec![Vector::from([0.1, 0.0, 0.0])];
    assert!(is_in_overline_set(&x, &z, 2, 1.0).unwrap().member);
    let chk = rake_inequality_check(&x, &z, 1.0, 2).unwrap();
    assert!(chk.holds && chk.lhs == 0.0);
}

#[test]
fn huge_cp_is_member_when_some_term_positive() {
    let (x, y, _) = planted(2, 2, 1, 21);
    assert!(is_in_augmented_set(&x, &y, 2, 2, 1e12).unwrap().member);
}

fn circle(n: usize, seed: u64) -> WeightedPointCloud {
    gen_sphere(2, n, &mut rng::at(seed, rng::streams::GENERATOR, 0)).unwrap()
}

#[test]
fn planar_cloud_accepts_first_candidate() {
    let pts: Vec<Vector> = (0..400)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / 399.0;
            Vector::from([t, 0.5 * t])
        })
        .collect();
    let cloud = WeightedPointCloud::uniform(pts, 1).unwrap();
    let x = Tuple::new(vec![
        cloud.point(200).clone(),
        cloud.point(399).clone(),
        cloud.point(201).clone(),
    ])
    .unwrap();
    let piece = sample_well_scaled_piece(&cloud, &x, 2, 1.0, 0.25, 64, 1, 0).unwrap();
    assert!(piece.attempts.iter().all(|&a| a == 1));
}

#[test]
fn empty_annulus_is_reported() {
    let pts = vec![
        Vector::from([0.0, 0.0]),
        Vector::from([1.0, 0.0]),
        Vector::from([0.0, 0.001]),
    ];
    let cloud = WeightedPointCloud::uniform(pts, 1).unwrap();
    let x = Tuple::new(cloud.points().to_vec()).unwrap();
    let err = sample_well_scaled_piece(&cloud, &x, 3, 1.0, 0.25, 64, 1, 0).unwrap_err();
    assert_eq!(err, PieceFailure::EmptyAnnulus { coordinate: 1 });
}

#[test]
fn circle_acceptance_and_g_bounds() {
    let cloud = circle(4000, 5);
    let a: f64 = 0.25;
    let x0 = cloud.point(0).clone();
    // a far vertex and a close tine, both on the circle
    let far = (0..cloud.len())
        .max_by(|&i, &j| x0.distance(cloud.point(i)).total_cmp(&x0.distance(cloud.point(j))))
        .unwrap();
    let m = x0.distance(cloud.point(far));
    let tine = (0..cloud.len())
        .find(|&i| {
            let t = x0.distance(cloud.point(i)) / m;
            t > a.powi(3) && t <= a.powi(2)
        })
        .unwrap();
    let x = Tuple::new(vec![x0, cloud.point(far).clone(), cloud.point(tine).clone()]).unwrap();
    let mut accepted = 0;
    let mut total = 0;
    for e in 0..20u64 {
        let piece = sample_well_scaled_piece(&cloud, &x, 2, 1.0, a, 64, 9, e).unwrap();
        total += piece.attempts.len();
        accepted += piece.attempts.iter().filter(|&&t| t == 1).count();
        assert!(is_in_augmented_set(&x, &piece.points, 2, 1, 1.0).unwrap().member);
        assert!(multiscale_inequality_check(&x, &piece.points, 1.0, 2, 1).unwrap().holds);
    }
    assert!(accepted as f64 / total as f64 >= 0.9);
    let g = annulus_conditional_mass(&cloud, &x, 1, 2, 1.0, a).unwrap();
    assert!(g.upper_bound_holds);
    assert!(g.g <= g.annulus_mass);
}

#[test]
fn degenerate_prior_gives_annulus_mass() {
    let cloud = circle(1000, 6);
    let x = Tuple::new(vec![
        Vector::from([1.0, 0.0]),
        Vector::from([-1.0, 0.0]),
        Vector::from([0.0, 0.0]),
    ])
    .unwrap();
    let g = annulus_conditional_mass(&cloud, &x, 1, 1, 1.0, 0.25).unwrap();
    assert_eq!(g.g, g.annulus_mass);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lengths_match_constants(d in 1usize..5, k in 1usize..5) {
        let x = labels("x", 0, d + 1);
        let y = labels("y", 1, k * d);
        let seq = well_scaled_sequence(&x, &y, k, d).unwrap();
        prop_assert_eq!(seq.len(), k * d + 1);
        prop_assert_eq!(x.len() + y.len(), n_k(k, d));
        let aux = auxiliary_sequence(&x, &y, k, d).unwrap();
        prop_assert_eq!(seq.last(), aux.last());
        for n in 2..=d {
            let z = labels("z", 1, short_piece_len(n));
            let leaves = rake_sequence(&x, &z, n, d).unwrap();
            prop_assert_eq!(leaves.len(), 1 << (n - 1));
            prop_assert_eq!(x.len() + z.len(), m_n(n, d));
            for leaf in &leaves {
                let handles = leaf.iter().filter(|s| (1..=n).any(|i| **s == format!("x{i}"))).count();
                prop_assert_eq!(handles, 1);
                for t in n + 1..=d + 1 {
                    prop_assert_eq!(&leaf[t], &format!("x{t}"));
                }
            }
        }
    }

    #[test]
    fn planted_pieces_satisfy_scale_bounds(d in 1usize..4, k in 1usize..6, p in 1usize..3, seed in any::<u64>()) {
        let (x, y, a) = planted(d, k, p, seed);
        let el = AugmentedElement { x: x.clone(), piece: Piece::WellScaled(y.clone()), k, p, n: 1 };
        prop_assert!(el.piece_in_annuli(a));
        prop_assert_eq!(el.len(), n_k(k, d));
        let main = well_scaled_bundle(&x, &y, k, d).unwrap().main;
        prop_assert!(check_well_scaled_bounds(&main, &x, k, d, a).is_ok());
    }

    #[test]
    fn planted_rakes_are_single_handled(d in 2usize..4, k in 1usize..6, seed in any::<u64>()) {
        let a = 0.25;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for n in 2..=d {
            let x = plant_canonical_simplex(&vec![0.0; d + 1], d, k, 1, n, a, &mut r);
            let z = plant_short_scale_piece(&x, k, n, a, &mut r);
            let leaves = rake_bundle(&x, &z, n, d).unwrap().main;
            prop_assert!(check_rake_property(&leaves, k, a).is_ok());
        }
    }

    #[test]
    fn membership_implies_inequality(d in 1usize..3, k in 1usize..4, seed in any::<u64>()) {
        let (x, y, _) = planted(d, k, 1, seed);
        let cp = 2.0;
        if is_in_augmented_set(&x, &y, k, d, cp).unwrap().member {
            prop_assert!(multiscale_inequality_check(&x, &y, cp, k, d).unwrap().holds);
        }
    }

    #[test]
    fn bar_is_congruent(a in 0usize..1000, d in 1usize..8) {
        let b = bar_index(a, d);
        prop_assert!((2..=d + 1).contains(&b));
        prop_assert_eq!((b + 8 * d - a % d) % d, 0);
    }
}
