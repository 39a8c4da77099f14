use menger_core::measure::gen_four_corner_cantor;
use menger_core::{Ball, Vector, WeightedPointCloud};
use proptest::prelude::*;

fn cloud_strategy() -> impl Strategy<Value = WeightedPointCloud> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 2), 0.01f64..3.0), 1..60).prop_map(|rows| {
        let (pts, w): (Vec<_>, Vec<_>) = rows.into_iter().map(|(p, w)| (Vector::new(p).unwrap(), w)).unzip();
        WeightedPointCloud::new(pts, w, 1).unwrap()
    })
}

proptest! {
    #[test]
    fn mass_is_additive_over_partitions(cloud in cloud_strategy(), labels in prop::collection::vec(0usize..4, 60)) {
        let parts: Vec<Vec<usize>> = (0..4)
            .map(|l| (0..cloud.len()).filter(|&i| labels[i] == l).collect())
            .collect();
        let sum: f64 = parts.iter().map(|p| cloud.mass_of(p)).sum();
        prop_assert!((sum - cloud.total_mass()).abs() <= 1e-12 * cloud.total_mass());
    }

    #[test]
    fn ball_mass_is_monotone_in_radius(cloud in cloud_strategy(), c in prop::collection::vec(-1.0f64..1.0, 2)) {
        let center = Vector::new(c).unwrap();
        let mut prev = 0.0;
        for k in 1..=30 {
            let m = cloud.ball_mass(&Ball::new(center.clone(), 0.1 * k as f64).unwrap());
            prop_assert!(m >= prev);
            prev = m;
        }
        prop_assert!((prev - cloud.total_mass()).abs() <= 1e-12 * prev);
    }

    #[test]
    fn csv_round_trip(cloud in cloud_strategy()) {
        let back = WeightedPointCloud::from_csv_str(&cloud.to_csv_string(), 1).unwrap();
        prop_assert_eq!(back.points(), cloud.points());
        prop_assert_eq!(back.weights(), cloud.weights());
    }
}

#[test]
fn cantor_quarters_carry_equal_mass() {
    for level in 1..=5 {
        let c = gen_four_corner_cantor(level).unwrap();
        assert_eq!(c.len(), 4usize.pow(level));
        let total = c.total_mass();
        for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let idx: Vec<usize> = (0..c.len())
                .filter(|&i| {
                    let p = c.point(i).coords();
                    p[0] * sx > 0.0 && p[1] * sy > 0.0
                })
                .collect();
            assert_eq!(c.mass_of(&idx), total / 4.0, "level {level}");
        }
    }
}

#[test]
fn csv_rejects_bad_rows() {
    assert!(WeightedPointCloud::from_csv_str("dim=2\n0,0,0\n", 1).is_err());
    assert!(WeightedPointCloud::from_csv_str("dim=2\n0,0\n", 1).is_err());
    assert!(WeightedPointCloud::from_csv_str("0,0,1\n", 1).is_err());
    assert!(WeightedPointCloud::from_csv_str("dim=2\n0,x,1\n", 1).is_err());
}
