use std::sync::Arc;

use proptest::prelude::*;
use riesz_core::analysis::bl_distance;
use riesz_core::energy::{measure_energy, point_set_energy, riesz_kernel, DiagonalPolicy, DiscreteMeasure, Schedule};
use riesz_core::geometry::{make_builtin, sample_cloud, BuiltinKind, BuiltinParams, WeightedPointCloud};

fn square_cloud() -> Arc<WeightedPointCloud> {
    let g = make_builtin(BuiltinKind::Square, &BuiltinParams::new()).unwrap();
    Arc::new(sample_cloud(&g, 64, 0).unwrap())
}

fn measure(cloud: &Arc<WeightedPointCloud>, raw: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::normalized(cloud.clone(), raw[..cloud.len()].to_vec()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn point_energy_is_permutation_invariant(pts in prop::collection::vec(-5.0f64..5.0, 6..60), s in 0.1f64..3.0, seed in any::<u64>()) {
        let n = pts.len() / 2;
        let pts = &pts[..2 * n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            order.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let shuffled: Vec<f64> = order.iter().flat_map(|&i| [pts[2 * i], pts[2 * i + 1]]).collect();
        let a = point_set_energy(pts, 2, s, Schedule::Sequential).unwrap();
        let b = point_set_energy(&shuffled, 2, s, Schedule::default()).unwrap();
        prop_assert!(a.is_infinite() && b.is_infinite() || rel(a, b) < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn kernel_decreases_with_distance(r1 in 1e-3f64..10.0, dr in 1e-6f64..10.0, s in 0.05f64..4.0) {
        let k1 = riesz_kernel(&[0.0, 0.0], &[r1, 0.0], s).unwrap();
        let k2 = riesz_kernel(&[0.0, 0.0], &[0.0, r1 + dr], s).unwrap();
        prop_assert!(k1 > k2);
        prop_assert!((k1 - r1.powf(-s)).abs() <= 1e-12 * k1);
    }

    #[test]
    fn measure_energy_is_relabeling_invariant(raw in prop::collection::vec(0.01f64..1.0, 64), s in 0.2f64..1.9) {
        let c = square_cloud();
        let mu = measure(&c, &raw);
        let perm: Vec<usize> = (0..c.len()).rev().collect();
        let a = measure_energy(&mu, s, DiagonalPolicy::CellCorrected).unwrap().value;
        let b = measure_energy(&mu.permuted(&perm).unwrap(), s, DiagonalPolicy::CellCorrected).unwrap().value;
        prop_assert!(rel(a, b) < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn bl_distance_is_a_pseudometric(
        a in prop::collection::vec(0.01f64..1.0, 64),
        b in prop::collection::vec(0.01f64..1.0, 64),
        c in prop::collection::vec(0.01f64..1.0, 64),
    ) {
        let cloud = square_cloud();
        let (mu, nu, rho) = (measure(&cloud, &a), measure(&cloud, &b), measure(&cloud, &c));
        let d = |x: &DiscreteMeasure, y: &DiscreteMeasure| bl_distance(x, y, 16, 3).unwrap();
        prop_assert!(d(&mu, &mu).abs() < 1e-15);
        prop_assert!(d(&mu, &nu) >= 0.0);
        prop_assert!((d(&mu, &nu) - d(&nu, &mu)).abs() < 1e-15);
        prop_assert!(d(&mu, &rho) <= d(&mu, &nu) + d(&nu, &rho) + 1e-12);
        prop_assert!(d(&mu, &nu) <= 2.0);
    }
}
