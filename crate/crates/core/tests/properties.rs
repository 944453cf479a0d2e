//! Property tests for the geometric and statistical invariants.

use proptest::prelude::*;

use hyperns::heatmap::{distance_heat, merge_topk, CandidateSet};
use hyperns::instance::{Instance, Point};
use hyperns::tour::Tour;

fn arb_points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::hash_set((0u32..1000, 0u32..1000), 4..max)
        .prop_map(|set| {
            set.into_iter()
                .map(|(x, y)| (x as f64 / 1000.0, y as f64 / 1000.0))
                .collect()
        })
}

fn instance_from(points: &[(f64, f64)]) -> Instance {
    let pts = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
    Instance::new("prop", pts).unwrap()
}

proptest! {
    #[test]
    fn distance_is_a_symmetric_metric(points in arb_points(60), a in 0usize..60, b in 0usize..60) {
        let inst = instance_from(&points);
        let a = a % inst.n();
        let b = b % inst.n();
        let d_ab = inst.distance(a, b);
        prop_assert_eq!(d_ab.to_bits(), inst.distance(b, a).to_bits());
        prop_assert!(d_ab >= 0.0);
        prop_assert_eq!(d_ab == 0.0, a == b);
    }

    #[test]
    fn knn_matches_exhaustive_sort(points in arb_points(40), v in 0usize..40, m in 1usize..40) {
        let inst = instance_from(&points);
        let v = v % inst.n();
        let mut expect: Vec<(f64, usize)> = (0..inst.n())
            .filter(|&u| u != v)
            .map(|u| (inst.distance(v, u), u))
            .collect();
        expect.sort_by(|x, y| x.partial_cmp(y).unwrap());
        expect.truncate(m.min(inst.n() - 1));
        let expect: Vec<usize> = expect.into_iter().map(|(_, u)| u).collect();
        prop_assert_eq!(inst.knn(v, m), expect);
    }

    #[test]
    fn tour_length_invariant_under_rotation_and_reversal(
        points in arb_points(30),
        rot in 0usize..30,
        rev in any::<bool>(),
    ) {
        let inst = instance_from(&points);
        let order: Vec<usize> = (0..inst.n()).collect();
        let base = Tour::new(order.clone(), &inst).unwrap().length();
        let mut variant = order;
        variant.rotate_left(rot % inst.n());
        if rev {
            variant.reverse();
        }
        let len = Tour::new(variant, &inst).unwrap().length();
        prop_assert!((len - base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn distance_heat_is_scale_invariant(points in arb_points(25), scale in 1u32..5000) {
        let inst = instance_from(&points);
        let scale = scale as f64 / 100.0;
        let scaled = Instance::new(
            "scaled",
            inst.points()
                .iter()
                .map(|p| Point::new(p.x * scale, p.y * scale))
                .collect(),
        )
        .unwrap();
        let set = CandidateSet::around(&inst, 0, inst.n());
        let set2 = CandidateSet { center: set.center, members: set.members.clone() };
        let h1 = distance_heat(&set, &inst, 1.0);
        let h2 = distance_heat(&set2, &scaled, 1.0);
        prop_assert_eq!(h1.len(), h2.len());
        for (a, b) in h1.iter().zip(h2.iter()) {
            prop_assert_eq!(a.0, b.0);
            prop_assert!((a.1 - b.1).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_topk_respects_per_vertex_budget(
        points in arb_points(30),
        heats in prop::collection::vec((0usize..30, 0usize..30, 0.0f64..=1.0), 1..200),
        k in 1usize..5,
    ) {
        let inst = instance_from(&points);
        let n = inst.n();
        let triplets: Vec<((usize, usize), f64)> = heats
            .into_iter()
            .filter(|&(i, j, _)| i % n != j % n)
            .map(|(i, j, h)| {
                let (a, b) = (i % n, j % n);
                ((a.min(b), a.max(b)), h)
            })
            .collect();
        prop_assume!(!triplets.is_empty());
        let graph = merge_topk(&[triplets], &inst, k);
        let mut total = 0;
        for v in 0..n {
            let entries = graph.vertex_entries(v);
            prop_assert!(entries.len() <= k);
            for &(_, h) in entries {
                prop_assert!((0.0..=1.0).contains(&h));
            }
            total += entries.len();
        }
        prop_assert!(graph.edge_count() <= total);
        prop_assert!(graph.edge_count() <= k * n);
    }
}
