mod common;

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use common::{random_graph, GraphSpec};
use shgnn::graph::{coordinate_geometry, format_graph, parse_graph, split_random, TaskKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn save_then_load_is_identity(seed in any::<u64>(), n in 1usize..25, explicit in 0.0f64..1.0, classes in 0usize..4) {
        let task = if classes < 2 { TaskKind::Regression } else { TaskKind::Classification { classes } };
        let g = random_graph(&GraphSpec { explicit, unlabeled: 0.2, task, ..GraphSpec::regression(n) }, seed);
        prop_assert_eq!(parse_graph(&format_graph(&g)).unwrap(), g);
    }

    #[test]
    fn neighborhoods_cover_the_edges(seed in any::<u64>(), n in 1usize..30, p in 0.0f64..1.0) {
        let g = random_graph(&GraphSpec { edge_prob: p, ..GraphSpec::regression(n) }, seed);
        let total: usize = (0..n).map(|v| g.neighborhood(v).len()).sum();
        prop_assert_eq!(total, g.num_edges());
    }

    #[test]
    fn coordinate_geometry_is_antisymmetric(ax in -1e4f64..1e4, ay in -1e4f64..1e4, bx in -1e4f64..1e4, by in -1e4f64..1e4) {
        prop_assume!((ax, ay) != (bx, by));
        let (d1, b1) = coordinate_geometry([ax, ay], [bx, by]);
        let (d2, b2) = coordinate_geometry([bx, by], [ax, ay]);
        prop_assert_eq!(d1, d2);
        let diff = ((b2 + PI).rem_euclid(TAU) - b1).abs();
        prop_assert!(diff.min(TAU - diff) <= 1e-9);
        prop_assert!((0.0..TAU).contains(&b1));
    }

    #[test]
    fn splits_partition_the_labeled_nodes(seed in any::<u64>(), n in 5usize..60, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let g = random_graph(&GraphSpec { unlabeled: 0.1, edge_prob: 0.1, ..GraphSpec::regression(n) }, seed);
        prop_assume!(g.labeled_nodes().len() >= 5);
        let (r0, r1) = (a * 0.9, (1.0 - a * 0.9) * b);
        let s = split_random(&g, (r0, r1, 1.0 - r0 - r1), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        prop_assert_eq!(all.len(), before);
        prop_assert_eq!(all, g.labeled_nodes());
    }
}
