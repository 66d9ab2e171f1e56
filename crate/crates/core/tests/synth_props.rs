use proptest::prelude::*;

use shgnn::partition::{ring_index, RingPartition};
use shgnn::stats::mean;
use shgnn::synth::{generate, ring_of_distance, subset_sizes, RingRule, SynthConfig, RING_WIDTH};

fn small(index: usize, seed: u64, ring_rule: RingRule) -> SynthConfig {
    SynthConfig {
        n_nodes: 600,
        ring_rule,
        ..SynthConfig::new(index, seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sorted_chunks_order_rings_by_label_difference(seed in any::<u64>(), index in 1usize..=10) {
        let g = generate(&small(index, seed, RingRule::SortedChunks)).unwrap();
        for v in 0..g.num_nodes() {
            let y = g.label(v).unwrap();
            let mut pairs: Vec<(usize, f64)> = g
                .neighborhood(v)
                .iter()
                .zip(g.out_edges(v))
                .map(|(&u, &e)| (ring_of_distance(g.geometry_of(e).0), (g.label(u).unwrap() - y).abs()))
                .collect();
            pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
            prop_assert!(pairs.windows(2).all(|w| w[0].0 <= w[1].0));
        }
    }

    #[test]
    fn subset_offset_rings_hold_one_label_level(seed in any::<u64>(), index in 1usize..=10) {
        let cfg = small(index, seed, RingRule::SubsetOffset);
        let g = generate(&cfg).unwrap();
        let sizes = subset_sizes(cfg.n_nodes, index);
        let subset = |v: usize| {
            let mut acc = 0;
            sizes.iter().position(|&s| { acc += s; v < acc }).unwrap()
        };
        // mean |label difference| per ring grows with the ring
        let mut per_ring = vec![Vec::new(); cfg.n_rings];
        for v in 0..g.num_nodes() {
            for (&u, &e) in g.neighborhood(v).iter().zip(g.out_edges(v)) {
                let ring = ring_of_distance(g.geometry_of(e).0);
                prop_assert_eq!(ring, subset(u) - subset(v));
                per_ring[ring].push((g.label(u).unwrap() - g.label(v).unwrap()).abs());
            }
        }
        let means: Vec<f64> = per_ring.iter().filter(|r| !r.is_empty()).map(|r| mean(r)).collect();
        prop_assert!(means.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_edge_lands_in_its_ring(seed in any::<u64>(), index in 1usize..=10) {
        let cfg = small(index, seed, RingRule::SubsetOffset);
        let g = generate(&cfg).unwrap();
        let rings = RingPartition::uniform(RING_WIDTH, cfg.n_rings).unwrap();
        for e in g.edges() {
            let (d, b) = (e.distance.unwrap(), e.bearing.unwrap());
            prop_assert!((0.0..std::f64::consts::TAU).contains(&b));
            prop_assert_eq!(ring_index(d, &rings), ring_of_distance(d));
        }
    }
}

#[test]
fn subset_label_means_match_their_level() {
    let g = generate(&SynthConfig::new(10, 1)).unwrap();
    let tol = 3.0 / 500f64.sqrt();
    for j in 0..10 {
        let ys: Vec<f64> = (j * 500..(j + 1) * 500)
            .map(|v| g.label(v).unwrap())
            .collect();
        let m = mean(&ys);
        assert!(
            (m - 10.0 * (j + 1) as f64).abs() <= tol,
            "subset {j} mean {m}"
        );
    }
}
