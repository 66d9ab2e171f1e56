mod common;

use std::rc::Rc;

use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_graph, GraphSpec};
use shgnn::graph::{SpatialGraph, TaskKind};
use shgnn::model::layers::{aggregation_operator, fuse_views, group_aggregate};
use shgnn::model::{GraphOperators, LayerParams, Model, ModelConfig, ModelKind};
use shgnn::numerics::Tape;
use shgnn::partition::{Partition, RingPartition, SectorPartition};

fn small_config(seed: u64, input_dim: usize) -> ModelConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = ModelConfig::new(ModelKind::Shgnn, input_dim, TaskKind::Regression);
    cfg.hidden = rng.random_range(1..6);
    cfg.sectors = rng.random_range(1..6);
    cfg.rings = rng.random_range(1..5);
    cfg.sector_heads = rng.random_range(1..3);
    cfg.ring_heads = rng.random_range(1..3);
    cfg.rotation_deg = 360.0 / cfg.sectors as f64 / 2.0;
    cfg.ring_boundaries = (0..cfg.ring_heads)
        .map(|m| (1..cfg.rings).map(|k| (k * 800 * (m + 1)) as f64).collect())
        .collect();
    cfg
}

/// Same graph with each node's out-edges listed in a shuffled order.
fn shuffled_edges(g: &SpatialGraph, seed: u64) -> SpatialGraph {
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    SpatialGraph::new(
        g.coords().to_vec(),
        edges,
        g.features().clone(),
        g.labels().to_vec(),
        g.task(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_and_gates_are_proper(seed in any::<u64>(), n in 2usize..12) {
        let g = random_graph(&GraphSpec::regression(n), seed);
        let cfg = small_config(seed, g.feature_dim());
        let mut model = Model::new(cfg.clone(), seed).unwrap();
        // nonzero gates so that beta moves away from one half
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        for id in model.store.ids().collect::<Vec<_>>() {
            if model.store.name(id).ends_with(".gate") {
                model.store.value_mut(id).mapv_inplace(|_| rng.random::<f64>() * 4.0 - 2.0);
            }
        }
        let ops = GraphOperators::build(&g, &cfg).unwrap();
        let LayerParams::Shgnn { sector, ring, .. } = &model.layers[0] else { unreachable!() };
        for (heads, params) in [(&ops.sector_heads, sector.as_ref().unwrap()), (&ops.ring_heads, ring.as_ref().unwrap())] {
            let mut t = Tape::new();
            let x = t.constant(g.features().clone()).unwrap();
            let trace = model.view_forward(&mut t, heads, params, x).unwrap();
            let groups = params.groups;
            for alpha in trace.common_alpha.iter().chain(&trace.disc_alpha) {
                for row in t.value(*alpha).rows() {
                    for p in 0..groups {
                        let total: f64 = (0..groups).map(|q| row[p * groups + q]).sum();
                        prop_assert!((total - 1.0).abs() <= 1e-12);
                    }
                }
            }
            for beta in &trace.betas {
                prop_assert!(t.value(*beta).iter().all(|&b| b > 0.0 && b < 1.0));
            }
            prop_assert_eq!(t.value(trace.output).ncols(), cfg.view_width(heads.len(), groups - 1));
        }
    }

    #[test]
    fn view_weight_stays_inside_the_unit_interval(raw in -30.0f64..30.0) {
        let mut t = Tape::new();
        let one = t.constant(array![[1.0]]).unwrap();
        let zero = t.constant(array![[0.0]]).unwrap();
        let g = t.constant(array![[raw]]).unwrap();
        // with hs = 1, hr = 0 and unit weights the fused value is gamma itself
        let h = fuse_views(&mut t, one, zero, g, one, one).unwrap();
        let gamma = t.value(h)[[0, 0]];
        prop_assert!(gamma > 0.0 && gamma < 1.0);
    }

    #[test]
    fn aggregation_ignores_neighbor_order(seed in any::<u64>(), n in 2usize..15, sectors in 1usize..6) {
        let g = random_graph(&GraphSpec { explicit: 0.5, ..GraphSpec::regression(n) }, seed);
        let h = shuffled_edges(&g, seed);
        let parts = [
            Partition::Sector(SectorPartition::new(sectors, 0.3).unwrap()),
            Partition::Ring(RingPartition::new(vec![1000.0, 2500.0]).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        for part in &parts {
            let groups = part.cells() + 1;
            let w = Array2::from_shape_fn((groups * g.feature_dim(), 2), |_| rng.random::<f64>() - 0.5);
            let run = |graph: &SpatialGraph| {
                let op = Rc::new(aggregation_operator(graph, part).unwrap());
                let mut t = Tape::new();
                let x = t.constant(graph.features().clone()).unwrap();
                let wv = t.constant(w.clone()).unwrap();
                let z = group_aggregate(&mut t, &op, groups, x, wv).unwrap();
                t.value(z).clone()
            };
            let (a, b) = (run(&g), run(&h));
            for (u, v) in a.iter().zip(b.iter()) {
                prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }
}

#[test]
fn shape_law_on_random_configs() {
    for seed in 0..10 {
        let cfg = small_config(seed, 3);
        let expect_s = cfg.sector_heads * (cfg.sectors + 1) * cfg.hidden;
        let expect_r = cfg.ring_heads * (cfg.rings + 1) * cfg.hidden;
        assert_eq!((cfg.sector_width(), cfg.ring_width()), (expect_s, expect_r));
    }
    let cfg = ModelConfig::new(ModelKind::Shgnn, 3, TaskKind::Regression);
    assert_eq!((cfg.sector_width(), cfg.ring_width()), (320, 256));
}
