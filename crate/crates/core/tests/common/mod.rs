//! Random graphs shared by the property suites.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shgnn::graph::{Edge, SpatialGraph, TaskKind};

pub struct GraphSpec {
    pub nodes: usize,
    pub edge_prob: f64,
    pub task: TaskKind,
    /// Share of edges carrying explicit distance and bearing.
    pub explicit: f64,
    /// Share of nodes left unlabeled.
    pub unlabeled: f64,
}

impl GraphSpec {
    pub fn regression(nodes: usize) -> Self {
        Self {
            nodes,
            edge_prob: 0.3,
            task: TaskKind::Regression,
            explicit: 0.0,
            unlabeled: 0.0,
        }
    }
}

pub fn random_graph(spec: &GraphSpec, seed: u64) -> SpatialGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.nodes;
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * 5000.0, rng.random::<f64>() * 5000.0])
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || rng.random::<f64>() >= spec.edge_prob {
                continue;
            }
            if rng.random::<f64>() < spec.explicit {
                let d = rng.random::<f64>() * 6000.0;
                let b = rng.random::<f64>() * std::f64::consts::TAU;
                edges.push(Edge::with_geometry(i, j, d, b));
            } else {
                edges.push(Edge::new(i, j));
            }
        }
    }
    let features = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
    let labels = (0..n)
        .map(|_| {
            if rng.random::<f64>() < spec.unlabeled {
                return None;
            }
            Some(match spec.task {
                TaskKind::Regression => rng.random::<f64>() * 100.0 - 50.0,
                TaskKind::Classification { classes } => rng.random_range(0..classes) as f64,
            })
        })
        .collect();
    SpatialGraph::new(coords, edges, features, labels, spec.task).expect("valid random graph")
}
