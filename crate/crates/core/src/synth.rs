//! Synthetic regression graphs whose ring-level heterophily grows with the
//! graph index.
//!
//! Graph `i` splits the nodes into `i` subsets with label means
//! `10, 20, .., 10 i`. A node in subset `j` only links to subsets `j..=i`,
//! so larger `i` mixes more label levels into each neighborhood. Every
//! edge carries an explicit distance that places it in a known ring.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{Edge, SpatialGraph, TaskKind};

/// Width of one distance ring in metres.
pub const RING_WIDTH: f64 = 1000.0;
pub const SUITE_SIZE: usize = 10;

/// How a node's sampled neighbors are placed into distance rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingRule {
    /// Ring `k - j` for a neighbor drawn from subset `k` by a node of
    /// subset `j`: each ring holds one label level.
    SubsetOffset,
    /// Neighbors sorted by absolute label difference and dealt out in equal
    /// chunks, nearest ring first.
    SortedChunks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub feat_dim: usize,
    pub k_edges: usize,
    pub n_rings: usize,
    pub index: usize,
    pub seed: u64,
    pub ring_rule: RingRule,
    /// Append a constant-one feature column after the random features.
    pub intercept: bool,
}

impl SynthConfig {
    pub fn new(index: usize, seed: u64) -> Self {
        Self {
            n_nodes: 5000,
            feat_dim: 10,
            k_edges: 50,
            n_rings: 10,
            index,
            seed,
            ring_rule: RingRule::SubsetOffset,
            intercept: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.index == 0 || self.index > self.n_rings {
            return bad(format!(
                "graph index {} outside 1..={}",
                self.index, self.n_rings
            ));
        }
        if self.n_nodes < self.index {
            return bad(format!(
                "{} nodes cannot fill {} subsets",
                self.n_nodes, self.index
            ));
        }
        if self.k_edges == 0 {
            return bad("k_edges must be positive".into());
        }
        if self.ring_rule == RingRule::SortedChunks && self.k_edges % self.n_rings != 0 {
            return bad(format!(
                "{} edges do not split evenly over {} rings",
                self.k_edges, self.n_rings
            ));
        }
        // the last subset only links to itself
        let smallest = self.n_nodes / self.index;
        if smallest < self.k_edges + 1 {
            return bad(format!(
                "subsets of {smallest} nodes cannot supply {} distinct neighbors",
                self.k_edges
            ));
        }
        Ok(())
    }
}

/// Subset sizes: `n / i` each, with the remainder going to the first subsets.
pub fn subset_sizes(n: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|s| n / parts + usize::from(s < n % parts))
        .collect()
}

pub fn generate(config: &SynthConfig) -> Result<SpatialGraph> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_nodes;
    let parts = config.index;
    let sizes = subset_sizes(n, parts);
    let mut starts = vec![0usize; parts + 1];
    for s in 0..parts {
        starts[s + 1] = starts[s] + sizes[s];
    }
    let subset_of: Vec<usize> = (0..parts)
        .flat_map(|s| std::iter::repeat_n(s, sizes[s]))
        .collect();

    let labels: Vec<f64> = subset_of
        .iter()
        .map(|&s| {
            let normal = Normal::new(10.0 * (s + 1) as f64, 1.0).expect("unit std");
            normal.sample(&mut rng)
        })
        .collect();

    let width = config.feat_dim + usize::from(config.intercept);
    let mut features = Array2::<f64>::zeros((n, width));
    for mut row in features.rows_mut() {
        for x in row.iter_mut().take(config.feat_dim) {
            *x = StandardNormal.sample(&mut rng);
        }
        if config.intercept {
            row[config.feat_dim] = 1.0;
        }
    }

    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let side = 10.0 * RING_WIDTH;
            [rng.random::<f64>() * side, rng.random::<f64>() * side]
        })
        .collect();

    let mut edges = Vec::with_capacity(n * config.k_edges);
    let mut chosen: Vec<bool> = vec![false; n];
    let mut remaining: Vec<usize> = sizes.clone();
    for v in 0..n {
        let j = subset_of[v];
        // (neighbor, subset offset) in draw order
        let mut picks: Vec<(usize, usize)> = Vec::with_capacity(config.k_edges);
        remaining[..].copy_from_slice(&sizes);
        chosen[v] = true;
        remaining[j] -= 1;
        while picks.len() < config.k_edges {
            let k = rng.random_range(j..parts);
            if remaining[k] == 0 {
                continue;
            }
            let u = loop {
                let u = starts[k] + rng.random_range(0..sizes[k]);
                if !chosen[u] {
                    break u;
                }
            };
            chosen[u] = true;
            remaining[k] -= 1;
            picks.push((u, k - j));
        }
        chosen[v] = false;
        for &(u, _) in &picks {
            chosen[u] = false;
        }

        let rings: Vec<usize> = match config.ring_rule {
            RingRule::SubsetOffset => picks.iter().map(|&(_, off)| off).collect(),
            RingRule::SortedChunks => {
                let mut order: Vec<usize> = (0..picks.len()).collect();
                order.sort_by(|&a, &b| {
                    let da = (labels[picks[a].0] - labels[v]).abs();
                    let db = (labels[picks[b].0] - labels[v]).abs();
                    da.total_cmp(&db)
                });
                let per_ring = config.k_edges / config.n_rings;
                let mut rings = vec![0; picks.len()];
                for (rank, &p) in order.iter().enumerate() {
                    rings[p] = rank / per_ring;
                }
                rings
            }
        };
        let mut placed: Vec<(usize, usize)> = picks.iter().map(|&(u, _)| u).zip(rings).collect();
        placed.shuffle(&mut rng);
        for (u, ring) in placed {
            let distance = (ring as f64 + 0.5) * RING_WIDTH;
            let bearing = rng.random::<f64>() * TAU;
            edges.push(Edge::with_geometry(v, u, distance, bearing));
        }
    }

    SpatialGraph::new(
        coords,
        edges,
        features,
        labels.into_iter().map(Some).collect(),
        TaskKind::Regression,
    )
}

/// Graphs `1..=SUITE_SIZE`; graph `i` is generated with seed `seed + i`.
pub fn generate_suite(base: &SynthConfig) -> Result<Vec<SpatialGraph>> {
    (1..=SUITE_SIZE)
        .map(|i| {
            generate(&SynthConfig {
                index: i,
                seed: base.seed.wrapping_add(i as u64),
                ..base.clone()
            })
        })
        .collect()
}

/// Ring of each edge as placed by the generator.
pub fn ring_of_distance(distance: f64) -> usize {
    (distance / RING_WIDTH).floor() as usize
}

/// Small random regression graph: uniform coordinates in a 4 km square,
/// each ordered pair linked with probability `edge_prob`, uniform features
/// in `[-0.5, 0.5)` and labels linear in the first feature plus noise.
pub fn random_graph(
    nodes: usize,
    feat_dim: usize,
    edge_prob: f64,
    seed: u64,
) -> Result<SpatialGraph> {
    if nodes == 0 || feat_dim == 0 || !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!(
            "random graph needs nodes > 0, features > 0 and an edge probability in [0, 1]; got {nodes}, {feat_dim}, {edge_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..nodes)
        .map(|_| [rng.random::<f64>() * 4000.0, rng.random::<f64>() * 4000.0])
        .collect();
    let mut edges = Vec::new();
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j && rng.random::<f64>() < edge_prob {
                edges.push(Edge::new(i, j));
            }
        }
    }
    let x = Array2::from_shape_fn((nodes, feat_dim), |_| rng.random::<f64>() - 0.5);
    let labels = (0..nodes)
        .map(|i| Some(2.0 * x[[i, 0]] + 1.0 + 0.1 * rng.random::<f64>()))
        .collect();
    SpatialGraph::new(coords, edges, x, labels, TaskKind::Regression)
}
