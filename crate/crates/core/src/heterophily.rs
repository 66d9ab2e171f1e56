//! Label-dissimilarity distributions of spatial groups and the spatial
//! diversity scores built on their pairwise transport distances.
//!
//! Classification groups yield one mass per class: the share of group
//! members whose class differs from the central node and equals `c`.
//! Regression groups yield ten masses over the decile buckets of the
//! graph-wide edge label difference `y_dst - y_src`.

use crate::error::{Error, Result};
use crate::graph::{SpatialGraph, TaskKind};
use crate::partition::{assign_groups, metric_partitions, Partition, View};
use crate::stats::{quantile_sorted, sort_floats};
use crate::transport::{sinkhorn_wd, GroundCost, SinkhornParams};

pub const REGRESSION_BUCKETS: usize = 10;

/// Deciles `D_0..=D_10` of the edge label differences; `D_0` and `D_10`
/// are the minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecileEdges(pub [f64; 11]);

impl DecileEdges {
    /// Bucket `c` holds differences in `(D_c, D_c+1]`; values at or
    /// below `D_0` go to bucket 0 and values above `D_10` to bucket 9.
    pub fn bucket(&self, diff: f64) -> usize {
        self.0[1..10].iter().filter(|&&d| d < diff).count()
    }
}

pub fn label_diff_deciles(graph: &SpatialGraph) -> Result<DecileEdges> {
    if graph.task() != TaskKind::Regression {
        return Err(Error::InvalidArgument(
            "deciles need a regression graph".into(),
        ));
    }
    let mut diffs: Vec<f64> = graph
        .edges()
        .iter()
        .filter_map(|e| Some(graph.label(e.dst)? - graph.label(e.src)?))
        .collect();
    if diffs.is_empty() {
        return Err(Error::NoLabeledEdge);
    }
    sort_floats(&mut diffs);
    let mut edges = [0.0; 11];
    for (k, d) in edges.iter_mut().enumerate() {
        *d = quantile_sorted(&diffs, k as f64 / 10.0).expect("non-empty");
    }
    edges[0] = diffs[0];
    edges[10] = diffs[diffs.len() - 1];
    Ok(DecileEdges(edges))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissimDistribution {
    pub central: usize,
    pub group: Option<usize>,
    pub masses: Vec<f64>,
}

impl DissimDistribution {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

fn labeled(graph: &SpatialGraph, v: usize) -> Result<f64> {
    graph
        .label(v)
        .ok_or_else(|| Error::InvalidArgument(format!("node {v} is unlabeled")))
}

pub fn dissim_classification(
    graph: &SpatialGraph,
    v: usize,
    group: &[usize],
) -> Result<DissimDistribution> {
    let TaskKind::Classification { classes } = graph.task() else {
        return Err(Error::InvalidArgument(
            "classification dissimilarity on a regression graph".into(),
        ));
    };
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let own = labeled(graph, v)? as usize;
    let share = 1.0 / group.len() as f64;
    let mut masses = vec![0.0; classes];
    for &j in group {
        let c = labeled(graph, j)? as usize;
        if c != own {
            masses[c] += share;
        }
    }
    Ok(DissimDistribution {
        central: v,
        group: None,
        masses,
    })
}

pub fn dissim_regression(
    graph: &SpatialGraph,
    v: usize,
    group: &[usize],
    deciles: &DecileEdges,
) -> Result<DissimDistribution> {
    if graph.task() != TaskKind::Regression {
        return Err(Error::InvalidArgument(
            "regression dissimilarity on a classification graph".into(),
        ));
    }
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let own = labeled(graph, v)?;
    let share = 1.0 / group.len() as f64;
    let mut masses = vec![0.0; REGRESSION_BUCKETS];
    for &j in group {
        masses[deciles.bucket(labeled(graph, j)? - own)] += share;
    }
    Ok(DissimDistribution {
        central: v,
        group: None,
        masses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundKind {
    /// `|i - j|` over bucket (or class) indices.
    Ordinal,
    /// 0/1 cost.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub ground: GroundKind,
    pub sinkhorn: SinkhornParams,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            ground: GroundKind::Ordinal,
            sinkhorn: SinkhornParams::default(),
        }
    }
}

/// Balanced transport problem for a graph's task: regression masses pass
/// through unchanged; classification masses get one extra "same label"
/// bucket holding the homophilic residual, placed at the maximal cost
/// from every class bucket.
#[derive(Debug, Clone)]
pub struct TransportSetup {
    pub cost: GroundCost,
    padded: bool,
}

impl TransportSetup {
    pub fn for_task(task: TaskKind, ground: GroundKind) -> Self {
        let (buckets, padded) = match task {
            TaskKind::Regression => (REGRESSION_BUCKETS, false),
            TaskKind::Classification { classes } => (classes, true),
        };
        let base = match ground {
            GroundKind::Ordinal => GroundCost::ordinal(buckets),
            GroundKind::Uniform => GroundCost::uniform(buckets),
        };
        let cost = if padded {
            let pad = match ground {
                GroundKind::Ordinal => buckets as f64,
                GroundKind::Uniform => 1.0,
            };
            base.padded(pad)
        } else {
            base
        };
        Self { cost, padded }
    }

    pub fn balance(&self, masses: &[f64]) -> Vec<f64> {
        let mut out = masses.to_vec();
        if self.padded {
            let residual = (1.0 - masses.iter().sum::<f64>()).max(0.0);
            out.push(residual);
        }
        out
    }

    pub fn distance(&self, p: &[f64], q: &[f64], params: &SinkhornParams) -> Result<f64> {
        if p == q {
            return Ok(0.0);
        }
        Ok(sinkhorn_wd(&self.balance(p), &self.balance(q), &self.cost, params)?.cost)
    }
}

fn group_masses(
    graph: &SpatialGraph,
    v: usize,
    group: &[usize],
    deciles: Option<&DecileEdges>,
) -> Result<DissimDistribution> {
    match graph.task() {
        TaskKind::Classification { .. } => dissim_classification(graph, v, group),
        TaskKind::Regression => {
            let deciles = deciles.ok_or_else(|| {
                Error::InvalidArgument("regression discrepancy needs decile edges".into())
            })?;
            dissim_regression(graph, v, group, deciles)
        }
    }
}

/// Transport distance between the dissimilarity distributions of two
/// groups of `v`. Either group empty gives [`Error::EmptyGroup`].
pub fn disc(
    graph: &SpatialGraph,
    v: usize,
    group_p: &[usize],
    group_q: &[usize],
    deciles: Option<&DecileEdges>,
    opts: &MetricOptions,
) -> Result<f64> {
    let p = group_masses(graph, v, group_p, deciles)?;
    let q = group_masses(graph, v, group_q, deciles)?;
    TransportSetup::for_task(graph.task(), opts.ground).distance(
        &p.masses,
        &q.masses,
        &opts.sinkhorn,
    )
}

/// Dissimilarity distributions of the non-empty groups of `v` under
/// `part`, keeping only labeled members. Entries are `None` for groups
/// without labeled members.
pub fn group_distributions(
    graph: &SpatialGraph,
    v: usize,
    part: &Partition,
    deciles: Option<&DecileEdges>,
) -> Result<Vec<Option<DissimDistribution>>> {
    let assignment = assign_groups(graph, v, part, 0);
    assignment
        .spatial_groups()
        .iter()
        .enumerate()
        .map(|(k, members)| {
            let members: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&j| graph.is_labeled(j))
                .collect();
            if members.is_empty() {
                return Ok(None);
            }
            let mut dist = group_masses(graph, v, &members, deciles)?;
            dist.group = Some(k);
            Ok(Some(dist))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityScores {
    /// Direction-view score.
    pub sector: f64,
    /// Distance-view score.
    pub ring: f64,
    pub labeled_nodes: usize,
    /// Labeled nodes with at least two non-empty groups, per view.
    pub sector_eligible: usize,
    pub ring_eligible: usize,
}

pub const DISCREPANCY_THRESHOLD: f64 = 1.0;

fn decile_edges_for(graph: &SpatialGraph) -> Result<Option<DecileEdges>> {
    match graph.task() {
        TaskKind::Regression => label_diff_deciles(graph).map(Some),
        TaskKind::Classification { .. } => Ok(None),
    }
}

/// `(is discrepant, had at least two non-empty groups)` for one node.
fn node_is_discrepant(
    graph: &SpatialGraph,
    v: usize,
    part: &Partition,
    deciles: Option<&DecileEdges>,
    setup: &TransportSetup,
    params: &SinkhornParams,
) -> Result<(bool, bool)> {
    let dists: Vec<DissimDistribution> = group_distributions(graph, v, part, deciles)?
        .into_iter()
        .flatten()
        .collect();
    if dists.len() < 2 {
        return Ok((false, false));
    }
    for (i, p) in dists.iter().enumerate() {
        for q in &dists[i + 1..] {
            if setup.distance(&p.masses, &q.masses, params)? >= DISCREPANCY_THRESHOLD {
                return Ok((true, true));
            }
        }
    }
    Ok((false, true))
}

/// Share of labeled nodes having at least one pair of spatial groups whose
/// dissimilarity distributions are at transport distance `>= 1`, under the
/// ten-sector and ten-ring metric partitions. Nodes with fewer than two
/// non-empty groups count as not discrepant.
pub fn spatial_diversity_scores(
    graph: &SpatialGraph,
    opts: &MetricOptions,
) -> Result<DiversityScores> {
    let nodes = graph.labeled_nodes();
    if nodes.is_empty() {
        return Err(Error::NoLabeledNode);
    }
    let (sectors, rings) = metric_partitions(graph)?;
    let deciles = decile_edges_for(graph)?;
    let setup = TransportSetup::for_task(graph.task(), opts.ground);
    let mut counts = [[0usize; 2]; 2];
    for (slot, part) in [Partition::Sector(sectors), Partition::Ring(rings)]
        .iter()
        .enumerate()
    {
        for &v in &nodes {
            let (hit, eligible) =
                node_is_discrepant(graph, v, part, deciles.as_ref(), &setup, &opts.sinkhorn)?;
            counts[slot][0] += usize::from(hit);
            counts[slot][1] += usize::from(eligible);
        }
    }
    let n = nodes.len() as f64;
    Ok(DiversityScores {
        sector: counts[0][0] as f64 / n,
        ring: counts[1][0] as f64 / n,
        labeled_nodes: nodes.len(),
        sector_eligible: counts[0][1],
        ring_eligible: counts[1][1],
    })
}

/// Mean discrepancy between every pair of metric groups of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct TendencyMatrix {
    pub view: View,
    pub cells: usize,
    /// Row-major `cells x cells`; `None` where a pair was never co-populated.
    pub mean: Vec<Option<f64>>,
    pub count: Vec<usize>,
}

impl TendencyMatrix {
    pub fn get(&self, p: usize, q: usize) -> Option<f64> {
        self.mean[p * self.cells + q]
    }

    pub fn nodes(&self, p: usize, q: usize) -> usize {
        self.count[p * self.cells + q]
    }
}

pub fn pairwise_discrepancy_matrix(
    graph: &SpatialGraph,
    view: View,
    opts: &MetricOptions,
) -> Result<TendencyMatrix> {
    let nodes = graph.labeled_nodes();
    if nodes.is_empty() {
        return Err(Error::NoLabeledNode);
    }
    let (sectors, rings) = metric_partitions(graph)?;
    let part = match view {
        View::Direction => Partition::Sector(sectors),
        View::Distance => Partition::Ring(rings),
    };
    let cells = part.cells();
    let deciles = decile_edges_for(graph)?;
    let setup = TransportSetup::for_task(graph.task(), opts.ground);
    let mut sum = vec![0.0; cells * cells];
    let mut count = vec![0usize; cells * cells];
    for &v in &nodes {
        let dists = group_distributions(graph, v, &part, deciles.as_ref())?;
        for p in 0..cells {
            let Some(dp) = &dists[p] else { continue };
            count[p * cells + p] += 1;
            for q in p + 1..cells {
                let Some(dq) = &dists[q] else { continue };
                let d = setup.distance(&dp.masses, &dq.masses, &opts.sinkhorn)?;
                for idx in [p * cells + q, q * cells + p] {
                    sum[idx] += d;
                    count[idx] += 1;
                }
            }
        }
    }
    let mean = (0..cells * cells)
        .map(|idx| {
            if idx / cells == idx % cells {
                Some(0.0)
            } else if count[idx] == 0 {
                None
            } else {
                Some(sum[idx] / count[idx] as f64)
            }
        })
        .collect();
    Ok(TendencyMatrix {
        view,
        cells,
        mean,
        count,
    })
}
