//! Direction-sector and distance-ring partitions of a node's neighborhood.
//!
//! Both views use half-open cells with an inclusive lower bound. Every
//! neighbor lands in exactly one cell: bearings wrap modulo 2pi and
//! distances past the last boundary fall into the outermost ring. The
//! central node forms one extra group whose index equals the cell count.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::graph::{normalize_angle, SpatialGraph};
use crate::stats::{quantile_sorted, sort_floats};

/// `sectors` equal sectors of angle 2pi / sectors, rotated by `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorPartition {
    sectors: usize,
    offset: f64,
}

impl SectorPartition {
    pub fn new(sectors: usize, offset: f64) -> Result<Self> {
        if sectors == 0 {
            return Err(Error::InvalidArgument(
                "sector count must be at least 1".into(),
            ));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sector offset {offset} is not finite"
            )));
        }
        Ok(Self {
            sectors,
            offset: normalize_angle(offset),
        })
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

/// Rings `[0, b_1), [b_1, b_2), ..., [b_last, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingPartition {
    boundaries: Vec<f64>,
}

impl RingPartition {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.iter().any(|b| !b.is_finite() || *b <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ring boundaries must be positive and finite: {boundaries:?}"
            )));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "ring boundaries must be strictly increasing: {boundaries:?}"
            )));
        }
        Ok(Self { boundaries })
    }

    /// `rings` rings of equal `width`; the last one is open-ended.
    pub fn uniform(width: f64, rings: usize) -> Result<Self> {
        if rings == 0 {
            return Err(Error::InvalidArgument(
                "ring count must be at least 1".into(),
            ));
        }
        Self::new((1..rings).map(|k| width * k as f64).collect())
    }

    pub fn rings(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    Direction,
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Partition {
    Sector(SectorPartition),
    Ring(RingPartition),
}

impl Partition {
    pub fn view(&self) -> View {
        match self {
            Partition::Sector(_) => View::Direction,
            Partition::Ring(_) => View::Distance,
        }
    }

    /// Number of spatial cells, excluding the central group.
    pub fn cells(&self) -> usize {
        match self {
            Partition::Sector(s) => s.sectors(),
            Partition::Ring(r) => r.rings(),
        }
    }

    /// Cell of a neighbor at the given distance and bearing.
    pub fn cell_of(&self, distance: f64, bearing: f64) -> usize {
        match self {
            Partition::Sector(s) => sector_index(bearing, s),
            Partition::Ring(r) => ring_index(distance, r),
        }
    }
}

pub fn sector_index(bearing: f64, part: &SectorPartition) -> usize {
    let rel = (bearing - part.offset).rem_euclid(TAU);
    let k = (rel * part.sectors as f64 / TAU).floor() as usize;
    // rem_euclid can return values within one ulp of 2pi
    k.min(part.sectors - 1)
}

pub fn ring_index(distance: f64, part: &RingPartition) -> usize {
    part.boundaries.partition_point(|&b| b <= distance)
}

/// Neighbors of one central node split into spatial groups. `groups` has
/// `cells + 1` entries; the last one is `[central]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub central: usize,
    pub view: View,
    pub head: usize,
    pub groups: Vec<Vec<usize>>,
}

impl GroupAssignment {
    pub fn cells(&self) -> usize {
        self.groups.len() - 1
    }

    /// Non-central groups.
    pub fn spatial_groups(&self) -> &[Vec<usize>] {
        &self.groups[..self.cells()]
    }
}

pub fn assign_groups(
    graph: &SpatialGraph,
    v: usize,
    part: &Partition,
    head: usize,
) -> GroupAssignment {
    let mut groups = vec![Vec::new(); part.cells() + 1];
    for (&dst, &edge) in graph.neighborhood(v).iter().zip(graph.out_edges(v)) {
        let (distance, bearing) = graph.geometry_of(edge);
        groups[part.cell_of(distance, bearing)].push(dst);
    }
    groups[part.cells()].push(v);
    GroupAssignment {
        central: v,
        view: part.view(),
        head,
        groups,
    }
}

/// Cell index of every edge, in edge order.
pub fn edge_cells(graph: &SpatialGraph, part: &Partition) -> Vec<usize> {
    (0..graph.num_edges())
        .map(|e| {
            let (distance, bearing) = graph.geometry_of(e);
            part.cell_of(distance, bearing)
        })
        .collect()
}

/// Interpolated `percentile` quantile of all edge distances.
pub fn distance_cutoff(graph: &SpatialGraph, percentile: f64) -> Result<f64> {
    if graph.num_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let mut dists: Vec<f64> = (0..graph.num_edges())
        .map(|e| graph.geometry_of(e).0)
        .collect();
    sort_floats(&mut dists);
    quantile_sorted(&dists, percentile)
        .ok_or_else(|| Error::InvalidArgument(format!("percentile {percentile} outside [0, 1]")))
}

pub const METRIC_CELLS: usize = 10;
pub const METRIC_PERCENTILE: f64 = 0.9;

/// The fixed ten-sector / ten-ring partitions used for scoring. Rings
/// split `[0, cutoff)` evenly, where the cutoff is the 90th percentile of
/// edge distances; anything farther lands in the last ring.
pub fn metric_partitions(graph: &SpatialGraph) -> Result<(SectorPartition, RingPartition)> {
    let cutoff = distance_cutoff(graph, METRIC_PERCENTILE)?;
    if cutoff <= 0.0 {
        return Err(Error::InvalidGraph(
            "90th percentile of edge distances is zero; rings are undefined".into(),
        ));
    }
    let sectors = SectorPartition::new(METRIC_CELLS, 0.0)?;
    let rings = RingPartition::uniform(cutoff / METRIC_CELLS as f64, METRIC_CELLS)?;
    Ok((sectors, rings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionHeads {
    pub sector_heads: Vec<SectorPartition>,
    pub ring_heads: Vec<RingPartition>,
}

impl PartitionHeads {
    /// All heads in model order: sector heads first, then ring heads.
    pub fn all(&self) -> Vec<Partition> {
        self.sector_heads
            .iter()
            .map(|s| Partition::Sector(*s))
            .chain(self.ring_heads.iter().cloned().map(Partition::Ring))
            .collect()
    }
}

/// Rotation-scaling multi-head partitions: sector head `m` (0-based) is
/// rotated by `m * rotation`; ring head `m` uses `ring_boundary_sets[m]`.
pub fn model_heads(
    sectors: usize,
    rings: usize,
    sector_head_count: usize,
    ring_head_count: usize,
    rotation: f64,
    ring_boundary_sets: &[Vec<f64>],
) -> Result<PartitionHeads> {
    if sector_head_count == 0 || ring_head_count == 0 {
        return Err(Error::InvalidArgument(
            "head counts must be at least 1".into(),
        ));
    }
    if sectors == 0 || rings == 0 {
        return Err(Error::InvalidArgument(
            "sector and ring counts must be at least 1".into(),
        ));
    }
    if sector_head_count > 1 && !(rotation > 0.0 && rotation <= TAU / sectors as f64 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "rotation {rotation} outside (0, 2pi/{sectors}]"
        )));
    }
    if ring_boundary_sets.len() != ring_head_count {
        return Err(Error::InvalidArgument(format!(
            "{} ring boundary sets for {ring_head_count} ring heads",
            ring_boundary_sets.len()
        )));
    }
    let sector_heads = (0..sector_head_count)
        .map(|m| SectorPartition::new(sectors, m as f64 * rotation))
        .collect::<Result<_>>()?;
    let ring_heads = ring_boundary_sets
        .iter()
        .map(|set| {
            if set.len() + 1 != rings {
                return Err(Error::InvalidArgument(format!(
                    "ring boundary set {set:?} does not give {rings} rings"
                )));
            }
            RingPartition::new(set.clone())
        })
        .collect::<Result<_>>()?;
    Ok(PartitionHeads {
        sector_heads,
        ring_heads,
    })
}
