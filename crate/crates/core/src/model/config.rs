use crate::error::{Error, Result};
use crate::graph::TaskKind;
use crate::partition::{model_heads, PartitionHeads};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Shgnn,
    Gcn,
}

/// Switches that remove one component of the layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub no_sectors: bool,
    pub no_rings: bool,
    pub single_head: bool,
    pub no_commonality: bool,
    pub no_discrepancy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub sectors: usize,
    pub rings: usize,
    pub sector_heads: usize,
    pub ring_heads: usize,
    pub rotation_deg: f64,
    /// Interior ring boundaries in metres, one set per ring head.
    pub ring_boundaries: Vec<Vec<f64>>,
    pub hidden: usize,
    pub layers: usize,
    pub input_dim: usize,
    pub task: TaskKind,
    pub ablation: Ablation,
}

impl ModelConfig {
    /// Four sectors and three rings under two heads each, sector heads
    /// rotated by 45 degrees, rings of 1.5 km and 2.5 km, width 32, one layer.
    pub fn new(kind: ModelKind, input_dim: usize, task: TaskKind) -> Self {
        Self {
            kind,
            sectors: 4,
            rings: 3,
            sector_heads: 2,
            ring_heads: 2,
            rotation_deg: 45.0,
            ring_boundaries: vec![vec![1500.0, 3000.0], vec![2500.0, 5000.0]],
            hidden: 32,
            layers: 1,
            input_dim,
            task,
            ablation: Ablation::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.layers == 0 {
            return bad("layer count must be at least 1");
        }
        if self.hidden == 0 || self.input_dim == 0 {
            return bad("widths must be positive");
        }
        if let TaskKind::Classification { classes } = self.task {
            if classes < 2 {
                return bad("classification needs at least two classes");
            }
        }
        if self.kind == ModelKind::Shgnn {
            if self.ablation.no_sectors && self.ablation.no_rings {
                return bad("no_sectors and no_rings together leave no view");
            }
            self.heads()?;
        }
        Ok(())
    }

    pub fn effective_sector_heads(&self) -> usize {
        if self.ablation.single_head {
            1
        } else {
            self.sector_heads
        }
    }

    pub fn effective_ring_heads(&self) -> usize {
        if self.ablation.single_head {
            1
        } else {
            self.ring_heads
        }
    }

    pub fn uses_sectors(&self) -> bool {
        !self.ablation.no_sectors
    }

    pub fn uses_rings(&self) -> bool {
        !self.ablation.no_rings
    }

    /// Partition heads after applying the single-head switch.
    pub fn heads(&self) -> Result<PartitionHeads> {
        let ms = self.effective_sector_heads();
        let mr = self.effective_ring_heads();
        if self.ring_boundaries.len() < mr {
            return Err(Error::InvalidArgument(format!(
                "{} ring boundary sets for {mr} ring heads",
                self.ring_boundaries.len()
            )));
        }
        model_heads(
            self.sectors,
            self.rings,
            ms,
            mr,
            self.rotation_deg.to_radians(),
            &self.ring_boundaries[..mr],
        )
    }

    /// Width of one view's concatenated output: heads x groups x hidden.
    pub fn view_width(&self, heads: usize, cells: usize) -> usize {
        heads * (cells + 1) * self.hidden
    }

    pub fn sector_width(&self) -> usize {
        self.view_width(self.effective_sector_heads(), self.sectors)
    }

    pub fn ring_width(&self) -> usize {
        self.view_width(self.effective_ring_heads(), self.rings)
    }

    pub fn output_dim(&self) -> usize {
        match self.task {
            TaskKind::Regression => 1,
            TaskKind::Classification { classes } => classes,
        }
    }
}
