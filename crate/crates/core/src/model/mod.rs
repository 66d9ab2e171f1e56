//! The spatial-group layer, the GCN control model, prediction heads,
//! training, and parameter checkpoints.

mod checkpoint;
mod config;
pub mod layers;
mod train;

use std::rc::Rc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{format_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint};
pub use config::{Ablation, ModelConfig, ModelKind};
pub use train::{
    loss_gradcheck, standardize_features, train, EpochRecord, TrainConfig, TrainReport,
};

use crate::error::Result;
use crate::graph::{SpatialGraph, TaskKind};
use crate::numerics::{glorot_uniform, Csr, ParamId, ParamStore, Tape, Var};
use crate::partition::Partition;
use layers::{
    attentive_select, commonality_enhance, discrepancy_enhance, fuse_views, gcn_layer,
    group_aggregate,
};

/// Precomputed sparse aggregation operators for one graph.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    pub sector_heads: Vec<Rc<Csr>>,
    pub ring_heads: Vec<Rc<Csr>>,
    pub gcn: Option<Rc<Csr>>,
}

impl GraphOperators {
    pub fn build(graph: &SpatialGraph, config: &ModelConfig) -> Result<Self> {
        match config.kind {
            ModelKind::Gcn => Ok(Self {
                sector_heads: Vec::new(),
                ring_heads: Vec::new(),
                gcn: Some(Rc::new(layers::gcn_operator(graph)?)),
            }),
            ModelKind::Shgnn => {
                let heads = config.heads()?;
                let build = |parts: Vec<Partition>| -> Result<Vec<Rc<Csr>>> {
                    parts
                        .iter()
                        .map(|p| layers::aggregation_operator(graph, p).map(Rc::new))
                        .collect()
                };
                let sector_heads = if config.uses_sectors() {
                    build(
                        heads
                            .sector_heads
                            .iter()
                            .map(|s| Partition::Sector(*s))
                            .collect(),
                    )?
                } else {
                    Vec::new()
                };
                let ring_heads = if config.uses_rings() {
                    build(
                        heads
                            .ring_heads
                            .iter()
                            .cloned()
                            .map(Partition::Ring)
                            .collect(),
                    )?
                } else {
                    Vec::new()
                };
                Ok(Self {
                    sector_heads,
                    ring_heads,
                    gcn: None,
                })
            }
        }
    }
}

/// Parameters of one view in one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewParams {
    pub groups: usize,
    /// Per head: the group transforms stacked row-wise.
    pub head_groups: Vec<ParamId>,
    pub common: Option<ParamId>,
    pub disc_a: Option<ParamId>,
    pub disc_b: Option<ParamId>,
    pub gate: Option<ParamId>,
    pub fuse: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Shgnn {
        sector: Option<ViewParams>,
        ring: Option<ViewParams>,
        gamma: Option<ParamId>,
    },
    Gcn {
        w: ParamId,
    },
}

/// Intermediate values of one view, kept for inspection in tests.
#[derive(Debug, Clone)]
pub struct ViewTrace {
    pub per_head: Vec<Var>,
    pub betas: Vec<Var>,
    pub common_alpha: Vec<Var>,
    pub disc_alpha: Vec<Var>,
    pub output: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub layers: Vec<LayerParams>,
    pub head_w: ParamId,
    pub head_b: ParamId,
    /// Regression targets are modelled as `(y - mean) / std`.
    pub target_mean: f64,
    pub target_std: f64,
}

impl Model {
    /// Fresh parameters: Glorot-uniform matrices, zero gate transforms,
    /// zero view-fusion logit and zero head bias.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.hidden;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let din = if l == 0 { config.input_dim } else { d };
            match config.kind {
                ModelKind::Gcn => {
                    let w = store.add(format!("l{l}.w"), glorot_uniform(din, d, &mut rng));
                    layers.push(LayerParams::Gcn { w });
                }
                ModelKind::Shgnn => {
                    let mut view =
                        |name: &str, heads: usize, cells: usize, store: &mut ParamStore| {
                            let groups = cells + 1;
                            let head_groups = (0..heads)
                                .map(|m| {
                                    let mut stacked = Array2::zeros((groups * din, d));
                                    for g in 0..groups {
                                        stacked
                                            .slice_mut(ndarray::s![g * din..(g + 1) * din, ..])
                                            .assign(&glorot_uniform(din, d, &mut rng));
                                    }
                                    store.add(format!("l{l}.{name}.h{m}.groups"), stacked)
                                })
                                .collect();
                            let ab = config.ablation;
                            let mut square = |suffix: &str, store: &mut ParamStore| {
                                store.add(
                                    format!("l{l}.{name}.{suffix}"),
                                    glorot_uniform(d, d, &mut rng),
                                )
                            };
                            let common = (!ab.no_commonality).then(|| square("common", store));
                            let disc_a = (!ab.no_discrepancy).then(|| square("disc_a", store));
                            let disc_b = (!ab.no_discrepancy).then(|| square("disc_b", store));
                            let gate = (!ab.no_commonality && !ab.no_discrepancy).then(|| {
                                store.add(
                                    format!("l{l}.{name}.gate"),
                                    Array2::zeros((2 * groups * d, 1)),
                                )
                            });
                            let width = config.view_width(heads, cells);
                            let fuse = store.add(
                                format!("l{l}.{name}.fuse"),
                                glorot_uniform(width, d, &mut rng),
                            );
                            ViewParams {
                                groups,
                                head_groups,
                                common,
                                disc_a,
                                disc_b,
                                gate,
                                fuse,
                            }
                        };
                    let sector = config.uses_sectors().then(|| {
                        view(
                            "sector",
                            config.effective_sector_heads(),
                            config.sectors,
                            &mut store,
                        )
                    });
                    let ring = config.uses_rings().then(|| {
                        view(
                            "ring",
                            config.effective_ring_heads(),
                            config.rings,
                            &mut store,
                        )
                    });
                    let gamma = (sector.is_some() && ring.is_some())
                        .then(|| store.add(format!("l{l}.gamma"), Array2::zeros((1, 1))));
                    layers.push(LayerParams::Shgnn {
                        sector,
                        ring,
                        gamma,
                    });
                }
            }
        }
        let out = config.output_dim();
        let head_w = store.add("head.w", glorot_uniform(d, out, &mut rng));
        let head_b = store.add("head.b", Array2::zeros((1, out)));
        Ok(Self {
            config,
            store,
            layers,
            head_w,
            head_b,
            target_mean: 0.0,
            target_std: 1.0,
        })
    }

    /// One view of one layer: per-head group aggregation, kernel
    /// interaction and gating, concatenated over heads.
    pub fn view_forward(
        &self,
        t: &mut Tape,
        ops: &[Rc<Csr>],
        params: &ViewParams,
        h: Var,
    ) -> Result<ViewTrace> {
        let g = params.groups;
        let s = &self.store;
        let mut trace = ViewTrace {
            per_head: Vec::new(),
            betas: Vec::new(),
            common_alpha: Vec::new(),
            disc_alpha: Vec::new(),
            output: h,
        };
        for (op, &w) in ops.iter().zip(&params.head_groups) {
            let w = t.param(s, w)?;
            let z = group_aggregate(t, op, g, h, w)?;
            let zc = match params.common {
                Some(wc) => {
                    let wc = t.param(s, wc)?;
                    let (zc, alpha) = commonality_enhance(t, z, wc, g)?;
                    trace.common_alpha.push(alpha);
                    Some(zc)
                }
                None => None,
            };
            let zd = match (params.disc_a, params.disc_b) {
                (Some(wa), Some(wb)) => {
                    let wa = t.param(s, wa)?;
                    let wb = t.param(s, wb)?;
                    let (zd, alpha) = discrepancy_enhance(t, z, wa, wb, g)?;
                    trace.disc_alpha.push(alpha);
                    Some(zd)
                }
                _ => None,
            };
            let mixed = match (zc, zd, params.gate) {
                (Some(zc), Some(zd), Some(wt)) => {
                    let wt = t.param(s, wt)?;
                    let (mixed, beta) = attentive_select(t, zc, zd, wt)?;
                    trace.betas.push(beta);
                    mixed
                }
                (Some(zc), None, _) => zc,
                (None, Some(zd), _) => zd,
                _ => z,
            };
            trace.per_head.push(mixed);
        }
        trace.output = if trace.per_head.len() == 1 {
            trace.per_head[0]
        } else {
            t.concat_cols(&trace.per_head)?
        };
        Ok(trace)
    }

    /// Output of layer `l` before any activation.
    pub fn layer_forward(
        &self,
        t: &mut Tape,
        ops: &GraphOperators,
        l: usize,
        h: Var,
    ) -> Result<Var> {
        let s = &self.store;
        match &self.layers[l] {
            LayerParams::Gcn { w } => {
                let w = t.param(s, *w)?;
                let op = ops.gcn.as_ref().expect("operators built for a GCN");
                gcn_layer(t, op, h, w)
            }
            LayerParams::Shgnn {
                sector,
                ring,
                gamma,
            } => {
                let hs = match sector {
                    Some(p) => Some((
                        self.view_forward(t, &ops.sector_heads, p, h)?.output,
                        p.fuse,
                    )),
                    None => None,
                };
                let hr = match ring {
                    Some(p) => Some((self.view_forward(t, &ops.ring_heads, p, h)?.output, p.fuse)),
                    None => None,
                };
                match (hs, hr, gamma) {
                    (Some((hs, ws)), Some((hr, wr)), Some(gamma)) => {
                        let gamma = t.param(s, *gamma)?;
                        let ws = t.param(s, ws)?;
                        let wr = t.param(s, wr)?;
                        fuse_views(t, hs, hr, gamma, ws, wr)
                    }
                    (Some((hv, wf)), None, _) | (None, Some((hv, wf)), _) => {
                        let wf = t.param(s, wf)?;
                        t.matmul(hv, wf)
                    }
                    _ => unreachable!("validated config keeps at least one view"),
                }
            }
        }
    }

    /// Stacked layers with ReLU between them; returns the last layer's
    /// output before activation.
    pub fn encode(&self, t: &mut Tape, ops: &GraphOperators, x: Var) -> Result<Var> {
        let mut h = x;
        for l in 0..self.layers.len() {
            if l > 0 {
                h = t.relu(h)?;
            }
            h = self.layer_forward(t, ops, l, h)?;
        }
        Ok(h)
    }

    /// Head outputs for every node: the standardized regression value, or
    /// class logits.
    pub fn forward(&self, t: &mut Tape, ops: &GraphOperators, x: Var) -> Result<Var> {
        let h = self.encode(t, ops, x)?;
        let h = t.relu(h)?;
        let w = t.param(&self.store, self.head_w)?;
        let b = t.param(&self.store, self.head_b)?;
        let out = t.matmul(h, w)?;
        t.add_row(out, b)
    }

    /// Predictions for every node: regression values in label units, or
    /// class probabilities.
    pub fn predict(&self, ops: &GraphOperators, features: &Array2<f64>) -> Result<Array2<f64>> {
        let mut t = Tape::new();
        let x = t.constant(features.clone())?;
        let out = self.forward(&mut t, ops, x)?;
        let raw = t.value(out);
        Ok(match self.config.task {
            TaskKind::Regression => raw.mapv(|v| v * self.target_std + self.target_mean),
            TaskKind::Classification { .. } => {
                let mut probs = raw.clone();
                for mut row in probs.rows_mut() {
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.mapv_inplace(|v| (v - m).exp());
                    let total = row.sum();
                    row.mapv_inplace(|v| v / total);
                }
                probs
            }
        })
    }
}
