//! `key = value` run configuration. `#` starts a comment; unknown or
//! repeated keys are errors; `model` is required.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::heterophily::{GroundKind, MetricOptions};
use crate::model::{Ablation, ModelConfig, ModelKind, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub sectors: usize,
    pub rings: usize,
    pub sector_heads: usize,
    pub ring_heads: usize,
    pub rotation_deg: f64,
    pub ring_boundaries: Vec<Vec<f64>>,
    pub hidden: usize,
    pub layers: usize,
    pub ablation: Ablation,
    pub train: TrainConfig,
    pub seed: u64,
    pub split: (f64, f64, f64),
    pub standardize: bool,
    pub metric: MetricOptions,
    pub graph: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for every optional key.
    pub fn new(kind: ModelKind) -> Self {
        let base = ModelConfig::new(kind, 1, crate::graph::TaskKind::Regression);
        Self {
            kind,
            sectors: base.sectors,
            rings: base.rings,
            sector_heads: base.sector_heads,
            ring_heads: base.ring_heads,
            rotation_deg: base.rotation_deg,
            ring_boundaries: base.ring_boundaries,
            hidden: base.hidden,
            layers: base.layers,
            ablation: Ablation::default(),
            train: TrainConfig::default(),
            seed: 0,
            split: (0.6, 0.2, 0.2),
            standardize: true,
            metric: MetricOptions::default(),
            graph: None,
            params: None,
            output: None,
        }
    }

    pub fn model_config(&self, graph: &SpatialGraph) -> ModelConfig {
        ModelConfig {
            kind: self.kind,
            sectors: self.sectors,
            rings: self.rings,
            sector_heads: self.sector_heads,
            ring_heads: self.ring_heads,
            rotation_deg: self.rotation_deg,
            ring_boundaries: self.ring_boundaries.clone(),
            hidden: self.hidden,
            layers: self.layers,
            input_dim: graph.feature_dim(),
            task: graph.task(),
            ablation: self.ablation,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected key = value, found {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    msg: format!("key {key} given twice"),
                });
            }
            pairs.push((line, key.to_string(), value.to_string()));
        }
        let Some((_, _, kind)) = pairs.iter().find(|(_, k, _)| k == "model") else {
            return Err(Error::Config {
                line: 0,
                msg: "missing required key model".into(),
            });
        };
        let kind = match kind.as_str() {
            "shgnn" => ModelKind::Shgnn,
            "gcn" => ModelKind::Gcn,
            other => {
                let line = pairs
                    .iter()
                    .find(|(_, k, _)| k == "model")
                    .map(|p| p.0)
                    .unwrap_or(0);
                return Err(Error::Config {
                    line,
                    msg: format!("model must be shgnn or gcn, found {other:?}"),
                });
            }
        };
        let mut cfg = Self::new(kind);
        for (line, key, value) in &pairs {
            cfg.set(*line, key, value)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let err = |msg: String| Error::Config { line, msg };
        let int = || {
            value
                .parse::<usize>()
                .map_err(|_| err(format!("{key}: expected an integer, found {value:?}")))
        };
        let real = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("{key}: expected a number, found {value:?}")))
        };
        let flag = || match value {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(err(format!(
                "{key}: expected true or false, found {value:?}"
            ))),
        };
        match key {
            "model" => {}
            "sectors" => self.sectors = int()?,
            "rings" => self.rings = int()?,
            "sector_heads" => self.sector_heads = int()?,
            "ring_heads" => self.ring_heads = int()?,
            "rotation_deg" => self.rotation_deg = real()?,
            "ring_boundaries" => {
                self.ring_boundaries = value
                    .split(';')
                    .map(|set| {
                        let set = set.trim();
                        if set.is_empty() {
                            return Ok(Vec::new());
                        }
                        set.split(',')
                            .map(|b| {
                                b.trim()
                                    .parse::<f64>()
                                    .map_err(|_| err(format!("ring_boundaries: bad number {b:?}")))
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?
            }
            "hidden" => self.hidden = int()?,
            "layers" => self.layers = int()?,
            "no_sectors" => self.ablation.no_sectors = flag()?,
            "no_rings" => self.ablation.no_rings = flag()?,
            "single_head" => self.ablation.single_head = flag()?,
            "no_commonality" => self.ablation.no_commonality = flag()?,
            "no_discrepancy" => self.ablation.no_discrepancy = flag()?,
            "epochs" => self.train.epochs = int()?,
            "patience" => self.train.patience = int()?,
            "lr" => self.train.lr = real()?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| err(format!("seed: expected an integer, found {value:?}")))?
            }
            "split" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(format!("split: expected three numbers, found {value:?}")))?;
                let [a, b, c] = parts[..] else {
                    return Err(err(format!(
                        "split: expected three numbers, found {value:?}"
                    )));
                };
                if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || a + b + c > 1.0 + 1e-9 {
                    return Err(err(format!(
                        "split: ratios {value:?} must be in [0, 1] and sum to at most 1"
                    )));
                }
                self.split = (a, b, c);
            }
            "standardize" => self.standardize = flag()?,
            "epsilon" => self.metric.sinkhorn.epsilon = real()?,
            "iters" => self.metric.sinkhorn.max_iters = int()?,
            "tol" => self.metric.sinkhorn.tol = real()?,
            "ground_cost" => {
                self.metric.ground = match value {
                    "ordinal" => GroundKind::Ordinal,
                    "uniform" => GroundKind::Uniform,
                    _ => {
                        return Err(err(format!(
                            "ground_cost: expected ordinal or uniform, found {value:?}"
                        )))
                    }
                }
            }
            "graph" => self.graph = Some(PathBuf::from(value)),
            "params" => self.params = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}
