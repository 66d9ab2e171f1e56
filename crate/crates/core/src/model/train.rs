use std::rc::Rc;

use ndarray::{Array2, Axis};

use super::{GraphOperators, Model};
use crate::error::{Error, Result};
use crate::graph::{NodeSplit, SpatialGraph, TaskKind};
use crate::numerics::{gradcheck, Adam, GradReport, ParamStore, Tape, Var};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            patience: 50,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Epoch at which a non-finite value appeared, if any.
    pub diverged_at: Option<usize>,
}

/// Z-scores every feature column over all nodes. Constant columns are
/// left as they are so an intercept column survives.
pub fn standardize_features(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let vals: Vec<f64> = col.iter().copied().collect();
        let sd = std_dev(&vals);
        if sd > 0.0 {
            let m = mean(&vals);
            col.mapv_inplace(|v| (v - m) / sd);
        }
    }
    out
}

enum Targets {
    Regression {
        train: Rc<Array2<f64>>,
        val: Array2<f64>,
    },
    Classification {
        train: Rc<Vec<usize>>,
        val: Vec<usize>,
    },
}

fn regression_targets(graph: &SpatialGraph, nodes: &[usize], mean: f64, sd: f64) -> Array2<f64> {
    Array2::from_shape_fn((nodes.len(), 1), |(k, _)| {
        (graph.label(nodes[k]).expect("split holds labeled nodes") - mean) / sd
    })
}

fn classes(graph: &SpatialGraph, nodes: &[usize]) -> Vec<usize> {
    nodes
        .iter()
        .map(|&v| graph.class_of(v).expect("split holds labeled nodes"))
        .collect()
}

fn mean_cross_entropy(logits: &Array2<f64>, rows: &[usize], classes: &[usize]) -> f64 {
    let total: f64 = rows
        .iter()
        .zip(classes)
        .map(|(&r, &c)| {
            let row = logits.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[c]
        })
        .sum();
    total / rows.len() as f64
}

fn training_loss(
    t: &mut Tape,
    out: Var,
    train_rows: &Rc<Vec<usize>>,
    targets: &Targets,
) -> Result<Var> {
    let picked = t.row_select(out, train_rows.clone())?;
    match targets {
        Targets::Regression { train, .. } => t.mse_loss(picked, train.clone()),
        Targets::Classification { train, .. } => t.cross_entropy_loss(picked, train.clone()),
    }
}

fn epoch_step(
    model: &mut Model,
    ops: &GraphOperators,
    features: &Array2<f64>,
    train_rows: &Rc<Vec<usize>>,
    val_nodes: &[usize],
    targets: &Targets,
) -> Result<(f64, f64)> {
    let mut t = Tape::new();
    let x = t.constant(features.clone())?;
    let out = model.forward(&mut t, ops, x)?;
    let loss = training_loss(&mut t, out, train_rows, targets)?;
    let val_loss = match targets {
        Targets::Regression { val, .. } => {
            let preds = t.value(out);
            let sq: f64 = val_nodes
                .iter()
                .zip(val.iter())
                .map(|(&v, y)| (preds[[v, 0]] - y).powi(2))
                .sum();
            sq / val_nodes.len() as f64
        }
        Targets::Classification { val, .. } => mean_cross_entropy(t.value(out), val_nodes, val),
    };
    let train_loss = t.value(loss)[[0, 0]];
    t.backward(loss, &mut model.store)?;
    Ok((train_loss, val_loss))
}

fn targets_for(model: &Model, graph: &SpatialGraph, train: &[usize], val: &[usize]) -> Targets {
    match graph.task() {
        TaskKind::Regression => Targets::Regression {
            train: Rc::new(regression_targets(
                graph,
                train,
                model.target_mean,
                model.target_std,
            )),
            val: regression_targets(graph, val, model.target_mean, model.target_std),
        },
        TaskKind::Classification { .. } => Targets::Classification {
            train: Rc::new(classes(graph, train)),
            val: classes(graph, val),
        },
    }
}

/// Compares the analytic gradient of the training loss on `nodes` with
/// central finite differences, for every parameter entry of `model`.
pub fn loss_gradcheck(
    model: &Model,
    ops: &GraphOperators,
    graph: &SpatialGraph,
    features: &Array2<f64>,
    nodes: &[usize],
) -> Result<GradReport> {
    if nodes.is_empty() {
        return Err(Error::NoLabeledNode);
    }
    let rows = Rc::new(nodes.to_vec());
    let targets = targets_for(model, graph, nodes, &[]);
    let mut store = model.store.clone();
    let f = |t: &mut Tape, s: &ParamStore| -> Result<Var> {
        let m = Model {
            store: s.clone(),
            ..model.clone()
        };
        let x = t.constant(features.clone())?;
        let out = m.forward(t, ops, x)?;
        training_loss(t, out, &rows, &targets)
    };
    gradcheck(f, &mut store)
}

/// Full-batch Adam on the training nodes with early stopping on the
/// validation loss. The model ends up holding the parameters of the best
/// validation epoch. `features` should already be preprocessed.
pub fn train(
    model: &mut Model,
    ops: &GraphOperators,
    graph: &SpatialGraph,
    features: &Array2<f64>,
    split: &NodeSplit,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if split.train.is_empty() {
        return Err(Error::TooFewLabeled {
            needed: 1,
            found: 0,
        });
    }
    // an empty validation split falls back to the training loss
    let val_nodes = if split.val.is_empty() {
        &split.train
    } else {
        &split.val
    };
    if graph.task() == TaskKind::Regression {
        let ys: Vec<f64> = split
            .train
            .iter()
            .map(|&v| graph.label(v).expect("labeled"))
            .collect();
        let sd = std_dev(&ys);
        model.target_mean = mean(&ys);
        model.target_std = if sd > 0.0 { sd } else { 1.0 };
    }
    let targets = targets_for(model, graph, &split.train, val_nodes);
    let train_rows = Rc::new(split.train.clone());
    let mut adam = Adam::new(&model.store, cfg.lr);
    let mut best = model.store.clone();
    let mut report = TrainReport {
        history: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
        diverged_at: None,
    };

    for epoch in 0..cfg.epochs {
        model.store.zero_grads();
        let step = epoch_step(model, ops, features, &train_rows, val_nodes, &targets);
        let (train_loss, val_loss) = match step {
            Ok(pair) if pair.0.is_finite() && pair.1.is_finite() => pair,
            Ok(_) | Err(Error::NonFinite(_)) => {
                report.diverged_at = Some(epoch);
                break;
            }
            Err(e) => return Err(e),
        };
        report.history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best.copy_values_from(&model.store);
        } else if epoch - report.best_epoch >= cfg.patience {
            report.stopped_early = true;
            break;
        }
        adam.step(&mut model.store);
    }
    model.store.copy_values_from(&best);
    Ok(report)
}
