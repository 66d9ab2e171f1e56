use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;

use super::metrics::{
    classification_metrics, regression_metrics, ClassificationMetrics, RegressionMetrics,
};
use crate::error::{Error, Result};
use crate::graph::{split_random, NodeSplit, SpatialGraph, TaskKind};
use crate::heterophily::{spatial_diversity_scores, MetricOptions};
use crate::model::{
    standardize_features, train, GraphOperators, Model, ModelConfig, ModelKind, TrainConfig,
    TrainReport,
};
use crate::stats::{mean, std_dev};
use crate::synth::{generate, SynthConfig, RING_WIDTH, SUITE_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub regression: Option<RegressionMetrics>,
    pub classification: Option<ClassificationMetrics>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    pub wall_seconds: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl MetricsReport {
    /// Header plus one row. Wall time is left out so the file depends
    /// only on the inputs.
    pub fn to_tsv(&self) -> String {
        let sizes = format!(
            "{}\t{}\t{}\t{}",
            self.n_train, self.n_val, self.n_test, self.seed
        );
        match (self.regression, self.classification) {
            (Some(r), _) => format!(
                "task\trmse\tmae\tr2\tn_train\tn_val\tn_test\tseed\nregression\t{:.6}\t{:.6}\t{}\t{sizes}\n",
                r.rmse,
                r.mae,
                fmt_opt(r.r2)
            ),
            (None, Some(c)) => format!(
                "task\tauc\tf1\tn_train\tn_val\tn_test\tseed\nclassification\t{}\t{:.6}\t{sizes}\n",
                fmt_opt(c.auc),
                c.f1
            ),
            (None, None) => unreachable!("a report carries one kind of metrics"),
        }
    }
}

pub fn prepare_features(graph: &SpatialGraph, standardize: bool) -> Array2<f64> {
    if standardize {
        standardize_features(graph.features())
    } else {
        graph.features().clone()
    }
}

/// Scores `model` on `nodes`.
pub fn evaluate(
    model: &Model,
    ops: &GraphOperators,
    graph: &SpatialGraph,
    features: &Array2<f64>,
    nodes: &[usize],
) -> Result<(Option<RegressionMetrics>, Option<ClassificationMetrics>)> {
    if nodes.is_empty() {
        return Err(Error::NoLabeledNode);
    }
    let out = model.predict(ops, features)?;
    match graph.task() {
        TaskKind::Regression => {
            let pred: Vec<f64> = nodes.iter().map(|&v| out[[v, 0]]).collect();
            let target: Vec<f64> = nodes
                .iter()
                .map(|&v| graph.label(v).expect("labeled"))
                .collect();
            Ok((Some(regression_metrics(&pred, &target)?), None))
        }
        TaskKind::Classification { .. } => {
            let probs: Vec<Vec<f64>> = nodes.iter().map(|&v| out.row(v).to_vec()).collect();
            let labels: Vec<usize> = nodes
                .iter()
                .map(|&v| graph.class_of(v).expect("labeled"))
                .collect();
            Ok((None, Some(classification_metrics(&probs, &labels, 0.5)?)))
        }
    }
}

/// Result of one training run on one split.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: Model,
    pub report: TrainReport,
    pub split: NodeSplit,
    pub metrics: MetricsReport,
}

/// Splits, trains from a seeded initialization, and scores the test split.
pub fn train_and_evaluate(
    graph: &SpatialGraph,
    config: ModelConfig,
    train_cfg: &TrainConfig,
    split_ratios: (f64, f64, f64),
    standardize: bool,
    seed: u64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let split = split_random(graph, split_ratios, seed)?;
    let ops = GraphOperators::build(graph, &config)?;
    let features = prepare_features(graph, standardize);
    let mut model = Model::new(config, seed)?;
    let report = train(&mut model, &ops, graph, &features, &split, train_cfg)?;
    let (regression, classification) = evaluate(&model, &ops, graph, &features, &split.test)?;
    let metrics = MetricsReport {
        task: graph.task(),
        regression,
        classification,
        n_train: split.train.len(),
        n_val: split.val.len(),
        n_test: split.test.len(),
        seed,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        model,
        report,
        split,
        metrics,
    })
}

/// Adam step size of the ring-diversity experiment. At the default 0.001
/// the spatial model is still far from converged on the most diverse graph
/// after 500 epochs.
pub const FIG1D_LR: f64 = 0.01;

/// Settings of the ring-diversity experiment: both models on every
/// synthetic graph, several seeded runs each.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1dOptions {
    pub seed: u64,
    pub runs: usize,
    pub graphs: Vec<usize>,
    pub synth: SynthConfig,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Fig1dOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            runs: 5,
            graphs: (1..=SUITE_SIZE).collect(),
            synth: SynthConfig::new(1, seed),
            hidden: 32,
            train: TrainConfig {
                lr: FIG1D_LR,
                ..TrainConfig::default()
            },
        }
    }

    /// The spatial model sees only the distance view, with one ring per
    /// generator ring and a single head.
    pub fn model_config(&self, kind: ModelKind, input_dim: usize) -> ModelConfig {
        let mut cfg = ModelConfig::new(kind, input_dim, TaskKind::Regression);
        cfg.hidden = self.hidden;
        if kind == ModelKind::Shgnn {
            let rings = self.synth.n_rings;
            cfg.rings = rings;
            cfg.ring_heads = 1;
            cfg.sector_heads = 1;
            cfg.ring_boundaries = vec![(1..rings).map(|r| r as f64 * RING_WIDTH).collect()];
            cfg.ablation.no_sectors = true;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1dCell {
    pub graph_index: usize,
    pub model: ModelKind,
    pub lambda_ring: f64,
    pub test_rmse: Vec<f64>,
    pub diverged_runs: usize,
}

impl Fig1dCell {
    pub fn mean(&self) -> f64 {
        mean(&self.test_rmse)
    }

    pub fn std(&self) -> f64 {
        std_dev(&self.test_rmse)
    }
}

pub fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Shgnn => "shgnn",
        ModelKind::Gcn => "gcn",
    }
}

/// Runs every (graph, model) cell. Graph `i` is generated with seed
/// `seed + i`; run `r` splits and initializes with seed `seed + r`.
pub fn run_fig1d(
    opts: &Fig1dOptions,
    mut progress: impl FnMut(&Fig1dCell),
) -> Result<Vec<Fig1dCell>> {
    let mut cells = Vec::with_capacity(opts.graphs.len() * 2);
    for &i in &opts.graphs {
        let graph = generate(&SynthConfig {
            index: i,
            seed: opts.seed.wrapping_add(i as u64),
            ..opts.synth.clone()
        })?;
        let lambda_ring = spatial_diversity_scores(&graph, &MetricOptions::default())?.ring;
        for kind in [ModelKind::Gcn, ModelKind::Shgnn] {
            let mut cell = Fig1dCell {
                graph_index: i,
                model: kind,
                lambda_ring,
                test_rmse: Vec::with_capacity(opts.runs),
                diverged_runs: 0,
            };
            for r in 0..opts.runs {
                let config = opts.model_config(kind, graph.feature_dim());
                let out = train_and_evaluate(
                    &graph,
                    config,
                    &opts.train,
                    (0.6, 0.2, 0.2),
                    true,
                    opts.seed.wrapping_add(r as u64),
                )?;
                if out.report.diverged_at.is_some() {
                    cell.diverged_runs += 1;
                }
                cell.test_rmse
                    .push(out.metrics.regression.expect("regression task").rmse);
            }
            progress(&cell);
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Plot-ready CSV; `#` lines document the protocol.
pub fn format_fig1d_csv(opts: &Fig1dOptions, cells: &[Fig1dCell]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# seed={} runs={} split=0.6/0.2/0.2 nodes={} edges_per_node={} intercept={} hidden={}",
        opts.seed,
        opts.runs,
        opts.synth.n_nodes,
        opts.synth.k_edges,
        opts.synth.intercept,
        opts.hidden
    );
    let _ = writeln!(
        out,
        "# adam lr={} max_epochs={} patience={} (best validation loss); features z-scored; targets z-scored on train",
        opts.train.lr, opts.train.epochs, opts.train.patience
    );
    let _ = writeln!(out, "graph_index,model,mean,std,lambda_ring,diverged_runs");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{}",
            c.graph_index,
            model_name(c.model),
            c.mean(),
            c.std(),
            c.lambda_ring,
            c.diverged_runs
        );
    }
    out
}
