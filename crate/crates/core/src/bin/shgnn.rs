//! Command-line front end: synthetic graphs, heterophily scores, training,
//! evaluation, gradient checks and the ring-diversity experiment.
//!
//! Machine-readable output goes to `--out` when given and to standard
//! output otherwise; a short human summary is printed alongside files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use shgnn::error::{Error, Result};
use shgnn::graph::{load_graph, save_graph, split_random};
use shgnn::harness::{
    evaluate, format_fig1d_csv, model_name, prepare_features, run_fig1d, Fig1dOptions,
    MetricsReport, RunConfig,
};
use shgnn::heterophily::{pairwise_discrepancy_matrix, spatial_diversity_scores, MetricOptions};
use shgnn::model::{
    load_checkpoint, loss_gradcheck, save_checkpoint, train, GraphOperators, Model, ModelConfig,
    ModelKind,
};
use shgnn::partition::View;
use shgnn::synth::{generate, random_graph, SynthConfig};

#[derive(Parser)]
#[command(
    name = "shgnn",
    version,
    about = "Spatial heterophily analysis and spatial-group GNN training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Sector,
    Ring,
}

#[derive(Subcommand)]
enum Command {
    /// Write one graph of the synthetic ring-diversity suite.
    SynthGen {
        #[arg(long)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        nodes: usize,
        /// Leave out the constant feature column.
        #[arg(long)]
        no_intercept: bool,
    },
    /// Spatial diversity scores of both views.
    Score {
        #[arg(long)]
        graph: PathBuf,
        /// Run configuration supplying transport options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean pairwise discrepancy between the groups of one view.
    Tendency {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "ring")]
        view: ViewArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model and write its parameters.
    Train {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path; defaults to the configuration's `params`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on the test split of its configuration.
    Eval {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Report path; defaults to the configuration's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the model gradient on a random graph.
    Gradcheck {
        #[arg(long, default_value_t = 30)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// GCN against the ring-view model over the synthetic suite.
    Fig1d {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Comma-separated graph indices; all ten by default.
        #[arg(long, value_delimiter = ',')]
        graphs: Vec<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Nodes per synthetic graph.
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Writes `text` to `out`, or prints it when no path is given. Returns
/// whether a file was written.
fn emit(text: &str, out: Option<&Path>) -> Result<bool> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(true)
        }
        None => {
            print!("{text}");
            Ok(false)
        }
    }
}

fn metric_options(config: Option<&Path>) -> Result<MetricOptions> {
    Ok(match config {
        Some(path) => RunConfig::load(path)?.metric,
        None => MetricOptions::default(),
    })
}

fn resolve(flag: Option<PathBuf>, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.cloned()).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no {what} path given on the command line or in the configuration"
        ))
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SynthGen {
            index,
            seed,
            out,
            nodes,
            no_intercept,
        } => {
            let cfg = SynthConfig {
                n_nodes: nodes,
                intercept: !no_intercept,
                ..SynthConfig::new(index, seed)
            };
            let graph = generate(&cfg)?;
            save_graph(&graph, &out)?;
            println!(
                "graph {index}: {} nodes, {} edges, {} features -> {}",
                graph.num_nodes(),
                graph.num_edges(),
                graph.feature_dim(),
                out.display()
            );
        }
        Command::Score { graph, config, out } => {
            let g = load_graph(&graph)?;
            let s = spatial_diversity_scores(&g, &metric_options(config.as_deref())?)?;
            let tsv = format!(
                "lambda_sector\tlambda_ring\n{:.6}\t{:.6}\n",
                s.sector, s.ring
            );
            if emit(&tsv, out.as_deref())? {
                println!(
                    "direction {:.4}, distance {:.4} over {} labeled nodes",
                    s.sector, s.ring, s.labeled_nodes
                );
            }
        }
        Command::Tendency {
            graph,
            view,
            config,
            out,
        } => {
            let g = load_graph(&graph)?;
            let view = match view {
                ViewArg::Sector => View::Direction,
                ViewArg::Ring => View::Distance,
            };
            let m = pairwise_discrepancy_matrix(&g, view, &metric_options(config.as_deref())?)?;
            let mut tsv = String::from("group");
            for q in 0..m.cells {
                let _ = write!(tsv, "\t{q}");
            }
            tsv.push('\n');
            for p in 0..m.cells {
                let _ = write!(tsv, "{p}");
                for q in 0..m.cells {
                    match m.get(p, q) {
                        Some(v) => {
                            let _ = write!(tsv, "\t{v:.6}");
                        }
                        None => tsv.push_str("\tNA"),
                    }
                }
                tsv.push('\n');
            }
            if emit(&tsv, out.as_deref())? {
                println!("{}x{} discrepancy matrix written", m.cells, m.cells);
            }
        }
        Command::Train { graph, config, out } => {
            let cfg = RunConfig::load(&config)?;
            let g = load_graph(resolve(graph, cfg.graph.as_ref(), "graph")?)?;
            let out = resolve(out, cfg.params.as_ref(), "checkpoint")?;
            let model_cfg = cfg.model_config(&g);
            let split = split_random(&g, cfg.split, cfg.seed)?;
            let ops = GraphOperators::build(&g, &model_cfg)?;
            let features = prepare_features(&g, cfg.standardize);
            let mut model = Model::new(model_cfg, cfg.seed)?;
            let start = Instant::now();
            let report = train(&mut model, &ops, &g, &features, &split, &cfg.train)?;
            if let Some(epoch) = report.diverged_at {
                return Err(Error::Diverged { epoch });
            }
            save_checkpoint(&model, &out)?;
            println!(
                "{}: best validation loss {:.6} at epoch {} of {}{} in {:.1}s -> {}",
                model_name(cfg.kind),
                report.best_val_loss,
                report.best_epoch,
                report.history.len(),
                if report.stopped_early {
                    " (early stop)"
                } else {
                    ""
                },
                start.elapsed().as_secs_f64(),
                out.display()
            );
        }
        Command::Eval {
            graph,
            config,
            params,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let g = load_graph(resolve(graph, cfg.graph.as_ref(), "graph")?)?;
            let params = resolve(params, cfg.params.as_ref(), "checkpoint")?;
            let out = out.or_else(|| cfg.output.clone());
            let start = Instant::now();
            let model_cfg = cfg.model_config(&g);
            let split = split_random(&g, cfg.split, cfg.seed)?;
            let ops = GraphOperators::build(&g, &model_cfg)?;
            let features = prepare_features(&g, cfg.standardize);
            let mut model = Model::new(model_cfg, cfg.seed)?;
            load_checkpoint(&mut model, &params)?;
            let (regression, classification) = evaluate(&model, &ops, &g, &features, &split.test)?;
            let report = MetricsReport {
                task: g.task(),
                regression,
                classification,
                n_train: split.train.len(),
                n_val: split.val.len(),
                n_test: split.test.len(),
                seed: cfg.seed,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            if emit(&report.to_tsv(), out.as_deref())? {
                match (regression, classification) {
                    (Some(r), _) => println!("test rmse {:.4}, mae {:.4}", r.rmse, r.mae),
                    (_, Some(c)) => println!("test auc {:?}, f1 {:.4}", c.auc, c.f1),
                    _ => {}
                }
                println!("evaluated in {:.2}s", report.wall_seconds);
            }
        }
        Command::Gradcheck {
            nodes,
            seed,
            hidden,
            tol,
            out,
        } => {
            let g = random_graph(nodes, 3, 0.25, seed)?;
            let mut model_cfg = ModelConfig::new(ModelKind::Shgnn, g.feature_dim(), g.task());
            model_cfg.hidden = hidden;
            let model = Model::new(model_cfg.clone(), seed)?;
            let ops = GraphOperators::build(&g, &model_cfg)?;
            let report = loss_gradcheck(&model, &ops, &g, g.features(), &g.labeled_nodes())?;
            let mut tsv = String::from("param\tentries\tmax_abs_err\tmax_rel_err\n");
            for p in &report.params {
                let _ = writeln!(
                    tsv,
                    "{}\t{}\t{:.3e}\t{:.3e}",
                    p.name, p.entries, p.max_abs_err, p.max_rel_err
                );
            }
            emit(&tsv, out.as_deref())?;
            let worst = report.max_rel_err();
            let ok = report.passes(tol);
            eprintln!(
                "max relative error {worst:.3e} ({} at tolerance {tol:e})",
                if ok { "pass" } else { "FAIL" }
            );
            return Ok(ok);
        }
        Command::Fig1d {
            seed,
            runs,
            graphs,
            hidden,
            epochs,
            lr,
            nodes,
            out,
        } => {
            let mut opts = Fig1dOptions::new(seed);
            opts.runs = runs;
            if !graphs.is_empty() {
                opts.graphs = graphs;
            }
            if let Some(h) = hidden {
                opts.hidden = h;
            }
            if let Some(e) = epochs {
                opts.train.epochs = e;
            }
            if let Some(lr) = lr {
                opts.train.lr = lr;
            }
            if let Some(n) = nodes {
                opts.synth.n_nodes = n;
            }
            let start = Instant::now();
            let cells = run_fig1d(&opts, |c| {
                eprintln!(
                    "G{:<2} {:<5} rmse {:.4} +- {:.4} (lambda_ring {:.3}) [{:.0}s]",
                    c.graph_index,
                    model_name(c.model),
                    c.mean(),
                    c.std(),
                    c.lambda_ring,
                    start.elapsed().as_secs_f64()
                );
            })?;
            emit(&format_fig1d_csv(&opts, &cells), out.as_deref())?;
            eprintln!(
                "{} cells in {:.0}s",
                cells.len(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
