use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use kgmend::config::{hex, PipelineConfig};
use kgmend::eval::evaluate_recovery;
use kgmend::gnn::{load_checkpoint_for, save_checkpoint, train, MissingnessModel, ModelConfig};
use kgmend::graph::{load_graph, save_graph, GraphIndex};
use kgmend::pipeline::{augment, AugmentSettings};
use kgmend::select::SelectionStrategy;
use kgmend::synth::{generate_seeded, PlantedTruth};
use kgmend::ErrorKind;

#[derive(Parser)]
#[command(name = "kgmend", version, about = "Find and fill gaps in a chunk-derived knowledge graph")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Append per-stage JSON records to this file.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph, compute missing features and write it back normalized.
    Ingest {
        #[arg(long)]
        graph: PathBuf,
        /// Defaults to rewriting the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the missingness scorer on a graph.
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Per-epoch loss records (JSON lines).
        #[arg(long)]
        loss_out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score, select and complete views, then write the augmented graph.
    Augment(AugmentArgs),
    /// Compare a graph against planted truth.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic fixture: graph.jsonl, truth.jsonl and mock.txt.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print graph statistics.
    Stats {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<SelectionStrategy>,
    /// Use the mock backend with this table.
    #[arg(long)]
    mock_table: Option<PathBuf>,
    /// Where to write the run manifest; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<SelectionStrategy, String> {
    match s {
        "gnn" => Ok(SelectionStrategy::Gnn),
        "random" => Ok(SelectionStrategy::Random),
        other => Err(format!("unknown strategy {other:?}, expected gnn or random")),
    }
}

struct StageLog {
    file: Option<File>,
    start: Instant,
}

impl StageLog {
    fn open(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .with_context(|| format!("opening log {}", p.display()))?,
            ),
            None => None,
        };
        Ok(StageLog {
            file,
            start: Instant::now(),
        })
    }

    fn record(&mut self, stage: &str, fields: Value) -> Result<()> {
        let mut rec = json!({
            "stage": stage,
            "elapsed_ms": self.start.elapsed().as_millis() as u64,
        });
        if let (Value::Object(rec), Value::Object(extra)) = (&mut rec, fields) {
            rec.extend(extra);
        }
        log::info!("{rec}");
        if let Some(f) = &mut self.file {
            writeln!(f, "{rec}")?;
        }
        Ok(())
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_all_seeds(seed);
    }
    Ok(cfg)
}

fn print_stats(g: &GraphIndex, as_json: bool) -> Result<()> {
    let s = g.stats();
    if as_json {
        println!("{}", serde_json::to_string(&s)?);
    } else {
        println!("chunks        {}", s.chunks);
        println!("nodes         {}", s.nodes);
        println!("entity nodes  {}", s.entity_nodes);
        println!("edges         {}", s.edges);
        println!("triples       {}", s.triples);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let log_path = cli.log.clone().or_else(|| cfg.paths.log.clone());
    let mut stages = StageLog::open(log_path.as_deref())?;

    match cli.command {
        Command::Ingest { graph, out } => {
            let mut g = load_graph(&graph)?;
            stages.record("load", json!({"nodes": g.node_count(), "edges": g.edge_count()}))?;
            let provider = cfg.embedding.build()?;
            let filled = g.fill_missing_features(provider.as_ref())?;
            g.check_invariants()?;
            stages.record("features", json!({"computed": filled}))?;
            let out = out.unwrap_or(graph);
            save_graph(&g, &out)?;
            stages.record("write", json!({"path": out}))?;
            print_stats(&g, false)?;
        }
        Command::Train {
            graph,
            checkpoint,
            loss_out,
            epochs,
        } => {
            let g = load_graph(&graph)?;
            let dim = g
                .dim()
                .ok_or_else(|| anyhow!("{} has no node features; run ingest first", graph.display()))?;
            let model_cfg = ModelConfig {
                input_dim: dim,
                ..cfg.model.clone()
            };
            let mut model = MissingnessModel::from_seed(model_cfg)?;
            let mut train_cfg = cfg.training.clone();
            if let Some(e) = epochs {
                train_cfg.epochs = e;
            }
            stages.record("init", json!({"parameters": model.parameter_count()}))?;
            let report = train(&mut model, &g, &cfg.sampler, &cfg.corruption, &train_cfg)?;
            stages.record("train", json!({"epochs": report.loss_curve.len()}))?;
            save_checkpoint(&model, &checkpoint)?;
            if let Some(path) = loss_out {
                let mut text = String::new();
                for (epoch, (loss, views)) in report.loss_curve.iter().zip(&report.views_per_epoch).enumerate() {
                    text.push_str(&json!({"epoch": epoch, "mean_loss": loss, "views": views}).to_string());
                    text.push('\n');
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            if let (Some(first), Some(last)) = (report.loss_curve.first(), report.loss_curve.last()) {
                println!("mean loss {first:.4} -> {last:.4} over {} epochs", report.loss_curve.len());
            }
        }
        Command::Augment(args) => {
            let mut cfg = cfg;
            if let Some(b) = args.budget {
                cfg.selection.budget = b;
            }
            if let Some(t) = args.threshold {
                cfg.selection.threshold = t;
            }
            if let Some(s) = args.strategy {
                cfg.selection.strategy = s;
            }
            if let Some(t) = &args.mock_table {
                cfg.backend.kind = kgmend::config::ProviderKind::Mock;
                cfg.backend.mock_table = Some(t.clone());
            }
            cfg.validate()?;

            let mut g = load_graph(&args.graph)?;
            let dim = g.dim().ok_or_else(|| anyhow!("graph has no node features; run ingest first"))?;
            let model = load_checkpoint_for(&args.checkpoint, dim)?;
            let backend = cfg.backend.build()?;
            let provider = cfg.embedding.build()?;
            stages.record("load", json!({"nodes": g.node_count()}))?;

            let settings = AugmentSettings {
                sampler: &cfg.sampler,
                selection: &cfg.selection,
                completion: &cfg.completion,
                seed: cfg.seed,
            };
            let report = augment(&mut g, &model, &settings, backend.as_ref(), provider.as_ref())?;
            stages.record("sample", json!({"ms": report.timings.sample_ms as u64}))?;
            stages.record("score", json!({"ms": report.timings.score_ms as u64}))?;
            stages.record(
                "select",
                json!({"ms": report.timings.select_ms as u64, "report": report.selection}),
            )?;
            stages.record(
                "complete",
                json!({"ms": report.timings.complete_ms as u64, "report": report.merge}),
            )?;
            g.check_invariants()?;
            save_graph(&g, &args.out)?;
            stages.record("write", json!({"path": args.out}))?;

            let mut inputs = vec![
                json!({"path": args.graph, "sha256": file_digest(&args.graph)?}),
                json!({"path": args.checkpoint, "sha256": file_digest(&args.checkpoint)?}),
            ];
            if let Some(t) = &cfg.backend.mock_table {
                inputs.push(json!({"path": t, "sha256": file_digest(t)?}));
            }
            let manifest = json!({
                "command": "augment",
                "version": env!("CARGO_PKG_VERSION"),
                "seed": cfg.seed,
                "config_digest": cfg.digest(),
                "config": cfg,
                "inputs": inputs,
                "output": {"path": args.out, "sha256": file_digest(&args.out)?},
                "selection": report.selection,
                "merge": report.merge,
                "stats_before": report.before,
                "stats_after": report.after,
                "timings_ms": report.timings,
                "finished_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            });
            let manifest_path = args
                .manifest
                .or_else(|| cfg.paths.manifest.clone())
                .unwrap_or_else(|| {
                    let mut p = args.out.clone().into_os_string();
                    p.push(".manifest.json");
                    p.into()
                });
            write_json(&manifest_path, &manifest)?;
            println!("{}", serde_json::to_string(&report.merge)?);
        }
        Command::Eval { graph, truth, json } => {
            let g = load_graph(&graph)?;
            let truth = PlantedTruth::load(&truth)?;
            let m = evaluate_recovery(&g, &truth);
            if json {
                println!("{}", serde_json::to_string(&m)?);
            } else {
                println!("planted            {}", m.planted);
                println!("hidden             {}", m.hidden);
                println!("hidden recovered   {}", m.recovered);
                println!("hidden recall      {:.4}", m.hidden_recall);
                println!("recall             {:.4}", m.recall);
                println!("completion edges   {}", m.completion_edges);
                println!("precision          {:.4}", m.precision);
            }
        }
        Command::Synth { out_dir } => {
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let fx = generate_seeded(&cfg.synth)?;
            save_graph(&fx.graph, out_dir.join("graph.jsonl"))?;
            fx.truth.save(out_dir.join("truth.jsonl"))?;
            fx.truth.save_mock_table(out_dir.join("mock.txt"))?;
            stages.record("synth", json!({"stats": fx.graph.stats()}))?;
            print_stats(&fx.graph, false)?;
        }
        Command::Stats { graph, json } => {
            let g = load_graph(&graph)?;
            print_stats(&g, json)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<kgmend::Error>().map(kgmend::Error::kind) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Integrity) => 3,
        Some(ErrorKind::Io) => 4,
        _ if err.downcast_ref::<std::io::Error>().is_some() => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
