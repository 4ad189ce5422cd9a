use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use super::config::RunConfig;
use super::gradsuite::{gradient_suite, SuiteEntry};
use super::log::JsonLog;
use super::pipeline::{
    evaluate_model, node_features, ppi_checkpoint, ppi_from_checkpoint, pretrain_checkpoint,
    pretrained_from_checkpoint, run_downstream, run_pretrain, site_overlaps, Corpus,
};
use crate::dataio::{
    load_checkpoint, parse_annotations, parse_edges, parse_fasta, parse_hierarchy, parse_sites,
    save_checkpoint, synth_generate, write_corpus, Checkpoint, EdgeRecord, SynthSpec,
};
use crate::error::{Error, Result};
use crate::numcore::{worker_threads, Rng};
use crate::ppinet::build_graph;
use crate::splitbench::{evaluate, split_edges, MetricReport, SplitMethod, SplitSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "hippo", version, about = "Hierarchy-aware protein pretraining and PPI prediction")]
pub struct Cli {
    /// Append JSON-lines events here instead of stderr.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic hierarchical corpus.
    Synth(SynthArgs),
    /// Split an edge list into train, validation and test edges.
    Split(SplitArgs),
    /// Pretrain the sequence and annotation encoders.
    Pretrain(PretrainArgs),
    /// Train the GIN interaction model on pretrained features.
    Train(TrainArgs),
    /// Score a trained model (or a predictions file) on the test edges.
    Eval(EvalArgs),
    /// Overlap of attention-ranked residues with annotated sites.
    Sites(SitesArgs),
    /// Finite-difference check of every differentiable operation.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 300)]
    pub proteins: usize,
    #[arg(long, default_value_t = 20)]
    pub families: usize,
    #[arg(long, default_value_t = 5)]
    pub clans: usize,
    #[arg(long, default_value_t = 5)]
    pub types: usize,
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Random,
    Bfs,
    Dfs,
}

impl From<MethodArg> for SplitMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Random => SplitMethod::Random,
            MethodArg::Bfs => SplitMethod::Bfs,
            MethodArg::Dfs => SplitMethod::Dfs,
        }
    }
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    /// Share of all edges held out for validation.
    #[arg(long, default_value_t = 0.16)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seeds in the hard-fraction comparison against a random split.
    #[arg(long, default_value_t = 20)]
    pub sweep: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// Run configuration (JSON); defaults throughout when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[arg(long)]
    pub fasta: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Overrides `training.pretrain_steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides `training.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Pretraining checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub fasta: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Downstream model checkpoint written by `train`.
    #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// Scores per test pair: `protein_a protein_b p_<type>…`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SitesArgs {
    /// Pretraining checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub fasta: PathBuf,
    #[arg(long)]
    pub sites: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random fixtures per operation.
    #[arg(long, default_value_t = 8)]
    pub fixtures: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut log = match &cli.log {
        Some(p) => match File::options().create(true).append(true).open(p) {
            Ok(f) => JsonLog::new(Box::new(f)),
            Err(e) => {
                eprintln!("hippo: {}", Error::io(p, e));
                return EXIT_IO;
            }
        },
        None => JsonLog::stderr(),
    };
    match execute(cli.command, &mut log) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hippo: {e}");
            log.event("error", json!({ "message": e.to_string(), "exit": exit_code(&e) }));
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, log: &mut JsonLog) -> Result<i32> {
    match command {
        Command::Synth(a) => synth(a, log),
        Command::Split(a) => split(a, log),
        Command::Pretrain(a) => pretrain(a, log),
        Command::Train(a) => train(a, log),
        Command::Eval(a) => eval(a, log),
        Command::Sites(a) => sites(a, log),
        Command::Gradcheck(a) => gradcheck(a, log),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn load_config(args: &ConfigArgs) -> Result<Option<RunConfig>> {
    args.config.as_deref().map(RunConfig::load).transpose()
}

/// The config a checkpoint was written under, or `flags` when given, which
/// must then hash the same.
fn checkpoint_config(c: &Checkpoint, flags: Option<RunConfig>) -> Result<RunConfig> {
    let cfg = match flags {
        Some(cfg) => cfg,
        None => {
            let stored = c.meta.extra.get("config").cloned().ok_or_else(|| {
                Error::Validation("checkpoint carries no config; pass --config".into())
            })?;
            let cfg: RunConfig = serde_json::from_value(stored)?;
            cfg.validate()?;
            cfg
        }
    };
    let current = cfg.hash();
    if current != c.meta.config_hash {
        return Err(Error::ConfigMismatch {
            checkpoint: c.meta.config_hash.clone(),
            current,
        });
    }
    Ok(cfg)
}

fn stamp_config(c: &mut Checkpoint, cfg: &RunConfig) -> Result<()> {
    let mut stored = cfg.clone();
    stored.paths = Default::default();
    c.meta.extra["config"] = serde_json::to_value(&stored)?;
    Ok(())
}

fn protein_corpus(fasta: &Path, annotations: &Path, hierarchy: Option<&Path>) -> Result<Corpus> {
    Ok(Corpus {
        sequences: parse_fasta(fasta)?,
        edges: Vec::new(),
        types: Vec::new(),
        annotations: parse_annotations(annotations)?,
        tree: hierarchy.map(parse_hierarchy).transpose()?,
        sites: BTreeMap::new(),
    })
}

fn read_split(path: &Path, n_edges: usize) -> Result<SplitSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s: SplitSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    s.validate(n_edges)?;
    Ok(s)
}

fn synth(a: SynthArgs, log: &mut JsonLog) -> Result<i32> {
    let spec = SynthSpec {
        seed: a.seed,
        n_proteins: a.proteins,
        n_families: a.families,
        n_clans: a.clans,
        n_types: a.types,
        label_noise: a.label_noise,
        ..SynthSpec::default()
    };
    let corpus = synth_generate(&spec)?;
    write_corpus(&corpus, &a.out)?;
    log.event(
        "synth",
        json!({
            "out": a.out,
            "proteins": corpus.proteins.len(),
            "edges": corpus.edges.len(),
            "types": corpus.types.len(),
        }),
    );
    Ok(EXIT_OK)
}

fn mean_hard_fraction(method: SplitMethod, edges: &[EdgeRecord], a: &SplitArgs) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..a.sweep {
        let mut rng = Rng::new(a.seed.wrapping_add(s)).split("split");
        total += split_edges(method, edges, a.test_frac, a.val_frac, &mut rng)?.hard_fraction();
    }
    Ok(total / a.sweep.max(1) as f64)
}

fn split(a: SplitArgs, log: &mut JsonLog) -> Result<i32> {
    let (edges, _) = parse_edges(&a.edges, None)?;
    let method = SplitMethod::from(a.method);
    let mut rng = Rng::new(a.seed).split("split");
    let spec = split_edges(method, &edges, a.test_frac, a.val_frac, &mut rng)?;
    write_output(Some(&a.out), &to_json(&spec)?)?;
    let mut summary = json!({
        "method": method,
        "edges": edges.len(),
        "train": spec.train_edges.len(),
        "val": spec.val_edges.len(),
        "test": spec.test_edges.len(),
        "hard_fraction": spec.hard_fraction(),
    });
    if a.sweep > 0 {
        summary["sweep"] = json!({
            "seeds": a.sweep,
            "mean_hard_fraction": mean_hard_fraction(method, &edges, &a)?,
            "random_mean_hard_fraction": mean_hard_fraction(SplitMethod::Random, &edges, &a)?,
        });
    }
    log.event("split", summary);
    Ok(EXIT_OK)
}

fn pretrain(a: PretrainArgs, log: &mut JsonLog) -> Result<i32> {
    let mut cfg = load_config(&a.config)?.unwrap_or_default();
    if let Some(s) = a.steps {
        cfg.training.pretrain_steps = s;
    }
    if let Some(s) = a.seed {
        cfg.training.seed = s;
    }
    cfg.validate()?;
    let corpus = protein_corpus(&a.fasta, &a.annotations, a.hierarchy.as_deref())?;
    let result = run_pretrain(&cfg, &corpus, worker_threads())?;
    for s in &result.log {
        log.event(
            "pretrain_step",
            json!({
                "step": s.step,
                "epoch": s.epoch,
                "hc": s.hc,
                "sac": s.sac,
                "sam": s.sam,
                "total": s.total,
                "hc_activations": s.hc_activations,
                "hc_violations": s.hc_violations,
            }),
        );
    }
    let mut ckpt = pretrain_checkpoint(&cfg, &result);
    stamp_config(&mut ckpt, &cfg)?;
    save_checkpoint(&ckpt, &a.out)?;
    log.event(
        "pretrain_done",
        json!({ "out": a.out, "best_step": result.best_step, "config_hash": cfg.hash() }),
    );
    Ok(EXIT_OK)
}

fn train(a: TrainArgs, log: &mut JsonLog) -> Result<i32> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let cfg = checkpoint_config(&ckpt, load_config(&a.config)?)?;
    let (model, vocab) = pretrained_from_checkpoint(&cfg, &ckpt)?;
    let mut corpus = protein_corpus(&a.fasta, &a.annotations, None)?;
    let (edges, types) = parse_edges(&a.edges, None)?;
    corpus.edges = edges;
    corpus.types = types;
    let split = read_split(&a.split, corpus.edges.len())?;
    let features = node_features(&cfg, &model, &vocab, &corpus, worker_threads())?;
    let d = run_downstream(&cfg, &features, &corpus, &split)?;
    for e in &d.log.epochs {
        log.event(
            "ppi_epoch",
            json!({ "epoch": e.epoch, "loss": e.loss, "val_micro_f1": e.val_micro_f1 }),
        );
    }
    let mut out = ppi_checkpoint(&cfg, &d, &corpus.types);
    stamp_config(&mut out, &cfg)?;
    save_checkpoint(&out, &a.out)?;
    log.event(
        "train_done",
        json!({ "out": a.out, "best_epoch": d.log.best_epoch, "config_hash": cfg.hash() }),
    );
    Ok(EXIT_OK)
}

/// A metric report with the hash of the config that produced it.
#[derive(Serialize)]
struct Report {
    config_hash: Option<String>,
    #[serde(flatten)]
    metrics: MetricReport,
}

/// Reads a predictions table and orders its rows like `split.test_edges`.
fn read_predictions(
    path: &Path,
    edges: &[EdgeRecord],
    split: &SplitSpec,
    n_types: usize,
) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (k == 0 && line.starts_with("protein_a")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 + n_types {
            return Err(Error::parse(
                path,
                k + 1,
                format!("expected {} columns, found {}", 2 + n_types, cols.len()),
            ));
        }
        let scores = cols[2..]
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, k + 1, e.to_string()))?;
        let (x, y) = (cols[0].to_string(), cols[1].to_string());
        let key = if x <= y { (x, y) } else { (y, x) };
        rows.insert(key, scores);
    }
    split
        .test_edges
        .iter()
        .map(|&e| {
            let (a, b) = (&edges[e].a, &edges[e].b);
            let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            rows.get(&key)
                .cloned()
                .ok_or_else(|| Error::Validation(format!("no prediction for test pair {a} {b}")))
        })
        .collect()
}

fn eval(a: EvalArgs, log: &mut JsonLog) -> Result<i32> {
    let (edges, types) = parse_edges(&a.edges, None)?;
    let split = read_split(&a.split, edges.len())?;
    let flags = load_config(&a.config)?;
    let report = match (&a.model, &a.predictions) {
        (Some(path), _) => {
            let ckpt = load_checkpoint(path)?;
            let cfg = checkpoint_config(&ckpt, flags)?;
            let (model, rows, model_types) = ppi_from_checkpoint(&cfg, &ckpt)?;
            if model_types != types {
                return Err(Error::Validation(format!(
                    "model was trained on types {model_types:?}, edges file has {types:?}"
                )));
            }
            let graph = build_graph(&edges, &rows, &split.train_edges)?;
            Report {
                config_hash: Some(cfg.hash()),
                metrics: evaluate_model(&model, &graph, &split, &types, cfg.training.threshold)?,
            }
        }
        (None, Some(path)) => {
            let cfg = flags.unwrap_or_default();
            let probs = read_predictions(path, &edges, &split, types.len())?;
            let truth: Vec<Vec<bool>> =
                split.test_edges.iter().map(|&e| edges[e].labels.clone()).collect();
            let diff: Vec<_> = split.test_edges.iter().map(|e| split.difficulty[e]).collect();
            Report {
                config_hash: Some(cfg.hash()),
                metrics: evaluate(&probs, &truth, &diff, &types, cfg.training.threshold)?,
            }
        }
        (None, None) => unreachable!("clap requires --model or --predictions"),
    };
    write_output(a.out.as_deref(), &to_json(&report)?)?;
    log.event(
        "eval",
        json!({
            "micro_f1": report.metrics.micro_f1,
            "micro_f1_easy": report.metrics.micro_f1_easy,
            "micro_f1_hard": report.metrics.micro_f1_hard,
        }),
    );
    Ok(EXIT_OK)
}

fn sites(a: SitesArgs, log: &mut JsonLog) -> Result<i32> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let cfg = checkpoint_config(&ckpt, load_config(&a.config)?)?;
    let (model, _) = pretrained_from_checkpoint(&cfg, &ckpt)?;
    let corpus = Corpus {
        sequences: parse_fasta(&a.fasta)?,
        edges: Vec::new(),
        types: Vec::new(),
        annotations: Default::default(),
        tree: None,
        sites: parse_sites(&a.sites)?,
    };
    let rows = site_overlaps(&model, &corpus)?;
    let mut out = String::from("protein_id\tn_annotated\toverlap\n");
    for r in &rows {
        out.push_str(&format!("{}\t{}\t{:.6}\n", r.protein, r.n_annotated, r.overlap));
    }
    write_output(a.out.as_deref(), &out)?;
    let mean = rows.iter().map(|r| r.overlap).sum::<f64>() / rows.len().max(1) as f64;
    log.event("sites", json!({ "proteins": rows.len(), "mean_overlap": mean }));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GradcheckReport {
    seed: u64,
    fixtures_per_op: usize,
    passed: bool,
    entries: Vec<SuiteEntry>,
}

fn gradcheck(a: GradcheckArgs, log: &mut JsonLog) -> Result<i32> {
    if a.fixtures == 0 {
        return Err(Error::Validation("--fixtures must be at least 1".into()));
    }
    let entries = gradient_suite(a.seed, a.fixtures)?;
    let passed = entries.iter().all(|e| e.passed);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for e in &entries {
        let w = worst.entry(e.op.as_str()).or_insert(0.0);
        *w = w.max(e.max_rel_err);
    }
    log.event("gradcheck", json!({ "passed": passed, "max_rel_err": worst }));
    let report = GradcheckReport {
        seed: a.seed,
        fixtures_per_op: a.fixtures,
        passed,
        entries,
    };
    write_output(a.out.as_deref(), &to_json(&report)?)?;
    Ok(if passed { EXIT_OK } else { EXIT_VALIDATION })
}
