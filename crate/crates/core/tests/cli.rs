use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hippo::cli::{strip_meta, RunConfig};
use hippo::dataio::{load_checkpoint, parse_annotations, parse_edges};
use hippo::encoders::PretrainModel;
use hippo::numcore::Rng;
use hippo::splitbench::SplitSpec;
use serde_json::Value;
use tempfile::TempDir;

const SMALL_CONFIG: &str = r#"{
  "encoder": { "d_model": 16, "n_blocks": 1, "n_heads": 2 },
  "alignment": { "proj_dim": 16, "match_hidden": 16, "annotation_hidden": 16, "level_weights": [0.1, 0.01] },
  "gin": { "eps": 20.0, "hidden": 16, "n_blocks": 2 },
  "training": { "pretrain_steps": 6, "ppi_epochs": 4, "ppi_lr": 0.01 }
}"#;

fn hippo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hippo")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = hippo(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// A 60-protein corpus and the small config.
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        ok(&["synth", "--proteins", "60", "--families", "6", "--clans", "2", "--out", s(&corpus)]);
        std::fs::write(dir.path().join("small.json"), SMALL_CONFIG).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn corpus(&self, file: &str) -> PathBuf {
        self.dir.path().join("corpus").join(file)
    }

    fn split(&self, method: &str, out: &str) -> PathBuf {
        let p = self.path(out);
        ok(&["split", "--edges", s(&self.corpus("edges.tsv")), "--method", method, "--sweep", "2", "--out", s(&p)]);
        p
    }

    fn pretrain(&self, extra: &[&str]) -> PathBuf {
        let p = self.path("pre.ckpt");
        let mut args = vec![
            "pretrain",
            "--fasta",
            s(&self.corpus("proteins.fasta")),
            "--annotations",
            s(&self.corpus("annotations.tsv")),
            "--hierarchy",
            s(&self.corpus("hierarchy.tsv")),
            "--config",
            s(&self.path("small.json")),
            "--out",
            s(&p),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        args.extend(extra.iter().map(|a| a.to_string()));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        p
    }
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(hippo(&["synth"]).status.code(), Some(64));
    assert_eq!(hippo(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(hippo(&["split", "--edges", "x", "--method", "sideways", "--out", "y"]).status.code(), Some(64));
    assert_eq!(hippo(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_and_malformed_inputs_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = dir.path().join("split.json");
    assert_eq!(hippo(&["split", "--edges", s(&missing), "--method", "bfs", "--out", s(&out)]).status.code(), Some(2));
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "protein_a\tprotein_b\ttype\nA\tA\tbinding\n").unwrap();
    assert_eq!(hippo(&["split", "--edges", s(&bad), "--method", "bfs", "--out", s(&out)]).status.code(), Some(3));
}

#[test]
fn synth_is_byte_identical_and_reparses() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--seed", "5", "--proteins", "80", "--out", s(&a)]);
    ok(&["synth", "--seed", "5", "--proteins", "80", "--out", s(&b)]);
    for f in ["proteins.fasta", "edges.tsv", "annotations.tsv", "hierarchy.tsv", "sites.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (edges, types) = parse_edges(a.join("edges.tsv"), None).unwrap();
    assert!(!edges.is_empty());
    assert_eq!(types.len(), 5);
}

#[test]
fn split_of_ten_edges_and_repeatability() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("edges.tsv");
    let mut text = String::from("protein_a\tprotein_b\ttype\n");
    for i in 0..10 {
        text.push_str(&format!("P{i}\tP{}\tbinding\n", i + 1));
    }
    std::fs::write(&edges, text).unwrap();
    for method in ["random", "bfs", "dfs"] {
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        for out in [&a, &b] {
            ok(&["split", "--edges", s(&edges), "--method", method, "--val-frac", "0", "--seed", "7", "--out", s(out)]);
        }
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        let spec: SplitSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec.test_edges.len(), 2, "{method}");
        spec.validate(10).unwrap();
    }
}

#[test]
fn pretrain_steps_zero_writes_initial_checkpoint() {
    let w = Workspace::new();
    let log = w.path("log.jsonl");
    let ckpt = w.pretrain(&["--steps", "0", "--log", s(&log)]);
    let c = load_checkpoint(&ckpt).unwrap();
    assert_eq!(c.meta.epoch, 0);
    let cfg = RunConfig::load(&w.path("small.json")).unwrap();
    let vocab = parse_annotations(w.corpus("annotations.tsv")).unwrap().vocab;
    let root = Rng::new(cfg.training.seed).split("pretrain");
    let init = PretrainModel::init(cfg.model(), vocab.len(), &root.split("init")).unwrap();
    assert_eq!(c.params, init.params);
    let events = strip_meta(&std::fs::read_to_string(log).unwrap());
    assert!(events.iter().all(|e| e["event"] != "pretrain_step"));
    assert!(events.iter().any(|e| e["event"] == "pretrain_done"));
}

#[test]
fn full_command_chain() {
    let w = Workspace::new();
    let log = w.path("log.jsonl");
    let split = w.split("bfs", "split.json");
    let pre = w.pretrain(&["--log", s(&log)]);
    let text = std::fs::read_to_string(&log).unwrap();
    let steps: Vec<Value> = strip_meta(&text).into_iter().filter(|e| e["event"] == "pretrain_step").collect();
    assert_eq!(steps.len(), 6);
    for e in &steps {
        for field in ["hc", "sac", "sam", "total"] {
            assert!(e[field].is_f64(), "{field} missing in {e}");
        }
    }
    assert!(text.lines().all(|l| serde_json::from_str::<Value>(l).unwrap()["meta"]["unix_ms"].is_u64()));

    let fasta = w.corpus("proteins.fasta");
    let ann = w.corpus("annotations.tsv");
    let edges = w.corpus("edges.tsv");
    let model = w.path("ppi.ckpt");
    ok(&["train", "--checkpoint", s(&pre), "--split", s(&split), "--fasta", s(&fasta), "--annotations", s(&ann),
        "--edges", s(&edges), "--out", s(&model)]);

    let report = w.path("report.json");
    ok(&["eval", "--model", s(&model), "--split", s(&split), "--edges", s(&edges), "--out", s(&report)]);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let f1 = r["micro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert!(r["config_hash"].is_string());

    let stdout = ok(&["eval", "--model", s(&model), "--split", s(&split), "--edges", s(&edges)]).stdout;
    assert_eq!(stdout, std::fs::read(&report).unwrap());

    let sites = w.path("sites.tsv");
    ok(&["sites", "--checkpoint", s(&pre), "--fasta", s(&fasta), "--sites", s(&w.corpus("sites.tsv")), "--out", s(&sites)]);
    let table = std::fs::read_to_string(&sites).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("protein_id\tn_annotated\toverlap"));
    let mut rows = 0;
    for line in lines {
        let overlap: f64 = line.split('\t').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&overlap));
        rows += 1;
    }
    assert_eq!(rows, 60);

    // A different config than the checkpoint was written under.
    let other = w.path("other.json");
    std::fs::write(&other, SMALL_CONFIG.replace("\"ppi_lr\": 0.01", "\"ppi_lr\": 0.02")).unwrap();
    let out = hippo(&["eval", "--model", s(&model), "--split", s(&split), "--edges", s(&edges), "--config", s(&other)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn eval_of_perfect_predictions_scores_one() {
    let w = Workspace::new();
    let split_path = w.split("random", "split.json");
    let (edges, types) = parse_edges(w.corpus("edges.tsv"), None).unwrap();
    let split: SplitSpec = serde_json::from_str(&std::fs::read_to_string(&split_path).unwrap()).unwrap();
    let mut table = format!("protein_a\tprotein_b\t{}\n", types.iter().map(|t| format!("p_{t}")).collect::<Vec<_>>().join("\t"));
    for &e in &split.test_edges {
        let probs: Vec<&str> = edges[e].labels.iter().map(|&l| if l { "1.0" } else { "0.0" }).collect();
        table.push_str(&format!("{}\t{}\t{}\n", edges[e].b, edges[e].a, probs.join("\t")));
    }
    let preds = w.path("preds.tsv");
    std::fs::write(&preds, table).unwrap();
    let out = ok(&["eval", "--predictions", s(&preds), "--split", s(&split_path), "--edges", s(&w.corpus("edges.tsv"))]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["micro_f1"].as_f64(), Some(1.0));
}

#[test]
fn gradcheck_exits_zero() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("grad.json");
    ok(&["gradcheck", "--fixtures", "5", "--out", s(&out)]);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert_eq!(r["entries"].as_array().unwrap().len(), 35);
}
