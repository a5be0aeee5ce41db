//! End-to-end runs of the `memnet` command, checking files and exit codes.

use std::path::{Path, PathBuf};

use memnet::cli::run;

fn memnet(args: &[&str]) -> i32 {
    let mut argv = vec!["memnet"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    /// A small synthetic corpus on disk.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("synth.conf"), "notes = 300\nseed = 5\n").unwrap();
        assert_eq!(memnet(&["synth", "--spec", &s(&root.join("synth.conf")), "--out-dir", &s(&root.join("data"))]), 0);
        Workspace { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn train(&self, config: &str, out: &str) -> i32 {
        let conf = self.path(&format!("{}.conf", out.replace('/', "_")));
        std::fs::write(&conf, config).unwrap();
        memnet(&[
            "train",
            "--config",
            &s(&conf),
            "--notes",
            &s(&self.path("data/notes.jsonl")),
            "--kb",
            &s(&self.path("data/kb.jsonl")),
            "--out-dir",
            &s(&self.path(out)),
        ])
    }
}

const SMALL: &str = "model = c_memnn\nhops = 2\nembed_dim = 8\nvalue_dim = 4\nlabel_count = 10\nmax_epochs = 2\n";

#[test]
fn usage_errors_exit_one() {
    assert_eq!(memnet(&["--help"]), 0);
    assert_eq!(memnet(&[]), 1);
    assert_eq!(memnet(&["frobnicate"]), 1);
    assert_eq!(memnet(&["gradcheck", "--variant", "c_memnn", "--hops", "3"]), 1);
    assert_eq!(memnet(&["gradcheck", "--variant", "tree", "--hops", "3", "--addressing", "softmax"]), 1);
}

#[test]
fn synth_is_byte_for_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(memnet(&["synth", "--out-dir", &s(&dir.path().join(out))]), 0);
    }
    for file in ["notes.jsonl", "kb.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn data_and_config_errors_exit_two() {
    let ws = Workspace::new();
    std::fs::write(ws.path("bad.conf"), "notez = 10\n").unwrap();
    assert_eq!(memnet(&["synth", "--spec", &s(&ws.path("bad.conf")), "--out-dir", &s(&ws.path("x"))]), 2);
    assert_eq!(ws.train("hops = 0\n", "zero_hops"), 2);
    assert_eq!(
        memnet(&[
            "train",
            "--notes",
            &s(&ws.path("missing.jsonl")),
            "--kb",
            &s(&ws.path("data/kb.jsonl")),
            "--out-dir",
            &s(&ws.path("run")),
        ]),
        2
    );
    std::fs::write(ws.path("junk.ckpt"), b"not a checkpoint at all").unwrap();
    assert_eq!(
        memnet(&["eval", "--checkpoint", &s(&ws.path("junk.ckpt")), "--notes", &s(&ws.path("data/notes.jsonl"))]),
        2
    );
}

#[test]
fn diverging_training_exits_three() {
    let ws = Workspace::new();
    let config = format!("{SMALL}learning_rate = 1e300\n");
    assert_eq!(ws.train(&config, "diverged"), 3);
}

#[test]
fn gradcheck_passes_for_gated_c_memnn() {
    assert_eq!(memnet(&["gradcheck", "--variant", "c-memnn", "--hops", "4", "--addressing", "gated"]), 0);
}

#[test]
fn train_eval_predict_report() {
    let ws = Workspace::new();
    assert_eq!(ws.train(SMALL, "runs/c2"), 0);
    let run = ws.path("runs/c2");
    for file in ["best.ckpt", "last.ckpt", "history.csv", "batch_losses.csv", "run.json"] {
        assert!(run.join(file).is_file(), "{file}");
    }

    let ckpt = s(&run.join("best.ckpt"));
    let notes = s(&ws.path("data/notes.jsonl"));
    assert_eq!(memnet(&["eval", "--checkpoint", &ckpt, "--notes", &notes]), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("eval_test.json")).unwrap()).unwrap();
    for key in ["auc_macro", "precision_at_5", "hamming_loss"] {
        assert!(report[key].is_number(), "{key}: {report}");
    }
    let val_out = ws.path("val.json");
    assert_eq!(memnet(&["eval", "--checkpoint", &ckpt, "--notes", &notes, "--split", "val", "--out", &s(&val_out)]), 0);
    assert!(val_out.is_file());

    std::fs::write(ws.path("note.txt"), "patient reports fever and a persistent cough").unwrap();
    assert_eq!(memnet(&["predict", "--checkpoint", &ckpt, "--note-file", &s(&ws.path("note.txt"))]), 0);

    let csv_out = ws.path("report.csv");
    assert_eq!(memnet(&["report", "--history-dir", &s(&ws.path("runs")), "--out", &s(&csv_out)]), 0);
    let csv = std::fs::read_to_string(&csv_out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("model,hops,epoch,val_p_at_5"));
    assert_eq!(lines.count(), 2);
    assert!(csv.contains("c_memnn,2,1,"), "{csv}");

    assert_eq!(memnet(&["report", "--history-dir", &s(&ws.path("data"))]), 2);
}
