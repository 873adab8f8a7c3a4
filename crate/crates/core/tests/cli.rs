use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gdco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdco")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gdco(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generate, label, and train a tiny model; returns (dir, data, model).
fn pipeline(task: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.txt");
    let data = dir.path().join("data.txt");
    let model = dir.path().join("model.ckpt");
    let n = if task == "tsp" { "8" } else { "10" };
    ok(&["generate", "--task", task, "--count", "12", "--n", n, "--seed", "5", "--out", s(&raw)]);
    ok(&["label", "--in", s(&raw), "--out", s(&data), "--seed", "5"]);
    let cfg = dir.path().join("train.cfg");
    std::fs::write(
        &cfg,
        format!("task = {task}\nlayers = 2\nhidden = 8\ndiffusion_steps = 40\nepochs = 1\nbatch_size = 4\nlearning_rate = 1e-3\n"),
    )
    .unwrap();
    ok(&["train", "--config", s(&cfg), "--in", s(&data), "--out", s(&model), "--seed", "3"]);
    (dir, data, model)
}

#[test]
fn eval_without_model_is_a_usage_error() {
    let out = gdco(&["eval", "--in", "x.txt", "--out", "r.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = gdco(&["solve", "--model", "m", "--in", "i", "--out", "o", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(gdco(&[]).status.code(), Some(2));
}

#[test]
fn help_documents_every_flag() {
    let top = String::from_utf8(ok(&["--help"]).stdout).unwrap();
    for sub in ["generate", "label", "train", "solve", "eval", "sweep", "export-heatmap"] {
        assert!(top.contains(sub), "{sub}");
    }
    let eval = String::from_utf8(ok(&["eval", "--help"]).stdout).unwrap();
    for flag in
        ["--task", "--branch", "--steps", "--samples", "--schedule", "--two-opt", "--seed", "--model", "--in", "--out"]
    {
        assert!(eval.contains(flag), "{flag}");
    }
    let train = String::from_utf8(ok(&["train", "--help"]).stdout).unwrap();
    assert!(train.contains("--config"));
}

#[test]
fn runtime_errors_exit_nonzero_with_one_line() {
    let out = gdco(&["label", "--in", "/nonexistent/file.txt", "--out", "/tmp/never.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error:"));
}

#[test]
fn tsp_commands_are_deterministic() {
    let (dir, data, model) = pipeline("tsp");
    let d = dir.path();
    let run_solve = |tag: &str| {
        let (sol, rep) = (d.join(format!("sol{tag}.txt")), d.join(format!("rep{tag}.csv")));
        ok(&[
            "solve",
            "--model",
            s(&model),
            "--in",
            s(&data),
            "--out",
            s(&sol),
            "--report",
            s(&rep),
            "--steps",
            "5",
            "--samples",
            "3",
            "--two-opt",
            "--seed",
            "9",
        ]);
        (std::fs::read(sol).unwrap(), std::fs::read(rep).unwrap())
    };
    let (a, b) = (run_solve("a"), run_solve("b"));
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert_eq!(text.lines().count(), 12);
    for line in text.lines() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 2 + 8);
        fields[1].parse::<f64>().unwrap();
    }

    let run_eval = |tag: &str| {
        let (rep, plot) = (d.join(format!("eval{tag}.csv")), d.join(format!("plot{tag}.csv")));
        let out = ok(&[
            "eval",
            "--model",
            s(&model),
            "--in",
            s(&data),
            "--out",
            s(&rep),
            "--plot",
            s(&plot),
            "--steps",
            "4",
            "--seeds",
            "2",
            "--seed",
            "1",
            "--schedule",
            "cosine",
        ]);
        (std::fs::read(rep).unwrap(), std::fs::read(plot).unwrap(), out.stdout)
    };
    let (a, b) = (run_eval("a"), run_eval("b"));
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a.0).unwrap().lines().count(), 1 + 24);

    let run_export = |tag: &str| {
        let out = d.join(format!("heat{tag}.txt"));
        ok(&[
            "export-heatmap",
            "--model",
            s(&model),
            "--in",
            s(&data),
            "--out",
            s(&out),
            "--steps",
            "3",
            "--seed",
            "2",
        ]);
        std::fs::read_to_string(out).unwrap()
    };
    let heat = run_export("a");
    assert_eq!(heat, run_export("b"));
    // dense TSP-8: 56 directed edges, three fields each
    assert!(heat.lines().all(|l| l.split(' ').count() == 1 + 3 * 56));
}

#[test]
fn sweep_writes_the_full_grid() {
    let (dir, data, model) = pipeline("mis");
    let out = dir.path().join("sweep.csv");
    ok(&[
        "sweep",
        "--model",
        s(&model),
        "--in",
        s(&data),
        "--out",
        s(&out),
        "--steps",
        "1,2,5,10",
        "--samples",
        "1,4,16",
    ]);
    let first = std::fs::read(&out).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    assert_eq!(lines[0], "x,series,value");
    ok(&[
        "sweep",
        "--model",
        s(&model),
        "--in",
        s(&data),
        "--out",
        s(&out),
        "--steps",
        "1,2,5,10",
        "--samples",
        "1,4,16",
    ]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn checkpoint_and_data_must_agree() {
    let (dir, _data, model) = pipeline("mis");
    let tsp = dir.path().join("tsp.txt");
    ok(&["generate", "--task", "tsp", "--count", "2", "--n", "6", "--out", s(&tsp)]);
    let out = gdco(&["solve", "--model", s(&model), "--in", s(&tsp), "--out", s(&dir.path().join("o.txt"))]);
    assert_eq!(out.status.code(), Some(1));
    let (_, data, _) = pipeline("mis");
    let out = gdco(&["solve", "--model", s(&model), "--in", s(&data), "--out", "/tmp/o.txt", "--branch", "continuous"]);
    assert_eq!(out.status.code(), Some(1));
}
