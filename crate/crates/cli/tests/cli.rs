use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use osbp::eval::{read_report, read_sweep_csv};

const SMALL: &str = "[data.synth]\nsource_per_class = 15\ntarget_per_class = 15\ntarget_per_unknown = 15\n\
[model]\nhidden = [16]\n[train]\noptimizer = \"adam\"\nlr = 1e-3\nepochs = 10\n\
[output]\nreport = \"out/report.json\"\ncheckpoint = \"out/model.json\"\n";

fn osbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osbp")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn train_writes_report_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = osbp(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let line = stdout(&out);
    for key in ["OS=", "OS*=", "ALL=", "UNK="] {
        assert!(line.contains(key), "{line}");
    }
    let report = read_report(dir.path().join("out/report.json")).unwrap();
    assert_eq!(report.n, 75);
    assert!(report.unk.is_some() && report.os_star.is_some());
    assert!(dir.path().join("out/model.json").exists());
}

#[test]
fn eval_after_train_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&osbp(&["train", "-c", cfg])), 0);
    let ckpt = dir.path().join("out/model.json");
    let feats = dir.path().join("feats.csv");
    let out = osbp(&[
        "eval",
        "-c",
        cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--set",
        "output.report=\"out/eval.json\"",
        "--dump-features",
        feats.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trained = fs::read(dir.path().join("out/report.json")).unwrap();
    let evaluated = fs::read(dir.path().join("out/eval.json")).unwrap();
    assert_eq!(trained, evaluated);

    let text = fs::read_to_string(feats).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 1 + 16);
    assert_eq!(lines.count(), 75);
}

#[test]
fn eval_errors_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let out = osbp(&["eval", "-c", cfg, "--checkpoint", "/nonexistent/model.json"]);
    assert_eq!(code(&out), 3);

    assert_eq!(code(&osbp(&["train", "-c", cfg])), 0);
    let ckpt = dir.path().join("out/model.json");
    let out = osbp(&[
        "eval",
        "-c",
        cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--set",
        "model.hidden=[8]",
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("generator layer 0"), "{}", stderr(&out));
    let out = osbp(&[
        "eval",
        "-c",
        cfg,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--set",
        "train.method=mmd",
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("classifier layer"), "{}", stderr(&out));
}

#[test]
fn mmd_without_weight_matches_source_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let run = |method: &str, extra: &str, report: &str| {
        let out = osbp(&[
            "train",
            "-c",
            cfg,
            "--set",
            &format!("train.method={method}"),
            "--set",
            extra,
            "--set",
            &format!("output.report={report}"),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(dir.path().join(report)).unwrap()
    };
    let reference = run("source_only", "train.seed=0", "so.json");
    assert_eq!(run("mmd", "train.mmd_weight=0.0", "mmd.json"), reference);
    assert_eq!(run("bp", "train.grl_weight=0.0", "bp.json"), reference);
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[train]\ngamma = 2\n");
    let out = osbp(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("gamma"));

    let out = osbp(&[
        "synth",
        "-o",
        dir.path().join("s").to_str().unwrap(),
        "--set",
        "data.synth.spread=-1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("spread"));

    let out = osbp(&["train", "-c", "/nonexistent/run.toml"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&osbp(&["frobnicate"])), 2);
}

#[test]
fn missing_data_files_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "[data]\nkind = \"csv\"\nsource = \"nope.csv\"\ntarget = \"nope.csv\"\n",
    );
    let out = osbp(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("nope.csv"));
}

#[test]
fn synth_is_deterministic_and_trainable_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = osbp(&["synth", "-o", out.to_str().unwrap(), "--set", "data.seed=5"]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        assert!(stdout(&res).contains("K=3"));
    }
    for file in ["source.csv", "target.csv", "scenario.toml"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let manifest = fs::read_to_string(a.join("scenario.toml")).unwrap();
    assert!(manifest.contains("known_classes = 3") && manifest.contains("seed = 5"));

    let cfg = config(
        dir.path(),
        "[data]\nkind = \"manifest\"\nmanifest = \"a/scenario.toml\"\n[model]\nhidden = [8]\n[train]\nepochs = 2\n",
    );
    let out = osbp(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let csv = dir.path().join("t.csv");
    let out = osbp(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "--param",
        "t",
        "--values",
        "0.3,0.5,0.7,0.9",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_sweep_csv(&csv).unwrap();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0.3, 0.5, 0.7, 0.9]);
    assert!(rows.iter().all(|r| r.1.iter().all(Option::is_some)));
}

#[test]
fn sweep_records_failed_rows_and_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let csv = dir.path().join("t.csv");
    let out = osbp(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "--param",
        "t",
        "--values",
        "0.5,1.5",
        "--serial",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("failed"));
    let rows = read_sweep_csv(&csv).unwrap();
    assert!(rows[0].1[0].is_some());
    assert!(rows[1].1.iter().all(Option::is_none));
}

#[test]
fn sweep_rejects_unknown_parameters() {
    let out = osbp(&["sweep", "--param", "gamma", "--values", "1,2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("gamma"));
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = osbp(&["gradcheck", "--instances", "3"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    for kind in ["affine", "leaky_relu", "batch_norm", "grad_reversal"] {
        for loss in ["cross_entropy", "adv_bce"] {
            assert_eq!(
                text.lines().filter(|l| l.starts_with(kind) && l.contains(loss)).count(),
                1,
                "{kind}/{loss}"
            );
        }
    }
    let out = osbp(&["gradcheck", "--instances", "2", "--corrupt-backward", "1.01"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
}
