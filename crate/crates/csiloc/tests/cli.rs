//! End-to-end checks of the command-line pipeline: stage composition,
//! determinism, overwrite protection, and exit-code classes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_csiloc")
}

fn run(dir: &Path, extra_env: &[(&str, &str)], args: &[&str]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.arg("--dir").arg(dir);
    for (k, v) in extra_env {
        cmd.env(k, v);
    }
    cmd.args(args);
    cmd.output().expect("spawning csiloc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, &[], args);
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// A 5x4 m site on the phone profile: 20 reference points, small budgets,
/// quick enough for a test while exercising every stage.
fn tiny_args(rest: &[&str]) -> Vec<String> {
    let sets = [
        "profile=phone",
        "area_w=5",
        "area_h=4",
        "ap_x=1.2",
        "ap_y=0.9",
        "grid=1.0",
        "margin=0.5",
        "train_per_rp=4",
        "val_per_rp=1",
        "test_points=6",
        "images_per_test_point=1",
        "window=3",
        "cnn_epochs=2",
        "batch=8",
        "memory=3",
        "sigma=1.5",
        "train_traj=40",
        "val_traj=10",
        "lstm_epochs=2",
        "seed=11",
    ];
    let mut args = Vec::new();
    for s in sets {
        args.push("--set".to_string());
        args.push(s.to_string());
    }
    args.extend(rest.iter().map(|s| s.to_string()));
    args
}

fn tiny(dir: &Path, rest: &[&str]) -> String {
    let args = tiny_args(rest);
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    ok(dir, &refs)
}

#[test]
fn the_whole_pipeline_composes_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    tiny(dir, &["synth"]);
    tiny(dir, &["preprocess"]);
    tiny(dir, &["train-cnn"]);
    tiny(dir, &["extract-features"]);
    tiny(dir, &["gen-traj"]);
    tiny(dir, &["train-lstm"]);
    let eval_out = tiny(dir, &["evaluate"]);
    assert!(eval_out.contains("cnn-lstm"), "{eval_out}");
    assert!(eval_out.contains("mean="), "{eval_out}");
    tiny(dir, &["evaluate", "--cnn-only"]);
    tiny(dir, &["ambiguity"]);

    for name in [
        "train_raw.csid",
        "val_raw.csid",
        "test_raw.csid",
        "context.txt",
        "train.csid",
        "val.csid",
        "test.csid",
        "quantifier.nnck",
        "cnn_curve.csv",
        "features.feat",
        "train.traj",
        "val.traj",
        "tracker.nnck",
        "lstm_curve.csv",
        "errors_cnn_lstm.csv",
        "cdf_cnn_lstm.csv",
        "errors_cnn_only.csv",
        "cdf_cnn_only.csv",
        "ambiguity.csv",
    ] {
        assert!(dir.join(name).exists(), "missing artifact {name}");
    }

    // every test point appears in the error files
    let errors = std::fs::read_to_string(dir.join("errors_cnn_lstm.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 6, "{errors}");

    let lstm = dir.join("errors_cnn_lstm.csv");
    let only = dir.join("errors_cnn_only.csv");
    let summary = tiny(
        dir,
        &[
            "report",
            &format!("tracked={}", lstm.display()),
            &format!("single={}", only.display()),
        ],
    );
    assert!(summary.contains("tracked"), "{summary}");
    let table = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(table.starts_with("label,count,mean_m,std_m,p80_m,max_m"));
    assert_eq!(table.lines().count(), 1 + 3, "{table}"); // two rows + pooled

    // one manifest line per completed stage
    let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 10, "{manifest}");
    assert!(manifest.lines().all(|l| l.contains("seed=11")));
}

#[test]
fn repeated_synthesis_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = [
        "--set",
        "area_w=5",
        "--set",
        "area_h=4",
        "--set",
        "ap_x=1.2",
        "--set",
        "ap_y=0.9",
        "--set",
        "train_per_rp=3",
        "--set",
        "val_per_rp=1",
        "--set",
        "test_points=4",
        "synth",
        "--profile",
        "nic",
        "--grid",
        "1.0",
        "--seed",
        "7",
    ];
    ok(&a, &args);
    ok(&b, &args);
    for name in ["train_raw.csid", "val_raw.csid", "test_raw.csid"] {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
}

#[test]
fn stage_reruns_reproduce_their_outputs_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    tiny(dir, &["synth"]);
    tiny(dir, &["preprocess"]);
    let context = std::fs::read(dir.join("context.txt")).unwrap();
    let train = std::fs::read(dir.join("train.csid")).unwrap();
    tiny(dir, &["--force", "preprocess"]);
    assert_eq!(context, std::fs::read(dir.join("context.txt")).unwrap());
    assert_eq!(train, std::fs::read(dir.join("train.csid")).unwrap());

    tiny(dir, &["train-cnn"]);
    tiny(dir, &["extract-features"]);
    tiny(dir, &["gen-traj"]);
    let walks = std::fs::read(dir.join("train.traj")).unwrap();
    tiny(dir, &["--force", "gen-traj"]);
    assert_eq!(walks, std::fs::read(dir.join("train.traj")).unwrap());
}

#[test]
fn existing_artifacts_are_not_silently_overwritten() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    tiny(dir, &["synth"]);
    let args = tiny_args(&["synth"]);
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let out = run(dir, &[], &refs);
    assert_eq!(code(&out), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--force"), "{stderr}");
    assert!(stderr.contains("train_raw.csid"), "{stderr}");
    tiny(dir, &["--force", "synth"]);
}

#[test]
fn exit_codes_separate_config_data_and_numeric_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // unknown key and bad profile are configuration errors
    let out = run(dir, &[], &["--set", "not_a_key=1", "synth"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(dir, &[], &["--profile", "tablet", "synth"]);
    assert_eq!(code(&out), 2);
    // so is an unusable thread count
    let out = run(dir, &[("CSILOC_THREADS", "many")], &["synth"]);
    assert_eq!(code(&out), 2);
    let out = run(dir, &[("CSILOC_THREADS", "0")], &["synth"]);
    assert_eq!(code(&out), 2);

    // a site the access point falls outside of is configuration too
    let out = run(dir, &[], &["--set", "area_w=2", "--set", "area_h=2", "synth"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    // missing and corrupt inputs are data errors naming the path
    let out = run(dir, &[], &["preprocess"]);
    assert_eq!(code(&out), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("train_raw.csid"), "{stderr}");
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("train_raw.csid"), b"JUNKJUNKJUNK").unwrap();
    let out = run(dir, &[], &["preprocess"]);
    assert_eq!(code(&out), 3);
    std::fs::remove_file(dir.join("train_raw.csid")).unwrap();

    // an exploding learning rate is a numeric failure
    tiny(dir, &["synth"]);
    tiny(dir, &["preprocess"]);
    let mut args = tiny_args(&["--set", "lr=1e200", "train-cnn"]);
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let out = run(dir, &[], &refs);
    assert_eq!(
        code(&out),
        4,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // a thread count above one only earns a note
    args = tiny_args(&["--force", "synth"]);
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let out = run(dir, &[("CSILOC_THREADS", "8")], &refs);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("single-threaded"));
}
