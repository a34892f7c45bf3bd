use std::path::Path;
use std::process::Command;

fn tftb(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tftb"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const SMALL: &str = "n_per_class = 30\nmax_epochs = 4\nseeds = [0, 1]\n";

#[test]
fn train_writes_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let (code, stdout, stderr) = tftb(
        dir.path(),
        &["train", "--config", "exp.toml", "--mode", "both", "--set", "ledger_dump=true", "--output-dir", "out"],
    );
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 4);
    for run in ["baseline/seed0", "baseline/seed1", "tftb/seed0", "tftb/seed1"] {
        let d = dir.path().join("out").join(run);
        for f in ["manifest.json", "loss_curve.csv", "checkpoint.bin"] {
            assert!(d.join(f).exists(), "{run}/{f} missing");
        }
    }
    let curve = std::fs::read_to_string(dir.path().join("out/tftb/seed0/loss_curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,split,loss\n1,train,"));
    let ledger = std::fs::read_to_string(dir.path().join("out/tftb/seed0/ledger.csv")).unwrap();
    assert!(ledger.starts_with("epoch,sample_id,mean,std,effective_score,selected\n"));
    let manifest = std::fs::read_to_string(dir.path().join("out/tftb/seed0/manifest.json")).unwrap();
    assert!(manifest.contains("\"schema\": \"tftb-run-manifest/1\""));

    let (code, stdout, stderr) = tftb(
        dir.path(),
        &["compare", "out/baseline/seed0/manifest.json", "out/tftb/seed0/manifest.json", "--out", "cmp"],
    );
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("test_accuracy"));
    let csv = std::fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    assert!(csv.lines().count() >= 3);

    // different seeds mean different test sets
    let (code, _, stderr) = tftb(
        dir.path(),
        &["compare", "out/baseline/seed0/manifest.json", "out/tftb/seed1/manifest.json"],
    );
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("fingerprints differ"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = tftb(dir.path(), &["train", "--set", "alpah=0.2"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("alpah") && stderr.contains("alpha"));
    let (code, _, _) = tftb(dir.path(), &["train", "--alpha", "1.2"]);
    assert_eq!(code, 2);
    let (code, _, _) = tftb(dir.path(), &["train", "--config", "missing.toml"]);
    assert_eq!(code, 4);
    let (code, _, stderr) = tftb(dir.path(), &["train", "--budget-seconds", "0.000001", "--output-dir", "o"]);
    assert_eq!(code, 3, "{stderr}");
    let (code, _, _) = tftb(dir.path(), &["compare", "only-one.json"]);
    assert_eq!(code, 2);
    std::fs::write(dir.path().join("bad.json"), "{\"schema\": \"other/9\"}").unwrap();
    std::fs::write(dir.path().join("bad2.json"), "{\"schema\": \"other/9\"}").unwrap();
    let (code, _, stderr) = tftb(dir.path(), &["compare", "bad.json", "bad2.json"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("schema"));
}

#[test]
fn sweep_runs_every_alpha_seed_pair() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let (code, stdout, stderr) = tftb(
        dir.path(),
        &["sweep", "--config", "exp.toml", "--alphas", "0.2,0.4", "--threads", "2", "--output-dir", "s"],
    );
    assert_eq!(code, 0, "{stderr}");
    let summary = std::fs::read_to_string(dir.path().join("s/sweep/summary.csv")).unwrap();
    assert_eq!(stdout, summary);
    assert!(summary.starts_with("alpha,metric,mean,std,runs\n"));
    for arm in ["0.2,test_accuracy", "0.4,test_accuracy"] {
        assert!(summary.contains(arm), "{arm} missing from\n{summary}");
    }
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",2")));
    for run in ["alpha0.2/seed0", "alpha0.2/seed1", "alpha0.4/seed0", "alpha0.4/seed1"] {
        assert!(dir.path().join("s/sweep").join(run).join("manifest.json").exists(), "{run}");
    }
    let runs = std::fs::read_dir(dir.path().join("s/sweep")).unwrap().count();
    assert_eq!(runs, 3, "two arm directories plus summary.csv");

    std::fs::write(dir.path().join("empty.toml"), format!("{SMALL}\nalphas = []\n")).unwrap();
    let (code, _, stderr) = tftb(dir.path(), &["sweep", "--config", "empty.toml", "--output-dir", "e"]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("at least one alpha"), "{stderr}");
    assert!(!dir.path().join("e").exists());
}
