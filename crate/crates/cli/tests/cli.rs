use std::path::Path;
use std::process::{Command, Output};

fn effiq(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effiq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("EFFIQ_THREADS", "1")
        .output()
        .unwrap()
}

#[test]
fn missing_input_names_producing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = effiq(dir.path(), &["label"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("effiq ingest"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed=3\nbogus=1\n").unwrap();
    let out = effiq(dir.path(), &["synth", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn stages_chain_and_snapshot_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "synth_trips=300\nsynth_days=90\nmembers=2\nepochs=2\nbatch=64\n",
    )
    .unwrap();
    for stage in [
        "synth",
        "ingest",
        "label",
        "featurize",
        "split",
        "train",
        "predict",
        "evaluate",
        "report",
    ] {
        let out = effiq(
            dir.path(),
            &[
                stage,
                "--config",
                cfg.to_str().unwrap(),
                "--vehicle-type",
                "ICE",
                "--energy",
                "fuel",
            ],
        );
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for stage in [
        "ingest",
        "label",
        "features",
        "split/ice_fuel",
        "models/ice_fuel",
        "preds/ice_fuel",
        "eval",
        "report",
    ] {
        let snap = std::fs::read_to_string(dir.path().join(stage).join("run_config.txt")).unwrap();
        assert!(snap.contains("members=2"), "{stage}");
    }
    assert!(dir.path().join("eval/report.csv").exists());
    assert!(dir.path().join("report/ice_fuel.svg").exists());
    assert!(!dir.path().join("report/hev_fuel.svg").exists());
}
