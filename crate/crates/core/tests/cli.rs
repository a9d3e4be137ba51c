use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epiweights"))
}

#[test]
fn group_prob_prints_four_decimals() {
    let out = bin().args(["group-prob", "--k", "2", "--cycles", "50", "--ns", "9"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.9799");
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.csv");
    let cfg = dir.path().join("cfg.json");
    assert!(bin().args(["gen-net", "--n", "20", "--m0", "5", "--m", "5", "--seed", "1", "--out"]).arg(&net).status().unwrap().success());
    std::fs::write(&cfg, r#"{"np": 20, "bogus": 1}"#).unwrap();
    let status = bin().arg("baseline").arg("--net").arg(&net).arg("--config").arg(&cfg).args(["--mode", "none", "--outdir"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn baseline_simulate_and_stats_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.csv");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"np": 12, "total_fes": 2000, "runs": 3}"#).unwrap();
    assert!(bin().args(["gen-net", "--n", "20", "--m0", "5", "--m", "5", "--seed", "1", "--out"]).arg(&net).status().unwrap().success());
    for mode in ["none", "constant"] {
        let status = bin().arg("baseline").arg("--net").arg(&net).arg("--config").arg(&cfg).args(["--mode", mode, "--outdir"])
            .arg(dir.path().join(mode))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let status = bin().arg("optimize").arg("--net").arg(&net).arg("--config").arg(&cfg).args(["--algo", "nsde-c3", "--outdir"])
        .arg(dir.path().join("c3"))
        .status()
        .unwrap();
    assert!(status.success());
    let summary = dir.path().join("summary.csv");
    let status = bin().arg("stats").arg("--indir").arg(dir.path().join("c3")).arg(dir.path().join("none")).arg(dir.path().join("constant"))
        .arg("--out").arg(&summary)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&summary).unwrap();
    assert!(text.starts_with("algorithm,mean_ofv,std,p_value"));
    assert_eq!(text.lines().count(), 4);

    let traj = dir.path().join("traj.csv");
    let status = bin().arg("simulate").arg("--net").arg(&net).arg("--schedule").arg(dir.path().join("constant/run_000/schedule.csv"))
        .arg("--out").arg(&traj)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&traj).unwrap().lines().count(), 202);
}
