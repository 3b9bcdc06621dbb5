mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Stdio};

use common::{stdio_mock, BIN};
use gpts::bandit::PolicyKind;
use gpts::bridge::Transport;
use gpts::env::{write_replay_csv, SyntheticPretrainSpec};
use gpts::harness::{
    run_experiment, run_file_name, summarize, EnvironmentConfig, ExperimentConfig, FailureKind, PolicyEntry,
    MANIFEST_FILE, SUMMARY_FILE,
};

fn small(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        interactions: 25,
        seeds: vec![0, 1, 2, 3, 4],
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

type Table = Vec<HashMap<String, String>>;

fn read_table(path: &Path) -> Table {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records().map(|r| headers.iter().map(String::from).zip(r.unwrap().iter().map(String::from)).collect()).collect()
}

fn f(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap()
}

fn gpts(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).stdout(Stdio::null()).stderr(Stdio::null()).status().unwrap().code().unwrap()
}

#[test]
fn grid_search_runs_every_arm_for_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { policies: vec![PolicyEntry::FixedArm { index: None }], ..small(dir.path()) };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.runs.len(), 45);
    assert_eq!(report.exit_code(), 0);
    for arm in 0..9 {
        for seed in 0..5 {
            let rows = read_table(&dir.path().join(run_file_name(&PolicyKind::FixedArm { index: arm }, seed)));
            assert_eq!(rows.len(), 26);
            assert_eq!(rows[0]["arm_index"], "");
            assert!(rows[1..].iter().all(|r| r["arm_index"] == arm.to_string()));
            assert!(rows.iter().all(|r| r["gp_mean"].is_empty()));
        }
    }
    let manifest = read_table(&dir.path().join(MANIFEST_FILE));
    assert_eq!(manifest.len(), 45);
    assert!(manifest.iter().all(|r| r["status"] == "ok" && r["interactions_completed"] == "25"));
}

#[test]
fn summary_agrees_with_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(dir.path())).unwrap();
    let mut by_key: HashMap<(String, u64), Vec<(f64, f64)>> = HashMap::new();
    for r in &report.runs {
        for row in read_table(&r.file) {
            let key = (row["policy"].clone(), row["interaction"].parse().unwrap());
            by_key.entry(key).or_default().push((f(&row, "val_loss"), f(&row, "cumulative_reward")));
        }
    }
    let summary = read_table(&dir.path().join(SUMMARY_FILE));
    assert_eq!(summary.len(), 11 * 26);
    for row in summary {
        let values = &by_key[&(row["policy"].clone(), row["interaction"].parse().unwrap())];
        let n = values.len() as f64;
        assert_eq!(row["n"], values.len().to_string());
        let m = values.iter().map(|v| v.0).sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v.0 - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mr = values.iter().map(|v| v.1).sum::<f64>() / n;
        assert!((f(&row, "mean_val_loss") - m).abs() < 1e-12);
        assert!((f(&row, "sd_val_loss") - sd).abs() < 1e-12);
        assert!((f(&row, "mean_cumulative_reward") - mr).abs() < 1e-12);
    }
    let text = summarize(dir.path()).unwrap();
    assert!(text.violations.is_empty());
    assert_eq!(text.policies.len(), 11);
    assert_eq!(text.policies[0].policy, "gp_ts");
}

#[test]
fn gp_ts_rows_carry_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { policies: vec![PolicyEntry::GpTs], seeds: vec![3], ..small(dir.path()) };
    run_experiment(&cfg).unwrap();
    let rows = read_table(&dir.path().join(run_file_name(&PolicyKind::GpTs, 3)));
    assert_eq!((f(&rows[0], "gp_ls_rho"), f(&rows[0], "gp_noise_variance")), (0.1, 0.01));
    assert!(rows.iter().all(|r| f(r, "gp_noise_variance") >= 1e-6 && f(r, "gp_ls_rho") > 0.0));
    let mut sum = 0.0;
    for pair in rows.windows(2) {
        let reward = f(&pair[1], "reward");
        assert_eq!(reward, f(&pair[0], "val_loss") - f(&pair[1], "val_loss"));
        sum += reward;
        assert_eq!(f(&pair[1], "cumulative_reward"), sum);
    }
}

#[test]
fn replay_reproduces_a_logged_run() {
    let dir = tempfile::tempdir().unwrap();
    let policy = PolicyKind::FixedArm { index: 4 };
    let cfg = ExperimentConfig {
        policies: vec![PolicyEntry::FixedArm { index: Some(4) }],
        seeds: vec![2],
        ..small(&dir.path().join("original"))
    };
    let report = run_experiment(&cfg).unwrap();
    let log = dir.path().join("log.csv");
    write_replay_csv(report.runs[0].history.as_ref().unwrap(), std::fs::File::create(&log).unwrap()).unwrap();

    let replay = ExperimentConfig {
        environment: EnvironmentConfig::Replay { path: log.clone() },
        output_dir: dir.path().join("replayed"),
        ..cfg
    };
    assert_eq!(run_experiment(&replay).unwrap().exit_code(), 0);
    let original = std::fs::read(dir.path().join("original").join(run_file_name(&policy, 2))).unwrap();
    let replayed = std::fs::read(dir.path().join("replayed").join(run_file_name(&policy, 2))).unwrap();
    assert_eq!(original, replayed);

    let logged = read_table(&log);
    let rows = read_table(&dir.path().join("replayed").join(run_file_name(&policy, 2)));
    for (l, r) in logged.iter().zip(&rows) {
        assert_eq!((&l["interaction"], &l["val_loss"]), (&r["interaction"], &r["val_loss"]));
    }
}

#[test]
fn failed_runs_do_not_stop_their_siblings() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let rows: String = (1..=25).map(|t| format!("4,{t},{}\n", 10.0 - 0.1 * t as f64)).collect();
    std::fs::write(&log, format!("arm_index,interaction,val_loss\n4,0,10\n{rows}")).unwrap();
    let cfg = ExperimentConfig {
        policies: vec![PolicyEntry::FixedArm { index: Some(4) }, PolicyEntry::FixedArm { index: Some(5) }],
        seeds: vec![0],
        environment: EnvironmentConfig::Replay { path: log },
        ..small(&dir.path().join("out"))
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.exit_code(), 3);
    assert!(report.runs[0].failure.is_none());
    let (kind, msg) = report.runs[1].failure.as_ref().unwrap();
    assert_eq!(*kind, FailureKind::Environment);
    assert!(msg.contains("arm 5") && msg.contains("interaction 1"), "{msg}");
    let manifest = read_table(&dir.path().join("out").join(MANIFEST_FILE));
    assert_eq!(manifest[1]["status"], "environment_error");
    assert_eq!(manifest[1]["interactions_completed"], "0");
}

#[test]
fn bridge_runs_write_the_same_csvs_as_in_process_runs() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        policies: vec![PolicyEntry::GpTs, PolicyEntry::UniformRandom],
        seeds: vec![0, 1],
        ..small(&dir.path().join("local"))
    };
    run_experiment(&base).unwrap();
    let bridged = ExperimentConfig {
        environment: EnvironmentConfig::Bridge {
            transport: Transport::Stdio(stdio_mock()),
            timeout_s: 10.0,
            init_config: serde_json::json!({ "synthetic": SyntheticPretrainSpec::default() })
                .as_object()
                .unwrap()
                .clone(),
        },
        output_dir: dir.path().join("bridge"),
        ..base
    };
    assert_eq!(run_experiment(&bridged).unwrap().exit_code(), 0);
    for policy in [PolicyKind::GpTs, PolicyKind::UniformRandom] {
        for seed in [0, 1] {
            let name = run_file_name(&policy, seed);
            assert_eq!(
                std::fs::read(dir.path().join("local").join(&name)).unwrap(),
                std::fs::read(dir.path().join("bridge").join(&name)).unwrap(),
                "{name}"
            );
        }
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    std::fs::write(p("bad.toml"), "interactions = \"many\"\n").unwrap();
    assert_eq!(gpts(&["run", "--config", &p("bad.toml")]), 2);
    assert_eq!(gpts(&["run", "--config", &p("missing.toml")]), 2);

    let default = String::from_utf8(Command::new(BIN).arg("print-default-config").output().unwrap().stdout).unwrap();
    let head = default.split("[environment]").next().unwrap();
    std::fs::write(p("replay.toml"), format!("{head}[environment]\nkind = \"replay\"\npath = \"nowhere.csv\"\n"))
        .unwrap();
    assert_eq!(gpts(&["run", "--config", &p("replay.toml"), "--out", &p("r")]), 3);

    std::fs::write(p("ok.toml"), default.replace("interactions = 100", "interactions = 10")).unwrap();
    assert_eq!(gpts(&["run", "--config", &p("ok.toml"), "--seed-override", "1", "--out", &p("ok")]), 0);
    assert_eq!(gpts(&["summarize", "--dir", &p("ok")]), 0);

    // Corrupt one cumulative reward.
    let file = dir.path().join("ok").join(run_file_name(&PolicyKind::GpTs, 1));
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[5].split(',').map(String::from).collect();
    let idx = lines[0].split(',').position(|h| h == "cumulative_reward").unwrap();
    fields[idx] = (fields[idx].parse::<f64>().unwrap() + 0.5).to_string();
    lines[5] = fields.join(",");
    std::fs::write(&file, lines.join("\n") + "\n").unwrap();
    let out = Command::new(BIN).args(["summarize", "--dir", &p("ok")]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("interaction 4") && report.contains("telescope"), "{report}");

    std::fs::create_dir(p("empty")).unwrap();
    assert_eq!(gpts(&["summarize", "--dir", &p("empty")]), 2);
}
