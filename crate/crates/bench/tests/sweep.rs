mod common;

use std::collections::BTreeSet;
use std::process::Command;

use flowcast_bench::report::write_jsonl;
use flowcast_bench::sweep::evaluate_model;
use flowcast_bench::{horizon_sweep, prepare, sweep_prepared, train_model, ExperimentConfig, NeuralModel, TrainedModel};
use flowcast_nn::Forecaster;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn single_horizon_single_row() {
    let cfg = common::tiny("rnn-t");
    let out = horizon_sweep(&cfg, &[6]).unwrap();
    assert_eq!(out.report.horizons.len(), 1);
    assert_eq!(out.report.csv_rows().len(), 1);
    assert_eq!(out.timings.len(), 1);
    assert_eq!(out.report.horizons[0].epochs.len(), 2);
}

#[test]
fn longer_horizon_scores_more_pairs() {
    let cfg = common::tiny("xgboost-t");
    let out = horizon_sweep(&cfg, &[24, 1, 24]).unwrap();
    let rows = &out.report.horizons;
    assert_eq!(rows.iter().map(|h| h.horizon).collect::<Vec<_>>(), vec![1, 24]);
    let test_len = 14 * 24;
    for h in rows {
        assert_eq!(h.windows, test_len - 24 - h.horizon + 1);
        assert_eq!(h.metrics.n, h.windows * h.horizon);
    }
    assert!(rows[1].metrics.n > rows[0].metrics.n);
    assert!(rows[0].best_round.is_some());
}

#[test]
fn identical_config_gives_identical_json() {
    let cfg = common::tiny("informer-t");
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let out = horizon_sweep(&cfg, &[1, 6]).unwrap();
        let path = dir.path().join(format!("{i}.jsonl"));
        write_jsonl(&[out.report], &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(horizon_sweep(&other, &[1]).unwrap().report.config_digest, horizon_sweep(&cfg, &[1]).unwrap().report.config_digest);
}

fn names(cfg: &ExperimentConfig) -> Vec<(String, Vec<usize>)> {
    let m = NeuralModel::build(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    m.store().ids().map(|id| (m.store().name(id).to_string(), m.store().get(id).shape().to_vec())).collect()
}

#[test]
fn time_variants_differ_only_in_input_construction() {
    for (plain, timed, prefixes) in [
        ("rnn", "rnn-t", &["input."][..]),
        ("lstm", "lstm-t", &["input."][..]),
        ("informer", "informer-t", &["enc_embed.time.", "dec_embed.time."][..]),
    ] {
        let a: BTreeSet<_> = names(&common::tiny(plain)).into_iter().collect();
        let b: BTreeSet<_> = names(&common::tiny(timed)).into_iter().collect();
        let differing: Vec<_> = a.symmetric_difference(&b).collect();
        assert!(!differing.is_empty());
        for (name, _) in differing {
            assert!(prefixes.iter().any(|p| name.starts_with(p)), "{plain}/{timed}: {name}");
        }
    }
}

#[test]
fn checkpoint_round_trip_reproduces_scores() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["lstm-t", "informer", "xgboost-t"] {
        let cfg = common::tiny(kind);
        let prep = prepare(&cfg).unwrap();
        let trained = train_model(&cfg, &prep, 6).unwrap().model;
        let path = dir.path().join(format!("{kind}.ckpt"));
        trained.save(&path).unwrap();
        let loaded = TrainedModel::load(&cfg, prep.scaler, &path).unwrap();
        let a = evaluate_model(&cfg, &prep, &trained, 6).unwrap();
        let b = evaluate_model(&cfg, &prep, &loaded, 6).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn holiday_ablation_is_configurable() {
    let mut cfg = common::tiny("xgboost-t");
    cfg.evaluation.holidays_only = true;
    cfg.data.synthetic.as_mut().unwrap().holidays_per_year = 200;
    let prep = prepare(&cfg).unwrap();
    let full = sweep_prepared(&cfg, &prep, &[6]).unwrap();
    cfg.drop_features = vec!["is_holiday".into()];
    let ablated = sweep_prepared(&cfg, &prep, &[6]).unwrap();
    assert!(full.report.horizons[0].subset.is_some());
    assert_ne!(full.report.config_digest, ablated.report.config_digest);
}

#[test]
fn cli_synth_then_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_flowcast");
    let status = Command::new(exe)
        .args(["synth", "--days", "56", "--seed", "3", "--out"])
        .arg(dir.path().join("flow.csv"))
        .arg("--holidays-out")
        .arg(dir.path().join("holidays.txt"))
        .status()
        .unwrap();
    assert!(status.success());
    let mut cfg = common::tiny("xgboost-t");
    cfg.data.synthetic = None;
    cfg.data.paths = vec!["flow.csv".into()];
    cfg.data.holidays = Some("holidays.txt".into());
    std::fs::write(dir.path().join("exp.toml"), cfg.to_toml().unwrap()).unwrap();
    let out = Command::new(exe)
        .arg("sweep")
        .arg(dir.path().join("exp.toml"))
        .args(["--horizons", "1,6", "--stem", "xgb", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = flowcast_bench::read_csv(&dir.path().join("xgb.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(dir.path().join("xgb.timings.json").exists());

    let ckpt = dir.path().join("xgb.model");
    let train = Command::new(exe)
        .arg("train")
        .arg(dir.path().join("exp.toml"))
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let eval = Command::new(exe)
        .arg("evaluate")
        .arg(dir.path().join("exp.toml"))
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(String::from_utf8_lossy(&eval.stdout).contains("geh_mean"));
}

#[test]
fn cli_ingest_imputes_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let mut text = String::from("timestamp,flow\n");
    for i in 0..(8 * 24 * 4) {
        let t = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
            + chrono::TimeDelta::minutes(15 * i);
        let v = if i == 700 { String::new() } else { format!("{}", 10 + i % 7) };
        text.push_str(&format!("{},{v}\n", t.format("%Y-%m-%dT%H:%M")));
    }
    std::fs::write(&raw, text).unwrap();
    let out = dir.path().join("hourly.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_flowcast"))
        .arg("ingest")
        .arg(&raw)
        .args(["--profile", "melbourne", "--interval", "60", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let series = flowcast_core::parse_flow_csv(&out, flowcast_core::DatasetProfile::Melbourne).unwrap();
    assert_eq!(series.len(), 8 * 24);
    assert_eq!(series.missing_count(), 0);
}
