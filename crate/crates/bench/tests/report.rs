use flowcast_bench::report::{read_csv, read_jsonl, write_jsonl, CSV_COLUMNS};
use flowcast_bench::{emit_report, EpochRecord, HorizonReport, ModelKind, RunReport, SCHEMA_VERSION};
use flowcast_core::MetricReport;

fn metrics(seed: f64, mape: Option<f64>) -> MetricReport {
    MetricReport {
        mae: 10.0 / 3.0 + seed,
        rmse: 0.1 + 0.2 + seed,
        mape_100: mape,
        geh_mean: std::f64::consts::PI * seed,
        geh_acceptable_frac: 0.75,
        geh_unacceptable_frac: 1e-17,
        n: 168 * 30,
        n_mape: 17,
    }
}

fn sample(horizons: &[usize]) -> RunReport {
    RunReport {
        schema_version: SCHEMA_VERSION,
        config_digest: "ab".repeat(32),
        model: ModelKind::InformerT,
        input_len: 168,
        seed: 42,
        horizons: horizons
            .iter()
            .map(|&h| HorizonReport {
                horizon: h,
                windows: 100 - h,
                metrics: metrics(h as f64, (h % 2 == 0).then_some(12.5 / 7.0)),
                subset: (h == 24).then(|| metrics(0.5, None)),
                epochs: vec![EpochRecord { epoch: 1, lr: 1e-4, train_loss: 0.3, val_loss: 0.25 }],
                best_epoch: Some(1),
                best_round: None,
            })
            .collect(),
    }
}

#[test]
fn jsonl_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let r = sample(&[1, 24, 168]);
    let paths = emit_report(&r, dir.path(), "run").unwrap();
    assert_eq!(read_jsonl(&paths.jsonl).unwrap(), vec![r.clone()]);
    let two = dir.path().join("two.jsonl");
    write_jsonl(&[r.clone(), sample(&[6])], &two).unwrap();
    let text = std::fs::read_to_string(&two).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(read_jsonl(&two).unwrap()[1], sample(&[6]));
}

#[test]
fn csv_round_trip_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let r = sample(&[1, 24, 168]);
    let paths = emit_report(&r, dir.path(), "run").unwrap();
    let text = std::fs::read_to_string(&paths.csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "model,T,T_p,mae,rmse,mape_100,geh_mean,geh_acceptable_frac,geh_unacceptable_frac,n,n_mape"
    );
    assert_eq!(CSV_COLUMNS.len(), 11);
    let rows = read_csv(&paths.csv).unwrap();
    assert_eq!(rows, r.csv_rows());
    assert_eq!(rows.iter().map(|r| r.horizon).collect::<Vec<_>>(), vec![1, 24, 168]);
    assert_eq!(rows[0].mape_100, None);
    assert!(text.lines().nth(1).unwrap().starts_with("informer-t,168,1,"));
}

#[test]
fn empty_horizon_list_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&sample(&[]), dir.path(), "empty").unwrap();
    let text = std::fs::read_to_string(&paths.csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(read_csv(&paths.csv).unwrap().is_empty());
}

#[test]
fn unwritable_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no").join("such").join("dir");
    assert!(emit_report(&sample(&[1]), &missing, "x").is_err());
}

#[test]
fn unknown_schema_version_is_rejected() {
    let mut r = sample(&[1]);
    r.schema_version = SCHEMA_VERSION + 1;
    let line = serde_json::to_string(&r).unwrap();
    assert!(RunReport::from_json(&line).is_err());
}
