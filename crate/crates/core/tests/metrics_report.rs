use platform_sim::abm::{run_strategies, PeriodMetrics, RunResult};
use platform_sim::report::{
    aggregate_runs, aggregate_runs_with, correlation_matrix, export, read_timeseries, CorrelationMethod, Format,
    ReportError, CORRELATION_FIELDS, SUMMARY_COLUMNS,
};
use platform_sim::{derive_stream, SimConfig, StreamId, Strategy};

fn run(strategy: Strategy, idx: usize, finals: &[(f64, f64)]) -> RunResult {
    RunResult {
        strategy,
        run_index: idx,
        seed: 1,
        periods: finals
            .iter()
            .enumerate()
            .map(|(t, &(gmv, sw))| PeriodMetrics {
                period: t + 1,
                gmv,
                sw,
                active_restaurants: 100 + idx,
                active_workers: 150 + 2 * idx,
                ..PeriodMetrics::default()
            })
            .collect(),
    }
}

fn gaussian(n: usize, mean: f64, sd: f64, stream: StreamId) -> Vec<f64> {
    let mut rng = derive_stream(9, 0, stream);
    (0..n)
        .map(|_| {
            let (u, v) = (1.0 - rng.next_f64(), rng.next_f64());
            mean + sd * (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        })
        .collect()
}

#[test]
fn single_run_is_degenerate() {
    let r = aggregate_runs(&[run(Strategy::Sw, 0, &[(5.0, 1.0), (7.0, 2.0)])]).unwrap();
    let a = &r.strategies[0];
    assert!(a.finals.iter().all(|m| m.std == 0.0));
    assert_eq!(a.gmv_box.min, a.gmv_box.max);
    assert_eq!(a.gmv_box.median, 7.0);
    assert!(a.correlation.is_none());
}

#[test]
fn two_point_statistics() {
    let runs = [run(Strategy::Gmv, 0, &[(100.0, 0.0)]), run(Strategy::Gmv, 1, &[(300.0, 0.0)])];
    let a = &aggregate_runs(&runs).unwrap().strategies[0];
    let g = a.final_stat("gmv").unwrap();
    assert_eq!(g.mean, 200.0);
    assert_eq!(a.gmv_box.median, 200.0);
    assert_eq!((a.gmv_box.q1, a.gmv_box.q3), (150.0, 250.0));
}

#[test]
fn synthetic_gaussian_mean_is_recovered() {
    let xs = gaussian(50, 1000.0, 80.0, StreamId::Market);
    let runs: Vec<_> = xs.iter().enumerate().map(|(i, &x)| run(Strategy::Sw, i, &[(x, 0.0)])).collect();
    let a = &aggregate_runs(&runs).unwrap().strategies[0];
    let m = a.final_stat("gmv").unwrap().mean;
    assert!((m - 1000.0).abs() <= 3.0 * 80.0 / 50f64.sqrt());
    let b = a.gmv_box;
    assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
}

#[test]
fn bands_follow_each_period() {
    let runs = [
        run(Strategy::Sw, 0, &[(1.0, 0.0), (10.0, 0.0)]),
        run(Strategy::Sw, 1, &[(3.0, 0.0), (20.0, 0.0)]),
    ];
    let a = &aggregate_runs(&runs).unwrap().strategies[0];
    assert_eq!(a.bands.len(), 2);
    assert_eq!(a.bands[0][1].mean, 2.0);
    assert_eq!(a.bands[1][1].mean, 15.0);
    assert!((a.bands[1][1].std - 50f64.sqrt()).abs() < 1e-12);
}

#[test]
fn input_errors() {
    assert!(matches!(aggregate_runs(&[]), Err(ReportError::Empty)));
    let uneven = [run(Strategy::Sw, 0, &[(1.0, 0.0)]), run(Strategy::Sw, 1, &[(1.0, 0.0), (2.0, 0.0)])];
    assert!(matches!(aggregate_runs(&uneven), Err(ReportError::PeriodMismatch { .. })));
    let two = [run(Strategy::Sw, 0, &[(1.0, 0.0)]), run(Strategy::Sw, 1, &[(2.0, 0.0)])];
    assert!(matches!(
        correlation_matrix(&two, &["gmv"], CorrelationMethod::Pearson),
        Err(ReportError::TooFewRuns(2))
    ));
    let three: Vec<_> = (0..3).map(|i| run(Strategy::Sw, i, &[(i as f64, 0.0)])).collect();
    assert!(matches!(
        correlation_matrix(&three, &["nope"], CorrelationMethod::Pearson),
        Err(ReportError::UnknownField(_))
    ));
}

#[test]
fn correlation_examples() {
    let xs = gaussian(40, 0.0, 1.0, StreamId::Choice);
    let runs: Vec<_> = xs.iter().enumerate().map(|(i, &x)| run(Strategy::Sw, i, &[(x, 2.0 * x + 5.0)])).collect();
    let m = correlation_matrix(&runs, &["gmv", "sw", "period"], CorrelationMethod::Pearson).unwrap();
    assert_eq!(m.get("gmv", "gmv"), Some(1.0));
    assert!((m.get("gmv", "sw").unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(m.get("gmv", "period"), None);
    assert_eq!(m.get("period", "period"), Some(1.0));

    let a = gaussian(1000, 0.0, 1.0, StreamId::Agents);
    let b = gaussian(1000, 0.0, 1.0, StreamId::Delivery);
    let runs: Vec<_> = (0..1000).map(|i| run(Strategy::Sw, i, &[(a[i], b[i])])).collect();
    let m = correlation_matrix(&runs, &["gmv", "sw"], CorrelationMethod::Pearson).unwrap();
    assert!(m.get("gmv", "sw").unwrap().abs() < 0.1);
}

#[test]
fn aggregation_ignores_run_order() {
    let mut runs: Vec<_> = (0..6)
        .flat_map(|i| {
            [
                run(Strategy::Gmv, i, &[(i as f64 * 1.1, 3.0 - i as f64), (0.3 * i as f64, 1.0)]),
                run(Strategy::Sw, i, &[(7.0 - i as f64, i as f64 * i as f64), (1.0, 2.0 * i as f64)]),
            ]
        })
        .collect();
    let forward = aggregate_runs(&runs).unwrap();
    runs.reverse();
    runs.swap(1, 4);
    assert_eq!(aggregate_runs(&runs).unwrap(), forward);
}

#[test]
fn cross_strategy_pairs_by_run_index() {
    let runs: Vec<_> = (0..5)
        .flat_map(|i| {
            let x = (i * i) as f64;
            [run(Strategy::Gmv, i, &[(x, 1.0 + i as f64)]), run(Strategy::Sw, i, &[(3.0 * x - 2.0, -x)])]
        })
        .collect();
    let r = aggregate_runs(&runs).unwrap();
    let cross = r.cross_correlation.unwrap();
    assert_eq!(cross.labels.len(), 8);
    assert!((cross.get("GMV:gmv", "SW:gmv").unwrap() - 1.0).abs() < 1e-12);
    assert!((cross.get("GMV:gmv", "SW:sw").unwrap() + 1.0).abs() < 1e-12);
    for row in &cross.values {
        for v in row.iter().flatten() {
            assert!((-1.0..=1.0).contains(v));
        }
    }
}

#[test]
fn spearman_is_available() {
    let runs: Vec<_> = (1..=6).map(|i| run(Strategy::Sw, i, &[(i as f64, (i as f64).exp())])).collect();
    let r = aggregate_runs_with(&runs, CorrelationMethod::Spearman).unwrap();
    let m = r.strategies[0].correlation.as_ref().unwrap();
    assert_eq!(m.get("gmv", "sw"), Some(1.0));
    assert_eq!(m.labels, CORRELATION_FIELDS.map(String::from).to_vec());
}

fn sig6_equal(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 5e-6 * a.abs().max(b.abs())
}

#[test]
fn csv_round_trip_and_schema() {
    let cfg = SimConfig::default();
    let runs = run_strategies(&cfg, &[Strategy::Gmv, Strategy::Sw], 42, 3, 30);
    let report = aggregate_runs(&runs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export(&report, dir.path(), Format::Csv).unwrap();
    let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
    for f in ["timeseries.csv", "summary.csv", "boxplot.csv", "correlation.csv"] {
        assert!(names.contains(&f.to_string()));
    }

    let back = read_timeseries(&dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(back.len(), report.runs.len());
    for (a, b) in report.runs.iter().zip(&back) {
        assert_eq!((a.strategy, a.run_index, a.periods.len()), (b.strategy, b.run_index, b.periods.len()));
        for (p, q) in a.periods.iter().zip(&b.periods) {
            for (x, y) in p.values().iter().zip(q.values()) {
                assert!(sig6_equal(*x, y), "{x} vs {y}");
            }
        }
    }

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_COLUMNS.join(","));
    assert_eq!(
        SUMMARY_COLUMNS.to_vec(),
        vec![
            "strategy",
            "final_gmv_mean",
            "final_sw_mean",
            "active_restaurants_mean",
            "active_workers_mean",
            "final_gmv_std",
            "final_sw_std",
            "active_restaurants_std",
            "active_workers_std",
        ]
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("GMV,") && rows[1].starts_with("SW,"));

    let ts = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert!(ts.starts_with("strategy,run,period,gmv,sw,"));
}

#[test]
fn json_mirrors_csv_tables() {
    let runs = run_strategies(&SimConfig::default(), &[Strategy::Sw], 42, 3, 10);
    let report = aggregate_runs(&runs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export(&report, dir.path(), Format::Json).unwrap();
    assert_eq!(files, vec![dir.path().join("report.json")]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    for key in ["timeseries", "summary", "boxplot", "correlation", "bands", "final_stats"] {
        assert!(doc[key].is_array(), "{key}");
    }
    assert_eq!(doc["timeseries"].as_array().unwrap().len(), 30);
    assert_eq!(doc["summary"][0]["strategy"], "SW");
}

#[test]
fn export_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let report = aggregate_runs(&[run(Strategy::Sw, 0, &[(1.0, 1.0)])]).unwrap();
    let err = export(&report, &blocker.join("out"), Format::Csv).unwrap_err();
    assert!(err.to_string().contains(blocker.to_str().unwrap()), "{err}");
}

#[test]
fn export_is_deterministic() {
    let runs = run_strategies(&SimConfig::default(), &Strategy::ALL, 5, 3, 20);
    let report = aggregate_runs(&runs).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export(&report, a.path(), Format::Csv).unwrap();
    export(&report, b.path(), Format::Csv).unwrap();
    for f in ["timeseries.csv", "summary.csv", "boxplot.csv", "correlation.csv", "bands.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}
