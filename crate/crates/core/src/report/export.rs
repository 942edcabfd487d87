use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::{AggregateReport, CorrelationMatrix, ReportError};
use crate::abm::{PeriodMetrics, RunResult};
use crate::config::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}'; expected csv or json")),
        }
    }
}

#[derive(Debug, Clone)]
enum Cell {
    Text(String),
    Num(Option<f64>),
}

struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

/// Rounds to 6 significant digits. Non-finite values become `None`.
fn sig6(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    format!("{x:.5e}").parse().ok()
}

fn render(x: Option<f64>) -> String {
    match x.and_then(sig6) {
        None => String::new(),
        Some(v) if v != 0.0 && (v.abs() >= 1e15 || v.abs() < 1e-5) => format!("{v:e}"),
        Some(v) => format!("{v}"),
    }
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

fn num(x: f64) -> Cell {
    Cell::Num(Some(x))
}

fn timeseries_table(runs: &[RunResult]) -> Table {
    let mut header = vec!["strategy".to_string(), "run".to_string()];
    header.extend(PeriodMetrics::FIELDS.iter().map(|f| f.to_string()));
    let rows = runs
        .iter()
        .flat_map(|r| {
            r.periods.iter().map(move |p| {
                let mut row = vec![text(r.strategy.as_str()), num(r.run_index as f64)];
                row.extend(p.values().into_iter().map(num));
                row
            })
        })
        .collect();
    Table {
        name: "timeseries",
        header,
        rows,
    }
}

/// Column list of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "strategy",
    "final_gmv_mean",
    "final_sw_mean",
    "active_restaurants_mean",
    "active_workers_mean",
    "final_gmv_std",
    "final_sw_std",
    "active_restaurants_std",
    "active_workers_std",
];

fn summary_table(report: &AggregateReport) -> Table {
    let fields = ["gmv", "sw", "active_restaurants", "active_workers"];
    let rows = report
        .strategies
        .iter()
        .map(|a| {
            let stats: Vec<_> = fields.iter().map(|f| a.final_stat(f).expect("known field")).collect();
            let mut row = vec![text(a.strategy.as_str())];
            row.extend(stats.iter().map(|m| num(m.mean)));
            row.extend(stats.iter().map(|m| num(m.std)));
            row
        })
        .collect();
    Table {
        name: "summary",
        header: SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

fn finals_table(report: &AggregateReport) -> Table {
    let mut rows = Vec::new();
    for a in &report.strategies {
        for (f, m) in PeriodMetrics::FIELDS.iter().zip(&a.finals) {
            rows.push(vec![text(a.strategy.as_str()), text(*f), num(m.mean), num(m.std)]);
        }
    }
    Table {
        name: "final_stats",
        header: ["strategy", "metric", "mean", "std"].map(String::from).to_vec(),
        rows,
    }
}

fn bands_table(report: &AggregateReport) -> Table {
    let mut header = vec!["strategy".to_string(), "period".to_string()];
    for f in PeriodMetrics::FIELDS.iter().skip(1) {
        header.push(format!("{f}_mean"));
        header.push(format!("{f}_std"));
    }
    let mut rows = Vec::new();
    for a in &report.strategies {
        for period in &a.bands {
            let mut row = vec![text(a.strategy.as_str()), num(period[0].mean)];
            for m in &period[1..] {
                row.push(num(m.mean));
                row.push(num(m.std));
            }
            rows.push(row);
        }
    }
    Table {
        name: "bands",
        header,
        rows,
    }
}

fn boxplot_table(report: &AggregateReport) -> Table {
    let mut rows = Vec::new();
    for a in &report.strategies {
        for (metric, b) in [("gmv", a.gmv_box), ("sw", a.sw_box)] {
            rows.push(vec![
                text(a.strategy.as_str()),
                text(metric),
                num(b.min),
                num(b.q1),
                num(b.median),
                num(b.q3),
                num(b.max),
            ]);
        }
    }
    Table {
        name: "boxplot",
        header: ["strategy", "metric", "min", "q1", "median", "q3", "max"].map(String::from).to_vec(),
        rows,
    }
}

fn correlation_table(report: &AggregateReport) -> Table {
    let mut rows = Vec::new();
    let mut push = |scope: &str, m: &CorrelationMatrix| {
        for (i, a) in m.labels.iter().enumerate() {
            for (j, b) in m.labels.iter().enumerate() {
                rows.push(vec![text(scope), text(a), text(b), Cell::Num(m.values[i][j])]);
            }
        }
    };
    for a in &report.strategies {
        if let Some(m) = &a.correlation {
            push(a.strategy.as_str(), m);
        }
    }
    if let Some(m) = &report.cross_correlation {
        push("CROSS", m);
    }
    Table {
        name: "correlation",
        header: ["scope", "row", "column", "value"].map(String::from).to_vec(),
        rows,
    }
}

fn tables(report: &AggregateReport) -> Vec<Table> {
    vec![
        timeseries_table(&report.runs),
        summary_table(report),
        finals_table(report),
        bands_table(report),
        boxplot_table(report),
        correlation_table(report),
    ]
}

fn write_csv(table: &Table, path: &Path) -> Result<(), ReportError> {
    let err = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(&table.header).map_err(err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| match c {
            Cell::Text(s) => s.clone(),
            Cell::Num(x) => render(*x),
        }))
        .map_err(err)?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_value(table: &Table) -> Value {
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .header
                .iter()
                .zip(row)
                .map(|(h, c)| {
                    let v = match c {
                        Cell::Text(s) => Value::String(s.clone()),
                        Cell::Num(x) => x
                            .and_then(sig6)
                            .and_then(serde_json::Number::from_f64)
                            .map_or(Value::Null, Value::Number),
                    };
                    (h.clone(), v)
                })
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

/// Writes the report into directory `dir`, creating it if needed.
///
/// CSV produces `timeseries.csv`, `summary.csv`, `final_stats.csv`,
/// `bands.csv`, `boxplot.csv` and `correlation.csv`. JSON produces one
/// `report.json` keyed by the same table names. Returns the files written.
pub fn export(report: &AggregateReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let tables = tables(report);
    match format {
        Format::Csv => tables
            .iter()
            .map(|t| {
                let path = dir.join(format!("{}.csv", t.name));
                write_csv(t, &path).map(|_| path)
            })
            .collect(),
        Format::Json => {
            let doc: Map<String, Value> = tables.iter().map(|t| (t.name.to_string(), json_value(t))).collect();
            let path = dir.join("report.json");
            let text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|source| ReportError::Json {
                path: path.clone(),
                source,
            })?;
            fs::write(&path, text).map_err(|source| ReportError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(vec![path])
        }
    }
}

/// Reads runs back from a `timeseries.csv`. Seeds are not stored there and
/// come back as 0.
pub fn read_timeseries(path: &Path) -> Result<Vec<RunResult>, ReportError> {
    let parse_err = |message: String| ReportError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let header = r
        .headers()
        .map_err(|source| ReportError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(format!("missing column '{name}'")))
    };
    let strategy_col = col("strategy")?;
    let run_col = col("run")?;
    let field_cols = PeriodMetrics::FIELDS
        .iter()
        .map(|f| col(f))
        .collect::<Result<Vec<_>, _>>()?;

    let mut runs: Vec<RunResult> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|source| ReportError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let strategy: Strategy = at(strategy_col)
            .parse()
            .map_err(|e| parse_err(format!("row {}: {e}", line + 2)))?;
        let run_index: usize = at(run_col)
            .parse()
            .map_err(|e| parse_err(format!("row {}: run: {e}", line + 2)))?;
        let mut v = [0.0; 35];
        for (k, &c) in field_cols.iter().enumerate() {
            let s = at(c);
            v[k] = if s.is_empty() {
                f64::NAN
            } else {
                s.parse().map_err(|e| {
                    parse_err(format!("row {}: {}: {e}", line + 2, PeriodMetrics::FIELDS[k]))
                })?
            };
        }
        let metrics = PeriodMetrics::from_values(&v);
        match runs.last_mut() {
            Some(last) if last.strategy == strategy && last.run_index == run_index => last.periods.push(metrics),
            _ => runs.push(RunResult {
                strategy,
                run_index,
                seed: 0,
                periods: vec![metrics],
            }),
        }
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(render(Some(123456.789)), "123457");
        assert_eq!(render(Some(0.1)), "0.1");
        assert_eq!(render(Some(-2.0 / 3.0)), "-0.666667");
        assert_eq!(render(Some(3.0)), "3");
        assert_eq!(render(Some(1.234567e-7)), "1.23457e-7");
        assert_eq!(render(None), "");
        assert_eq!(render(Some(f64::NAN)), "");
    }
}
