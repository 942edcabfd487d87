//! Cross-run statistics: final-period means, time-series bands, box-plot
//! summaries and correlation matrices, plus their CSV/JSON export.

mod export;

pub use export::{export, read_timeseries, Format, SUMMARY_COLUMNS};

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abm::{PeriodMetrics, RunResult};
use crate::config::Strategy;

/// Fields of the per-strategy correlation heatmap.
pub const CORRELATION_FIELDS: [&str; 4] = ["gmv", "sw", "active_restaurants", "active_workers"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("runs have different lengths: {expected} and {found} periods")]
    PeriodMismatch { expected: usize, found: usize },
    #[error("run {run} of {strategy} has no periods")]
    EmptyRun { strategy: Strategy, run: usize },
    #[error("correlation needs at least 3 runs, got {0}")]
    TooFewRuns(usize),
    #[error("unknown metric '{0}'")]
    UnknownField(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

/// Box-plot summary with type-7 quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    /// `None` for an empty sample.
    pub fn of(xs: &[f64]) -> Option<FiveNumber> {
        if xs.is_empty() {
            return None;
        }
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        Some(FiveNumber {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

/// Linear interpolation between order statistics (R type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Pearson correlation, `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; ties share their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn correlation(method: CorrelationMethod, x: &[f64], y: &[f64]) -> Option<f64> {
    match method {
        CorrelationMethod::Pearson => pearson(x, y),
        CorrelationMethod::Spearman => pearson(&ranks(x), &ranks(y)),
    }
}

/// Symmetric matrix with labelled rows; `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    fn from_columns(labels: Vec<String>, cols: &[Vec<f64>], method: CorrelationMethod) -> CorrelationMatrix {
        let n = cols.len();
        let mut values = vec![vec![None; n]; n];
        for i in 0..n {
            for j in i..n {
                let c = if i == j {
                    Some(1.0)
                } else {
                    correlation(method, &cols[i], &cols[j])
                };
                values[i][j] = c;
                values[j][i] = c;
            }
        }
        CorrelationMatrix { labels, values }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.values[i][j]
    }
}

fn final_column(runs: &[&RunResult], field: &str) -> Result<Vec<f64>, ReportError> {
    let i = PeriodMetrics::FIELDS
        .iter()
        .position(|f| *f == field)
        .ok_or_else(|| ReportError::UnknownField(field.to_string()))?;
    runs.iter()
        .map(|r| {
            r.last().map(|p| p.values()[i]).ok_or(ReportError::EmptyRun {
                strategy: r.strategy,
                run: r.run_index,
            })
        })
        .collect()
}

/// Correlations between final-period values across runs.
pub fn correlation_matrix(
    results: &[RunResult],
    fields: &[&str],
    method: CorrelationMethod,
) -> Result<CorrelationMatrix, ReportError> {
    if results.len() < 3 {
        return Err(ReportError::TooFewRuns(results.len()));
    }
    let runs: Vec<&RunResult> = results.iter().collect();
    let cols = fields
        .iter()
        .map(|f| final_column(&runs, f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorrelationMatrix::from_columns(
        fields.iter().map(|f| f.to_string()).collect(),
        &cols,
        method,
    ))
}

/// Correlations across strategies, pairing runs by run index. Labels read
/// `STRATEGY:field`. Only run indices present under every strategy are used.
pub fn cross_strategy_correlation(
    results: &[RunResult],
    fields: &[&str],
    method: CorrelationMethod,
) -> Result<CorrelationMatrix, ReportError> {
    let groups = group(results);
    let common: Vec<usize> = groups
        .values()
        .map(|g| g.iter().map(|r| r.run_index).collect::<Vec<_>>())
        .reduce(|a, b| a.into_iter().filter(|i| b.contains(i)).collect())
        .unwrap_or_default();
    if common.len() < 3 {
        return Err(ReportError::TooFewRuns(common.len()));
    }
    let mut labels = Vec::new();
    let mut cols = Vec::new();
    for (s, runs) in &groups {
        let paired: Vec<&RunResult> = runs.iter().copied().filter(|r| common.contains(&r.run_index)).collect();
        for f in fields {
            labels.push(format!("{s}:{f}"));
            cols.push(final_column(&paired, f)?);
        }
    }
    Ok(CorrelationMatrix::from_columns(labels, &cols, method))
}

/// Runs grouped by strategy, each group sorted by run index.
fn group(results: &[RunResult]) -> BTreeMap<Strategy, Vec<&RunResult>> {
    let mut g: BTreeMap<Strategy, Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        g.entry(r.strategy).or_default().push(r);
    }
    for runs in g.values_mut() {
        runs.sort_by_key(|r| r.run_index);
    }
    g
}

/// Mean and sample standard deviation of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Moments {
        Moments {
            mean: mean(xs),
            std: std_dev(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: Strategy,
    pub runs: usize,
    /// Final-period statistics in `PeriodMetrics::FIELDS` order.
    pub finals: Vec<Moments>,
    /// `bands[t][k]`: cross-run statistics of field `k` in period `t`.
    pub bands: Vec<Vec<Moments>>,
    pub gmv_box: FiveNumber,
    pub sw_box: FiveNumber,
    /// Over [`CORRELATION_FIELDS`]; absent with fewer than 3 runs.
    pub correlation: Option<CorrelationMatrix>,
}

impl StrategyAggregate {
    pub fn final_stat(&self, field: &str) -> Option<Moments> {
        PeriodMetrics::FIELDS.iter().position(|f| *f == field).map(|i| self.finals[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// In `Strategy` order.
    pub strategies: Vec<StrategyAggregate>,
    /// Cross-strategy heatmap; present when at least two strategies share
    /// three or more run indices.
    pub cross_correlation: Option<CorrelationMatrix>,
    /// Source runs, sorted by strategy then run index.
    pub runs: Vec<RunResult>,
}

impl AggregateReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyAggregate> {
        self.strategies.iter().find(|a| a.strategy == s)
    }
}

pub fn aggregate_runs(results: &[RunResult]) -> Result<AggregateReport, ReportError> {
    aggregate_runs_with(results, CorrelationMethod::Pearson)
}

pub fn aggregate_runs_with(results: &[RunResult], method: CorrelationMethod) -> Result<AggregateReport, ReportError> {
    let first = results.first().ok_or(ReportError::Empty)?;
    let len = first.periods.len();
    for r in results {
        if r.periods.len() != len {
            return Err(ReportError::PeriodMismatch {
                expected: len,
                found: r.periods.len(),
            });
        }
        if r.periods.is_empty() {
            return Err(ReportError::EmptyRun {
                strategy: r.strategy,
                run: r.run_index,
            });
        }
    }

    let groups = group(results);
    let mut strategies = Vec::new();
    for (&strategy, runs) in &groups {
        let values: Vec<Vec<[f64; 35]>> = runs
            .iter()
            .map(|r| r.periods.iter().map(PeriodMetrics::values).collect())
            .collect();
        let bands: Vec<Vec<Moments>> = (0..len)
            .map(|t| {
                (0..PeriodMetrics::FIELDS.len())
                    .map(|k| Moments::of(&values.iter().map(|v| v[t][k]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        let gmv = final_column(runs, "gmv")?;
        let sw = final_column(runs, "sw")?;
        let correlation = if runs.len() >= 3 {
            let cols = CORRELATION_FIELDS
                .iter()
                .map(|f| final_column(runs, f))
                .collect::<Result<Vec<_>, _>>()?;
            Some(CorrelationMatrix::from_columns(
                CORRELATION_FIELDS.iter().map(|f| f.to_string()).collect(),
                &cols,
                method,
            ))
        } else {
            None
        };
        strategies.push(StrategyAggregate {
            strategy,
            runs: runs.len(),
            finals: bands[len - 1].clone(),
            bands,
            gmv_box: FiveNumber::of(&gmv).expect("non-empty group"),
            sw_box: FiveNumber::of(&sw).expect("non-empty group"),
            correlation,
        });
    }

    let cross_correlation = if groups.len() >= 2 {
        cross_strategy_correlation(results, &CORRELATION_FIELDS, method).ok()
    } else {
        None
    };
    let runs = groups.values().flatten().map(|r| (*r).clone()).collect();
    Ok(AggregateReport {
        strategies,
        cross_correlation,
        runs,
    })
}
