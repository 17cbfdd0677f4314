//! Summary statistics, histograms and report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::backtest::HedgeReport;
use super::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    Terminal,
    MeanTracking,
}

impl ErrorMetric {
    pub fn label(self) -> &'static str {
        match self {
            ErrorMetric::Terminal => "terminal",
            ErrorMetric::MeanTracking => "mean_tracking",
        }
    }

    fn of(self, r: &HedgeReport) -> f64 {
        match self {
            ErrorMetric::Terminal => r.terminal_error,
            ErrorMetric::MeanTracking => r.mean_tracking_error,
        }
    }
}

/// Distribution summary of one metric for one strategy, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub strategy: Strategy,
    pub metric: ErrorMetric,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single report.
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(strategy: Strategy, metric: ErrorMetric, mut v: Vec<f64>) -> StatsRow {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    StatsRow {
        strategy,
        metric,
        count: n,
        mean,
        std,
        min: v[0],
        q25: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q75: quantile(&v, 0.75),
        max: v[n - 1],
    }
}

/// Mean, standard deviation, extremes and quartiles of both error metrics
/// for every strategy present, terminal rows first.
pub fn experiment_stats(reports: &[HedgeReport]) -> Result<Vec<StatsRow>> {
    if reports.is_empty() {
        return Err(Error::domain("no reports to summarize"));
    }
    let mut strategies: Vec<Strategy> = reports.iter().map(|r| r.strategy).collect();
    strategies.sort();
    strategies.dedup();
    let mut rows = Vec::new();
    for metric in [ErrorMetric::Terminal, ErrorMetric::MeanTracking] {
        for &s in &strategies {
            let v = reports
                .iter()
                .filter(|r| r.strategy == s)
                .map(|r| metric.of(r))
                .collect();
            rows.push(summarize(s, metric, v));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// `bins` equal-width bins spanning the data; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if values.is_empty() || bins == 0 {
        return Err(Error::domain("a histogram needs data and at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("histogram data must be finite"));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins {
                hi
            } else {
                lo + (b + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    Ok(out)
}

const REPORT_HEADER: [&str; 5] = [
    "id",
    "scenario",
    "strategy",
    "terminal_error_pct",
    "mean_tracking_error_pct",
];

/// One row per (path or option, strategy).
pub fn write_reports_csv(path: &Path, reports: &[HedgeReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.id.to_string(),
            r.scenario.clone(),
            r.strategy.label().to_string(),
            r.terminal_error.to_string(),
            r.mean_tracking_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv(path: &Path) -> Result<Vec<HedgeReport>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(Error::data(format!(
            "{}: expected header {}",
            path.display(),
            REPORT_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| {
                Error::data(format!(
                    "{} row {row}: bad {} {:?}",
                    path.display(),
                    REPORT_HEADER[k],
                    field(k)
                ))
            })
        };
        out.push(HedgeReport {
            id: field(0).parse().map_err(|_| {
                Error::data(format!(
                    "{} row {row}: bad id {:?}",
                    path.display(),
                    field(0)
                ))
            })?,
            scenario: field(1).to_string(),
            strategy: field(2)
                .parse()
                .map_err(|e: Error| Error::data(format!("{} row {row}: {e}", path.display())))?,
            terminal_error: num(3)?,
            mean_tracking_error: num(4)?,
        });
    }
    Ok(out)
}

pub fn write_summary_json(path: &Path, rows: &[StatsRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Tidy histogram table: `strategy,metric,lo,hi,count`.
pub fn write_histograms_csv(path: &Path, reports: &[HedgeReport], bins: usize) -> Result<()> {
    let mut strategies: Vec<Strategy> = reports.iter().map(|r| r.strategy).collect();
    strategies.sort();
    strategies.dedup();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy", "metric", "lo", "hi", "count"])?;
    for metric in [ErrorMetric::Terminal, ErrorMetric::MeanTracking] {
        for &s in &strategies {
            let v: Vec<f64> = reports
                .iter()
                .filter(|r| r.strategy == s)
                .map(|r| metric.of(r))
                .collect();
            for b in histogram(&v, bins)? {
                w.write_record([
                    s.label().to_string(),
                    metric.label().to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.count.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(strategy: Strategy, terminal: f64) -> HedgeReport {
        HedgeReport {
            id: 0,
            scenario: "no-jump".into(),
            strategy,
            terminal_error: terminal,
            mean_tracking_error: terminal / 2.0,
        }
    }

    #[test]
    fn single_report_collapses_quantiles() {
        let rows = experiment_stats(&[rep(Strategy::RsDelta, 0.25)]).unwrap();
        let r = &rows[0];
        for v in [r.mean, r.min, r.q25, r.median, r.q75, r.max] {
            assert_eq!(v, 0.25);
        }
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn five_element_set() {
        let reports: Vec<_> = (1..=5).map(|i| rep(Strategy::BsDelta, i as f64)).collect();
        let rows = experiment_stats(&reports).unwrap();
        let r = &rows[0];
        assert_eq!(r.metric, ErrorMetric::Terminal);
        assert_eq!(r.median, 3.0);
        assert_eq!(r.mean, 3.0);
        assert_eq!((r.q25, r.q75), (2.0, 4.0));
        assert!((r.std - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[1].metric, ErrorMetric::MeanTracking);
        assert_eq!(rows[1].median, 1.5);
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(experiment_stats(&[]).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let h = histogram(&v, 7).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 100);
        assert_eq!(h[0].lo, 0.0);
        assert_eq!(h[6].hi, 9.9);
        assert_eq!(histogram(&[1.0, 1.0], 3).unwrap()[0].count, 2);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let reports = vec![
            rep(Strategy::MvRs, 0.1 + 0.2),
            rep(Strategy::MvApprox, 1e-17),
        ];
        write_reports_csv(&path, &reports).unwrap();
        assert_eq!(read_reports_csv(&path).unwrap(), reports);
    }
}
