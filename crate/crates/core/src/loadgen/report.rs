//! Stress reports: the per-route latency table, as text or CSV.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::LoadgenError;
use crate::metrics::{round_half_up, LatencySummary};

pub const REPORT_HEADERS: [&str; 4] = ["API", "AVG_LATENCY (ms)", "P99 (ms)", "ERROR"];
pub const CSV_HEADER: [&str; 4] = ["api", "avg_latency_ms", "p99_ms", "error"];
/// Rendered in the latency columns of a route with no successful request.
pub const NO_LATENCY: &str = "-";

/// Result of a stress run. Always holds at least one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    rows: Vec<LatencySummary>,
    wall_time: Duration,
    attempts: u64,
}

impl StressReport {
    pub fn new(rows: Vec<LatencySummary>, wall_time: Duration, attempts: u64) -> Result<Self, LoadgenError> {
        if rows.is_empty() {
            return Err(LoadgenError::InvalidPlan("a report needs at least one row".into()));
        }
        Ok(Self {
            rows,
            wall_time,
            attempts,
        })
    }

    pub fn rows(&self) -> &[LatencySummary] {
        &self.rows
    }

    pub fn wall_time(&self) -> Duration {
        self.wall_time
    }

    /// Requests attempted: successes plus errors.
    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn successes(&self) -> u64 {
        self.rows.iter().map(|r| r.sample_count).sum()
    }

    pub fn errors(&self) -> u64 {
        self.rows.iter().map(|r| r.error_count).sum()
    }

    /// Successful requests per second of wall time.
    pub fn achieved_qps(&self) -> f64 {
        let secs = self.wall_time.as_secs_f64();
        if secs > 0.0 {
            self.successes() as f64 / secs
        } else {
            0.0
        }
    }
}

/// One parsed line of a rendered report, latencies in whole milliseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub api: String,
    pub avg_latency_ms: Option<i64>,
    pub p99_ms: Option<i64>,
    pub errors: u64,
}

fn cells(row: &LatencySummary) -> [String; 4] {
    let ms = |v: f64| {
        if row.has_latency() {
            round_half_up(v).to_string()
        } else {
            NO_LATENCY.to_string()
        }
    };
    [
        row.api.clone(),
        ms(row.avg_latency),
        ms(row.p99),
        row.error_count.to_string(),
    ]
}

/// Fixed-width table: the route column left-aligned, numbers right-aligned,
/// latencies rounded half-up to whole milliseconds.
///
/// ```text
/// API    | AVG_LATENCY (ms) | P99 (ms) | ERROR
/// -------+------------------+----------+------
/// cv/fbp |               25 |       36 |     0
/// ```
pub fn render_report(report: &StressReport) -> String {
    let rows: Vec<[String; 4]> = report.rows.iter().map(cells).collect();
    let mut widths = REPORT_HEADERS.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |c: [&str; 4]| {
        format!(
            "{:<w0$} | {:>w1$} | {:>w2$} | {:>w3$}\n",
            c[0],
            c[1],
            c[2],
            c[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        )
    };
    let mut out = line(REPORT_HEADERS);
    out.push_str(&widths.map(|w| "-".repeat(w + 2)).join("+")[1..]);
    out.pop();
    out.push('\n');
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    out
}

/// CSV rendering: `api,avg_latency_ms,p99_ms,error`, empty latency cells for
/// routes without a successful request.
pub fn render_csv(report: &StressReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("write to memory");
    for row in &report.rows {
        let [api, avg, p99, errors] = cells(row);
        let blank = |s: String| if s == NO_LATENCY { String::new() } else { s };
        writer
            .write_record([api, blank(avg), blank(p99), errors])
            .expect("write to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
}

/// Parses the output of [`render_report`].
pub fn parse_report(text: &str) -> Result<Vec<ReportRow>, LoadgenError> {
    let bad = |msg: String| LoadgenError::MalformedReport(msg);
    let split = |line: &str| line.split('|').map(str::trim).map(str::to_string).collect::<Vec<_>>();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty report".into()))?;
    if split(header) != REPORT_HEADERS {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let rule = lines.next().ok_or_else(|| bad("missing header rule".into()))?;
    if rule.is_empty() || !rule.chars().all(|c| c == '-' || c == '+') {
        return Err(bad(format!("unexpected header rule {rule:?}")));
    }
    let ms = |cell: &str| -> Result<Option<i64>, LoadgenError> {
        if cell == NO_LATENCY {
            Ok(None)
        } else {
            cell.parse().map(Some).map_err(|_| bad(format!("bad latency {cell:?}")))
        }
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cells = split(line);
            let [api, avg, p99, errors] = <[String; 4]>::try_from(cells)
                .map_err(|_| bad(format!("expected 4 columns in {line:?}")))?;
            Ok(ReportRow {
                api,
                avg_latency_ms: ms(&avg)?,
                p99_ms: ms(&p99)?,
                errors: errors.parse().map_err(|_| bad(format!("bad error count {errors:?}")))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(api: &str, avg: f64, p99: f64, errors: u64) -> LatencySummary {
        LatencySummary {
            api: api.into(),
            avg_latency: avg,
            p99,
            error_count: errors,
            sample_count: 100,
        }
    }

    fn report(rows: Vec<LatencySummary>) -> StressReport {
        StressReport::new(rows, Duration::from_secs(10), 0).unwrap()
    }

    #[test]
    fn golden_table() {
        let r = report(vec![row("cv/fbp", 25.0, 36.0, 0), row("cv/mcloud/skin", 24.5, 35.49, 2)]);
        let expected = "\
API            | AVG_LATENCY (ms) | P99 (ms) | ERROR
---------------+------------------+----------+------
cv/fbp         |               25 |       36 |     0
cv/mcloud/skin |               25 |       35 |     2
";
        assert_eq!(render_report(&r), expected);
        assert_eq!(render_report(&r), render_report(&r.clone()));
    }

    #[test]
    fn row_columns_in_order() {
        let text = render_report(&report(vec![row("cv/fbp", 25.0, 36.0, 0)]));
        let line = text.lines().nth(2).unwrap();
        let fields: Vec<_> = line.split('|').map(str::trim).collect();
        assert_eq!(fields, ["cv/fbp", "25", "36", "0"]);
    }

    #[test]
    fn parse_round_trip() {
        let r = report(vec![row("cv/fbp", 25.0, 36.0, 0), LatencySummary::errors_only("cv/nsfw", 4)]);
        let parsed = parse_report(&render_report(&r)).unwrap();
        assert_eq!(
            parsed,
            [
                ReportRow { api: "cv/fbp".into(), avg_latency_ms: Some(25), p99_ms: Some(36), errors: 0 },
                ReportRow { api: "cv/nsfw".into(), avg_latency_ms: None, p99_ms: None, errors: 4 },
            ]
        );
        assert!(parse_report("nope").is_err());
        assert!(parse_report("").is_err());
    }

    #[test]
    fn csv_rendering() {
        let r = report(vec![row("cv/fbp", 25.0, 36.0, 0), LatencySummary::errors_only("cv/nsfw", 4)]);
        assert_eq!(
            render_csv(&r),
            "api,avg_latency_ms,p99_ms,error\ncv/fbp,25,36,0\ncv/nsfw,,,4\n"
        );
    }

    #[test]
    fn empty_report_is_rejected() {
        assert!(StressReport::new(Vec::new(), Duration::ZERO, 0).is_err());
    }

    #[test]
    fn totals() {
        let r = StressReport::new(vec![row("a", 1.0, 1.0, 3), row("b", 1.0, 1.0, 1)], Duration::from_secs(4), 204).unwrap();
        assert_eq!(r.successes(), 200);
        assert_eq!(r.errors(), 4);
        assert_eq!(r.achieved_qps(), 50.0);
    }
}
