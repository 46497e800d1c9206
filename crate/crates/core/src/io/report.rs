//! Complexity reports as CSV and JSON.
//!
//! CSV columns, in order: `name,n,c,h,w,s,params,flops,latency_median_ns,latency_p95_ns`.
//! Latency cells are empty when no timing was taken. FLOPs count one
//! multiply-add as 2.
//!
//! JSON is an array of objects with the same fields as
//! [`ComplexityReport`](crate::analysis::ComplexityReport):
//! `name`, `shape {n,c,h,w}`, `scale`, `param_count`, `flop_count`,
//! `latency {median_ns, p95_ns, iters}` or `null`, `memory_delta_bytes` or `null`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{ComplexityReport, LatencyStats};
use crate::error::{Error, Result};
use crate::tensor::Shape;

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub s: usize,
    pub params: u64,
    pub flops: u64,
    pub latency_median_ns: Option<u64>,
    pub latency_p95_ns: Option<u64>,
}

impl From<&ComplexityReport> for ReportRow {
    fn from(r: &ComplexityReport) -> Self {
        ReportRow {
            name: r.name.clone(),
            n: r.shape.n,
            c: r.shape.c,
            h: r.shape.h,
            w: r.shape.w,
            s: r.scale,
            params: r.param_count,
            flops: r.flop_count,
            latency_median_ns: r.latency.map(|l| l.median_ns),
            latency_p95_ns: r.latency.map(|l| l.p95_ns),
        }
    }
}

fn nonempty(reports: &[ComplexityReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to write"));
    }
    Ok(())
}

pub fn report_csv_string(reports: &[ComplexityReport]) -> Result<String> {
    nonempty(reports)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(ReportRow::from(r))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_report_csv(path: impl AsRef<Path>, reports: &[ComplexityReport]) -> Result<()> {
    let path = path.as_ref();
    let text = report_csv_string(reports)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_report_json(path: impl AsRef<Path>, reports: &[ComplexityReport]) -> Result<()> {
    nonempty(reports)?;
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, reports)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<Vec<ComplexityReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuilds a report from a CSV row. Memory deltas are not stored in CSV.
impl TryFrom<&ReportRow> for ComplexityReport {
    type Error = Error;

    fn try_from(row: &ReportRow) -> Result<Self> {
        let latency = match (row.latency_median_ns, row.latency_p95_ns) {
            (Some(median_ns), Some(p95_ns)) => Some(LatencyStats { median_ns, p95_ns, iters: 0 }),
            _ => None,
        };
        Ok(ComplexityReport {
            name: row.name.clone(),
            shape: Shape::new(row.n, row.c, row.h, row.w)?,
            scale: row.s,
            param_count: row.params,
            flop_count: row.flops,
            latency,
            memory_delta_bytes: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ComplexityReport {
        ComplexityReport {
            name: "dysample".into(),
            shape: Shape::new(1, 256, 120, 120).unwrap(),
            scale: 2,
            param_count: 8192,
            flop_count: 123,
            latency: Some(LatencyStats { median_ns: 10, p95_ns: 12, iters: 5 }),
            memory_delta_bytes: None,
        }
    }

    #[test]
    fn one_header_one_row() {
        let text = report_csv_string(&[report()]).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "name,n,c,h,w,s,params,flops,latency_median_ns,latency_p95_ns");
        assert_eq!(lines[1], "dysample,1,256,120,120,2,8192,123,10,12");
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn missing_latency_is_empty() {
        let mut r = report();
        r.latency = None;
        let text = report_csv_string(&[r]).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",123,,"));
    }

    #[test]
    fn empty_list_rejected() {
        assert!(report_csv_string(&[]).is_err());
    }
}
