//! CSV traces of per-round summaries.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::IterateSummary;

/// A trace as read back from disk: header plus numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn column(&self, field: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == field)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn summaries(&self) -> Result<Vec<IterateSummary>> {
        if self.header.iter().map(String::as_str).ne(IterateSummary::FIELDS) {
            return Err(Error::InvalidInput("not a summary trace header".into()));
        }
        self.rows.iter().map(|r| IterateSummary::from_values(r)).collect()
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

pub fn trace_to_string(rows: &[IterateSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(IterateSummary::FIELDS).expect("in-memory write");
    for r in rows {
        let mut rec: Vec<String> = Vec::with_capacity(13);
        rec.push(r.k.to_string());
        rec.extend(r.values()[1..].iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn write_trace(path: &Path, rows: &[IterateSummary]) -> Result<()> {
    std::fs::write(path, trace_to_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_trace(text: &str, origin: &Path) -> Result<TraceTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| csv_err(origin, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(origin, e))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { path: origin.into(), line: i + 2, msg: e.to_string() })?;
        rows.push(row);
    }
    Ok(TraceTable { header, rows })
}

pub fn read_trace(path: &Path) -> Result<TraceTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path)
}

/// Field-wise mean of traces sampled at the same rounds.
pub fn mean_trace(traces: &[Vec<IterateSummary>]) -> Result<Vec<IterateSummary>> {
    let first = traces.first().ok_or_else(|| Error::InvalidInput("no traces to average".into()))?;
    if traces.iter().any(|t| t.len() != first.len() || t.iter().zip(first).any(|(a, b)| a.k != b.k)) {
        return Err(Error::InvalidInput("traces are not sampled at the same rounds".into()));
    }
    let r = traces.len() as f64;
    (0..first.len())
        .map(|i| {
            let mut acc = [0.0; 13];
            for t in traces {
                acc.iter_mut().zip(t[i].values()).for_each(|(a, v)| *a += v);
            }
            acc.iter_mut().skip(1).for_each(|a| *a /= r);
            acc[0] = first[i].k as f64;
            IterateSummary::from_values(&acc)
        })
        .collect()
}
