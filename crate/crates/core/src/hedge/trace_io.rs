//! Trace files: one row per emitted step with columns
//! `K,alpha,A_K,gap_avg,gap_iter,avg_step_norm,X_1..X_n,Xbar_1..Xbar_n`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::dynamics::Snapshot;
use crate::error::{Error, Result};

const SCALAR_COLUMNS: [&str; 6] = ["K", "alpha", "A_K", "gap_avg", "gap_iter", "avg_step_norm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" => Ok(TraceFormat::Jsonl),
            other => Err(Error::Parse(format!("unknown trace format `{other}`"))),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Jsonl => "jsonl",
        })
    }
}

/// The persisted subset of a [`Snapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub alpha: f64,
    pub weight_sum: f64,
    pub gap_avg: f64,
    pub gap_iter: f64,
    pub avg_step_norm: f64,
    /// `X^K`.
    pub iterate: Vec<f64>,
    /// `X̄^K`.
    pub average: Vec<f64>,
}

impl From<&Snapshot> for TraceRow {
    fn from(s: &Snapshot) -> Self {
        TraceRow {
            step: s.step,
            alpha: s.alpha,
            weight_sum: s.weight_sum,
            gap_avg: s.gap_avg,
            gap_iter: s.gap_iter,
            avg_step_norm: s.avg_step_norm,
            iterate: s.iterate.clone(),
            average: s.average.clone(),
        }
    }
}

pub fn header(n: usize) -> Vec<String> {
    let mut cols: Vec<String> = SCALAR_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n).map(|i| format!("X_{i}")));
    cols.extend((1..=n).map(|i| format!("Xbar_{i}")));
    cols
}

enum Sink<W: Write> {
    Csv(Box<csv::Writer<W>>),
    Jsonl(W),
}

pub struct TraceWriter<W: Write> {
    sink: Sink<W>,
    columns: Vec<String>,
}

impl<W: Write> TraceWriter<W> {
    /// Writes the CSV header immediately; JSON lines carry no header.
    pub fn new(out: W, format: TraceFormat, n: usize) -> Result<Self> {
        let columns = header(n);
        let sink = match format {
            TraceFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&columns).map_err(csv_error)?;
                Sink::Csv(Box::new(w))
            }
            TraceFormat::Jsonl => Sink::Jsonl(out),
        };
        Ok(TraceWriter { sink, columns })
    }

    pub fn write_row(&mut self, row: &TraceRow) -> Result<()> {
        let n = (self.columns.len() - SCALAR_COLUMNS.len()) / 2;
        if row.iterate.len() != n || row.average.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.iterate.len() });
        }
        let scalars = [row.alpha, row.weight_sum, row.gap_avg, row.gap_iter, row.avg_step_norm];
        match &mut self.sink {
            Sink::Csv(w) => {
                let fields = std::iter::once(row.step.to_string())
                    .chain(scalars.iter().chain(&row.iterate).chain(&row.average).map(|v| format!("{v:e}")));
                w.write_record(fields).map_err(csv_error)?;
            }
            Sink::Jsonl(out) => {
                let mut obj = Map::new();
                obj.insert(self.columns[0].clone(), Value::from(row.step));
                let values = scalars.iter().chain(&row.iterate).chain(&row.average);
                for (name, v) in self.columns[1..].iter().zip(values) {
                    obj.insert(name.clone(), Value::from(*v));
                }
                serde_json::to_writer(&mut *out, &obj)?;
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn write_snapshot(&mut self, snap: &Snapshot) -> Result<()> {
        self.write_row(&TraceRow::from(snap))
    }

    pub fn finish(self) -> Result<W> {
        match self.sink {
            Sink::Csv(w) => w.into_inner().map_err(|e| Error::Io(e.error().to_string())),
            Sink::Jsonl(mut out) => {
                out.flush()?;
                Ok(out)
            }
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse(format!("trace: {e}")),
    }
}

fn row_from_values(values: &[f64], step: usize, n: usize) -> TraceRow {
    TraceRow {
        step,
        alpha: values[0],
        weight_sum: values[1],
        gap_avg: values[2],
        gap_iter: values[3],
        avg_step_norm: values[4],
        iterate: values[5..5 + n].to_vec(),
        average: values[5 + n..5 + 2 * n].to_vec(),
    }
}

fn dimension_from_header(cols: &[String]) -> Result<usize> {
    let extra = cols.len().checked_sub(SCALAR_COLUMNS.len()).filter(|e| e % 2 == 0 && *e > 0);
    let n = extra.ok_or_else(|| Error::Parse(format!("trace header has {} columns", cols.len())))? / 2;
    if cols != header(n).as_slice() {
        return Err(Error::Parse("unexpected trace header".into()));
    }
    Ok(n)
}

/// Reads CSV or JSON-lines trace rows, detecting the format from the first
/// non-blank byte.
pub fn read_trace(mut reader: impl BufRead) -> Result<Vec<TraceRow>> {
    let first = loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            return Err(Error::Parse("empty trace".into()));
        }
        match buf.iter().position(|b| !b.is_ascii_whitespace()) {
            Some(p) => break buf[p],
            None => {
                let len = buf.len();
                reader.consume(len);
            }
        }
    };
    if first == b'{' {
        read_jsonl(reader)
    } else {
        read_csv(reader)
    }
}

fn read_csv(reader: impl BufRead) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let n = dimension_from_header(&cols)?;
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = idx + 2;
        let step = record[0].parse::<usize>().map_err(|e| Error::Parse(format!("trace line {line}: K: {e}")))?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("trace line {line}: `{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row_from_values(&values, step, n));
    }
    Ok(rows)
}

fn read_jsonl(reader: impl BufRead) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    let mut n = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: Map<String, Value> = serde_json::from_str(&line)?;
        let cols: Vec<String> = obj.keys().cloned().collect();
        let dim = match n {
            Some(d) if cols.len() == SCALAR_COLUMNS.len() + 2 * d => d,
            Some(_) => return Err(Error::Parse(format!("trace line {}: wrong field count", idx + 1))),
            None => *n.insert(dimension_from_header(&cols)?),
        };
        let step = obj["K"].as_u64().ok_or_else(|| Error::Parse(format!("trace line {}: bad K", idx + 1)))?;
        let values = cols[1..]
            .iter()
            .map(|k| obj[k].as_f64().ok_or_else(|| Error::Parse(format!("trace line {}: `{k}` is not a number", idx + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row_from_values(&values, step as usize, dim));
    }
    Ok(rows)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file))
}
