//! Trace CSV files: one header line, then one row per iteration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::{TraceRow, TraceSink};
use crate::error::{Error, Result};

pub const TRACE_COLUMNS: [&str; 12] = [
    "iter",
    "msg_exchanges",
    "gamma",
    "objective",
    "consensus_err",
    "delta_D",
    "delta_X",
    "delta_max",
    "tracking_residual",
    "inner_iters_D",
    "inner_iters_X",
    "wall_ms",
];

/// Rows are flushed to disk at least this often.
pub const FLUSH_EVERY: usize = 100;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The cells of `row` in column order.
pub fn row_cells(row: &TraceRow) -> [String; 12] {
    [
        row.iter.to_string(),
        row.msg_exchanges.to_string(),
        opt(row.gamma),
        row.objective.to_string(),
        row.consensus_err.to_string(),
        opt(row.delta_d),
        opt(row.delta_x),
        opt(row.delta_max),
        opt(row.tracking_residual),
        row.inner_iters_d.to_string(),
        row.inner_iters_x.to_string(),
        row.wall_ms.to_string(),
    ]
}

pub struct CsvTraceWriter {
    out: BufWriter<File>,
    path: PathBuf,
    pending: usize,
}

impl CsvTraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            pending: 0,
        };
        writeln!(w.out, "{}", TRACE_COLUMNS.join(",")).map_err(|e| Error::io(path, e))?;
        Ok(w)
    }
}

impl TraceSink for CsvTraceWriter {
    fn record(&mut self, row: &TraceRow) -> Result<()> {
        writeln!(self.out, "{}", row_cells(row).join(",")).map_err(|e| Error::io(&self.path, e))?;
        self.pending += 1;
        if self.pending >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.pending = 0;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn parse_opt(cell: &str, line: usize) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::parse("trace", format!("line {line}: bad number {cell:?}")))
}

fn parse_req<T: std::str::FromStr>(cell: &str, line: usize) -> Result<T> {
    cell.parse()
        .map_err(|_| Error::parse("trace", format!("line {line}: bad value {cell:?}")))
}

pub fn parse_trace_row(line: &str, line_no: usize) -> Result<TraceRow> {
    let c: Vec<&str> = line.split(',').collect();
    if c.len() != TRACE_COLUMNS.len() {
        return Err(Error::parse(
            "trace",
            format!("line {line_no}: {} cells, expected {}", c.len(), TRACE_COLUMNS.len()),
        ));
    }
    Ok(TraceRow {
        iter: parse_req(c[0], line_no)?,
        msg_exchanges: parse_req(c[1], line_no)?,
        gamma: parse_opt(c[2], line_no)?,
        objective: parse_req(c[3], line_no)?,
        consensus_err: parse_req(c[4], line_no)?,
        delta_d: parse_opt(c[5], line_no)?,
        delta_x: parse_opt(c[6], line_no)?,
        delta_max: parse_opt(c[7], line_no)?,
        tracking_residual: parse_opt(c[8], line_no)?,
        inner_iters_d: parse_req(c[9], line_no)?,
        inner_iters_x: parse_req(c[10], line_no)?,
        wall_ms: parse_req(c[11], line_no)?,
    })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("trace", "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    if header != TRACE_COLUMNS.join(",") {
        return Err(Error::parse("trace", format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.is_empty() {
            rows.push(parse_trace_row(&line, k + 2)?);
        }
    }
    Ok(rows)
}
