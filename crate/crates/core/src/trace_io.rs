//! CSV persistence for cascade traces and derivative series.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::CascadeTrace;

pub const TRACE_HEADER: &str = "vertex_id,time";

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_file_name(run: usize, k: usize) -> String {
    format!("trace_{run}_{k}.csv")
}

pub fn write_trace(trace: &CascadeTrace, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (v, t) in trace.events() {
        writeln!(w, "{v},{}", fmt_f64(t))?;
    }
    Ok(())
}

pub fn save_trace(trace: &CascadeTrace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a trace file. The rate is not stored on disk, so the caller
/// supplies it.
pub fn load_trace(path: &Path, lambda: f64) -> Result<CascadeTrace> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(TRACE_HEADER) {
        return Err(parse_err(1, format!("expected header {TRACE_HEADER:?}")));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let (v, t) = line
            .split_once(',')
            .ok_or_else(|| parse_err(lineno, "expected two fields".into()))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno, format!("vertex id: {e}")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|e| parse_err(lineno, format!("time: {e}")))?;
        events.push((v, t));
    }
    let n = events.len();
    CascadeTrace::from_events(n, lambda, None, events).map_err(|e| parse_err(0, e.to_string()))
}
