//! CSV and JSON artifacts. Every file is a pure function of its inputs except
//! the optional `# generated_at=` first line.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::control::ControlRun;
use crate::error::{Error, Result};
use crate::harness::{RegretRecord, SweepResult};

pub const TRACE_HEADER: &str = "t,loss,comparator_loss,cum_regret,updated,logdet_A";
pub const SWEEP_HEADER: &str = "T,seed,final_regret,arm";
pub const TIMESTAMP_PREFIX: &str = "# generated_at=";

/// 17 significant digits in scientific notation.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# generated_at=<unix seconds>` with a trailing newline.
pub fn timestamp_line() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("{TIMESTAMP_PREFIX}{secs}\n")
}

fn start(timestamp: bool, header: &str) -> String {
    let mut out = if timestamp { timestamp_line() } else { String::new() };
    out.push_str(header);
    out.push('\n');
    out
}

pub fn trace_csv(record: &RegretRecord, timestamp: bool) -> String {
    let mut out = start(timestamp, TRACE_HEADER);
    for i in 0..record.horizon() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            number(record.losses[i]),
            number(record.comparator_losses[i]),
            number(record.cum_regret[i]),
            u8::from(record.updated[i]),
            number(record.logdet[i]),
        );
    }
    out
}

pub fn sweep_csv(results: &[SweepResult], timestamp: bool) -> String {
    let mut out = start(timestamp, SWEEP_HEADER);
    for r in results {
        for c in &r.cells {
            let _ = writeln!(out, "{},{},{},{}", c.horizon, c.seed, number(c.final_regret), r.arm);
        }
    }
    out
}

/// Per-step observations, inputs and costs of a control run:
/// `t,y_1..y_dy,u_1..u_du,cost,updated`.
pub fn trajectory_csv(run: &ControlRun, timestamp: bool) -> String {
    let dy = run.observations.first().map_or(0, |y| y.len());
    let du = run.controls.first().map_or(0, |u| u.len());
    let mut header = String::from("t");
    for i in 1..=dy {
        let _ = write!(header, ",y_{i}");
    }
    for i in 1..=du {
        let _ = write!(header, ",u_{i}");
    }
    header.push_str(",cost,updated");
    let mut out = start(timestamp, &header);
    for (i, ((y, u), c)) in run.observations.iter().zip(&run.controls).zip(&run.costs).enumerate() {
        let _ = write!(out, "{}", i + 1);
        for v in y.iter().chain(u.iter()) {
            let _ = write!(out, ",{}", number(*v));
        }
        let _ = writeln!(out, ",{},{}", number(*c), u8::from(run.updated[i]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub loss: f64,
    pub comparator_loss: f64,
    pub cum_regret: f64,
    pub updated: bool,
    pub logdet: f64,
}

/// Reads a trace written by [`trace_csv`], skipping comment lines.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let bad = |line: usize, msg: String| Error::Io { path: format!("trace line {line}"), message: msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        other => return Err(bad(1, format!("unexpected header {:?}", other.map(|o| o.1)))),
    }
    lines
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(n + 1, format!("expected 6 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(n + 1, e.to_string()));
            Ok(TraceRow {
                t: f[0].parse().map_err(|e: std::num::ParseIntError| bad(n + 1, e.to_string()))?,
                loss: num(f[1])?,
                comparator_loss: num(f[2])?,
                cum_regret: num(f[3])?,
                updated: f[4] == "1",
                logdet: num(f[5])?,
            })
        })
        .collect()
}

/// Drops a leading timestamp comment so artifacts can be compared.
pub fn strip_timestamp(text: &str) -> &str {
    if text.starts_with(TIMESTAMP_PREFIX) {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    } else {
        text
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact is always serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Io { path: path.display().to_string(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}
