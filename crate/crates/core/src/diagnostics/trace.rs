use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRecord {
    pub iteration: u64,
    /// Seconds since the start of the run.
    pub wall_time: f64,
    pub log_likelihood: f64,
    pub sparsity_nw: f64,
    pub sparsity_nd: f64,
    pub tokens_per_sec: f64,
    pub inner_loop_count: u64,
    pub word_accept_rate: Option<f64>,
    pub doc_accept_rate: Option<f64>,
    pub prop_zeros: Option<f64>,
}

/// Per-iteration trace of a chain.
///
/// The main CSV holds only the columns that are a function of
/// `(config, seed, workers)`; wall-clock columns go to a separate timing
/// file so that traces of repeated runs compare byte for byte.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    header: Vec<(String, String)>,
    records: Vec<TraceRecord>,
}

const COLUMNS: [&str; 8] = [
    "iteration",
    "log_likelihood",
    "sparsity_nw",
    "sparsity_nd",
    "inner_loop_count",
    "word_accept_rate",
    "doc_accept_rate",
    "prop_zeros",
];

const TIMING_COLUMNS: [&str; 3] = ["iteration", "wall_time", "tokens_per_sec"];

impl RunTrace {
    pub fn new() -> Self {
        RunTrace::default()
    }

    /// Adds a `# key: value` header line. Values must be single-line.
    pub fn set_header(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        debug_assert!(!value.contains('\n'));
        match self.header.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.header.push((key.to_string(), value)),
        }
    }

    pub fn header(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, rec: TraceRecord) -> Result<()> {
        if let Some(prev) = self.records.last() {
            if rec.iteration <= prev.iteration {
                return Err(Error::State(format!(
                    "trace iteration {} does not follow {}",
                    rec.iteration, prev.iteration
                )));
            }
            if rec.wall_time < prev.wall_time {
                return Err(Error::State(format!(
                    "wall time went backwards at iteration {}",
                    rec.iteration
                )));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_likelihood).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.header {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.log_likelihood.to_string(),
                r.sparsity_nw.to_string(),
                r.sparsity_nd.to_string(),
                r.inner_loop_count.to_string(),
                opt(r.word_accept_rate),
                opt(r.doc_accept_rate),
                opt(r.prop_zeros),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TIMING_COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:.6}", r.wall_time),
                format!("{:.1}", r.tokens_per_sec),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the trace to `path` and the timing columns next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let tpath = timing_path(path);
        let f = std::fs::File::create(&tpath).map_err(|e| Error::io(&tpath, e))?;
        self.write_timing_csv(std::io::BufWriter::new(f))
    }

    /// Parses a trace written by [`RunTrace::write_csv`]. Timing columns are
    /// left at zero.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut trace = RunTrace::new();
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| Error::Format(format!("malformed header line: {line}")))?;
                trace.header.push((k.to_string(), v.to_string()));
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        if rdr.headers()?.iter().ne(COLUMNS) {
            return Err(Error::Format("unexpected trace columns".into()));
        }
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad number {:?} in column {}", &rec[i], COLUMNS[i])))
            };
            let int = |i: usize| -> Result<u64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad integer {:?} in column {}", &rec[i], COLUMNS[i])))
            };
            let maybe = |i: usize| -> Result<Option<f64>> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            trace.records.push(TraceRecord {
                iteration: int(0)?,
                log_likelihood: num(1)?,
                sparsity_nw: num(2)?,
                sparsity_nd: num(3)?,
                inner_loop_count: int(4)?,
                word_accept_rate: maybe(5)?,
                doc_accept_rate: maybe(6)?,
                prop_zeros: maybe(7)?,
                ..TraceRecord::default()
            });
        }
        Ok(trace)
    }
}

/// `trace.csv` → `trace.timing.csv`.
pub fn timing_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.timing.{}", ext.to_string_lossy()),
        None => format!("{stem}.timing"),
    };
    path.with_file_name(name)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
