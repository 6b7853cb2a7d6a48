//! Trace and summary CSV files.
//!
//! Trace: `iter,x0,..,x{d-1},y,incumbent,regret,fit_s,propose_s,eval_s`, one
//! row per evaluation, coordinates in raw benchmark units. `regret` is empty
//! when the optimum is unknown.
//!
//! Summary: `iter,n,median_regret,stderr_regret,median_incumbent`, one row per
//! iteration across every seed trace of a (benchmark, method) pair.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use popbo::stats::{median, standard_error};
use popbo::{Objective, RegretTrace};

use crate::config::Method;

pub fn trace_file_name(benchmark: &str, method: Method, seed: u64) -> String {
    format!("{benchmark}__{method}__seed{seed}.csv")
}

pub fn summary_file_name(benchmark: &str, method: Method) -> String {
    format!("{benchmark}__{method}__summary.csv")
}

pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    h.extend((0..dim).map(|i| format!("x{i}")));
    h.extend(["y", "incumbent", "regret", "fit_s", "propose_s", "eval_s"].map(String::from));
    h
}

/// Writes `trace` as CSV. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_trace<W: Write>(out: W, trace: &RegretTrace<f64>, objective: &dyn Objective<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(objective.dim()))?;
    for r in &trace.records {
        let mut row = vec![r.iter.to_string()];
        row.extend(objective.raw_point(&r.x).iter().map(f64::to_string));
        row.push(r.y.to_string());
        row.push(r.incumbent.to_string());
        row.push(r.regret.map(|v| v.to_string()).unwrap_or_default());
        row.extend([r.fit_s, r.propose_s, r.eval_s].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &RegretTrace<f64>, objective: &dyn Objective<f64>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(std::io::BufWriter::new(file), trace, objective)
}

/// Per-iteration columns of a trace file needed for summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceColumns {
    pub incumbent: Vec<f64>,
    pub regret: Vec<Option<f64>>,
}

pub fn read_trace<R: Read>(input: R) -> Result<TraceColumns> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).with_context(|| format!("trace lacks `{name}`"));
    let (c_iter, c_inc, c_reg) = (col("iter")?, col("incumbent")?, col("regret")?);
    let mut out = TraceColumns { incumbent: Vec::new(), regret: Vec::new() };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let iter: usize = rec[c_iter].parse()?;
        if iter != i {
            bail!("trace row {i} has iter {iter}");
        }
        out.incumbent.push(rec[c_inc].parse()?);
        let reg = &rec[c_reg];
        out.regret.push(if reg.is_empty() { None } else { Some(reg.parse()?) });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub iter: usize,
    pub n: usize,
    pub median_regret: Option<f64>,
    pub stderr_regret: Option<f64>,
    pub median_incumbent: f64,
}

/// Aggregates traces iteration by iteration. Traces may have different
/// lengths; `n` counts those that reach each iteration.
pub fn summarize_traces(traces: &[TraceColumns]) -> Vec<SummaryRow> {
    let len = traces.iter().map(|t| t.incumbent.len()).max().unwrap_or(0);
    (0..len)
        .map(|iter| {
            let live: Vec<&TraceColumns> = traces.iter().filter(|t| t.incumbent.len() > iter).collect();
            let inc: Vec<f64> = live.iter().map(|t| t.incumbent[iter]).collect();
            let reg: Option<Vec<f64>> = live.iter().map(|t| t.regret[iter]).collect();
            SummaryRow {
                iter,
                n: live.len(),
                median_regret: reg.as_deref().map(median),
                stderr_regret: reg.as_deref().map(standard_error),
                median_incumbent: median(&inc),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "n", "median_regret", "stderr_regret", "median_incumbent"])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            r.n.to_string(),
            opt(r.median_regret),
            opt(r.stderr_regret),
            r.median_incumbent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trace files in `dir` for one (benchmark, method) pair, ordered by seed.
pub fn find_traces(dir: &Path, benchmark: &str, method: Method) -> Result<Vec<(u64, PathBuf)>> {
    let prefix = format!("{benchmark}__{method}__seed");
    let mut found = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let seed = name.strip_prefix(&prefix).and_then(|s| s.strip_suffix(".csv")).and_then(|s| s.parse().ok());
        if let Some(seed) = seed {
            found.insert(seed, path);
        }
    }
    Ok(found.into_iter().collect())
}

/// Rebuilds the summary file from whatever traces are on disk and returns
/// its path.
pub fn regenerate_summary(dir: &Path, benchmark: &str, method: Method) -> Result<PathBuf> {
    let files = find_traces(dir, benchmark, method)?;
    if files.is_empty() {
        bail!("no {method} traces for {benchmark} in {}", dir.display());
    }
    let traces = files
        .iter()
        .map(|(_, p)| {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            read_trace(f).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join(summary_file_name(benchmark, method));
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_summary(std::io::BufWriter::new(file), &summarize_traces(&traces))?;
    Ok(path)
}
