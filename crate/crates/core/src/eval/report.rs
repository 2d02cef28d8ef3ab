//! Results tables: machine-readable CSV plus markdown and aligned text
//! summaries with one row per pair and one column per system.

use std::fs;
use std::path::{Path, PathBuf};

use super::benchmark::{BenchmarkResults, RunResult};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 7] =
    ["source", "target", "system", "seed", "accuracy", "best_epoch", "config_hash"];
pub const WELCH_HEADER: [&str; 7] =
    ["source", "target", "system", "baseline", "t_statistic", "degrees_of_freedom", "p_value_one_tailed"];

/// p-value below which a cell is marked with `*`.
pub const SIGNIFICANCE: f64 = 0.05;

pub fn results_csv(runs: &[RunResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER)?;
    for r in runs {
        w.write_record([
            r.source.clone(),
            r.target.clone(),
            r.system.to_string(),
            r.seed.to_string(),
            r.target_accuracy.to_string(),
            r.best_epoch.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_results_csv(text: &str) -> Result<Vec<RunResult>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Parse {
            path: PathBuf::from("results.csv"),
            line: 1,
            msg: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| Error::Parse { path: PathBuf::from("results.csv"), line: i + 2, msg };
        let num = |k: usize| rec[k].parse::<u64>().map_err(|e| bad(format!("{}: {e}", RESULTS_HEADER[k])));
        out.push(RunResult {
            source: rec[0].to_string(),
            target: rec[1].to_string(),
            system: rec[2].parse()?,
            seed: num(3)?,
            target_accuracy: rec[4].parse().map_err(|e| bad(format!("accuracy: {e}")))?,
            best_epoch: num(5)? as usize,
            config_hash: rec[6].to_string(),
        });
    }
    Ok(out)
}

pub fn welch_csv(results: &BenchmarkResults) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(WELCH_HEADER)?;
    for c in &results.comparisons {
        let stats = match &c.welch {
            Some(r) => [
                r.t_statistic.to_string(),
                r.degrees_of_freedom.to_string(),
                r.p_value_one_tailed.to_string(),
            ],
            None => ["NA".into(), "NA".into(), "NA".into()],
        };
        let mut row = vec![c.source.clone(), c.target.clone(), c.system.to_string(), c.baseline.to_string()];
        row.extend(stats);
        w.write_record(row)?;
    }
    finish(w)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Summary grid as strings: header, pair rows, averages row.
fn grid(results: &BenchmarkResults) -> Vec<Vec<String>> {
    let systems = &results.systems;
    let mut rows = Vec::new();
    let mut header = vec!["pair".to_string()];
    header.extend(systems.iter().map(|s| s.to_string()));
    rows.push(header);
    for (s, t) in results.pairs() {
        let mut row = vec![format!("{s}->{t}")];
        for &sys in systems {
            let cell = match mean(&results.accuracies(&s, &t, sys)) {
                Some(m) => {
                    let sig = results
                        .comparison(&s, &t, sys)
                        .and_then(|c| c.welch)
                        .is_some_and(|w| w.p_value_one_tailed < SIGNIFICANCE);
                    format!("{m:.3}{}", if sig { "*" } else { "" })
                }
                None => "-".into(),
            };
            row.push(cell);
        }
        rows.push(row);
    }
    let mut ave = vec!["Ave.".to_string()];
    ave.extend(systems.iter().map(|&sys| match results.mean_accuracy(sys) {
        Some(m) => format!("{m:.3}"),
        None => "-".into(),
    }));
    rows.push(ave);
    rows
}

fn footnote(results: &BenchmarkResults) -> Option<String> {
    results.baseline.map(|b| {
        format!("* one-tailed Welch p < {SIGNIFICANCE} against {b} over seeds for that pair")
    })
}

pub fn summary_markdown(results: &BenchmarkResults) -> String {
    let rows = grid(results);
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
        if i == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(row.len())));
        }
    }
    if let Some(note) = footnote(results) {
        out.push('\n');
        out.push_str(&note);
        out.push('\n');
    }
    out
}

pub fn summary_text(results: &BenchmarkResults) -> String {
    let rows = grid(results);
    let ncol = rows[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    if let Some(note) = footnote(results) {
        out.push_str(&note);
        out.push('\n');
    }
    out
}

/// Writes `results.csv`, `welch.csv`, `summary.md` and `summary.txt`
/// under `dir`, plus `pivot_overlap.txt` when given. Returns the paths.
pub fn emit_report(results: &BenchmarkResults, dir: &Path, overlap: Option<&str>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("results.csv", results_csv(&results.runs)?),
        ("welch.csv", welch_csv(results)?),
        ("summary.md", summary_markdown(results)),
        ("summary.txt", summary_text(results)),
    ];
    if let Some(text) = overlap {
        files.push(("pivot_overlap.txt", text.to_string()));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
