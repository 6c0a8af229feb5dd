//! CSV rendering and atomic file output.
//!
//! Floats are written with 17 significant digits in scientific notation so
//! that they parse back to the same `f64`. Every line, including the last,
//! ends with `\n`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use shiftcomp::harness::{MonteCarloRecord, RunRecord, RunStatus};

pub const TRAJECTORY_HEADER: &str = "k,rel_error,cum_bits,lyapunov";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::BudgetExhausted => "budget_exhausted",
        RunStatus::Diverged => "diverged",
    }
}

/// Most severe status: divergence over budget exhaustion over convergence.
pub fn worst_status(runs: &[RunRecord]) -> RunStatus {
    let rank = |s: RunStatus| match s {
        RunStatus::Converged => 0,
        RunStatus::BudgetExhausted => 1,
        RunStatus::Diverged => 2,
    };
    runs.iter()
        .map(|r| r.status)
        .max_by_key(|s| rank(*s))
        .unwrap_or(RunStatus::Converged)
}

pub fn exit_code(s: RunStatus) -> u8 {
    match s {
        RunStatus::Converged => 0,
        RunStatus::BudgetExhausted => 2,
        RunStatus::Diverged => 3,
    }
}

/// Trajectory of one seed, or the seed-averaged trajectory of several.
pub fn trajectory_csv(record: &MonteCarloRecord) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    if let [run] = record.runs.as_slice() {
        for r in &run.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.k,
                float(r.rel_error),
                r.cum_bits,
                opt_float(r.lyapunov)
            );
        }
    } else {
        for r in &record.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.k,
                float(r.mean_rel_error),
                float(r.mean_bits),
                opt_float(r.mean_lyapunov)
            );
        }
    }
    out
}

/// Per-iteration spread over seeds.
pub fn envelope_csv(record: &MonteCarloRecord) -> String {
    let mut out = String::from("k,mean_rel_error,min_rel_error,max_rel_error\n");
    for r in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.k,
            float(r.mean_rel_error),
            float(r.min_rel_error),
            float(r.max_rel_error)
        );
    }
    out
}

pub const SUMMARY_HEADER: &str =
    "method,status,seeds,converged,bits_to_eps,iters_to_eps,final_rel_error,gamma";

/// One summary line. `bits_to_eps` and `iters_to_eps` are seed means and are
/// left empty unless every seed reached `eps`.
pub fn summary_line(name: &str, record: &MonteCarloRecord, eps: f64) -> String {
    let runs = &record.runs;
    let count = runs.len() as f64;
    let bits: Option<Vec<u64>> = runs.iter().map(|r| r.bits_to(eps)).collect();
    let iters: Option<Vec<u64>> = runs.iter().map(|r| r.iters_to(eps)).collect();
    let mean = |v: Vec<u64>| float(v.iter().map(|&b| b as f64).sum::<f64>() / count);
    let converged = runs
        .iter()
        .filter(|r| r.status == RunStatus::Converged)
        .count();
    let final_err = runs.iter().map(|r| r.last().rel_error).sum::<f64>() / count;
    let gamma = runs.first().map(|r| r.steps.gamma).unwrap_or(f64::NAN);
    format!(
        "{name},{},{},{converged},{},{},{},{}\n",
        status_name(worst_status(runs)),
        runs.len(),
        bits.map(mean).unwrap_or_default(),
        iters.map(mean).unwrap_or_default(),
        float(final_err),
        float(gamma)
    )
}

/// Gnuplot script drawing `log10(rel_error)` against bits for each CSV.
pub fn gnuplot_script(csv_names: &[String]) -> String {
    let mut out = String::new();
    out.push_str("set datafile separator ','\n");
    out.push_str("set key autotitle columnhead\n");
    out.push_str("set logscale y\n");
    out.push_str("set format y '10^{%L}'\n");
    out.push_str("set xlabel 'communicated bits'\n");
    out.push_str("set ylabel '|x^k - x^*|^2 / |x^0 - x^*|^2'\n");
    let plots: Vec<String> = csv_names
        .iter()
        .map(|n| {
            let title = n.trim_end_matches(".csv");
            format!("'{n}' using 3:2 with lines title '{title}'")
        })
        .collect();
    let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
    out
}

/// Files staged in memory and written together once the work is done.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Write every file through a temporary in `dir` and rename it into
    /// place, so a reader never sees a truncated file.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in self.files {
            let target = dir.join(&name);
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
            tmp.write_all(contents.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(&target)
                .with_context(|| format!("cannot write {}", target.display()))?;
            written.push(target);
        }
        Ok(written)
    }
}
