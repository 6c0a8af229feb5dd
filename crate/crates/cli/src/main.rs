//! `shiftsim`: run, compare and verify compressed distributed methods.
//!
//! Exit codes: 0 converged (or all checks passed), 1 invalid input or I/O
//! failure, 2 budget exhausted before reaching `eps`, 3 diverged, 4 a
//! verification check failed.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use shiftcomp::harness::{Experiment, MonteCarloRecord, RunStatus};
use shiftcomp::verify::{self, Fault, Suite, VerifyOptions};

use config::{Method, Overrides};
use output::OutputSet;

#[derive(Parser, Debug)]
#[command(
    name = "shiftsim",
    version,
    about = "Simulator for compressed distributed gradient methods"
)]
struct Cli {
    /// Worker threads for batches of runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configured method and write trajectory.csv.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every method of a compare block on one shared problem.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also write a gnuplot script plotting error against bits.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Run a statistical check suite.
    Verify {
        /// compressors, estimators, lyapunov, reductions or all.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte-Carlo samples for mean and variance checks.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Draws per frozen state in the contraction checks.
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        /// Random states per theorem in the contraction checks.
        #[arg(long, default_value_t = 5)]
        states: usize,
        /// Inject a known bug to check that the suite catches it.
        #[arg(long, value_parser = ["rand-k-scale"])]
        fault: Option<String>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
        /// Also write verify.json to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory.
    #[arg(long, env = "SHIFTSIM_OUT", default_value = "shiftsim-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte-Carlo seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Target relative error.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    budget_bits: Option<u64>,
    #[arg(long)]
    budget_iters: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            seeds: self.seeds,
            eps: self.eps,
            budget_bits: self.budget_bits,
            budget_iters: self.budget_iters,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("cannot start the worker pool")?;
    }
    match cli.command {
        Command::Run { config, common } => cmd_run(&config, &common),
        Command::Compare {
            config,
            common,
            gnuplot,
        } => cmd_compare(&config, &common, gnuplot),
        Command::Verify {
            suite,
            seed,
            samples,
            draws,
            states,
            fault,
            json,
            out,
        } => {
            let suite: Suite = suite.parse()?;
            let opts = VerifyOptions {
                seed,
                samples,
                contraction_draws: draws,
                states,
                fault: fault.map(|_| Fault::RandKScale),
            };
            cmd_verify(suite, &opts, json, out.as_deref())
        }
    }
}

fn report_status(name: &str, record: &MonteCarloRecord, eps: f64) {
    let status = output::worst_status(&record.runs);
    let last = record
        .runs
        .iter()
        .map(|r| r.last().rel_error)
        .fold(0.0, f64::max);
    eprintln!(
        "{name}: {} over {} seed(s), worst final relative error {last:.3e} (eps {eps:.1e})",
        output::status_name(status),
        record.runs.len()
    );
}

fn add_run_files(set: &mut OutputSet, stem: &str, record: &MonteCarloRecord) {
    set.add(format!("{stem}.csv"), output::trajectory_csv(record));
    if record.runs.len() > 1 {
        set.add(format!("{stem}_envelope.csv"), output::envelope_csv(record));
    }
}

fn cmd_run(path: &Path, common: &Common) -> Result<u8> {
    let table = config::load_table(path)?;
    let cfg = config::parse_run(table, &common.overrides())?;
    let eps = cfg.eps;
    let exp = Experiment::prepare(cfg).map_err(|e| anyhow!("config error: {e}"))?;
    info!("step sizes {:?}", exp.steps);
    let record = exp.run_monte_carlo()?;
    report_status("run", &record, eps);

    let mut set = OutputSet::default();
    add_run_files(&mut set, "trajectory", &record);
    set.add(
        "summary.csv",
        format!(
            "{}\n{}",
            output::SUMMARY_HEADER,
            output::summary_line("run", &record, eps)
        ),
    );
    set.commit(&common.out)?;
    Ok(output::exit_code(output::worst_status(&record.runs)))
}

fn cmd_compare(path: &Path, common: &Common, gnuplot: bool) -> Result<u8> {
    let table = config::load_table(path)?;
    let methods = config::parse_compare(table, &common.overrides())?;
    let (problem, reference) = methods[0]
        .config
        .problem
        .build()
        .map_err(|e| anyhow!("config error at `problem`: {e}"))?;
    let experiments = methods
        .iter()
        .map(|Method { name, config }| {
            Experiment::with_problem(config.clone(), problem.clone(), reference.clone())
                .map(|e| (name.as_str(), e))
                .map_err(|e| anyhow!("config error in method {name:?}: {e}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let records = experiments
        .par_iter()
        .map(|(name, e)| e.run_monte_carlo().map(|r| (*name, e.config.eps, r)))
        .collect::<shiftcomp::Result<Vec<_>>>()?;

    let mut set = OutputSet::default();
    let mut summary = format!("{}\n", output::SUMMARY_HEADER);
    let mut csvs = Vec::new();
    let mut worst = RunStatus::Converged;
    for (name, eps, record) in &records {
        report_status(name, record, *eps);
        add_run_files(&mut set, name, record);
        csvs.push(format!("{name}.csv"));
        summary.push_str(&output::summary_line(name, record, *eps));
        let status = output::worst_status(&record.runs);
        if output::exit_code(status) > output::exit_code(worst) {
            worst = status;
        }
    }
    set.add("summary.csv", summary);
    if gnuplot {
        set.add("plot.gp", output::gnuplot_script(&csvs));
    }
    set.commit(&common.out)?;
    Ok(output::exit_code(worst))
}

fn cmd_verify(suite: Suite, opts: &VerifyOptions, json: bool, out: Option<&Path>) -> Result<u8> {
    let report = verify::run_suite(suite, opts)?;
    let rendered = serde_json::to_string_pretty(&report)? + "\n";
    if json {
        print!("{rendered}");
    } else {
        for c in &report.checks {
            println!(
                "{} [{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                c.detail
            );
        }
        let failed = report.failures().count();
        println!("{} checks, {failed} failed", report.checks.len());
    }
    if let Some(dir) = out {
        let mut set = OutputSet::default();
        set.add("verify.json", rendered);
        set.commit(dir)?;
    }
    Ok(if report.passed() { 0 } else { 4 })
}
