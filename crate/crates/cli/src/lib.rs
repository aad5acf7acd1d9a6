//! Command-line front end for the `hdpid` tuning pipeline.

pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use hdpid::simulator::CompensationSchedule;

use config::{Experiment, RunConfig};
use pipeline::{EigenListing, SeedResult, INPUT_NAMES, STATE_NAMES};

#[derive(Debug, Parser)]
#[command(name = "hdpid", version, about = "Matrix-gain PID tuning, compensation and closed-loop evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Disturbance seed (first seed for `compare`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also solve the bounded-real first stage (`tune` only).
    #[arg(long, global = true)]
    pub hinf: bool,
    /// Compensation schedule: none, once, every:N or threshold:X.
    #[arg(long, global = true)]
    pub schedule: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for `compare`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for K at the equilibrium and write tune.json.
    Tune,
    /// Simulate with K and with K+ΔK; write trajectories, metrics, eigenvalues and report.json.
    Run,
    /// Compare K against K+ΔK over a range of seeds; write compare.csv.
    Compare {
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Write the eigenvalues of the linearized closed loop under K and K+ΔK.
    Eigs,
}

/// Distinguishes bad input (exit code 2) from failures while computing
/// (exit code 1).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0:#}")]
    Config(anyhow::Error),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

/// Loads and validates the configuration with command-line overrides.
pub fn load_experiment(cli: &Cli) -> anyhow::Result<Experiment> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.sim.seed = seed;
    }
    if let Some(s) = &cli.schedule {
        s.parse::<CompensationSchedule>()?;
        config.sim.schedule = s.clone();
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if cli.jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    config.validate()
}

type Outputs = Vec<(&'static str, Vec<u8>)>;

/// Runs one subcommand and returns the text printed on standard output.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let exp = load_experiment(cli).map_err(CliError::Config)?;
    let (outputs, summary) = compute(cli, &exp).map_err(CliError::Runtime)?;
    write_outputs(&exp.config.out, &outputs).map_err(CliError::Runtime)?;
    Ok(summary)
}

fn compute(cli: &Cli, exp: &Experiment) -> anyhow::Result<(Outputs, String)> {
    match &cli.command {
        Command::Tune => {
            let tuned = pipeline::tune(exp, cli.hinf)?;
            let json = serde_json::to_vec_pretty(&tuned.report)?;
            let summary = format!(
                "K_p = {:?}\nK_i = {:?}\nlambda* = {:.6e} ({})\nspectral abscissa = {:.6e}\n{}",
                tuned.report.K_p,
                tuned.report.K_i,
                tuned.result.lambda_star,
                tuned.report.evp.status,
                tuned.result.spectral_abscissa,
                tuned
                    .report
                    .hinf
                    .as_ref()
                    .map_or(String::new(), |h| format!("bounded-real stage: {}\n", h.status)),
            );
            Ok((vec![("tune.json", json)], summary))
        }
        Command::Run => {
            let prep = pipeline::prepare(exp)?;
            let out = pipeline::run_pair(exp, &prep, exp.config.sim.seed)?;
            let mut baseline = Vec::new();
            out.baseline.write_csv(&mut baseline, &STATE_NAMES, &INPUT_NAMES)?;
            let mut compensated = Vec::new();
            out.compensated.write_csv(&mut compensated, &STATE_NAMES, &INPUT_NAMES)?;
            let mut metrics = Vec::new();
            out.metrics.write_csv(&mut metrics)?;
            let summary = format!(
                "{}\nabscissa K = {:.6e}, K+dK = {:.6e}\n",
                out.metrics, out.report.abscissa_K, out.report.abscissa_KdK
            );
            Ok((
                vec![
                    ("run_K.csv", baseline),
                    ("run_KdK.csv", compensated),
                    ("metrics.csv", metrics),
                    ("eigs.csv", eigs_csv(&out.eigs)?),
                    ("report.json", serde_json::to_vec_pretty(&out.report)?),
                ],
                summary,
            ))
        }
        Command::Compare { seeds } => {
            let prep = pipeline::prepare(exp)?;
            let first = exp.config.sim.seed;
            let list: Vec<u64> = (first..first + seeds).collect();
            let results = match cli.jobs {
                Some(jobs) => rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()?
                    .install(|| pipeline::sweep(exp, &prep, &list))?,
                None => pipeline::sweep(exp, &prep, &list)?,
            };
            Ok((vec![("compare.csv", compare_csv(&results)?)], compare_summary(&results)))
        }
        Command::Eigs => {
            let prep = pipeline::prepare(exp)?;
            let eigs = pipeline::eigen_listing(exp, &prep)?;
            let summary = format!(
                "abscissa K = {:.6e}, K+dK = {:.6e}\n",
                EigenListing::abscissa(&eigs.k),
                EigenListing::abscissa(&eigs.k_dk)
            );
            Ok((vec![("eigs.csv", eigs_csv(&eigs)?)], summary))
        }
    }
}

fn write_outputs(dir: &Path, outputs: &Outputs) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, bytes) in outputs {
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn eigs_csv(eigs: &EigenListing) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["gains", "re", "im"])?;
    for (label, pairs) in [("K", &eigs.k), ("K+dK", &eigs.k_dk)] {
        for [re, im] in pairs {
            w.write_record([label, &re.to_string(), &im.to_string()])?;
        }
    }
    Ok(w.into_inner()?)
}

fn compare_csv(results: &[SeedResult]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "channel", "metric", "baseline", "compensated", "ratio"])?;
    for r in results {
        for c in &r.metrics.channels {
            for (metric, b, p, q) in [
                ("ITAE", c.baseline.itae, c.compensated.itae, c.ratio.itae),
                ("PT", c.baseline.peak_time, c.compensated.peak_time, c.ratio.peak_time),
                ("MO", c.baseline.max_overshoot, c.compensated.max_overshoot, c.ratio.max_overshoot),
            ] {
                w.write_record([
                    r.seed.to_string(),
                    c.channel.clone(),
                    metric.to_string(),
                    b.to_string(),
                    p.to_string(),
                    q.to_string(),
                ])?;
            }
        }
    }
    Ok(w.into_inner()?)
}

fn compare_summary(results: &[SeedResult]) -> String {
    let mut text = format!("{} seeds; seeds where K+dK is strictly lower:\n", results.len());
    text.push_str(&format!("{:<10} {:>6} {:>6}\n", "channel", "ITAE", "MO"));
    let channels = results.first().map_or(&[][..], |r| &r.metrics.channels[..]);
    for (i, ch) in channels.iter().enumerate() {
        let count = |pick: fn(&hdpid::metrics::ChannelComparison) -> bool| {
            results.iter().filter(|r| pick(&r.metrics.channels[i])).count()
        };
        text.push_str(&format!(
            "{:<10} {:>6} {:>6}\n",
            ch.channel,
            count(|c| c.compensated.itae < c.baseline.itae),
            count(|c| c.compensated.max_overshoot < c.baseline.max_overshoot),
        ));
    }
    text
}
