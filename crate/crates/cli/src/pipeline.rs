//! The tune → compensate → simulate → report pipeline behind each
//! subcommand. Functions here compute; writing files is left to
//! [`crate::write_outputs`] so that nothing is written when a step fails.

use anyhow::{bail, Context};
use hdpid::controller::{apply_compensation, GainSet};
use hdpid::lmi::SolveStatus;
use hdpid::metrics::{compare_report, ComparisonReport};
use hdpid::plant::PlantModel;
use hdpid::simulator::{run_closed_loop, CompensationSchedule, Trajectory};
use hdpid::tuner::{self, FirstStage, TuningResult, VelocityBlocks};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Experiment;

pub const STATE_NAMES: [&str; 2] = ["chi", "gamma"];
pub const INPUT_NAMES: [&str; 2] = ["phi", "nz"];

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "Optimal",
        SolveStatus::Infeasible => "Infeasible",
        SolveStatus::MaxIterations => "MaxIterations",
    }
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct StageReport {
    pub status: &'static str,
    pub lambda_star: Option<f64>,
    pub constraint_level: f64,
    pub iterations: usize,
}

impl StageReport {
    fn of(r: &TuningResult) -> Self {
        Self {
            status: status_name(r.status),
            lambda_star: (r.status != SolveStatus::Infeasible).then_some(r.lambda_star),
            constraint_level: r.constraint_level,
            iterations: r.iterations,
        }
    }
}

/// Contents of `tune.json`.
#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct TuneReport {
    pub K_p: Vec<Vec<f64>>,
    pub K_i: Vec<Vec<f64>>,
    pub K_d: Vec<Vec<f64>>,
    pub evp: StageReport,
    /// `max Re λ(J̃_K(0))`.
    pub spectral_abscissa: f64,
    /// `[re, im]` pairs, ascending by real part.
    pub eigenvalues: Vec<[f64; 2]>,
    /// `λ_max(L_K(0)) + ε_Q/ε_P`; the exponential-stability LMI holds when `≤ 0`.
    pub origin_condition_margin: f64,
    pub eps_P: f64,
    pub eps_Q: f64,
    /// Present when the bounded-real variant was requested.
    pub hinf: Option<StageReport>,
}

pub struct Tuned {
    pub gains: GainSet,
    pub result: TuningResult,
    pub report: TuneReport,
}

pub fn origin_blocks(exp: &Experiment) -> anyhow::Result<VelocityBlocks> {
    let c = &exp.config;
    tuner::velocity_blocks(&exp.plant, &c.x_ref(), &c.u_ref(), &exp.kd).context("equilibrium blocks")
}

fn eig_pairs(j: &DMatrix<f64>) -> anyhow::Result<Vec<[f64; 2]>> {
    Ok(tuner::eigenvalues(j)?.iter().map(|z| [z.re, z.im]).collect())
}

/// First stage at the equilibrium. Fails when the eigenvalue problem has no
/// strictly feasible point; the bounded-real variant only reports.
pub fn tune(exp: &Experiment, hinf: bool) -> anyhow::Result<Tuned> {
    let c = &exp.config;
    let opts = c.tuner_options();
    let blocks = origin_blocks(exp)?;
    let result = tuner::tune(&blocks, FirstStage::Eigenvalue, &opts)?;
    if result.status == SolveStatus::Infeasible {
        bail!(
            "gain synthesis is infeasible (best constraint level {:.6e})",
            result.constraint_level
        );
    }
    let hinf = if hinf {
        let r = tuner::tune(&blocks, FirstStage::HInfinity { eps_p: c.eps_P }, &opts)?;
        Some(StageReport::of(&r))
    } else {
        None
    };
    let gains = result.gains(&exp.kd)?;
    let origin = tuner::check_origin_condition(&blocks, &result.k, c.eps_P, c.eps_Q)?;
    let report = TuneReport {
        K_p: rows(&gains.kp),
        K_i: rows(&gains.ki),
        K_d: rows(&gains.kd),
        evp: StageReport::of(&result),
        spectral_abscissa: result.spectral_abscissa,
        eigenvalues: eig_pairs(&blocks.closed_loop(&result.k)?)?,
        origin_condition_margin: origin.margin,
        eps_P: c.eps_P,
        eps_Q: c.eps_Q,
        hinf,
    };
    Ok(Tuned { gains, result, report })
}

/// Base gains `K`: fixed in the config or tuned.
pub fn base_gains(exp: &Experiment) -> anyhow::Result<(GainSet, Option<TuneReport>)> {
    match exp.fixed_gains() {
        Some(g) => Ok((g, None)),
        None => {
            let t = tune(exp, false)?;
            Ok((t.gains, Some(t.report)))
        }
    }
}

/// Robustness certificate for a compensation applied at the initial state.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Largest `τ` for which the robust-stability LMI holds with this `ΔK`.
    pub tau: f64,
    /// Bound on the augmented disturbance at the initial state.
    pub l_dtilde: f64,
    /// Invariant-set radius `η(τ)`; absent when `τ ≤ 0`.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct CompensationReport {
    pub source: &'static str,
    /// Stacked `ΔK` in force at `t = 0`.
    pub dK_p: Vec<Vec<f64>>,
    pub dK_i: Vec<Vec<f64>>,
    pub lambda_star: Option<f64>,
    pub recomputations: usize,
    pub certificate: Certificate,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct RunReport {
    pub seed: u64,
    pub schedule: String,
    pub gains_source: &'static str,
    pub K_p: Vec<Vec<f64>>,
    pub K_i: Vec<Vec<f64>>,
    pub K_d: Vec<Vec<f64>>,
    pub tuning: Option<TuneReport>,
    pub compensation: CompensationReport,
    pub abscissa_K: f64,
    pub abscissa_KdK: f64,
}

/// Eigenvalues of `J̃(0)` under `K` and `K + ΔK`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenListing {
    pub k: Vec<[f64; 2]>,
    pub k_dk: Vec<[f64; 2]>,
}

impl EigenListing {
    pub fn abscissa(pairs: &[[f64; 2]]) -> f64 {
        pairs.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub struct RunOutput {
    pub baseline: Trajectory,
    pub compensated: Trajectory,
    pub metrics: ComparisonReport,
    pub eigs: EigenListing,
    pub report: RunReport,
}

/// Gains and compensation shared by every seed of an experiment.
pub struct Prepared {
    pub base: GainSet,
    pub tuning: Option<TuneReport>,
    /// Fixed `ΔK`, if the config supplies one.
    pub fixed_dk: Option<DMatrix<f64>>,
}

pub fn prepare(exp: &Experiment) -> anyhow::Result<Prepared> {
    let (base, tuning) = base_gains(exp)?;
    Ok(Prepared {
        base,
        tuning,
        fixed_dk: exp.fixed_compensation(),
    })
}

fn split(dk: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (dk.columns(0, 2).into_owned(), dk.columns(2, 2).into_owned())
}

/// Baseline and compensated runs for one seed.
pub fn run_pair(exp: &Experiment, prep: &Prepared, seed: u64) -> anyhow::Result<RunOutput> {
    let c = &exp.config;
    let mut sim = c.sim_config(CompensationSchedule::None)?;
    sim.seed = seed;
    let baseline = run_closed_loop(&exp.plant, &prep.base, &sim).context("uncompensated run")?;

    let (compensated, dk, lambda_star, source) = match &prep.fixed_dk {
        Some(dk) => {
            let (p, i) = split(dk);
            let gains = apply_compensation(&prep.base, &p, &i)?;
            let traj = run_closed_loop(&exp.plant, &gains, &sim).context("compensated run")?;
            (traj, dk.clone(), None, "fixed")
        }
        None => {
            sim.schedule = exp.schedule;
            let traj = run_closed_loop(&exp.plant, &prep.base, &sim).context("compensated run")?;
            let first = traj.compensations.first().filter(|e| e.step == 0);
            let dk = first.map_or_else(|| DMatrix::zeros(2, 4), |e| e.dk.clone());
            let lambda = first.map(|e| e.lambda_star);
            (traj, dk, lambda, "solved")
        }
    };

    let metrics = compare_report(&baseline, &compensated, &STATE_NAMES)?;
    let blocks_0 = origin_blocks(exp)?;
    let k = prep.base.stacked();
    let k_dk = &k + &dk;
    let eigs = EigenListing {
        k: eig_pairs(&blocks_0.closed_loop(&k)?)?,
        k_dk: eig_pairs(&blocks_0.closed_loop(&k_dk)?)?,
    };

    let blocks_e = tuner::velocity_blocks(&exp.plant, &c.x0(), &c.u0(), &exp.kd).context("initial-state blocks")?;
    let at_eps_q = tuner::check_thm3_condition(&blocks_e, &blocks_0, &k, &dk, c.eps_P, c.eps_Q, c.eps_Q)?;
    let tau = c.eps_Q - c.eps_P * at_eps_q.margin;
    let l_dtilde = tuner::disturbance_bound(&blocks_e, exp.plant.disturbance_rate_bound(), c.ref_accel)?;
    let eta = (tau > 0.0).then(|| tuner::eta_bound(l_dtilde, c.eps_P, tau)).transpose()?;

    let (dkp, dki) = split(&dk);
    let report = RunReport {
        seed,
        schedule: match source {
            "fixed" => "fixed".into(),
            _ => exp.schedule.to_string(),
        },
        gains_source: if prep.tuning.is_some() { "tuned" } else { "fixed" },
        K_p: rows(&prep.base.kp),
        K_i: rows(&prep.base.ki),
        K_d: rows(&prep.base.kd),
        tuning: prep.tuning.clone(),
        compensation: CompensationReport {
            source,
            dK_p: rows(&dkp),
            dK_i: rows(&dki),
            lambda_star,
            recomputations: compensated.compensations.len(),
            certificate: Certificate { tau, l_dtilde, eta },
        },
        abscissa_K: EigenListing::abscissa(&eigs.k),
        abscissa_KdK: EigenListing::abscissa(&eigs.k_dk),
    };
    Ok(RunOutput {
        baseline,
        compensated,
        metrics,
        eigs,
        report,
    })
}

/// Eigenvalue listing without simulating: `ΔK` is fixed or solved once at
/// the initial state.
pub fn eigen_listing(exp: &Experiment, prep: &Prepared) -> anyhow::Result<EigenListing> {
    let c = &exp.config;
    let blocks_0 = origin_blocks(exp)?;
    let k = prep.base.stacked();
    let dk = match &prep.fixed_dk {
        Some(dk) => dk.clone(),
        None if exp.schedule == CompensationSchedule::None => DMatrix::zeros(2, 4),
        None => {
            let blocks_e = tuner::velocity_blocks(&exp.plant, &c.x0(), &c.u0(), &exp.kd)?;
            tuner::compensate(&blocks_e, &blocks_0, &k, c.eps_P, c.eps_Q, &c.tuner_options())?.dk
        }
    };
    Ok(EigenListing {
        k: eig_pairs(&blocks_0.closed_loop(&k)?)?,
        k_dk: eig_pairs(&blocks_0.closed_loop(&(&k + dk))?)?,
    })
}

/// Per-seed comparison, for the `compare` subcommand.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: ComparisonReport,
    pub final_error: Vec<f64>,
}

pub fn sweep(exp: &Experiment, prep: &Prepared, seeds: &[u64]) -> anyhow::Result<Vec<SeedResult>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let out = run_pair(exp, prep, seed).with_context(|| format!("seed {seed}"))?;
            Ok(SeedResult {
                seed,
                final_error: out.compensated.e.last().map_or_else(Vec::new, |e| e.iter().copied().collect()),
                metrics: out.metrics,
            })
        })
        .collect()
}
