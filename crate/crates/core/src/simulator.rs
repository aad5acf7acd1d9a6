//! Fixed-step closed-loop simulation and linear error-system runs.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::{apply_compensation, ControllerState, DerivativeEstimator, GainSet};
use crate::error::{Error, Result};
use crate::numerics::SymMatrix;
use crate::plant::{DisturbanceSampler, PlantModel};
use crate::tuner::{self, TunerOptions, VelocityBlocks};

/// One classical Runge–Kutta step of `ẏ = f(t, y)`. `step` only labels
/// errors.
pub fn rk4_step<F>(mut f: F, y: &DVector<f64>, t: f64, dt: f64, step: usize) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let blowup = |v: &DVector<f64>| -> Result<()> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::IntegrationBlowup {
                step,
                state: y.as_slice().to_vec(),
            })
        }
    };
    let h = dt / 2.0;
    let k1 = f(t, y)?;
    blowup(&k1)?;
    let k2 = f(t + h, &(y + &k1 * h))?;
    blowup(&k2)?;
    let k3 = f(t + h, &(y + &k2 * h))?;
    blowup(&k3)?;
    let k4 = f(t + dt, &(y + &k3 * dt))?;
    blowup(&k4)?;
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    blowup(&next)?;
    Ok(next)
}

/// When the compensation `ΔK` is (re)computed during a run. Each
/// recomputation replaces the previous `ΔK`; it is always added to the base
/// gains, never accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum CompensationSchedule {
    /// Base gains throughout.
    #[default]
    None,
    /// Once, at `t = 0`.
    Once,
    /// Every `N` steps, starting at `t = 0`.
    Every(usize),
    /// Whenever `‖ẽ − ẽ_last‖₂ ≥ X`, where `ẽ_last` is the augmented error at
    /// the previous recomputation (the origin before the first).
    Threshold(f64),
}

impl fmt::Display for CompensationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::Once => write!(f, "once"),
            Self::Every(n) => write!(f, "every:{n}"),
            Self::Threshold(x) => write!(f, "threshold:{x}"),
        }
    }
}

impl FromStr for CompensationSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown schedule {s:?}; expected none, once, every:N or threshold:X"));
        match s.split_once(':') {
            None if s == "none" => Ok(Self::None),
            None if s == "once" => Ok(Self::Once),
            Some(("every", n)) => match n.parse::<usize>() {
                Ok(n) if n > 0 => Ok(Self::Every(n)),
                _ => Err(bad()),
            },
            Some(("threshold", x)) => match x.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(Self::Threshold(x)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub x0: DVector<f64>,
    pub u0: DVector<f64>,
    /// Constant reference state.
    pub x_ref: DVector<f64>,
    /// Input at which the equilibrium blocks `L1(0)`, `L2(0)` are evaluated.
    pub u_ref: DVector<f64>,
    /// Full width of the uniform disturbance on each state channel.
    pub disturbance: Vec<f64>,
    /// Sample-and-hold interval; `None` holds for one step.
    pub hold_interval: Option<f64>,
    pub seed: u64,
    pub schedule: CompensationSchedule,
    pub eps_p: f64,
    pub eps_q: f64,
    pub tuner: TunerOptions,
    /// Pole of the filter that estimates `ë` when `K_d ≠ 0`.
    pub derivative_pole: f64,
}

impl SimConfig {
    /// Number of integration steps, `T/dt`. Fails unless that ratio is an
    /// integer to within rounding.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidInput(format!(
                "need dt > 0 and T > 0, got dt = {} and T = {}",
                self.dt, self.t_end
            )));
        }
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps.max(1.0) || steps < 1.0 {
            return Err(Error::InvalidInput(format!(
                "T/dt = {ratio} is not a whole number of steps"
            )));
        }
        Ok(steps as usize)
    }

    fn validate(&self, plant: &dyn PlantModel) -> Result<usize> {
        let (n, m) = (plant.state_dim(), plant.input_dim());
        if self.x0.len() != n || self.x_ref.len() != n || self.disturbance.len() != n {
            return Err(Error::DimensionMismatch(format!("state vectors must have length {n}")));
        }
        if self.u0.len() != m || self.u_ref.len() != m {
            return Err(Error::DimensionMismatch(format!("input vectors must have length {m}")));
        }
        if !(self.eps_p > 0.0) || !(self.eps_q > 0.0) {
            return Err(Error::InvalidInput("ε_P and ε_Q must be positive".into()));
        }
        self.steps()
    }
}

/// A recomputation of `ΔK` during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationEvent {
    pub step: usize,
    pub t: f64,
    /// Stacked `(ΔK_p, ΔK_i)`.
    pub dk: DMatrix<f64>,
    pub lambda_star: f64,
}

/// Per-step records of a closed-loop run on a uniform grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub e_dot: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub u_dot: Vec<DVector<f64>>,
    pub d: Vec<DVector<f64>>,
    /// `sqrt(ẽᵀPẽ)` with `P = ε_P·I`.
    pub lyap_norm: Vec<f64>,
    pub compensations: Vec<CompensationEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Time series of one component of a vector record.
    pub fn component(records: &[DVector<f64>], index: usize) -> Vec<f64> {
        records.iter().map(|v| v[index]).collect()
    }

    /// Writes columns `t, <x>, e_<x>, de_<x>, <u>, d_<x>, lyap_norm`, one row
    /// per step.
    pub fn write_csv<W: Write>(&self, out: W, state_names: &[&str], input_names: &[&str]) -> Result<()> {
        let n = self.x.first().map_or(state_names.len(), |v| v.len());
        let m = self.u.first().map_or(input_names.len(), |v| v.len());
        if state_names.len() != n || input_names.len() != m {
            return Err(Error::DimensionMismatch("column names do not match trajectory".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(state_names.iter().map(|s| s.to_string()));
        header.extend(state_names.iter().map(|s| format!("e_{s}")));
        header.extend(state_names.iter().map(|s| format!("de_{s}")));
        header.extend(input_names.iter().map(|s| s.to_string()));
        header.extend(state_names.iter().map(|s| format!("d_{s}")));
        header.push("lyap_norm".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.t[k].to_string()];
            for series in [&self.x[k], &self.e[k], &self.e_dot[k], &self.u[k], &self.d[k]] {
                row.extend(series.iter().map(|v| v.to_string()));
            }
            row.push(self.lyap_norm[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn augmented(e_dot: &DVector<f64>, e: &DVector<f64>) -> DVector<f64> {
    let n = e.len();
    DVector::from_iterator(2 * n, e_dot.iter().chain(e.iter()).copied())
}

fn at_step(step: usize, state: &DVector<f64>) -> impl FnOnce(Error) -> Error + '_ {
    move |source| match source {
        e @ (Error::AtStep { .. } | Error::IntegrationBlowup { .. }) => e,
        e => Error::AtStep {
            step,
            state: state.as_slice().to_vec(),
            source: Box::new(e),
        },
    }
}

/// Integrates the plant `ẋ = f(x, u) + d` jointly with the velocity-form law
/// `u̇ = K_i·e + K_p·ė + K_d·ë`.
///
/// The controller is evaluated at the start of each step and its rate held
/// through the RK4 stages, as is the disturbance sample. `ė = −(f + d)` is
/// the measured error rate for a constant reference. After each step the
/// input is projected onto the plant's input box.
///
/// `base` supplies `K` and `K_d`; `ΔK` is recomputed according to the
/// schedule in `config`.
pub fn run_closed_loop(plant: &dyn PlantModel, base: &GainSet, config: &SimConfig) -> Result<Trajectory> {
    let steps = config.validate(plant)?;
    let (n, dt) = (plant.state_dim(), config.dt);
    let hold = config.hold_interval.unwrap_or(dt);
    let sampler = DisturbanceSampler::new(config.disturbance.clone(), config.seed, hold)?;
    let mut controller = ControllerState::new(
        config.u0.clone(),
        base.clone(),
        plant.input_box().clone(),
        plant.rate_box().clone(),
    )?;
    let mut estimator = DerivativeEstimator::new(n, config.derivative_pole)?;
    let base_k = base.stacked();

    let blocks_0 = match config.schedule {
        CompensationSchedule::None => None,
        _ => Some(tuner::velocity_blocks(plant, &config.x_ref, &config.u_ref, &base.kd)?),
    };
    let mut last_compensated = DVector::zeros(2 * n);

    let mut traj = Trajectory {
        dt,
        ..Default::default()
    };
    let mut x = config.x0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let snapshot = augmented(&x, &controller.u);
        let d = sampler.sample(t);
        let x_dot = plant.eval_f(&x, &controller.u).map_err(at_step(k, &snapshot))? + &d;
        let e = &config.x_ref - &x;
        let e_dot = -x_dot;
        let e_aug = augmented(&e_dot, &e);

        if let Some(blocks_0) = &blocks_0 {
            let due = match config.schedule {
                CompensationSchedule::None => false,
                CompensationSchedule::Once => k == 0,
                CompensationSchedule::Every(every) => k % every == 0,
                CompensationSchedule::Threshold(level) => (&e_aug - &last_compensated).norm() >= level,
            };
            if due && k < steps {
                let event = compensate_at(plant, blocks_0, base, &base_k, &x, &controller.u, config, k, t)
                    .map_err(at_step(k, &snapshot))?;
                let (dkp, dki) = (event.dk.columns(0, n).into_owned(), event.dk.columns(n, n).into_owned());
                controller.gains = apply_compensation(base, &dkp, &dki)?;
                traj.compensations.push(event);
                last_compensated = e_aug.clone();
            }
        }

        let e_ddot = if controller.gains.has_derivative_term() {
            estimator.update(&e_dot, dt)
        } else {
            DVector::zeros(n)
        };
        let u_dot = controller.rate(&e, &e_dot, &e_ddot)?;

        traj.t.push(t);
        traj.lyap_norm.push(config.eps_p.sqrt() * e_aug.norm());
        traj.x.push(x.clone());
        traj.e.push(e);
        traj.e_dot.push(e_dot);
        traj.u.push(controller.u.clone());
        traj.u_dot.push(u_dot.clone());
        traj.d.push(d.clone());
        if k == steps {
            break;
        }

        let joint = rk4_step(
            |_, z| {
                let (xs, us) = (z.rows(0, n).into_owned(), z.rows(n, z.len() - n).into_owned());
                let f = plant.eval_f(&xs, &us)? + &d;
                Ok(augmented(&f, &u_dot))
            },
            &snapshot,
            t,
            dt,
            k,
        )
        .map_err(at_step(k, &snapshot))?;
        x = joint.rows(0, n).into_owned();
        controller.set_input(&joint.rows(n, joint.len() - n).into_owned());
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn compensate_at(
    plant: &dyn PlantModel,
    blocks_0: &VelocityBlocks,
    base: &GainSet,
    base_k: &DMatrix<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    config: &SimConfig,
    step: usize,
    t: f64,
) -> Result<CompensationEvent> {
    let blocks_e = tuner::velocity_blocks(plant, x, u, &base.kd)?;
    let comp = tuner::compensate(&blocks_e, blocks_0, base_k, config.eps_p, config.eps_q, &config.tuner)?;
    Ok(CompensationEvent {
        step,
        t,
        dk: comp.dk,
        lambda_star: comp.lambda_star,
    })
}

/// Records of a run of the linear error system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTrajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub e: Vec<DVector<f64>>,
    /// `sqrt(eᵀPe)`.
    pub lyap_norm: Vec<f64>,
}

/// Integrates `ė = J(t)·e + d` with RK4. `d` is sampled at the start of each
/// step and held; `J` is evaluated at the stage times.
pub fn run_ltv_surrogate<J, D>(
    mut j_fn: J,
    mut d_fn: D,
    e0: &DVector<f64>,
    p: &SymMatrix,
    t_end: f64,
    dt: f64,
) -> Result<ErrorTrajectory>
where
    J: FnMut(f64) -> DMatrix<f64>,
    D: FnMut(f64) -> DVector<f64>,
{
    let n = e0.len();
    if p.dim() != n {
        return Err(Error::DimensionMismatch(format!("P is {0}×{0}, expected {n}×{n}", p.dim())));
    }
    let steps = SimConfig {
        t_end,
        dt,
        x0: DVector::zeros(0),
        u0: DVector::zeros(0),
        x_ref: DVector::zeros(0),
        u_ref: DVector::zeros(0),
        disturbance: Vec::new(),
        hold_interval: None,
        seed: 0,
        schedule: CompensationSchedule::None,
        eps_p: 1.0,
        eps_q: 1.0,
        tuner: TunerOptions::default(),
        derivative_pole: DerivativeEstimator::DEFAULT_POLE,
    }
    .steps()?;
    let p = p.as_matrix();
    let lyap = |e: &DVector<f64>| e.dot(&(p * e)).max(0.0).sqrt();

    let mut traj = ErrorTrajectory {
        dt,
        ..Default::default()
    };
    let mut e = e0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        traj.t.push(t);
        traj.lyap_norm.push(lyap(&e));
        traj.e.push(e.clone());
        if k == steps {
            break;
        }
        let d = d_fn(t);
        if d.len() != n {
            return Err(Error::DimensionMismatch(format!("disturbance has length {}, expected {n}", d.len())));
        }
        e = rk4_step(
            |s, y| {
                let j = j_fn(s);
                if j.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!("J(t) is {:?}, expected ({n}, {n})", j.shape())));
                }
                Ok(j * y + &d)
            },
            &e,
            t,
            dt,
            k,
        )?;
    }
    Ok(traj)
}
