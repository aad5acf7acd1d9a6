//! Run configuration: a TOML file whose top-level keys are the experiment's
//! hyperparameter names. Every key is optional; missing keys take the
//! fixed-wing defaults. Unknown keys are rejected.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use hdpid::controller::{DerivativeEstimator, GainSet};
use hdpid::lmi::SolverOptions;
use hdpid::plant::{AircraftPlant, BoxBounds, PlantModel};
use hdpid::simulator::{CompensationSchedule, SimConfig};
use hdpid::tuner::{TunerOptions, DEFAULT_GAIN_BOUND};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct RunConfig {
    /// Simulation horizon in seconds.
    pub T: f64,
    pub g: f64,
    pub V: f64,
    pub gamma: f64,
    pub chi: f64,
    pub phi: f64,
    pub n_z: f64,
    pub gamma_c: f64,
    pub chi_c: f64,
    pub phi_c: f64,
    pub n_zc: f64,
    /// Full width of the uniform disturbance on `χ̇`.
    pub L_d_chi: f64,
    pub L_d_gamma: f64,
    pub K_d: Matrix2,
    pub eps_P: f64,
    pub eps_Q: f64,
    /// Bound on `‖ḋ‖₂` used for the invariant-set radius.
    pub L_ddot: f64,
    /// Bound on `‖ẍ_r − (∂f/∂x)·ẋ_r‖₂`; zero for constant references.
    pub ref_accel: f64,
    pub out: PathBuf,
    pub sim: SimSection,
    pub limits: LimitsSection,
    pub solver: SolverSection,
    pub gains: GainsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub seed: u64,
    /// `none`, `once`, `every:N` or `threshold:X`.
    pub schedule: String,
    /// Disturbance hold interval; one step when absent.
    pub hold: Option<f64>,
    pub derivative_pole: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub phi_max: f64,
    pub n_z_min: f64,
    pub n_z_max: f64,
    pub phi_rate_max: f64,
    pub n_z_rate_max: f64,
    pub roll_guard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub gain_bound: f64,
    pub tikhonov: f64,
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_newton_steps: usize,
    pub strict_margin: f64,
    pub growth: f64,
}

/// Fixed gains. When `K_p`/`K_i` are given the first stage is skipped; when
/// `dK_p`/`dK_i` are given the compensation is fixed instead of solved.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct GainsSection {
    pub K_p: Option<Matrix2>,
    pub K_i: Option<Matrix2>,
    pub dK_p: Option<Matrix2>,
    pub dK_i: Option<Matrix2>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            T: 20.0,
            g: AircraftPlant::GRAVITY,
            V: AircraftPlant::SPEED,
            gamma: FRAC_PI_4,
            chi: FRAC_PI_3,
            phi: FRAC_PI_3,
            n_z: 1.0,
            gamma_c: 0.0,
            chi_c: 0.0,
            phi_c: 0.0,
            n_zc: 0.0,
            L_d_chi: 0.5,
            L_d_gamma: 0.5,
            K_d: [[0.0; 2]; 2],
            eps_P: 1.0,
            eps_Q: 1.0,
            L_ddot: 0.0,
            ref_accel: 0.0,
            out: PathBuf::from("out"),
            sim: SimSection::default(),
            limits: LimitsSection::default(),
            solver: SolverSection::default(),
            gains: GainsSection::default(),
        }
    }
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 0.001,
            seed: 0,
            schedule: "once".into(),
            hold: None,
            derivative_pole: DerivativeEstimator::DEFAULT_POLE,
        }
    }
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            phi_max: 1.4,
            n_z_min: -4.0,
            n_z_max: 8.0,
            phi_rate_max: 20.0,
            n_z_rate_max: 20.0,
            roll_guard: AircraftPlant::ROLL_GUARD,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        Self {
            gain_bound: DEFAULT_GAIN_BOUND,
            tikhonov: s.tikhonov,
            gap_tol: s.gap_tol,
            newton_tol: s.newton_tol,
            max_newton_steps: s.max_newton_steps,
            strict_margin: s.strict_margin,
            growth: s.growth,
        }
    }
}

pub fn matrix(m: &Matrix2) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |r, c| m[r][c])
}

/// A validated configuration together with the objects built from it.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub plant: AircraftPlant,
    pub schedule: CompensationSchedule,
    pub kd: DMatrix<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn tuner_options(&self) -> TunerOptions {
        let s = &self.solver;
        TunerOptions {
            gain_bound: s.gain_bound,
            solver: SolverOptions {
                growth: s.growth,
                gap_tol: s.gap_tol,
                newton_tol: s.newton_tol,
                max_newton_steps: s.max_newton_steps,
                strict_margin: s.strict_margin,
                tikhonov: s.tikhonov,
                ..SolverOptions::default()
            },
        }
    }

    pub fn x0(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.chi, self.gamma])
    }

    pub fn u0(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.phi, self.n_z])
    }

    pub fn x_ref(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.chi_c, self.gamma_c])
    }

    pub fn u_ref(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.phi_c, self.n_zc])
    }

    /// Checks everything that can be checked without solving or simulating.
    pub fn validate(self) -> anyhow::Result<Experiment> {
        let all = [
            self.T, self.g, self.V, self.gamma, self.chi, self.phi, self.n_z, self.gamma_c, self.chi_c,
            self.phi_c, self.n_zc, self.L_d_chi, self.L_d_gamma, self.eps_P, self.eps_Q, self.L_ddot,
            self.ref_accel, self.sim.dt,
        ];
        ensure!(all.iter().all(|v| v.is_finite()), "all numeric settings must be finite");
        ensure!(self.K_d.iter().flatten().all(|v| v.is_finite()), "K_d must be finite");
        ensure!(self.eps_P > 0.0 && self.eps_Q > 0.0, "eps_P and eps_Q must be positive");
        ensure!(self.L_d_chi >= 0.0 && self.L_d_gamma >= 0.0, "disturbance bounds must be non-negative");
        ensure!(self.L_ddot >= 0.0 && self.ref_accel >= 0.0, "L_ddot and ref_accel must be non-negative");
        ensure!(self.sim.derivative_pole > 0.0, "sim.derivative_pole must be positive");
        if let Some(h) = self.sim.hold {
            ensure!(h > 0.0 && h.is_finite(), "sim.hold must be positive");
        }
        let schedule: CompensationSchedule = self.sim.schedule.parse()?;
        for (name, m) in [
            ("K_p", &self.gains.K_p),
            ("K_i", &self.gains.K_i),
            ("dK_p", &self.gains.dK_p),
            ("dK_i", &self.gains.dK_i),
        ] {
            if let Some(m) = m {
                ensure!(m.iter().flatten().all(|v| v.is_finite()), "gains.{name} must be finite");
            }
        }
        if self.gains.K_p.is_some() != self.gains.K_i.is_some() {
            bail!("gains.K_p and gains.K_i must be given together");
        }
        if self.gains.dK_p.is_some() != self.gains.dK_i.is_some() {
            bail!("gains.dK_p and gains.dK_i must be given together");
        }

        let l = &self.limits;
        let input_box = BoxBounds::new(
            DVector::from_vec(vec![-l.phi_max, l.n_z_min]),
            DVector::from_vec(vec![l.phi_max, l.n_z_max]),
        )?;
        let rate_box = BoxBounds::symmetric(&[l.phi_rate_max, l.n_z_rate_max])?;
        let plant = AircraftPlant::new(self.g, self.V)?
            .with_roll_guard(l.roll_guard)?
            .with_input_box(input_box)?
            .with_rate_box(rate_box)?
            .with_disturbance_rate_bound(self.L_ddot)?;
        ensure!(
            plant.input_box().contains(&self.u0()),
            "initial input (phi, n_z) = ({}, {}) is outside the input limits",
            self.phi,
            self.n_z
        );
        plant.eval_f(&self.x0(), &self.u0()).context("initial condition")?;
        plant.eval_f(&self.x_ref(), &self.u_ref()).context("reference point")?;
        self.sim_config(schedule)?.steps()?;

        Ok(Experiment {
            kd: matrix(&self.K_d),
            plant,
            schedule,
            config: self,
        })
    }

    pub fn sim_config(&self, schedule: CompensationSchedule) -> anyhow::Result<SimConfig> {
        Ok(SimConfig {
            t_end: self.T,
            dt: self.sim.dt,
            x0: self.x0(),
            u0: self.u0(),
            x_ref: self.x_ref(),
            u_ref: self.u_ref(),
            disturbance: vec![self.L_d_chi, self.L_d_gamma],
            hold_interval: self.sim.hold,
            seed: self.sim.seed,
            schedule,
            eps_p: self.eps_P,
            eps_q: self.eps_Q,
            tuner: self.tuner_options(),
            derivative_pole: self.sim.derivative_pole,
        })
    }
}

impl Experiment {
    /// Fixed `(K_p, K_i)` from the config, if any.
    pub fn fixed_gains(&self) -> Option<GainSet> {
        let g = &self.config.gains;
        GainSet::new(matrix(g.K_p.as_ref()?), matrix(g.K_i.as_ref()?), self.kd.clone()).ok()
    }

    /// Fixed stacked `(ΔK_p, ΔK_i)` from the config, if any.
    pub fn fixed_compensation(&self) -> Option<DMatrix<f64>> {
        let g = &self.config.gains;
        let (p, i) = (matrix(g.dK_p.as_ref()?), matrix(g.dK_i.as_ref()?));
        let mut dk = DMatrix::zeros(2, 4);
        dk.columns_mut(0, 2).copy_from(&p);
        dk.columns_mut(2, 2).copy_from(&i);
        Some(dk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        let e = c.validate().unwrap();
        assert_eq!(e.schedule, CompensationSchedule::Once);
        assert_eq!(e.config.sim_config(e.schedule).unwrap().steps().unwrap(), 20_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("gamma_cc = 1.0").is_err());
        assert!(toml::from_str::<RunConfig>("[sim]\nstep = 0.1").is_err());
    }

    #[test]
    fn table_names_are_keys() {
        let c: RunConfig = toml::from_str(
            "T = 10.0\ngamma = 0.5\nL_d_chi = 0.0\nK_d = [[0.1, 0.0], [0.0, 0.1]]\n[sim]\nschedule = \"every:100\"\n",
        )
        .unwrap();
        assert_eq!(c.T, 10.0);
        assert_eq!(c.gamma, 0.5);
        assert_eq!(c.L_d_chi, 0.0);
        assert_eq!(c.K_d[0][0], 0.1);
        assert_eq!(c.validate().unwrap().schedule, CompensationSchedule::Every(100));
    }

    #[test]
    fn invalid_values_fail_validation() {
        for text in [
            "eps_P = 0.0",
            "L_d_gamma = -1.0",
            "phi = 1.5",
            "[sim]\ndt = 0.003",
            "[sim]\nschedule = \"often\"",
            "[gains]\nK_p = [[1.0, 0.0], [0.0, 1.0]]",
        ] {
            let c: RunConfig = toml::from_str(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn fixtures_are_read() {
        let c: RunConfig = toml::from_str(
            "[gains]\nK_p = [[1.0, 0.0], [0.0, 1.0]]\nK_i = [[2.0, 0.0], [0.0, 2.0]]\ndK_p = [[0.5, 0.0], [0.0, 0.0]]\ndK_i = [[0.0, 0.0], [0.0, 0.25]]\n",
        )
        .unwrap();
        let e = c.validate().unwrap();
        let g = e.fixed_gains().unwrap();
        assert_eq!(g.ki, DMatrix::identity(2, 2) * 2.0);
        let dk = e.fixed_compensation().unwrap();
        assert_eq!(dk[(0, 0)], 0.5);
        assert_eq!(dk[(1, 3)], 0.25);
    }
}
