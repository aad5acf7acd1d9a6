//! Velocity-form matrix-gain PID: `u̇ = K_i·e + K_p·ė + K_d·ë`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plant::BoxBounds;

/// The three `m × n` gain matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub kp: DMatrix<f64>,
    pub ki: DMatrix<f64>,
    pub kd: DMatrix<f64>,
}

impl GainSet {
    pub fn new(kp: DMatrix<f64>, ki: DMatrix<f64>, kd: DMatrix<f64>) -> Result<Self> {
        let shape = kp.shape();
        if ki.shape() != shape || kd.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "gain shapes differ: K_p {:?}, K_i {:?}, K_d {:?}",
                shape,
                ki.shape(),
                kd.shape()
            )));
        }
        if kp.iter().chain(ki.iter()).chain(kd.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("gains must be finite".into()));
        }
        Ok(Self { kp, ki, kd })
    }

    pub fn zeros(inputs: usize, states: usize) -> Self {
        Self {
            kp: DMatrix::zeros(inputs, states),
            ki: DMatrix::zeros(inputs, states),
            kd: DMatrix::zeros(inputs, states),
        }
    }

    /// Builds gains from the stacked `K = (K_p, K_i)` (`m × 2n`).
    pub fn from_stacked(k: &DMatrix<f64>, kd: DMatrix<f64>) -> Result<Self> {
        let n = kd.ncols();
        if k.nrows() != kd.nrows() || k.ncols() != 2 * n {
            return Err(Error::DimensionMismatch(format!(
                "stacked gain is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                kd.nrows(),
                2 * n
            )));
        }
        Self::new(
            k.columns(0, n).into_owned(),
            k.columns(n, n).into_owned(),
            kd,
        )
    }

    /// `K = (K_p, K_i)`, `m × 2n`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (m, n) = self.kp.shape();
        let mut k = DMatrix::zeros(m, 2 * n);
        k.columns_mut(0, n).copy_from(&self.kp);
        k.columns_mut(n, n).copy_from(&self.ki);
        k
    }

    pub fn inputs(&self) -> usize {
        self.kp.nrows()
    }

    pub fn states(&self) -> usize {
        self.kp.ncols()
    }

    pub fn has_derivative_term(&self) -> bool {
        self.kd.iter().any(|v| *v != 0.0)
    }
}

/// Unclamped `u̇ = K_i·e + K_p·ė + K_d·ë`.
pub fn control_rate(
    gains: &GainSet,
    e: &DVector<f64>,
    e_dot: &DVector<f64>,
    e_ddot: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = gains.states();
    if e.len() != n || e_dot.len() != n || e_ddot.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "error vectors must have length {n}, got {}, {}, {}",
            e.len(),
            e_dot.len(),
            e_ddot.len()
        )));
    }
    Ok(&gains.ki * e + &gains.kp * e_dot + &gains.kd * e_ddot)
}

pub fn clamp_rate(raw: &DVector<f64>, rate_box: &BoxBounds) -> DVector<f64> {
    rate_box.clamp(raw)
}

/// Returns `(K_p + ΔK_p, K_i + ΔK_i, K_d)`.
pub fn apply_compensation(
    gains: &GainSet,
    delta_kp: &DMatrix<f64>,
    delta_ki: &DMatrix<f64>,
) -> Result<GainSet> {
    let shape = gains.kp.shape();
    if delta_kp.shape() != shape || delta_ki.shape() != shape {
        return Err(Error::DimensionMismatch(format!(
            "compensation shapes {:?}/{:?} do not match gains {:?}",
            delta_kp.shape(),
            delta_ki.shape(),
            shape
        )));
    }
    GainSet::new(
        &gains.kp + delta_kp,
        &gains.ki + delta_ki,
        gains.kd.clone(),
    )
}

/// Estimates `ë` from successive `ė` samples by backward difference through a
/// single-pole low-pass filter.
#[derive(Debug, Clone)]
pub struct DerivativeEstimator {
    pole: f64,
    previous: Option<DVector<f64>>,
    filtered: DVector<f64>,
}

impl DerivativeEstimator {
    pub const DEFAULT_POLE: f64 = 20.0;

    pub fn new(dim: usize, pole: f64) -> Result<Self> {
        if !(pole > 0.0) {
            return Err(Error::InvalidInput(format!("filter pole must be positive, got {pole}")));
        }
        Ok(Self {
            pole,
            previous: None,
            filtered: DVector::zeros(dim),
        })
    }

    pub fn update(&mut self, e_dot: &DVector<f64>, dt: f64) -> DVector<f64> {
        if let Some(prev) = &self.previous {
            let raw = (e_dot - prev) / dt;
            // exact discretization of ẏ = pole·(raw − y) over one step
            let a = (-self.pole * dt).exp();
            self.filtered = &self.filtered * a + raw * (1.0 - a);
        }
        self.previous = Some(e_dot.clone());
        self.filtered.clone()
    }
}

/// Controller state of one simulation run: the current input and the gains
/// in force.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub u: DVector<f64>,
    pub gains: GainSet,
    input_box: BoxBounds,
    rate_box: BoxBounds,
}

impl ControllerState {
    /// Fails if `u` lies outside the input box.
    pub fn new(u: DVector<f64>, gains: GainSet, input_box: BoxBounds, rate_box: BoxBounds) -> Result<Self> {
        if u.len() != gains.inputs() || input_box.dim() != u.len() || rate_box.dim() != u.len() {
            return Err(Error::DimensionMismatch("controller input dimensions disagree".into()));
        }
        if !input_box.contains(&u) {
            return Err(Error::InvalidInput(format!(
                "initial input {:?} is outside the input box",
                u.as_slice()
            )));
        }
        Ok(Self {
            u,
            gains,
            input_box,
            rate_box,
        })
    }

    /// Rate-clamped `u̇` for the current gains.
    pub fn rate(&self, e: &DVector<f64>, e_dot: &DVector<f64>, e_ddot: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(clamp_rate(&control_rate(&self.gains, e, e_dot, e_ddot)?, &self.rate_box))
    }

    /// Accepts an integrated input, projecting it onto the input box.
    pub fn set_input(&mut self, u: &DVector<f64>) {
        self.u = self.input_box.clamp(u);
    }

    pub fn input_box(&self) -> &BoxBounds {
        &self.input_box
    }

    pub fn rate_box(&self) -> &BoxBounds {
        &self.rate_box
    }
}
