//! Plant interface `ẋ = f(x, u) + d`, the fixed-wing kinematic model and the
//! bounded disturbance source.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Componentwise box `lower ≤ v ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxBounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "box has {} lower and {} upper entries",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidInput("box bounds must satisfy lower ≤ upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn symmetric(radius: &[f64]) -> Result<Self> {
        let upper = DVector::from_column_slice(radius);
        Self::new(-upper.clone(), upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn clamp(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(x, (l, u))| x.clamp(*l, *u)),
        )
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }
}

/// Nonlinear MIMO plant `ẋ = f(x, u) + d` with `n` states and `m` inputs.
pub trait PlantModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// Nominal derivative `f(x, u)`.
    fn eval_f(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
    /// `∂f/∂xᵀ`, `n × n`.
    fn jac_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// `∂f/∂uᵀ`, `n × m`.
    fn jac_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn input_box(&self) -> &BoxBounds;
    fn rate_box(&self) -> &BoxBounds;

    /// Bound `L_ḋ` on `‖ḋ‖₂` used by the invariant-set certificate.
    fn disturbance_rate_bound(&self) -> f64;

    /// An input with `f(x, u) = 0`, if the plant knows one.
    fn equilibrium_input(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

/// Fixed-wing kinematics in azimuth `χ` and climb angle `γ`:
///
/// ```text
/// χ̇ = g·tan φ / V
/// γ̇ = g·(n_z·cos φ − cos γ) / V
/// ```
///
/// State `x = (χ, γ)`, input `u = (φ, n_z)` with roll angle `φ` and load
/// factor `n_z`. The airspeed `V` is held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftPlant {
    gravity: f64,
    speed: f64,
    roll_guard: f64,
    input_box: BoxBounds,
    rate_box: BoxBounds,
    ddot_bound: f64,
}

impl AircraftPlant {
    pub const GRAVITY: f64 = 9.81;
    pub const SPEED: f64 = 25.0;
    pub const ROLL_GUARD: f64 = 1e-3;

    pub fn new(gravity: f64, speed: f64) -> Result<Self> {
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(Error::InvalidInput(format!("airspeed must be positive, got {speed}")));
        }
        if !gravity.is_finite() {
            return Err(Error::InvalidInput("gravity must be finite".into()));
        }
        Ok(Self {
            gravity,
            speed,
            roll_guard: Self::ROLL_GUARD,
            input_box: BoxBounds::new(
                DVector::from_vec(vec![-1.4, -4.0]),
                DVector::from_vec(vec![1.4, 8.0]),
            )?,
            rate_box: BoxBounds::symmetric(&[20.0, 20.0])?,
            ddot_bound: 0.0,
        })
    }

    pub fn with_roll_guard(mut self, guard: f64) -> Result<Self> {
        if !(guard > 0.0 && guard < FRAC_PI_2) {
            return Err(Error::InvalidInput(format!("roll guard must be in (0, π/2), got {guard}")));
        }
        self.roll_guard = guard;
        Ok(self)
    }

    pub fn with_input_box(mut self, input_box: BoxBounds) -> Result<Self> {
        if input_box.dim() != 2 {
            return Err(Error::DimensionMismatch("aircraft input box must have 2 entries".into()));
        }
        let limit = FRAC_PI_2 - self.roll_guard;
        if input_box.lower()[0] <= -limit || input_box.upper()[0] >= limit {
            return Err(Error::InvalidInput(format!(
                "roll box must lie strictly inside ±{limit}"
            )));
        }
        self.input_box = input_box;
        Ok(self)
    }

    pub fn with_rate_box(mut self, rate_box: BoxBounds) -> Result<Self> {
        if rate_box.dim() != 2 {
            return Err(Error::DimensionMismatch("aircraft rate box must have 2 entries".into()));
        }
        self.rate_box = rate_box;
        Ok(self)
    }

    pub fn with_disturbance_rate_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidInput(format!("L_ddot must be finite and ≥ 0, got {bound}")));
        }
        self.ddot_bound = bound;
        Ok(self)
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    fn check(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(f64, f64, f64)> {
        if x.len() != 2 || u.len() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "aircraft expects x ∈ R², u ∈ R², got {} and {}",
                x.len(),
                u.len()
            )));
        }
        let (gamma, phi, nz) = (x[1], u[0], u[1]);
        let limit = FRAC_PI_2 - self.roll_guard;
        if !phi.is_finite() || phi.abs() >= limit {
            return Err(Error::NearSingularInput { value: phi, limit });
        }
        Ok((gamma, phi, nz))
    }
}

impl Default for AircraftPlant {
    fn default() -> Self {
        Self::new(Self::GRAVITY, Self::SPEED).expect("default aircraft parameters are valid")
    }
}

impl PlantModel for AircraftPlant {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn eval_f(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (gamma, phi, nz) = self.check(x, u)?;
        let k = self.gravity / self.speed;
        Ok(DVector::from_vec(vec![
            k * phi.tan(),
            k * (nz * phi.cos() - gamma.cos()),
        ]))
    }

    fn jac_x(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (gamma, _, _) = self.check(x, u)?;
        let k = self.gravity / self.speed;
        Ok(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, k * gamma.sin()]))
    }

    fn jac_u(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (_, phi, nz) = self.check(x, u)?;
        let k = self.gravity / self.speed;
        let c = phi.cos();
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[k / (c * c), 0.0, -k * nz * phi.sin(), k * c],
        ))
    }

    fn input_box(&self) -> &BoxBounds {
        &self.input_box
    }

    fn rate_box(&self) -> &BoxBounds {
        &self.rate_box
    }

    fn disturbance_rate_bound(&self) -> f64 {
        self.ddot_bound
    }

    /// Wings level with `n_z = cos γ`.
    fn equilibrium_input(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        (x.len() == 2).then(|| DVector::from_vec(vec![0.0, x[1].cos()]))
    }
}

/// Piecewise-constant uniform noise: component `i` is drawn from
/// `U(−amplitude[i]/2, amplitude[i]/2)` and held for `hold_interval` seconds.
///
/// Samples come from a ChaCha8 stream keyed by `seed` and positioned by the
/// hold index, so any `(seed, t)` maps to the same vector on every platform
/// and in any query order.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSampler {
    amplitude: Vec<f64>,
    seed: u64,
    hold_interval: f64,
}

impl DisturbanceSampler {
    pub fn new(amplitude: Vec<f64>, seed: u64, hold_interval: f64) -> Result<Self> {
        if amplitude.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput("disturbance amplitudes must be finite and ≥ 0".into()));
        }
        if !(hold_interval > 0.0) || !hold_interval.is_finite() {
            return Err(Error::InvalidInput(format!(
                "hold interval must be positive, got {hold_interval}"
            )));
        }
        Ok(Self {
            amplitude,
            seed,
            hold_interval,
        })
    }

    /// Same amplitude on each of `dim` channels.
    pub fn uniform(dim: usize, amplitude: f64, seed: u64, hold_interval: f64) -> Result<Self> {
        Self::new(vec![amplitude; dim], seed, hold_interval)
    }

    pub fn dim(&self) -> usize {
        self.amplitude.len()
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn hold_interval(&self) -> f64 {
        self.hold_interval
    }

    /// Hold index containing time `t`. A relative slack absorbs the rounding
    /// in `k·Δt / Δt`.
    pub fn hold_index(&self, t: f64) -> u64 {
        let r = t / self.hold_interval;
        (r + 1e-9 * r.abs().max(1.0)).floor().max(0.0) as u64
    }

    pub fn sample(&self, t: f64) -> DVector<f64> {
        self.sample_at_index(self.hold_index(t))
    }

    pub fn sample_at_index(&self, index: u64) -> DVector<f64> {
        let n = self.amplitude.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // each f64 consumes two 32-bit words
        rng.set_word_pos(u128::from(index) * 2 * n as u128);
        DVector::from_iterator(
            n,
            self.amplitude.iter().map(|a| {
                let unit: f64 = rng.random();
                a * (unit - 0.5)
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn eval_f_examples() {
        let p = AircraftPlant::default();
        let f = p.eval_f(&v2(0.0, 0.0), &v2(0.0, 1.0)).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 0.0]);

        let f = p.eval_f(&v2(0.0, 0.0), &v2(0.0, 2.0)).unwrap();
        assert_eq!(f[0], 0.0);
        assert_relative_eq!(f[1], 0.3924, epsilon = 1e-12);

        let f = p.eval_f(&v2(0.0, FRAC_PI_4), &v2(FRAC_PI_3, 1.0)).unwrap();
        assert!((f[0] - 0.679657).abs() < 1e-6);
        assert!((f[1] - -0.08127).abs() < 1e-5);
    }

    #[test]
    fn singular_roll_is_rejected() {
        let p = AircraftPlant::default();
        let near = FRAC_PI_2 - 1e-4;
        assert!(matches!(
            p.eval_f(&v2(0.0, 0.0), &v2(near, 1.0)),
            Err(Error::NearSingularInput { .. })
        ));
        assert!(p.jac_u(&v2(0.0, 0.0), &v2(-near, 1.0)).is_err());
        assert!(p.jac_x(&v2(0.0, 0.0), &v2(FRAC_PI_2, 1.0)).is_err());
    }

    #[test]
    fn jac_x_examples() {
        let p = AircraftPlant::default();
        let j = p.jac_x(&v2(0.0, 0.0), &v2(0.0, 1.0)).unwrap();
        assert_eq!(j, DMatrix::zeros(2, 2));
        let j = p.jac_x(&v2(0.0, FRAC_PI_4), &v2(0.0, 1.0)).unwrap();
        assert!((j[(1, 1)] - 0.27747).abs() < 1e-5);
        let j = p.jac_x(&v2(0.0, FRAC_PI_2), &v2(0.0, 1.0)).unwrap();
        assert_relative_eq!(j[(1, 1)], 0.3924, epsilon = 1e-12);
    }

    #[test]
    fn jac_u_examples() {
        let p = AircraftPlant::default();
        let j = p.jac_u(&v2(0.0, 0.0), &v2(0.0, 3.0)).unwrap();
        assert_relative_eq!(j, DMatrix::identity(2, 2) * 0.3924, epsilon = 1e-12);
        let j = p.jac_u(&v2(0.0, 0.0), &v2(FRAC_PI_3, 1.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.5696, 0.0, -0.339828, 0.19620]);
        assert!((j - expected).amax() < 1e-5);
    }

    #[test]
    fn level_flight_is_equilibrium() {
        let p = AircraftPlant::default();
        let x = v2(0.3, 0.0);
        let u = p.equilibrium_input(&x).unwrap();
        assert_eq!(p.eval_f(&x, &u).unwrap(), DVector::zeros(2));
    }

    fn central_difference_jacobians(
        p: &AircraftPlant,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = 1e-6;
        let mut jx = DMatrix::zeros(2, 2);
        let mut ju = DMatrix::zeros(2, 2);
        for k in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (p.eval_f(&xp, u).unwrap() - p.eval_f(&xm, u).unwrap()) / (2.0 * h);
            jx.set_column(k, &col);
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let col = (p.eval_f(x, &up).unwrap() - p.eval_f(x, &um).unwrap()) / (2.0 * h);
            ju.set_column(k, &col);
        }
        (jx, ju)
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobians_match_finite_differences(
            chi in -3.0f64..3.0,
            gamma in -1.5f64..1.5,
            phi in -1.3f64..1.3,
            nz in -3.0f64..6.0,
        ) {
            let p = AircraftPlant::default();
            let (x, u) = (v2(chi, gamma), v2(phi, nz));
            let (jx_fd, ju_fd) = central_difference_jacobians(&p, &x, &u);
            prop_assert!(rel_err(&p.jac_x(&x, &u).unwrap(), &jx_fd) <= 1e-5);
            prop_assert!(rel_err(&p.jac_u(&x, &u).unwrap(), &ju_fd) <= 1e-5);
        }

        #[test]
        fn disturbance_is_deterministic_and_bounded(seed in any::<u64>(), t in 0.0f64..100.0) {
            let s = DisturbanceSampler::uniform(2, 0.5, seed, 1e-3).unwrap();
            let a = s.sample(t);
            prop_assert_eq!(&a, &s.sample(t));
            prop_assert!(a.iter().all(|v| v.abs() <= 0.25));
        }
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let s = DisturbanceSampler::uniform(2, 0.0, 7, 1e-3).unwrap();
        for k in 0..100 {
            assert_eq!(s.sample(k as f64 * 0.37), DVector::zeros(2));
        }
    }

    #[test]
    fn disturbance_holds_within_interval() {
        let s = DisturbanceSampler::uniform(2, 0.5, 3, 0.1).unwrap();
        assert_eq!(s.sample(0.30), s.sample(0.35));
        assert_eq!(s.sample(0.3), s.sample_at_index(3));
        assert_ne!(s.sample(0.35), s.sample(0.45));
    }

    #[test]
    fn disturbance_statistics() {
        let l = 0.5;
        let s = DisturbanceSampler::uniform(2, l, 42, 1e-3).unwrap();
        let n = 100_000u64;
        let mut sum = DVector::<f64>::zeros(2);
        let mut max_abs = 0.0f64;
        for k in 0..n {
            let d = s.sample_at_index(k);
            max_abs = max_abs.max(d.amax());
            sum += d;
        }
        let mean = sum / n as f64;
        assert!(mean.amax() <= 0.01 * l, "mean {mean}");
        assert!(max_abs <= l / 2.0);
    }
}
