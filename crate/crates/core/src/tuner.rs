//! Gain synthesis and robustness certificates for the velocity-form error
//! system.
//!
//! With `ẽ = (ė, e)` the closed loop reads `dẽ/dt = (L1 + L2·K)·ẽ + d̃` where
//!
//! ```text
//! L1 = [ I(K_d)⁻¹·∂f/∂x   O ]      L2 = [ −I(K_d)⁻¹·∂f/∂u ]
//!      [ I                 O ]           [ O               ]
//! ```
//!
//! and `I(K_d) = I + (∂f/∂u)·K_d`. Two eigenvalue problems are solved on top
//! of these blocks: one for `K = (K_p, K_i)` at the equilibrium, and one for
//! the compensation `ΔK` at the current error. Both use `P = ε_P·I`,
//! `Q = ε_Q·I`.
//!
//! Decision vectors list the entries of `K` (or `ΔK`) row-major, followed by
//! the level variable `λ`.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::lmi::{self, LmiProblem, SolveStatus, SolverOptions, VarBound};
use crate::numerics::{lambda_max, spectral_norm, SymMatrix};
use crate::plant::PlantModel;

/// Condition number above which `I(K_d)` counts as singular.
pub const MAX_IKD_CONDITION: f64 = 1e8;

/// Default box `|yᵢ| ≤ 50` on every gain decision variable.
pub const DEFAULT_GAIN_BOUND: f64 = 50.0;

/// `L1`, `L2` and `I(K_d)⁻¹` evaluated at one `(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBlocks {
    pub ikd_inv: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
}

impl VelocityBlocks {
    pub fn states(&self) -> usize {
        self.ikd_inv.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.l2.ncols()
    }

    /// `J̃_K = L1 + L2·K` for a stacked `K` (`m × 2n`).
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_stacked(k)?;
        Ok(&self.l1 + &self.l2 * k)
    }

    fn check_stacked(&self, k: &DMatrix<f64>) -> Result<()> {
        let expected = (self.inputs(), 2 * self.states());
        if k.shape() != expected {
            return Err(Error::DimensionMismatch(format!(
                "stacked gain is {:?}, expected {:?}",
                k.shape(),
                expected
            )));
        }
        Ok(())
    }
}

pub fn velocity_blocks(
    plant: &dyn PlantModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    kd: &DMatrix<f64>,
) -> Result<VelocityBlocks> {
    let n = plant.state_dim();
    let m = plant.input_dim();
    if kd.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "K_d is {:?}, expected ({m}, {n})",
            kd.shape()
        )));
    }
    let jx = plant.jac_x(x, u)?;
    let ju = plant.jac_u(x, u)?;
    let ikd = DMatrix::identity(n, n) + &ju * kd;
    let ikd_inv = ikd
        .clone()
        .try_inverse()
        .ok_or(Error::SingularIKd { condition: f64::INFINITY })?;
    let condition = spectral_norm(&ikd)? * spectral_norm(&ikd_inv)?;
    if !(condition <= MAX_IKD_CONDITION) {
        return Err(Error::SingularIKd { condition });
    }

    let mut l1 = DMatrix::zeros(2 * n, 2 * n);
    l1.view_mut((0, 0), (n, n)).copy_from(&(&ikd_inv * jx));
    l1.view_mut((n, 0), (n, n)).fill_with_identity();
    let mut l2 = DMatrix::zeros(2 * n, m);
    l2.view_mut((0, 0), (n, m)).copy_from(&(-(&ikd_inv * ju)));
    Ok(VelocityBlocks {
        ikd_inv,
        l1,
        l2,
        x: x.clone(),
        u: u.clone(),
    })
}

/// `X + Xᵀ`.
fn sym2(x: &DMatrix<f64>) -> DMatrix<f64> {
    x + x.transpose()
}

/// Unit `m × 2n` matrix for the decision variable at `index` (row-major).
fn unit_gain(m: usize, cols: usize, index: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(m, cols);
    e[(index / cols, index % cols)] = 1.0;
    e
}

fn gain_bounds(count: usize, gain_bound: f64) -> Result<Vec<VarBound>> {
    let mut bounds = vec![VarBound::symmetric(gain_bound)?; count];
    bounds.push(VarBound::FREE);
    Ok(bounds)
}

fn level_objective(gain_vars: usize) -> DVector<f64> {
    let mut c = DVector::zeros(gain_vars + 1);
    c[gain_vars] = 1.0;
    c
}

/// `L_K = L1 + L1ᵀ + L2·K + Kᵀ·L2ᵀ`.
pub fn lk_matrix(blocks: &VelocityBlocks, k: &DMatrix<f64>) -> Result<SymMatrix> {
    blocks.check_stacked(k)?;
    Ok(SymMatrix::symmetrize(sym2(&blocks.l1) + sym2(&(&blocks.l2 * k))))
}

/// `min λ  s.t.  L_K ⪯ λ·I` over `(K, λ)`, gains boxed by `gain_bound`.
pub fn assemble_evp1(blocks: &VelocityBlocks, gain_bound: f64) -> Result<LmiProblem> {
    let (n2, m) = (2 * blocks.states(), blocks.inputs());
    let vars = m * n2;
    let constant = SymMatrix::symmetrize(sym2(&blocks.l1));
    let mut coefficients: Vec<SymMatrix> = (0..vars)
        .map(|i| SymMatrix::symmetrize(sym2(&(&blocks.l2 * unit_gain(m, n2, i)))))
        .collect();
    coefficients.push(SymMatrix::identity(n2).scaled(-1.0));
    LmiProblem::new(level_objective(vars), constant, coefficients)?
        .with_bounds(gain_bounds(vars, gain_bound)?)
}

/// Bounded-real form of the first stage:
///
/// ```text
/// min λ  s.t.  [ L_K   O     I/ε_P ]
///              [ O    −λI    O     ]  ≺ 0
///              [ I/ε_P O    −λI    ]
/// ```
///
/// The strict inequality is imposed as `⪯ −strict_margin·I`.
pub fn assemble_evp1_hinf(
    blocks: &VelocityBlocks,
    eps_p: f64,
    gain_bound: f64,
    strict_margin: f64,
) -> Result<LmiProblem> {
    if !(eps_p > 0.0) {
        return Err(Error::InvalidInput(format!("ε_P must be positive, got {eps_p}")));
    }
    let (n2, m) = (2 * blocks.states(), blocks.inputs());
    let vars = m * n2;
    let dim = 3 * n2;
    let embed = |top_left: &DMatrix<f64>| {
        let mut g = DMatrix::zeros(dim, dim);
        g.view_mut((0, 0), (n2, n2)).copy_from(top_left);
        g
    };

    let mut constant = embed(&sym2(&blocks.l1));
    let coupling = DMatrix::<f64>::identity(n2, n2) / eps_p;
    constant.view_mut((0, 2 * n2), (n2, n2)).copy_from(&coupling);
    constant.view_mut((2 * n2, 0), (n2, n2)).copy_from(&coupling);
    constant += DMatrix::<f64>::identity(dim, dim) * strict_margin;

    let mut coefficients: Vec<SymMatrix> = (0..vars)
        .map(|i| SymMatrix::symmetrize(embed(&sym2(&(&blocks.l2 * unit_gain(m, n2, i))))))
        .collect();
    let mut level = DMatrix::zeros(dim, dim);
    level.view_mut((n2, n2), (2 * n2, 2 * n2)).fill_with_identity();
    coefficients.push(SymMatrix::symmetrize(-level));

    LmiProblem::new(level_objective(vars), SymMatrix::symmetrize(constant), coefficients)?
        .with_bounds(gain_bounds(vars, gain_bound)?)
}

/// Second stage over `(ΔK, λ)`:
///
/// ```text
/// min λ  s.t.  ε_P·[sym(L2(ẽ)·ΔK) + sym(ΔL2·K) + sym(ΔL1)] − ε_Q·I ⪯ λ·I
/// ```
///
/// with `ΔL1 = L1(ẽ) − L1(0)`, `ΔL2 = L2(ẽ) − L2(0)` and `sym(X) = X + Xᵀ`.
pub fn assemble_evp2(
    blocks_e: &VelocityBlocks,
    blocks_0: &VelocityBlocks,
    k: &DMatrix<f64>,
    eps_p: f64,
    eps_q: f64,
    gain_bound: f64,
) -> Result<LmiProblem> {
    check_eps(eps_p, eps_q)?;
    check_pair(blocks_e, blocks_0)?;
    blocks_e.check_stacked(k)?;
    let (n2, m) = (2 * blocks_e.states(), blocks_e.inputs());
    let vars = m * n2;
    let constant = SymMatrix::symmetrize(
        increment_terms(blocks_e, blocks_0, k) * eps_p - DMatrix::identity(n2, n2) * eps_q,
    );
    let mut coefficients: Vec<SymMatrix> = (0..vars)
        .map(|i| SymMatrix::symmetrize(sym2(&(&blocks_e.l2 * unit_gain(m, n2, i))) * eps_p))
        .collect();
    coefficients.push(SymMatrix::identity(n2).scaled(-1.0));
    LmiProblem::new(level_objective(vars), constant, coefficients)?
        .with_bounds(gain_bounds(vars, gain_bound)?)
}

/// `sym(ΔL2·K) + sym(ΔL1)`.
fn increment_terms(blocks_e: &VelocityBlocks, blocks_0: &VelocityBlocks, k: &DMatrix<f64>) -> DMatrix<f64> {
    let dl1 = &blocks_e.l1 - &blocks_0.l1;
    let dl2 = &blocks_e.l2 - &blocks_0.l2;
    sym2(&(dl2 * k)) + sym2(&dl1)
}

fn check_eps(eps_p: f64, eps_q: f64) -> Result<()> {
    if !(eps_p > 0.0) || !(eps_q > 0.0) || !eps_p.is_finite() || !eps_q.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ε_P and ε_Q must be positive, got {eps_p} and {eps_q}"
        )));
    }
    Ok(())
}

fn check_pair(a: &VelocityBlocks, b: &VelocityBlocks) -> Result<()> {
    if a.l1.shape() != b.l1.shape() || a.l2.shape() != b.l2.shape() {
        return Err(Error::DimensionMismatch("velocity blocks have different shapes".into()));
    }
    Ok(())
}

/// Splits the leading `m·2n` entries of `y` into the proportional (first `n`
/// columns) and integral (last `n` columns) parts. A trailing level variable
/// is ignored.
pub fn extract_gains(y: &DVector<f64>, m: usize, n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let count = 2 * m * n;
    if y.len() != count && y.len() != count + 1 {
        return Err(Error::DimensionMismatch(format!(
            "decision vector has length {}, expected {count} or {}",
            y.len(),
            count + 1
        )));
    }
    let k = DMatrix::from_row_slice(m, 2 * n, &y.as_slice()[..count]);
    Ok((k.columns(0, n).into_owned(), k.columns(n, n).into_owned()))
}

/// Inverse of [`extract_gains`] (without the level variable).
pub fn pack_gains(proportional: &DMatrix<f64>, integral: &DMatrix<f64>) -> Result<DVector<f64>> {
    if proportional.shape() != integral.shape() {
        return Err(Error::DimensionMismatch("proportional and integral parts differ in shape".into()));
    }
    let (m, n) = proportional.shape();
    let mut y = DVector::zeros(2 * m * n);
    for r in 0..m {
        for c in 0..n {
            y[r * 2 * n + c] = proportional[(r, c)];
            y[r * 2 * n + n + c] = integral[(r, c)];
        }
    }
    Ok(y)
}

/// `‖I(K_d)⁻¹‖₂·(L_ḋ + ref_accel)`, the bound on the augmented disturbance.
pub fn disturbance_bound(blocks: &VelocityBlocks, l_ddot: f64, ref_accel: f64) -> Result<f64> {
    Ok(spectral_norm(&blocks.ikd_inv)? * (l_ddot + ref_accel))
}

/// Radius `η(τ) = 2·L_d̃·ε_P^{3/2}/τ` of the invariant set for `P = ε_P·I`.
pub fn eta_bound(l_dtilde: f64, eps_p: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("τ must be positive, got {tau}")));
    }
    if !(eps_p > 0.0) {
        return Err(Error::InvalidInput(format!("ε_P must be positive, got {eps_p}")));
    }
    Ok(2.0 * l_dtilde * eps_p.powf(1.5) / tau)
}

/// `η(τ) = 2·L_d·λ_max(P)²/(τ·λ_min(P)^{1/2})` for a general `P ≻ 0`.
pub fn eta_bound_general(l_d: f64, p: &SymMatrix, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("τ must be positive, got {tau}")));
    }
    let eig = crate::numerics::sym_eig(p)?;
    if !(eig.min() > 0.0) {
        return Err(Error::InvalidInput("P must be positive definite".into()));
    }
    Ok(2.0 * l_d * eig.max().powi(2) / (tau * eig.min().sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// Largest eigenvalue of the tested matrix; `≤ 0` means the condition holds.
    pub margin: f64,
}

/// Robust-stability condition for the compensated gain at `ẽ`:
///
/// ```text
/// λ_max( sym(L2(ẽ)·ΔK) + sym(ΔL2·K) + sym(ΔL1) + ((τ − ε_Q)/ε_P)·I ) ≤ 0
/// ```
#[allow(clippy::too_many_arguments)]
pub fn check_thm3_condition(
    blocks_e: &VelocityBlocks,
    blocks_0: &VelocityBlocks,
    k: &DMatrix<f64>,
    dk: &DMatrix<f64>,
    eps_p: f64,
    eps_q: f64,
    tau: f64,
) -> Result<ConditionCheck> {
    check_eps(eps_p, eps_q)?;
    check_pair(blocks_e, blocks_0)?;
    blocks_e.check_stacked(k)?;
    blocks_e.check_stacked(dk)?;
    let n2 = 2 * blocks_e.states();
    let m = sym2(&(&blocks_e.l2 * dk))
        + increment_terms(blocks_e, blocks_0, k)
        + DMatrix::identity(n2, n2) * ((tau - eps_q) / eps_p);
    let margin = lambda_max(&SymMatrix::symmetrize(m))?;
    Ok(ConditionCheck {
        holds: margin <= 0.0,
        margin,
    })
}

/// Equilibrium exponential-stability condition
/// `λ_max(L_K(0) + (ε_Q/ε_P)·I) ≤ 0`.
pub fn check_origin_condition(
    blocks_0: &VelocityBlocks,
    k: &DMatrix<f64>,
    eps_p: f64,
    eps_q: f64,
) -> Result<ConditionCheck> {
    check_eps(eps_p, eps_q)?;
    let lk = lk_matrix(blocks_0, k)?;
    let margin = lambda_max(&lk)? + eps_q / eps_p;
    Ok(ConditionCheck {
        holds: margin <= 0.0,
        margin,
    })
}

/// Eigenvalues of a general real square matrix (real Schur form).
pub fn eigenvalues(j: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !j.is_square() {
        return Err(Error::DimensionMismatch(format!("matrix is {:?}, expected square", j.shape())));
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(j.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("real Schur iteration did not converge".into()))?;
    let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eigs)
}

/// Spectral abscissa `max Re λ(J)`; negative means `J` is Hurwitz.
pub fn hurwitz_check(j: &DMatrix<f64>) -> Result<f64> {
    eigenvalues(j)?
        .iter()
        .map(|z| z.re)
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidInput("empty matrix".into()))
}

/// Comparison bound `β/α + (V0^{1/2} − β/α)·e^{−αt/2}` on `V^{1/2}(t)` for
/// `V̇ ≤ −αV + βV^{1/2}`.
pub fn lemma3_bound(v0: f64, alpha: f64, beta: f64, t: f64) -> f64 {
    debug_assert!(v0 >= 0.0 && alpha > 0.0 && beta >= 0.0 && t >= 0.0);
    let floor = beta / alpha;
    floor + (v0.sqrt() - floor) * (-alpha * t / 2.0).exp()
}

/// `P = ε_P·I`, `Q = ε_Q·I`, decay margin `τ` and augmented disturbance bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateParams {
    pub eps_p: f64,
    pub eps_q: f64,
    pub tau: f64,
    pub l_dtilde: f64,
}

impl CertificateParams {
    pub fn new(eps_p: f64, eps_q: f64, tau: f64, l_dtilde: f64) -> Result<Self> {
        check_eps(eps_p, eps_q)?;
        if !(tau > 0.0) || !(l_dtilde >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "τ must be positive and L_d̃ non-negative, got {tau} and {l_dtilde}"
            )));
        }
        Ok(Self {
            eps_p,
            eps_q,
            tau,
            l_dtilde,
        })
    }

    pub fn eta(&self) -> f64 {
        2.0 * self.l_dtilde * self.eps_p.powf(1.5) / self.tau
    }

    /// Exponential rate `τ/(2·λ_max(P))` of `sqrt(ẽᵀPẽ)` toward `η`.
    pub fn decay_rate(&self) -> f64 {
        self.tau / (2.0 * self.eps_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerOptions {
    pub gain_bound: f64,
    pub solver: SolverOptions,
}

impl Default for TunerOptions {
    fn default() -> Self {
        Self {
            gain_bound: DEFAULT_GAIN_BOUND,
            solver: SolverOptions::default(),
        }
    }
}

/// Output of the first stage.
#[derive(Debug, Clone)]
pub struct TuningResult {
    /// Stacked `K = (K_p, K_i)`, `m × 2n`.
    pub k: DMatrix<f64>,
    pub lambda_star: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Largest eigenvalue of the constraint matrix at the returned point. For
    /// an infeasible problem this is the best level phase I reached.
    pub constraint_level: f64,
    /// `max Re λ(L1(0) + L2(0)·K)`, computed by the Schur route.
    pub spectral_abscissa: f64,
}

impl TuningResult {
    pub fn gains(&self, kd: &DMatrix<f64>) -> Result<GainSet> {
        GainSet::from_stacked(&self.k, kd.clone())
    }
}

/// Which first-stage problem to solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstStage {
    Eigenvalue,
    /// Bounded-real variant with the given `ε_P`.
    HInfinity { eps_p: f64 },
}

/// Solves the first stage at the equilibrium blocks.
pub fn tune(blocks_0: &VelocityBlocks, stage: FirstStage, opts: &TunerOptions) -> Result<TuningResult> {
    let problem = match stage {
        FirstStage::Eigenvalue => assemble_evp1(blocks_0, opts.gain_bound)?,
        FirstStage::HInfinity { eps_p } => {
            assemble_evp1_hinf(blocks_0, eps_p, opts.gain_bound, opts.solver.strict_margin)?
        }
    };
    let sol = lmi::solve(&problem, &opts.solver)?;
    let (kp, ki) = extract_gains(&sol.y, blocks_0.inputs(), blocks_0.states())?;
    let k = GainSet::new(kp, ki, DMatrix::zeros(blocks_0.inputs(), blocks_0.states()))?.stacked();
    let spectral_abscissa = hurwitz_check(&blocks_0.closed_loop(&k)?)?;
    Ok(TuningResult {
        lambda_star: sol.y[sol.y.len() - 1],
        status: sol.status,
        iterations: sol.iterations,
        constraint_level: sol.max_eig_at_solution,
        spectral_abscissa,
        k,
    })
}

/// Output of the second stage.
#[derive(Debug, Clone)]
pub struct Compensation {
    /// Stacked `ΔK = (ΔK_p, ΔK_i)`.
    pub dk: DMatrix<f64>,
    pub lambda_star: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl Compensation {
    /// `τ = −λ*`, the decay margin certified by the optimum.
    pub fn tau(&self) -> f64 {
        -self.lambda_star
    }

    pub fn split(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dk.ncols() / 2;
        (self.dk.columns(0, n).into_owned(), self.dk.columns(n, n).into_owned())
    }
}

/// Solves the second stage for `ΔK` given `K` and the two block sets.
pub fn compensate(
    blocks_e: &VelocityBlocks,
    blocks_0: &VelocityBlocks,
    k: &DMatrix<f64>,
    eps_p: f64,
    eps_q: f64,
    opts: &TunerOptions,
) -> Result<Compensation> {
    let problem = assemble_evp2(blocks_e, blocks_0, k, eps_p, eps_q, opts.gain_bound)?;
    let sol = lmi::solve(&problem, &opts.solver)?;
    let (dkp, dki) = extract_gains(&sol.y, blocks_e.inputs(), blocks_e.states())?;
    let dk = GainSet::new(dkp, dki, DMatrix::zeros(blocks_e.inputs(), blocks_e.states()))?.stacked();
    Ok(Compensation {
        lambda_star: sol.y[sol.y.len() - 1],
        status: sol.status,
        iterations: sol.iterations,
        dk,
    })
}
