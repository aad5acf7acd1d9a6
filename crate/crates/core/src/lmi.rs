//! Interior-point solver for single-block linear matrix inequality problems.
//!
//! Problems have the form
//!
//! ```text
//! minimize    cᵀy
//! subject to  G(y) = G0 + Σ yᵢ·Gᵢ ⪯ 0
//!             loᵢ ≤ yᵢ ≤ hiᵢ          (optional, per variable)
//! ```
//!
//! and are solved by log-det barrier path following: for increasing `t`
//! the function `t·(cᵀy + ρ‖y‖²) − log det(−G(y)) − Σ log(box slacks)` is
//! minimized with damped Newton steps. The small Tikhonov term `ρ‖y‖²`
//! selects a small-norm point when the optimal set is not a singleton.
//! A strictly feasible start comes from a phase-I problem
//! `min s  s.t.  G(y) ⪯ s·I` solved with the same machinery.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_inverse, cholesky_solve, lambda_max, SymMatrix};

/// Box on one decision variable. Either side may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBound {
    pub lo: f64,
    pub hi: f64,
}

impl VarBound {
    pub const FREE: VarBound = VarBound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "variable bound requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(radius: f64) -> Result<Self> {
        Self::new(-radius, radius)
    }

    fn contains_strictly(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    fn finite_sides(&self) -> usize {
        usize::from(self.lo.is_finite()) + usize::from(self.hi.is_finite())
    }

    /// A strictly interior starting value, preferring zero.
    fn interior_start(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            _ if self.contains_strictly(0.0) => 0.0,
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }
}

/// `min cᵀy  s.t.  G0 + Σ yᵢGᵢ ⪯ 0`, with optional variable boxes.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    objective: DVector<f64>,
    constant: SymMatrix,
    coefficients: Vec<SymMatrix>,
    bounds: Vec<VarBound>,
}

impl LmiProblem {
    pub fn new(
        objective: DVector<f64>,
        constant: SymMatrix,
        coefficients: Vec<SymMatrix>,
    ) -> Result<Self> {
        if objective.len() != coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} objective entries for {} coefficient blocks",
                objective.len(),
                coefficients.len()
            )));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("objective has non-finite entries".into()));
        }
        let dim = constant.dim();
        if let Some(bad) = coefficients.iter().position(|g| g.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient block {bad} is {0}x{0}, constant block is {dim}x{dim}",
                coefficients[bad].dim()
            )));
        }
        let bounds = vec![VarBound::FREE; coefficients.len()];
        Ok(Self {
            objective,
            constant,
            coefficients,
            bounds,
        })
    }

    pub fn with_bounds(mut self, bounds: Vec<VarBound>) -> Result<Self> {
        if bounds.len() != self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {} variables",
                bounds.len(),
                self.num_vars()
            )));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn with_bound(mut self, index: usize, bound: VarBound) -> Result<Self> {
        if index >= self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "bound index {index} out of range for {} variables",
                self.num_vars()
            )));
        }
        self.bounds[index] = bound;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.coefficients.len()
    }

    /// Side length of the constraint block.
    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn objective(&self) -> &DVector<f64> {
        &self.objective
    }

    pub fn constant(&self) -> &SymMatrix {
        &self.constant
    }

    pub fn coefficients(&self) -> &[SymMatrix] {
        &self.coefficients
    }

    pub fn bounds(&self) -> &[VarBound] {
        &self.bounds
    }

    /// `G(y)`.
    pub fn matrix_at(&self, y: &DVector<f64>) -> Result<SymMatrix> {
        self.check_len(y)?;
        let mut g = self.constant.as_matrix().clone();
        for (yi, gi) in y.iter().zip(&self.coefficients) {
            g += gi.as_matrix() * *yi;
        }
        Ok(SymMatrix::symmetrize(g))
    }

    pub fn objective_at(&self, y: &DVector<f64>) -> f64 {
        self.objective.dot(y)
    }

    fn check_len(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "decision vector has length {}, problem has {} variables",
                y.len(),
                self.num_vars()
            )));
        }
        Ok(())
    }

    /// Barrier parameter: one per block row plus one per finite box side.
    fn barrier_order(&self) -> f64 {
        (self.dim() + self.bounds.iter().map(VarBound::finite_sides).sum::<usize>()) as f64
    }

    fn inside_box(&self, y: &DVector<f64>) -> bool {
        y.iter()
            .zip(&self.bounds)
            .all(|(v, b)| b.contains_strictly(*v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Factor by which `t` grows between centering passes.
    pub growth: f64,
    /// Stop once the barrier duality-gap bound `ν/t` falls below this.
    pub gap_tol: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    /// Newton steps allowed in the main phase (phase I has its own budget of
    /// the same size).
    pub max_newton_steps: usize,
    /// Phase I must reach `λ_max(G(y)) ≤ −strict_margin`.
    pub strict_margin: f64,
    /// Weight `ρ` of the `ρ‖y‖²` tie-break term.
    pub tikhonov: f64,
    pub initial_t: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            growth: 10.0,
            gap_tol: 1e-6,
            newton_tol: 1e-8,
            max_newton_steps: 200,
            strict_margin: 1e-6,
            tikhonov: 1e-4,
            initial_t: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub y: DVector<f64>,
    /// `cᵀy` at `y` (without the tie-break term).
    pub objective_value: f64,
    /// `λ_max(G(y))`, recomputed with the Jacobi eigensolver.
    pub max_eig_at_solution: f64,
    /// Newton steps taken, phase I included.
    pub iterations: usize,
    pub status: SolveStatus,
    /// `cᵀy` after each completed centering pass of the main phase.
    pub outer_objectives: Vec<f64>,
}

/// `−log det(−G(y))` and its gradient `trace((−G(y))⁻¹·Gᵢ)`.
pub fn barrier_value_grad(prob: &LmiProblem, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let slack = SymMatrix::symmetrize(-prob.matrix_at(y)?.into_inner());
    let l = cholesky(&slack).map_err(|_| Error::NotStrictlyFeasible)?;
    let value = -2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let w = cholesky_inverse(&l);
    let grad = DVector::from_iterator(
        prob.num_vars(),
        prob.coefficients.iter().map(|g| trace_of_product(&w, g.as_matrix())),
    );
    Ok((value, grad))
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// Finds `y` with `λ_max(G(y)) ≤ −strict_margin` inside the variable boxes.
pub fn phase1_feasible_point(prob: &LmiProblem, opts: &SolverOptions) -> Result<DVector<f64>> {
    let outcome = phase1(prob, opts)?;
    if outcome.feasible {
        Ok(outcome.y)
    } else {
        Err(Error::Infeasible {
            level: outcome.level,
        })
    }
}

struct Phase1Outcome {
    y: DVector<f64>,
    level: f64,
    feasible: bool,
    steps: usize,
}

fn phase1(prob: &LmiProblem, opts: &SolverOptions) -> Result<Phase1Outcome> {
    let p = prob.num_vars();
    let y0 = DVector::from_iterator(p, prob.bounds.iter().map(VarBound::interior_start));
    let level0 = lambda_max(&prob.matrix_at(&y0)?)?;
    if level0 <= -opts.strict_margin {
        return Ok(Phase1Outcome {
            y: y0,
            level: level0,
            feasible: true,
            steps: 0,
        });
    }

    // Variables (y, s), constraint G(y) − s·I ⪯ 0, objective s.
    let mut coefficients = prob.coefficients.clone();
    coefficients.push(SymMatrix::identity(prob.dim()).scaled(-1.0));
    let mut objective = DVector::zeros(p + 1);
    objective[p] = 1.0;
    let mut bounds = prob.bounds.clone();
    bounds.push(VarBound::FREE);
    let aux = LmiProblem::new(objective, prob.constant.clone(), coefficients)?.with_bounds(bounds)?;

    let mut z = y0.clone().insert_row(p, level0 + 1.0);
    let target = -opts.strict_margin;
    let stop = |z: &DVector<f64>| z[p] < target;
    let run = follow_path(&aux, &mut z, opts, Some(&stop));
    let y = z.rows(0, p).into_owned();
    let level = lambda_max(&prob.matrix_at(&y)?)?;
    Ok(Phase1Outcome {
        y,
        level,
        feasible: level <= target,
        steps: run.steps,
    })
}

/// Solves the problem to the configured duality-gap tolerance.
pub fn solve(prob: &LmiProblem, opts: &SolverOptions) -> Result<LmiSolution> {
    validate_options(opts)?;
    let start = phase1(prob, opts)?;
    if !start.feasible {
        return finish(prob, start.y, start.steps, SolveStatus::Infeasible, Vec::new());
    }
    let mut y = start.y;
    if prob.num_vars() == 0 {
        return finish(prob, y, start.steps, SolveStatus::Optimal, Vec::new());
    }
    let run = follow_path(prob, &mut y, opts, None);
    let status = if run.converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };
    finish(prob, y, start.steps + run.steps, status, run.outer_objectives)
}

fn finish(
    prob: &LmiProblem,
    y: DVector<f64>,
    iterations: usize,
    status: SolveStatus,
    outer_objectives: Vec<f64>,
) -> Result<LmiSolution> {
    let max_eig_at_solution = lambda_max(&prob.matrix_at(&y)?)?;
    Ok(LmiSolution {
        objective_value: prob.objective_at(&y),
        max_eig_at_solution,
        iterations,
        status,
        outer_objectives,
        y,
    })
}

fn validate_options(opts: &SolverOptions) -> Result<()> {
    let ok = opts.growth > 1.0
        && opts.gap_tol > 0.0
        && opts.newton_tol > 0.0
        && opts.strict_margin >= 0.0
        && opts.tikhonov >= 0.0
        && opts.initial_t > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("invalid solver options {opts:?}")))
    }
}

struct PathRun {
    steps: usize,
    converged: bool,
    outer_objectives: Vec<f64>,
}

/// Checked after every Newton step; returning true ends the path early.
type StopRule<'a> = Option<&'a dyn Fn(&DVector<f64>) -> bool>;

/// Outer barrier loop from a strictly feasible `y`; `early_stop` is checked
/// after every Newton step.
fn follow_path(
    prob: &LmiProblem,
    y: &mut DVector<f64>,
    opts: &SolverOptions,
    early_stop: StopRule<'_>,
) -> PathRun {
    let order = prob.barrier_order();
    let mut t = opts.initial_t;
    let mut run = PathRun {
        steps: 0,
        converged: false,
        outer_objectives: Vec::new(),
    };
    loop {
        let barrier = Barrier {
            prob,
            t,
            rho: opts.tikhonov,
        };
        let budget = opts.max_newton_steps - run.steps;
        let (steps, centered, stopped) = center(&barrier, y, opts.newton_tol, budget, early_stop);
        run.steps += steps;
        if stopped {
            run.converged = true;
            return run;
        }
        if !centered {
            return run;
        }
        run.outer_objectives.push(prob.objective_at(y));
        if order / t <= opts.gap_tol {
            run.converged = true;
            return run;
        }
        t *= opts.growth;
    }
}

struct Barrier<'a> {
    prob: &'a LmiProblem,
    t: f64,
    rho: f64,
}

struct BarrierEval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Barrier<'_> {
    fn value(&self, y: &DVector<f64>) -> Option<f64> {
        if !self.prob.inside_box(y) {
            return None;
        }
        let slack = SymMatrix::symmetrize(-self.prob.matrix_at(y).ok()?.into_inner());
        let l = cholesky(&slack).ok()?;
        let logdet = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Some(self.penalized_objective(y) - logdet - self.box_log_sum(y))
    }

    fn penalized_objective(&self, y: &DVector<f64>) -> f64 {
        self.t * (self.prob.objective_at(y) + self.rho * y.norm_squared())
    }

    fn box_log_sum(&self, y: &DVector<f64>) -> f64 {
        y.iter()
            .zip(&self.prob.bounds)
            .map(|(v, b)| {
                let mut s = 0.0;
                if b.lo.is_finite() {
                    s += (v - b.lo).ln();
                }
                if b.hi.is_finite() {
                    s += (b.hi - v).ln();
                }
                s
            })
            .sum()
    }

    fn eval(&self, y: &DVector<f64>) -> Option<BarrierEval> {
        let value = self.value(y)?;
        let p = self.prob.num_vars();
        let slack = SymMatrix::symmetrize(-self.prob.matrix_at(y).ok()?.into_inner());
        let w = cholesky_inverse(&cholesky(&slack).ok()?);
        let products: Vec<DMatrix<f64>> = self
            .prob
            .coefficients
            .iter()
            .map(|g| &w * g.as_matrix())
            .collect();

        let mut grad = (self.prob.objective.clone() + y * (2.0 * self.rho)) * self.t;
        let mut hess = DMatrix::<f64>::identity(p, p) * (2.0 * self.rho * self.t);
        for i in 0..p {
            grad[i] += products[i].trace();
            for j in 0..=i {
                let h = trace_of_product(&products[i], &products[j]);
                hess[(i, j)] += h;
                if i != j {
                    hess[(j, i)] += h;
                }
            }
            let b = self.prob.bounds[i];
            if b.lo.is_finite() {
                let d = y[i] - b.lo;
                grad[i] -= 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
            if b.hi.is_finite() {
                let d = b.hi - y[i];
                grad[i] += 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
        }
        Some(BarrierEval { value, grad, hess })
    }
}

/// Damped Newton centering. Returns `(steps, centered, early_stopped)`.
fn center(
    barrier: &Barrier<'_>,
    y: &mut DVector<f64>,
    tol: f64,
    budget: usize,
    early_stop: StopRule<'_>,
) -> (usize, bool, bool) {
    const ARMIJO: f64 = 0.25;
    const SHRINK: f64 = 0.5;
    let mut steps = 0;
    while steps < budget {
        let Some(eval) = barrier.eval(y) else {
            return (steps, false, false);
        };
        let Some(direction) = newton_direction(&eval.hess, &eval.grad) else {
            return (steps, false, false);
        };
        let decrement_sq = -eval.grad.dot(&direction);
        if decrement_sq / 2.0 <= tol {
            return (steps, true, false);
        }
        let mut alpha = 1.0;
        let accepted = loop {
            let candidate = &*y + &direction * alpha;
            if let Some(v) = barrier.value(&candidate) {
                if v <= eval.value - ARMIJO * alpha * decrement_sq {
                    break Some(candidate);
                }
            }
            alpha *= SHRINK;
            if alpha < 1e-14 {
                break None;
            }
        };
        steps += 1;
        match accepted {
            Some(next) => *y = next,
            // No further decrease is representable: treat as centered.
            None => return (steps, true, false),
        }
        if early_stop.is_some_and(|stop| stop(y)) {
            return (steps, true, true);
        }
    }
    (steps, false, false)
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1.0);
    let mut jitter = 0.0;
    for _ in 0..8 {
        let shifted =
            SymMatrix::symmetrize(hess + DMatrix::identity(hess.nrows(), hess.ncols()) * jitter);
        if let Ok(l) = cholesky(&shifted) {
            return Some(-cholesky_solve(&l, grad));
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        SymMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    fn no_vars(constant: SymMatrix) -> LmiProblem {
        LmiProblem::new(DVector::zeros(0), constant, Vec::new()).unwrap()
    }

    #[test]
    fn phase1_constant_blocks() {
        let opts = SolverOptions::default();
        let err = phase1_feasible_point(&no_vars(SymMatrix::identity(2)), &opts).unwrap_err();
        assert!(matches!(err, Error::Infeasible { level } if level > 0.0));
        let y = phase1_feasible_point(&no_vars(SymMatrix::identity(2).scaled(-1.0)), &opts).unwrap();
        assert_eq!(y.len(), 0);
    }

    #[test]
    fn phase1_scalar_inequality() {
        // diag(y − 1, y − 1) ⪯ 0 ⇔ y ≤ 1.
        let prob = LmiProblem::new(
            DVector::zeros(1),
            SymMatrix::identity(2).scaled(-1.0),
            vec![SymMatrix::identity(2)],
        )
        .unwrap()
        .with_bounds(vec![VarBound::new(-10.0, 10.0).unwrap()])
        .unwrap();
        let y = phase1_feasible_point(&prob, &SolverOptions::default()).unwrap();
        assert!(y[0] < 1.0 - 1e-6);
        assert!(y[0] > -10.0);
    }

    #[test]
    fn phase1_detects_infeasible_box() {
        // y ≤ 1 is required but the box forces y ≥ 2.
        let prob = LmiProblem::new(
            DVector::zeros(1),
            SymMatrix::identity(2).scaled(-1.0),
            vec![SymMatrix::identity(2)],
        )
        .unwrap()
        .with_bounds(vec![VarBound::new(2.0, 3.0).unwrap()])
        .unwrap();
        let err = phase1_feasible_point(&prob, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { level } if level > 0.9));
        let sol = solve(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn solve_constant_block_eigenvalue() {
        // min λ  s.t. diag(1, 2) − λI ⪯ 0.
        let prob = LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            SymMatrix::from_diagonal(&[1.0, 2.0]),
            vec![SymMatrix::identity(2).scaled(-1.0)],
        )
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 2.0).abs() <= 1e-4 * 3.0);
        assert!(sol.max_eig_at_solution <= 1e-7);
    }

    #[test]
    fn solve_offdiagonal_coupling() {
        // vars (y, λ): [[−1, y], [y, −1]] − λI ⪯ 0, optimum λ = −1 at y = 0.
        let prob = LmiProblem::new(
            DVector::from_vec(vec![0.0, 1.0]),
            SymMatrix::identity(2).scaled(-1.0),
            vec![
                sym(&[&[0.0, 1.0], &[1.0, 0.0]]),
                SymMatrix::identity(2).scaled(-1.0),
            ],
        )
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value + 1.0).abs() <= 1e-4 * 2.0);
        assert!(sol.y[0].abs() < 1e-3);
    }

    #[test]
    fn solve_matches_symmetric_eigenvalue() {
        let g0 = sym(&[&[-0.7973, 0.1993], &[0.1993, 0.0]]);
        let prob = LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            g0,
            vec![SymMatrix::identity(2).scaled(-1.0)],
        )
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default()).unwrap();
        // Quadratic-formula root of λ² + 0.7973λ − 0.1993².
        let exact = (-0.7973 + (0.7973f64.powi(2) + 4.0 * 0.1993f64.powi(2)).sqrt()) / 2.0;
        assert!((sol.objective_value - exact).abs() <= 1e-4 * (1.0 + exact.abs()));
        assert!((sol.objective_value - 0.04705).abs() < 1e-4);
    }

    #[test]
    fn barrier_examples() {
        let (v, g) = barrier_value_grad(&no_vars(SymMatrix::identity(2).scaled(-1.0)), &DVector::zeros(0)).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g.len(), 0);

        // diag(y − 2, y − 2) at y = 1.
        let prob = LmiProblem::new(
            DVector::zeros(1),
            SymMatrix::identity(2).scaled(-2.0),
            vec![SymMatrix::identity(2)],
        )
        .unwrap();
        let (v, g) = barrier_value_grad(&prob, &DVector::from_vec(vec![1.0])).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-15);
        assert_relative_eq!(g[0], 2.0, epsilon = 1e-15);

        // diag(y − 1, −1) at y = 0.
        let prob = LmiProblem::new(
            DVector::zeros(1),
            SymMatrix::identity(2).scaled(-1.0),
            vec![SymMatrix::from_diagonal(&[1.0, 0.0])],
        )
        .unwrap();
        let (v, g) = barrier_value_grad(&prob, &DVector::from_vec(vec![0.0])).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-15);
        assert_relative_eq!(g[0], 1.0, epsilon = 1e-15);

        let err = barrier_value_grad(&prob, &DVector::from_vec(vec![2.0])).unwrap_err();
        assert_eq!(err, Error::NotStrictlyFeasible);
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(LmiProblem::new(DVector::zeros(2), SymMatrix::zeros(2), vec![SymMatrix::zeros(2)]).is_err());
        assert!(LmiProblem::new(DVector::zeros(1), SymMatrix::zeros(2), vec![SymMatrix::zeros(3)]).is_err());
        assert!(LmiProblem::new(DVector::from_vec(vec![f64::NAN]), SymMatrix::zeros(2), vec![SymMatrix::zeros(2)]).is_err());
        assert!(VarBound::new(1.0, 1.0).is_err());
        assert!(VarBound::new(2.0, 1.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_status() {
        let prob = LmiProblem::new(
            DVector::from_vec(vec![1.0]),
            SymMatrix::from_diagonal(&[1.0, 2.0]),
            vec![SymMatrix::identity(2).scaled(-1.0)],
        )
        .unwrap();
        let opts = SolverOptions {
            max_newton_steps: 3,
            ..SolverOptions::default()
        };
        let sol = solve(&prob, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIterations);
        assert!(sol.max_eig_at_solution < 0.0);
    }
}
