use hdpid::lmi::{self, LmiProblem, SolveStatus, SolverOptions, VarBound};
use hdpid::numerics::{lambda_max, SymMatrix};
use hdpid::plant::AircraftPlant;
use hdpid::tuner::{self, FirstStage, TunerOptions};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    (&a + a.transpose()) / 2.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// `min λ s.t. A ⪯ λI` is the largest eigenvalue of `A`.
    #[test]
    fn level_problem_finds_largest_eigenvalue(n in 1usize..6, entries in prop::collection::vec(-3.0f64..3.0, 25)) {
        let a = symmetric(n, &entries);
        let prob = LmiProblem::new(
            DVector::from_element(1, 1.0),
            SymMatrix::new(a.clone()).unwrap(),
            vec![SymMatrix::identity(n).scaled(-1.0)],
        ).unwrap();
        let sol = lmi::solve(&prob, &SolverOptions::default()).unwrap();
        let expected = SymmetricEigen::new(a).eigenvalues.max();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!((sol.objective_value - expected).abs() < 1e-4, "{} vs {}", sol.objective_value, expected);
    }

    /// Solutions stay inside the variable box and satisfy the inequality.
    #[test]
    fn solutions_are_feasible(
        n in 1usize..4,
        g0 in prop::collection::vec(-1.0f64..1.0, 9),
        g1 in prop::collection::vec(-1.0f64..1.0, 9),
        g2 in prop::collection::vec(-1.0f64..1.0, 9),
        c in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let base = symmetric(n, &g0);
        let shift = SymmetricEigen::new(base.clone()).eigenvalues.max() + 0.2;
        let g0 = base - DMatrix::identity(n, n) * shift;
        let prob = LmiProblem::new(
            DVector::from_vec(c),
            SymMatrix::new(g0).unwrap(),
            vec![SymMatrix::new(symmetric(n, &g1)).unwrap(), SymMatrix::new(symmetric(n, &g2)).unwrap()],
        ).unwrap().with_bounds(vec![VarBound::new(-2.0, 1.0).unwrap(), VarBound::symmetric(0.5).unwrap()]).unwrap();
        let sol = lmi::solve(&prob, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!(sol.y[0] >= -2.0 && sol.y[0] <= 1.0 && sol.y[1].abs() <= 0.5);
        prop_assert!(lambda_max(&prob.matrix_at(&sol.y).unwrap()).unwrap() <= 0.0);
        let outer = &sol.outer_objectives;
        prop_assert!(outer.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    }
}

#[test]
fn tuned_gains_are_hurwitz_with_nonnegative_level() {
    let blocks = tuner::velocity_blocks(
        &AircraftPlant::default(),
        &DVector::zeros(2),
        &DVector::from_vec(vec![0.0, 1.0]),
        &DMatrix::zeros(2, 2),
    )
    .unwrap();
    let r = tuner::tune(&blocks, FirstStage::Eigenvalue, &TunerOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.lambda_star >= -1e-6);
    assert!(r.spectral_abscissa < 0.0);
    let recomputed = tuner::hurwitz_check(&blocks.closed_loop(&r.k).unwrap()).unwrap();
    assert_eq!(recomputed, r.spectral_abscissa);
    // The optimal level equals λ_max(L_K) at the returned gains.
    let level = lambda_max(&tuner::lk_matrix(&blocks, &r.k).unwrap()).unwrap();
    assert!((level - r.lambda_star).abs() < 1e-6);
}

#[test]
fn compensation_level_is_bounded_below_on_random_states() {
    let plant = AircraftPlant::default();
    let kd = DMatrix::zeros(2, 2);
    let blocks_0 = tuner::velocity_blocks(&plant, &DVector::zeros(2), &DVector::from_vec(vec![0.0, 1.0]), &kd).unwrap();
    let k = DMatrix::from_row_slice(2, 4, &[1.0159, 0.0, 2.0406, 0.0, 0.0, 1.0159, 0.0, 2.0406]);
    let mut state = 0x2545_f491_u64;
    let mut uniform = |lo: f64, hi: f64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        lo + (hi - lo) * (state % 1_000_000) as f64 / 1e6
    };
    for _ in 0..20 {
        let x = DVector::from_vec(vec![uniform(-3.0, 3.0), uniform(-1.2, 1.2)]);
        let u = DVector::from_vec(vec![uniform(-1.2, 1.2), uniform(-2.0, 4.0)]);
        let eps_q = uniform(0.2, 3.0);
        let blocks_e = tuner::velocity_blocks(&plant, &x, &u, &kd).unwrap();
        let comp = tuner::compensate(&blocks_e, &blocks_0, &k, 1.0, eps_q, &TunerOptions::default()).unwrap();
        assert!(comp.lambda_star >= -eps_q - 1e-6);
        let check = tuner::check_thm3_condition(&blocks_e, &blocks_0, &k, &comp.dk, 1.0, eps_q, comp.tau()).unwrap();
        assert!(check.margin <= 1e-7);
    }
}
