// Structural invariants of the solver pieces: properties over random
// instances and per-iterate checks through the solver's observer hook.

mod common;

use common::{
    dense_blocksym, dense_row, embedding_problem, random_coeff, random_iterate, random_mixed_problem, random_slack,
    rel_frob, DenseProblem,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdsolve::bench::shifted_geometric_mean;
use sdsolve::generate::{diag_precond, graph_partition, maxcut};
use sdsolve::kkt::{assemble_schur_matrix, compute_aux, inverse_blocks, KktPlan, NormalSolver, SolveMode};
use sdsolve::linalg::{cholesky, factor_blocks, PcgState, PreconditionerKind};
use sdsolve::model::{CoeffMatrix, SdpProblem};
use sdsolve::presolve::{detect_rank_one, gather_permute_eig, scale_objective};
use sdsolve::recovery::{dimacs_errors, recover_backward};
use sdsolve::sdpa_io::{parse_sdpa, write_sdpa};
use sdsolve::solver::{newton_embedding, solve, solve_observed, IterateView, Params, Status};

fn mixed(rng: &mut ChaCha8Rng) -> SdpProblem {
    let m = rng.gen_range(1..=40);
    let orders: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=25)).collect();
    let diag = rng.gen_bool(0.5).then(|| rng.gen_range(1..=6));
    random_mixed_problem(rng, m, &orders, diag)
}

/// Smallest singular value of the stacked `vec(A_i)`, relative to the largest.
fn constraint_independence(d: &DenseProblem) -> f64 {
    let nn = d.c.len();
    let stacked = DMatrix::from_fn(d.a.len(), nn, |i, e| d.a[i].as_slice()[e]);
    if d.a.len() > nn {
        return 0.0;
    }
    let sv = stacked.singular_values();
    sv.min() / sv.max().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schur_symmetric_psd_and_order_free(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = mixed(&mut rng);
        let s = random_slack(&mut rng, &problem.blocks);
        let winv = inverse_blocks(&factor_blocks(&s).unwrap());
        let plan = KktPlan::new(&problem, 3.0);
        let m = assemble_schur_matrix(&problem, &winv, &plan);

        let amax = m.amax();
        prop_assert!((&m - m.transpose()).amax() <= 1e-12 * amax);

        let d = DenseProblem::of(&problem);
        if constraint_independence(&d) > 1e-8 {
            let delta = 1e-12 * m.trace() / problem.m() as f64;
            prop_assert!(cholesky(&(&m + DMatrix::identity(problem.m(), problem.m()) * delta)).is_ok());
        }

        // A different row order moves which row computes each entry, so the
        // matrices agree to rounding.
        let mut shuffled = plan.clone();
        for p in shuffled.blocks.iter_mut().flatten() {
            p.sigma.shuffle(&mut rng);
        }
        let m2 = assemble_schur_matrix(&problem, &winv, &shuffled);
        prop_assert!(rel_frob(&m2, &m) <= 1e-12);
    }

    #[test]
    fn plan_order_is_a_cost_sorted_permutation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = mixed(&mut rng);
        let plan = KktPlan::new(&problem, 3.0);
        for p in plan.blocks.iter().flatten() {
            let mut seen = p.sigma.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..problem.m()).collect::<Vec<_>>());
            for w in p.sigma.windows(2) {
                prop_assert!(p.predicted_flops[w[0]] >= p.predicted_flops[w[1]]);
            }
        }
    }

    #[test]
    fn aux_matches_dense_traces(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = mixed(&mut rng);
        let s = random_slack(&mut rng, &problem.blocks);
        let winv = inverse_blocks(&factor_blocks(&s).unwrap());
        let aux = compute_aux(&problem, &winv, None);
        let d = DenseProblem::of(&problem);
        let w = dense_blocksym(&problem.blocks, &s).try_inverse().unwrap();
        for (i, a) in d.a.iter().enumerate() {
            let direct = (&w * a).trace();
            prop_assert!((aux.asinv[i] - direct).abs() <= 1e-11 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn backward_candidate_is_primal_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = embedding_problem(&mut rng);
        let it = random_iterate(&mut rng, &problem);
        let gamma = rng.gen_range(0.0..=1.0);
        let winv = inverse_blocks(&it.factors);
        let m = assemble_schur_matrix(&problem, &winv, &KktPlan::new(&problem, 3.0));
        let aux = compute_aux(&problem, &winv, Some(&it.residual()));
        let Ok(mut solver) = NormalSolver::new(&m, SolveMode::Direct) else {
            return Ok(());
        };
        let mut pcg = PcgState::new(PreconditionerKind::CholeskyReuse, problem.m());
        let dir = newton_embedding(&problem, &it, &aux, &mut solver, &mut pcg, gamma).unwrap();
        let cand = recover_backward(&winv, &it.s, &dir.ds, it.mu);

        let scale = it.tau + dir.dtau;
        let ax = problem.primal_map(&cand.x).unwrap();
        let target = &problem.b * scale;
        prop_assert!((&ax - &target).norm() <= 1e-8 * (1.0 + target.norm()) * (1.0 + cand.x.frob_norm()));

        if cand.psd_certified && scale > 0.0 {
            let x = dense_blocksym(&problem.blocks, &cand.x);
            let n = x.nrows();
            let shift = 1e-12 * x.trace().abs() / n as f64;
            prop_assert!(cholesky(&(&x + DMatrix::identity(n, n) * shift)).is_ok());

            let xn = cand.x.scaled(1.0 / scale);
            let e = dimacs_errors(&problem, Some(&xn), &it.y, &it.s);
            prop_assert!(e[0] <= 1e-7, "err1 {}", e[0]);
            prop_assert!(e[1] <= 1e-9, "err2 {}", e[1]);
        }
    }

    #[test]
    fn rank_one_detection_respects_tolerance(seed in any::<u64>(), tol in 1e-12f64..1e-2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=12);
        let v = DVector::from_fn(n, |_, _| if rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 });
        let noise = common::random_sym(&mut rng, n) * 10f64.powf(rng.gen_range(-14.0..0.0));
        let dense = &v * v.transpose() * rng.gen_range(-3.0..3.0) + noise;
        let c = sdsolve::model::classify_coefficient(&dense, 0.0).unwrap();
        let d = c.to_dense();
        if let Some((lambda, a)) = detect_rank_one(&c, tol) {
            let mut av = DVector::zeros(n);
            for (&i, &x) in a.idx.iter().zip(&a.val) {
                av[i] = x;
            }
            let rebuilt = &av * av.transpose() * lambda;
            prop_assert!((&rebuilt - &d).norm() <= tol * d.norm() * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn sparse_eigen_matches_dense(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=30);
        let c: CoeffMatrix = random_coeff(&mut rng, n);
        let d = c.to_dense();
        let e = gather_permute_eig(&c);
        let mut rebuilt = DMatrix::zeros(n, n);
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            let mut dv = DVector::zeros(n);
            for (&i, &x) in v.idx.iter().zip(&v.val) {
                dv[i] = x;
            }
            rebuilt += &dv * dv.transpose() * *lam;
        }
        prop_assert!((&rebuilt - &d).norm() <= 1e-10 * (1.0 + d.norm()));

        let mut got: Vec<f64> = e.values.iter().copied().filter(|v| v.abs() > 1e-12).collect();
        let mut want: Vec<f64> = d.symmetric_eigenvalues().iter().copied().filter(|v| v.abs() > 1e-12).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn sdpa_round_trip_with_crlf_and_exponents(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = mixed(&mut rng);
        let text = write_sdpa(&problem);
        let parsed = parse_sdpa(&text).unwrap();
        prop_assert_eq!(write_sdpa(&parsed), text.clone());
        let crlf = text.replace('\n', "\r\n");
        prop_assert_eq!(write_sdpa(&parse_sdpa(&crlf).unwrap()), text);
        // Factored coefficients are written materialized, so values agree to rounding.
        let (got, want) = (dense_row(&parsed.blocks, &parsed.c), dense_row(&problem.blocks, &problem.c));
        prop_assert!((&got - &want).amax() <= 1e-15 * (1.0 + want.amax()));
    }

    #[test]
    fn sgm_ignores_order(times in proptest::collection::vec(0.0f64..3600.0, 1..40), seed in any::<u64>()) {
        let mut shuffled = times.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(shifted_geometric_mean(&times, 10.0), shifted_geometric_mean(&shuffled, 10.0));
    }
}

#[test]
fn exponent_notation_parses() {
    let text = "1\n1\n2\n1E0\n0 1 1 1 1.0e+00\n0 1 2 2 100e-2\n1 1 1 1 1\n1 1 2 2 .1e1\n";
    let p = parse_sdpa(text).unwrap();
    assert_eq!(p.b[0], 1.0);
    assert_eq!(dense_row(&p.blocks, &p.c), DMatrix::identity(2, 2));
    assert_eq!(dense_row(&p.blocks, &p.a[0]), DMatrix::identity(2, 2));
}

fn small_suite() -> Vec<(&'static str, SdpProblem)> {
    vec![
        ("maxcut 30", maxcut(30, 0.3, 1).unwrap()),
        ("maxcut 60", maxcut(60, 0.1, 2).unwrap()),
        ("gpp 8", graph_partition(8, 2.0, None, 0.5, 3).unwrap()),
        ("gpp 12", graph_partition(12, 3.0, None, 0.3, 4).unwrap()),
        ("diagprecond 20", diag_precond(20, 0.3, 5).unwrap()),
    ]
}

#[test]
fn iterate_invariants_hold_along_the_path() {
    for (name, problem) in small_suite() {
        let mut last_r = f64::INFINITY;
        let (mut n_a, mut n_b) = (0, 0);
        let r = solve_observed(&problem, &Params::default(), &mut |p, view| match view {
            IterateView::Embedding(it) => {
                n_a += 1;
                assert!(factor_blocks(&it.s).is_ok(), "{name}: S not positive definite");
                assert!(
                    it.tau > 0.0 && it.kappa > 0.0,
                    "{name}: tau {} kappa {}",
                    it.tau,
                    it.kappa
                );
                let mut r = p.c_matrix().scaled(it.tau);
                r.axpy(-1.0, &p.adjoint_map(&it.y).unwrap());
                r.axpy(-1.0, &it.s);
                r.axpy(-1.0, &it.residual());
                assert!(
                    r.frob_norm() <= 1e-10 * (1.0 + p.c_frob_norm()),
                    "{name}: residual drift {}",
                    r.frob_norm()
                );
                let rn = it.residual_norm();
                assert!(rn <= last_r, "{name}: |R| grew from {last_r} to {rn}");
                last_r = rn;
            }
            IterateView::Feasible(fb) => {
                n_b += 1;
                let mut r = p.adjoint_map(&fb.y).unwrap();
                r.axpy(1.0, &fb.s);
                r.axpy(-1.0, &p.c_matrix());
                assert!(
                    r.frob_norm() <= 1e-9 * (1.0 + p.c_frob_norm()),
                    "{name}: dual infeasibility {}",
                    r.frob_norm()
                );
            }
        });
        assert_eq!(r.status, Status::Optimal, "{name}");
        assert_eq!((n_a, n_b), (r.iterations_phase_a, r.iterations_phase_b), "{name}");
    }
}

#[test]
fn solves_are_deterministic() {
    let problem = maxcut(40, 0.3, 9).unwrap();
    let trace = || {
        let mut seq = Vec::new();
        let r = solve_observed(&problem, &Params::default(), &mut |p, view| match view {
            IterateView::Embedding(it) => seq.push((it.mu, it.tau, p.b.dot(&it.y))),
            IterateView::Feasible(fb) => seq.push((fb.mu, 1.0, p.b.dot(&fb.y))),
        });
        (seq, r.y, r.primal_objective)
    };
    assert_eq!(trace(), trace());
}

#[test]
fn objective_scaling_is_undone() {
    let problem = maxcut(25, 0.4, 6).unwrap();
    let mut big = problem.clone();
    for c in &mut big.c {
        *c = c.scaled(1e6);
    }
    let (scaled, factor) = scale_objective(&big, 1.0);
    assert!((factor - big.c_frob_norm()).abs() <= 1e-12 * factor);
    let reference = solve(&problem, &Params::default());
    let rescaled = solve(&scaled, &Params::default());
    let direct = solve(&big, &Params::default());
    assert_eq!(reference.status, Status::Optimal);
    let want = reference.dual_objective * 1e6;
    let tol = 5e-6 * (1.0 + 2.0 * want.abs());
    assert!((rescaled.dual_objective * factor - want).abs() <= tol);
    assert_eq!(direct.status, Status::Optimal);
    assert!((direct.dual_objective - want).abs() <= tol);
}
