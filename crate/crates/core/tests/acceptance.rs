//! One pass/fail line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{dmatrix, dvector, DMatrix, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sspc::harness::{run_closed_loop, SimConfig, TraceRecord};
use sspc::ocp::{build_nlp, solve_dare, Case, SlackMode, SpacecraftParams, REFERENCE_SWITCH_TIME};
use sspc::verification::cases::{check_oracle_cases, generate_oracle_cases};
use sspc::verification::problems::CircleProjection;
use sspc::verification::{convergence_order_probe, fd_jacobian_check, predictor_order, ProbeOutcome, Wrt};
use sspc::fd::DEFAULT_STEP;
use sspc::{grid_size, linear_solve, schur_reduced_solve, Execution, SolverConfig};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simulate(case: Case, horizon: usize, kappa: f64) -> Result<Vec<TraceRecord>, String> {
    let mut cfg = SimConfig {
        case,
        horizon,
        ..SimConfig::default()
    };
    cfg.solver.kappa = kappa;
    run_closed_loop(&cfg).map_err(|e| e.to_string())
}

fn max_residual(trace: &[TraceRecord]) -> f64 {
    trace.iter().map(|r| r.kkt_res).fold(0.0, f64::max)
}

struct Runs {
    case1: Result<Vec<TraceRecord>, String>,
    case2: Result<Vec<TraceRecord>, String>,
    seconds: f64,
}

fn closed_loop_residual(runs: &Runs) -> Outcome {
    let one = runs.case1.as_ref()?;
    let two = runs.case2.as_ref()?;
    let (r1, r2) = (max_residual(one), max_residual(two));
    ensure(
        r1 <= 1e-5 && r2 <= 1e-5 && one.len() == 80 && two.len() == 80 && runs.seconds < 60.0,
        format!("max residual {r1:.2e} / {r2:.2e}, {:.1} s", runs.seconds),
    )
}

fn tracking(runs: &Runs) -> Outcome {
    let trace = runs.case1.as_ref()?;
    let target = Vector6::new(0.0, 0.0, 0.0, 15.0, 30.0, -20.0);
    let reached = trace
        .iter()
        .find(|r| r.t < REFERENCE_SWITCH_TIME && (r.xi_deg() - target).rows(3, 3).amax() <= 1.0)
        .map(|r| r.t);
    let last = trace.last().ok_or("empty trace")?;
    let final_err = last.xi_deg().rows(3, 3).amax();
    ensure(
        reached.is_some() && final_err <= 1.0,
        format!("target reached at t = {reached:?} s, final attitude error {final_err:.3} deg"),
    )
}

fn constraints(runs: &Runs) -> Outcome {
    let trace = runs.case2.as_ref()?;
    let (lb, ub) = Case::Two.state_bounds_deg();
    let mut violation: f64 = 0.0;
    for r in trace {
        let xi = r.xi_deg();
        for i in 0..6 {
            violation = violation.max(lb[i] - xi[i]).max(xi[i] - ub[i]);
        }
    }
    let peak = trace.iter().map(|r| r.xi_deg().rows(0, 3).amax()).fold(0.0, f64::max);
    ensure(
        violation <= 1e-3 && peak >= 1.15 - 1e-2,
        format!("worst bound excess {violation:.2e} deg, peak |ω| {peak:.5} deg/s"),
    )
}

fn oracle() -> Outcome {
    let start = Instant::now();
    let cases = generate_oracle_cases(2024, 100, 0.5);
    let changes = cases.iter().filter(|c| c.active_set_changes).count();
    let results = check_oracle_cases(&cases, &SolverConfig::default(), Execution::default());
    let secs = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for r in &results {
        match r {
            Ok(c) if c.error <= 1e-6 => worst = worst.max(c.error),
            _ => failed += 1,
        }
    }
    ensure(
        failed == 0 && secs < 10.0,
        format!("{failed} failures, {changes} active-set changes, worst error {worst:.2e}, {secs:.2} s"),
    )
}

fn corrector_rate() -> Outcome {
    let nlp = CircleProjection;
    let p = dvector![2.0, 1.0];
    match convergence_order_probe(&nlp, &nlp.solution(&p), &p, 0.1).map_err(|e| e.to_string())? {
        ProbeOutcome::Order(s) => ensure((1.7..=2.3).contains(&s), format!("slope {s:.3}")),
        other => Err(format!("{other:?}")),
    }
}

fn predictor_rate() -> Outcome {
    let nlp = CircleProjection;
    let s = predictor_order(&nlp, |p| nlp.solution(p), &dvector![2.0, 1.0], &dvector![0.4, 0.3], 6)
        .map_err(|e| e.to_string())?;
    ensure((1.7..=2.3).contains(&s), format!("order {s:.3}"))
}

fn jacobians() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in [Case::One, Case::Two] {
        let params = SpacecraftParams::benchmark(case, 15).map_err(|e| e.to_string())?;
        let ocp = build_nlp(&params, SlackMode::Scalar).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let (x, p) = common::spacecraft_point(&ocp, &mut rng);
            for wrt in [Wrt::X, Wrt::P] {
                worst = worst.max(fd_jacobian_check(&ocp, &x, &p, DEFAULT_STEP, wrt).map_err(|e| e.to_string())?);
            }
        }
    }
    let spacecraft = worst;
    worst = 0.0;
    for case in generate_oracle_cases(99, 20, 0.5) {
        for wrt in [Wrt::X, Wrt::P] {
            worst = worst.max(fd_jacobian_check(&case.qp, &case.x0, &case.p0, DEFAULT_STEP, wrt).map_err(|e| e.to_string())?);
        }
    }
    ensure(
        spacecraft <= 1e-5 && worst <= 1e-5,
        format!("worst relative error {spacecraft:.2e} (spacecraft), {worst:.2e} (QP)"),
    )
}

fn schur() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (jac, rhs) = common::random_regular_system(&mut rng);
        let dense = linear_solve(&jac.to_dense(), &rhs, 1e-14).map_err(|e| e.to_string())?;
        let reduced = schur_reduced_solve(&jac, &rhs, 1e-14).map_err(|e| e.to_string())?;
        worst = worst.max((reduced - &dense).norm() / dense.norm());
    }
    ensure(worst <= 1e-9, format!("worst relative error {worst:.2e}"))
}

fn grid() -> Outcome {
    let wrong: Vec<_> = common::GRID_TABLE
        .iter()
        .filter(|(dp, kappa, m)| grid_size(*dp, *kappa) != *m)
        .collect();
    ensure(wrong.is_empty(), format!("{} of 20 pairs wrong {wrong:?}", wrong.len()))
}

fn dare() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in [Case::One, Case::Two] {
        let params = SpacecraftParams::benchmark(case, 15).map_err(|e| e.to_string())?;
        let (_, residual) = params.solve_terminal_weight().map_err(|e| e.to_string())?;
        worst = worst.max(residual);
    }
    let one = dmatrix![1.0];
    let golden = solve_dare(&one, &one, &one, &one, 1e-14, 10_000).map_err(|e| e.to_string())?.p[(0, 0)];
    let third = solve_dare(&dmatrix![0.5], &DMatrix::zeros(1, 1), &one, &one, 1e-14, 10_000)
        .map_err(|e| e.to_string())?
        .p[(0, 0)];
    let e1 = (golden - (1.0 + 5f64.sqrt()) / 2.0).abs();
    let e2 = (third - 4.0 / 3.0).abs();
    ensure(
        worst <= 1e-10 && e1 <= 1e-9 && e2 <= 1e-9,
        format!("spacecraft residual {worst:.2e}, golden ratio error {e1:.1e}, 4/3 error {e2:.1e}"),
    )
}

fn degenerate_smoke() -> Outcome {
    let trace = simulate(Case::Two, 25, 0.5)?;
    let r = max_residual(&trace);
    ensure(trace.len() == 80 && r <= 1e-5, format!("{} steps, max residual {r:.2e}", trace.len()))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()))
}

fn main() {
    let start = Instant::now();
    let case1 = simulate(Case::One, 15, 0.5);
    let case2 = simulate(Case::Two, 15, 0.5);
    let runs = Runs {
        case1,
        case2,
        seconds: start.elapsed().as_secs_f64(),
    };
    let criteria: Vec<(&str, Check)> = vec![
        ("closed-loop KKT residual, cases 1 and 2", Box::new(|| closed_loop_residual(&runs))),
        ("case 1 attitude tracking", Box::new(|| tracking(&runs))),
        ("case 2 constraint enforcement", Box::new(|| constraints(&runs))),
        ("agreement with the active-set oracle", Box::new(oracle)),
        ("quadratic corrector rate", Box::new(corrector_rate)),
        ("second-order predictor error", Box::new(predictor_rate)),
        ("finite-difference Jacobian checks", Box::new(jacobians)),
        ("Schur reduction matches dense solve", Box::new(schur)),
        ("homotopy grid arithmetic", Box::new(grid)),
        ("Riccati terminal weight", Box::new(dare)),
        ("degenerate case 2 with N = 25", Box::new(degenerate_smoke)),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = guarded(check);
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {}: {name}: {detail} ({secs:.1} s)", k + 1),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] criterion {}: {name}: {detail} ({secs:.1} s)", k + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
