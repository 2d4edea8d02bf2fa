//! Acceptance criteria, one PASS/FAIL line each. Criteria listed in
//! `KNOWN_FAILING` are reported but do not fail the target.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use alslq::dual::{update_pi1, DualRule, DualUpdateConfig};
use alslq::penalty::{
    nonslack_penalty, phr_penalty, psi_function, relaxed_barrier_penalty, smooth_phr_penalty, PenaltyEvaluation,
};
use alslq::projection::{solve_projected_discrete, DiscreteSolution};
use alslq::slq::{quadratize, LqNode, LqTerminal, QuadratizeOptions};
use alslq::systems::{
    cartpole_model, finite_difference_check, planar_mover_model, CartPoleParams, PlanarMoverParams, SampleBox,
};
use alslq::{
    run_mpc, tasks, Error, MpcConfig, MpcResult, Multipliers, PenaltyStrategy, SlqSettings, SlqSolver, Task, TimeGrid,
};
use common::Lqr;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILING: &[usize] = &[6];
const VIOLATION_TOL: f64 = 0.05;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, pass: bool, detail: String) -> Verdict {
    Verdict { id, pass, detail }
}

fn c1_lqr_oracle() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, lqr, x0) in [
        (
            "scalar",
            Lqr::scalar(0.5, 1.0, 2.0, 0.5, 3.0),
            DVector::from_element(1, 1.0),
        ),
        (
            "double-integrator",
            Lqr::double_integrator(),
            DVector::from_column_slice(&[1.0, 0.0]),
        ),
    ] {
        let tf = 3.0;
        let grid = TimeGrid::uniform(0.0, tf, 31).unwrap();
        let mut solver = SlqSolver::new(
            lqr.ocp(grid.clone(), x0),
            PenaltyStrategy::default(),
            SlqSettings::default(),
        )
        .unwrap();
        let nominal = solver.initial_nominal(&DVector::zeros(lqr.b.ncols())).unwrap();
        let nu = solver.zero_multipliers().unwrap();
        let out = solver.slq_iterate(&nominal, &nu).unwrap();
        let (mut es, mut ek) = (0.0f64, 0.0f64);
        for (k, &t) in grid.nodes().iter().enumerate() {
            es = es.max((&out.riccati.s_matrix[k] - lqr.s_exact(t, tf)).amax());
            ek = ek.max((&out.riccati.gains[k] - lqr.k_exact(t, tf)).amax());
        }
        pass &= es < 1e-4 && ek < 1e-4;
        parts.push(format!("{name}: max|S-S*| = {es:.2e}, max|K-K*| = {ek:.2e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 1.0;
    verdict(1, pass, format!("{}; {secs:.3} s", parts.join("; ")))
}

/// Largest relative error of central differences of value and slope against
/// the analytic slope and curvature, over `n` draws accepted by `keep`.
fn penalty_fd(
    rng: &mut ChaCha8Rng,
    n: usize,
    draw: impl Fn(&mut ChaCha8Rng) -> Option<(f64, Box<dyn Fn(f64) -> PenaltyEvaluation>)>,
) -> f64 {
    let mut worst = 0.0f64;
    let mut taken = 0;
    while taken < n {
        let Some((h, f)) = draw(rng) else { continue };
        let e = 1e-6 * h.abs().max(1e-2);
        let (p, m, c) = (f(h + e), f(h - e), f(h));
        let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1.0);
        worst = worst
            .max(rel((p.value - m.value) / (2.0 * e), c.d_dh[0]))
            .max(rel((p.d_dh[0] - m.d_dh[0]) / (2.0 * e), c.d2_dh2[0]));
        taken += 1;
    }
    worst
}

fn one(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

fn c2_derivatives() -> Verdict {
    let start = Instant::now();
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phr = penalty_fd(&mut rng, n, |r| {
        let (h, nu, rho): (f64, f64, f64) = (
            r.random_range(-1.0..1.0),
            r.random_range(0.0..5.0),
            r.random_range(1.0..500.0),
        );
        ((nu - rho * h).abs() > 1e-3 * rho).then(|| (h, Box::new(move |h| phr_penalty(&one(h), &one(nu), rho)) as _))
    });
    let ns = penalty_fd(&mut rng, n, |r| {
        let (h, nu, rho): (f64, f64, f64) = (
            r.random_range(-1.0..1.0),
            r.random_range(0.0..5.0),
            r.random_range(1.0..500.0),
        );
        (nu > 0.0 || h.abs() > 1e-3).then(|| (h, Box::new(move |h| nonslack_penalty(&one(h), &one(nu), rho)) as _))
    });
    let sphr = penalty_fd(&mut rng, n, |r| {
        let (h, nu, rho): (f64, f64, f64) = (
            r.random_range(-1.0..1.0),
            r.random_range(1e-3..5.0),
            r.random_range(1.0..500.0),
        );
        let dpsi: f64 = r.random_range(0.05..0.95);
        ((rho * h / nu - (dpsi - 1.0)).abs() > 1e-3).then(|| {
            (
                h,
                Box::new(move |h| smooth_phr_penalty(&one(h), &one(nu), rho, dpsi, 1e-6).unwrap()) as _,
            )
        })
    });
    let barrier = penalty_fd(&mut rng, n, |r| {
        let (h, mu, delta): (f64, f64, f64) = (
            r.random_range(-1.0..2.0),
            r.random_range(1e-3..10.0),
            r.random_range(1e-3..0.5),
        );
        ((h - delta).abs() > 1e-3 * delta && h.abs() > 1e-2)
            .then(|| (h, Box::new(move |h| relaxed_barrier_penalty(&one(h), mu, delta)) as _))
    });
    let cart = finite_difference_check(
        &cartpole_model(CartPoleParams::default()).unwrap(),
        n,
        1e-5,
        &SampleBox::cartpole(),
        3,
    );
    let mover = finite_difference_check(
        &planar_mover_model(&PlanarMoverParams::default_maze()).unwrap(),
        n,
        1e-5,
        &SampleBox::planar_mover(),
        4,
    );
    let worst = [phr, ns, sphr, barrier, cart.max_rel_error, mover.max_rel_error];
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.iter().all(|&e| e < 1e-5) && cart.passed && mover.passed && secs < 10.0;
    verdict(
        2,
        pass,
        format!(
            "{n} samples each; phr {phr:.1e}, non-slack {ns:.1e}, smooth-phr {sphr:.1e}, barrier {barrier:.1e}, \
             cart-pole {:.1e}, planar mover {:.1e}; {secs:.2} s",
            cart.max_rel_error, mover.max_rel_error
        ),
    )
}

fn branch_gap(a: &PenaltyEvaluation, b: &PenaltyEvaluation) -> f64 {
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1.0);
    rel(a.value, b.value)
        .max(rel(a.d_dh[0], b.d_dh[0]))
        .max(rel(a.d2_dh2[0], b.d2_dh2[0]))
}

fn c3_junctions() -> Verdict {
    let mut worst = 0.0f64;
    for dpsi in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let j = dpsi - 1.0;
        let (above, below) = (psi_function(j, dpsi), psi_function(j - 1e-15, dpsi));
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1.0);
        worst = worst
            .max(rel(above.0, below.0))
            .max(rel(above.1, below.1))
            .max(rel(above.2, below.2));
        for (nu, rho) in [(0.1, 10.0), (1.0, 100.0), (3.0, 500.0)] {
            let hj = j * nu / rho;
            let f = |h: f64| smooth_phr_penalty(&one(h), &one(nu), rho, dpsi, 1e-6).unwrap();
            worst = worst.max(branch_gap(&f(hj * (1.0 - 1e-15)), &f(hj * (1.0 + 1e-15))));
        }
    }
    for (mu, delta) in [(1e-3, 1e-3), (0.1, 0.05), (1.0, 0.1), (10.0, 0.5)] {
        let f = |h: f64| relaxed_barrier_penalty(&one(h), mu, delta);
        worst = worst.max(branch_gap(&f(delta), &f(delta * (1.0 + 1e-15))));
    }
    verdict(
        3,
        worst < 1e-10,
        format!("largest relative branch mismatch {worst:.2e}"),
    )
}

fn c4_pi1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut contraction, mut exact_mismatches) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let rho = rng.random_range(1.0..500.0);
        let cfg = DualUpdateConfig {
            alpha: rng.random_range(0.01..1.0) * rho,
            rho,
            rule: DualRule::Pi1,
            nu_min: 0.0,
            delta_psi: 0.5,
        };
        let nu0 = rng.random_range(1e-3..10.0);
        let k = rng.random_range(1..40);
        let h = nu0 / rho + rng.random_range(0.0..2.0);
        let mut nu = nu0;
        for _ in 0..k {
            nu = update_pi1(nu, h, &cfg);
        }
        let expected = (1.0 - cfg.alpha / rho).powi(k) * nu0;
        contraction = contraction.max((nu - expected).abs() / (nu0 * k as f64));

        let full = DualUpdateConfig { alpha: rho, ..cfg };
        let (nu, h) = (rng.random_range(0.0..10.0), rng.random_range(-5.0..5.0));
        if update_pi1(nu, h, &full) != (nu - rho * h).max(0.0) {
            exact_mismatches += 1;
        }
    }
    verdict(
        4,
        contraction < 1e-13 && exact_mismatches == 0,
        format!("k-step error per step {contraction:.1e} of nu0; alpha = rho mismatches {exact_mismatches}/1000"),
    )
}

struct Run {
    label: &'static str,
    result: Result<MpcResult, Error>,
    secs: f64,
}

fn simulate(task: &Task, label: &'static str, strategy: PenaltyStrategy) -> Run {
    let cfg = MpcConfig {
        strategy,
        ..MpcConfig::default()
    };
    let start = Instant::now();
    let result = run_mpc(&task.ocp, &task.completion, &cfg);
    Run {
        label,
        result,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn describe(run: &Run) -> String {
    match &run.result {
        Ok(r) => {
            let s = &r.summary;
            let t = s.completion_time.map_or("never".to_string(), |t| format!("{t:.2} s"));
            format!(
                "{}: upright/goal {t}, max violation {:.4}, violation-L2 {:.4}, {:.1} s wall",
                run.label, s.max_applied_violation, s.mean_violation_l2, run.secs
            )
        }
        Err(e) => format!("{}: error ({e})", run.label),
    }
}

fn ok(run: &Run) -> Option<&MpcResult> {
    run.result.as_ref().ok()
}

fn c5_cartpole(runs: &[Run]) -> Verdict {
    let pass = runs.iter().all(|run| {
        ok(run).is_some_and(|r| {
            r.summary.completion_time.is_some_and(|t| t <= 6.0)
                && r.summary.max_applied_violation <= VIOLATION_TOL
                && !r.summary.aborted
        }) && run.secs < 120.0
    });
    verdict(5, pass, runs.iter().map(describe).collect::<Vec<_>>().join("; "))
}

fn mean_l2(run: &Run) -> f64 {
    ok(run).map_or(f64::INFINITY, |r| r.summary.mean_violation_l2)
}

fn c6_comparison(cartpole: &[Run], maze_al: &[Run], soft: &Run, stiff: &Run) -> Verdict {
    let ns = cartpole.iter().find(|r| r.label == "non-slack").unwrap();
    let a_pass = cartpole.iter().all(|r| mean_l2(ns) >= mean_l2(r));
    let l2: Vec<String> = cartpole
        .iter()
        .map(|r| format!("{} {:.4}", r.label, mean_l2(r)))
        .collect();

    let stiff_fails = match &stiff.result {
        Err(_) => true,
        Ok(r) => r.summary.aborted || !r.summary.completed || r.summary.max_applied_violation > VIOLATION_TOL,
    };
    let floor = ok(soft).map_or(f64::NAN, |r| r.summary.steady_state_cost);
    let al_costs: Vec<f64> = maze_al
        .iter()
        .map(|r| {
            ok(r)
                .filter(|r| r.summary.completed)
                .map_or(f64::INFINITY, |r| r.summary.steady_state_cost)
        })
        .collect();
    let floor_pass = floor > 0.0 && al_costs.iter().all(|&c| 100.0 * c <= floor);
    let b_pass = stiff_fails && floor_pass;
    verdict(
        6,
        a_pass && b_pass,
        format!(
            "(a) {}: cart-pole violation-L2 {}; (b) {}: stiff arm {}, soft floor {floor:.3}, AL steady cost {}",
            if a_pass { "pass" } else { "fail" },
            l2.join(", "),
            if b_pass { "pass" } else { "fail" },
            if stiff_fails {
                "fails or violates".to_string()
            } else {
                format!("succeeds ({})", describe(stiff))
            },
            al_costs
                .iter()
                .map(|c| format!("{c:.2e}"))
                .collect::<Vec<_>>()
                .join("/")
        ),
    )
}

fn c7_step_length(low: &Run, high: &Run) -> Verdict {
    let (l, h) = (mean_l2(low), mean_l2(high));
    verdict(7, l <= h, format!("violation-L2 alpha_low {l:.4} vs alpha_high {h:.4}"))
}

/// Euler transcription of one continuous LQ node over `dt`.
fn discretize(node: &LqNode, dt: f64) -> LqNode {
    let n = node.state_dim();
    LqNode {
        a: DMatrix::identity(n, n) + &node.a * dt,
        b: &node.b * dt,
        drift: &node.drift * dt,
        q: &node.q * dt,
        r: &node.r * dt,
        p: &node.p * dt,
        q_vec: &node.q_vec * dt,
        r_vec: &node.r_vec * dt,
        q0: node.q0 * dt,
    }
}

/// Dense KKT solve over `z = [x_0 … x_N, u_0 … u_{N−1}]`.
fn dense_kkt(
    stages: &[LqNode],
    eqs: &[alslq::LinearizedEquality],
    terminal: &LqTerminal,
    x0: &DVector<f64>,
) -> DiscreteSolution {
    let (nx, nu, n) = (stages[0].state_dim(), stages[0].input_dim(), stages.len());
    let ng = eqs[0].d.nrows();
    let nz = nx * (n + 1) + nu * n;
    let nc = nx * (n + 1) + ng * n;
    let xi = |k: usize| k * nx;
    let ui = |k: usize| nx * (n + 1) + k * nu;
    let mut hess = DMatrix::zeros(nz, nz);
    let mut grad = DVector::zeros(nz);
    let mut jac = DMatrix::zeros(nc, nz);
    let mut rhs = DVector::zeros(nc);
    jac.view_mut((0, 0), (nx, nx)).copy_from(&DMatrix::identity(nx, nx));
    rhs.rows_mut(0, nx).copy_from(x0);
    for (k, (s, e)) in stages.iter().zip(eqs).enumerate() {
        hess.view_mut((xi(k), xi(k)), (nx, nx)).copy_from(&s.q);
        hess.view_mut((ui(k), ui(k)), (nu, nu)).copy_from(&s.r);
        hess.view_mut((ui(k), xi(k)), (nu, nx)).copy_from(&s.p);
        hess.view_mut((xi(k), ui(k)), (nx, nu)).copy_from(&s.p.transpose());
        grad.rows_mut(xi(k), nx).copy_from(&s.q_vec);
        grad.rows_mut(ui(k), nu).copy_from(&s.r_vec);
        let row = nx * (k + 1);
        jac.view_mut((row, xi(k + 1)), (nx, nx))
            .copy_from(&DMatrix::identity(nx, nx));
        jac.view_mut((row, xi(k)), (nx, nx)).copy_from(&(-&s.a));
        jac.view_mut((row, ui(k)), (nx, nu)).copy_from(&(-&s.b));
        rhs.rows_mut(row, nx).copy_from(&s.drift);
        let row = nx * (n + 1) + ng * k;
        jac.view_mut((row, xi(k)), (ng, nx)).copy_from(&e.c);
        jac.view_mut((row, ui(k)), (ng, nu)).copy_from(&e.d);
        rhs.rows_mut(row, ng).copy_from(&(-&e.e));
    }
    hess.view_mut((xi(n), xi(n)), (nx, nx)).copy_from(&terminal.q);
    grad.rows_mut(xi(n), nx).copy_from(&terminal.q_vec);
    let mut kkt = DMatrix::zeros(nz + nc, nz + nc);
    kkt.view_mut((0, 0), (nz, nz)).copy_from(&hess);
    kkt.view_mut((nz, 0), (nc, nz)).copy_from(&jac);
    kkt.view_mut((0, nz), (nz, nc)).copy_from(&jac.transpose());
    let mut b = DVector::zeros(nz + nc);
    b.rows_mut(0, nz).copy_from(&(-grad));
    b.rows_mut(nz, nc).copy_from(&rhs);
    let sol = kkt.lu().solve(&b).expect("KKT matrix is nonsingular");
    let xs = (0..=n).map(|k| sol.rows(xi(k), nx).into_owned()).collect();
    let us = (0..n).map(|k| sol.rows(ui(k), nu).into_owned()).collect();
    (xs, us)
}

fn c8_projection() -> Verdict {
    let task = tasks::equality_toy().unwrap();
    let strategy = PenaltyStrategy::default();

    let mut solver = SlqSolver::new(task.ocp.clone(), strategy, SlqSettings::default()).unwrap();
    let nominal = solver.initial_nominal(&DVector::zeros(2)).unwrap();
    let nu = solver.zero_multipliers().unwrap();
    let before = solver.solve(nominal.clone(), &nu, 9, 0.0).unwrap().nominal;
    let lq = quadratize(solver.ocp(), &before, &nu, &strategy, QuadratizeOptions::default()).unwrap();
    let after = solver.slq_iterate(&before, &nu).unwrap().nominal;
    let grid = before.x.grid().clone();
    let (mut linear, mut nonlinear) = (0.0f64, 0.0f64);
    for (k, &t) in grid.nodes().iter().enumerate() {
        let dx = after.x.value(k) - before.x.value(k);
        let du = after.u.value(k) - before.u.value(k);
        linear = linear.max(lq.equalities[k].residual(&dx, &du).amax());
        let g = task
            .ocp
            .constraints
            .state_input_equality_values(after.x.value(k), after.u.value(k), t);
        nonlinear = nonlinear.max(g.amax());
    }

    let small_grid = TimeGrid::uniform(0.0, 1.0, 6).unwrap();
    let small = task.ocp.reanchored(task.ocp.x0.clone(), small_grid.clone());
    let zero = alslq::Nominal {
        x: alslq::Trajectory::constant(small_grid.clone(), DVector::from_column_slice(&[0.3, -0.1])).unwrap(),
        u: alslq::Trajectory::constant(small_grid.clone(), DVector::from_column_slice(&[0.2, 0.1])).unwrap(),
    };
    let nu_small = Multipliers::constant(&small, &small_grid, 0.0).unwrap();
    let lq = quadratize(&small, &zero, &nu_small, &strategy, QuadratizeOptions::default()).unwrap();
    let dt = small_grid.nodes()[1] - small_grid.nodes()[0];
    let stages: Vec<LqNode> = lq.nodes[..5].iter().map(|n| discretize(n, dt)).collect();
    let eqs = &lq.equalities[..5];
    let dx0 = &small.x0 - zero.x.value(0);
    let (xr, ur) = solve_projected_discrete(&stages, eqs, &lq.terminal, &dx0).unwrap();
    let (xk, uk) = dense_kkt(&stages, eqs, &lq.terminal, &dx0);
    let kkt_gap = xr
        .iter()
        .zip(&xk)
        .map(|(a, b)| (a - b).amax())
        .chain(ur.iter().zip(&uk).map(|(a, b)| (a - b).amax()))
        .fold(0.0, f64::max);

    verdict(
        8,
        linear < 1e-8 && nonlinear < 1e-4 && kkt_gap < 1e-6,
        format!("linearized residual {linear:.1e}, nonlinear residual {nonlinear:.1e}, projected Riccati vs dense KKT {kkt_gap:.1e}"),
    )
}

fn c9_real_time(runs: &[&Run]) -> Verdict {
    let mut worst_later = (1usize, 1usize);
    let mut first = Vec::new();
    let mut pass = true;
    for run in runs {
        let Some(r) = ok(run) else {
            pass = false;
            continue;
        };
        first.push(r.metrics[0].riccati_passes);
        pass &= r.metrics[0].riccati_passes == MpcConfig::default().initial_solve_iters;
        for m in &r.metrics[1..] {
            if (m.riccati_passes, m.dual_updates) != (1, 1) {
                pass = false;
                worst_later = (m.riccati_passes, m.dual_updates);
            }
        }
    }
    verdict(
        9,
        pass,
        format!(
            "tick 0 Riccati passes {first:?}; later ticks (passes, dual updates) = {worst_later:?} across {} runs",
            runs.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut verdicts = vec![c1_lqr_oracle(), c2_derivatives(), c3_junctions(), c4_pi1()];

    let cartpole = tasks::cartpole_swingup(CartPoleParams::default(), 5.0).unwrap();
    let methods = [
        simulate(&cartpole, "phr", PenaltyStrategy::phr(300.0, 10.0)),
        simulate(&cartpole, "smooth-phr", PenaltyStrategy::smooth_phr(300.0, 0.6)),
        simulate(&cartpole, "non-slack", PenaltyStrategy::non_slack(300.0, 30.0)),
    ];
    let alpha_low = simulate(&cartpole, "phr alpha_low", PenaltyStrategy::phr(300.0, 30.0));
    let alpha_high = simulate(&cartpole, "phr alpha_high", PenaltyStrategy::phr(300.0, 300.0));

    let maze = tasks::planar_maze(&PlanarMoverParams::default_maze()).unwrap();
    let maze_al = [
        simulate(&maze, "phr", PenaltyStrategy::phr(100.0, 10.0)),
        simulate(&maze, "non-slack", PenaltyStrategy::non_slack(100.0, 10.0)),
        simulate(&maze, "smooth-phr", PenaltyStrategy::smooth_phr(100.0, 0.5)),
    ];
    let soft = simulate(&maze, "soft barrier", PenaltyStrategy::relaxed_barrier(1.0, 0.1));
    let stiff = simulate(&maze, "stiff barrier", PenaltyStrategy::relaxed_barrier(1e-4, 1e-4));

    verdicts.push(c5_cartpole(&methods));
    verdicts.push(c6_comparison(&methods, &maze_al, &soft, &stiff));
    verdicts.push(c7_step_length(&alpha_low, &alpha_high));
    verdicts.push(c8_projection());
    let mut al_runs: Vec<&Run> = methods.iter().collect();
    al_runs.extend(maze_al.iter());
    verdicts.push(c9_real_time(&al_runs));

    let mut unexpected = 0;
    for v in &verdicts {
        let known = KNOWN_FAILING.contains(&v.id);
        println!(
            "C{} {} {}{}",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            if !v.pass && known { " [known]" } else { "" }
        );
        if !v.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
