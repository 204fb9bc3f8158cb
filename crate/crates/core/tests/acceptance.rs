//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use boussinesq::estimator::{element_residuals, DataApproximation, EstimatorOptions, InletResidual, Round};
use boussinesq::experiments::{run_adaptive, run_convergence, ConvergenceRow, RunConfig};
use boussinesq::forms::{
    assemble_a_s, assemble_a_t, assemble_b, assemble_d, assemble_loads, assemble_o_s, assemble_o_t, Compensation,
    PhysicalParams, ProblemData, SwitchingFunction,
};
use boussinesq::manufactured::{manufactured_data, ExactSolution, PatchSolution};
use boussinesq::mesh::{rectangle, BoundaryKind, BoundarySpec, Mesh, RefinementEdge, L_SHAPE_CORNER};
use boussinesq::solver::{picard_solve, InitialGuess, SolverConfig};
use boussinesq::space::{FeFunction, FieldSpaces};
use rand::{rngs::StdRng, Rng, SeedableRng};

type Outcome = Result<String, String>;

/// Reference errors at levels 1-4: gradient of velocity, pressure, gradient of temperature.
const REF_GRAD_U: [f64; 4] = [8.3e-3, 2.0e-3, 5.6e-4, 1.2e-4];
const REF_P: [f64; 4] = [1.2e-2, 2.9e-3, 7.2e-4, 1.8e-4];
const REF_GRAD_THETA: [f64; 4] = [2.6e-2, 6.7e-3, 1.7e-3, 4.2e-4];

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn in_range(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|r| (lo..=hi).contains(&r))
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("-".into(), |r| format!("{r:.2}"))
}

fn convergence(rows: &[ConvergenceRow], seconds: f64) -> Outcome {
    if rows.len() != 4 {
        return Err(format!("only {} of 4 levels completed", rows.len()));
    }
    let mut ok = seconds <= 300.0;
    let mut detail = format!("{seconds:.1}s;");
    for r in &rows[2..] {
        for (name, rate) in [("grad u", r.rate_grad_u), ("p", r.rate_p), ("grad theta", r.rate_grad_theta)] {
            ok &= in_range(rate, 1.7, 2.4);
            detail += &format!(" L{} r({name})={}", r.level, fmt_rate(rate));
        }
    }
    let mut worst = 1.0f64;
    for (i, r) in rows.iter().enumerate() {
        for (e, t) in [
            (r.err_grad_u, REF_GRAD_U[i]),
            (r.err_p, REF_P[i]),
            (r.err_grad_theta, REF_GRAD_THETA[i]),
        ] {
            worst = worst.max((e / t).max(t / e));
        }
    }
    ok &= worst <= 3.0;
    verdict(ok, format!("{detail}; worst factor to reference {worst:.2}"))
}

fn estimator_rate(rows: &[ConvergenceRow]) -> Outcome {
    let rates: Vec<Option<f64>> = rows.iter().skip(1).map(|r| r.rate_psi).collect();
    let ok = rows.len() == 4 && rates.iter().all(|&r| in_range(r, 1.8, 2.2));
    verdict(ok, format!("r(Psi) = {}", rates.iter().map(|&r| fmt_rate(r)).collect::<Vec<_>>().join(", ")))
}

fn effectivity(rows: &[ConvergenceRow]) -> Outcome {
    let eff: Vec<f64> = rows.iter().filter_map(|r| r.effec).collect();
    let mut ok = eff.len() == 4 && eff.iter().all(|e| (10.0..=100.0).contains(e));
    for w in eff.windows(2) {
        ok &= w[1].max(w[0]) / w[1].min(w[0]) < 2.0;
    }
    verdict(ok, format!("Effec = {}", eff.iter().map(|e| format!("{e:.2}")).collect::<Vec<_>>().join(", ")))
}

fn patch_test() -> Outcome {
    let cfg = RunConfig::convergence();
    let mesh = Arc::new(
        rectangle(-1.0, 1.0, -1.0, 1.0, 4, 4, &BoundarySpec::box_tags(-1.0, 1.0, -1.0, 1.0)).map_err(|e| e.to_string())?,
    );
    let exact = PatchSolution;
    let data = manufactured_data(Arc::new(exact), &cfg.params, SwitchingFunction::Zero);
    let (sol, report) = picard_solve(mesh, &cfg.params, &data, &cfg.solver).map_err(|e| e.to_string())?;
    let spaces = &sol.spaces;
    let u = FeFunction::interpolate_vector(spaces.velocity.clone(), |x| exact.u(x)).unwrap();
    let p = FeFunction::interpolate(spaces.pressure.clone(), |x| exact.p(x)).unwrap();
    let t = FeFunction::interpolate(spaces.temperature.clone(), |x| exact.theta(x)).unwrap();
    let diff: Vec<f64> = spaces.join(&u, &p, &t).iter().zip(&sol.coeffs).map(|(a, b)| a - b).collect();
    let err = spaces.energy_norms(&diff).triple;
    let ind = element_residuals(&sol, &cfg.params, &data, DataApproximation::Exact);
    let worst = ind.total.iter().map(|v| v.sqrt()).fold(0.0, f64::max);
    verdict(
        report.converged && err <= 1e-8 && worst <= 1e-7,
        format!("error {err:.2e}, largest indicator {worst:.2e}, {} iterations", report.iterations),
    )
}

/// Minimum and number of non-positive Rayleigh quotients of A_S and A_T.
fn quotients(mesh: Arc<Mesh>, params: &PhysicalParams, samples: usize, seed: u64) -> [(f64, usize); 2] {
    let spaces = FieldSpaces::taylor_hood(mesh);
    let a_s = assemble_a_s(params, &spaces).to_csr().unwrap();
    let a_t = assemble_a_t(params, &spaces).to_csr().unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = [(f64::INFINITY, 0); 2];
    for _ in 0..samples {
        let mut x = vec![0.0; spaces.n_dofs()];
        for (i, xi) in x.iter_mut().enumerate() {
            if i < spaces.pressure_offset() || i >= spaces.temperature_offset() {
                *xi = rng.gen_range(-1.0..1.0);
            }
        }
        let norms = spaces.energy_norms(&x);
        for (k, (a, n)) in [(&a_s, norms.velocity), (&a_t, norms.temperature)].into_iter().enumerate() {
            let q = x.iter().zip(a.matvec(&x)).map(|(a, b)| a * b).sum::<f64>() / (n * n);
            out[k].0 = out[k].0.min(q);
            out[k].1 += usize::from(q <= 0.0);
        }
    }
    out
}

fn coercivity() -> Outcome {
    let base = RunConfig::convergence().params;
    let square = |n| {
        Arc::new(rectangle(-1.0, 1.0, -1.0, 1.0, n, n, &BoundarySpec::box_tags(-1.0, 1.0, -1.0, 1.0)).unwrap())
    };
    let large = PhysicalParams { gamma_n: 100.0, ..base };
    let small = PhysicalParams { gamma_n: 0.01, ..base };
    let mut ok = true;
    let mut detail = String::new();
    for n in [1, 8] {
        let [(ms, ns), (mt, nt)] = quotients(square(n), &large, 200, 1);
        ok &= ns == 0 && nt == 0;
        detail += &format!("gamma_N=100 {n}x{n}: min A_S {ms:.3}, min A_T {mt:.3}; ");
    }
    let coarse = square(1);
    assert!(coarse.tagged_length(boussinesq::mesh::FacetTag::Inlet) > 0.0);
    let [(ms, ns), _] = quotients(coarse, &small, 200, 1);
    ok &= ns >= 1;
    verdict(ok, format!("{detail}gamma_N=0.01 1x1: min A_S {ms:.3} ({ns}/200 non-positive)"))
}

fn oracle() -> Outcome {
    let spec = BoundarySpec::from_fn(|p: [f64; 2]| {
        Some(if (p[0] - 2.0).abs() < 1e-12 {
            BoundaryKind::Outlet
        } else if (p[1] - 1.5).abs() < 1e-12 {
            BoundaryKind::Wall
        } else {
            BoundaryKind::Inlet
        })
    });
    let meshes = [
        rectangle(0.0, 1.0, 0.0, 1.0, 2, 2, &BoundarySpec::box_tags(0.0, 1.0, 0.0, 1.0)).unwrap(),
        Mesh::from_triangles(
            vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.5], [0.0, 1.5], [0.7, 0.6]],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
            &spec,
            RefinementEdge::AsGiven,
        )
        .unwrap(),
    ];
    let params = PhysicalParams {
        nu: 0.7,
        alpha: 1.3,
        kappa: 0.4,
        beta: 2.5,
        gamma: 3.0,
        gamma_n: 11.0,
    };
    let data = ProblemData {
        f: Arc::new(|x: [f64; 2]| [1.0 + x[0] - x[1] * x[1], 0.5 * x[0] * x[1]]),
        g: Arc::new(|x: [f64; 2]| 1.0 + x[0] * x[1] * x[1]),
        u_star: Arc::new(|x: [f64; 2]| [x[0] * x[0] - x[1], 1.0 + x[0] * x[1]]),
        theta_star: Arc::new(|x: [f64; 2]| 1.0 + x[0] - x[1] * x[1]),
        psi: SwitchingFunction::PositivePart,
        compensation: Compensation {
            r_w: Some(Arc::new(|x: [f64; 2], _| 0.3 + x[0] * x[1])),
            t_w: Some(Arc::new(|x: [f64; 2], _| 1.0 - x[0])),
            t_o: Some(Arc::new(|x: [f64; 2], _| [x[0], x[1] * x[1]])),
            q_w: Some(Arc::new(|x: [f64; 2], _| x[0] - x[1])),
            q_o: Some(Arc::new(|x: [f64; 2], _| 1.0 + x[1])),
            ..Compensation::default()
        },
    };
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for mesh in meshes {
        let spaces = FieldSpaces::taylor_hood(Arc::new(mesh));
        let u = FeFunction::interpolate_vector(spaces.velocity.clone(), |x| [2.0 + x[1], 0.5 - x[0] * x[1]]).unwrap();
        let mut x: Vec<f64> = (0..spaces.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        x[..u.coeffs().len()].copy_from_slice(u.coeffs());
        let (w, _, theta) = spaces.split(&x).unwrap();
        let psi = SwitchingFunction::PositivePart;
        let f = data.f.clone();
        worst = worst
            .max(common::max_rel_diff(&assemble_a_s(&params, &spaces).to_dense(), &common::a_s(&params, &spaces)))
            .max(common::max_rel_diff(&assemble_b(&spaces).to_dense(), &common::b(&spaces)))
            .max(common::max_rel_diff(&assemble_o_s(&spaces, &w).to_dense(), &common::o_s(&spaces, &x)))
            .max(common::max_rel_diff_vec(
                &assemble_d(&spaces, &params, &theta, &data.f),
                &common::d(&spaces, &params, &x, &move |p| f(p)),
            ))
            .max(common::max_rel_diff(&assemble_a_t(&params, &spaces).to_dense(), &common::a_t(&params, &spaces)))
            .max(common::max_rel_diff(&assemble_o_t(&spaces, &w, &psi).to_dense(), &common::o_t(&spaces, &x, &psi)))
            .max(common::max_rel_diff_vec(
                &assemble_loads(&params, &data, &spaces),
                &common::loads(&params, &data, &spaces),
            ));
    }
    verdict(worst <= 1e-12, format!("largest entrywise mismatch {worst:.2e}"))
}

/// Fraction of cells marked in rounds 1-5 that lie within 0.25 of the corner.
fn corner_fraction(rounds: &[Round]) -> (usize, usize) {
    let mut near = 0;
    let mut total = 0;
    for r in rounds.iter().take(5) {
        for c in r.marked_centroids() {
            total += 1;
            near += usize::from((c[0] - L_SHAPE_CORNER[0]).hypot(c[1] - L_SHAPE_CORNER[1]) <= 0.25);
        }
    }
    (near, total)
}

fn adaptive() -> Outcome {
    let l = run_adaptive(&RunConfig::adaptive_l_shape(), |_| {}).map_err(|e| e.to_string())?;
    let (near, total) = corner_fraction(&l.rounds);
    let psi: Vec<f64> = l.rows.iter().map(|r| r.psi).collect();
    let increases: Vec<bool> = psi.windows(2).map(|w| w[1] >= w[0]).collect();
    let worst_window = increases.windows(5).map(|w| w.iter().filter(|&&b| b).count()).max().unwrap_or(0);
    let t = run_adaptive(&RunConfig::adaptive_t_shape(), |_| {}).map_err(|e| e.to_string())?;
    let ok = l.error.is_none()
        && total > 0
        && 2 * near >= total
        && worst_window <= 1
        && t.error.is_none()
        && t.rows.len() == 15
        && t.converged();
    verdict(
        ok,
        format!(
            "L-shape: {near}/{total} marked near corner, Psi {:.3e} -> {:.3e}, at most {worst_window} rise per 5 steps; \
             T-shape: {} rounds, {} -> {} DOFs",
            psi.first().copied().unwrap_or(f64::NAN),
            psi.last().copied().unwrap_or(f64::NAN),
            t.rows.len(),
            t.rows.first().map_or(0, |r| r.dofs),
            t.rows.last().map_or(0, |r| r.dofs),
        ),
    )
}

/// Corner fraction when the inlet flux and traction residuals are kept as displayed.
fn literal_inlet_residuals() -> String {
    let mut cfg = RunConfig::adaptive_l_shape();
    cfg.rounds = 5;
    cfg.estimator = EstimatorOptions {
        inlet: InletResidual::Displayed,
        ..cfg.estimator
    };
    match run_adaptive(&cfg, |_| {}) {
        Ok(run) => {
            let (near, total) = corner_fraction(&run.rounds);
            format!("L-shape with inlet flux residuals: {near}/{total} marked near corner in rounds 1-5")
        }
        Err(e) => format!("L-shape with inlet flux residuals failed: {e}"),
    }
}

fn contraction() -> Outcome {
    let cfg = RunConfig::convergence();
    let data = cfg.problem_data().scaled(0.1);
    let mesh = cfg.build_mesh().map_err(|e| e.to_string())?;
    let solver = SolverConfig {
        initial_guess: InitialGuess::Zero,
        max_iters: 15,
        ..cfg.solver
    };
    let (_, report) = picard_solve(mesh, &cfg.params, &data, &solver).map_err(|e| e.to_string())?;
    let ratios = report.increment_ratios();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    verdict(
        report.converged && report.iterations <= 15 && worst < 1.0,
        format!("{} iterations, largest increment ratio {worst:.3}", report.iterations),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {id} {name}: {detail}");
    };

    let start = Instant::now();
    let run = run_convergence(&RunConfig::convergence());
    let seconds = start.elapsed().as_secs_f64();
    match run {
        Ok(run) => {
            report(1, "uniform convergence", convergence(&run.rows, seconds));
            report(2, "estimator rate", estimator_rate(&run.rows));
            report(3, "effectivity", effectivity(&run.rows));
        }
        Err(e) => {
            for (id, name) in [(1, "uniform convergence"), (2, "estimator rate"), (3, "effectivity")] {
                report(id, name, Err(e.to_string()));
            }
        }
    }
    report(4, "patch test", patch_test());
    report(5, "coercivity", coercivity());
    report(6, "oracle equivalence", oracle());
    report(7, "adaptive refinement", adaptive());
    println!("INFO 7 {}", literal_inlet_residuals());
    report(8, "Picard contraction", contraction());

    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
