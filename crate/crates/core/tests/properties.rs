//! Randomised invariants across modules.

use std::collections::HashMap;
use std::sync::Arc;

use boussinesq::estimator::{element_residuals, global_estimate, mark, DataApproximation, ElementIndicators};
use boussinesq::experiments::{compute_rates, RunConfig};
use boussinesq::forms::{
    assemble_a_s, assemble_a_t, Assembler, LinearizationState, PhysicalParams, ProblemData, SwitchingFunction,
};
use boussinesq::linalg::{solve_with, Ordering, SparseMatrix};
use boussinesq::manufactured::{error_norms, manufactured_data, ExactSolution, PatchSolution, Scaled, SmoothSolution};
use boussinesq::mesh::{rectangle, refine, BoundarySpec, FacetTag, Mesh};
use boussinesq::solver::{picard_solve, Solution, SolverConfig};
use boussinesq::space::basis::CellGeometry;
use boussinesq::space::{FeFunction, FieldSpaces, Space};
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn square(n: usize) -> Mesh {
    rectangle(-1.0, 1.0, -1.0, 1.0, n, n, &BoundarySpec::box_tags(-1.0, 1.0, -1.0, 1.0)).unwrap()
}

fn params_strategy() -> impl Strategy<Value = PhysicalParams> {
    (0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64, 0.0..5.0f64, 0.0..10.0f64, 1.0..100.0f64).prop_map(
        |(nu, alpha, kappa, beta, gamma, gamma_n)| PhysicalParams {
            nu,
            alpha,
            kappa,
            beta,
            gamma,
            gamma_n,
        },
    )
}

/// Refines `rounds` times, marking cells chosen by `seed`.
fn random_refinement(mut mesh: Mesh, rounds: usize, seed: u64) -> Vec<Mesh> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = vec![mesh.clone()];
    for _ in 0..rounds {
        let marked: Vec<usize> = (0..mesh.n_cells()).filter(|_| rng.gen_bool(0.2)).collect();
        mesh = refine(&mesh, &marked);
        out.push(mesh.clone());
    }
    out
}

fn on_square_boundary(p: [f64; 2]) -> bool {
    (p[0].abs() - 1.0).abs() < 1e-12 || (p[1].abs() - 1.0).abs() < 1e-12
}

/// Edges rebuilt from the triangle list alone: interior edges must have two
/// triangles and edges with one triangle must lie on the domain boundary.
fn conforming_by_reconstruction(mesh: &Mesh) -> bool {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let v = mesh.vertices();
    count.iter().all(|(&(a, b), &c)| match c {
        2 => true,
        1 => {
            let mid = [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])];
            on_square_boundary(v[a]) && on_square_boundary(v[b]) && on_square_boundary(mid)
        }
        _ => false,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_keeps_conformity_area_and_tags(n in 1usize..4, rounds in 1usize..8, seed in any::<u64>()) {
        let meshes = random_refinement(square(n), rounds, seed);
        let lengths = |m: &Mesh| [FacetTag::Inlet, FacetTag::Wall, FacetTag::Outlet].map(|t| m.tagged_length(t));
        let base = lengths(&meshes[0]);
        for m in &meshes {
            m.validate().unwrap();
            prop_assert!(conforming_by_reconstruction(m));
            prop_assert!((m.area() - 4.0).abs() <= 4e-12);
            let l = lengths(m);
            for k in 0..3 {
                prop_assert!((l[k] - base[k]).abs() <= 1e-12);
            }
            for f in m.facets().iter().filter(|f| f.is_boundary()) {
                let mid = m.facet_midpoint(m.facets().iter().position(|g| g == f).unwrap());
                let expected = if (mid[1].abs() - 1.0).abs() < 1e-12 {
                    FacetTag::Inlet
                } else if (mid[0] + 1.0).abs() < 1e-12 {
                    FacetTag::Wall
                } else {
                    FacetTag::Outlet
                };
                prop_assert_eq!(f.tag, expected);
            }
        }
    }

    #[test]
    fn shape_regularity_stays_bounded(seed in any::<u64>()) {
        let meshes = random_refinement(square(2), 10, seed);
        let first = meshes[0].shape_regularity();
        for m in &meshes {
            prop_assert!(m.shape_regularity() <= 4.0 * first);
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum(a in 0.0..1.0f64, b in 0.0..1.0f64, skew in -0.5..0.5f64) {
        let lam = if a + b <= 1.0 { [1.0 - a - b, a, b] } else { [a + b - 1.0, 1.0 - b, 1.0 - a] };
        let geo = CellGeometry::from_vertices([[0.0, 0.0], [1.3, 0.2], [skew, 0.9]]);
        let mesh = Arc::new(square(1));
        for degree in [1, 2] {
            let space = Space::scalar(mesh.clone(), degree).unwrap();
            let n = space.nodes_per_cell();
            let vals = space.shape_values(&lam);
            let grads = space.shape_grads(&geo, &lam);
            prop_assert!((vals[..n].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for d in 0..2 {
                prop_assert!(grads[..n].iter().map(|g| g[d]).sum::<f64>().abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn discrete_fields_are_continuous_across_facets(n in 1usize..4, seed in any::<u64>()) {
        let mesh = Arc::new(square(n));
        let mut rng = StdRng::seed_from_u64(seed);
        for degree in [1, 2] {
            let space = Arc::new(Space::scalar(mesh.clone(), degree).unwrap());
            let coeffs = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = FeFunction::new(space, coeffs).unwrap();
            for (fi, f) in mesh.facets().iter().enumerate() {
                if f.is_boundary() {
                    continue;
                }
                let (c0, p0) = boussinesq::forms::facet_points(&mesh, fi, 0);
                let (c1, p1) = boussinesq::forms::facet_points(&mesh, fi, 1);
                for q in &p0 {
                    let r = p1
                        .iter()
                        .find(|r| (r.x[0] - q.x[0]).hypot(r.x[1] - q.x[1]) < 1e-13)
                        .expect("matching facet point");
                    prop_assert!((u.value(c0, 0, &q.lam) - u.value(c1, 0, &r.lam)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn energy_norms_are_homogeneous(seed in any::<u64>(), s in -5.0..5.0f64) {
        let spaces = FieldSpaces::taylor_hood(Arc::new(square(2)));
        let mut rng = StdRng::seed_from_u64(seed);
        let x: Vec<f64> = (0..spaces.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let (a, b) = (spaces.energy_norms(&x), spaces.energy_norms(&sx));
        for (p, q) in [(a.velocity, b.velocity), (a.temperature, b.temperature), (a.pressure, b.pressure), (a.triple, b.triple)] {
            prop_assert!((q - s.abs() * p).abs() <= 1e-12 * (1.0 + q));
        }
    }

    #[test]
    fn solve_inverts_matvec(n in 5usize..60, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = rng.gen_range(-1.0..1.0);
                    off += f64::abs(v);
                    t.push((i, j, v));
                }
            }
            t.push((i, i, off + rng.gen_range(0.5..2.0)));
        }
        let a = SparseMatrix::from_triplets(n, &t).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        for ordering in [Ordering::Natural, Ordering::ReverseCuthillMcKee, Ordering::NestedDissection] {
            let y = solve_with(&a, &b, ordering).unwrap();
            let err = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let norm = x.iter().map(|p| p * p).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9 * norm);
        }
    }

    #[test]
    fn nitsche_blocks_are_symmetric(params in params_strategy(), n in 1usize..4) {
        let spaces = FieldSpaces::taylor_hood(Arc::new(square(n)));
        let a = assemble_a_s(&params, &spaces).to_csr().unwrap();
        let t = assemble_a_t(&params, &spaces).to_csr().unwrap();
        prop_assert!(a.asymmetry(0..spaces.n_dofs()) <= 1e-12 * (1.0 + params.gamma_n + params.nu));
        prop_assert!(t.asymmetry(0..spaces.n_dofs()) <= 1e-12 * (1.0 + params.gamma_n + params.kappa));
    }

    #[test]
    fn penalty_only_touches_dirichlet_traces(params in params_strategy()) {
        let spaces = FieldSpaces::taylor_hood(Arc::new(square(2)));
        let doubled = PhysicalParams { gamma_n: 2.0 * params.gamma_n, ..params };
        let coords = spaces.velocity.dof_coordinates();
        let ns = spaces.velocity.n_scalar_dofs();
        let on_trace = |i: usize| {
            let p = if i < spaces.pressure_offset() {
                coords[i % ns]
            } else if i >= spaces.temperature_offset() {
                coords[i - spaces.temperature_offset()]
            } else {
                return false;
            };
            (p[1].abs() - 1.0).abs() < 1e-12 || (p[0] + 1.0).abs() < 1e-12
        };
        for assemble in [assemble_a_s, assemble_a_t] {
            let a = assemble(&params, &spaces).to_dense();
            let b = assemble(&doubled, &spaces).to_dense();
            for i in 0..a.len() {
                for j in 0..a.len() {
                    if !(on_trace(i) && on_trace(j)) {
                        prop_assert_eq!(a[i][j].to_bits(), b[i][j].to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn in_space_solution_satisfies_the_discrete_equations(params in params_strategy(), n in 1usize..4) {
        let spaces = FieldSpaces::taylor_hood(Arc::new(square(n)));
        let exact = PatchSolution;
        let data = manufactured_data(Arc::new(exact), &params, SwitchingFunction::PositivePart);
        let u = FeFunction::interpolate_vector(spaces.velocity.clone(), |x| exact.u(x)).unwrap();
        let p = FeFunction::interpolate(spaces.pressure.clone(), |x| exact.p(x)).unwrap();
        let t = FeFunction::interpolate(spaces.temperature.clone(), |x| exact.theta(x)).unwrap();
        let x = spaces.join(&u, &p, &t);
        let assembler = Assembler::new(spaces.clone(), params, data).unwrap();
        let sys = assembler.linearized_system(&LinearizationState::from_block(&spaces, &x).unwrap()).unwrap();
        prop_assert!(sys.relative_residual(&x) <= 1e-10);
    }

    #[test]
    fn linear_fields_have_no_interior_jumps(a in prop::array::uniform9(-2.0..2.0f64), n in 1usize..4) {
        let spaces = FieldSpaces::taylor_hood(Arc::new(square(n)));
        let u = FeFunction::interpolate_vector(spaces.velocity.clone(), |x| {
            [a[0] + a[1] * x[0] + a[2] * x[1], a[3] + a[4] * x[0] - a[1] * x[1]]
        })
        .unwrap();
        let p = FeFunction::interpolate(spaces.pressure.clone(), |x| a[5] + a[6] * x[0]).unwrap();
        let t = FeFunction::interpolate(spaces.temperature.clone(), |x| a[7] * x[0] + a[8] * x[1]).unwrap();
        let sol = Solution { coeffs: spaces.join(&u, &p, &t), spaces };
        let params = RunConfig::convergence().params;
        let ind = element_residuals(&sol, &params, &ProblemData::homogeneous(), DataApproximation::Exact);
        prop_assert!(ind.re.iter().all(|&v| v <= 1e-24));
    }

    #[test]
    fn estimate_is_the_sum_of_its_parts(seed in any::<u64>()) {
        let spaces = FieldSpaces::taylor_hood(Arc::new(square(2)));
        let mut rng = StdRng::seed_from_u64(seed);
        let coeffs = (0..spaces.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = Solution { spaces, coeffs };
        let cfg = RunConfig::convergence();
        let ind = element_residuals(&sol, &cfg.params, &cfg.problem_data(), DataApproximation::Interpolant);
        for k in 0..ind.len() {
            let parts = ind.rk[k] + ind.re[k] + ind.j1[k] + ind.j2[k];
            prop_assert!((ind.total[k] - parts).abs() <= 1e-12 * parts);
        }
        let sum: f64 = ind.total.iter().sum();
        prop_assert!((global_estimate(&ind).powi(2) - sum).abs() <= 1e-12 * sum);
    }

    #[test]
    fn larger_eta_never_marks_more(values in prop::collection::vec(0.0..1.0f64, 1..60), e1 in 0.01..1.0f64, e2 in 0.01..1.0f64) {
        let mut ind = ElementIndicators::zeros(values.len());
        ind.total = values;
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let small = mark(&ind, hi).unwrap();
        let large = mark(&ind, lo).unwrap();
        prop_assert!(small.iter().all(|c| large.contains(c)));
    }

    #[test]
    fn rates_recover_power_laws(r in 0.5..4.0f64, c in 1e-3..1e3f64, h0 in 0.1..1.0f64, levels in 2usize..7) {
        let hs: Vec<f64> = (0..levels).map(|i| h0 / 2f64.powi(i as i32)).collect();
        let errors: Vec<f64> = hs.iter().map(|h| c * h.powf(r)).collect();
        let rates = compute_rates(&errors, &hs).unwrap();
        prop_assert!(rates[0].is_none());
        for rate in &rates[1..] {
            prop_assert!((rate.unwrap() - r).abs() <= 1e-10);
        }
    }

    #[test]
    fn config_text_round_trips(nu in 0.01..100.0f64, eta in 0.05..1.0f64, levels in 1usize..6, gamma_n in 0.5..500.0f64) {
        let mut cfg = RunConfig::convergence();
        for (k, v) in [("nu", nu.to_string()), ("eta", eta.to_string()), ("levels", levels.to_string()), ("gamma_n", gamma_n.to_string())] {
            cfg.set(k, &v).unwrap();
        }
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.to_pairs(), cfg.to_pairs());
        prop_assert_eq!(back.params, cfg.params);
    }
}

#[test]
fn picard_is_deterministic_and_a_fixed_point() {
    let cfg = RunConfig::convergence();
    let data = cfg.problem_data();
    let mesh = Arc::new(square(4));
    let solver = SolverConfig { tol_rel: 1e-9, ..cfg.solver };
    let (a, ra) = picard_solve(mesh.clone(), &cfg.params, &data, &solver).unwrap();
    let (b, rb) = picard_solve(mesh, &cfg.params, &data, &solver).unwrap();
    assert_eq!(ra, rb);
    assert!(a.coeffs.iter().zip(&b.coeffs).all(|(p, q)| p.to_bits() == q.to_bits()));
    assert!(ra.converged);
    assert_eq!(ra.increments().len(), ra.iterations);
    assert!(ra.residual <= 10.0 * solver.tol_rel, "residual {}", ra.residual);
}

/// With zero discrete velocity and zero buoyancy direction the residuals are
/// linear, so doubling data, exact and discrete fields leaves Effec unchanged.
#[test]
fn effectivity_is_scale_invariant_in_the_linear_case() {
    let cfg = RunConfig::convergence();
    let data = ProblemData {
        f: Arc::new(|_| [0.0; 2]),
        ..cfg.problem_data()
    };
    let spaces = FieldSpaces::taylor_hood(Arc::new(square(4)));
    let mut rng = StdRng::seed_from_u64(5);
    let x: Vec<f64> = (0..spaces.n_dofs())
        .map(|i| if i < spaces.pressure_offset() { 0.0 } else { rng.gen_range(-1.0..1.0) })
        .collect();
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let effec = |x: Vec<f64>, data: &ProblemData, exact: &dyn ExactSolution| {
        let err = error_norms(&spaces, &x, exact).triple;
        let sol = Solution { spaces: spaces.clone(), coeffs: x };
        global_estimate(&element_residuals(&sol, &cfg.params, data, DataApproximation::Interpolant)) / err
    };
    let e1 = effec(x, &data, &SmoothSolution);
    let e2 = effec(x2, &data.scaled(2.0), &Scaled(SmoothSolution, 2.0));
    assert!((e1 - e2).abs() <= 1e-12 * e1, "{e1} vs {e2}");
}
