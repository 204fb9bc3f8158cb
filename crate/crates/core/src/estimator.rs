//! Residual a posteriori error estimator, marking and the adaptive loop.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{facet_points, Assembler, PhysicalParams, ProblemData, VOLUME_EXACTNESS};
use crate::geom::Point;
use crate::mesh::{refine, FacetTag, Mesh};
use crate::solver::{picard_with, Solution, SolveReport, SolverConfig};
use crate::space::{basis, quadrature, CellFields, FieldSpaces, PointFields};

/// How `f` and `g` enter the element residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataApproximation {
    /// Nodal P2 interpolants `f_h`, `g_h`.
    #[default]
    Interpolant,
    /// The data closures themselves, so smooth data adds no oscillation.
    Exact,
}

/// Treatment of the traction and flux residuals on inlet facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InletResidual {
    /// `h_E ||(p_h I - 2 nu eps(u_h)) n + t_I||^2` and
    /// `h_E (-kappa grad theta_h . n + q_I)^2` are included.
    #[default]
    Displayed,
    /// Only the penalty misfits `h_E^-1 ||u_h - u_*||^2` and
    /// `h_E^-1 (theta_h - theta_*)^2` are kept. Without prescribed inlet
    /// traction and flux the dropped terms measure the physical boundary flux,
    /// which does not vanish under refinement.
    Omitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EstimatorOptions {
    pub data: DataApproximation,
    pub inlet: InletResidual,
}

impl From<DataApproximation> for EstimatorOptions {
    fn from(data: DataApproximation) -> Self {
        EstimatorOptions {
            data,
            ..Default::default()
        }
    }
}

/// Per-cell indicator contributions, all squared.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ElementIndicators {
    /// `h_K^2 (||R_1||^2 + ||R_2||^2)` on `K`.
    pub rk: Vec<f64>,
    /// `h_E (||R_1E||^2 + ||R_2E||^2)` summed over the interior facets of `K`.
    pub re: Vec<f64>,
    /// Momentum and continuity terms on the boundary facets of `K`.
    pub j1: Vec<f64>,
    /// Energy terms on the boundary facets of `K`.
    pub j2: Vec<f64>,
    /// `Psi_K^2 = rk + re + j1 + j2`.
    pub total: Vec<f64>,
}

impl ElementIndicators {
    pub fn zeros(n: usize) -> Self {
        ElementIndicators {
            rk: vec![0.0; n],
            re: vec![0.0; n],
            j1: vec![0.0; n],
            j2: vec![0.0; n],
            total: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    /// `Psi_K` (not squared).
    pub fn psi(&self) -> Vec<f64> {
        self.total.iter().map(|t| t.sqrt()).collect()
    }

    fn finish(&mut self) {
        for k in 0..self.total.len() {
            self.total[k] = self.rk[k] + self.re[k] + self.j1[k] + self.j2[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub indicators: ElementIndicators,
    /// Global `Psi`.
    pub estimate: f64,
    pub effectivity: Option<f64>,
}

impl EstimatorReport {
    pub fn new(indicators: ElementIndicators) -> Self {
        let estimate = global_estimate(&indicators);
        EstimatorReport {
            indicators,
            estimate,
            effectivity: None,
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `(p I - 2 nu eps(u)) n`.
fn pseudo_traction(pf: &PointFields, n: [f64; 2], nu: f64) -> [f64; 2] {
    let g = pf.grad_u;
    let e01 = 0.5 * (g[0][1] + g[1][0]);
    [
        pf.p * n[0] - 2.0 * nu * (g[0][0] * n[0] + e01 * n[1]),
        pf.p * n[1] - 2.0 * nu * (e01 * n[0] + g[1][1] * n[1]),
    ]
}

/// Source evaluation on one cell, either exact or through nodal interpolants.
struct CellData<'a> {
    data: &'a ProblemData,
    nodal: Option<([[f64; 2]; 6], [f64; 6])>,
}

impl<'a> CellData<'a> {
    fn new(data: &'a ProblemData, mode: DataApproximation, v: &[Point; 3]) -> Self {
        let nodal = match mode {
            DataApproximation::Exact => None,
            DataApproximation::Interpolant => {
                let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let nodes = [v[0], v[1], v[2], mid(v[0], v[1]), mid(v[1], v[2]), mid(v[2], v[0])];
                Some((nodes.map(|x| (data.f)(x)), nodes.map(|x| (data.g)(x))))
            }
        };
        CellData { data, nodal }
    }

    fn eval(&self, lam: &[f64; 3], x: Point) -> ([f64; 2], f64) {
        match &self.nodal {
            None => ((self.data.f)(x), (self.data.g)(x)),
            Some((f, g)) => {
                let phi = basis::p2_values(lam);
                let mut fh = [0.0; 2];
                let mut gh = 0.0;
                for a in 0..6 {
                    fh[0] += phi[a] * f[a][0];
                    fh[1] += phi[a] * f[a][1];
                    gh += phi[a] * g[a];
                }
                (fh, gh)
            }
        }
    }
}

/// Indicator contributions of every cell of `sol`.
pub fn element_residuals(
    sol: &Solution,
    params: &PhysicalParams,
    data: &ProblemData,
    options: impl Into<EstimatorOptions>,
) -> ElementIndicators {
    let EstimatorOptions { data: mode, inlet } = options.into();
    let inlet_flux = if inlet == InletResidual::Displayed { 1.0 } else { 0.0 };
    let spaces = &sol.spaces;
    let x = &sol.coeffs;
    let mesh = spaces.mesh();
    let PhysicalParams {
        nu,
        alpha,
        kappa,
        beta,
        gamma,
        ..
    } = *params;
    let mut ind = ElementIndicators::zeros(mesh.n_cells());
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    let fields: Vec<CellFields> = (0..mesh.n_cells()).map(|c| spaces.cell_fields(x, c)).collect();

    for (c, cf) in fields.iter().enumerate() {
        let cd = CellData::new(data, mode, &cf.geo.vertices);
        let hk = mesh.cell_diameter(c);
        let mut s = 0.0;
        for (lam, w) in rule.iter() {
            let xq = cf.geo.point(lam);
            let pf = cf.at(lam);
            let (fh, gh) = cd.eval(lam, xq);
            let g = pf.grad_u;
            let mut r1 = [0.0; 2];
            for i in 0..2 {
                r1[i] = alpha * pf.theta * fh[i] + nu * pf.lap_u[i] - dot(g[i], pf.u) - pf.grad_p[i];
            }
            let r2 = gh + kappa * pf.lap_theta - dot(pf.u, pf.grad_theta);
            s += 2.0 * cf.geo.area * w * (dot(r1, r1) + r2 * r2);
        }
        ind.rk[c] = hk * hk * s;
    }

    for f in 0..mesh.n_facets() {
        let facet = &mesh.facets()[f];
        let fg = mesh.facet_geometry(f);
        let (n, he) = (fg.normal, fg.length);
        match facet.cells.1 {
            Some(_) => {
                let (c0, p0) = facet_points(mesh, f, 0);
                let (c1, p1) = facet_points(mesh, f, 1);
                let mut s = 0.0;
                for (a, b) in p0.iter().zip(&p1) {
                    let (fa, fb) = (fields[c0].at(&a.lam), fields[c1].at(&b.lam));
                    let (ta, tb) = (pseudo_traction(&fa, n, nu), pseudo_traction(&fb, n, nu));
                    let j1 = [0.5 * (ta[0] - tb[0]), 0.5 * (ta[1] - tb[1])];
                    let j2 = -0.5 * kappa * (dot(fa.grad_theta, n) - dot(fb.grad_theta, n));
                    s += a.weight * (dot(j1, j1) + j2 * j2);
                }
                ind.re[c0] += he * s;
                ind.re[c1] += he * s;
            }
            None => {
                let (c, pts) = facet_points(mesh, f, 0);
                let comp = &data.compensation;
                let tau = fg.tangent;
                let (mut s1, mut s2) = (0.0, 0.0);
                for fp in &pts {
                    let pf = fields[c].at(&fp.lam);
                    let w = fp.weight;
                    match facet.tag {
                        FacetTag::Inlet => {
                            let t = pseudo_traction(&pf, n, nu);
                            let ti = comp.t_i(fp.x, n);
                            let r = [t[0] + ti[0], t[1] + ti[1]];
                            let us = (data.u_star)(fp.x);
                            let du = [pf.u[0] - us[0], pf.u[1] - us[1]];
                            s1 += w * (inlet_flux * he * dot(r, r) + dot(du, du) / he);
                            let r2 = -kappa * dot(pf.grad_theta, n) + comp.q_i(fp.x, n);
                            let dt = pf.theta - (data.theta_star)(fp.x);
                            s2 += w * (inlet_flux * he * r2 * r2 + dt * dt / he);
                        }
                        FacetTag::Wall => {
                            let t = pseudo_traction(&pf, n, nu);
                            let r = -dot(t, tau) + gamma * dot(pf.u, tau) - comp.t_w(fp.x, n);
                            let m = dot(pf.u, n) - comp.r_w(fp.x, n);
                            s1 += w * (he * r * r + m * m / he);
                            let r2 = kappa * dot(pf.grad_theta, n) + beta * pf.theta - comp.q_w(fp.x, n);
                            s2 += w * he * r2 * r2;
                        }
                        FacetTag::Outlet => {
                            let t = pseudo_traction(&pf, n, nu);
                            let to = comp.t_o(fp.x, n);
                            let r = [-t[0] - to[0], -t[1] - to[1]];
                            s1 += w * he * dot(r, r);
                            let un = dot(pf.u, n);
                            let r2 = kappa * dot(pf.grad_theta, n) - un * pf.theta * data.psi.eval(un)
                                - comp.q_o(fp.x, n);
                            s2 += w * he * r2 * r2;
                        }
                        FacetTag::Interior => unreachable!("boundary facet without a boundary tag"),
                    }
                }
                ind.j1[c] += s1;
                ind.j2[c] += s2;
            }
        }
    }
    ind.finish();
    ind
}

/// `Psi = (sum_K Psi_K^2)^{1/2}`.
pub fn global_estimate(ind: &ElementIndicators) -> f64 {
    ind.total.iter().sum::<f64>().sqrt()
}

/// `Psi / error`. A vanishing error is reported as [`Error::ExactSolution`].
pub fn effectivity(estimate: f64, error: f64) -> Result<f64> {
    if error == 0.0 {
        return Err(Error::ExactSolution);
    }
    Ok(estimate / error)
}

/// Cells with `Psi_K >= eta max_K Psi_K`. Returns no cells when all
/// indicators vanish.
pub fn mark(ind: &ElementIndicators, eta: f64) -> Result<Vec<usize>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("marking parameter must lie in (0, 1], got {eta}")));
    }
    let psi = ind.psi();
    let max = psi.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = eta * max;
    Ok((0..psi.len()).filter(|&k| psi[k] >= threshold).collect())
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    pub eta: f64,
    pub max_rounds: usize,
    pub solver: SolverConfig,
    pub estimator: EstimatorOptions,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            eta: 0.6,
            max_rounds: 15,
            solver: SolverConfig::default(),
            estimator: EstimatorOptions::default(),
        }
    }
}

/// Outcome of one solve-estimate-mark-refine round.
#[derive(Debug, Clone)]
pub struct Round {
    pub index: usize,
    pub solution: Solution,
    pub solve: SolveReport,
    pub estimator: EstimatorReport,
    pub marked: Vec<usize>,
    /// The refined mesh handed to the next round.
    pub refined: Arc<Mesh>,
}

impl Round {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.solution.mesh()
    }

    pub fn n_dofs(&self) -> usize {
        self.solution.n_dofs()
    }

    pub fn marked_centroids(&self) -> Vec<Point> {
        self.marked.iter().map(|&c| self.mesh().cell_centroid(c)).collect()
    }
}

#[derive(Debug)]
pub struct AdaptiveOutcome {
    pub rounds: Vec<Round>,
    /// Set when a round failed; `rounds` then holds the completed ones.
    pub error: Option<Error>,
}

impl AdaptiveOutcome {
    pub fn estimates(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.estimator.estimate).collect()
    }

    pub fn into_result(self) -> Result<Vec<Round>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.rounds),
        }
    }
}

/// Solve, estimate, mark and refine for up to `config.max_rounds` rounds.
/// `on_round` sees every completed round before the next one starts.
pub fn adaptive_loop(
    initial: Arc<Mesh>,
    params: &PhysicalParams,
    data: &ProblemData,
    config: &AdaptiveConfig,
    mut on_round: impl FnMut(&Round),
) -> AdaptiveOutcome {
    let mut rounds = Vec::new();
    if config.max_rounds == 0 {
        return AdaptiveOutcome {
            rounds,
            error: Some(Error::InvalidInput("at least one adaptive round is required".into())),
        };
    }
    let mut mesh = initial;
    for index in 0..config.max_rounds {
        let step = || -> Result<Round> {
            let spaces = FieldSpaces::taylor_hood(mesh.clone());
            let assembler = Assembler::new(spaces, *params, data.clone())?;
            let (solution, solve) = picard_with(&assembler, &config.solver)?;
            let indicators = element_residuals(&solution, params, data, config.estimator);
            let marked = mark(&indicators, config.eta)?;
            let refined = refine(&mesh, &marked).into_shared();
            Ok(Round {
                index,
                solution,
                solve,
                estimator: EstimatorReport::new(indicators),
                marked,
                refined,
            })
        };
        match step() {
            Ok(round) => {
                on_round(&round);
                mesh = round.refined.clone();
                rounds.push(round);
            }
            Err(e) => {
                return AdaptiveOutcome {
                    rounds,
                    error: Some(e),
                }
            }
        }
    }
    AdaptiveOutcome { rounds, error: None }
}
