//! Bilinear and linear forms of the symmetric Nitsche scheme.
//!
//! Matrix entries are stored as `(test, trial)`. All assemblers return
//! triplets or vectors in the global block numbering of [`FieldSpaces`].
//!
//! The flow unknowns satisfy
//!
//! ```text
//! A_S(u, v) + O_S(w; u, v) + B(v, p) = F_v(v) + D(psi_prev, v)
//! B(u, q)                            = F_q(q)
//! A_T(theta, phi) + O_T(w; theta, phi) = F_theta(phi)
//! ```
//!
//! with `(w, psi_prev)` the previous Picard iterate.

mod data;

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::linalg::{LinearSystem, Triplets};
use crate::mesh::{FacetTag, Mesh};
use crate::space::basis::{self, CellGeometry};
use crate::space::{facet_rule, quadrature, FeFunction, FieldSpaces};

pub use data::{
    Compensation, PhysicalParams, ProblemData, ScalarField, ScalarTrace, SwitchingFunction, VectorField,
    VectorTrace,
};

/// Exactness of the cell quadrature used by every assembler.
pub const VOLUME_EXACTNESS: usize = 6;

/// Previous iterate entering the linearised problem.
#[derive(Debug, Clone)]
pub struct LinearizationState {
    /// Convecting velocity.
    pub w: FeFunction,
    /// Temperature in the buoyancy load.
    pub psi_prev: FeFunction,
}

impl LinearizationState {
    pub fn zero(spaces: &FieldSpaces) -> Self {
        LinearizationState {
            w: FeFunction::zeros(spaces.velocity.clone()),
            psi_prev: FeFunction::zeros(spaces.temperature.clone()),
        }
    }

    /// Velocity and temperature taken from a block vector.
    pub fn from_block(spaces: &FieldSpaces, x: &[f64]) -> Result<Self> {
        let (w, _, psi_prev) = spaces.split(x)?;
        Ok(LinearizationState { w, psi_prev })
    }

    fn check(&self, spaces: &FieldSpaces) -> Result<()> {
        if self.w.coeffs().len() != spaces.velocity.n_dofs()
            || self.psi_prev.coeffs().len() != spaces.temperature.n_dofs()
        {
            return Err(Error::DimensionMismatch(
                "linearisation state does not match the system spaces".into(),
            ));
        }
        Ok(())
    }
}

/// One quadrature point on a facet, seen from one adjacent cell.
#[derive(Debug, Clone, Copy)]
pub struct FacetPoint {
    pub lam: [f64; 3],
    pub x: Point,
    /// Physical weight (includes the facet length).
    pub weight: f64,
}

/// Quadrature points of `facet` in the barycentric coordinates of the
/// adjacent cell on `side` (0 = owner, 1 = neighbour).
pub fn facet_points(mesh: &Mesh, facet: usize, side: usize) -> (usize, Vec<FacetPoint>) {
    let fc = &mesh.facets()[facet];
    let (cell, k) = if side == 0 {
        (fc.cells.0, fc.local.0)
    } else {
        (
            fc.cells.1.expect("interior facet"),
            fc.local.1.expect("interior facet"),
        )
    };
    let t = &mesh.triangles()[cell];
    let [a, b] = fc.vertices;
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let len = geom::dist(pa, pb);
    let rule = facet_rule();
    let pts = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| FacetPoint {
            lam: basis::facet_barycentric(t, k, a, s),
            x: [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])],
            weight: w * len,
        })
        .collect();
    (cell, pts)
}

fn velocity_dofs(spaces: &FieldSpaces, cell: usize) -> [usize; 12] {
    let d = spaces.velocity.cell_dofs(cell);
    let n = spaces.velocity.n_scalar_dofs();
    let mut out = [0; 12];
    for a in 0..6 {
        out[a] = d[a];
        out[6 + a] = n + d[a];
    }
    out
}

fn pressure_dofs(spaces: &FieldSpaces, cell: usize) -> [usize; 3] {
    let d = spaces.pressure.cell_dofs(cell);
    let o = spaces.pressure_offset();
    [o + d[0], o + d[1], o + d[2]]
}

fn temperature_dofs(spaces: &FieldSpaces, cell: usize) -> [usize; 6] {
    let d = spaces.temperature.cell_dofs(cell);
    let o = spaces.temperature_offset();
    let mut out = [0; 6];
    for a in 0..6 {
        out[a] = o + d[a];
    }
    out
}

fn scatter<const R: usize, const C: usize>(t: &mut Triplets, rows: &[usize; R], cols: &[usize; C], m: &[[f64; C]; R]) {
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            if m[i][j] != 0.0 {
                t.push(r, c, m[i][j]);
            }
        }
    }
}

fn dotn(g: [f64; 2], n: [f64; 2]) -> f64 {
    g[0] * n[0] + g[1] * n[1]
}

/// Boundary facets carrying `tag`.
fn tagged<'a>(mesh: &'a Mesh, tag: FacetTag) -> impl Iterator<Item = usize> + 'a {
    mesh.facets_with_tag(tag)
}

/// `A_S(u, v)`: strain term, wall and inlet Nitsche terms, wall friction.
pub fn assemble_a_s(params: &PhysicalParams, spaces: &FieldSpaces) -> Triplets {
    let mesh = spaces.mesh();
    let nu2 = 2.0 * params.nu;
    let mut t = Triplets::with_capacity(spaces.n_dofs(), 144 * mesh.n_cells());
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let mut k = [[0.0; 12]; 12];
        for (lam, w) in rule.iter() {
            let g = geo.p2_grads(lam);
            let wt = 2.0 * geo.area * w * nu2;
            for a in 0..6 {
                for b in 0..6 {
                    let gg = dotn(g[a], g[b]);
                    for c in 0..2 {
                        for d in 0..2 {
                            let delta = if c == d { gg } else { 0.0 };
                            k[c * 6 + a][d * 6 + b] += wt * 0.5 * (delta + g[b][c] * g[a][d]);
                        }
                    }
                }
            }
        }
        let dofs = velocity_dofs(spaces, cell);
        scatter(&mut t, &dofs, &dofs, &k);
    }
    for f in mesh.boundary_facets() {
        let tag = mesh.facets()[f].tag;
        if tag == FacetTag::Outlet {
            continue;
        }
        let fg = mesh.facet_geometry(f);
        let (n, tau, pen) = (fg.normal, fg.tangent, params.gamma_n / fg.length);
        let (cell, pts) = facet_points(mesh, f, 0);
        let geo = CellGeometry::new(mesh, cell);
        let mut k = [[0.0; 12]; 12];
        for p in &pts {
            let v = basis::p2_values(&p.lam);
            let g = geo.p2_grads(&p.lam);
            for a in 0..6 {
                let dna = dotn(g[a], n);
                for b in 0..6 {
                    let dnb = dotn(g[b], n);
                    for c in 0..2 {
                        for d in 0..2 {
                            // test e_c N_a, trial e_d N_b
                            let val = if tag == FacetTag::Wall {
                                -nu2 * n[d] * dnb * n[c] * v[a] - nu2 * n[c] * dna * n[d] * v[b]
                                    + params.gamma * tau[d] * v[b] * tau[c] * v[a]
                                    + pen * n[d] * v[b] * n[c] * v[a]
                            } else {
                                let delta = if c == d { 1.0 } else { 0.0 };
                                let trial = 0.5 * (delta * dnb + n[d] * g[b][c]) * v[a];
                                let test = 0.5 * (delta * dna + n[c] * g[a][d]) * v[b];
                                -nu2 * trial - nu2 * test + pen * delta * v[a] * v[b]
                            };
                            k[c * 6 + a][d * 6 + b] += p.weight * val;
                        }
                    }
                }
            }
        }
        let dofs = velocity_dofs(spaces, cell);
        scatter(&mut t, &dofs, &dofs, &k);
    }
    t
}

/// `B(u, q) = -(q, div u) + sum over wall and inlet facets of (q, u.n)`,
/// stored with pressure rows and velocity columns.
pub fn assemble_b(spaces: &FieldSpaces) -> Triplets {
    let mesh = spaces.mesh();
    let mut t = Triplets::with_capacity(spaces.n_dofs(), 36 * mesh.n_cells());
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let mut k = [[0.0; 12]; 3];
        for (lam, w) in rule.iter() {
            let g = geo.p2_grads(lam);
            let wt = 2.0 * geo.area * w;
            for a in 0..3 {
                for b in 0..6 {
                    for d in 0..2 {
                        k[a][d * 6 + b] -= wt * lam[a] * g[b][d];
                    }
                }
            }
        }
        scatter(&mut t, &pressure_dofs(spaces, cell), &velocity_dofs(spaces, cell), &k);
    }
    for f in mesh.boundary_facets() {
        if mesh.facets()[f].tag == FacetTag::Outlet {
            continue;
        }
        let n = mesh.facet_geometry(f).normal;
        let (cell, pts) = facet_points(mesh, f, 0);
        let mut k = [[0.0; 12]; 3];
        for p in &pts {
            let v = basis::p2_values(&p.lam);
            for a in 0..3 {
                for b in 0..6 {
                    for d in 0..2 {
                        k[a][d * 6 + b] += p.weight * p.lam[a] * n[d] * v[b];
                    }
                }
            }
        }
        scatter(&mut t, &pressure_dofs(spaces, cell), &velocity_dofs(spaces, cell), &k);
    }
    t
}

/// `O_S(w; u, v) = (w . grad u, v)`.
pub fn assemble_o_s(spaces: &FieldSpaces, w: &FeFunction) -> Triplets {
    let mesh = spaces.mesh();
    let mut t = Triplets::with_capacity(spaces.n_dofs(), 72 * mesh.n_cells());
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let (wx, wy) = (w.local(cell, 0), w.local(cell, 1));
        let mut k = [[0.0; 12]; 12];
        for (lam, q) in rule.iter() {
            let wv = [wx.value(lam), wy.value(lam)];
            let v = basis::p2_values(lam);
            let g = geo.p2_grads(lam);
            let wt = 2.0 * geo.area * q;
            for a in 0..6 {
                for b in 0..6 {
                    let val = wt * dotn(wv, g[b]) * v[a];
                    k[a][b] += val;
                    k[6 + a][6 + b] += val;
                }
            }
        }
        let dofs = velocity_dofs(spaces, cell);
        scatter(&mut t, &dofs, &dofs, &k);
    }
    t
}

/// `D(psi, v) = (alpha psi f, v)` as a load on the velocity rows.
pub fn assemble_d(spaces: &FieldSpaces, params: &PhysicalParams, psi: &FeFunction, f: &VectorField) -> Vec<f64> {
    let mesh = spaces.mesh();
    let mut rhs = vec![0.0; spaces.n_dofs()];
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let th = psi.local(cell, 0);
        let dofs = velocity_dofs(spaces, cell);
        for (lam, q) in rule.iter() {
            let fx = f(geo.point(lam));
            let s = 2.0 * geo.area * q * params.alpha * th.value(lam);
            if s == 0.0 {
                continue;
            }
            let v = basis::p2_values(lam);
            for a in 0..6 {
                rhs[dofs[a]] += s * fx[0] * v[a];
                rhs[dofs[6 + a]] += s * fx[1] * v[a];
            }
        }
    }
    rhs
}

/// `A_T(theta, phi)`: diffusion, wall Robin mass and inlet Nitsche terms.
pub fn assemble_a_t(params: &PhysicalParams, spaces: &FieldSpaces) -> Triplets {
    let mesh = spaces.mesh();
    let kappa = params.kappa;
    let mut t = Triplets::with_capacity(spaces.n_dofs(), 36 * mesh.n_cells());
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let mut k = [[0.0; 6]; 6];
        for (lam, w) in rule.iter() {
            let g = geo.p2_grads(lam);
            let wt = 2.0 * geo.area * w * kappa;
            for a in 0..6 {
                for b in 0..6 {
                    k[a][b] += wt * dotn(g[a], g[b]);
                }
            }
        }
        let dofs = temperature_dofs(spaces, cell);
        scatter(&mut t, &dofs, &dofs, &k);
    }
    for f in mesh.boundary_facets() {
        let tag = mesh.facets()[f].tag;
        if tag == FacetTag::Outlet {
            continue;
        }
        let fg = mesh.facet_geometry(f);
        let pen = params.gamma_n / fg.length;
        let (cell, pts) = facet_points(mesh, f, 0);
        let geo = CellGeometry::new(mesh, cell);
        let mut k = [[0.0; 6]; 6];
        for p in &pts {
            let v = basis::p2_values(&p.lam);
            let g = geo.p2_grads(&p.lam);
            for a in 0..6 {
                for b in 0..6 {
                    let val = if tag == FacetTag::Wall {
                        params.beta * v[a] * v[b]
                    } else {
                        -kappa * dotn(g[b], fg.normal) * v[a] - kappa * dotn(g[a], fg.normal) * v[b]
                            + pen * v[a] * v[b]
                    };
                    k[a][b] += p.weight * val;
                }
            }
        }
        let dofs = temperature_dofs(spaces, cell);
        scatter(&mut t, &dofs, &dofs, &k);
    }
    t
}

/// `O_T(w; theta, phi) = (w . grad theta, phi) - sum over outlet facets of
/// ((w.n) psi(w.n) theta, phi)`, with `psi` evaluated at the frozen `w`.
pub fn assemble_o_t(spaces: &FieldSpaces, w: &FeFunction, psi: &SwitchingFunction) -> Triplets {
    let mesh = spaces.mesh();
    let mut t = Triplets::with_capacity(spaces.n_dofs(), 36 * mesh.n_cells());
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let (wx, wy) = (w.local(cell, 0), w.local(cell, 1));
        let mut k = [[0.0; 6]; 6];
        for (lam, q) in rule.iter() {
            let wv = [wx.value(lam), wy.value(lam)];
            let v = basis::p2_values(lam);
            let g = geo.p2_grads(lam);
            let wt = 2.0 * geo.area * q;
            for a in 0..6 {
                for b in 0..6 {
                    k[a][b] += wt * dotn(wv, g[b]) * v[a];
                }
            }
        }
        let dofs = temperature_dofs(spaces, cell);
        scatter(&mut t, &dofs, &dofs, &k);
    }
    if !psi.is_zero() {
        for f in tagged(mesh, FacetTag::Outlet) {
            let n = mesh.facet_geometry(f).normal;
            let (cell, pts) = facet_points(mesh, f, 0);
            let (wx, wy) = (w.local(cell, 0), w.local(cell, 1));
            let mut k = [[0.0; 6]; 6];
            for p in &pts {
                let wn = wx.value(&p.lam) * n[0] + wy.value(&p.lam) * n[1];
                let s = p.weight * wn * psi.eval(wn);
                if s == 0.0 {
                    continue;
                }
                let v = basis::p2_values(&p.lam);
                for a in 0..6 {
                    for b in 0..6 {
                        k[a][b] -= s * v[a] * v[b];
                    }
                }
            }
            let dofs = temperature_dofs(spaces, cell);
            scatter(&mut t, &dofs, &dofs, &k);
        }
    }
    t
}

/// `F_v`, `F_q` and `F_theta` in one block vector.
pub fn assemble_loads(params: &PhysicalParams, data: &ProblemData, spaces: &FieldSpaces) -> Vec<f64> {
    let mesh = spaces.mesh();
    let nu2 = 2.0 * params.nu;
    let kappa = params.kappa;
    let comp = &data.compensation;
    let mut rhs = vec![0.0; spaces.n_dofs()];
    let rule = quadrature(VOLUME_EXACTNESS).expect("shipped rule");
    for cell in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, cell);
        let dofs = temperature_dofs(spaces, cell);
        for (lam, q) in rule.iter() {
            let s = 2.0 * geo.area * q * (data.g)(geo.point(lam));
            let v = basis::p2_values(lam);
            for a in 0..6 {
                rhs[dofs[a]] += s * v[a];
            }
        }
    }
    for f in mesh.boundary_facets() {
        let tag = mesh.facets()[f].tag;
        let fg = mesh.facet_geometry(f);
        let (n, tau, pen) = (fg.normal, fg.tangent, params.gamma_n / fg.length);
        let (cell, pts) = facet_points(mesh, f, 0);
        let geo = CellGeometry::new(mesh, cell);
        let vd = velocity_dofs(spaces, cell);
        let pd = pressure_dofs(spaces, cell);
        let td = temperature_dofs(spaces, cell);
        for p in &pts {
            let v = basis::p2_values(&p.lam);
            let g = geo.p2_grads(&p.lam);
            let w = p.weight;
            match tag {
                FacetTag::Inlet => {
                    let us = (data.u_star)(p.x);
                    let ts = (data.theta_star)(p.x);
                    let usn = dotn(us, n);
                    for a in 0..6 {
                        let dna = dotn(g[a], n);
                        for c in 0..2 {
                            let eps_n_dot = 0.5 * (us[c] * dna + n[c] * dotn(g[a], us));
                            rhs[vd[c * 6 + a]] += w * (-nu2 * eps_n_dot + pen * us[c] * v[a]);
                        }
                        rhs[td[a]] += w * (-kappa * dna * ts + pen * ts * v[a]);
                    }
                    for a in 0..3 {
                        rhs[pd[a]] += w * p.lam[a] * usn;
                    }
                }
                FacetTag::Wall => {
                    let r = comp.r_w(p.x, n);
                    let tw = comp.t_w(p.x, n);
                    let qw = comp.q_w(p.x, n);
                    for a in 0..6 {
                        let dna = dotn(g[a], n);
                        for c in 0..2 {
                            rhs[vd[c * 6 + a]] +=
                                w * (-nu2 * n[c] * dna * r + pen * r * n[c] * v[a] + tw * tau[c] * v[a]);
                        }
                        rhs[td[a]] += w * qw * v[a];
                    }
                    for a in 0..3 {
                        rhs[pd[a]] += w * p.lam[a] * r;
                    }
                }
                FacetTag::Outlet => {
                    let to = comp.t_o(p.x, n);
                    let qo = comp.q_o(p.x, n);
                    for a in 0..6 {
                        rhs[vd[a]] += w * to[0] * v[a];
                        rhs[vd[6 + a]] += w * to[1] * v[a];
                        rhs[td[a]] += w * qo * v[a];
                    }
                }
                FacetTag::Interior => unreachable!("boundary facets only"),
            }
        }
    }
    rhs
}

/// Caches the parts of the linearised system that do not depend on the
/// iterate.
pub struct Assembler {
    spaces: FieldSpaces,
    params: PhysicalParams,
    data: ProblemData,
    fixed: Triplets,
    loads: Vec<f64>,
}

impl Assembler {
    pub fn new(spaces: FieldSpaces, params: PhysicalParams, data: ProblemData) -> Result<Self> {
        params.validate()?;
        data.validate()?;
        let mut fixed = assemble_a_s(&params, &spaces);
        let b = assemble_b(&spaces);
        for &(i, j, v) in b.entries() {
            fixed.push(i, j, v);
            fixed.push(j, i, v);
        }
        fixed.extend(&assemble_a_t(&params, &spaces));
        let loads = assemble_loads(&params, &data, &spaces);
        Ok(Assembler {
            spaces,
            params,
            data,
            fixed,
            loads,
        })
    }

    pub fn spaces(&self) -> &FieldSpaces {
        &self.spaces
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    /// Matrix and right-hand side of the linearised problem at `state`.
    pub fn linearized_system(&self, state: &LinearizationState) -> Result<LinearSystem> {
        state.check(&self.spaces)?;
        let mut t = self.fixed.clone();
        if state.w.coeffs().iter().any(|&c| c != 0.0) {
            t.extend(&assemble_o_s(&self.spaces, &state.w));
            t.extend(&assemble_o_t(&self.spaces, &state.w, &self.data.psi));
        }
        let mut rhs = self.loads.clone();
        if state.psi_prev.coeffs().iter().any(|&c| c != 0.0) {
            let d = assemble_d(&self.spaces, &self.params, &state.psi_prev, &self.data.f);
            rhs.iter_mut().zip(&d).for_each(|(r, di)| *r += di);
        }
        LinearSystem::new(t.to_csr()?, rhs)
    }
}

/// Block system `[A_S + O_S(w), B^T, 0; B, 0, 0; 0, 0, A_T + O_T(w)]` with
/// right-hand side `[F_v + D(psi_prev); F_q; F_theta]`.
pub fn assemble_linearized_system(
    spaces: &FieldSpaces,
    params: &PhysicalParams,
    data: &ProblemData,
    state: &LinearizationState,
) -> Result<LinearSystem> {
    Assembler::new(spaces.clone(), *params, data.clone())?.linearized_system(state)
}
