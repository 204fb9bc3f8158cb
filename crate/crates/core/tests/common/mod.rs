//! Dense reference assembly shared by the integration tests.
//!
//! Basis functions are built in physical coordinates from a monomial
//! Vandermonde system on the nodes of each cell, integrals use collapsed
//! Gauss rules, and facet normals are oriented away from the opposite vertex.
//! Only the degree-of-freedom numbering is taken from the library.

#![allow(dead_code)]

use boussinesq::forms::{PhysicalParams, ProblemData, SwitchingFunction};
use boussinesq::mesh::{FacetTag, Mesh};
use boussinesq::space::FieldSpaces;

pub type Dense = Vec<Vec<f64>>;
type P = [f64; 2];

const GL5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Gauss-Legendre on `[0, 1]`.
fn line01() -> impl Iterator<Item = (f64, f64)> {
    GL5.iter().map(|&(x, w)| (0.5 * (1.0 + x), 0.5 * w))
}

/// Collapsed 5 x 5 Gauss rule on a physical triangle, exact to degree 8.
pub fn triangle_rule(v: [P; 3]) -> Vec<(P, f64)> {
    let e1 = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
    let e2 = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut out = Vec::new();
    for (s, ws) in line01() {
        for (t, wt) in line01() {
            let (xi, eta) = (s, t * (1.0 - s));
            out.push((
                [v[0][0] + xi * e1[0] + eta * e2[0], v[0][1] + xi * e1[1] + eta * e2[1]],
                ws * wt * (1.0 - s) * jac,
            ));
        }
    }
    out
}

fn monomials(deg: usize, x: P) -> Vec<f64> {
    let (a, b) = (x[0], x[1]);
    match deg {
        1 => vec![1.0, a, b],
        2 => vec![1.0, a, b, a * a, a * b, b * b],
        _ => unreachable!(),
    }
}

fn monomial_grads(deg: usize, x: P) -> Vec<P> {
    let (a, b) = (x[0], x[1]);
    let mut g = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    if deg == 2 {
        g.extend([[2.0 * a, 0.0], [b, a], [0.0, 2.0 * b]]);
    }
    g
}

/// Solves `m x = rhs` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut m: Dense, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    x
}

/// Nodal Lagrange basis on arbitrary nodes.
pub struct Lagrange {
    deg: usize,
    coef: Vec<Vec<f64>>,
}

impl Lagrange {
    pub fn new(deg: usize, nodes: &[P]) -> Self {
        let v: Dense = nodes.iter().map(|&x| monomials(deg, x)).collect();
        let n = nodes.len();
        // basis i has monomial coefficients c with V c = e_i
        let coef = (0..n)
            .map(|i| {
                let e: Vec<f64> = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                dense_solve(v.clone(), e)
            })
            .collect();
        Lagrange { deg, coef }
    }

    pub fn value(&self, i: usize, x: P) -> f64 {
        monomials(self.deg, x).iter().zip(&self.coef[i]).map(|(m, c)| m * c).sum()
    }

    pub fn grad(&self, i: usize, x: P) -> P {
        let g = monomial_grads(self.deg, x);
        let mut out = [0.0; 2];
        for (gk, c) in g.iter().zip(&self.coef[i]) {
            out[0] += c * gk[0];
            out[1] += c * gk[1];
        }
        out
    }
}

pub struct Cell {
    pub verts: [P; 3],
    pub p2: Lagrange,
    pub p1: Lagrange,
    /// Global rows of the two velocity components.
    pub vel: [[usize; 6]; 2],
    pub pre: [usize; 3],
    pub tem: [usize; 6],
}

pub fn cell(spaces: &FieldSpaces, c: usize) -> Cell {
    let mesh = spaces.mesh();
    let vd = spaces.velocity.cell_dofs(c);
    let vx = spaces.velocity.dof_coordinates();
    let nodes2: Vec<P> = vd.iter().map(|&d| vx[d]).collect();
    let pd = spaces.pressure.cell_dofs(c);
    let px = spaces.pressure.dof_coordinates();
    let nodes1: Vec<P> = pd.iter().map(|&d| px[d]).collect();
    let td = spaces.temperature.cell_dofs(c);
    let mut vel = [[0; 6]; 2];
    let mut tem = [0; 6];
    for a in 0..6 {
        vel[0][a] = spaces.velocity_offset(0) + vd[a];
        vel[1][a] = spaces.velocity_offset(1) + vd[a];
        tem[a] = spaces.temperature_offset() + td[a];
    }
    Cell {
        verts: mesh.cell_vertices(c),
        p2: Lagrange::new(2, &nodes2),
        p1: Lagrange::new(1, &nodes1),
        vel,
        pre: [0, 1, 2].map(|a| spaces.pressure_offset() + pd[a]),
        tem,
    }
}

pub struct BoundaryFacet {
    pub cell: usize,
    pub tag: FacetTag,
    pub normal: P,
    pub tangent: P,
    pub length: f64,
    pub points: Vec<(P, f64)>,
}

pub fn boundary_facets(mesh: &Mesh) -> Vec<BoundaryFacet> {
    let mut out = Vec::new();
    for f in mesh.facets() {
        if !f.tag.is_boundary() {
            continue;
        }
        let [a, b] = f.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let c = f.cells.0;
        let opp = mesh.triangles()[c].iter().copied().find(|&v| v != a && v != b).unwrap();
        let po = mesh.vertices()[opp];
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = d[0].hypot(d[1]);
        let mut n = [d[1] / len, -d[0] / len];
        if n[0] * (pa[0] - po[0]) + n[1] * (pa[1] - po[1]) < 0.0 {
            n = [-n[0], -n[1]];
        }
        out.push(BoundaryFacet {
            cell: c,
            tag: f.tag,
            normal: n,
            tangent: [n[1], -n[0]],
            length: len,
            points: line01()
                .map(|(s, w)| ([pa[0] + s * d[0], pa[1] + s * d[1]], w * len))
                .collect(),
        });
    }
    out
}

fn dot(a: P, b: P) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Symmetric gradient of `e_comp phi` with `grad phi = g`.
fn eps(comp: usize, g: P) -> [[f64; 2]; 2] {
    let mut grad = [[0.0; 2]; 2];
    grad[comp] = g;
    [
        [grad[0][0], 0.5 * (grad[0][1] + grad[1][0])],
        [0.5 * (grad[0][1] + grad[1][0]), grad[1][1]],
    ]
}

fn mat_vec(m: [[f64; 2]; 2], v: P) -> P {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn unit(comp: usize, s: f64) -> P {
    let mut v = [0.0; 2];
    v[comp] = s;
    v
}

fn zeros(n: usize) -> Dense {
    vec![vec![0.0; n]; n]
}

/// Velocity of block vector `x` at `p` in cell `c`.
fn velocity_at(c: &Cell, x: &[f64], p: P) -> P {
    let mut w = [0.0; 2];
    for (comp, wc) in w.iter_mut().enumerate() {
        for a in 0..6 {
            *wc += x[c.vel[comp][a]] * c.p2.value(a, p);
        }
    }
    w
}

fn temperature_at(c: &Cell, x: &[f64], p: P) -> f64 {
    (0..6).map(|a| x[c.tem[a]] * c.p2.value(a, p)).sum()
}

pub fn a_s(params: &PhysicalParams, spaces: &FieldSpaces) -> Dense {
    let mesh = spaces.mesh();
    let nu2 = 2.0 * params.nu;
    let mut m = zeros(spaces.n_dofs());
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            for (ci, a) in (0..2).flat_map(|ci| (0..6).map(move |a| (ci, a))) {
                let et = eps(ci, c.p2.grad(a, p));
                for (di, b) in (0..2).flat_map(|di| (0..6).map(move |b| (di, b))) {
                    let eu = eps(di, c.p2.grad(b, p));
                    let s: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| eu[i][j] * et[i][j]).sum();
                    m[c.vel[ci][a]][c.vel[di][b]] += w * nu2 * s;
                }
            }
        }
    }
    for f in boundary_facets(mesh) {
        if f.tag == FacetTag::Outlet {
            continue;
        }
        let c = cell(spaces, f.cell);
        let (n, t, pen) = (f.normal, f.tangent, params.gamma_n / f.length);
        for &(p, w) in &f.points {
            for (ci, a) in (0..2).flat_map(|ci| (0..6).map(move |a| (ci, a))) {
                let v = unit(ci, c.p2.value(a, p));
                let et = eps(ci, c.p2.grad(a, p));
                for (di, b) in (0..2).flat_map(|di| (0..6).map(move |b| (di, b))) {
                    let u = unit(di, c.p2.value(b, p));
                    let eu = eps(di, c.p2.grad(b, p));
                    let val = if f.tag == FacetTag::Wall {
                        -nu2 * dot(mat_vec(eu, n), n) * dot(v, n) - nu2 * dot(mat_vec(et, n), n) * dot(u, n)
                            + params.gamma * dot(u, t) * dot(v, t)
                            + pen * dot(u, n) * dot(v, n)
                    } else {
                        -nu2 * dot(mat_vec(eu, n), v) - nu2 * dot(mat_vec(et, n), u) + pen * dot(u, v)
                    };
                    m[c.vel[ci][a]][c.vel[di][b]] += w * val;
                }
            }
        }
    }
    m
}

/// Pressure rows, velocity columns.
pub fn b(spaces: &FieldSpaces) -> Dense {
    let mesh = spaces.mesh();
    let mut m = zeros(spaces.n_dofs());
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            for a in 0..3 {
                let q = c.p1.value(a, p);
                for (di, bb) in (0..2).flat_map(|di| (0..6).map(move |b| (di, b))) {
                    let div = c.p2.grad(bb, p)[di];
                    m[c.pre[a]][c.vel[di][bb]] -= w * q * div;
                }
            }
        }
    }
    for f in boundary_facets(mesh) {
        if f.tag == FacetTag::Outlet {
            continue;
        }
        let c = cell(spaces, f.cell);
        for &(p, w) in &f.points {
            for a in 0..3 {
                let q = c.p1.value(a, p);
                for (di, bb) in (0..2).flat_map(|di| (0..6).map(move |b| (di, b))) {
                    m[c.pre[a]][c.vel[di][bb]] += w * q * c.p2.value(bb, p) * f.normal[di];
                }
            }
        }
    }
    m
}

/// `(w . grad u, v)` with `w` the velocity part of block vector `x`.
pub fn o_s(spaces: &FieldSpaces, x: &[f64]) -> Dense {
    let mesh = spaces.mesh();
    let mut m = zeros(spaces.n_dofs());
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            let wv = velocity_at(&c, x, p);
            for comp in 0..2 {
                for a in 0..6 {
                    for bb in 0..6 {
                        m[c.vel[comp][a]][c.vel[comp][bb]] += w * dot(wv, c.p2.grad(bb, p)) * c.p2.value(a, p);
                    }
                }
            }
        }
    }
    m
}

/// `(alpha psi f, v)` with `psi` the temperature part of `x`.
pub fn d(spaces: &FieldSpaces, params: &PhysicalParams, x: &[f64], f: &dyn Fn(P) -> P) -> Vec<f64> {
    let mesh = spaces.mesh();
    let mut r = vec![0.0; spaces.n_dofs()];
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            let s = w * params.alpha * temperature_at(&c, x, p);
            let fx = f(p);
            for comp in 0..2 {
                for a in 0..6 {
                    r[c.vel[comp][a]] += s * fx[comp] * c.p2.value(a, p);
                }
            }
        }
    }
    r
}

pub fn a_t(params: &PhysicalParams, spaces: &FieldSpaces) -> Dense {
    let mesh = spaces.mesh();
    let kappa = params.kappa;
    let mut m = zeros(spaces.n_dofs());
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            for a in 0..6 {
                for bb in 0..6 {
                    m[c.tem[a]][c.tem[bb]] += w * kappa * dot(c.p2.grad(a, p), c.p2.grad(bb, p));
                }
            }
        }
    }
    for f in boundary_facets(mesh) {
        if f.tag == FacetTag::Outlet {
            continue;
        }
        let c = cell(spaces, f.cell);
        let pen = params.gamma_n / f.length;
        for &(p, w) in &f.points {
            for a in 0..6 {
                let (va, ga) = (c.p2.value(a, p), c.p2.grad(a, p));
                for bb in 0..6 {
                    let (vb, gb) = (c.p2.value(bb, p), c.p2.grad(bb, p));
                    let val = if f.tag == FacetTag::Wall {
                        params.beta * va * vb
                    } else {
                        -kappa * dot(gb, f.normal) * va - kappa * dot(ga, f.normal) * vb + pen * va * vb
                    };
                    m[c.tem[a]][c.tem[bb]] += w * val;
                }
            }
        }
    }
    m
}

pub fn o_t(spaces: &FieldSpaces, x: &[f64], psi: &SwitchingFunction) -> Dense {
    let mesh = spaces.mesh();
    let mut m = zeros(spaces.n_dofs());
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            let wv = velocity_at(&c, x, p);
            for a in 0..6 {
                for bb in 0..6 {
                    m[c.tem[a]][c.tem[bb]] += w * dot(wv, c.p2.grad(bb, p)) * c.p2.value(a, p);
                }
            }
        }
    }
    for f in boundary_facets(mesh) {
        if f.tag != FacetTag::Outlet {
            continue;
        }
        let c = cell(spaces, f.cell);
        for &(p, w) in &f.points {
            let wn = dot(velocity_at(&c, x, p), f.normal);
            for a in 0..6 {
                for bb in 0..6 {
                    m[c.tem[a]][c.tem[bb]] -= w * wn * psi.eval(wn) * c.p2.value(a, p) * c.p2.value(bb, p);
                }
            }
        }
    }
    m
}

pub fn loads(params: &PhysicalParams, data: &ProblemData, spaces: &FieldSpaces) -> Vec<f64> {
    let mesh = spaces.mesh();
    let (nu2, kappa) = (2.0 * params.nu, params.kappa);
    let comp = &data.compensation;
    let mut r = vec![0.0; spaces.n_dofs()];
    for k in 0..mesh.n_cells() {
        let c = cell(spaces, k);
        for (p, w) in triangle_rule(c.verts) {
            for a in 0..6 {
                r[c.tem[a]] += w * (data.g)(p) * c.p2.value(a, p);
            }
        }
    }
    for f in boundary_facets(mesh) {
        let c = cell(spaces, f.cell);
        let (n, t, pen) = (f.normal, f.tangent, params.gamma_n / f.length);
        for &(p, w) in &f.points {
            let (us, ts) = ((data.u_star)(p), (data.theta_star)(p));
            for (ci, a) in (0..2).flat_map(|ci| (0..6).map(move |a| (ci, a))) {
                let v = unit(ci, c.p2.value(a, p));
                let ev = eps(ci, c.p2.grad(a, p));
                let val = match f.tag {
                    FacetTag::Inlet => -nu2 * dot(mat_vec(ev, n), us) + pen * dot(us, v),
                    FacetTag::Wall => {
                        let rw = comp.r_w(p, n);
                        -nu2 * dot(mat_vec(ev, n), n) * rw + pen * rw * dot(v, n) + comp.t_w(p, n) * dot(v, t)
                    }
                    FacetTag::Outlet => dot(comp.t_o(p, n), v),
                    FacetTag::Interior => unreachable!(),
                };
                r[c.vel[ci][a]] += w * val;
            }
            for a in 0..3 {
                let q = c.p1.value(a, p);
                r[c.pre[a]] += w * match f.tag {
                    FacetTag::Inlet => q * dot(us, n),
                    FacetTag::Wall => q * comp.r_w(p, n),
                    _ => 0.0,
                };
            }
            for a in 0..6 {
                let (phi, g) = (c.p2.value(a, p), c.p2.grad(a, p));
                r[c.tem[a]] += w * match f.tag {
                    FacetTag::Inlet => -kappa * dot(g, n) * ts + pen * ts * phi,
                    FacetTag::Wall => comp.q_w(p, n) * phi,
                    FacetTag::Outlet => comp.q_o(p, n) * phi,
                    FacetTag::Interior => unreachable!(),
                };
            }
        }
    }
    r
}

/// Largest entrywise mismatch, relative to `max(1, |oracle entry|)`.
pub fn max_rel_diff(lib: &Dense, oracle: &Dense) -> f64 {
    let mut worst = 0.0f64;
    for (rl, ro) in lib.iter().zip(oracle) {
        for (a, b) in rl.iter().zip(ro) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    worst
}

pub fn max_rel_diff_vec(lib: &[f64], oracle: &[f64]) -> f64 {
    lib.iter()
        .zip(oracle)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}
