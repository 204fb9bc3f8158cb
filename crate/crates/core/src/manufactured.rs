//! Manufactured solutions, the data they induce, and error norms.

use std::sync::Arc;

use crate::forms::{facet_points, Compensation, PhysicalParams, ProblemData, SwitchingFunction};
use crate::geom::{Mat2, Point};
use crate::mesh::FacetTag;
use crate::space::{quadrature, FieldSpaces};

/// Smooth exact fields with the derivatives needed to build data.
pub trait ExactSolution: Send + Sync {
    fn u(&self, x: Point) -> [f64; 2];
    /// `grad_u[i][j] = d u_i / d x_j`.
    fn grad_u(&self, x: Point) -> Mat2;
    fn lap_u(&self, x: Point) -> [f64; 2];
    fn p(&self, x: Point) -> f64;
    fn grad_p(&self, x: Point) -> [f64; 2];
    fn theta(&self, x: Point) -> f64;
    fn grad_theta(&self, x: Point) -> [f64; 2];
    fn lap_theta(&self, x: Point) -> f64;

    /// Cauchy stress `T = -p I + 2 nu eps(u)` applied to `n`.
    fn traction(&self, x: Point, n: [f64; 2], nu: f64) -> [f64; 2] {
        let g = self.grad_u(x);
        let p = self.p(x);
        let e01 = 0.5 * (g[0][1] + g[1][0]);
        [
            -p * n[0] + 2.0 * nu * (g[0][0] * n[0] + e01 * n[1]),
            -p * n[1] + 2.0 * nu * (e01 * n[0] + g[1][1] * n[1]),
        ]
    }
}

/// `u = (sin y, cos x)`, `p = 1 + sin(xy)`, `theta = 1 + cos(xy)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothSolution;

impl ExactSolution for SmoothSolution {
    fn u(&self, x: Point) -> [f64; 2] {
        [x[1].sin(), x[0].cos()]
    }
    fn grad_u(&self, x: Point) -> Mat2 {
        [[0.0, x[1].cos()], [-x[0].sin(), 0.0]]
    }
    fn lap_u(&self, x: Point) -> [f64; 2] {
        [-x[1].sin(), -x[0].cos()]
    }
    fn p(&self, x: Point) -> f64 {
        1.0 + (x[0] * x[1]).sin()
    }
    fn grad_p(&self, x: Point) -> [f64; 2] {
        let c = (x[0] * x[1]).cos();
        [x[1] * c, x[0] * c]
    }
    fn theta(&self, x: Point) -> f64 {
        1.0 + (x[0] * x[1]).cos()
    }
    fn grad_theta(&self, x: Point) -> [f64; 2] {
        let s = (x[0] * x[1]).sin();
        [-x[1] * s, -x[0] * s]
    }
    fn lap_theta(&self, x: Point) -> f64 {
        -(x[0] * x[0] + x[1] * x[1]) * (x[0] * x[1]).cos()
    }
}

/// `u = (y, -x)`, `p = 1`, `theta = 1 + x`: representable exactly by the
/// Taylor–Hood/P2 discretisation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PatchSolution;

impl ExactSolution for PatchSolution {
    fn u(&self, x: Point) -> [f64; 2] {
        [x[1], -x[0]]
    }
    fn grad_u(&self, _: Point) -> Mat2 {
        [[0.0, 1.0], [-1.0, 0.0]]
    }
    fn lap_u(&self, _: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn p(&self, _: Point) -> f64 {
        1.0
    }
    fn grad_p(&self, _: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn theta(&self, x: Point) -> f64 {
        1.0 + x[0]
    }
    fn grad_theta(&self, _: Point) -> [f64; 2] {
        [1.0, 0.0]
    }
    fn lap_theta(&self, _: Point) -> f64 {
        0.0
    }
}

/// Multiplies every field of an exact solution by a constant.
pub struct Scaled<E>(pub E, pub f64);

impl<E: ExactSolution> ExactSolution for Scaled<E> {
    fn u(&self, x: Point) -> [f64; 2] {
        let v = self.0.u(x);
        [self.1 * v[0], self.1 * v[1]]
    }
    fn grad_u(&self, x: Point) -> Mat2 {
        let g = self.0.grad_u(x);
        let a = self.1;
        [[a * g[0][0], a * g[0][1]], [a * g[1][0], a * g[1][1]]]
    }
    fn lap_u(&self, x: Point) -> [f64; 2] {
        let v = self.0.lap_u(x);
        [self.1 * v[0], self.1 * v[1]]
    }
    fn p(&self, x: Point) -> f64 {
        self.1 * self.0.p(x)
    }
    fn grad_p(&self, x: Point) -> [f64; 2] {
        let v = self.0.grad_p(x);
        [self.1 * v[0], self.1 * v[1]]
    }
    fn theta(&self, x: Point) -> f64 {
        self.1 * self.0.theta(x)
    }
    fn grad_theta(&self, x: Point) -> [f64; 2] {
        let v = self.0.grad_theta(x);
        [self.1 * v[0], self.1 * v[1]]
    }
    fn lap_theta(&self, x: Point) -> f64 {
        self.1 * self.0.lap_theta(x)
    }
}

/// Sources, boundary values and compensation data for which `exact` solves
/// the continuous problem with the given parameters and switching function.
///
/// The body force is `f = (-nu lap u + (grad u) u + grad p) / (alpha theta)`,
/// so `exact.theta` must not vanish on the domain.
pub fn manufactured_data(exact: Arc<dyn ExactSolution>, params: &PhysicalParams, psi: SwitchingFunction) -> ProblemData {
    let PhysicalParams {
        nu,
        alpha,
        kappa,
        beta,
        gamma,
        ..
    } = *params;
    let e = exact.clone();
    let f = Arc::new(move |x: Point| {
        let (u, g, l, gp, th) = (e.u(x), e.grad_u(x), e.lap_u(x), e.grad_p(x), e.theta(x));
        let conv = [g[0][0] * u[0] + g[0][1] * u[1], g[1][0] * u[0] + g[1][1] * u[1]];
        let s = 1.0 / (alpha * th);
        [
            s * (-nu * l[0] + conv[0] + gp[0]),
            s * (-nu * l[1] + conv[1] + gp[1]),
        ]
    });
    let e = exact.clone();
    let g = Arc::new(move |x: Point| {
        let (u, gt) = (e.u(x), e.grad_theta(x));
        -kappa * e.lap_theta(x) + u[0] * gt[0] + u[1] * gt[1]
    });
    let e = exact.clone();
    let u_star = Arc::new(move |x: Point| e.u(x));
    let e = exact.clone();
    let theta_star = Arc::new(move |x: Point| e.theta(x));

    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let tangent = |n: [f64; 2]| [n[1], -n[0]];
    let e = exact.clone();
    let r_w = Arc::new(move |x: Point, n: [f64; 2]| dot(e.u(x), n));
    let e = exact.clone();
    let t_w = Arc::new(move |x: Point, n: [f64; 2]| {
        let tau = tangent(n);
        dot(e.traction(x, n, nu), tau) + gamma * dot(e.u(x), tau)
    });
    let e = exact.clone();
    let t_o = Arc::new(move |x: Point, n: [f64; 2]| e.traction(x, n, nu));
    let e = exact.clone();
    let q_w = Arc::new(move |x: Point, n: [f64; 2]| kappa * dot(e.grad_theta(x), n) + beta * e.theta(x));
    let e = exact.clone();
    let psi_o = psi.clone();
    let q_o = Arc::new(move |x: Point, n: [f64; 2]| {
        let un = dot(e.u(x), n);
        kappa * dot(e.grad_theta(x), n) - un * e.theta(x) * psi_o.eval(un)
    });
    let e = exact.clone();
    let t_i = Arc::new(move |x: Point, n: [f64; 2]| e.traction(x, n, nu));
    let e = exact;
    let q_i = Arc::new(move |x: Point, n: [f64; 2]| kappa * dot(e.grad_theta(x), n));

    ProblemData {
        f,
        g,
        u_star,
        theta_star,
        psi,
        compensation: Compensation {
            r_w: Some(r_w),
            t_w: Some(t_w),
            t_o: Some(t_o),
            q_w: Some(q_w),
            q_o: Some(q_o),
            t_i: Some(t_i),
            q_i: Some(q_i),
        },
    }
}

/// Errors of a discrete solution against an exact one.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct ErrorNorms {
    /// `||grad(u - u_h)||_0`.
    pub grad_u: f64,
    /// `||p - p_h||_0`.
    pub p: f64,
    /// `||grad(theta - theta_h)||_0`.
    pub grad_theta: f64,
    /// `|||(u - u_h, theta - theta_h, p - p_h)|||`.
    pub triple: f64,
}

/// Exactness of the cell quadrature used for error norms.
pub const ERROR_EXACTNESS: usize = 8;

/// Error norms of the block vector `x` computed with high-order quadrature.
pub fn error_norms(spaces: &FieldSpaces, x: &[f64], exact: &dyn ExactSolution) -> ErrorNorms {
    let mesh = spaces.mesh();
    let rule = quadrature(ERROR_EXACTNESS).expect("shipped rule");
    let (mut gu, mut eps, mut pp, mut gt) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let cf = spaces.cell_fields(x, c);
        for (lam, w) in rule.iter() {
            let wt = 2.0 * cf.geo.area * w;
            let xq = cf.geo.point(lam);
            let h = cf.at(lam);
            let ge = exact.grad_u(xq);
            let d = [
                [ge[0][0] - h.grad_u[0][0], ge[0][1] - h.grad_u[0][1]],
                [ge[1][0] - h.grad_u[1][0], ge[1][1] - h.grad_u[1][1]],
            ];
            gu += wt * (d[0][0].powi(2) + d[0][1].powi(2) + d[1][0].powi(2) + d[1][1].powi(2));
            let off = 0.5 * (d[0][1] + d[1][0]);
            eps += wt * (d[0][0].powi(2) + 2.0 * off * off + d[1][1].powi(2));
            pp += wt * (exact.p(xq) - h.p).powi(2);
            let gte = exact.grad_theta(xq);
            gt += wt * ((gte[0] - h.grad_theta[0]).powi(2) + (gte[1] - h.grad_theta[1]).powi(2));
        }
    }
    let (mut fu, mut ft) = (0.0, 0.0);
    for f in mesh.boundary_facets() {
        let tag = mesh.facets()[f].tag;
        if tag == FacetTag::Outlet {
            continue;
        }
        let n = mesh.facet_geometry(f).normal;
        let h = mesh.facet_geometry(f).length;
        let (c, pts) = facet_points(mesh, f, 0);
        let cf = spaces.cell_fields(x, c);
        for fp in pts {
            let ue = exact.u(fp.x);
            let eu = [ue[0] - cf.ux.value(&fp.lam), ue[1] - cf.uy.value(&fp.lam)];
            let w = fp.weight / h;
            if tag == FacetTag::Inlet {
                fu += w * (eu[0] * eu[0] + eu[1] * eu[1]);
                ft += w * (exact.theta(fp.x) - cf.theta.value(&fp.lam)).powi(2);
            } else {
                fu += w * (eu[0] * n[0] + eu[1] * n[1]).powi(2);
            }
        }
    }
    ErrorNorms {
        grad_u: gu.sqrt(),
        p: pp.sqrt(),
        grad_theta: gt.sqrt(),
        triple: (eps + fu + gt + ft + pp).sqrt(),
    }
}
