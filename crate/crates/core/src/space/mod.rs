//! Continuous Lagrange spaces, finite element functions and discrete norms.

pub mod basis;
pub mod quadrature;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{Mat2, Point};
use crate::mesh::{FacetTag, Mesh};

pub use basis::{eval_basis, CellGeometry};
pub use quadrature::{facet_rule, quadrature, LineRule, QuadratureRule};

/// Lagrange space of degree 1 or 2 with one or two components.
///
/// Scalar DOFs are numbered vertices first, then (for degree 2) one DOF per
/// facet. Component `c` of a vector space owns the block
/// `c * n_scalar_dofs .. (c + 1) * n_scalar_dofs`.
#[derive(Debug, Clone)]
pub struct Space {
    mesh: Arc<Mesh>,
    degree: usize,
    components: usize,
    n_scalar: usize,
    cell_dofs: Vec<usize>,
    coords: Vec<Point>,
}

impl Space {
    pub fn new(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        if !(1..=2).contains(&components) {
            return Err(Error::InvalidInput(format!("{components} components requested; 1 or 2 supported")));
        }
        let nv = mesh.n_vertices();
        let per_cell = nodes_per_cell(degree);
        let mut cell_dofs = Vec::with_capacity(per_cell * mesh.n_cells());
        for c in 0..mesh.n_cells() {
            cell_dofs.extend_from_slice(&mesh.triangles()[c]);
            if degree == 2 {
                cell_dofs.extend(mesh.cell_facets(c).iter().map(|&f| nv + f));
            }
        }
        let mut coords = mesh.vertices().to_vec();
        if degree == 2 {
            coords.extend((0..mesh.n_facets()).map(|f| mesh.facet_midpoint(f)));
        }
        Ok(Space {
            n_scalar: coords.len(),
            mesh,
            degree,
            components,
            cell_dofs,
            coords,
        })
    }

    pub fn scalar(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        Space::new(mesh, degree, 1)
    }

    pub fn vector(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        Space::new(mesh, degree, 2)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.components
    }

    pub fn n_scalar_dofs(&self) -> usize {
        self.n_scalar
    }

    pub fn nodes_per_cell(&self) -> usize {
        nodes_per_cell(self.degree)
    }

    /// Scalar DOFs of `cell` in local node order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.nodes_per_cell();
        &self.cell_dofs[n * cell..n * (cell + 1)]
    }

    /// Coordinates of the scalar DOFs.
    pub fn dof_coordinates(&self) -> &[Point] {
        &self.coords
    }

    /// Values of the local basis at barycentric `lam` (unused slots are 0).
    pub fn shape_values(&self, lam: &[f64; 3]) -> [f64; 6] {
        match self.degree {
            1 => [lam[0], lam[1], lam[2], 0.0, 0.0, 0.0],
            _ => basis::p2_values(lam),
        }
    }

    pub fn shape_grads(&self, geo: &CellGeometry, lam: &[f64; 3]) -> [[f64; 2]; 6] {
        match self.degree {
            1 => {
                let g = geo.grad_lambda;
                [g[0], g[1], g[2], [0.0; 2], [0.0; 2], [0.0; 2]]
            }
            _ => geo.p2_grads(lam),
        }
    }

    pub fn shape_hessians(&self, geo: &CellGeometry) -> [Mat2; 6] {
        match self.degree {
            1 => [[[0.0; 2]; 2]; 6],
            _ => geo.p2_hessians(),
        }
    }

    fn same_mesh(&self, other: &Space) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }
}

fn nodes_per_cell(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Coefficients of a function in a [`Space`].
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<Space>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<Space>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space with {} DOFs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn zeros(space: Arc<Space>) -> Self {
        let n = space.n_dofs();
        FeFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Nodal interpolant of a scalar field.
    pub fn interpolate(space: Arc<Space>, f: impl Fn(Point) -> f64) -> Result<Self> {
        if space.components != 1 {
            return Err(Error::InvalidInput("scalar interpolation into a vector space".into()));
        }
        let coeffs = space.coords.iter().map(|&x| f(x)).collect();
        Ok(FeFunction { space, coeffs })
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate_vector(space: Arc<Space>, f: impl Fn(Point) -> [f64; 2]) -> Result<Self> {
        if space.components != 2 {
            return Err(Error::InvalidInput("vector interpolation into a scalar space".into()));
        }
        let n = space.n_scalar;
        let mut coeffs = vec![0.0; 2 * n];
        for (i, &x) in space.coords.iter().enumerate() {
            let v = f(x);
            coeffs[i] = v[0];
            coeffs[n + i] = v[1];
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Restriction of component `comp` to `cell`.
    pub fn local(&self, cell: usize, comp: usize) -> LocalField {
        local_field(&self.space, &self.coeffs[comp * self.space.n_scalar..], cell)
    }

    /// Value of component `comp` at the barycentric point `lam` of `cell`.
    pub fn value(&self, cell: usize, comp: usize, lam: &[f64; 3]) -> f64 {
        self.local(cell, comp).value(lam)
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }
}

/// Coefficients of one scalar component on one cell.
#[derive(Debug, Clone, Copy)]
pub struct LocalField {
    pub degree: usize,
    pub coeffs: [f64; 6],
}

fn local_field(space: &Space, block: &[f64], cell: usize) -> LocalField {
    let mut coeffs = [0.0; 6];
    for (k, &d) in space.cell_dofs(cell).iter().enumerate() {
        coeffs[k] = block[d];
    }
    LocalField {
        degree: space.degree,
        coeffs,
    }
}

impl LocalField {
    pub fn value(&self, lam: &[f64; 3]) -> f64 {
        let phi = match self.degree {
            1 => [lam[0], lam[1], lam[2], 0.0, 0.0, 0.0],
            _ => basis::p2_values(lam),
        };
        phi.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn grad(&self, geo: &CellGeometry, lam: &[f64; 3]) -> [f64; 2] {
        let g = match self.degree {
            1 => {
                let g = geo.grad_lambda;
                [g[0], g[1], g[2], [0.0; 2], [0.0; 2], [0.0; 2]]
            }
            _ => geo.p2_grads(lam),
        };
        let mut out = [0.0; 2];
        for (gk, ck) in g.iter().zip(&self.coeffs) {
            out[0] += ck * gk[0];
            out[1] += ck * gk[1];
        }
        out
    }

    pub fn laplacian(&self, geo: &CellGeometry) -> f64 {
        if self.degree == 1 {
            return 0.0;
        }
        geo.p2_hessians()
            .iter()
            .zip(&self.coeffs)
            .map(|(h, c)| c * (h[0][0] + h[1][1]))
            .sum()
    }
}

/// Taylor–Hood velocity/pressure pair plus the temperature space, with the
/// block layout `[u_x, u_y, p, theta]`.
#[derive(Debug, Clone)]
pub struct FieldSpaces {
    pub velocity: Arc<Space>,
    pub pressure: Arc<Space>,
    pub temperature: Arc<Space>,
}

impl FieldSpaces {
    /// Velocity and temperature of degree `k`, pressure of degree `k - 1`.
    pub fn new(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        if k != 2 {
            return Err(Error::UnsupportedDegree(k));
        }
        Ok(FieldSpaces {
            velocity: Arc::new(Space::vector(mesh.clone(), k)?),
            pressure: Arc::new(Space::scalar(mesh.clone(), k - 1)?),
            temperature: Arc::new(Space::scalar(mesh, k)?),
        })
    }

    pub fn taylor_hood(mesh: Arc<Mesh>) -> Self {
        FieldSpaces::new(mesh, 2).expect("degree 2 is supported")
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.velocity.mesh()
    }

    pub fn velocity_offset(&self, comp: usize) -> usize {
        comp * self.velocity.n_scalar_dofs()
    }

    pub fn pressure_offset(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn temperature_offset(&self) -> usize {
        self.velocity.n_dofs() + self.pressure.n_dofs()
    }

    pub fn n_dofs(&self) -> usize {
        self.temperature_offset() + self.temperature.n_dofs()
    }

    /// Splits a block vector into velocity, pressure and temperature.
    pub fn split(&self, x: &[f64]) -> Result<(FeFunction, FeFunction, FeFunction)> {
        if x.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "block vector of length {} for {} DOFs",
                x.len(),
                self.n_dofs()
            )));
        }
        let (po, to) = (self.pressure_offset(), self.temperature_offset());
        Ok((
            FeFunction::new(self.velocity.clone(), x[..po].to_vec())?,
            FeFunction::new(self.pressure.clone(), x[po..to].to_vec())?,
            FeFunction::new(self.temperature.clone(), x[to..].to_vec())?,
        ))
    }

    /// Inverse of [`FieldSpaces::split`].
    pub fn join(&self, u: &FeFunction, p: &FeFunction, theta: &FeFunction) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_dofs());
        x.extend_from_slice(u.coeffs());
        x.extend_from_slice(p.coeffs());
        x.extend_from_slice(theta.coeffs());
        x
    }

    /// Energy norms of a block vector.
    pub fn energy_norms(&self, x: &[f64]) -> EnergyNorms {
        assert_eq!(x.len(), self.n_dofs(), "block vector length");
        let (po, to) = (self.pressure_offset(), self.temperature_offset());
        energy_norms_raw(
            &self.velocity,
            &x[..po],
            &self.temperature,
            &x[to..],
            &self.pressure,
            &x[po..to],
        )
    }

    /// Evaluation of all fields of a block vector on one cell.
    pub fn cell_fields(&self, x: &[f64], cell: usize) -> CellFields {
        let mesh = self.mesh();
        let n = self.velocity.n_scalar_dofs();
        let (po, to) = (self.pressure_offset(), self.temperature_offset());
        CellFields {
            geo: CellGeometry::new(mesh, cell),
            ux: local_field(&self.velocity, &x[..n], cell),
            uy: local_field(&self.velocity, &x[n..2 * n], cell),
            p: local_field(&self.pressure, &x[po..to], cell),
            theta: local_field(&self.temperature, &x[to..], cell),
        }
    }
}

/// All discrete fields restricted to one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellFields {
    pub geo: CellGeometry,
    pub ux: LocalField,
    pub uy: LocalField,
    pub p: LocalField,
    pub theta: LocalField,
}

/// Point values of the discrete fields and their derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointFields {
    pub u: [f64; 2],
    /// `grad_u[i][j] = d u_i / d x_j`.
    pub grad_u: Mat2,
    pub lap_u: [f64; 2],
    pub p: f64,
    pub grad_p: [f64; 2],
    pub theta: f64,
    pub grad_theta: [f64; 2],
    pub lap_theta: f64,
}

impl CellFields {
    pub fn at(&self, lam: &[f64; 3]) -> PointFields {
        let g = &self.geo;
        PointFields {
            u: [self.ux.value(lam), self.uy.value(lam)],
            grad_u: [self.ux.grad(g, lam), self.uy.grad(g, lam)],
            lap_u: [self.ux.laplacian(g), self.uy.laplacian(g)],
            p: self.p.value(lam),
            grad_p: self.p.grad(g, lam),
            theta: self.theta.value(lam),
            grad_theta: self.theta.grad(g, lam),
            lap_theta: self.theta.laplacian(g),
        }
    }
}

/// Square roots of the mesh-dependent energy norms.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct EnergyNorms {
    /// `||v||_{1,h}`.
    pub velocity: f64,
    /// `||theta||_{1,h}`.
    pub temperature: f64,
    /// `||q||_0`.
    pub pressure: f64,
    /// `|||v, theta, q|||`.
    pub triple: f64,
}

impl EnergyNorms {
    pub fn from_squares(velocity: f64, temperature: f64, pressure: f64) -> Self {
        EnergyNorms {
            velocity: velocity.sqrt(),
            temperature: temperature.sqrt(),
            pressure: pressure.sqrt(),
            triple: (velocity + temperature + pressure).sqrt(),
        }
    }
}

/// `||u||_{1,h}`, `||theta||_{1,h}` and the triple norm of `(u, theta, p)`.
///
/// The returned values are square roots of the sums of squares.
pub fn energy_norms(u: &FeFunction, theta: &FeFunction, p: &FeFunction) -> Result<EnergyNorms> {
    if u.space.components != 2 || theta.space.components != 1 || p.space.components != 1 {
        return Err(Error::InvalidInput(
            "energy norms need a vector velocity and scalar temperature and pressure".into(),
        ));
    }
    if !u.space.same_mesh(&theta.space) || !u.space.same_mesh(&p.space) {
        return Err(Error::DimensionMismatch("fields live on different meshes".into()));
    }
    Ok(energy_norms_raw(
        &u.space,
        &u.coeffs,
        &theta.space,
        &theta.coeffs,
        &p.space,
        &p.coeffs,
    ))
}

fn energy_norms_raw(vs: &Space, u: &[f64], ts: &Space, theta: &[f64], ps: &Space, p: &[f64]) -> EnergyNorms {
    let mesh = vs.mesh();
    let rule = quadrature(2 * vs.degree().max(ts.degree()) - 2).expect("low-order rule");
    let n = vs.n_scalar_dofs();
    let (mut sv, mut st, mut sp) = (0.0, 0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let geo = CellGeometry::new(mesh, c);
        let ux = local_field(vs, &u[..n], c);
        let uy = local_field(vs, &u[n..], c);
        let th = local_field(ts, theta, c);
        let pr = local_field(ps, p, c);
        let mut a = (0.0, 0.0);
        for (lam, w) in rule.iter() {
            let gx = ux.grad(&geo, lam);
            let gy = uy.grad(&geo, lam);
            let off = 0.5 * (gx[1] + gy[0]);
            a.0 += w * (gx[0] * gx[0] + 2.0 * off * off + gy[1] * gy[1]);
            let gt = th.grad(&geo, lam);
            a.1 += w * (gt[0] * gt[0] + gt[1] * gt[1]);
        }
        sv += 2.0 * geo.area * a.0;
        st += 2.0 * geo.area * a.1;
        let prule = quadrature(2 * ps.degree()).expect("low-order rule");
        sp += 2.0 * geo.area * prule.iter().map(|(lam, w)| w * pr.value(lam).powi(2)).sum::<f64>();
    }
    let line = facet_rule();
    for f in mesh.boundary_facets() {
        let facet = &mesh.facets()[f];
        if facet.tag == FacetTag::Outlet {
            continue;
        }
        let fg = mesh.facet_geometry(f);
        let (c, k) = (facet.cells.0, facet.local.0);
        let t = &mesh.triangles()[c];
        let ux = local_field(vs, &u[..n], c);
        let uy = local_field(vs, &u[n..], c);
        let th = local_field(ts, theta, c);
        let (mut iv, mut it) = (0.0, 0.0);
        for (&s, &w) in line.points.iter().zip(&line.weights) {
            let lam = basis::facet_barycentric(t, k, facet.vertices[0], s);
            let v = [ux.value(&lam), uy.value(&lam)];
            match facet.tag {
                FacetTag::Inlet => {
                    iv += w * (v[0] * v[0] + v[1] * v[1]);
                    it += w * th.value(&lam).powi(2);
                }
                _ => {
                    let vn = v[0] * fg.normal[0] + v[1] * fg.normal[1];
                    iv += w * vn * vn;
                }
            }
        }
        // h_e^{-1} * |E| * (mean over the facet) = mean
        sv += iv;
        st += it;
    }
    EnergyNorms::from_squares(sv, st, sp)
}
