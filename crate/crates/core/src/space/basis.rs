//! Lagrange bases of degree 1 and 2, written in barycentric coordinates.
//!
//! Local node order for degree 2: the three vertices, then the midpoints of
//! the edges `(v0, v1)`, `(v1, v2)`, `(v2, v0)`. Edge `k` of a cell is the
//! mesh facet `cell_facets(cell)[k]`.

use crate::error::{Error, Result};
use crate::geom::{self, Mat2, Point};
use crate::mesh::Mesh;

pub const P1_NODES: usize = 3;
pub const P2_NODES: usize = 6;

/// Affine data of one cell: vertices, area and the constant gradients of the
/// barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, cell: usize) -> Self {
        Self::from_vertices(mesh.cell_vertices(cell))
    }

    pub fn from_vertices(v: [Point; 3]) -> Self {
        let d = geom::cross3(v[0], v[1], v[2]);
        let g = |a: Point, b: Point| [(a[1] - b[1]) / d, (b[0] - a[0]) / d];
        CellGeometry {
            vertices: v,
            area: 0.5 * d,
            grad_lambda: [g(v[1], v[2]), g(v[2], v[0]), g(v[0], v[1])],
        }
    }

    pub fn point(&self, lam: &[f64; 3]) -> Point {
        let v = &self.vertices;
        [
            lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0],
            lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1],
        ]
    }

    pub fn p1_grads(&self) -> [[f64; 2]; 3] {
        self.grad_lambda
    }

    pub fn p2_grads(&self, lam: &[f64; 3]) -> [[f64; 2]; 6] {
        p2_grads(lam, &self.grad_lambda)
    }

    pub fn p2_hessians(&self) -> [Mat2; 6] {
        p2_hessians(&self.grad_lambda)
    }
}

pub fn p1_values(lam: &[f64; 3]) -> [f64; 3] {
    *lam
}

pub fn p2_values(lam: &[f64; 3]) -> [f64; 6] {
    [
        lam[0] * (2.0 * lam[0] - 1.0),
        lam[1] * (2.0 * lam[1] - 1.0),
        lam[2] * (2.0 * lam[2] - 1.0),
        4.0 * lam[0] * lam[1],
        4.0 * lam[1] * lam[2],
        4.0 * lam[2] * lam[0],
    ]
}

pub fn p2_grads(lam: &[f64; 3], dl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * lam[i] - 1.0;
        g[i] = [s * dl[i][0], s * dl[i][1]];
        let j = (i + 1) % 3;
        g[3 + i] = [
            4.0 * (lam[i] * dl[j][0] + lam[j] * dl[i][0]),
            4.0 * (lam[i] * dl[j][1] + lam[j] * dl[i][1]),
        ];
    }
    g
}

pub fn p2_hessians(dl: &[[f64; 2]; 3]) -> [Mat2; 6] {
    let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
    let mut h = [[[0.0; 2]; 2]; 6];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let ii = outer(dl[i], dl[i]);
        let ij = outer(dl[i], dl[j]);
        for r in 0..2 {
            for c in 0..2 {
                h[i][r][c] = 4.0 * ii[r][c];
                h[3 + i][r][c] = 4.0 * (ij[r][c] + ij[c][r]);
            }
        }
    }
    h
}

/// Lagrange basis on the reference triangle at `(xi, eta)`: values and
/// gradients with respect to the reference coordinates.
pub fn eval_basis(degree: usize, point: [f64; 2]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let lam = [1.0 - point[0] - point[1], point[0], point[1]];
    let reference = CellGeometry::from_vertices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    match degree {
        1 => Ok((p1_values(&lam).to_vec(), reference.p1_grads().to_vec())),
        2 => Ok((p2_values(&lam).to_vec(), reference.p2_grads(&lam).to_vec())),
        d => Err(Error::UnsupportedDegree(d)),
    }
}

/// Barycentric coordinates (in `cell`) of the point at parameter `s` along a
/// facet running from `from` to `to`, where the facet is local edge `k`.
pub fn facet_barycentric(triangle: &[usize; 3], k: usize, from: usize, s: f64) -> [f64; 3] {
    let mut lam = [0.0; 3];
    let j = (k + 1) % 3;
    if triangle[k] == from {
        lam[k] = 1.0 - s;
        lam[j] = s;
    } else {
        lam[k] = s;
        lam[j] = 1.0 - s;
    }
    lam
}

/// Reference coordinates of the local nodes of the given degree.
pub fn reference_nodes(degree: usize) -> Result<Vec<[f64; 2]>> {
    match degree {
        1 => Ok(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        2 => Ok(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ]),
        d => Err(Error::UnsupportedDegree(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_property() {
        for degree in [1, 2] {
            let nodes = reference_nodes(degree).unwrap();
            for (i, &x) in nodes.iter().enumerate() {
                let (v, _) = eval_basis(degree, x).unwrap();
                for (j, vj) in v.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - expected).abs() < 1e-15);
                }
            }
        }
        let (v, _) = eval_basis(1, [1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(eval_basis(3, [0.0, 0.0]), Err(Error::UnsupportedDegree(3))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let geo = CellGeometry::from_vertices([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        let lam = [0.2, 0.5, 0.3];
        let x = geo.point(&lam);
        let to_lam = |p: Point| {
            let mut l = [0.0; 3];
            for i in 0..3 {
                let g = geo.grad_lambda[i];
                let vi = geo.vertices[(i + 1) % 3];
                // lambda_i vanishes at the opposite vertices
                l[i] = g[0] * (p[0] - vi[0]) + g[1] * (p[1] - vi[1]);
            }
            l
        };
        let grads = geo.p2_grads(&lam);
        let hess = geo.p2_hessians();
        let eps = 1e-6;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += eps;
            xm[d] -= eps;
            let (vp, vm) = (p2_values(&to_lam(xp)), p2_values(&to_lam(xm)));
            let (gp, gm) = (geo.p2_grads(&to_lam(xp)), geo.p2_grads(&to_lam(xm)));
            for i in 0..6 {
                assert!(((vp[i] - vm[i]) / (2.0 * eps) - grads[i][d]).abs() < 1e-8);
                for r in 0..2 {
                    assert!(((gp[i][r] - gm[i][r]) / (2.0 * eps) - hess[i][r][d]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn facet_parametrisation() {
        let t = [4, 7, 9];
        assert_eq!(facet_barycentric(&t, 1, 7, 0.25), [0.0, 0.75, 0.25]);
        assert_eq!(facet_barycentric(&t, 2, 4, 0.25), [0.75, 0.0, 0.25]);
    }
}
