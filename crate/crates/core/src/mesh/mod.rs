//! Conforming triangulations with tagged boundary facets.
//!
//! Triangles are stored counterclockwise and rotated so that the edge
//! `(v0, v1)` is the refinement edge used by newest-vertex bisection; `v2` is
//! the newest vertex. Facets are derived from the triangles. For a facet the
//! first cell is the one with the lower index, and the stored vertex order
//! follows that cell's counterclockwise orientation, so the facet normal
//! always points out of the first cell.

mod boundary;
mod io;
mod refine;
mod shapes;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use boundary::{Axis, BoundaryKind, BoundaryRule, BoundarySpec, Selector};
pub use io::{mesh_to_string, parse_mesh, read_mesh, write_mesh};
pub use refine::{refine, refine_uniform};
pub use shapes::{
    channel_with_cylinder, l_shape, rectangle, t_shape, ChannelGeometry, L_SHAPE_CORNER,
};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

/// Classification of a facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetTag {
    Interior,
    Inlet,
    Wall,
    Outlet,
}

impl FacetTag {
    pub fn is_boundary(self) -> bool {
        self != FacetTag::Interior
    }

    pub fn name(self) -> &'static str {
        match self {
            FacetTag::Interior => "interior",
            FacetTag::Inlet => "inlet",
            FacetTag::Wall => "wall",
            FacetTag::Outlet => "outlet",
        }
    }
}

impl From<BoundaryKind> for FacetTag {
    fn from(kind: BoundaryKind) -> Self {
        match kind {
            BoundaryKind::Inlet => FacetTag::Inlet,
            BoundaryKind::Wall => FacetTag::Wall,
            BoundaryKind::Outlet => FacetTag::Outlet,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Endpoints, ordered counterclockwise with respect to `cells[0]`.
    pub vertices: [usize; 2],
    /// Owning cell (lower index) and, for interior facets, the neighbour.
    pub cells: (usize, Option<usize>),
    /// Local edge index of the facet inside each adjacent cell.
    pub local: (usize, Option<usize>),
    pub tag: FacetTag,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Outward unit normal, unit tangent and length of a facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetGeometry {
    pub normal: Point,
    /// The normal rotated by -90 degrees.
    pub tangent: Point,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    /// `cell_facets[c][k]` is the facet of edge `(t[k], t[(k + 1) % 3])`.
    cell_facets: Vec<[usize; 3]>,
    parent: Option<Vec<usize>>,
}

/// How the refinement edge of each input triangle is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementEdge {
    /// Rotate every triangle so that its longest edge becomes the refinement edge.
    LongestEdge,
    /// Keep the given vertex order; `(v0, v1)` is the refinement edge.
    AsGiven,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw vertices and triangles, tagging boundary facets
    /// with `spec`. Clockwise triangles are reoriented.
    pub fn from_triangles(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        spec: &BoundarySpec,
        init: RefinementEdge,
    ) -> Result<Mesh> {
        let tris = canonicalize(&vertices, triangles, init)?;
        let verts = vertices.clone();
        Mesh::assemble(
            vertices,
            tris,
            |a, b| spec.classify(geom::midpoint(verts[a], verts[b])).map(FacetTag::from),
            None,
        )
    }

    /// Builds a mesh whose boundary facets are tagged from an explicit list.
    pub fn from_tagged(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: &HashMap<(usize, usize), FacetTag>,
        init: RefinementEdge,
    ) -> Result<Mesh> {
        let tris = canonicalize(&vertices, triangles, init)?;
        Mesh::assemble(
            vertices,
            tris,
            |a, b| {
                boundary
                    .get(&edge_key(a, b))
                    .copied()
                    .ok_or_else(|| Error::Mesh(format!("boundary facet ({a}, {b}) has no tag")))
            },
            None,
        )
    }

    pub(crate) fn assemble<F>(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        mut tag_of: F,
        parent: Option<Vec<usize>>,
    ) -> Result<Mesh>
    where
        F: FnMut(usize, usize) -> Result<FacetTag>,
    {
        let nv = vertices.len();
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len() / 2 + 8);
        let mut facets: Vec<Facet> = Vec::with_capacity(3 * triangles.len() / 2 + 8);
        let mut cell_facets = Vec::with_capacity(triangles.len());
        for (c, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("triangle {c} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle {c} repeats a vertex")));
            }
            let area2 = geom::cross3(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area2 > 0.0) {
                return Err(Error::Mesh(format!("triangle {c} is degenerate or clockwise")));
            }
            let mut cf = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = edge_key(a, b);
                match index.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if facet.cells.1.is_some() {
                            return Err(Error::Mesh(format!(
                                "edge ({a}, {b}) is shared by more than two triangles"
                            )));
                        }
                        if facet.vertices != [b, a] {
                            return Err(Error::Mesh(format!(
                                "triangles {} and {c} have inconsistent orientation",
                                facet.cells.0
                            )));
                        }
                        facet.cells.1 = Some(c);
                        facet.local.1 = Some(k);
                        facet.tag = FacetTag::Interior;
                        cf[k] = f;
                    }
                    None => {
                        index.insert(key, facets.len());
                        cf[k] = facets.len();
                        facets.push(Facet {
                            vertices: [a, b],
                            cells: (c, None),
                            local: (k, None),
                            tag: FacetTag::Interior,
                        });
                    }
                }
            }
            cell_facets.push(cf);
        }
        for facet in facets.iter_mut() {
            if facet.cells.1.is_none() {
                let tag = tag_of(facet.vertices[0], facet.vertices[1])?;
                if tag == FacetTag::Interior {
                    return Err(Error::Mesh("boundary facet tagged as interior".into()));
                }
                facet.tag = tag;
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
            facets,
            cell_facets,
            parent,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    /// Parent cell in the mesh this one was refined from.
    pub fn parent_map(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let t = self.triangles[cell];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn refinement_edge(&self, cell: usize) -> [usize; 2] {
        let t = self.triangles[cell];
        [t[0], t[1]]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        0.5 * geom::cross3(a, b, c)
    }

    /// Longest edge of the cell.
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        geom::dist(a, b).max(geom::dist(b, c)).max(geom::dist(c, a))
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_vertices(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Mesh size `h = max_K diam(K)`.
    pub fn h(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn facet_geometry(&self, facet: usize) -> FacetGeometry {
        let [a, b] = self.facets[facet].vertices;
        let d = geom::sub(self.vertices[b], self.vertices[a]);
        let length = geom::norm(d);
        let normal = [d[1] / length, -d[0] / length];
        FacetGeometry {
            normal,
            tangent: [normal[1], -normal[0]],
            length,
        }
    }

    pub fn facet_midpoint(&self, facet: usize) -> Point {
        let [a, b] = self.facets[facet].vertices;
        geom::midpoint(self.vertices[a], self.vertices[b])
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.facets.len()).filter(move |&f| self.facets[f].is_boundary())
    }

    pub fn facets_with_tag(&self, tag: FacetTag) -> impl Iterator<Item = usize> + '_ {
        (0..self.facets.len()).filter(move |&f| self.facets[f].tag == tag)
    }

    /// Total length of facets carrying `tag`.
    pub fn tagged_length(&self, tag: FacetTag) -> f64 {
        self.facets_with_tag(tag).map(|f| self.facet_geometry(f).length).sum()
    }

    /// `max_K h_K / rho_K` where `rho_K` is the inscribed-circle diameter.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| {
                let [a, b, p] = self.cell_vertices(c);
                let (la, lb, lc) = (geom::dist(b, p), geom::dist(p, a), geom::dist(a, b));
                let inradius = 2.0 * self.cell_area(c) / (la + lb + lc);
                la.max(lb).max(lc) / (2.0 * inradius)
            })
            .fold(0.0, f64::max)
    }

    /// Checks the structural invariants: positive areas, at most two cells per
    /// facet, tagged boundary facets and a closed boundary (every boundary
    /// vertex touches exactly two boundary facets).
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            if !(self.cell_area(c) > 0.0) {
                return Err(Error::Mesh(format!("cell {c} has non-positive area")));
            }
        }
        let mut boundary_degree = vec![0usize; self.n_vertices()];
        for f in &self.facets {
            match f.cells.1 {
                Some(_) if f.tag != FacetTag::Interior => {
                    return Err(Error::Mesh("interior facet carries a boundary tag".into()))
                }
                None if f.tag == FacetTag::Interior => {
                    return Err(Error::Mesh("boundary facet without tag".into()))
                }
                None => {
                    boundary_degree[f.vertices[0]] += 1;
                    boundary_degree[f.vertices[1]] += 1;
                }
                _ => {}
            }
        }
        if boundary_degree.iter().any(|&d| d != 0 && d != 2) {
            return Err(Error::Mesh("boundary is not a union of closed curves".into()));
        }
        Ok(())
    }

    /// Cells sharing a facet with `cell`.
    pub fn neighbours(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_facets[cell].into_iter().filter_map(move |f| {
            let facet = &self.facets[f];
            match facet.cells {
                (a, Some(b)) => Some(if a == cell { b } else { a }),
                _ => None,
            }
        })
    }

    pub fn into_shared(self) -> Arc<Mesh> {
        Arc::new(self)
    }
}

fn canonicalize(vertices: &[Point], triangles: Vec<[usize; 3]>, init: RefinementEdge) -> Result<Vec<[usize; 3]>> {
    triangles
        .into_iter()
        .enumerate()
        .map(|(c, mut t)| {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("triangle {c} references a missing vertex")));
            }
            let area2 = geom::cross3(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area2 == 0.0 || !area2.is_finite() {
                return Err(Error::Mesh(format!("triangle {c} is degenerate")));
            }
            if area2 < 0.0 {
                t.swap(1, 2);
            }
            if init == RefinementEdge::LongestEdge {
                t = rotate_longest_first(vertices, t);
            }
            Ok(t)
        })
        .collect()
}

/// Rotates a counterclockwise triangle so that its longest edge is `(t0, t1)`.
/// Near-ties are broken by the smaller sorted vertex pair so that two
/// triangles sharing a longest edge agree on it.
fn rotate_longest_first(vertices: &[Point], t: [usize; 3]) -> [usize; 3] {
    let len = |k: usize| geom::dist(vertices[t[k]], vertices[t[(k + 1) % 3]]);
    let lens = [len(0), len(1), len(2)];
    let max = lens.iter().copied().fold(0.0, f64::max);
    let best = (0..3)
        .filter(|&k| lens[k] >= max * (1.0 - 1e-12))
        .min_by_key(|&k| edge_key(t[k], t[(k + 1) % 3]))
        .unwrap_or(0);
    [t[best], t[(best + 1) % 3], t[(best + 2) % 3]]
}
