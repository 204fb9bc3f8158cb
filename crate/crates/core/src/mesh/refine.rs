//! Newest-vertex bisection with conformity closure.
//!
//! Refinement runs in two phases. First the refinement edges of the marked
//! cells are flagged, and the flag set is closed: any cell with a flagged
//! edge also flags its own refinement edge. Then every cell whose refinement
//! edge is flagged is bisected; each flagged edge of the parent becomes the
//! refinement edge of one child, so bisection recurses until no flagged edge
//! remains. Every flagged edge is split exactly once, which keeps the mesh
//! conforming.

use std::collections::HashMap;

use super::{edge_key, FacetTag, Mesh};
use crate::geom;

pub fn refine(mesh: &Mesh, marked: &[usize]) -> Mesh {
    let nf = mesh.n_facets();
    let mut flagged = vec![false; nf];
    let mut queue: Vec<usize> = Vec::new();

    let flag = |f: usize, flagged: &mut Vec<bool>, queue: &mut Vec<usize>| {
        if !flagged[f] {
            flagged[f] = true;
            let facet = &mesh.facets()[f];
            queue.push(facet.cells.0);
            if let Some(c) = facet.cells.1 {
                queue.push(c);
            }
        }
    };

    for &c in marked {
        let f = mesh.cell_facets(c)[0];
        flag(f, &mut flagged, &mut queue);
    }
    while let Some(c) = queue.pop() {
        let cf = mesh.cell_facets(c);
        if cf.iter().any(|&f| flagged[f]) && !flagged[cf[0]] {
            flag(cf[0], &mut flagged, &mut queue);
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut tags: HashMap<(usize, usize), FacetTag> = HashMap::new();
    for (f, facet) in mesh.facets().iter().enumerate() {
        let [a, b] = facet.vertices;
        if flagged[f] {
            let m = vertices.len();
            vertices.push(geom::midpoint(vertices[a], vertices[b]));
            midpoints.insert(edge_key(a, b), m);
            if facet.is_boundary() {
                tags.insert(edge_key(a, m), facet.tag);
                tags.insert(edge_key(m, b), facet.tag);
            }
        } else if facet.is_boundary() {
            tags.insert(edge_key(a, b), facet.tag);
        }
    }

    let mut triangles = Vec::with_capacity(mesh.n_cells() + 2 * midpoints.len());
    let mut parent = Vec::with_capacity(triangles.capacity());
    let mut stack: Vec<[usize; 3]> = Vec::new();
    for (c, &t) in mesh.triangles().iter().enumerate() {
        stack.push(t);
        while let Some(t) = stack.pop() {
            match midpoints.get(&edge_key(t[0], t[1])) {
                Some(&m) => {
                    // children are pushed in reverse so they come out in order
                    stack.push([t[1], t[2], m]);
                    stack.push([t[2], t[0], m]);
                }
                None => {
                    triangles.push(t);
                    parent.push(c);
                }
            }
        }
    }

    Mesh::assemble(
        vertices,
        triangles,
        |a, b| {
            Ok(tags
                .get(&edge_key(a, b))
                .copied()
                .expect("boundary facets of a refined mesh descend from tagged facets"))
        },
        Some(parent),
    )
    .expect("bisection of a valid mesh yields a valid mesh")
}

/// Two bisection passes over all cells, which halves the mesh size of
/// structured right-triangle grids.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let all: Vec<usize> = (0..mesh.n_cells()).collect();
    let once = refine(mesh, &all);
    let all: Vec<usize> = (0..once.n_cells()).collect();
    let mut twice = refine(&once, &all);
    let composed: Vec<usize> = {
        let p2 = twice.parent_map().unwrap();
        let p1 = once.parent_map().unwrap();
        p2.iter().map(|&c| p1[c]).collect()
    };
    twice.parent = Some(composed);
    twice
}
