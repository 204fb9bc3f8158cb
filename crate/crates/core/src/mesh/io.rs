//! Plain-text mesh format.
//!
//! ```text
//! # comment lines start with '#'
//! vertices <N>
//! <x> <y>                  (N lines)
//! triangles <M>
//! <a> <b> <c>              (M lines, counterclockwise, (a, b) = refinement edge)
//! boundary <K>
//! <a> <b> <inlet|wall|outlet>   (K lines, one per boundary facet)
//! ```
//!
//! Indices are zero-based. Coordinates are written with the shortest
//! representation that round-trips exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{edge_key, BoundaryKind, FacetTag, Mesh, RefinementEdge};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# boussinesq mesh");
    let _ = writeln!(s, "vertices {}", mesh.n_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.n_cells());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let boundary: Vec<usize> = mesh.boundary_facets().collect();
    let _ = writeln!(s, "boundary {}", boundary.len());
    for f in boundary {
        let facet = &mesh.facets()[f];
        let _ = writeln!(s, "{} {} {}", facet.vertices[0], facet.vertices[1], facet.tag.name());
    }
    s
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path)?;
    parse_mesh(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

pub fn parse_mesh(text: &str) -> ParseResult<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or((0, format!("unexpected end of input in {what}")));

    let nv = parse_header(next("header")?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, line) = next("vertex list")?;
        let vals: Vec<f64> = parse_fields(no, line, 2, "vertex coordinates")?;
        vertices.push([vals[0], vals[1]]);
    }
    let nt = parse_header(next("header")?, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, line) = next("triangle list")?;
        let ids: Vec<usize> = parse_fields(no, line, 3, "triangle indices")?;
        triangles.push([ids[0], ids[1], ids[2]]);
    }
    let nb = parse_header(next("header")?, "boundary")?;
    let mut tags: HashMap<(usize, usize), FacetTag> = HashMap::with_capacity(nb);
    for _ in 0..nb {
        let (no, line) = next("boundary list")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err((no, "expected '<a> <b> <tag>'".into()));
        }
        let ids: Vec<usize> = parse_fields(no, &parts[..2].join(" "), 2, "facet vertices")?;
        let kind: BoundaryKind = parts[2].parse().map_err(|e: Error| (no, e.to_string()))?;
        tags.insert(edge_key(ids[0], ids[1]), kind.into());
    }
    if let Ok((no, _)) = next("") {
        return Err((no, "unexpected trailing content".into()));
    }
    let mesh =
        Mesh::from_tagged(vertices, triangles, &tags, RefinementEdge::AsGiven).map_err(|e| (0, e.to_string()))?;
    if mesh.boundary_facets().count() != nb {
        return Err((0, "boundary list does not match the mesh boundary".into()));
    }
    Ok(mesh)
}

fn parse_header((no, line): (usize, &str), name: &str) -> ParseResult<usize> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(name) {
        return Err((no, format!("expected '{name} <count>'")));
    }
    parts
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or((no, format!("bad count in '{name}' header")))
}

fn parse_fields<T: std::str::FromStr>(no: usize, line: &str, n: usize, what: &str) -> ParseResult<Vec<T>> {
    let vals: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| (no, format!("bad {what}")))?;
    if vals.len() != n {
        return Err((no, format!("expected {n} values for {what}")));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{l_shape, refine};

    #[test]
    fn round_trip_preserves_everything() {
        let m = l_shape(2);
        let marked: Vec<usize> = (0..m.n_cells()).step_by(3).collect();
        let m = refine(&m, &marked);
        let back = parse_mesh(&mesh_to_string(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.facets(), m.facets());
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = "vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 x\nboundary 0\n";
        let err = parse_mesh(text).unwrap_err();
        assert_eq!(err.0, 6);
        let missing_tag = "vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 1\n0 1 wall\n";
        assert!(parse_mesh(missing_tag).is_err());
    }
}
