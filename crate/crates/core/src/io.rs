//! Result files: legacy VTK, CSV tables and stored solutions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{mesh_to_string, parse_mesh};
use crate::solver::Solution;
use crate::space::FieldSpaces;

/// `VTK_QUADRATIC_TRIANGLE`.
pub const VTK_QUADRATIC_TRIANGLE: u8 = 22;

/// Contents of a legacy ASCII unstructured-grid file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkFile {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
}

impl VtkFile {
    /// Quadratic-triangle grid of `sol` with point data `velocity`,
    /// `pressure` and `temperature`, and cell data `indicator` when given.
    pub fn from_solution(sol: &Solution, indicator: Option<&[f64]>) -> VtkFile {
        let spaces: &FieldSpaces = &sol.spaces;
        let mesh = spaces.mesh();
        let nodes = spaces.temperature.dof_coordinates();
        let nv = mesh.n_vertices();
        let (u, p, theta) = sol.fields();
        let n = nodes.len();
        let (ux, uy) = u.coeffs().split_at(n);
        let mut pressure = vec![0.0; n];
        pressure[..nv].copy_from_slice(&p.coeffs()[..nv]);
        for (f, facet) in mesh.facets().iter().enumerate() {
            let [a, b] = facet.vertices;
            pressure[nv + f] = 0.5 * (p.coeffs()[a] + p.coeffs()[b]);
        }
        let mut vtk = VtkFile {
            title: "boussinesq solution".into(),
            points: nodes.iter().map(|x| [x[0], x[1], 0.0]).collect(),
            cells: (0..mesh.n_cells()).map(|c| spaces.temperature.cell_dofs(c).to_vec()).collect(),
            cell_types: vec![VTK_QUADRATIC_TRIANGLE; mesh.n_cells()],
            ..Default::default()
        };
        vtk.point_vectors
            .insert("velocity".into(), (0..n).map(|i| [ux[i], uy[i], 0.0]).collect());
        vtk.point_scalars.insert("pressure".into(), pressure);
        vtk.point_scalars.insert("temperature".into(), theta.coeffs().to_vec());
        if let Some(ind) = indicator {
            vtk.cell_scalars.insert("indicator".into(), ind.to_vec());
        }
        vtk
    }

    pub fn to_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{}", self.title);
        let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), size);
        for c in &self.cells {
            let _ = write!(s, "{}", c.len());
            for i in c {
                let _ = write!(s, " {i}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cell_types.len());
        for t in &self.cell_types {
            let _ = writeln!(s, "{t}");
        }
        if !self.point_scalars.is_empty() || !self.point_vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.points.len());
            for (name, v) in &self.point_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{:?} {:?} {:?}", x[0], x[1], x[2]);
                }
            }
            for (name, v) in &self.point_scalars {
                write_scalars(&mut s, name, v);
            }
        }
        if !self.cell_scalars.is_empty() {
            let _ = writeln!(s, "CELL_DATA {}", self.cells.len());
            for (name, v) in &self.cell_scalars {
                write_scalars(&mut s, name, v);
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<VtkFile> {
        let text = fs::read_to_string(path)?;
        VtkFile::parse(&text).map_err(|(line, message)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    /// Reads the subset of the legacy format produced by [`VtkFile::to_string`].
    pub fn parse(text: &str) -> std::result::Result<VtkFile, (usize, String)> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| -> std::result::Result<(usize, &str), (usize, String)> {
            lines.next().ok_or((0, format!("unexpected end of file, expected {what}")))
        };
        let (n, header) = next("header")?;
        if !header.starts_with("# vtk DataFile") {
            return Err((n, "missing vtk header".into()));
        }
        let (_, title) = next("title")?;
        let mut vtk = VtkFile {
            title: title.to_string(),
            ..Default::default()
        };
        let (n, l) = next("ASCII")?;
        if l != "ASCII" {
            return Err((n, "only ASCII files are supported".into()));
        }
        let (n, l) = next("dataset")?;
        if l != "DATASET UNSTRUCTURED_GRID" {
            return Err((n, "only unstructured grids are supported".into()));
        }
        let numbers = |n: usize, l: &str| -> std::result::Result<Vec<f64>, (usize, String)> {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| (n, format!("bad number '{t}'"))))
                .collect()
        };
        let count = |n: usize, l: &str, key: &str| -> std::result::Result<usize, (usize, String)> {
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err((n, format!("expected {key}")));
            }
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or((n, format!("bad {key} count")))
        };
        let (n, l) = next("POINTS")?;
        let np = count(n, l, "POINTS")?;
        for _ in 0..np {
            let (n, l) = next("point")?;
            let v = numbers(n, l)?;
            if v.len() != 3 {
                return Err((n, "points need three coordinates".into()));
            }
            vtk.points.push([v[0], v[1], v[2]]);
        }
        let (n, l) = next("CELLS")?;
        let nc = count(n, l, "CELLS")?;
        for _ in 0..nc {
            let (n, l) = next("cell")?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| (n, format!("bad index '{t}'"))))
                .collect::<std::result::Result<_, _>>()?;
            if v.is_empty() || v[0] + 1 != v.len() || v[1..].iter().any(|&i| i >= np) {
                return Err((n, "malformed cell".into()));
            }
            vtk.cells.push(v[1..].to_vec());
        }
        let (n, l) = next("CELL_TYPES")?;
        let nt = count(n, l, "CELL_TYPES")?;
        for _ in 0..nt {
            let (n, l) = next("cell type")?;
            vtk.cell_types.push(l.parse().map_err(|_| (n, format!("bad cell type '{l}'")))?);
        }
        let mut section_len = 0;
        let mut in_cells = false;
        while let Ok((n, l)) = next("data") {
            if l.is_empty() {
                continue;
            }
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts[0] {
                "POINT_DATA" => {
                    section_len = count(n, l, "POINT_DATA")?;
                    in_cells = false;
                }
                "CELL_DATA" => {
                    section_len = count(n, l, "CELL_DATA")?;
                    in_cells = true;
                }
                "VECTORS" if parts.len() >= 2 && !in_cells => {
                    let mut v = Vec::with_capacity(section_len);
                    for _ in 0..section_len {
                        let (n, l) = next("vector")?;
                        let x = numbers(n, l)?;
                        if x.len() != 3 {
                            return Err((n, "vectors need three components".into()));
                        }
                        v.push([x[0], x[1], x[2]]);
                    }
                    vtk.point_vectors.insert(parts[1].to_string(), v);
                }
                "SCALARS" if parts.len() >= 2 => {
                    let (n, l) = next("LOOKUP_TABLE")?;
                    if !l.starts_with("LOOKUP_TABLE") {
                        return Err((n, "expected LOOKUP_TABLE".into()));
                    }
                    let mut v = Vec::with_capacity(section_len);
                    for _ in 0..section_len {
                        let (n, l) = next("scalar")?;
                        v.push(l.parse().map_err(|_| (n, format!("bad number '{l}'")))?);
                    }
                    let target = if in_cells {
                        &mut vtk.cell_scalars
                    } else {
                        &mut vtk.point_scalars
                    };
                    target.insert(parts[1].to_string(), v);
                }
                other => return Err((n, format!("unsupported section '{other}'"))),
            }
        }
        Ok(vtk)
    }
}

fn write_scalars(s: &mut String, name: &str, v: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for x in v {
        let _ = writeln!(s, "{x:?}");
    }
}

/// Writes serialisable rows with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StoredSolution {
    mesh: String,
    coeffs: Vec<f64>,
}

/// Stores the mesh and block coefficients of `sol` as JSON.
pub fn write_solution(path: &Path, sol: &Solution) -> Result<()> {
    write_json(
        path,
        &StoredSolution {
            mesh: mesh_to_string(sol.mesh()),
            coeffs: sol.coeffs.clone(),
        },
    )
}

pub fn read_solution(path: &Path) -> Result<Solution> {
    let stored: StoredSolution = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mesh = parse_mesh(&stored.mesh).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })?;
    let spaces = FieldSpaces::taylor_hood(mesh.into_shared());
    if stored.coeffs.len() != spaces.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "stored solution has {} coefficients, its mesh needs {}",
            stored.coeffs.len(),
            spaces.n_dofs()
        )));
    }
    Ok(Solution {
        spaces,
        coeffs: stored.coeffs,
    })
}
