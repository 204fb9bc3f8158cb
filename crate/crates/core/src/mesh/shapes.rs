//! Structured mesh generators for the shipped geometries.

use std::collections::HashMap;

use super::{BoundaryKind, BoundaryRule, BoundarySpec, Mesh, RefinementEdge, Selector};
use crate::error::{Error, Result};
use crate::geom::Point;

/// Re-entrant corner of the L-shaped domain `(-1,1)^2 \ (0,1)^2`.
pub const L_SHAPE_CORNER: Point = [0.0, 0.0];

/// Uniform grid of `nx * ny` cells, each split along its `(i,j)-(i+1,j+1)` diagonal.
pub fn rectangle(
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    nx: usize,
    ny: usize,
    spec: &BoundarySpec,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("nx and ny must be positive".into()));
    }
    if !(xmax > xmin) || !(ymax > ymin) || !xmin.is_finite() || !ymax.is_finite() || !xmax.is_finite() || !ymin.is_finite() {
        return Err(Error::InvalidInput(format!(
            "invalid rectangle bounds [{xmin}, {xmax}] x [{ymin}, {ymax}]"
        )));
    }
    masked_grid(xmin, xmax, ymin, ymax, nx, ny, |_| true, spec)
}

/// `(-1,1)^2 \ (0,1)^2` on a grid with `n` cells per unit length.
pub fn l_shape(n: usize) -> Mesh {
    let n = n.max(1);
    masked_grid(
        -1.0,
        1.0,
        -1.0,
        1.0,
        2 * n,
        2 * n,
        |c| !(c[0] > 0.0 && c[1] > 0.0),
        &BoundarySpec::l_shape(),
    )
    .expect("L-shape generator produces a valid mesh")
}

/// `((-1.5,1.5) x (0,1)) U ((-0.5,0.5) x (-2,0))` on a grid with `n` cells per
/// unit length.
pub fn t_shape(n: usize) -> Mesh {
    let n = n.max(1);
    masked_grid(
        -1.5,
        1.5,
        -2.0,
        1.0,
        3 * n,
        3 * n,
        |c| c[1] > 0.0 || c[0].abs() < 0.5,
        &BoundarySpec::t_shape(),
    )
    .expect("T-shape generator produces a valid mesh")
}

#[allow(clippy::too_many_arguments)]
fn masked_grid<F>(
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    nx: usize,
    ny: usize,
    keep: F,
    spec: &BoundarySpec,
) -> Result<Mesh>
where
    F: Fn(Point) -> bool,
{
    let dx = (xmax - xmin) / nx as f64;
    let dy = (ymax - ymin) / ny as f64;
    let coord = |i: usize, j: usize| -> Point {
        // pin the far edge exactly to the requested bound
        let x = if i == nx { xmax } else { xmin + i as f64 * dx };
        let y = if j == ny { ymax } else { ymin + j as f64 * dy };
        [x, y]
    };
    let mut ids = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point>| {
        let k = j * (nx + 1) + i;
        if ids[k] == usize::MAX {
            ids[k] = vertices.len();
            vertices.push(coord(i, j));
        }
        ids[k]
    };
    for j in 0..ny {
        for i in 0..nx {
            let centre = [xmin + (i as f64 + 0.5) * dx, ymin + (j as f64 + 0.5) * dy];
            if !keep(centre) {
                continue;
            }
            let v00 = vid(i, j, &mut vertices);
            let v10 = vid(i + 1, j, &mut vertices);
            let v11 = vid(i + 1, j + 1, &mut vertices);
            let v01 = vid(i, j + 1, &mut vertices);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_triangles(vertices, triangles, spec, RefinementEdge::LongestEdge)
}

/// Two-dimensional channel `(0, length) x (0, height)` with a circular obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub length: f64,
    pub height: f64,
    pub center: Point,
    pub radius: f64,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        ChannelGeometry {
            length: 2.5,
            height: 0.41,
            center: [0.5, 0.205],
            radius: 0.05,
        }
    }
}

impl ChannelGeometry {
    /// Inlet at `x = 0`, outlet at `x = length`, walls elsewhere (channel sides and obstacle).
    pub fn boundary_spec(&self) -> BoundarySpec {
        BoundarySpec::new(vec![
            BoundaryRule::new(Selector::X(0.0), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::X(self.length), BoundaryKind::Outlet),
            BoundaryRule::new(Selector::Any, BoundaryKind::Wall),
        ])
    }
}

/// Channel mesh: an O-grid around the cylinder inside a square block of side
/// `height`, flanked by two structured blocks. `n` is the number of cells
/// across the channel height.
pub fn channel_with_cylinder(geometry: &ChannelGeometry, n: usize, rings: usize) -> Result<Mesh> {
    let ChannelGeometry {
        length,
        height,
        center,
        radius,
    } = *geometry;
    let half = 0.5 * height;
    let (bx0, bx1) = (center[0] - half, center[0] + half);
    if (center[1] - half).abs() > 1e-12 || bx0 <= 0.0 || bx1 >= length || radius >= 0.5 * half || n < 2 {
        return Err(Error::InvalidInput(
            "obstacle must be centred vertically and fit inside its block".into(),
        ));
    }
    let rings = rings.max(1);
    let mut vertices: Vec<Point> = Vec::new();
    let mut lookup: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vid = |p: Point, vertices: &mut Vec<Point>| -> usize {
        let key = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        *lookup.entry(key).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut quad = |p: [Point; 4], vertices: &mut Vec<Point>, triangles: &mut Vec<[usize; 3]>| {
        let ids: Vec<usize> = p.iter().map(|&q| vid(q, vertices)).collect();
        triangles.push([ids[0], ids[1], ids[2]]);
        triangles.push([ids[0], ids[2], ids[3]]);
    };

    // square block boundary, counterclockwise from the lower-left corner
    let m = 4 * n;
    let square_point = |k: usize| -> Point {
        let s = (k % m) as f64 / n as f64; // 0..4
        let side = s.floor() as usize;
        let t = s - side as f64;
        match side {
            0 => [bx0 + t * height, 0.0],
            1 => [bx1, t * height],
            2 => [bx1 - t * height, height],
            _ => [bx0, height - t * height],
        }
    };
    for k in 0..m {
        let outer = [square_point(k), square_point(k + 1)];
        let inner = outer.map(|p| {
            let a = (p[1] - center[1]).atan2(p[0] - center[0]);
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        });
        for r in 0..rings {
            // geometric grading towards the cylinder
            let w = |r: usize| ((r as f64) / rings as f64).powf(1.3);
            let (w0, w1) = (w(r), w(r + 1));
            let lerp = |a: Point, b: Point, w: f64| [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])];
            let p00 = lerp(inner[0], outer[0], w0);
            let p10 = lerp(inner[1], outer[1], w0);
            let p11 = lerp(inner[1], outer[1], w1);
            let p01 = lerp(inner[0], outer[0], w1);
            quad([p00, p10, p11, p01], &mut vertices, &mut triangles);
        }
    }

    let dy = height / n as f64;
    let mut block = |x0: f64, x1: f64, vertices: &mut Vec<Point>, triangles: &mut Vec<[usize; 3]>| {
        let nx = ((x1 - x0) / dy).round().max(1.0) as usize;
        let dx = (x1 - x0) / nx as f64;
        for j in 0..n {
            for i in 0..nx {
                let x = |i: usize| if i == nx { x1 } else { x0 + i as f64 * dx };
                let y = |j: usize| if j == n { height } else { j as f64 * dy };
                quad(
                    [[x(i), y(j)], [x(i + 1), y(j)], [x(i + 1), y(j + 1)], [x(i), y(j + 1)]],
                    vertices,
                    triangles,
                );
            }
        }
    };
    block(0.0, bx0, &mut vertices, &mut triangles);
    block(bx1, length, &mut vertices, &mut triangles);

    Mesh::from_triangles(vertices, triangles, &geometry.boundary_spec(), RefinementEdge::LongestEdge)
}
