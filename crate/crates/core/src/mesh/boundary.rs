use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

/// Tolerance (domain units) used when matching facet midpoints to lines.
pub const TAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Dirichlet data for velocity and temperature, imposed with Nitsche terms.
    Inlet,
    /// Navier slip for the velocity and a Robin condition for the temperature.
    Wall,
    /// Do-nothing traction and the nonlinear outflow heat flux.
    Outlet,
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inlet" => Ok(BoundaryKind::Inlet),
            "wall" => Ok(BoundaryKind::Wall),
            "outlet" => Ok(BoundaryKind::Outlet),
            other => Err(Error::InvalidInput(format!("unknown boundary kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Geometric predicate evaluated at a facet midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selector {
    /// The line `x = value`.
    X(f64),
    /// The line `y = value`.
    Y(f64),
    /// Midpoints inside the closed disk.
    Disk { center: Point, radius: f64 },
    /// Everything.
    Any,
}

impl Selector {
    pub fn line(axis: Axis, value: f64) -> Selector {
        match axis {
            Axis::X => Selector::X(value),
            Axis::Y => Selector::Y(value),
        }
    }

    pub fn matches(&self, p: Point) -> bool {
        match *self {
            Selector::X(v) => (p[0] - v).abs() <= TAG_TOLERANCE,
            Selector::Y(v) => (p[1] - v).abs() <= TAG_TOLERANCE,
            Selector::Disk { center, radius } => geom::dist(p, center) <= radius + TAG_TOLERANCE,
            Selector::Any => true,
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::X(v) => write!(f, "x={v}"),
            Selector::Y(v) => write!(f, "y={v}"),
            Selector::Disk { center, radius } => {
                write!(f, "disk({},{},{})", center[0], center[1], radius)
            }
            Selector::Any => write!(f, "*"),
        }
    }
}

impl FromStr for Selector {
    type Err = Error;

    /// Accepts `x=<v>`, `y=<v>`, `disk(<cx>,<cy>,<r>)` and `*`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidInput(format!("cannot parse boundary selector '{s}'"));
        if s == "*" {
            return Ok(Selector::Any);
        }
        if let Some(v) = s.strip_prefix("x=") {
            return v.parse().map(Selector::X).map_err(|_| bad());
        }
        if let Some(v) = s.strip_prefix("y=") {
            return v.parse().map(Selector::Y).map_err(|_| bad());
        }
        if let Some(inner) = s.strip_prefix("disk(").and_then(|r| r.strip_suffix(')')) {
            let vals: Vec<f64> = inner
                .split(',')
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            if let [cx, cy, r] = vals[..] {
                return Ok(Selector::Disk {
                    center: [cx, cy],
                    radius: r,
                });
            }
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRule {
    pub selector: Selector,
    pub kind: BoundaryKind,
}

impl BoundaryRule {
    pub fn new(selector: Selector, kind: BoundaryKind) -> Self {
        BoundaryRule { selector, kind }
    }
}

type TagFn = Arc<dyn Fn(Point) -> Option<BoundaryKind> + Send + Sync>;

/// Maps a boundary facet midpoint to its boundary kind. Rules are tried in
/// order; the first match wins.
#[derive(Clone)]
pub struct BoundarySpec {
    rules: Vec<BoundaryRule>,
    custom: Option<TagFn>,
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundarySpec")
            .field("rules", &self.rules)
            .field("custom", &self.custom.is_some())
            .finish()
    }
}

impl BoundarySpec {
    pub fn new(rules: Vec<BoundaryRule>) -> Self {
        BoundarySpec { rules, custom: None }
    }

    /// Every boundary facet gets the same kind.
    pub fn uniform(kind: BoundaryKind) -> Self {
        BoundarySpec::new(vec![BoundaryRule::new(Selector::Any, kind)])
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(Point) -> Option<BoundaryKind> + Send + Sync + 'static,
    {
        BoundarySpec {
            rules: Vec::new(),
            custom: Some(Arc::new(f)),
        }
    }

    pub fn rules(&self) -> &[BoundaryRule] {
        &self.rules
    }

    pub fn classify(&self, midpoint: Point) -> Result<BoundaryKind> {
        if let Some(rule) = self.rules.iter().find(|r| r.selector.matches(midpoint)) {
            return Ok(rule.kind);
        }
        if let Some(kind) = self.custom.as_ref().and_then(|f| f(midpoint)) {
            return Ok(kind);
        }
        Err(Error::Mesh(format!(
            "no boundary rule matches the facet midpoint ({}, {})",
            midpoint[0], midpoint[1]
        )))
    }

    /// Rectangle tagging: bottom and top inlet, left wall, right outlet.
    pub fn box_tags(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        BoundarySpec::new(vec![
            BoundaryRule::new(Selector::Y(ymin), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::Y(ymax), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::X(xmin), BoundaryKind::Wall),
            BoundaryRule::new(Selector::X(xmax), BoundaryKind::Outlet),
        ])
    }

    /// `box_tags` on `(-1,1)^2`: `y = +-1` inlet, `x = -1` wall, `x = 1` outlet.
    pub fn convergence_square() -> Self {
        BoundarySpec::box_tags(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn l_shape() -> Self {
        BoundarySpec::new(vec![
            BoundaryRule::new(Selector::X(-1.0), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::Y(-1.0), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::X(1.0), BoundaryKind::Wall),
            BoundaryRule::new(Selector::Y(0.0), BoundaryKind::Wall),
            BoundaryRule::new(Selector::X(0.0), BoundaryKind::Outlet),
            BoundaryRule::new(Selector::Y(1.0), BoundaryKind::Outlet),
        ])
    }

    pub fn t_shape() -> Self {
        BoundarySpec::new(vec![
            BoundaryRule::new(Selector::X(-1.5), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::Y(1.0), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::X(1.5), BoundaryKind::Inlet),
            BoundaryRule::new(Selector::X(0.5), BoundaryKind::Wall),
            BoundaryRule::new(Selector::Y(-2.0), BoundaryKind::Wall),
            BoundaryRule::new(Selector::X(-0.5), BoundaryKind::Wall),
            BoundaryRule::new(Selector::Y(0.0), BoundaryKind::Outlet),
        ])
    }
}
