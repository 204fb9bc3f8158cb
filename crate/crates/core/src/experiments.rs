//! Run configurations and the experiment harness.
//!
//! Configuration files are flat `key = value` lines; `#` starts a comment.
//! The `experiment` key selects a preset and every other key overrides one
//! of its fields:
//!
//! ```text
//! experiment   = convergence | adaptive | demo
//! geometry     = rectangle | l_shape | t_shape | channel | file
//! bounds       = <xmin> <xmax> <ymin> <ymax>      (rectangle)
//! resolution   = <n>                              (cells per side / unit / channel height)
//! rings        = <n>                              (channel)
//! mesh_file    = <path>                           (file)
//! boundary     = <kind>: <selector>; ...          e.g. inlet: y=-1; wall: x=-1
//! nu, alpha, kappa, beta, gamma, gamma_n = <real>
//! tol_rel, relaxation = <real>;  max_iters = <n>
//! initial_guess = zero | stokes_heat
//! ordering     = natural | rcm | nested_dissection
//! eta = <real>;  rounds = <n>;  levels = <n>
//! psi          = zero | positive_part | constant <c>
//! exact        = smooth | patch                   (convergence)
//! f = <fx> <fy>;  g = <real>
//! inflow_speed, inlet_temperature = <real>        (demo)
//! data_approximation = interpolant | exact
//! inlet_residual = displayed | omitted
//! output       = <directory>
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    adaptive_loop, effectivity, element_residuals, global_estimate, AdaptiveConfig, DataApproximation, EstimatorOptions,
    InletResidual, Round,
};
use crate::forms::{facet_points, PhysicalParams, ProblemData, SwitchingFunction};
use crate::io::{write_csv, write_json, write_solution, VtkFile};
use crate::linalg::Ordering;
use crate::manufactured::{error_norms, manufactured_data, ErrorNorms, ExactSolution, PatchSolution, SmoothSolution};
use crate::mesh::{
    channel_with_cylinder, l_shape, read_mesh, rectangle, refine_uniform, t_shape, write_mesh, BoundaryKind,
    BoundaryRule, BoundarySpec, ChannelGeometry, FacetTag, Mesh, Selector,
};
use crate::solver::{picard_solve, InitialGuess, Solution, SolveReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    Adaptive,
    Demo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Rectangle {
        bounds: [f64; 4],
        nx: usize,
        ny: usize,
    },
    LShape(usize),
    TShape(usize),
    Channel {
        n: usize,
        rings: usize,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactKind {
    Smooth,
    Patch,
}

impl ExactKind {
    pub fn solution(self) -> Arc<dyn ExactSolution> {
        match self {
            ExactKind::Smooth => Arc::new(SmoothSolution),
            ExactKind::Patch => Arc::new(PatchSolution),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiChoice {
    Zero,
    PositivePart,
    Constant(f64),
}

impl PsiChoice {
    pub fn function(self) -> SwitchingFunction {
        match self {
            PsiChoice::Zero => SwitchingFunction::Zero,
            PsiChoice::PositivePart => SwitchingFunction::PositivePart,
            PsiChoice::Constant(c) => SwitchingFunction::Constant(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub geometry: Geometry,
    /// Replaces the geometry's default boundary tagging.
    pub boundary: Option<Vec<BoundaryRule>>,
    pub params: PhysicalParams,
    pub solver: SolverConfig,
    pub eta: f64,
    pub rounds: usize,
    pub levels: usize,
    pub psi: PsiChoice,
    pub exact: ExactKind,
    pub f: [f64; 2],
    pub g: f64,
    pub inflow_speed: f64,
    pub inlet_temperature: f64,
    pub estimator: EstimatorOptions,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Uniform refinement of the smooth manufactured solution on `(-1,1)^2`
    /// starting from an 8 x 8 grid.
    pub fn convergence() -> Self {
        RunConfig {
            kind: ExperimentKind::Convergence,
            geometry: Geometry::Rectangle {
                bounds: [-1.0, 1.0, -1.0, 1.0],
                nx: 8,
                ny: 8,
            },
            boundary: None,
            params: PhysicalParams {
                nu: 10.0,
                alpha: 10.0,
                kappa: 10.0,
                beta: 1.0,
                gamma: 10.0,
                gamma_n: 1.0,
            },
            solver: SolverConfig::default(),
            eta: 0.6,
            rounds: 15,
            levels: 4,
            psi: PsiChoice::Zero,
            exact: ExactKind::Smooth,
            f: [0.0; 2],
            g: 0.0,
            inflow_speed: 0.0,
            inlet_temperature: 0.0,
            estimator: EstimatorOptions::default(),
            output: None,
        }
    }

    /// Adaptive run on the L-shaped domain with constant sources. Inlet traction
    /// and flux are not prescribed, so their residuals are left out of the
    /// estimator.
    pub fn adaptive_l_shape() -> Self {
        RunConfig {
            kind: ExperimentKind::Adaptive,
            geometry: Geometry::LShape(4),
            params: PhysicalParams {
                nu: 1.0,
                alpha: 0.1,
                kappa: 1.0,
                beta: 1.0,
                gamma: 10.0,
                gamma_n: 40.0,
            },
            f: [1.0, 1.0],
            g: 1.0,
            estimator: EstimatorOptions {
                inlet: InletResidual::Omitted,
                ..Default::default()
            },
            ..RunConfig::convergence()
        }
    }

    pub fn adaptive_t_shape() -> Self {
        RunConfig {
            geometry: Geometry::TShape(2),
            ..RunConfig::adaptive_l_shape()
        }
    }

    /// Channel with a cylindrical obstacle, parabolic inflow and the
    /// positive-part outflow switch.
    pub fn demo() -> Self {
        RunConfig {
            kind: ExperimentKind::Demo,
            geometry: Geometry::Channel { n: 8, rings: 6 },
            params: PhysicalParams {
                nu: 1.0,
                alpha: 1.0,
                kappa: 1.0,
                beta: 0.01,
                gamma: 0.01,
                gamma_n: 100.0,
            },
            psi: PsiChoice::PositivePart,
            f: [0.0, -1.0],
            g: 0.0,
            inflow_speed: 0.45,
            inlet_temperature: 1.0,
            ..RunConfig::convergence()
        }
    }

    pub fn preset(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Convergence => RunConfig::convergence(),
            ExperimentKind::Adaptive => RunConfig::adaptive_l_shape(),
            ExperimentKind::Demo => RunConfig::demo(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        // relative mesh paths are taken from the config's directory
        if let Geometry::File(p) = &mut cfg.geometry {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            let key = k.trim().to_ascii_lowercase();
            if entries.iter().any(|(_, e, _)| *e == key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
            entries.push((i + 1, key, v.trim().to_string()));
        }
        let kind = match entries.iter().find(|(_, k, _)| k == "experiment") {
            Some((line, _, v)) => parse_kind(v).map_err(|m| Error::Config(format!("line {line}: {m}")))?,
            None => return Err(Error::Config("missing 'experiment' key".into())),
        };
        let mut cfg = RunConfig::preset(kind);
        if kind == ExperimentKind::Adaptive
            && entries.iter().any(|(_, k, v)| k == "geometry" && v.trim() == "t_shape")
        {
            cfg = RunConfig::adaptive_t_shape();
        }
        for (line, key, value) in &entries {
            cfg.set(key, value).map_err(|m| Error::Config(format!("line {line}: {key}: {m}")))?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let real = || v.parse::<f64>().map_err(|_| format!("expected a number, got '{v}'"));
        let count = || v.parse::<usize>().map_err(|_| format!("expected a nonnegative integer, got '{v}'"));
        match key {
            "experiment" => {
                let kind = parse_kind(v)?;
                if kind != self.kind {
                    return Err("experiment kind cannot change after the preset is chosen".into());
                }
            }
            "geometry" => {
                let n = self.resolution();
                self.geometry = match v {
                    "rectangle" => match &self.geometry {
                        g @ Geometry::Rectangle { .. } => g.clone(),
                        _ => Geometry::Rectangle {
                            bounds: [-1.0, 1.0, -1.0, 1.0],
                            nx: n,
                            ny: n,
                        },
                    },
                    "l_shape" => Geometry::LShape(n),
                    "t_shape" => Geometry::TShape(n),
                    "channel" => Geometry::Channel { n, rings: 6 },
                    "file" => match &self.geometry {
                        g @ Geometry::File(_) => g.clone(),
                        _ => Geometry::File(PathBuf::new()),
                    },
                    other => return Err(format!("unknown geometry '{other}'")),
                }
            }
            "bounds" => {
                let b = parse_reals(v)?;
                let [x0, x1, y0, y1] = b[..] else {
                    return Err("expected four numbers".into());
                };
                match &mut self.geometry {
                    Geometry::Rectangle { bounds, .. } => *bounds = [x0, x1, y0, y1],
                    _ => return Err("bounds apply to rectangles only".into()),
                }
            }
            "resolution" => {
                let m = count()?;
                match &mut self.geometry {
                    Geometry::Rectangle { nx, ny, .. } => (*nx, *ny) = (m, m),
                    Geometry::LShape(n) | Geometry::TShape(n) | Geometry::Channel { n, .. } => *n = m,
                    Geometry::File(_) => return Err("a mesh file has no resolution".into()),
                }
            }
            "nx" | "ny" => {
                let m = count()?;
                match &mut self.geometry {
                    Geometry::Rectangle { nx, ny, .. } => *(if key == "nx" { nx } else { ny }) = m,
                    _ => return Err("nx and ny apply to rectangles only".into()),
                }
            }
            "rings" => match &mut self.geometry {
                Geometry::Channel { rings, .. } => *rings = count()?,
                _ => return Err("rings apply to the channel only".into()),
            },
            "mesh_file" => self.geometry = Geometry::File(PathBuf::from(v)),
            "boundary" => self.boundary = Some(parse_boundary(v)?),
            "nu" => self.params.nu = real()?,
            "alpha" => self.params.alpha = real()?,
            "kappa" => self.params.kappa = real()?,
            "beta" => self.params.beta = real()?,
            "gamma" => self.params.gamma = real()?,
            "gamma_n" => self.params.gamma_n = real()?,
            "tol_rel" => self.solver.tol_rel = real()?,
            "relaxation" => self.solver.relaxation = real()?,
            "max_iters" => self.solver.max_iters = count()?,
            "initial_guess" => {
                self.solver.initial_guess = match v {
                    "zero" => InitialGuess::Zero,
                    "stokes_heat" => InitialGuess::StokesHeat,
                    other => return Err(format!("unknown initial guess '{other}'")),
                }
            }
            "ordering" => {
                self.solver.ordering = match v {
                    "natural" => Ordering::Natural,
                    "rcm" => Ordering::ReverseCuthillMcKee,
                    "nested_dissection" => Ordering::NestedDissection,
                    other => return Err(format!("unknown ordering '{other}'")),
                }
            }
            "eta" => self.eta = real()?,
            "rounds" => self.rounds = count()?,
            "levels" => self.levels = count()?,
            "psi" => {
                self.psi = match v.split_whitespace().collect::<Vec<_>>()[..] {
                    ["zero"] => PsiChoice::Zero,
                    ["positive_part"] => PsiChoice::PositivePart,
                    ["constant", c] => PsiChoice::Constant(c.parse().map_err(|_| format!("bad constant '{c}'"))?),
                    _ => return Err(format!("unknown switching function '{v}'")),
                }
            }
            "exact" => {
                self.exact = match v {
                    "smooth" => ExactKind::Smooth,
                    "patch" => ExactKind::Patch,
                    other => return Err(format!("unknown exact solution '{other}'")),
                }
            }
            "f" => {
                let f = parse_reals(v)?;
                let [fx, fy] = f[..] else {
                    return Err("expected two numbers".into());
                };
                self.f = [fx, fy];
            }
            "g" => self.g = real()?,
            "inflow_speed" => self.inflow_speed = real()?,
            "inlet_temperature" => self.inlet_temperature = real()?,
            "data_approximation" => {
                self.estimator.data = match v {
                    "interpolant" => DataApproximation::Interpolant,
                    "exact" => DataApproximation::Exact,
                    other => return Err(format!("unknown data approximation '{other}'")),
                }
            }
            "inlet_residual" => {
                self.estimator.inlet = match v {
                    "displayed" => InletResidual::Displayed,
                    "omitted" => InletResidual::Omitted,
                    other => return Err(format!("unknown inlet residual mode '{other}'")),
                }
            }
            "output" => self.output = Some(PathBuf::from(v)),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    fn resolution(&self) -> usize {
        match &self.geometry {
            Geometry::Rectangle { nx, .. } => *nx,
            Geometry::LShape(n) | Geometry::TShape(n) | Geometry::Channel { n, .. } => *n,
            Geometry::File(_) => 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.params.validate().map_err(cfg)?;
        self.solver.validate().map_err(cfg)?;
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        match self.kind {
            ExperimentKind::Convergence if self.levels < 2 => {
                return Err(Error::Config("a convergence study needs at least two levels".into()))
            }
            ExperimentKind::Adaptive if self.rounds == 0 => {
                return Err(Error::Config("an adaptive run needs at least one round".into()))
            }
            _ => {}
        }
        match &self.geometry {
            Geometry::File(p) if !p.is_file() => {
                Err(Error::Config(format!("mesh file '{}' does not exist", p.display())))
            }
            Geometry::Rectangle { nx: 0, .. } | Geometry::Rectangle { ny: 0, .. } => {
                Err(Error::Config("rectangle resolution must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Effective settings as `key = value` lines that [`RunConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("experiment", kind_name(self.kind).to_string())];
        match &self.geometry {
            Geometry::Rectangle { bounds, nx, ny } => {
                out.push(("geometry", "rectangle".into()));
                out.push(("bounds", format!("{:?} {:?} {:?} {:?}", bounds[0], bounds[1], bounds[2], bounds[3])));
                out.push(("nx", nx.to_string()));
                out.push(("ny", ny.to_string()));
            }
            Geometry::LShape(n) => {
                out.push(("geometry", "l_shape".into()));
                out.push(("resolution", n.to_string()));
            }
            Geometry::TShape(n) => {
                out.push(("geometry", "t_shape".into()));
                out.push(("resolution", n.to_string()));
            }
            Geometry::Channel { n, rings } => {
                out.push(("geometry", "channel".into()));
                out.push(("resolution", n.to_string()));
                out.push(("rings", rings.to_string()));
            }
            Geometry::File(p) => out.push(("mesh_file", p.display().to_string())),
        }
        if let Some(rules) = &self.boundary {
            let parts: Vec<String> = rules
                .iter()
                .map(|r| format!("{}: {}", kind_label(r.kind), r.selector))
                .collect();
            out.push(("boundary", parts.join("; ")));
        }
        let p = &self.params;
        for (k, v) in [
            ("nu", p.nu),
            ("alpha", p.alpha),
            ("kappa", p.kappa),
            ("beta", p.beta),
            ("gamma", p.gamma),
            ("gamma_n", p.gamma_n),
            ("tol_rel", self.solver.tol_rel),
            ("relaxation", self.solver.relaxation),
        ] {
            out.push((k, format!("{v:?}")));
        }
        out.push(("max_iters", self.solver.max_iters.to_string()));
        out.push((
            "initial_guess",
            match self.solver.initial_guess {
                InitialGuess::Zero => "zero",
                InitialGuess::StokesHeat => "stokes_heat",
            }
            .into(),
        ));
        out.push((
            "ordering",
            match self.solver.ordering {
                Ordering::Natural => "natural",
                Ordering::ReverseCuthillMcKee => "rcm",
                Ordering::NestedDissection => "nested_dissection",
            }
            .into(),
        ));
        out.push(("eta", format!("{:?}", self.eta)));
        out.push(("rounds", self.rounds.to_string()));
        out.push(("levels", self.levels.to_string()));
        out.push((
            "psi",
            match self.psi {
                PsiChoice::Zero => "zero".into(),
                PsiChoice::PositivePart => "positive_part".into(),
                PsiChoice::Constant(c) => format!("constant {c:?}"),
            },
        ));
        out.push((
            "exact",
            match self.exact {
                ExactKind::Smooth => "smooth",
                ExactKind::Patch => "patch",
            }
            .into(),
        ));
        out.push(("f", format!("{:?} {:?}", self.f[0], self.f[1])));
        out.push(("g", format!("{:?}", self.g)));
        out.push(("inflow_speed", format!("{:?}", self.inflow_speed)));
        out.push(("inlet_temperature", format!("{:?}", self.inlet_temperature)));
        out.push((
            "data_approximation",
            match self.estimator.data {
                DataApproximation::Interpolant => "interpolant",
                DataApproximation::Exact => "exact",
            }
            .into(),
        ));
        out.push((
            "inlet_residual",
            match self.estimator.inlet {
                InletResidual::Displayed => "displayed",
                InletResidual::Omitted => "omitted",
            }
            .into(),
        ));
        if let Some(o) = &self.output {
            out.push(("output", o.display().to_string()));
        }
        out
    }

    fn boundary_spec(&self, default: BoundarySpec) -> BoundarySpec {
        match &self.boundary {
            Some(rules) => BoundarySpec::new(rules.clone()),
            None => default,
        }
    }

    /// Initial mesh of the run.
    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        let mesh = match &self.geometry {
            Geometry::Rectangle { bounds, nx, ny } => {
                let [x0, x1, y0, y1] = *bounds;
                rectangle(x0, x1, y0, y1, *nx, *ny, &self.boundary_spec(BoundarySpec::box_tags(x0, x1, y0, y1)))?
            }
            Geometry::LShape(n) => match &self.boundary {
                None => l_shape(*n),
                Some(_) => retag(&l_shape(*n), &self.boundary_spec(BoundarySpec::l_shape()))?,
            },
            Geometry::TShape(n) => match &self.boundary {
                None => t_shape(*n),
                Some(_) => retag(&t_shape(*n), &self.boundary_spec(BoundarySpec::t_shape()))?,
            },
            Geometry::Channel { n, rings } => {
                let geo = ChannelGeometry::default();
                let mesh = channel_with_cylinder(&geo, *n, *rings)?;
                match &self.boundary {
                    None => mesh,
                    Some(_) => retag(&mesh, &self.boundary_spec(geo.boundary_spec()))?,
                }
            }
            Geometry::File(p) => read_mesh(p)?,
        };
        Ok(mesh.into_shared())
    }

    /// Sources and boundary data of the run.
    pub fn problem_data(&self) -> ProblemData {
        let psi = self.psi.function();
        match self.kind {
            ExperimentKind::Convergence => manufactured_data(self.exact.solution(), &self.params, psi),
            ExperimentKind::Adaptive => ProblemData::constant_sources(self.f, self.g).with_psi(psi),
            ExperimentKind::Demo => {
                let h = ChannelGeometry::default().height;
                let speed = self.inflow_speed;
                let theta = self.inlet_temperature;
                ProblemData {
                    u_star: Arc::new(move |x| [4.0 * speed * x[1] * (h - x[1]) / (h * h), 0.0]),
                    theta_star: Arc::new(move |_| theta),
                    ..ProblemData::constant_sources(self.f, self.g).with_psi(psi)
                }
            }
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunConfig::parse(s)
    }
}

fn parse_kind(v: &str) -> std::result::Result<ExperimentKind, String> {
    match v.trim() {
        "convergence" => Ok(ExperimentKind::Convergence),
        "adaptive" => Ok(ExperimentKind::Adaptive),
        "demo" => Ok(ExperimentKind::Demo),
        other => Err(format!("unknown experiment '{other}'")),
    }
}

fn kind_name(k: ExperimentKind) -> &'static str {
    match k {
        ExperimentKind::Convergence => "convergence",
        ExperimentKind::Adaptive => "adaptive",
        ExperimentKind::Demo => "demo",
    }
}

fn kind_label(k: BoundaryKind) -> &'static str {
    match k {
        BoundaryKind::Inlet => "inlet",
        BoundaryKind::Wall => "wall",
        BoundaryKind::Outlet => "outlet",
    }
}

fn parse_reals(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number '{t}'")))
        .collect()
}

fn parse_boundary(v: &str) -> std::result::Result<Vec<BoundaryRule>, String> {
    v.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (kind, sel) = part
                .split_once(':')
                .ok_or_else(|| format!("expected '<kind>: <selector>' in '{}'", part.trim()))?;
            let kind: BoundaryKind = kind.parse().map_err(|e: Error| e.to_string())?;
            let sel: Selector = sel.parse().map_err(|e: Error| e.to_string())?;
            Ok(BoundaryRule::new(sel, kind))
        })
        .collect()
}

fn retag(mesh: &Mesh, spec: &BoundarySpec) -> Result<Mesh> {
    Mesh::from_triangles(
        mesh.vertices().to_vec(),
        mesh.triangles().to_vec(),
        spec,
        crate::mesh::RefinementEdge::AsGiven,
    )
}

/// `log(e_{i-1} / e_i) / log(h_{i-1} / h_i)`; the first entry is `None`.
pub fn compute_rates(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidInput(
            "rates need equally long error and mesh-size lists with at least two entries".into(),
        ));
    }
    if errors.iter().chain(hs).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("rates need positive errors and mesh sizes".into()));
    }
    let mut rates = vec![None];
    for i in 1..errors.len() {
        rates.push(Some((errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln()));
    }
    Ok(rates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dofs: usize,
    pub h: f64,
    pub err_grad_u: f64,
    pub rate_grad_u: Option<f64>,
    pub err_p: f64,
    pub rate_p: Option<f64>,
    pub err_grad_theta: f64,
    pub rate_grad_theta: Option<f64>,
    pub err_triple: f64,
    pub rate_triple: Option<f64>,
    pub psi: f64,
    pub rate_psi: Option<f64>,
    pub effec: Option<f64>,
    pub picard_iterations: usize,
    pub converged: bool,
}

/// Column names of the convergence table.
pub const CONVERGENCE_HEADER: &str = "level,dofs,h,err_grad_u,rate_grad_u,err_p,rate_p,err_grad_theta,rate_grad_theta,err_triple,rate_triple,psi,rate_psi,effec,picard_iterations,converged";

/// Column names of the adaptive table.
pub const ADAPTIVE_HEADER: &str = "round,dofs,cells,psi,marked,picard_iterations,converged";

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub rows: Vec<ConvergenceRow>,
    pub reports: Vec<SolveReport>,
    /// Solution on the finest level reached.
    pub last: Option<Solution>,
}

impl ConvergenceRun {
    /// False when some level stopped at the iteration cap; the table then
    /// ends at that level.
    pub fn converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

/// Solves on `config.levels` uniformly refined meshes and tabulates errors,
/// the estimator, effectivity and rates.
pub fn run_convergence(config: &RunConfig) -> Result<ConvergenceRun> {
    let exact = config.exact.solution();
    let data = config.problem_data();
    let mut run = ConvergenceRun {
        rows: Vec::new(),
        reports: Vec::new(),
        last: None,
    };
    let mut mesh = config.build_mesh()?;
    let (mut errs, mut hs): (Vec<ErrorNorms>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut psis = Vec::new();
    for level in 0..config.levels {
        if level > 0 {
            mesh = match &config.geometry {
                Geometry::Rectangle { bounds, nx, ny } => {
                    let [x0, x1, y0, y1] = *bounds;
                    let spec = config.boundary_spec(BoundarySpec::box_tags(x0, x1, y0, y1));
                    rectangle(x0, x1, y0, y1, nx << level, ny << level, &spec)?.into_shared()
                }
                _ => refine_uniform(&mesh).into_shared(),
            };
        }
        let (sol, report) = picard_solve(mesh.clone(), &config.params, &data, &config.solver)?;
        let err = error_norms(&sol.spaces, &sol.coeffs, exact.as_ref());
        let ind = element_residuals(&sol, &config.params, &data, config.estimator);
        let psi = global_estimate(&ind);
        errs.push(err);
        hs.push(mesh.h());
        psis.push(psi);
        run.rows.push(ConvergenceRow {
            level: level + 1,
            dofs: sol.n_dofs(),
            h: mesh.h(),
            err_grad_u: err.grad_u,
            rate_grad_u: None,
            err_p: err.p,
            rate_p: None,
            err_grad_theta: err.grad_theta,
            rate_grad_theta: None,
            err_triple: err.triple,
            rate_triple: None,
            psi,
            rate_psi: None,
            effec: effectivity(psi, err.triple).ok(),
            picard_iterations: report.iterations,
            converged: report.converged,
        });
        let converged = report.converged;
        run.reports.push(report);
        run.last = Some(sol);
        if !converged {
            break;
        }
    }
    if run.rows.len() >= 2 {
        let rates = |e: Vec<f64>| compute_rates(&e, &hs).unwrap_or_else(|_| vec![None; e.len()]);
        let gu = rates(errs.iter().map(|e| e.grad_u).collect());
        let p = rates(errs.iter().map(|e| e.p).collect());
        let gt = rates(errs.iter().map(|e| e.grad_theta).collect());
        let tr = rates(errs.iter().map(|e| e.triple).collect());
        let ps = rates(psis.clone());
        for (i, row) in run.rows.iter_mut().enumerate() {
            row.rate_grad_u = gu[i];
            row.rate_p = p[i];
            row.rate_grad_theta = gt[i];
            row.rate_triple = tr[i];
            row.rate_psi = ps[i];
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRow {
    pub round: usize,
    pub dofs: usize,
    pub cells: usize,
    pub psi: f64,
    pub marked: usize,
    pub picard_iterations: usize,
    pub converged: bool,
}

impl AdaptiveRow {
    pub fn from_round(r: &Round) -> Self {
        AdaptiveRow {
            round: r.index,
            dofs: r.n_dofs(),
            cells: r.mesh().n_cells(),
            psi: r.estimator.estimate,
            marked: r.marked.len(),
            picard_iterations: r.solve.iterations,
            converged: r.solve.converged,
        }
    }
}

#[derive(Debug)]
pub struct AdaptiveRun {
    pub rows: Vec<AdaptiveRow>,
    pub rounds: Vec<Round>,
    pub error: Option<Error>,
}

impl AdaptiveRun {
    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Runs the adaptive loop; `on_round` sees each completed round.
pub fn run_adaptive(config: &RunConfig, on_round: impl FnMut(&Round)) -> Result<AdaptiveRun> {
    let mesh = config.build_mesh()?;
    let data = config.problem_data();
    let adaptive = AdaptiveConfig {
        eta: config.eta,
        max_rounds: config.rounds,
        solver: config.solver,
        estimator: config.estimator,
    };
    let outcome = adaptive_loop(mesh, &config.params, &data, &adaptive, on_round);
    Ok(AdaptiveRun {
        rows: outcome.rounds.iter().map(AdaptiveRow::from_round).collect(),
        rounds: outcome.rounds,
        error: outcome.error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub dofs: usize,
    pub cells: usize,
    /// Largest nodal velocity magnitude.
    pub max_speed: f64,
    /// Mean temperature over the outlet.
    pub outlet_mean_temperature: f64,
    pub picard_iterations: usize,
    pub converged: bool,
    pub estimate: f64,
}

/// Solves the channel flow once.
pub fn run_outflow_demo(config: &RunConfig) -> Result<(Solution, SolveReport, DemoSummary)> {
    let mesh = config.build_mesh()?;
    let data = config.problem_data();
    let (sol, report) = picard_solve(mesh.clone(), &config.params, &data, &config.solver)?;
    let ind = element_residuals(&sol, &config.params, &data, config.estimator);
    let summary = DemoSummary {
        dofs: sol.n_dofs(),
        cells: mesh.n_cells(),
        max_speed: max_speed(&sol),
        outlet_mean_temperature: outlet_mean_temperature(&sol),
        picard_iterations: report.iterations,
        converged: report.converged,
        estimate: global_estimate(&ind),
    };
    Ok((sol, report, summary))
}

pub fn max_speed(sol: &Solution) -> f64 {
    let u = sol.velocity();
    let n = sol.spaces.velocity.n_scalar_dofs();
    let (ux, uy) = u.coeffs().split_at(n);
    ux.iter().zip(uy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
}

/// `(1 / |Gamma_O|) int_{Gamma_O} theta_h`, or 0 without outlet facets.
pub fn outlet_mean_temperature(sol: &Solution) -> f64 {
    let mesh = sol.mesh();
    let (mut integral, mut length) = (0.0, 0.0);
    for f in mesh.facets_with_tag(FacetTag::Outlet) {
        let (c, pts) = facet_points(mesh, f, 0);
        let cf = sol.spaces.cell_fields(&sol.coeffs, c);
        for fp in pts {
            integral += fp.weight * cf.theta.value(&fp.lam);
            length += fp.weight;
        }
    }
    if length > 0.0 {
        integral / length
    } else {
        0.0
    }
}

/// What a run wrote and whether every solve converged.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub converged: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: BTreeMap<&'static str, String>,
    results: &'a T,
    solver: Vec<&'a SolveReport>,
}

/// Runs `config` and writes its outputs into `out`.
pub fn execute(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let pairs: BTreeMap<&'static str, String> = config.to_pairs().into_iter().collect();
    let mut files = Vec::new();
    let converged = match config.kind {
        ExperimentKind::Convergence => {
            let run = run_convergence(config)?;
            files.push(out.join("results.csv"));
            write_csv(&files[0], &run.rows)?;
            files.push(out.join("report.json"));
            write_json(
                &files[1],
                &Report {
                    config: pairs,
                    results: &run.rows,
                    solver: run.reports.iter().collect(),
                },
            )?;
            if let Some(sol) = &run.last {
                files.push(out.join("solution.json"));
                write_solution(files.last().unwrap(), sol)?;
            }
            run.converged()
        }
        ExperimentKind::Adaptive => {
            let mut io_error = None;
            let run = run_adaptive(config, |r| {
                if io_error.is_some() {
                    return;
                }
                let vtk = VtkFile::from_solution(&r.solution, Some(&r.estimator.indicators.psi()));
                let res = vtk
                    .write(&out.join(format!("round_{}.vtk", r.index)))
                    .and_then(|_| write_mesh(r.mesh(), &out.join(format!("mesh_{}.txt", r.index))));
                if let Err(e) = res {
                    io_error = Some(e);
                }
            })?;
            if let Some(e) = io_error {
                return Err(e);
            }
            for r in &run.rounds {
                files.push(out.join(format!("round_{}.vtk", r.index)));
                files.push(out.join(format!("mesh_{}.txt", r.index)));
            }
            let csv = out.join("results.csv");
            write_csv(&csv, &run.rows)?;
            let json = out.join("report.json");
            write_json(
                &json,
                &Report {
                    config: pairs,
                    results: &run.rows,
                    solver: run.rounds.iter().map(|r| &r.solve).collect(),
                },
            )?;
            files.extend([csv, json]);
            if let Some(last) = run.rounds.last() {
                let p = out.join("solution.json");
                write_solution(&p, &last.solution)?;
                files.push(p);
            }
            if let Some(e) = run.error {
                return Err(e);
            }
            run.converged()
        }
        ExperimentKind::Demo => {
            let (sol, report, summary) = run_outflow_demo(config)?;
            let vtk = out.join("round_0.vtk");
            VtkFile::from_solution(&sol, None).write(&vtk)?;
            let mesh = out.join("mesh_0.txt");
            write_mesh(sol.mesh(), &mesh)?;
            let json = out.join("report.json");
            write_json(
                &json,
                &Report {
                    config: pairs,
                    results: &summary,
                    solver: vec![&report],
                },
            )?;
            let p = out.join("solution.json");
            write_solution(&p, &sol)?;
            files.extend([vtk, mesh, json, p]);
            summary.converged
        }
    };
    Ok(RunSummary {
        kind: config.kind,
        converged,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub dofs: usize,
    pub estimate: f64,
    pub error: Option<ErrorNorms>,
    pub effectivity: Option<f64>,
    pub indicators: Vec<f64>,
}

/// Estimator of a stored solution under the data of `config`. Convergence
/// configs also report the true error and the effectivity index.
pub fn estimate_stored(config: &RunConfig, sol: &Solution) -> Result<EstimateSummary> {
    let data = config.problem_data();
    let ind = element_residuals(sol, &config.params, &data, config.estimator);
    let estimate = global_estimate(&ind);
    let error = (config.kind == ExperimentKind::Convergence)
        .then(|| error_norms(&sol.spaces, &sol.coeffs, config.exact.solution().as_ref()));
    Ok(EstimateSummary {
        dofs: sol.n_dofs(),
        estimate,
        effectivity: error.and_then(|e| effectivity(estimate, e.triple).ok()),
        error,
        indicators: ind.psi(),
    })
}
