use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Thermal expansion coefficient.
    pub alpha: f64,
    /// Thermal conductivity.
    pub kappa: f64,
    /// Robin coefficient on walls.
    pub beta: f64,
    /// Friction coefficient on walls.
    pub gamma: f64,
    /// Nitsche penalty.
    pub gamma_n: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            nu: 1.0,
            alpha: 1.0,
            kappa: 1.0,
            beta: 1.0,
            gamma: 1.0,
            gamma_n: 10.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nu", self.nu),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("gamma_n", self.gamma_n),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        Ok(())
    }
}

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
/// Boundary datum depending on the point and the outward unit normal there.
pub type ScalarTrace = Arc<dyn Fn(Point, [f64; 2]) -> f64 + Send + Sync>;
pub type VectorTrace = Arc<dyn Fn(Point, [f64; 2]) -> [f64; 2] + Send + Sync>;

/// The function `psi` in the outflow heat flux `(u.n) theta psi(u.n)`.
#[derive(Clone, Default)]
pub enum SwitchingFunction {
    #[default]
    Zero,
    Constant(f64),
    /// `psi(s) = (s + |s|) / 2`.
    PositivePart,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl SwitchingFunction {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            SwitchingFunction::Zero => 0.0,
            SwitchingFunction::Constant(c) => *c,
            SwitchingFunction::PositivePart => 0.5 * (s + s.abs()),
            SwitchingFunction::Custom(f) => f(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SwitchingFunction::Zero)
    }

    /// Samples `[-100, 100]` and rejects non-finite values.
    pub fn validate(&self) -> Result<()> {
        for i in 0..=2000 {
            let s = -100.0 + 0.1 * i as f64;
            if !self.eval(s).is_finite() {
                return Err(Error::InvalidInput(format!("switching function is not finite at {s}")));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SwitchingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchingFunction::Zero => write!(f, "Zero"),
            SwitchingFunction::Constant(c) => write!(f, "Constant({c})"),
            SwitchingFunction::PositivePart => write!(f, "PositivePart"),
            SwitchingFunction::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Prescribed nonzero boundary data. All fields default to zero.
///
/// On walls: `u.n = r_w` and `(T n).tau + gamma u.tau = t_w`,
/// `kappa grad(theta).n + beta theta = q_w`. On outlets: `T n = t_o` and
/// `kappa grad(theta).n - (u.n) theta psi(u.n) = q_o`. The inlet traction
/// `t_i` and flux `q_i` do not enter the discrete problem; the estimator
/// subtracts them from its inlet residuals.
#[derive(Clone, Default)]
pub struct Compensation {
    pub r_w: Option<ScalarTrace>,
    pub t_w: Option<ScalarTrace>,
    pub t_o: Option<VectorTrace>,
    pub q_w: Option<ScalarTrace>,
    pub q_o: Option<ScalarTrace>,
    pub t_i: Option<VectorTrace>,
    pub q_i: Option<ScalarTrace>,
}

impl fmt::Debug for Compensation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Compensation")
            .field("r_w", &self.r_w.is_some())
            .field("t_w", &self.t_w.is_some())
            .field("t_o", &self.t_o.is_some())
            .field("q_w", &self.q_w.is_some())
            .field("q_o", &self.q_o.is_some())
            .field("t_i", &self.t_i.is_some())
            .field("q_i", &self.q_i.is_some())
            .finish()
    }
}

fn eval_scalar(f: &Option<ScalarTrace>, x: Point, n: [f64; 2]) -> f64 {
    f.as_ref().map_or(0.0, |f| f(x, n))
}

fn eval_vector(f: &Option<VectorTrace>, x: Point, n: [f64; 2]) -> [f64; 2] {
    f.as_ref().map_or([0.0; 2], |f| f(x, n))
}

impl Compensation {
    pub fn r_w(&self, x: Point, n: [f64; 2]) -> f64 {
        eval_scalar(&self.r_w, x, n)
    }
    pub fn t_w(&self, x: Point, n: [f64; 2]) -> f64 {
        eval_scalar(&self.t_w, x, n)
    }
    pub fn t_o(&self, x: Point, n: [f64; 2]) -> [f64; 2] {
        eval_vector(&self.t_o, x, n)
    }
    pub fn q_w(&self, x: Point, n: [f64; 2]) -> f64 {
        eval_scalar(&self.q_w, x, n)
    }
    pub fn q_o(&self, x: Point, n: [f64; 2]) -> f64 {
        eval_scalar(&self.q_o, x, n)
    }
    pub fn t_i(&self, x: Point, n: [f64; 2]) -> [f64; 2] {
        eval_vector(&self.t_i, x, n)
    }
    pub fn q_i(&self, x: Point, n: [f64; 2]) -> f64 {
        eval_scalar(&self.q_i, x, n)
    }
}

/// Sources and boundary data of the Boussinesq problem.
#[derive(Clone)]
pub struct ProblemData {
    /// Buoyancy direction field; the body force is `alpha theta f`.
    pub f: VectorField,
    pub g: ScalarField,
    pub u_star: VectorField,
    pub theta_star: ScalarField,
    pub psi: SwitchingFunction,
    pub compensation: Compensation,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("psi", &self.psi)
            .field("compensation", &self.compensation)
            .finish_non_exhaustive()
    }
}

impl Default for ProblemData {
    fn default() -> Self {
        ProblemData::homogeneous()
    }
}

impl ProblemData {
    /// All data zero.
    pub fn homogeneous() -> Self {
        ProblemData {
            f: Arc::new(|_| [0.0; 2]),
            g: Arc::new(|_| 0.0),
            u_star: Arc::new(|_| [0.0; 2]),
            theta_star: Arc::new(|_| 0.0),
            psi: SwitchingFunction::Zero,
            compensation: Compensation::default(),
        }
    }

    /// Constant sources with zero boundary data.
    pub fn constant_sources(f: [f64; 2], g: f64) -> Self {
        ProblemData {
            f: Arc::new(move |_| f),
            g: Arc::new(move |_| g),
            ..ProblemData::homogeneous()
        }
    }

    pub fn with_psi(mut self, psi: SwitchingFunction) -> Self {
        self.psi = psi;
        self
    }

    /// Multiplies every source and boundary datum by `factor`.
    pub fn scaled(&self, factor: f64) -> ProblemData {
        fn sc(f: &ScalarField, a: f64) -> ScalarField {
            let f = f.clone();
            Arc::new(move |x| a * f(x))
        }
        fn vc(f: &VectorField, a: f64) -> VectorField {
            let f = f.clone();
            Arc::new(move |x| {
                let v = f(x);
                [a * v[0], a * v[1]]
            })
        }
        fn st(f: &Option<ScalarTrace>, a: f64) -> Option<ScalarTrace> {
            f.clone().map(|f| Arc::new(move |x, n| a * f(x, n)) as ScalarTrace)
        }
        fn vt(f: &Option<VectorTrace>, a: f64) -> Option<VectorTrace> {
            f.clone().map(|f| {
                Arc::new(move |x, n| {
                    let v = f(x, n);
                    [a * v[0], a * v[1]]
                }) as VectorTrace
            })
        }
        let c = &self.compensation;
        ProblemData {
            f: vc(&self.f, factor),
            g: sc(&self.g, factor),
            u_star: vc(&self.u_star, factor),
            theta_star: sc(&self.theta_star, factor),
            psi: self.psi.clone(),
            compensation: Compensation {
                r_w: st(&c.r_w, factor),
                t_w: st(&c.t_w, factor),
                t_o: vt(&c.t_o, factor),
                q_w: st(&c.q_w, factor),
                q_o: st(&c.q_o, factor),
                t_i: vt(&c.t_i, factor),
                q_i: st(&c.q_i, factor),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.psi.validate()
    }
}
