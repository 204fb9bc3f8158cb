//! Picard iteration for the coupled problem.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Assembler, LinearizationState, PhysicalParams, ProblemData};
use crate::linalg::{self, Ordering};
use crate::mesh::Mesh;
use crate::space::{EnergyNorms, FeFunction, FieldSpaces};

/// Discrete `(u_h, p_h, theta_h)` as one block vector.
#[derive(Debug, Clone)]
pub struct Solution {
    pub spaces: FieldSpaces,
    pub coeffs: Vec<f64>,
}

impl Solution {
    pub fn zeros(spaces: FieldSpaces) -> Self {
        let n = spaces.n_dofs();
        Solution {
            spaces,
            coeffs: vec![0.0; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.spaces.mesh()
    }

    pub fn n_dofs(&self) -> usize {
        self.coeffs.len()
    }

    pub fn fields(&self) -> (FeFunction, FeFunction, FeFunction) {
        self.spaces.split(&self.coeffs).expect("solution matches its spaces")
    }

    pub fn velocity(&self) -> FeFunction {
        self.fields().0
    }

    pub fn pressure(&self) -> FeFunction {
        self.fields().1
    }

    pub fn temperature(&self) -> FeFunction {
        self.fields().2
    }

    pub fn energy_norms(&self) -> EnergyNorms {
        self.spaces.energy_norms(&self.coeffs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    /// One linear solve with `w = 0` and `psi_prev = 0`.
    #[default]
    StokesHeat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once `|||x_m - x_{m-1}||| <= tol_rel |||x_m|||`.
    pub tol_rel: f64,
    pub max_iters: usize,
    pub initial_guess: InitialGuess,
    /// `x_m = x_{m-1} + relaxation (x_hat - x_{m-1})`.
    pub relaxation: f64,
    pub ordering: Ordering,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-8,
            max_iters: 50,
            initial_guess: InitialGuess::StokesHeat,
            relaxation: 1.0,
            ordering: Ordering::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0 && self.tol_rel.is_finite()) {
            return Err(Error::InvalidInput(format!("tol_rel must be positive, got {}", self.tol_rel)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// One Picard step as written to the iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|||x_m - x_{m-1}|||`.
    pub increment: f64,
    /// `|||x_m|||`.
    pub norm: f64,
}

impl IterationRecord {
    pub fn relative_increment(&self) -> f64 {
        if self.norm > 0.0 {
            self.increment / self.norm
        } else if self.increment == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    /// Relative residual of the linearised system re-assembled at the final
    /// iterate.
    pub residual: f64,
    pub n_dofs: usize,
}

impl SolveReport {
    pub fn increments(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.increment).collect()
    }

    /// `increment_m / increment_{m-1}` for `m >= 2`.
    pub fn increment_ratios(&self) -> Vec<f64> {
        self.history
            .windows(2)
            .map(|w| w[1].increment / w[0].increment)
            .collect()
    }

    /// One JSON object per iteration.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.history {
            out.push_str(&serde_json::to_string(r).expect("plain record"));
            out.push('\n');
        }
        out
    }
}

/// `|||.|||` of a block vector.
fn triple(spaces: &FieldSpaces, x: &[f64]) -> f64 {
    spaces.energy_norms(x).triple
}

/// Solves the linearised problem with zero convection and zero buoyancy.
pub fn stokes_heat_init(assembler: &Assembler, ordering: Ordering) -> Result<Vec<f64>> {
    let sys = assembler.linearized_system(&LinearizationState::zero(assembler.spaces()))?;
    linalg::solve_with(&sys.matrix, &sys.rhs, ordering)
}

/// Picard iteration on `mesh`. Failing to reach the tolerance within
/// `max_iters` is reported through [`SolveReport::converged`], not as an error.
pub fn picard_solve(
    mesh: Arc<Mesh>,
    params: &PhysicalParams,
    data: &ProblemData,
    config: &SolverConfig,
) -> Result<(Solution, SolveReport)> {
    let spaces = FieldSpaces::taylor_hood(mesh);
    let assembler = Assembler::new(spaces, *params, data.clone())?;
    picard_with(&assembler, config)
}

/// Picard iteration reusing the iterate-independent parts in `assembler`.
pub fn picard_with(assembler: &Assembler, config: &SolverConfig) -> Result<(Solution, SolveReport)> {
    config.validate()?;
    let spaces = assembler.spaces();
    let wrap = |iteration: usize| move |e: Error| Error::PicardSolve {
        iteration,
        source: Box::new(e),
    };
    let mut x = match config.initial_guess {
        InitialGuess::Zero => vec![0.0; spaces.n_dofs()],
        InitialGuess::StokesHeat => stokes_heat_init(assembler, config.ordering).map_err(wrap(0))?,
    };
    let mut history = Vec::new();
    let mut converged = false;
    for m in 1..=config.max_iters {
        let state = LinearizationState::from_block(spaces, &x)?;
        let sys = assembler.linearized_system(&state)?;
        let x_hat = linalg::solve_with(&sys.matrix, &sys.rhs, config.ordering).map_err(wrap(m))?;
        let omega = config.relaxation;
        let delta: Vec<f64> = x_hat.iter().zip(&x).map(|(a, b)| omega * (a - b)).collect();
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += d;
        }
        let record = IterationRecord {
            iteration: m,
            increment: triple(spaces, &delta),
            norm: triple(spaces, &x),
        };
        history.push(record);
        if !record.increment.is_finite() || !record.norm.is_finite() {
            break;
        }
        if record.increment <= config.tol_rel * record.norm {
            converged = true;
            break;
        }
    }
    let state = LinearizationState::from_block(spaces, &x)?;
    let residual = assembler.linearized_system(&state)?.relative_residual(&x);
    let report = SolveReport {
        iterations: history.len(),
        converged,
        history,
        residual,
        n_dofs: x.len(),
    };
    Ok((
        Solution {
            spaces: spaces.clone(),
            coeffs: x,
        },
        report,
    ))
}
