//! Nitsche finite elements for the stationary Boussinesq system.

pub mod error;
pub mod geom;
pub mod mesh;
pub mod space;
pub mod linalg;
pub mod forms;
pub mod manufactured;
pub mod solver;
pub mod estimator;
pub mod io;
pub mod experiments;

pub use error::{Error, Result};
