//! Stochastic Cartesian variational inequalities: block prox geometries, synthetic
//! problem instances with known solutions, the randomized block and full-block
//! stochastic mirror-prox methods, and the metrics used to check their rates.

pub mod block;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod rng;
pub mod solvers;

pub use block::{BlockLayout, BlockVector};
pub use error::{Result, ScviError};
pub use geometry::{BlockGeometry, ComponentSet, Dgf, Norm, ENTROPY_EPS};
pub use linalg::Matrix;
pub use problem::{MonotonicityClass, ProblemConstants, ScviProblem};
pub use rng::{NoiseStream, RunStreams};
