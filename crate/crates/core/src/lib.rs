//! Blind calibration of unknown sensor gains from multi-snapshot random
//! measurements `y_l = diag(g) A_l x + ν_l`, by projected gradient descent on a
//! non-convex least-squares objective, optionally under known subspace priors.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the experiment driver uses.

pub mod bases;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod projections;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use ndarray;
pub use bases::{BasisKind, GainBasisKind, OrthonormalBasis, SignalBasisKind};
pub use error::{Error, Result};
pub use model::{make_instance, Dims, GroundTruth, InstanceSpec, ProblemInstance, SubspacePrior, SubspaceSpec};
pub use objective::{Iterate, Mode, Objective};
pub use projections::ProjectionMethod;
pub use rng::Distribution;
pub use scalar::Real;
pub use solver::{solve, SolverOptions, SolverReport, StepPolicy, StopCriteria, StopReason, UpdateOrder};

pub type Instance = ProblemInstance<f64>;
pub type Instance32 = ProblemInstance<f32>;
pub type Basis = OrthonormalBasis<f64>;
pub type Report = SolverReport<f64>;
