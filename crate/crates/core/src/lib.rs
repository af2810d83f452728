//! Transformed snapshot interpolation with trainable transport-field
//! transforms.
//!
//! Snapshots of a parametric function are moved by parameter-dependent
//! spatial transforms before Lagrange interpolation in the parameter. The
//! transforms are polynomial curves solving a transport ODE collocation
//! problem; the transport fields are trained by gradient descent on the L1
//! reconstruction error.

pub mod curves;
pub mod error;
pub mod optim;
pub mod par;
pub mod pgrid;
pub mod pspace;
pub mod stability;
pub mod transport;
pub mod tsi;

pub use curves::{solve_curve, CurvePlan, NewtonBasis, NewtonCurve, SolveSettings};
pub use error::{Error, Result};
pub use optim::{DescentSettings, FieldGradient, PoissonSolver, Smoother};
pub use pgrid::{Domain, GridFunction};
pub use pspace::{lagrange_weights, lebesgue_constant, ParamNodeSet};
pub use stability::{StabilityReport, TransformPair};
pub use transport::{LowResTransform, TransportField};
pub use tsi::{ObjectiveMode, SnapshotSet, TrainingSet, Transform, TsiModel};
