//! Convex duality for multistage stochastic optimization on finite scenario trees.

pub mod apps;
pub mod certify;
pub mod conic;
pub mod convex;
pub mod error;
pub mod extreal;
pub mod fixtures;
pub mod problem;
pub mod scalar;
pub mod solve;
pub mod tree;

mod serde_ext;

pub use error::{Error, Result};
pub use convex::{ConvexFunction, LossKind, ScalarLoss};
pub use extreal::ExtReal;
pub use problem::{DualPoint, PairEvaluation, SPInstance};
pub use scalar::Scalar;
pub use tree::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree, Trajectory};
