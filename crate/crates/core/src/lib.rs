//! D-optimal sensor selection by convex relaxation.
//!
//! Given a candidate basis `U` (`n` candidates by `r` latent modes), choose
//! `p` rows maximizing `log det(U_Sᵀ U_S)`. The combinatorial problem is
//! relaxed to weights `w ∈ (0, 1)ⁿ` with `Σ w = p` and a log barrier, then
//! solved by a full-space Newton method or by randomized subspace Newton
//! variants that update only `s` weights per step.

pub mod baselines;
pub mod error;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{CandidateBasis, SelectionVector, SnapshotMatrix};
pub use objective::{LogDet, WeightVector};
pub use solvers::{solve, Method, SolverConfig, SolverReport, SubspaceNewton};
