//! Linear programming: problem construction, an in-process two-phase dense
//! simplex solver, and the encoding of a network's fixed activation pattern
//! plus a test target into a distance-minimization LP.

pub mod encode;
pub mod problem;
pub mod simplex;

pub use encode::{encode, verify_solution, Encoded, FeatureConstraint, LpGoal};
pub use problem::{LpProblem, Op, VarId};
pub use simplex::{solve, LpOutcome};
