//! Coverage-guided test generation for feed-forward neural-network
//! classifiers: structural (NC, SSC) and Bayesian-network-based (BFC, BFdC)
//! coverage criteria, concolic LP / pixel-wise / fuzzing search engines, and
//! a distance + outlier oracle that flags adversarial examples.

pub mod bn;
pub mod cli;
pub mod coverage;
pub mod data;
pub mod engines;
pub mod error;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod runner;
pub mod par;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
