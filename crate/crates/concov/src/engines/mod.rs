//! Test-input generation engines: LP-based concolic search over a fixed
//! activation pattern (L-infinity), greedy pixel-wise optimization (L0), and
//! a random-mutation fuzzer.

pub mod fuzz;
pub mod pixelwise;

use crate::error::{Error, Result};
use crate::oracle::Norm;
use crate::rng::Rng;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub norm: Norm,
    /// Hard lower bound on the L-infinity distance of generated inputs.
    pub dmin_hard: f64,
    /// Uniform noise added on top of the hard bound per LP instance.
    pub dmin_noise: f64,
    /// Margin enforcing strict activation inequalities in the LP.
    pub activation_margin: f64,
    /// Features probed per pixel-wise round.
    pub l0_eval_budget: usize,
    pub lp_time_limit: Duration,
}

impl EngineConfig {
    /// Defaults: the distance lower bound is 1/255 for image data and 1/100
    /// otherwise, with noise 1/10.
    pub fn new(norm: Norm, image_data: bool) -> Self {
        EngineConfig {
            norm,
            dmin_hard: if image_data { 1.0 / 255.0 } else { 1.0 / 100.0 },
            dmin_noise: 0.1,
            activation_margin: 1e-4,
            l0_eval_budget: 64,
            lp_time_limit: Duration::from_secs(30),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dmin_hard) {
            return Err(Error::Input(format!(
                "distance lower bound {} outside [0, 1)",
                self.dmin_hard
            )));
        }
        if !(0.0..(1.0 - self.dmin_hard)).contains(&self.dmin_noise) {
            return Err(Error::Input(format!(
                "lower-bound noise {} outside [0, {})",
                self.dmin_noise,
                1.0 - self.dmin_hard
            )));
        }
        if self.activation_margin <= 0.0 {
            return Err(Error::Input("activation margin must be positive".into()));
        }
        if self.l0_eval_budget == 0 {
            return Err(Error::Input("pixel-wise evaluation budget must be positive".into()));
        }
        Ok(())
    }

    /// Draws the per-instance distance lower bound
    /// `dmin_hard + U(0, dmin_noise)`.
    pub fn sample_lower_bound(&self, rng: &mut Rng) -> f64 {
        self.dmin_hard + rng.range(0.0, self.dmin_noise)
    }
}
