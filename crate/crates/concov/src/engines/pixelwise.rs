//! Greedy coordinate search over L0 balls: per round, a sampled subset of
//! input features is probed at its domain extremes, and the single change
//! with the best target score is applied. Stops on target met, on no
//! improvement, or once a quarter of the input features have been changed.

use crate::error::Result;
use crate::model::{ActivationTrace, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub enum PixelwiseOutcome {
    /// Target met; the returned input satisfies the target predicate.
    Met { input: Tensor, rounds: usize },
    /// Budget ran out or progress stalled after at least one improvement;
    /// the best-effort input is still worth vetting.
    Improved { input: Tensor, rounds: usize },
    /// No probed change improved the score.
    Failed { rounds: usize },
}

/// Runs the greedy search. `score` ranks traces (higher is better toward the
/// target), `met` decides success. Both see full activation traces so every
/// criterion can drive the search.
pub fn pixelwise_search(
    net: &Network,
    x: &Tensor,
    bounds: &[(f64, f64)],
    eval_budget: usize,
    score: impl Fn(&ActivationTrace) -> f64,
    met: impl Fn(&ActivationTrace) -> bool,
    rng: &mut Rng,
) -> Result<PixelwiseOutcome> {
    let n = x.len();
    let l0_budget = (n / 4).max(1);
    let mut current = x.clone();
    let mut current_trace = net.forward_trace(&current)?;
    if met(&current_trace) {
        return Ok(PixelwiseOutcome::Met { input: current, rounds: 0 });
    }
    let mut current_score = score(&current_trace);
    let mut changed = std::collections::BTreeSet::new();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let probe = rng.sample_indices(n, eval_budget.min(n));
        let mut best: Option<(f64, usize, f64)> = None; // (score, feature, value)
        for &i in &probe {
            // a fresh feature may not break the L0 budget
            if !changed.contains(&i) && changed.len() >= l0_budget {
                continue;
            }
            for value in [bounds[i].0, bounds[i].1] {
                if value == current.data()[i] {
                    continue;
                }
                let mut probe_x = current.clone();
                probe_x.data_mut()[i] = value;
                let trace = net.forward_trace(&probe_x)?;
                let s = score(&trace);
                let better = match best {
                    None => s > current_score,
                    Some((bs, bf, _)) => s > bs || (s == bs && i < bf),
                };
                if better && s > current_score {
                    best = Some((s, i, value));
                }
            }
        }
        let Some((s, feature, value)) = best else {
            return Ok(if changed.is_empty() {
                PixelwiseOutcome::Failed { rounds }
            } else {
                PixelwiseOutcome::Improved { input: current, rounds }
            });
        };
        current.data_mut()[feature] = value;
        changed.insert(feature);
        current_trace = net.forward_trace(&current)?;
        debug_assert!(s > current_score, "accepted rounds must strictly improve");
        current_score = s;
        if met(&current_trace) {
            return Ok(PixelwiseOutcome::Met { input: current, rounds });
        }
        if changed.len() >= l0_budget {
            return Ok(PixelwiseOutcome::Improved { input: current, rounds });
        }
    }
}
