//! Mutation fuzzer: logical worker streams draw from independent PRNG
//! streams seeded by (rng-seed, stream index), so results are a pure
//! function of the configuration and never depend on scheduling. Each
//! stream walks its own shuffled seed order round-robin, mutates a handful
//! of features to random in-domain values, classifies, and vets.

use crate::error::Result;
use crate::model::Network;
use crate::oracle::{vet, LofEstimator, OracleConfig, Verdict};
use crate::par;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    /// Logical worker streams; total mutants = streams * iterations.
    pub n_streams: usize,
    /// Mutants attempted per stream.
    pub iterations: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone)]
pub struct FuzzOutcome {
    pub stream: usize,
    pub iteration: usize,
    pub seed_index: usize,
    pub input: Tensor,
    pub label: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
struct SeedCase {
    input: Tensor,
    label: usize,
}

fn run_stream(
    net: &Network,
    seeds: &[SeedCase],
    bounds: &[(f64, f64)],
    oracle_cfg: &OracleConfig,
    lof: Option<&LofEstimator>,
    cfg: &FuzzConfig,
    stream: usize,
) -> Result<Vec<FuzzOutcome>> {
    let mut rng = Rng::stream(cfg.rng_seed, stream as u64);
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    rng.shuffle(&mut order);
    let n = net.n_inputs();
    let maxk = (n / 4).max(1);
    let mut out = Vec::new();
    for iteration in 0..cfg.iterations {
        let seed_index = order[iteration % order.len()];
        let seed = &seeds[seed_index];
        let k = 1 + rng.below(maxk);
        let targets = rng.sample_indices(n, k);
        let mut mutant = seed.input.clone();
        for &i in &targets {
            mutant.data_mut()[i] = rng.range(bounds[i].0, bounds[i].1);
        }
        let (_, label) = net.forward(&mutant)?;
        let verdict = vet(oracle_cfg, lof, &seed.input, seed.label, &mutant, label)?;
        out.push(FuzzOutcome {
            stream,
            iteration,
            seed_index,
            input: mutant,
            label,
            verdict,
        });
    }
    Ok(out)
}

/// Runs all streams (in parallel when enabled) and concatenates outcomes in
/// stream order.
pub fn fuzz(
    net: &Network,
    seed_inputs: &[Tensor],
    seed_labels: &[usize],
    bounds: &[(f64, f64)],
    oracle_cfg: &OracleConfig,
    lof: Option<&LofEstimator>,
    cfg: &FuzzConfig,
) -> Result<Vec<FuzzOutcome>> {
    let seeds: Vec<SeedCase> = seed_inputs
        .iter()
        .zip(seed_labels)
        .map(|(input, &label)| SeedCase {
            input: input.clone(),
            label,
        })
        .collect();
    assert!(!seeds.is_empty(), "fuzzing needs at least one seed input");
    let results: Vec<Result<Vec<FuzzOutcome>>> = par::map_range(cfg.n_streams, |s| {
        run_stream(net, &seeds, bounds, oracle_cfg, lof, cfg, s)
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Sequential twin of [`fuzz`]: same logical streams executed on one thread.
pub fn fuzz_seq(
    net: &Network,
    seed_inputs: &[Tensor],
    seed_labels: &[usize],
    bounds: &[(f64, f64)],
    oracle_cfg: &OracleConfig,
    lof: Option<&LofEstimator>,
    cfg: &FuzzConfig,
) -> Result<Vec<FuzzOutcome>> {
    let seeds: Vec<SeedCase> = seed_inputs
        .iter()
        .zip(seed_labels)
        .map(|(input, &label)| SeedCase {
            input: input.clone(),
            label,
        })
        .collect();
    let results: Vec<Result<Vec<FuzzOutcome>>> = par::map_range_seq(cfg.n_streams, |s| {
        run_stream(net, &seeds, bounds, oracle_cfg, lof, cfg, s)
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_model;
    use crate::oracle::Norm;

    fn setup() -> (Network, Vec<Tensor>, Vec<usize>, Vec<(f64, f64)>, OracleConfig) {
        let net = generate_model("dense:8,relu,dense:2,softmax", &[2], 77).unwrap();
        let mut rng = Rng::new(5);
        let seeds: Vec<Tensor> = (0..10)
            .map(|_| Tensor::from_vec(vec![rng.uniform(), rng.uniform()]).unwrap())
            .collect();
        let labels: Vec<usize> = seeds.iter().map(|x| net.forward(x).unwrap().1).collect();
        let bounds = vec![(0.0, 1.0); 2];
        let oracle_cfg = OracleConfig::new(Norm::L0, 2);
        (net, seeds, labels, bounds, oracle_cfg)
    }

    #[test]
    fn zero_iterations_zero_mutants() {
        let (net, seeds, labels, bounds, ocfg) = setup();
        let cfg = FuzzConfig {
            n_streams: 3,
            iterations: 0,
            rng_seed: 1,
        };
        let out = fuzz(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn constant_network_produces_no_adversarials() {
        // zero weights everywhere: the label never changes
        let net = {
            use crate::model::{Layer, LayerKind, Network};
            Network::new(
                vec![2],
                vec![
                    Layer {
                        name: "dense".into(),
                        kind: LayerKind::Dense {
                            weights: Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap(),
                            bias: Tensor::new(vec![2], vec![1.0, 0.0]).unwrap(),
                        },
                    },
                    Layer { name: "activation".into(), kind: LayerKind::Softmax },
                ],
            )
            .unwrap()
        };
        let seeds = vec![Tensor::from_vec(vec![0.5, 0.5]).unwrap()];
        let labels = vec![0];
        let bounds = vec![(0.0, 1.0); 2];
        let ocfg = OracleConfig::new(Norm::L0, 2);
        let cfg = FuzzConfig {
            n_streams: 2,
            iterations: 200,
            rng_seed: 3,
        };
        let out = fuzz(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        assert_eq!(out.len(), 400);
        assert!(out.iter().all(|o| !o.verdict.adversarial));
    }

    #[test]
    fn parallel_matches_sequential_re_execution() {
        let (net, seeds, labels, bounds, ocfg) = setup();
        let cfg = FuzzConfig {
            n_streams: 4,
            iterations: 250,
            rng_seed: 42,
        };
        let par_out = fuzz(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        let seq_out = fuzz_seq(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        assert_eq!(par_out.len(), seq_out.len());
        assert_eq!(par_out.len(), 1000);
        let count = |out: &[FuzzOutcome]| {
            (
                out.iter().filter(|o| o.verdict.accepted).count(),
                out.iter().filter(|o| o.verdict.adversarial).count(),
            )
        };
        assert_eq!(count(&par_out), count(&seq_out));
        for (a, b) in par_out.iter().zip(&seq_out) {
            assert_eq!(a.stream, b.stream);
            assert_eq!(a.iteration, b.iteration);
            assert_eq!(a.seed_index, b.seed_index);
            assert_eq!(a.input.data(), b.input.data());
            assert_eq!(a.label, b.label);
            assert_eq!(a.verdict.adversarial, b.verdict.adversarial);
        }
    }

    #[test]
    fn identical_config_identical_adversarial_list() {
        let (net, seeds, labels, bounds, ocfg) = setup();
        let cfg = FuzzConfig {
            n_streams: 3,
            iterations: 100,
            rng_seed: 9,
        };
        let a = fuzz(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        let b = fuzz(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        let advs = |out: &[FuzzOutcome]| -> Vec<(usize, usize)> {
            out.iter()
                .filter(|o| o.verdict.adversarial)
                .map(|o| (o.stream, o.iteration))
                .collect()
        };
        assert_eq!(advs(&a), advs(&b));
    }

    #[test]
    fn mutants_stay_within_l0_threshold() {
        let (net, seeds, labels, bounds, ocfg) = setup();
        let cfg = FuzzConfig {
            n_streams: 1,
            iterations: 100,
            rng_seed: 11,
        };
        let out = fuzz(&net, &seeds, &labels, &bounds, &ocfg, None, &cfg).unwrap();
        // mutation count is capped at a quarter of the features, so the
        // distance vetting never rejects
        assert!(out.iter().all(|o| o.verdict.accepted || o.verdict.distance <= ocfg.dthr));
    }
}
