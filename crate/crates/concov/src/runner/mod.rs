//! The coverage-guided testing loop: suite initialization, target selection,
//! engine invocation, oracle vetting, coverage bookkeeping, per-iteration
//! reporting and persistence of generated tests.

pub mod report;
pub mod suite;

use crate::bn::{
    self, AttemptedBfc, AttemptedBfdc, BnAbstraction, BnCounts, BnSelection, BnTarget,
};
use crate::coverage::nc::{NcSelection, NcState};
use crate::coverage::ssc::{enumerate_pairs, SscSelection, SscState};
use crate::coverage::{display_layer_name, format_neuron, CoverageLayers};
use crate::data::Dataset;
use crate::engines::pixelwise::{pixelwise_search, PixelwiseOutcome};
use crate::engines::EngineConfig;
use crate::error::{Error, Result};
use crate::lp::{self, FeatureConstraint, LpGoal, LpOutcome};
use crate::model::{ActivationTrace, LayerKind, Network};
use crate::oracle::{vet, LofEstimator, Norm, OracleConfig};
use crate::rng::Rng;
use crate::tensor::Tensor;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use suite::{TestEntry, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Nc,
    SscLp,
    Bfc,
    Bfdc,
}

impl Criterion {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nc" => Ok(Criterion::Nc),
            "ssclp" => Ok(Criterion::SscLp),
            "bfc" => Ok(Criterion::Bfc),
            "bfdc" => Ok(Criterion::Bfdc),
            "ssc" => Err(Error::Input(
                "criterion `ssc` needs the gradient-analysis engine, which is not available; \
                 supported pairs: nc x {l0,linf}, ssclp x linf, bfc x {l0,linf}, bfdc x linf"
                    .into(),
            )),
            other => Err(Error::Input(format!(
                "unknown criterion `{other}`; supported pairs: nc x {{l0,linf}}, ssclp x linf, \
                 bfc x {{l0,linf}}, bfdc x linf"
            ))),
        }
    }

    pub fn display(&self) -> &'static str {
        match self {
            Criterion::Nc => "NC",
            Criterion::SscLp => "SSC",
            Criterion::Bfc => "BFC",
            Criterion::Bfdc => "BFdC",
        }
    }

    fn supports(&self, norm: Norm) -> bool {
        match self {
            Criterion::Nc | Criterion::Bfc => true,
            Criterion::SscLp | Criterion::Bfdc => norm == Norm::Linf,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub criterion: Criterion,
    pub norm: Norm,
    pub init_size: usize,
    pub max_iterations: usize,
    pub save_all_tests: bool,
    pub rng_seed: u64,
    pub outputs: PathBuf,
    /// Covered layers (structural) or decision layers (ssclp); empty means
    /// every eligible layer.
    pub layers: Vec<String>,
    pub bn_abstr: Option<PathBuf>,
    pub mcdc_cond_ratio: f64,
    pub engine: EngineConfig,
    pub oracle: OracleConfig,
}

#[derive(Debug)]
pub struct RunReport {
    pub iterations: usize,
    pub generated: usize,
    pub adversarial: usize,
    /// Reported coverage per iteration, index 0 included.
    pub coverage_history: Vec<f64>,
    /// Batch recomputation of the same measure (NC and BFC), for drift checks.
    pub batch_history: Option<Vec<f64>>,
    pub report_path: PathBuf,
    /// Final suite: seeds plus every vetted generated test.
    pub suite: TestSuite,
}

enum CritState {
    Nc(NcState),
    Ssc(SscState),
    Bn {
        abstr: BnAbstraction,
        counts: BnCounts,
        layer_idx: Vec<usize>,
        bfdc: bool,
    },
}

impl CritState {
    fn measure(&self) -> Result<f64> {
        match self {
            CritState::Nc(s) => Ok(s.measure()),
            CritState::Ssc(s) => Ok(s.measure()),
            CritState::Bn { abstr, counts, bfdc, .. } => {
                if *bfdc {
                    counts.bfdc_measure(abstr)
                } else {
                    Ok(counts.bfc_measure(abstr))
                }
            }
        }
    }
}

enum SelectedTarget {
    Nc { layer: usize, neuron: usize },
    Ssc { layer_pos: usize, dec: usize, cond: usize },
    Bn(BnTarget),
}

/// Pluralization matches the console reports: singular up to one.
pub fn termination_line(iterations: usize, generated: usize, adversarial: usize) -> String {
    let tests = if generated == 1 || generated == 0 { "test" } else { "tests" };
    let is = if adversarial <= 1 { "is" } else { "are" };
    format!(
        "Terminating after {iterations} iterations: {generated} {tests} generated, {adversarial} of which {is} adversarial."
    )
}

fn coverage_line(iteration: usize, criterion: Criterion, value: f64) -> String {
    if iteration == 0 {
        format!("#0 {}: {:.8}%", criterion.display(), 100.0 * value)
    } else {
        format!("#{iteration} {}: {:.8}", criterion.display(), 100.0 * value)
    }
}

struct Log<'a> {
    lines: Vec<String>,
    out: &'a mut dyn Write,
}

impl<'a> Log<'a> {
    /// A line that goes to both the console and the report file.
    fn record(&mut self, line: String) {
        let _ = writeln!(self.out, "{line}");
        self.lines.push(line);
    }

    /// Console-only diagnostics.
    fn console(&mut self, line: String) {
        let _ = writeln!(self.out, "{line}");
    }
}

fn bn_feature_row(
    abstr: &BnAbstraction,
    layer_idx: &[usize],
    layer: usize,
    feature: usize,
    interval: usize,
) -> FeatureConstraint {
    let bl = &abstr.layers[layer];
    let coeffs = bl.projection.components[feature].clone();
    let offset: f64 = -coeffs
        .iter()
        .zip(&bl.projection.mean)
        .map(|(c, m)| c * m)
        .sum::<f64>();
    let (lo, hi) = bl.intervals[feature].bin_bounds(interval);
    FeatureConstraint {
        layer: layer_idx[layer],
        coeffs,
        offset,
        lo,
        hi,
    }
}

pub fn run(
    net: &Network,
    dataset: &Dataset,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<RunReport> {
    if !cfg.criterion.supports(cfg.norm) {
        return Err(Error::Input(format!(
            "criterion {} does not support norm {}; supported pairs: nc x {{l0,linf}}, \
             ssclp x linf, bfc x {{l0,linf}}, bfdc x linf",
            cfg.criterion.display(),
            cfg.norm.name()
        )));
    }
    cfg.engine.validate()?;
    cfg.oracle.validate()?;
    let mut log = Log { lines: Vec::new(), out };
    let mut rng = Rng::new(cfg.rng_seed);

    // criterion state
    let mut state = match cfg.criterion {
        Criterion::Nc => {
            let layers = if cfg.layers.is_empty() {
                CoverageLayers::all_relu(net)?
            } else {
                let (sel, dropped) = CoverageLayers::select(net, &cfg.layers)?;
                if !dropped.is_empty() {
                    log.console(format!(
                        "Ignoring layers without ReLU outputs: [{}]",
                        dropped.join(", ")
                    ));
                }
                sel
            };
            let names: Vec<&str> = layers
                .relu_layers
                .iter()
                .map(|&k| display_layer_name(net, k))
                .collect();
            log.console(format!(
                "DNN under test has {} layer functions, {} of which are to be covered:",
                net.depth(),
                layers.relu_layers.len()
            ));
            log.console(format!("[{}]", names.join(", ")));
            CritState::Nc(NcState::new(layers))
        }
        Criterion::SscLp => {
            let relu_layers = if cfg.layers.is_empty() {
                CoverageLayers::all_relu(net)?
                    .relu_layers
                    .into_iter()
                    .filter(|&k| k >= 2 && matches!(net.layer(k - 2).kind, LayerKind::Relu))
                    .collect()
            } else {
                CoverageLayers::select(net, &cfg.layers)?.0.relu_layers
            };
            let pairs = enumerate_pairs(net, &relu_layers)?;
            for dl in &pairs {
                log.console(format!(
                    "Considering {}(/{}) neuron pairs w.r.t decision layer {}",
                    dl.pair_count(),
                    dl.pair_count(),
                    display_layer_name(net, dl.dec_layer)
                ));
            }
            CritState::Ssc(SscState::new(pairs, cfg.mcdc_cond_ratio)?)
        }
        Criterion::Bfc | Criterion::Bfdc => {
            let path = cfg.bn_abstr.as_ref().ok_or_else(|| {
                Error::Input("bfc/bfdc need an abstraction file (--bn-abstr)".into())
            })?;
            let abstr = bn::load_abstraction(path)?;
            let layer_idx = abstr.resolve_layers(net)?;
            if cfg.criterion == Criterion::Bfdc && abstr.layers.len() < 2 {
                return Err(Error::Input(
                    "feature-dependence coverage needs at least two abstracted layers".into(),
                ));
            }
            let counts = BnCounts::new(&abstr);
            CritState::Bn {
                counts,
                layer_idx,
                bfdc: cfg.criterion == Criterion::Bfdc,
                abstr,
            }
        }
    };

    // optional LOF post-filter
    let lof = if cfg.oracle.lof_enabled {
        let sample =
            crate::oracle::lof_training_sample(&dataset.train_x, cfg.oracle.lof_sample, cfg.rng_seed);
        let _ = write!(
            log.out,
            "Initializing LOF-based novelty estimator with {} training samples... ",
            sample.len()
        );
        let est = LofEstimator::fit(sample, cfg.oracle.lof_k)?;
        log.console("done".into());
        log.console(format!("LOF-based novelty threshold is {}", cfg.oracle.lof_threshold));
        Some(est)
    } else {
        None
    };

    log.record(format!(
        "Starting tests for criterion {} with norm {} ({} max iterations).",
        cfg.criterion.display(),
        cfg.norm.name(),
        cfg.max_iterations
    ));
    let report_name = format!("{}_{}_report.txt", cfg.criterion.display(), cfg.norm.name());
    log.console(format!(
        "Reporting into: {}",
        cfg.outputs.join(&report_name).display()
    ));

    // initial suite
    if cfg.init_size == 1 {
        log.record("Randomly selecting an input from test data.".into());
    } else {
        log.record(format!(
            "Initializing with {} randomly selected test cases that are correctly classified.",
            cfg.init_size
        ));
    }
    let mut suite = TestSuite::init(dataset, net, cfg.init_size, &mut rng)?;
    let mut traces: Vec<ActivationTrace> = suite::suite_traces(net, &suite)?;

    // per-test feature caches for the BN criteria
    let mut features: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut bins: Vec<Vec<Vec<u16>>> = Vec::new();
    match &mut state {
        CritState::Nc(nc) => {
            for t in &traces {
                nc.update(t)?;
            }
        }
        CritState::Ssc(_) => {}
        CritState::Bn { abstr, counts, .. } => {
            for t in &traces {
                let f = abstr.features_of(net, t)?;
                let b = abstr.bin(&f);
                counts.add(abstr, &b);
                features.push(f);
                bins.push(b);
            }
        }
    }

    let mut coverage_history = vec![state.measure()?];
    let mut batch_history = vec![coverage_history[0]];
    log.record(coverage_line(0, cfg.criterion, coverage_history[0]));

    let mut attempted_ssc: BTreeSet<(usize, u32, u32, usize)> = BTreeSet::new();
    let mut attempted_bfc: AttemptedBfc = BTreeSet::new();
    let mut attempted_bfdc: AttemptedBfdc = BTreeSet::new();

    let mut executed = 0;
    for iteration in 1..=cfg.max_iterations {
        // ---- select a target and candidate
        let (target, candidate) = match &state {
            CritState::Nc(nc) => match nc.select_target(&traces) {
                NcSelection::Target { layer, neuron, candidate, .. } => {
                    log.record(format!(
                        "| Targeting activation of {} in {}",
                        format_neuron(net.output_shape(layer), neuron),
                        display_layer_name(net, layer)
                    ));
                    (SelectedTarget::Nc { layer, neuron }, candidate)
                }
                NcSelection::Exhausted => {
                    log.record("Unable to find a new candidate input!".into());
                    break;
                }
            },
            CritState::Ssc(ssc) => match ssc.select_target(&traces, &attempted_ssc) {
                SscSelection::Target { layer_pos, dec, cond, candidate } => {
                    let dl = &ssc.layers[layer_pos];
                    log.record(format!(
                        "| Targeting decision {} in {}, subject to condition {} in {}",
                        format_neuron(net.output_shape(dl.dec_layer), dec),
                        display_layer_name(net, dl.dec_layer),
                        format_neuron(net.output_shape(dl.cond_layer), cond),
                        display_layer_name(net, dl.cond_layer)
                    ));
                    (SelectedTarget::Ssc { layer_pos, dec, cond }, candidate)
                }
                SscSelection::Exhausted => {
                    log.record("Unable to find a new candidate input!".into());
                    break;
                }
            },
            CritState::Bn { abstr, counts, bfdc, .. } => {
                let selection = if *bfdc {
                    bn::bfdc_select_target(abstr, counts, &features, &bins, &attempted_bfdc)
                } else {
                    bn::bfc_select_target(abstr, counts, &features, &attempted_bfc)
                };
                match selection {
                    BnSelection::Target { target, candidate } => {
                        match &target {
                            BnTarget::Interval { layer, feature, interval } => {
                                log.record(format!(
                                    "| Targeting interval {} of feature {} in layer {} (from test {})",
                                    abstr.layers[*layer].intervals[*feature].format_interval(*interval),
                                    feature,
                                    abstr.layers[*layer].name,
                                    candidate
                                ));
                            }
                            BnTarget::CptEntry { layer, feature, interval, parent_combo } => {
                                let combo: Vec<String> =
                                    parent_combo.iter().map(|c| c.to_string()).collect();
                                log.record(format!(
                                    "| Targeting interval {} of feature {} in layer {}, subject to feature intervals ({}) in layer {} (from test {})",
                                    abstr.layers[*layer].intervals[*feature].format_interval(*interval),
                                    feature,
                                    abstr.layers[*layer].name,
                                    combo.join(", "),
                                    abstr.layers[*layer - 1].name,
                                    candidate
                                ));
                            }
                        }
                        (SelectedTarget::Bn(target), candidate)
                    }
                    BnSelection::Exhausted => {
                        log.record("Unable to find a new candidate input!".into());
                        break;
                    }
                }
            }
        };
        executed = iteration;

        // mark the attempt so failed pairs rotate instead of looping
        match &target {
            SelectedTarget::Ssc { layer_pos, dec, cond } => {
                attempted_ssc.insert((*layer_pos, *dec as u32, *cond as u32, candidate));
            }
            SelectedTarget::Bn(BnTarget::Interval { layer, feature, interval }) => {
                attempted_bfc.insert((*layer, *feature, *interval, candidate));
            }
            SelectedTarget::Bn(BnTarget::CptEntry { layer, feature, interval, parent_combo }) => {
                attempted_bfdc.insert((
                    *layer,
                    *feature,
                    *interval,
                    parent_combo.clone(),
                    candidate,
                ));
            }
            SelectedTarget::Nc { .. } => {}
        }

        // ---- invoke the engine
        let cand_input = suite.entries[candidate].input.clone();
        let cand_label = suite.entries[candidate].label;
        let cand_trace = traces[candidate].clone();
        let generated: Option<Tensor> = match cfg.norm {
            Norm::Linf => {
                let goal = match &target {
                    SelectedTarget::Nc { layer, neuron } => {
                        LpGoal::FlipSigns(vec![(*layer, *neuron)])
                    }
                    SelectedTarget::Ssc { layer_pos, dec, cond } => {
                        let CritState::Ssc(ssc) = &state else { unreachable!() };
                        let dl = &ssc.layers[*layer_pos];
                        LpGoal::FlipSigns(vec![(dl.cond_layer, *cond), (dl.dec_layer, *dec)])
                    }
                    SelectedTarget::Bn(BnTarget::Interval { layer, feature, interval }) => {
                        let CritState::Bn { abstr, layer_idx, .. } = &state else { unreachable!() };
                        LpGoal::FeatureIntervals(vec![bn_feature_row(
                            abstr, layer_idx, *layer, *feature, *interval,
                        )])
                    }
                    SelectedTarget::Bn(BnTarget::CptEntry {
                        layer,
                        feature,
                        interval,
                        parent_combo,
                    }) => {
                        let CritState::Bn { abstr, layer_idx, .. } = &state else { unreachable!() };
                        let mut rows = Vec::with_capacity(parent_combo.len() + 1);
                        for (pf, &pi) in parent_combo.iter().enumerate() {
                            rows.push(bn_feature_row(abstr, layer_idx, layer - 1, pf, pi as usize));
                        }
                        rows.push(bn_feature_row(abstr, layer_idx, *layer, *feature, *interval));
                        LpGoal::FeatureIntervals(rows)
                    }
                };
                let lb = cfg.engine.sample_lower_bound(&mut rng);
                let enc = lp::encode(
                    net,
                    &cand_input,
                    &cand_trace,
                    &goal,
                    &dataset.bounds,
                    cfg.engine.activation_margin,
                    lb,
                )?;
                match lp::solve(&enc.problem, cfg.engine.lp_time_limit)? {
                    LpOutcome::Optimal { x: sol, .. } => {
                        let x_new = Tensor::new(
                            cand_input.shape().to_vec(),
                            enc.input_vars.iter().map(|v| sol[v.0]).collect(),
                        )?;
                        if lp::verify_solution(
                            net,
                            &cand_trace,
                            &goal,
                            &x_new,
                            &dataset.bounds,
                            cfg.engine.activation_margin,
                        )? {
                            Some(x_new)
                        } else {
                            log.record("| LP solution failed post-hoc verification".into());
                            None
                        }
                    }
                    LpOutcome::Infeasible | LpOutcome::Unbounded => {
                        log.record("Infeasible".into());
                        None
                    }
                    LpOutcome::TimeLimit => {
                        log.record("Infeasible (time limit)".into());
                        None
                    }
                }
            }
            Norm::L0 => {
                let outcome = match &target {
                    SelectedTarget::Nc { layer, neuron } => {
                        let (layer, neuron) = (*layer, *neuron);
                        pixelwise_search(
                            net,
                            &cand_input,
                            &dataset.bounds,
                            cfg.engine.l0_eval_budget,
                            |t| t.layers[layer].pre.data()[neuron],
                            |t| t.layers[layer].pre.data()[neuron] > 0.0,
                            &mut rng,
                        )?
                    }
                    SelectedTarget::Bn(BnTarget::Interval { layer, feature, interval }) => {
                        let CritState::Bn { abstr, layer_idx, .. } = &state else { unreachable!() };
                        let k = layer_idx[*layer];
                        let proj = &abstr.layers[*layer].projection;
                        let set = &abstr.layers[*layer].intervals[*feature];
                        let (feature, interval) = (*feature, *interval);
                        pixelwise_search(
                            net,
                            &cand_input,
                            &dataset.bounds,
                            cfg.engine.l0_eval_budget,
                            |t| {
                                let f = proj.project(t.layers[k].post.data()).expect("shape ok");
                                -set.distance(interval, f[feature])
                            },
                            |t| {
                                let f = proj.project(t.layers[k].post.data()).expect("shape ok");
                                set.interval_index(f[feature]) == interval
                            },
                            &mut rng,
                        )?
                    }
                    _ => unreachable!("criterion/norm matrix checked at startup"),
                };
                match outcome {
                    PixelwiseOutcome::Met { input, .. } | PixelwiseOutcome::Improved { input, .. } => {
                        Some(input)
                    }
                    PixelwiseOutcome::Failed { .. } => None,
                }
            }
        };

        // ---- vet and insert
        if let Some(x_new) = generated {
            let (_, label) = net.forward(&x_new)?;
            let verdict = vet(&cfg.oracle, lof.as_ref(), &cand_input, cand_label, &x_new, label)?;
            if verdict.accepted {
                let desc = log.lines.last().cloned().unwrap_or_default();
                let new_trace = net.forward_trace(&x_new)?;
                match &mut state {
                    CritState::Nc(nc) => nc.update(&new_trace)?,
                    CritState::Ssc(ssc) => {
                        ssc.update(&cand_trace, &new_trace)?;
                    }
                    CritState::Bn { abstr, counts, .. } => {
                        let f = abstr.features_of(net, &new_trace)?;
                        let b = abstr.bin(&f);
                        counts.add(abstr, &b);
                        features.push(f);
                        bins.push(b);
                    }
                }
                traces.push(new_trace);
                suite.push(TestEntry {
                    input: x_new,
                    label,
                    parent: Some(candidate),
                    distance: verdict.distance,
                    adversarial: verdict.adversarial,
                    target_desc: desc,
                });
            }
        }

        let measure = state.measure()?;
        coverage_history.push(measure);
        // batch recomputation guards against incremental drift
        let batch = match &state {
            CritState::Nc(nc) => NcState::recompute(nc.layers().clone(), &traces)?,
            CritState::Bn { abstr, bfdc, .. } if !*bfdc => {
                let mut fresh = BnCounts::new(abstr);
                for b in &bins {
                    fresh.add(abstr, b);
                }
                fresh.bfc_measure(abstr)
            }
            _ => measure,
        };
        batch_history.push(batch);
        log.record(coverage_line(iteration, cfg.criterion, measure));
    }

    let generated = suite.generated().count();
    let adversarial = suite.generated().filter(|(_, e)| e.adversarial).count();
    log.record(termination_line(executed, generated, adversarial));

    let report_path = report::persist(
        &cfg.outputs,
        &report_name,
        &log.lines,
        &suite,
        dataset.kind,
        cfg.save_all_tests,
    )?;
    Ok(RunReport {
        iterations: executed,
        generated,
        adversarial,
        coverage_history,
        batch_history: Some(batch_history),
        report_path,
        suite,
    })
}
