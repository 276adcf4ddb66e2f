//! Loop-level behaviors: empty runs, early termination, LP and pixelwise
//! progress, and report/CSV bookkeeping against the suite.

mod common;

use concov::engines::EngineConfig;
use concov::oracle::{Norm, OracleConfig};
use concov::runner::{self, Criterion, RunConfig};

fn base_config(dir: &std::path::Path, criterion: Criterion, norm: Norm) -> RunConfig {
    RunConfig {
        criterion,
        norm,
        init_size: 1,
        max_iterations: 100,
        save_all_tests: false,
        rng_seed: 7,
        outputs: dir.to_path_buf(),
        layers: vec![],
        bn_abstr: None,
        mcdc_cond_ratio: 0.01,
        engine: EngineConfig::new(norm, false),
        oracle: OracleConfig::new(norm, 2),
    }
}

#[test]
fn zero_iterations_reports_header_and_termination() {
    let net = common::small_net(41);
    let ds = common::self_labelled_dataset(&net, 40, 30, 17);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config(dir.path(), Criterion::Nc, Norm::L0);
    cfg.max_iterations = 0;
    let mut sink = Vec::new();
    let report = runner::run(&net, &ds, &cfg, &mut sink).unwrap();
    assert_eq!(report.generated, 0);
    let text = std::fs::read_to_string(&report.report_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("Starting tests for criterion NC"));
    assert_eq!(lines[1], "Randomly selecting an input from test data.");
    assert!(lines[2].starts_with("#0 NC: ") && lines[2].ends_with('%'));
    assert_eq!(
        lines[3],
        "Terminating after 0 iterations: 0 test generated, 0 of which is adversarial."
    );
}

#[test]
fn nc_l0_run_makes_progress_and_counts_match_csv() {
    let net = common::small_net(41);
    let ds = common::self_labelled_dataset(&net, 80, 60, 17);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config(dir.path(), Criterion::Nc, Norm::L0);
    cfg.init_size = 3;
    cfg.max_iterations = 25;
    let mut sink = Vec::new();
    let report = runner::run(&net, &ds, &cfg, &mut sink).unwrap();
    let first = report.coverage_history.first().unwrap();
    let last = report.coverage_history.last().unwrap();
    assert!(last >= first);
    let csv = std::fs::read_to_string(dir.path().join("new_inputs.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, report.generated);
}

#[test]
fn early_termination_once_selection_is_exhausted() {
    // saturating a small network's coverage forces the exhausted branch
    let net = common::small_net(12);
    let ds = common::self_labelled_dataset(&net, 200, 150, 92);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config(dir.path(), Criterion::Nc, Norm::L0);
    cfg.init_size = 100;
    cfg.max_iterations = 400;
    let mut sink = Vec::new();
    let report = runner::run(&net, &ds, &cfg, &mut sink).unwrap();
    let text = std::fs::read_to_string(&report.report_path).unwrap();
    if report.iterations < 400 {
        assert!(
            text.contains("Unable to find a new candidate input!"),
            "early stop must announce exhausted selection:\n{text}"
        );
        assert!(text.contains(&format!("Terminating after {} iterations:", report.iterations)));
    }
}

#[test]
fn parent_links_are_acyclic_and_within_bounds() {
    let net = common::small_net(41);
    let ds = common::self_labelled_dataset(&net, 80, 60, 17);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config(dir.path(), Criterion::Nc, Norm::L0);
    cfg.init_size = 5;
    cfg.max_iterations = 30;
    let mut sink = Vec::new();
    let report = runner::run(&net, &ds, &cfg, &mut sink).unwrap();
    for (id, entry) in report.suite.entries.iter().enumerate() {
        if let Some(p) = entry.parent {
            assert!(p < id, "parents precede children");
        }
    }
}
