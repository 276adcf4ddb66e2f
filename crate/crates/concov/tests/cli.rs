//! End-to-end CLI tests over the compiled binary: every subcommand, the
//! report/abstraction output grammar, determinism, and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn concov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Generates a model file and a matching self-labelled CSV dataset pair.
fn fixture(dir: &Path) -> (String, String) {
    let model_path = dir.join("model.json");
    let out = concov(&[
        "gen-model",
        "--spec",
        "dense:8,relu,dense:6,relu,dense:3,softmax",
        "--input-shape",
        "2",
        "--seed",
        "41",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let net = concov::model::load_model(&model_path).unwrap();
    let (train, test) = common::write_csv_dataset(dir, &net, 80, 60, 17);
    (
        model_path.to_string_lossy().into_owned(),
        format!("csv:{train},{test}"),
    )
}

#[test]
fn gen_model_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    for p in [&p1, &p2] {
        let out = concov(&[
            "gen-model",
            "--spec",
            "conv:3x3x4,relu,maxpool:2x2,flatten,dense:5,relu,dense:3,softmax",
            "--input-shape",
            "8x8x1",
            "--seed",
            "5",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    concov::model::load_model(&p1).unwrap();
}

#[test]
fn gen_model_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = concov(&[
        "gen-model",
        "--spec",
        "dense:8,conv:3x3x4,softmax",
        "--input-shape",
        "5",
        "--out",
        dir.path().join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn test_nc_l0_run_and_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let run = |outdir: &Path| {
        let out = concov(&[
            "test",
            "--dataset",
            &dataset,
            "--model",
            &model,
            "--outputs",
            outdir.to_str().unwrap(),
            "--criterion",
            "nc",
            "--norm",
            "l0",
            "--init",
            "3",
            "--max-iterations",
            "10",
            "--rng-seed",
            "7",
            "--save-all-tests",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(outdir.join("NC_L0_report.txt")).unwrap()
    };
    let a = run(&dir.path().join("run1"));
    let b = run(&dir.path().join("run2"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("Starting tests for criterion NC with norm L0 (10 max iterations)."));
    assert!(text.contains("Initializing with 3 randomly selected test cases that are correctly classified."));
    assert!(text.trim_end().lines().last().unwrap().starts_with("Terminating after "));
    assert!(dir.path().join("run1").join("new_inputs.csv").exists());
}

#[test]
fn test_nc_linf_lp_run() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let outdir = dir.path().join("out");
    let out = concov(&[
        "test",
        "--dataset",
        &dataset,
        "--model",
        &model,
        "--outputs",
        outdir.to_str().unwrap(),
        "--criterion",
        "nc",
        "--norm",
        "linf",
        "--max-iterations",
        "5",
        "--rng-seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(outdir.join("NC_Linf_report.txt")).unwrap();
    assert!(text.contains("Randomly selecting an input from test data."));
    assert!(text.contains("#0 NC: "));
}

#[test]
fn ssclp_run_on_deeper_net() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let outdir = dir.path().join("out");
    let out = concov(&[
        "test",
        "--dataset",
        &dataset,
        "--model",
        &model,
        "--outputs",
        outdir.to_str().unwrap(),
        "--criterion",
        "ssclp",
        "--norm",
        "linf",
        "--layers",
        "activation_1",
        "--init",
        "5",
        "--max-iterations",
        "5",
        "--rng-seed",
        "11",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(outdir.join("SSC_Linf_report.txt")).unwrap();
    assert!(text.contains("#0 SSC: 0.00000000%"), "SSC accounting must start at zero:\n{text}");
    let console = stdout(&out);
    assert!(console.contains("Considering 48(/48) neuron pairs w.r.t decision layer dense_1"));
}

#[test]
fn dbnabstr_create_show_and_bn_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let bn_path = dir.path().join("bn.json");
    let out = concov(&[
        "dbnabstr",
        "create",
        bn_path.to_str().unwrap(),
        "--dataset",
        &dataset,
        "--model",
        &model,
        "--num-features",
        "2",
        "--num-intervals",
        "3",
        "--extended-discr",
        "--rng-seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let console = stdout(&out);
    assert!(console.contains("Using extended 3-bin discretizer with uniform strategy for layer activation"));
    assert!(console.contains("| Extracted 2 features"));
    assert!(console.contains("| Discretization of feature 0 involves 3 intervals"));
    assert!(console.contains("| Created Bayesian Network of 4 nodes and 4 edges."));
    assert!(console.contains("Dumping abstraction into `"));

    let out = concov(&["dbnabstr", "show", bn_path.to_str().unwrap()]);
    assert!(out.status.success());
    let console = stdout(&out);
    assert!(console.contains(
        "===  Extracted Features and Associated Intervals  =============================="
    ));
    assert!(console.contains("Layer"));
    assert!(console.contains("activation"));
    assert!(console.contains("(-inf, "));

    // bfc with the l0 engine
    let outdir = dir.path().join("bfc");
    let out = concov(&[
        "test",
        "--dataset",
        &dataset,
        "--model",
        &model,
        "--outputs",
        outdir.to_str().unwrap(),
        "--criterion",
        "bfc",
        "--norm",
        "l0",
        "--bn-abstr",
        bn_path.to_str().unwrap(),
        "--init",
        "5",
        "--max-iterations",
        "8",
        "--rng-seed",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(outdir.join("BFC_L0_report.txt")).unwrap();
    assert!(text.contains("#0 BFC: "));
    assert!(
        text.contains("| Targeting interval ") || text.contains("Unable to find a new candidate input!"),
        "{text}"
    );

    // bfdc with the linf engine
    let outdir = dir.path().join("bfdc");
    let out = concov(&[
        "test",
        "--dataset",
        &dataset,
        "--model",
        &model,
        "--outputs",
        outdir.to_str().unwrap(),
        "--criterion",
        "bfdc",
        "--norm",
        "linf",
        "--bn-abstr",
        bn_path.to_str().unwrap(),
        "--init",
        "5",
        "--max-iterations",
        "5",
        "--rng-seed",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(outdir.join("BFdC_Linf_report.txt")).unwrap();
    assert!(text.contains("#0 BFdC: "));
}

#[test]
fn unsupported_pairs_and_ssc_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let run = |criterion: &str, norm: &str| {
        concov(&[
            "test",
            "--dataset",
            &dataset,
            "--model",
            &model,
            "--outputs",
            dir.path().join("x").to_str().unwrap(),
            "--criterion",
            criterion,
            "--norm",
            norm,
        ])
    };
    let out = run("ssc", "linf");
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(msg.contains("ssclp x linf"), "error must name the supported matrix: {msg}");
    assert_eq!(run("ssclp", "l0").status.code(), Some(2));
    assert_eq!(run("bfdc", "l0").status.code(), Some(2));
    assert_eq!(run("nope", "l0").status.code(), Some(2));
}

#[test]
fn missing_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dataset) = fixture(dir.path());
    let out = concov(&[
        "eval",
        "--dataset",
        &dataset,
        "--model",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn fuzz_run_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let run = |outdir: &Path| {
        let out = concov(&[
            "fuzz",
            "--dataset",
            &dataset,
            "--model",
            &model,
            "--outputs",
            outdir.to_str().unwrap(),
            "--sample",
            "5",
            "-N",
            "50",
            "--processes",
            "2",
            "--rng-seed",
            "42",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            stdout(&out),
            std::fs::read(outdir.join("new_inputs.csv")).unwrap(),
        )
    };
    let (console1, csv1) = run(&dir.path().join("f1"));
    let (_, csv2) = run(&dir.path().join("f2"));
    assert_eq!(csv1, csv2, "identical fuzz configs must write identical outputs");
    assert!(console1.starts_with("RNG seed: 42"));
    assert!(console1.contains("Terminating after 50 iterations: "));
    assert!(dir.path().join("f1").join("FUZZ_report.txt").exists());
    // 2 streams x 50 iterations, mutants capped at the L0 threshold: all accepted
    let rows = String::from_utf8(csv1).unwrap().lines().count() - 1;
    assert_eq!(rows, 100);
}

#[test]
fn eval_reports_full_accuracy_on_self_labelled_data() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = fixture(dir.path());
    let out = concov(&["eval", "--dataset", &dataset, "--model", &model]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("Accuracy on test data: 100.00%"));
}

#[test]
fn idx_dataset_loads_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    // 6x6 grayscale IDX fixture labelled by a conv model
    let model_path = dir.path().join("conv.json");
    let out = concov(&[
        "gen-model",
        "--spec",
        "conv:3x3x4,relu,flatten,dense:2,softmax",
        "--input-shape",
        "6x6x1",
        "--seed",
        "9",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let net = concov::model::load_model(&model_path).unwrap();

    let mut rng = concov::rng::Rng::new(4);
    let n = 40;
    let mut pixels: Vec<Vec<u8>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for _ in 0..n {
        let img: Vec<u8> = (0..36).map(|_| (rng.uniform() * 255.0) as u8).collect();
        let x = concov::Tensor::new(
            vec![6, 6, 1],
            img.iter().map(|&b| b as f64 / 255.0).collect(),
        )
        .unwrap();
        let (_, y) = net.forward(&x).unwrap();
        pixels.push(img);
        labels.push(y as u8);
    }
    let img_path = dir.path().join("images-idx3-ubyte");
    let lbl_path = dir.path().join("labels-idx1-ubyte");
    let mut img_bytes = Vec::new();
    img_bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    img_bytes.extend_from_slice(&6u32.to_be_bytes());
    img_bytes.extend_from_slice(&6u32.to_be_bytes());
    for img in &pixels {
        img_bytes.extend_from_slice(img);
    }
    std::fs::write(&img_path, img_bytes).unwrap();
    let mut lbl_bytes = Vec::new();
    lbl_bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    lbl_bytes.extend_from_slice(&labels);
    std::fs::write(&lbl_path, lbl_bytes).unwrap();

    let dataset = format!(
        "idx:{},{}",
        img_path.to_string_lossy(),
        lbl_path.to_string_lossy()
    );
    let outdir = dir.path().join("out");
    let out = concov(&[
        "test",
        "--dataset",
        &dataset,
        "--model",
        model_path.to_str().unwrap(),
        "--outputs",
        outdir.to_str().unwrap(),
        "--criterion",
        "nc",
        "--norm",
        "l0",
        "--max-iterations",
        "5",
        "--rng-seed",
        "1",
        "--save-all-tests",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(outdir.join("NC_L0_report.txt")).unwrap();
    assert!(report.contains("#0 NC: "));
    // generated tests of image datasets are saved as PGM files
    let has_pgm = std::fs::read_dir(&outdir)
        .unwrap()
        .any(|e| e.unwrap().path().extension().map(|x| x == "pgm").unwrap_or(false));
    let generated = std::fs::read_to_string(outdir.join("new_inputs.csv"))
        .unwrap()
        .lines()
        .count()
        > 1;
    assert!(!generated || has_pgm);
}
