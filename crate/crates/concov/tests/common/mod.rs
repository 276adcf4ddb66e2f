//! Shared fixtures: deterministic models and self-consistent datasets whose
//! labels are the model's own predictions (so seed selection always finds
//! correctly classified inputs).

use concov::data::{Dataset, DatasetKind};
use concov::model::{generate_model, Network};
use concov::rng::Rng;
use concov::Tensor;
use std::path::Path;

pub fn small_net(seed: u64) -> Network {
    generate_model("dense:8,relu,dense:6,relu,dense:3,softmax", &[2], seed).unwrap()
}

/// Dataset over the unit square labelled by the network itself.
pub fn self_labelled_dataset(net: &Network, n_train: usize, n_test: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut make = |n: usize| {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = Tensor::from_vec(vec![rng.uniform(), rng.uniform()]).unwrap();
            let (_, y) = net.forward(&x).unwrap();
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    };
    let (train_x, train_y) = make(n_train);
    let (test_x, test_y) = make(n_test);
    Dataset {
        name: "fixture".into(),
        kind: DatasetKind::Tabular,
        input_shape: vec![2],
        n_features: 2,
        n_classes: net.n_classes(),
        train_x,
        train_y,
        test_x,
        test_y,
        bounds: vec![(0.0, 1.0); 2],
    }
}

/// Writes train/test CSV files labelled by the network; returns their paths.
pub fn write_csv_dataset(
    dir: &Path,
    net: &Network,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> (String, String) {
    let ds = self_labelled_dataset(net, n_train, n_test, seed);
    let dump = |xs: &[Tensor], ys: &[usize], path: &Path| {
        let mut s = String::from("f0,f1,class\n");
        for (x, y) in xs.iter().zip(ys) {
            s.push_str(&format!("{},{},{y}\n", x.data()[0], x.data()[1]));
        }
        std::fs::write(path, s).unwrap();
    };
    let train = dir.join("train.csv");
    let test = dir.join("test.csv");
    dump(&ds.train_x, &ds.train_y, &train);
    dump(&ds.test_x, &ds.test_y, &test);
    (
        train.to_string_lossy().into_owned(),
        test.to_string_lossy().into_owned(),
    )
}
