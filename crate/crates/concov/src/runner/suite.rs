//! The evolving test suite: seed inputs drawn from the dataset's test split
//! plus vetted generated inputs with parent links and generation metadata.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ActivationTrace, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TestEntry {
    pub input: Tensor,
    pub label: usize,
    /// Suite index this test was derived from; None for seeds. Parents
    /// always precede children, so links are acyclic.
    pub parent: Option<usize>,
    pub distance: f64,
    pub adversarial: bool,
    pub target_desc: String,
}

#[derive(Debug, Default)]
pub struct TestSuite {
    pub entries: Vec<TestEntry>,
}

impl TestSuite {
    /// Draws exactly `size` correctly classified inputs from the test split,
    /// without replacement, deterministically under the given PRNG.
    pub fn init(dataset: &Dataset, net: &Network, size: usize, rng: &mut Rng) -> Result<TestSuite> {
        if size == 0 {
            return Err(Error::Input("initial suite size must be at least 1".into()));
        }
        let n = dataset.test_x.len();
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let mut entries = Vec::with_capacity(size);
        for &i in &order {
            let x = &dataset.test_x[i];
            let (_, label) = net.forward(x)?;
            if label == dataset.test_y[i] {
                entries.push(TestEntry {
                    input: x.clone(),
                    label,
                    parent: None,
                    distance: 0.0,
                    adversarial: false,
                    target_desc: String::new(),
                });
                if entries.len() == size {
                    return Ok(TestSuite { entries });
                }
            }
        }
        Err(Error::Data(format!(
            "only {} of the requested {size} test inputs are correctly classified",
            entries.len()
        )))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: TestEntry) -> usize {
        self.entries.push(entry);
        self.entries.len() - 1
    }

    /// Generated (non-seed) entries with their suite ids.
    pub fn generated(&self) -> impl Iterator<Item = (usize, &TestEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.parent.is_some())
    }
}

/// Traces for every suite entry, kept in step with the suite.
pub fn suite_traces(net: &Network, suite: &TestSuite) -> Result<Vec<ActivationTrace>> {
    crate::model::batch_forward_traces(
        net,
        &suite.entries.iter().map(|e| e.input.clone()).collect::<Vec<_>>(),
    )
}
