//! Dataset ingestion: IDX image files, CSV feature tables, train/test
//! partitioning and normalization. Datasets are immutable after load.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use byteorder::{BigEndian, ReadBytesExt};
use std::io::Read;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Image,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    Div255,
    Minmax,
    None,
}

impl std::str::FromStr for Normalize {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "div255" => Ok(Normalize::Div255),
            "minmax" => Ok(Normalize::Minmax),
            "none" => Ok(Normalize::None),
            other => Err(Error::Input(format!(
                "unknown normalization `{other}` (expected div255, minmax or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub kind: DatasetKind,
    pub input_shape: Vec<usize>,
    pub n_features: usize,
    pub n_classes: usize,
    pub train_x: Vec<Tensor>,
    pub train_y: Vec<usize>,
    pub test_x: Vec<Tensor>,
    pub test_y: Vec<usize>,
    /// Recorded per-feature (min, max); input-box constraints for the search
    /// engines come from here.
    pub bounds: Vec<(f64, f64)>,
}

impl Dataset {
    fn validate(&self) -> Result<()> {
        for &y in self.train_y.iter().chain(&self.test_y) {
            if y >= self.n_classes {
                return Err(Error::Data(format!(
                    "label {y} outside [0, {})",
                    self.n_classes
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// IDX

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads an IDX image file; pixel bytes are scaled by 1/255 into [0, 1].
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<(Vec<Tensor>, Vec<usize>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cur = std::io::Cursor::new(&bytes);
    let trunc = || Error::Data(format!("{}: truncated IDX image file", path.display()));
    let magic = cur.read_u32::<BigEndian>().map_err(|_| trunc())?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad IDX image magic {magic:#010x} (expected {IDX_IMAGES_MAGIC:#010x})",
            path.display()
        )));
    }
    let n = cur.read_u32::<BigEndian>().map_err(|_| trunc())? as usize;
    let rows = cur.read_u32::<BigEndian>().map_err(|_| trunc())? as usize;
    let cols = cur.read_u32::<BigEndian>().map_err(|_| trunc())? as usize;
    let mut pixels = vec![0u8; n * rows * cols];
    cur.read_exact(&mut pixels).map_err(|_| trunc())?;
    let shape = vec![rows, cols, 1];
    let images = pixels
        .chunks(rows * cols)
        .map(|chunk| {
            Tensor::new(shape.clone(), chunk.iter().map(|&b| b as f64 / 255.0).collect())
                .expect("pixel data finite")
        })
        .collect();
    Ok((images, shape))
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cur = std::io::Cursor::new(&bytes);
    let trunc = || Error::Data(format!("{}: truncated IDX label file", path.display()));
    let magic = cur.read_u32::<BigEndian>().map_err(|_| trunc())?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad IDX label magic {magic:#010x} (expected {IDX_LABELS_MAGIC:#010x})",
            path.display()
        )));
    }
    let n = cur.read_u32::<BigEndian>().map_err(|_| trunc())? as usize;
    let mut labels = vec![0u8; n];
    cur.read_exact(&mut labels).map_err(|_| trunc())?;
    Ok(labels.iter().map(|&b| b as usize).collect())
}

/// Pairs an IDX image file with its label file, checking counts.
pub fn load_idx_pair(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<(Vec<Tensor>, Vec<usize>, Vec<usize>)> {
    let (x, shape) = load_idx_images(&images)?;
    let y = load_idx_labels(&labels)?;
    if x.len() != y.len() {
        return Err(Error::Data(format!(
            "IDX image/label count mismatch: {} images vs {} labels",
            x.len(),
            y.len()
        )));
    }
    Ok((x, y, shape))
}

// ---------------------------------------------------------------------------
// CSV

/// Raw CSV table before splitting: feature rows plus label strings.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub n_features: usize,
}

/// Loads a CSV feature table. A header row is required; the label column is
/// selected by name.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<CsvTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::Data(format!(
                "{}: label column `{label_column}` not found in header",
                path.display()
            ))
        })?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(field.to_string());
            } else {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!(
                        "{}: row {}: non-numeric feature value `{field}` in column `{}`",
                        path.display(),
                        row_no + 2,
                        headers.get(col).unwrap_or("?")
                    ))
                })?;
                row.push(v);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let n_features = features[0].len();
    Ok(CsvTable {
        features,
        labels,
        n_features,
    })
}

/// Integer labels map by value; anything else is treated as categorical with
/// classes indexed by the sorted unique training labels.
fn map_labels(train: &[String], test: &[String]) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let as_int = |s: &String| s.trim().parse::<usize>().ok();
    if train.iter().chain(test).all(|s| as_int(s).is_some()) {
        let train_y: Vec<usize> = train.iter().map(|s| as_int(s).unwrap()).collect();
        let test_y: Vec<usize> = test.iter().map(|s| as_int(s).unwrap()).collect();
        let n_classes = train_y.iter().chain(&test_y).max().map(|m| m + 1).unwrap_or(0);
        return Ok((train_y, test_y, n_classes));
    }
    let mut classes: Vec<&String> = train.iter().collect();
    classes.sort();
    classes.dedup();
    let index = |s: &String| classes.binary_search(&s).ok();
    let train_y: Vec<usize> = train.iter().map(|s| index(s).unwrap()).collect();
    let mut test_y = Vec::with_capacity(test.len());
    for s in test {
        match index(s) {
            Some(i) => test_y.push(i),
            None => {
                return Err(Error::Data(format!(
                    "label `{s}` appears in the test split but not in training data"
                )))
            }
        }
    }
    Ok((train_y, test_y, classes.len()))
}

/// Deterministic shuffle-split: test gets ceil(n * fraction) rows.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Input(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut idx);
    let n_test = (n as f64 * test_fraction).ceil() as usize;
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    Ok((train, test))
}

/// Builds a tabular dataset from pre-split feature tables.
pub fn tabular_dataset(
    name: &str,
    train: CsvTable,
    test: CsvTable,
    normalize: Normalize,
) -> Result<Dataset> {
    if train.n_features != test.n_features {
        return Err(Error::Data(format!(
            "train/test feature count mismatch: {} vs {}",
            train.n_features, test.n_features
        )));
    }
    let n = train.n_features;
    let (train_y, test_y, n_classes) = map_labels(&train.labels, &test.labels)?;

    // Recorded bounds come from the training features, before normalization.
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in &train.features {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }

    let apply = |rows: &[Vec<f64>]| -> Result<Vec<Tensor>> {
        rows.iter()
            .map(|row| {
                let data: Vec<f64> = match normalize {
                    Normalize::None => row.clone(),
                    Normalize::Div255 => row.iter().map(|v| v / 255.0).collect(),
                    Normalize::Minmax => row
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| {
                            if hi[j] > lo[j] {
                                (v - lo[j]) / (hi[j] - lo[j])
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                };
                Tensor::new(vec![n], data)
            })
            .collect()
    };
    let train_x = apply(&train.features)?;
    let test_x = apply(&test.features)?;

    let bounds: Vec<(f64, f64)> = match normalize {
        Normalize::None => lo.iter().zip(&hi).map(|(&a, &b)| (a, b)).collect(),
        Normalize::Div255 => lo.iter().zip(&hi).map(|(&a, &b)| (a / 255.0, b / 255.0)).collect(),
        Normalize::Minmax => vec![(0.0, 1.0); n],
    };

    let ds = Dataset {
        name: name.into(),
        kind: DatasetKind::Tabular,
        input_shape: vec![n],
        n_features: n,
        n_classes,
        train_x,
        train_y,
        test_x,
        test_y,
        bounds,
    };
    ds.validate()?;
    Ok(ds)
}

fn image_dataset(
    name: &str,
    train_x: Vec<Tensor>,
    train_y: Vec<usize>,
    test_x: Vec<Tensor>,
    test_y: Vec<usize>,
    shape: Vec<usize>,
) -> Result<Dataset> {
    let n_features = shape.iter().product();
    let n_classes = train_y
        .iter()
        .chain(&test_y)
        .copied()
        .max()
        .map(|m| m + 1)
        .unwrap_or(0);
    let ds = Dataset {
        name: name.into(),
        kind: DatasetKind::Image,
        input_shape: shape,
        n_features,
        n_classes,
        train_x,
        train_y,
        test_x,
        test_y,
        bounds: vec![(0.0, 1.0); n_features],
    };
    ds.validate()?;
    Ok(ds)
}

// ---------------------------------------------------------------------------
// CLI dataset specs

/// Loads a dataset from a CLI spec:
///
/// * `idx:IMAGES,LABELS` — one IDX pair, shuffle-split 80/20 with `seed`;
/// * `idx:TRAIN_IMAGES,TRAIN_LABELS,TEST_IMAGES,TEST_LABELS` — pre-split;
/// * `csv:PATH` — one CSV table, shuffle-split 80/20;
/// * `csv:TRAIN,TEST` — pre-split CSV tables;
/// * a directory containing the conventional IDX file names
///   (`train-images-idx3-ubyte`, ..., `t10k-images-idx3-ubyte`, ...).
///
/// IDX pixels are always scaled by 1/255; `normalize` applies to CSV tables.
pub fn load_dataset(
    spec: &str,
    normalize: Normalize,
    label_column: &str,
    seed: u64,
) -> Result<Dataset> {
    const DEFAULT_TEST_FRACTION: f64 = 0.2;
    if let Some(rest) = spec.strip_prefix("idx:") {
        let paths: Vec<&str> = rest.split(',').collect();
        match paths.as_slice() {
            [images, labels] => {
                let (x, y, shape) = load_idx_pair(images, labels)?;
                let (tr, te) = split_indices(x.len(), DEFAULT_TEST_FRACTION, seed)?;
                let pick_x = |idx: &[usize]| idx.iter().map(|&i| x[i].clone()).collect();
                let pick_y = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect();
                image_dataset(spec, pick_x(&tr), pick_y(&tr), pick_x(&te), pick_y(&te), shape)
            }
            [ti, tl, vi, vl] => {
                let (train_x, train_y, shape) = load_idx_pair(ti, tl)?;
                let (test_x, test_y, shape2) = load_idx_pair(vi, vl)?;
                if shape != shape2 {
                    return Err(Error::Data(format!(
                        "train/test image shapes differ: {shape:?} vs {shape2:?}"
                    )));
                }
                image_dataset(spec, train_x, train_y, test_x, test_y, shape)
            }
            _ => Err(Error::Input(format!(
                "idx spec needs 2 or 4 comma-separated paths: `{spec}`"
            ))),
        }
    } else if let Some(rest) = spec.strip_prefix("csv:") {
        let paths: Vec<&str> = rest.split(',').collect();
        match paths.as_slice() {
            [path] => {
                let table = load_csv(path, label_column)?;
                let (tr, te) = split_indices(table.features.len(), DEFAULT_TEST_FRACTION, seed)?;
                let pick = |idx: &[usize]| CsvTable {
                    features: idx.iter().map(|&i| table.features[i].clone()).collect(),
                    labels: idx.iter().map(|&i| table.labels[i].clone()).collect(),
                    n_features: table.n_features,
                };
                tabular_dataset(spec, pick(&tr), pick(&te), normalize)
            }
            [train, test] => {
                let train = load_csv(train, label_column)?;
                let test = load_csv(test, label_column)?;
                tabular_dataset(spec, train, test, normalize)
            }
            _ => Err(Error::Input(format!(
                "csv spec needs 1 or 2 comma-separated paths: `{spec}`"
            ))),
        }
    } else {
        let dir = Path::new(spec);
        if dir.is_dir() {
            let (train_x, train_y, shape) = load_idx_pair(
                dir.join("train-images-idx3-ubyte"),
                dir.join("train-labels-idx1-ubyte"),
            )?;
            let (test_x, test_y, _) = load_idx_pair(
                dir.join("t10k-images-idx3-ubyte"),
                dir.join("t10k-labels-idx1-ubyte"),
            )?;
            image_dataset(spec, train_x, train_y, test_x, test_y, shape)
        } else {
            Err(Error::Input(format!(
                "unknown dataset `{spec}` (use csv:PATH, idx:IMAGES,LABELS or an IDX directory)"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use byteorder::{BigEndian, WriteBytesExt};
    use std::io::Write;

    pub(crate) fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) {
        let mut f = std::fs::File::create(path).unwrap();
        f.write_u32::<BigEndian>(IDX_IMAGES_MAGIC).unwrap();
        f.write_u32::<BigEndian>(images.len() as u32).unwrap();
        f.write_u32::<BigEndian>(rows as u32).unwrap();
        f.write_u32::<BigEndian>(cols as u32).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
    }

    pub(crate) fn write_idx_labels(path: &Path, labels: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        f.write_u32::<BigEndian>(IDX_LABELS_MAGIC).unwrap();
        f.write_u32::<BigEndian>(labels.len() as u32).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn idx_scaling_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("imgs");
        let lbl_path = dir.path().join("lbls");
        write_idx_images(&img_path, &[vec![0, 255, 0, 255], vec![255, 0, 255, 0]], 2, 2);
        write_idx_labels(&lbl_path, &[0, 1]);
        let (x, y, shape) = load_idx_pair(&img_path, &lbl_path).unwrap();
        assert_eq!(shape, vec![2, 2, 1]);
        assert_eq!(y, vec![0, 1]);
        assert_eq!(x[0].data(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(x[1].data(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn idx_count_mismatch_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("imgs");
        let lbl_path = dir.path().join("lbls");
        write_idx_images(&img_path, &[vec![0, 0, 0, 0]], 2, 2);
        write_idx_labels(&lbl_path, &[0, 1, 2]);
        let err = load_idx_pair(&img_path, &lbl_path).unwrap_err().to_string();
        assert!(err.contains("mismatch"), "{err}");
    }

    #[test]
    fn idx_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        std::fs::write(&path, [0u8, 0, 8, 4, 0, 0]).unwrap();
        assert!(load_idx_images(&path).is_err());
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_u32::<BigEndian>(IDX_IMAGES_MAGIC).unwrap();
        f.write_u32::<BigEndian>(5).unwrap();
        f.write_u32::<BigEndian>(2).unwrap();
        f.write_u32::<BigEndian>(2).unwrap();
        drop(f);
        let err = load_idx_images(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn csv_minmax_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, "f0,class\n0,a\n1,a\n2,b\n3,b\n").unwrap();
        let table = load_csv(&path, "class").unwrap();
        let ds = tabular_dataset("toy", table.clone(), table, Normalize::Minmax).unwrap();
        let mut seen: Vec<f64> = ds.train_x.iter().map(|t| t.data()[0]).collect();
        seen.sort_by(f64::total_cmp);
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (s, e) in seen.iter().zip(expect) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
        assert_eq!(ds.bounds, vec![(0.0, 1.0)]);
    }

    #[test]
    fn csv_unseen_test_label_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.csv");
        let test = dir.path().join("test.csv");
        std::fs::write(&train, "f0,class\n0.5,a\n0.25,b\n").unwrap();
        std::fs::write(&test, "f0,class\n0.75,c\n").unwrap();
        let err = tabular_dataset(
            "t",
            load_csv(&train, "class").unwrap(),
            load_csv(&test, "class").unwrap(),
            Normalize::None,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("`c`"), "{err}");
    }

    #[test]
    fn csv_non_numeric_feature_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "f0,f1,class\n1.0,x,a\n").unwrap();
        let err = load_csv(&path, "class").unwrap_err().to_string();
        assert!(err.contains("non-numeric"), "{err}");
    }

    #[test]
    fn dataset_scale_counts_and_classes() {
        // loader behavior at training-set scale: 60000 examples, 10 classes
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("imgs");
        let lbl_path = dir.path().join("lbls");
        let n = 60_000;
        let images: Vec<Vec<u8>> = (0..n).map(|i| vec![(i % 251) as u8; 16]).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        write_idx_images(&img_path, &images, 4, 4);
        write_idx_labels(&lbl_path, &labels);
        let (x, y, shape) = load_idx_pair(&img_path, &lbl_path).unwrap();
        assert_eq!(x.len(), 60_000);
        assert_eq!(shape, vec![4, 4, 1]);
        let classes: std::collections::BTreeSet<usize> = y.into_iter().collect();
        assert_eq!(classes.len(), 10);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split_indices(10, 0.3, 5).unwrap();
        assert_eq!(te.len(), 3);
        assert_eq!(tr.len(), 7);
        let (tr2, te2) = split_indices(10, 0.3, 5).unwrap();
        assert_eq!((tr, te), (tr2, te2));
        let (_, te3) = split_indices(1000, 0.3, 6).unwrap();
        let (_, te4) = split_indices(1000, 0.3, 7).unwrap();
        assert_ne!(te3, te4);
        assert!(split_indices(10, 0.0, 1).is_err());
        assert!(split_indices(10, 1.0, 1).is_err());
    }
}
