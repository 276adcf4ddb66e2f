//! Run outputs: the iteration report, `new_inputs.csv` with one row per
//! generated test, and P5 PGM dumps of saved image tests.

use super::suite::TestSuite;
use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes a grayscale tensor as a binary PGM (P5, maxval 255); pixel values
/// are `round(255 * v)` clamped to the byte range.
pub fn write_pgm(path: impl AsRef<Path>, image: &Tensor) -> Result<()> {
    let shape = image.shape();
    if shape.len() != 3 || shape[2] != 1 {
        return Err(Error::Input(format!(
            "PGM output needs a single-channel image, got shape {shape:?}"
        )));
    }
    let (h, w) = (shape[0], shape[1]);
    let mut buf = Vec::with_capacity(32 + h * w);
    write!(buf, "P5\n{w} {h}\n255\n").expect("in-memory write");
    for &v in image.data() {
        buf.push((255.0 * v).round().clamp(0.0, 255.0) as u8);
    }
    std::fs::write(path.as_ref(), buf).map_err(|e| Error::io(path.as_ref().display().to_string(), e))
}

/// Reads a binary PGM back into a [h, w, 1] tensor with values in [0, 1].
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Tensor> {
    let bytes =
        std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref().display().to_string(), e))?;
    let err = |msg: &str| Error::Data(format!("{}: {msg}", path.as_ref().display()));
    let header_end = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .map(|(i, _)| i)
        .nth(2)
        .ok_or_else(|| err("truncated PGM header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| err("bad PGM header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("P5") {
        return Err(err("not a P5 PGM"));
    }
    let w: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err("bad width"))?;
    let h: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err("bad height"))?;
    if parts.next() != Some("255") {
        return Err(err("unsupported maxval"));
    }
    let data = &bytes[header_end + 1..];
    if data.len() != w * h {
        return Err(err("pixel payload size mismatch"));
    }
    Tensor::new(vec![h, w, 1], data.iter().map(|&b| b as f64 / 255.0).collect())
}

/// Persists the run results into `outdir`: the report file, the CSV of
/// generated tests, and (for single-channel image data) one PGM per saved
/// test, `test_<id>.pgm` plus `adv_<id>.pgm` for adversarials. Without
/// `save_all` only adversarial tests get images.
pub fn persist(
    outdir: &Path,
    report_name: &str,
    report_lines: &[String],
    suite: &TestSuite,
    kind: DatasetKind,
    save_all: bool,
) -> Result<PathBuf> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir.display().to_string(), e))?;
    let report_path = outdir.join(report_name);
    let mut report = String::new();
    for line in report_lines {
        report.push_str(line);
        report.push('\n');
    }
    std::fs::write(&report_path, report).map_err(|e| Error::io(report_path.display().to_string(), e))?;

    let csv_path = outdir.join("new_inputs.csv");
    let mut csv = String::from("id,parent,label,distance,adversarial");
    let n_features = suite.entries.first().map(|e| e.input.len()).unwrap_or(0);
    for i in 0..n_features {
        csv.push_str(&format!(",x{i}"));
    }
    csv.push('\n');
    for (id, entry) in suite.generated() {
        csv.push_str(&format!(
            "{id},{},{},{},{}",
            entry.parent.expect("generated entries have parents"),
            entry.label,
            entry.distance,
            entry.adversarial
        ));
        for v in entry.input.data() {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    let is_grayscale = kind == DatasetKind::Image
        && suite
            .entries
            .first()
            .map(|e| e.input.shape().len() == 3 && e.input.shape()[2] == 1)
            .unwrap_or(false);
    if is_grayscale {
        for (id, entry) in suite.generated() {
            if entry.adversarial {
                write_pgm(outdir.join(format!("adv_{id}.pgm")), &entry.input)?;
            }
            if save_all {
                write_pgm(outdir.join(format!("test_{id}.pgm")), &entry.input)?;
            }
        }
    }
    Ok(report_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::suite::TestEntry;
    use crate::rng::Rng;

    #[test]
    fn pgm_roundtrip_reproduces_quantized_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let mut rng = Rng::new(33);
        let img = Tensor::new(vec![4, 3, 1], (0..12).map(|_| rng.uniform()).collect()).unwrap();
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            let quantized = (255.0 * a).round() / 255.0;
            assert!((quantized - b).abs() < 1e-12);
        }
    }

    #[test]
    fn persist_writes_report_csv_and_adversarial_images() {
        let dir = tempfile::tempdir().unwrap();
        let mut suite = TestSuite::default();
        let img = |v: f64| Tensor::new(vec![2, 2, 1], vec![v; 4]).unwrap();
        suite.push(TestEntry {
            input: img(0.1),
            label: 0,
            parent: None,
            distance: 0.0,
            adversarial: false,
            target_desc: String::new(),
        });
        suite.push(TestEntry {
            input: img(0.2),
            label: 1,
            parent: Some(0),
            distance: 0.1,
            adversarial: true,
            target_desc: "t".into(),
        });
        suite.push(TestEntry {
            input: img(0.15),
            label: 0,
            parent: Some(0),
            distance: 0.05,
            adversarial: false,
            target_desc: "t".into(),
        });
        let lines = vec!["header".to_string(), "done".to_string()];
        let path = persist(dir.path(), "NC_L0_report.txt", &lines, &suite, DatasetKind::Image, false)
            .unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), "header\ndone\n");
        let csv = std::fs::read_to_string(dir.path().join("new_inputs.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        // header + one row per generated test
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("id,parent,label,distance,adversarial,x0"));
        assert!(rows[1].starts_with("1,0,1,0.1,true"));
        // save_all=false: only the adversarial image is written
        assert!(dir.path().join("adv_1.pgm").exists());
        assert!(!dir.path().join("test_1.pgm").exists());
        assert!(!dir.path().join("test_2.pgm").exists());
    }
}
