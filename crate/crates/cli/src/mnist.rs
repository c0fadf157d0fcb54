//! Minimal reader for IDX-format MNIST files and the digit 1-vs-7 PU task.

use std::path::{Path, PathBuf};

use pu_kit::data::{GroundTruth, Label, LabeledSet, PuDataset, PuSamples, RandomSeed, Samples};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
/// Random stream used to pick digits, distinct from the library's streams.
const SELECT_STREAM: u64 = 0x4d4e_4953;

pub const POSITIVE_DIGIT: u8 = 1;
pub const NEGATIVE_DIGIT: u8 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels of image `i`, scaled to [0,1].
    pub fn image(&self, i: usize) -> Vec<f64> {
        let d = self.rows * self.cols;
        self.pixels[i * d..(i + 1) * d].iter().map(|&p| p as f64 / 255.0).collect()
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| CliError::Data("IDX header is truncated".into()))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(CliError::Data(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(CliError::Data(format!(
            "IDX image payload has {} bytes, header promises {}",
            body.len(),
            n * rows * cols
        )));
    }
    Ok(IdxImages { rows, cols, pixels: body.to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(CliError::Data(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(CliError::Data(format!("IDX label payload has {} bytes, header promises {n}", body.len())));
    }
    Ok(body.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Digit 1 (positive) versus digit 7 (negative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistSpec {
    /// Directory holding the four uncompressed IDX files.
    pub dir: PathBuf,
    #[serde(default = "default_count")]
    pub n_p: usize,
    #[serde(default = "default_count")]
    pub n_u: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_count() -> usize {
    3500
}

fn default_alpha() -> f64 {
    0.5
}

impl MnistSpec {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MnistSpec { dir: dir.into(), n_p: default_count(), n_u: default_count(), alpha: default_alpha() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CliError::config("mnist.alpha", "must lie in [0,1]"));
        }
        if self.n_p == 0 || self.n_u == 0 {
            return Err(CliError::config("mnist.n_p", "counts must be >= 1"));
        }
        Ok(())
    }

    /// True when all four files exist.
    pub fn available(&self) -> bool {
        [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS]
            .iter()
            .all(|f| self.dir.join(f).is_file())
    }

    /// Builds the PU training data from the training files and a labeled
    /// evaluation set from every 1 and 7 of the test files.
    pub fn load(&self, seed: RandomSeed) -> Result<(PuDataset, LabeledSet)> {
        let images = parse_idx_images(&read(&self.dir.join(TRAIN_IMAGES))?)?;
        let labels = parse_idx_labels(&read(&self.dir.join(TRAIN_LABELS))?)?;
        if images.len() != labels.len() {
            return Err(CliError::Data("training images and labels differ in count".into()));
        }
        let dim = images.rows * images.cols;
        let mut ones: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == POSITIVE_DIGIT).collect();
        let mut sevens: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == NEGATIVE_DIGIT).collect();
        let mut rng = seed.rng(SELECT_STREAM);
        ones.shuffle(&mut rng);
        sevens.shuffle(&mut rng);

        let k = (self.alpha * self.n_u as f64).round() as usize;
        if ones.len() < self.n_p + k || sevens.len() < self.n_u - k {
            return Err(CliError::Data(format!(
                "not enough digits: need {} ones and {} sevens, have {} and {}",
                self.n_p + k,
                self.n_u - k,
                ones.len(),
                sevens.len()
            )));
        }
        let mut positives = Samples::with_capacity(dim, self.n_p)?;
        for &i in &ones[..self.n_p] {
            positives.push(&images.image(i))?;
        }
        let mut pool: Vec<(usize, Label)> = ones[self.n_p..self.n_p + k]
            .iter()
            .map(|&i| (i, Label::Positive))
            .chain(sevens[..self.n_u - k].iter().map(|&i| (i, Label::Negative)))
            .collect();
        pool.shuffle(&mut rng);
        let mut unlabeled = Samples::with_capacity(dim, self.n_u)?;
        for &(i, _) in &pool {
            unlabeled.push(&images.image(i))?;
        }
        let truth = GroundTruth::new(pool.iter().map(|p| p.1).collect(), Some(self.alpha))?;
        let data = PuDataset::new(PuSamples::new(positives, unlabeled)?, Some(truth))?;

        let test_images = parse_idx_images(&read(&self.dir.join(TEST_IMAGES))?)?;
        let test_labels = parse_idx_labels(&read(&self.dir.join(TEST_LABELS))?)?;
        let mut eval = Samples::new(dim)?;
        let mut eval_labels = Vec::new();
        for (i, &d) in test_labels.iter().enumerate() {
            let label = match d {
                POSITIVE_DIGIT => Label::Positive,
                NEGATIVE_DIGIT => Label::Negative,
                _ => continue,
            };
            eval.push(&test_images.image(i))?;
            eval_labels.push(label);
        }
        Ok((data, LabeledSet::new(eval, eval_labels)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images_file(n: u32, rows: u32, cols: u32, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGES_MAGIC, n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend((0..(n * rows * cols) as usize).map(fill));
        b
    }

    fn labels_file(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn parses_images_and_labels() {
        let img = parse_idx_images(&images_file(3, 2, 2, |i| (i * 20) as u8)).unwrap();
        assert_eq!(img.len(), 3);
        assert_eq!(img.image(1), vec![80.0 / 255.0, 100.0 / 255.0, 120.0 / 255.0, 140.0 / 255.0]);
        assert_eq!(parse_idx_labels(&labels_file(&[1, 7, 3])).unwrap(), vec![1, 7, 3]);
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut bad = images_file(3, 2, 2, |_| 0);
        bad.pop();
        assert!(parse_idx_images(&bad).is_err());
        assert!(parse_idx_images(&labels_file(&[1])).is_err());
        assert!(parse_idx_labels(&[0, 0]).is_err());
    }

    #[test]
    fn builds_one_vs_seven_task() {
        let dir = tempfile::tempdir().unwrap();
        let train_labels: Vec<u8> = (0..40).map(|i| [1, 7, 3][i % 3]).collect();
        std::fs::write(dir.path().join(TRAIN_IMAGES), images_file(40, 2, 2, |i| (i % 256) as u8)).unwrap();
        std::fs::write(dir.path().join(TRAIN_LABELS), labels_file(&train_labels)).unwrap();
        std::fs::write(dir.path().join(TEST_IMAGES), images_file(6, 2, 2, |_| 9)).unwrap();
        std::fs::write(dir.path().join(TEST_LABELS), labels_file(&[1, 7, 2, 1, 0, 7])).unwrap();
        let spec = MnistSpec { dir: dir.path().to_path_buf(), n_p: 5, n_u: 8, alpha: 0.5 };
        assert!(spec.available());
        let (data, eval) = spec.load(RandomSeed(0)).unwrap();
        assert_eq!(data.samples().positives().len(), 5);
        assert_eq!(data.samples().unlabeled().len(), 8);
        assert_eq!(data.truth().unwrap().empirical_alpha(), 0.5);
        assert_eq!(eval.labels().len(), 4);

        let greedy = MnistSpec { n_p: 20, ..spec };
        assert!(greedy.load(RandomSeed(0)).is_err());
        assert!(!MnistSpec::new(dir.path().join("missing")).available());
    }
}
