//! CIFAR-10 binary batches: 3073-byte records, one label byte followed by
//! 3072 channel-major pixel bytes (1024 red, 1024 green, 1024 blue).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassTag, Dataset, SampleId, SampleRecord, Split, Target, TEST_ID_BASE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RECORD_BYTES: usize = 3073;
pub const PIXELS: usize = 3072;
pub const NUM_CLASSES: usize = 10;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// Per-channel mean and standard deviation of `[0, 1]`-scaled training pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub struct Cifar10 {
    pub train: Dataset,
    pub test: Dataset,
    pub normalization: ChannelNorm,
}

struct RawRecord {
    label: u8,
    pixels: Vec<u8>,
}

fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % RECORD_BYTES != 0 {
        let k = bytes.len().div_ceil(RECORD_BYTES).max(1);
        return Err(Error::CorruptFileSize {
            path: path.to_path_buf(),
            expected: format!("a positive multiple of {RECORD_BYTES} (e.g. {})", k * RECORD_BYTES),
            actual: bytes.len() as u64,
        });
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            if rec[0] as usize >= NUM_CLASSES {
                return Err(Error::CorruptRecord {
                    path: path.to_path_buf(),
                    offset: (i * RECORD_BYTES) as u64,
                    reason: format!("label byte {} > 9", rec[0]),
                });
            }
            Ok(RawRecord {
                label: rec[0],
                pixels: rec[1..].to_vec(),
            })
        })
        .collect()
}

fn to_dataset(
    records: &[RawRecord],
    id_base: u64,
    split: Split,
    norm: Option<&ChannelNorm>,
) -> Result<Dataset> {
    let samples = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut px: Vec<f64> = r.pixels.iter().map(|&b| b as f64 / 255.0).collect();
            if let Some(n) = norm {
                for (c, chunk) in px.chunks_mut(1024).enumerate() {
                    for v in chunk {
                        *v = (*v - n.mean[c]) / n.std[c];
                    }
                }
            }
            Ok(SampleRecord {
                id: SampleId(id_base + i as u64),
                features: Tensor::new(vec![3, 32, 32], px)?,
                target: Target::Class(r.label as usize),
                class_tag: ClassTag::Class(r.label as usize),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, NUM_CLASSES, split)
}

/// Load one batch file with pixels scaled to `[0, 1]` and no normalisation.
pub fn read_batch_file(path: &Path, split: Split, id_base: u64) -> Result<Dataset> {
    to_dataset(&read_records(path)?, id_base, split, None)
}

fn channel_stats(records: &[RawRecord]) -> ChannelNorm {
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for r in records {
        for (c, chunk) in r.pixels.chunks(1024).enumerate() {
            for &b in chunk {
                let v = b as f64 / 255.0;
                sum[c] += v;
                sq[c] += v * v;
            }
        }
    }
    let n = (records.len() * 1024) as f64;
    let mut norm = ChannelNorm {
        mean: [0.0; 3],
        std: [1.0; 3],
    };
    for c in 0..3 {
        let mean = sum[c] / n;
        let var = (sq[c] / n - mean * mean).max(0.0);
        norm.mean[c] = mean;
        // a constant channel is only centred
        norm.std[c] = if var > 1e-12 { var.sqrt() } else { 1.0 };
    }
    norm
}

/// Load the five training batches and the test batch from `dir`.
///
/// Channel statistics come from the training split and are applied to both.
pub fn load_cifar10(dir: &Path) -> Result<Cifar10> {
    let mut train_raw = Vec::new();
    for f in TRAIN_FILES {
        train_raw.extend(read_records(&dir.join(f))?);
    }
    let test_raw = read_records(&dir.join(TEST_FILE))?;
    let normalization = channel_stats(&train_raw);
    Ok(Cifar10 {
        train: to_dataset(&train_raw, 0, Split::Train, Some(&normalization))?,
        test: to_dataset(&test_raw, TEST_ID_BASE, Split::Test, Some(&normalization))?,
        normalization,
    })
}

pub fn batch_paths(dir: &Path) -> Vec<PathBuf> {
    TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .map(|f| dir.join(f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend(std::iter::repeat_n(fill, PIXELS));
        r
    }

    #[test]
    fn single_record_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.bin");
        fs::write(&p, record(3, 255)).unwrap();
        let d = read_batch_file(&p, Split::Train, 0).unwrap();
        assert_eq!(d.len(), 1);
        let s = &d.samples()[0];
        assert_eq!(s.class_tag, ClassTag::Class(3));
        assert_eq!(s.features.shape(), &[3, 32, 32]);
        assert!(s.features.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn truncated_file_reports_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        let mut bytes = record(1, 0);
        bytes.extend(record(2, 0));
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        let err = read_batch_file(&p, Split::Train, 0).unwrap_err();
        match &err {
            Error::CorruptFileSize { actual, .. } => assert_eq!(*actual, 2 * 3073 - 1),
            other => panic!("unexpected {other}"),
        }
        assert!(err.to_string().contains("6146"), "{err}");
    }

    #[test]
    fn bad_label_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        let mut bytes = record(1, 0);
        bytes.extend(record(10, 0));
        fs::write(&p, &bytes).unwrap();
        match read_batch_file(&p, Split::Train, 0).unwrap_err() {
            Error::CorruptRecord { offset, .. } => assert_eq!(offset, 3073),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn full_load_normalises_with_train_stats() {
        let dir = tempfile::tempdir().unwrap();
        for (i, p) in batch_paths(dir.path()).iter().enumerate() {
            let mut bytes = Vec::new();
            for k in 0..4u8 {
                bytes.extend(record((i as u8 + k) % 10, k * 60));
            }
            fs::write(p, bytes).unwrap();
        }
        let c = load_cifar10(dir.path()).unwrap();
        assert_eq!(c.train.len(), 20);
        assert_eq!(c.test.len(), 4);
        assert_eq!(c.train.num_classes(), 10);
        let mean: f64 = c.train.samples().iter().map(|s| s.features.data()[0]).sum::<f64>() / 20.0;
        assert!(mean.abs() < 1e-12);
        assert!(c.test.ids().iter().all(|id| id.0 >= TEST_ID_BASE));
        // repeated loads are identical
        let again = load_cifar10(dir.path()).unwrap();
        assert_eq!(c.train.fingerprint(), again.train.fingerprint());
    }
}
