//! Datasets with stable sample ids.
//!
//! Every [`SampleRecord`] carries an id assigned once at construction. Subset
//! selection, validation carving and the importance ledger all refer to samples
//! by id only, never by position.

pub mod cache;
pub mod cifar;
pub mod density;
pub mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loss::{LossKind, Targets};
use crate::tensor::Tensor;

pub use cifar::{load_cifar10, read_batch_file, Cifar10, ChannelNorm};
pub use density::{density_map, DotMap};
pub use synth::{synth_classification, synth_counting, SynthClassification, SynthCounting};

/// Test splits draw ids from a disjoint range so train/test ids never collide.
pub const TEST_ID_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u64);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Stratum used by per-class selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassTag {
    Class(usize),
    Unstratified,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Class(usize),
    Density(Tensor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub id: SampleId,
    pub features: Tensor,
    pub target: Target,
    pub class_tag: ClassTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Ids plus strata, the only view selection needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Population {
    members: Vec<(SampleId, ClassTag)>,
}

impl Population {
    pub fn new(mut members: Vec<(SampleId, ClassTag)>) -> Result<Self> {
        members.sort_by_key(|m| m.0);
        if members.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate sample id in population"));
        }
        Ok(Population { members })
    }

    /// Every member in its own class-free stratum.
    pub fn unstratified(ids: impl IntoIterator<Item = SampleId>) -> Result<Self> {
        Self::new(ids.into_iter().map(|id| (id, ClassTag::Unstratified)).collect())
    }

    pub fn members(&self) -> &[(SampleId, ClassTag)] {
        &self.members
    }

    pub fn ids(&self) -> impl Iterator<Item = SampleId> + '_ {
        self.members.iter().map(|m| m.0)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members grouped by stratum, each group in ascending id order.
    pub fn strata(&self) -> BTreeMap<ClassTag, Vec<SampleId>> {
        let mut out: BTreeMap<ClassTag, Vec<SampleId>> = BTreeMap::new();
        for &(id, tag) in &self.members {
            out.entry(tag).or_default().push(id);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    samples: Vec<SampleRecord>,
    num_classes: usize,
    split: Split,
    index: HashMap<SampleId, usize>,
}

impl Dataset {
    pub fn new(samples: Vec<SampleRecord>, num_classes: usize, split: Split) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.id, i).is_some() {
                return Err(Error::invalid(format!("duplicate sample id {}", s.id)));
            }
            if s.features.shape() != samples[0].features.shape() {
                return Err(Error::ShapeMismatch {
                    context: "dataset features",
                    expected: samples[0].features.shape().to_vec(),
                    actual: s.features.shape().to_vec(),
                });
            }
            match (&s.target, s.class_tag) {
                (Target::Class(c), ClassTag::Class(t)) if *c == t && t < num_classes => {}
                (Target::Density(_), ClassTag::Unstratified) => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "sample {} has inconsistent target/class tag for {num_classes} classes",
                        s.id
                    )))
                }
            }
        }
        Ok(Dataset {
            samples,
            num_classes,
            split,
            index,
        })
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn feature_shape(&self) -> &[usize] {
        self.samples
            .first()
            .map(|s| s.features.shape())
            .unwrap_or(&[])
    }

    pub fn loss_kind(&self) -> LossKind {
        match self.samples.first().map(|s| &s.target) {
            Some(Target::Density(_)) => LossKind::PixelwiseL2,
            _ => LossKind::CrossEntropy,
        }
    }

    pub fn ids(&self) -> Vec<SampleId> {
        self.samples.iter().map(|s| s.id).collect()
    }

    pub fn contains(&self, id: SampleId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: SampleId) -> Option<&SampleRecord> {
        self.index.get(&id).map(|&i| &self.samples[i])
    }

    pub fn population(&self) -> Population {
        Population::new(self.samples.iter().map(|s| (s.id, s.class_tag)).collect())
            .expect("dataset ids are unique")
    }

    pub fn class_sizes(&self) -> BTreeMap<ClassTag, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.class_tag).or_insert(0) += 1;
        }
        out
    }

    /// Stack the features and targets of `ids`, in the given order.
    pub fn gather(&self, ids: &[SampleId]) -> Result<(Tensor, Targets)> {
        let records = ids
            .iter()
            .map(|id| self.get(*id).ok_or(Error::UnknownSample(*id)))
            .collect::<Result<Vec<_>>>()?;
        let feats: Vec<&Tensor> = records.iter().map(|r| &r.features).collect();
        let batch = Tensor::stack(&feats)?;
        let targets = match self.loss_kind() {
            LossKind::CrossEntropy => Targets::Classes(
                records
                    .iter()
                    .map(|r| match r.target {
                        Target::Class(c) => c,
                        Target::Density(_) => unreachable!("mixed targets rejected at construction"),
                    })
                    .collect(),
            ),
            LossKind::PixelwiseL2 => {
                let maps: Vec<&Tensor> = records
                    .iter()
                    .map(|r| match &r.target {
                        Target::Density(t) => t,
                        Target::Class(_) => unreachable!("mixed targets rejected at construction"),
                    })
                    .collect();
                Targets::Maps(Tensor::stack(&maps)?)
            }
        };
        Ok((batch, targets))
    }

    /// Move a seeded `fraction` of every stratum into a new dataset tagged `split`.
    ///
    /// Ids are preserved; both halves keep the original sample order.
    pub fn carve(self, fraction: f64, seed: u64, split: Split) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid(format!("carve fraction {fraction} not in [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = std::collections::HashSet::new();
        for (_, mut ids) in self.population().strata() {
            ids.shuffle(&mut rng);
            let k = (fraction * ids.len() as f64).round() as usize;
            chosen.extend(ids.into_iter().take(k));
        }
        let (carved, kept): (Vec<_>, Vec<_>) =
            self.samples.into_iter().partition(|s| chosen.contains(&s.id));
        Ok((
            Dataset::new(kept, self.num_classes, self.split)?,
            Dataset::new(carved, self.num_classes, split)?,
        ))
    }

    /// SHA-256 over ids, features and targets, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_classes as u64).to_le_bytes());
        for s in &self.samples {
            h.update(s.id.0.to_le_bytes());
            for v in s.features.data() {
                h.update(v.to_le_bytes());
            }
            match &s.target {
                Target::Class(c) => h.update((*c as u64).to_le_bytes()),
                Target::Density(t) => {
                    for v in t.data() {
                        h.update(v.to_le_bytes());
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| SampleRecord {
                id: SampleId(i as u64 * 3),
                features: Tensor::filled(&[2], i as f64),
                target: Target::Class(i % 2),
                class_tag: ClassTag::Class(i % 2),
            })
            .collect();
        Dataset::new(samples, 2, Split::Train).unwrap()
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut s = tiny(3).samples().to_vec();
        s[2].id = s[0].id;
        assert!(Dataset::new(s, 2, Split::Train).is_err());
    }

    #[test]
    fn gather_follows_requested_order() {
        let d = tiny(4);
        let (x, t) = d.gather(&[SampleId(9), SampleId(0)]).unwrap();
        assert_eq!(x.shape(), &[2, 2]);
        assert_eq!(x.row(0), &[3.0, 3.0]);
        assert_eq!(t, Targets::Classes(vec![1, 0]));
        assert!(matches!(
            d.gather(&[SampleId(1)]),
            Err(Error::UnknownSample(SampleId(1)))
        ));
    }

    #[test]
    fn carve_preserves_ids() {
        let d = tiny(40);
        let all = d.ids();
        let (train, val) = d.carve(0.1, 7, Split::Val).unwrap();
        assert_eq!(val.len(), 4);
        assert_eq!(val.split(), Split::Val);
        let mut union: Vec<_> = train.ids().into_iter().chain(val.ids()).collect();
        union.sort();
        assert_eq!(union, all);
        // stratified: two per class
        let sizes = val.class_sizes();
        assert_eq!(sizes[&ClassTag::Class(0)], 2);
    }

    #[test]
    fn fingerprint_changes_with_content() {
        let a = tiny(5);
        let mut s = a.samples().to_vec();
        s[1].features.data_mut()[0] += 1e-9;
        let b = Dataset::new(s, 2, Split::Train).unwrap();
        assert_eq!(a.fingerprint(), tiny(5).fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
