//! Synthetic stand-ins for the classification and counting tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::density::{density_map, DotMap};
use super::{ClassTag, Dataset, SampleId, SampleRecord, Split, Target, TEST_ID_BASE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gaussian class clusters with a controllable share of redundant easy samples.
///
/// Class centroids depend only on `seed`, so the train and test splits of one
/// task share the same geometry. Within a class, `easy_fraction` of the samples
/// are small jitters around a handful of prototypes close to the centroid (all
/// within `spread` of it); the rest sit between the centroid and the bisector
/// towards a random other class, on the correct side of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthClassification {
    pub seed: u64,
    pub n_per_class: usize,
    pub num_classes: usize,
    pub easy_fraction: f64,
    pub dim: usize,
    /// Cluster scale; easy samples lie within this distance of their centroid.
    pub spread: f64,
    /// Distance of each centroid from the origin.
    pub centroid_radius: f64,
    /// Distinct easy prototypes per class.
    pub prototypes: usize,
}

impl SynthClassification {
    pub fn new(seed: u64, n_per_class: usize, num_classes: usize, easy_fraction: f64) -> Self {
        SynthClassification {
            seed,
            n_per_class,
            num_classes,
            easy_fraction,
            dim: 16,
            spread: 1.0,
            centroid_radius: 3.0,
            prototypes: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.easy_fraction) {
            return Err(Error::invalid(format!(
                "easy_fraction {} not in [0, 1]",
                self.easy_fraction
            )));
        }
        if self.dim < 2 || self.n_per_class == 0 || self.prototypes == 0 {
            return Err(Error::invalid("dim >= 2, n_per_class >= 1 and prototypes >= 1 required"));
        }
        if !(self.spread > 0.0 && self.centroid_radius > 0.0) {
            return Err(Error::invalid("spread and centroid_radius must be positive"));
        }
        Ok(())
    }

    pub fn centroids(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.num_classes)
            .map(|_| {
                let v = unit_vector(&mut rng, self.dim);
                v.into_iter().map(|x| x * self.centroid_radius).collect()
            })
            .collect()
    }

    /// Generate one split. Train ids start at 0, test ids at [`TEST_ID_BASE`].
    pub fn generate(&self, split: Split) -> Result<Dataset> {
        self.validate()?;
        let centroids = self.centroids();
        let stream = match split {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream)));
        let id_base = if split == Split::Test { TEST_ID_BASE } else { 0 };
        let n_easy = (self.easy_fraction * self.n_per_class as f64).round() as usize;
        let ortho = Normal::new(0.0, 0.5 * self.spread).expect("positive std");

        let mut samples = Vec::with_capacity(self.num_classes * self.n_per_class);
        for (c, centre) in centroids.iter().enumerate() {
            let protos: Vec<Vec<f64>> = (0..self.prototypes)
                .map(|_| {
                    let r = 0.6 * self.spread * rng.random::<f64>();
                    offset(centre, &unit_vector(&mut rng, self.dim), r)
                })
                .collect();
            for k in 0..self.n_per_class {
                let x = if k < n_easy {
                    let p = &protos[rng.random_range(0..protos.len())];
                    let r = 0.2 * self.spread * rng.random::<f64>();
                    offset(p, &unit_vector(&mut rng, self.dim), r)
                } else {
                    let mut other = rng.random_range(0..self.num_classes - 1);
                    if other >= c {
                        other += 1;
                    }
                    let t = rng.random_range(0.30..0.47);
                    let axis: Vec<f64> = centroids[other]
                        .iter()
                        .zip(centre)
                        .map(|(o, m)| o - m)
                        .collect();
                    let base: Vec<f64> = centre.iter().zip(&axis).map(|(m, a)| m + t * a).collect();
                    // noise orthogonal to the inter-centroid axis keeps the point on its side
                    let mut noise: Vec<f64> = (0..self.dim).map(|_| ortho.sample(&mut rng)).collect();
                    let a2: f64 = axis.iter().map(|a| a * a).sum();
                    let proj: f64 = noise.iter().zip(&axis).map(|(n, a)| n * a).sum::<f64>() / a2;
                    for (n, a) in noise.iter_mut().zip(&axis) {
                        *n -= proj * a;
                    }
                    base.iter().zip(&noise).map(|(b, n)| b + n).collect()
                };
                let idx = (c * self.n_per_class + k) as u64;
                samples.push(SampleRecord {
                    id: SampleId(id_base + idx),
                    features: Tensor::new(vec![self.dim], x)?,
                    target: Target::Class(c),
                    class_tag: ClassTag::Class(c),
                });
            }
        }
        Dataset::new(samples, self.num_classes, split)
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn offset(base: &[f64], dir: &[f64], r: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + r * d).collect()
}

/// Training split of a [`SynthClassification`] task with default geometry.
pub fn synth_classification(
    seed: u64,
    n_per_class: usize,
    num_classes: usize,
    easy_fraction: f64,
) -> Result<Dataset> {
    SynthClassification::new(seed, n_per_class, num_classes, easy_fraction).generate(Split::Train)
}

/// Dot-map counting images: blobs at random points over a noisy background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCounting {
    pub seed: u64,
    pub n_images: usize,
    pub image_size: usize,
    pub max_objects: usize,
    pub sigma: f64,
    /// Radius of the rendered blobs in the input image.
    pub blob_radius: f64,
    pub noise_std: f64,
}

impl SynthCounting {
    pub fn new(seed: u64, n_images: usize, image_size: usize, max_objects: usize, sigma: f64) -> Self {
        SynthCounting {
            seed,
            n_images,
            image_size,
            max_objects,
            sigma,
            blob_radius: 1.0,
            noise_std: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.image_size < 16 {
            return Err(Error::invalid(format!(
                "image_size must be at least 16, got {}",
                self.image_size
            )));
        }
        if self.max_objects < 1 {
            return Err(Error::invalid("max_objects must be at least 1"));
        }
        if !(self.sigma > 0.0) || !(self.blob_radius > 0.0) || self.noise_std < 0.0 {
            return Err(Error::invalid("sigma and blob_radius must be positive"));
        }
        Ok(())
    }

    /// Dot annotations of every image, in id order.
    pub fn dot_maps(&self, split: Split) -> Result<Vec<DotMap>> {
        Ok(self.render(split)?.into_iter().map(|(d, _)| d).collect())
    }

    fn render(&self, split: Split) -> Result<Vec<(DotMap, Tensor)>> {
        self.validate()?;
        let stream: u64 = match split {
            Split::Train => 11,
            Split::Val => 12,
            Split::Test => 13,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(stream));
        let s = self.image_size;
        let noise = Normal::new(0.0, self.noise_std.max(1e-300)).expect("valid std");
        let mut out = Vec::with_capacity(self.n_images);
        for _ in 0..self.n_images {
            let count = rng.random_range(0..=self.max_objects);
            let points: Vec<(f64, f64)> = (0..count)
                .map(|_| (rng.random_range(0.0..s as f64), rng.random_range(0.0..s as f64)))
                .collect();
            let dots = DotMap::new(s, s, points)?;
            let mut img = Tensor::zeros(&[1, s, s]);
            let data = img.data_mut();
            let denom = 2.0 * self.blob_radius * self.blob_radius;
            for &(px, py) in &dots.points {
                for i in 0..s {
                    for j in 0..s {
                        let d2 = (j as f64 - px).powi(2) + (i as f64 - py).powi(2);
                        data[i * s + j] += (-d2 / denom).exp();
                    }
                }
            }
            if self.noise_std > 0.0 {
                for v in data.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
            out.push((dots, img));
        }
        Ok(out)
    }

    pub fn generate(&self, split: Split) -> Result<Dataset> {
        let id_base = if split == Split::Test { TEST_ID_BASE } else { 0 };
        let samples = self
            .render(split)?
            .into_iter()
            .enumerate()
            .map(|(i, (dots, img))| {
                Ok(SampleRecord {
                    id: SampleId(id_base + i as u64),
                    features: img,
                    target: Target::Density(density_map(&dots, self.sigma)?),
                    class_tag: ClassTag::Unstratified,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, 0, split)
    }
}

/// Training split of a [`SynthCounting`] task.
pub fn synth_counting(
    seed: u64,
    n_images: usize,
    image_size: usize,
    max_objects: usize,
    sigma: f64,
) -> Result<Dataset> {
    SynthCounting::new(seed, n_images, image_size, max_objects, sigma).generate(Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn class_counts() {
        let d = synth_classification(1, 100, 2, 0.5).unwrap();
        assert_eq!(d.len(), 200);
        let sizes = d.class_sizes();
        assert_eq!(sizes[&ClassTag::Class(0)], 100);
        assert_eq!(sizes[&ClassTag::Class(1)], 100);
    }

    #[test]
    fn all_easy_samples_near_centroid() {
        let cfg = SynthClassification::new(4, 50, 3, 1.0);
        let cents = cfg.centroids();
        let d = cfg.generate(Split::Train).unwrap();
        for s in d.samples() {
            let ClassTag::Class(c) = s.class_tag else { panic!() };
            assert!(dist(s.features.data(), &cents[c]) <= cfg.spread);
        }
    }

    #[test]
    fn hard_samples_nearest_to_own_centroid() {
        let cfg = SynthClassification::new(5, 80, 4, 0.0);
        let cents = cfg.centroids();
        let d = cfg.generate(Split::Train).unwrap();
        let mut own = 0;
        for s in d.samples() {
            let ClassTag::Class(c) = s.class_tag else { panic!() };
            let nearest = (0..cents.len())
                .min_by(|&a, &b| {
                    dist(s.features.data(), &cents[a]).total_cmp(&dist(s.features.data(), &cents[b]))
                })
                .unwrap();
            own += usize::from(nearest == c);
        }
        // orthogonal noise can only cross a third class's boundary, which is rare
        assert!(own as f64 >= 0.95 * d.len() as f64, "{own}");
    }

    #[test]
    fn deterministic_and_split_dependent() {
        let a = synth_classification(3, 20, 3, 0.6).unwrap();
        let b = synth_classification(3, 20, 3, 0.6).unwrap();
        assert_eq!(a.samples(), b.samples());
        let test = SynthClassification::new(3, 20, 3, 0.6).generate(Split::Test).unwrap();
        assert_ne!(a.samples()[0].features, test.samples()[0].features);
        assert!(test.ids().iter().all(|id| id.0 >= TEST_ID_BASE));
    }

    #[test]
    fn parameter_validation() {
        assert!(synth_classification(0, 10, 1, 0.5).is_err());
        assert!(synth_classification(0, 10, 2, 1.5).is_err());
        assert!(synth_counting(0, 5, 15, 3, 2.0).is_err());
        assert!(synth_counting(0, 5, 16, 0, 2.0).is_err());
    }

    #[test]
    fn counting_targets_conserve_mass() {
        let cfg = SynthCounting::new(2, 50, 16, 6, 4.0);
        let d = cfg.generate(Split::Train).unwrap();
        assert_eq!(d.len(), 50);
        let dots = cfg.dot_maps(Split::Train).unwrap();
        for (s, dm) in d.samples().iter().zip(&dots) {
            assert_eq!(s.class_tag, ClassTag::Unstratified);
            let Target::Density(t) = &s.target else { panic!() };
            assert!((t.sum() - dm.count() as f64).abs() < 1e-6);
            assert!(dm.count() <= 6);
        }
        let again = synth_counting(2, 50, 16, 6, 4.0).unwrap();
        assert_eq!(d.samples(), again.samples());
    }
}
