//! Binary cache for synthetic datasets.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        8   "TFTBDSET"
//! version      4   u32 (1)
//! seed         8   u64
//! params_len   4   u32, followed by that many bytes of JSON generator parameters
//! split        1   u8: 0 train, 1 val, 2 test
//! num_classes  4   u32
//! n_samples    8   u64
//! feat_rank    4   u32, then feat_rank u32 dims
//! per sample:
//!   id         8   u64
//!   class_tag  8   i64, -1 for unstratified
//!   target     1   u8 kind: 0 class (then u32), 1 density (then u32 rank, u32 dims, f64 values)
//!   features   8*prod(feat dims) f64
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::{SynthClassification, SynthCounting};
use super::{ClassTag, Dataset, SampleId, SampleRecord, Split, Target};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"TFTBDSET";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorParams {
    Classification(SynthClassification),
    Counting(SynthCounting),
}

impl GeneratorParams {
    pub fn seed(&self) -> u64 {
        match self {
            GeneratorParams::Classification(c) => c.seed,
            GeneratorParams::Counting(c) => c.seed,
        }
    }

    pub fn generate(&self, split: Split) -> Result<Dataset> {
        match self {
            GeneratorParams::Classification(c) => c.generate(split),
            GeneratorParams::Counting(c) => c.generate(split),
        }
    }
}

pub fn encode(params: &GeneratorParams, data: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&params.seed().to_le_bytes());
    let json = serde_json::to_vec(params)?;
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.push(match data.split() {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    });
    out.extend_from_slice(&(data.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    let shape = data.feature_shape();
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in data.samples() {
        out.extend_from_slice(&s.id.0.to_le_bytes());
        let tag: i64 = match s.class_tag {
            ClassTag::Class(c) => c as i64,
            ClassTag::Unstratified => -1,
        };
        out.extend_from_slice(&tag.to_le_bytes());
        match &s.target {
            Target::Class(c) => {
                out.push(0);
                out.extend_from_slice(&(*c as u32).to_le_bytes());
            }
            Target::Density(t) => {
                out.push(1);
                out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
                for &d in t.shape() {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for v in s.features.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("dataset cache truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn dims(&mut self) -> Result<Vec<usize>> {
        let rank = self.u32()?;
        (0..rank).map(|_| self.u32()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<(GeneratorParams, Dataset)> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Format("not a dataset cache (bad magic)".into()));
    }
    let version = c.u32()? as u32;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset cache version {version}")));
    }
    let seed = c.u64()?;
    let plen = c.u32()?;
    let params: GeneratorParams = serde_json::from_slice(c.take(plen)?)?;
    if params.seed() != seed {
        return Err(Error::Format("header seed disagrees with generator parameters".into()));
    }
    let split = match c.take(1)?[0] {
        0 => Split::Train,
        1 => Split::Val,
        2 => Split::Test,
        k => return Err(Error::Format(format!("unknown split tag {k}"))),
    };
    let num_classes = c.u32()?;
    let n = c.u64()? as usize;
    let fshape = c.dims()?;
    let flen: usize = fshape.iter().product();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let id = SampleId(c.u64()?);
        let tag = c.i64()?;
        let class_tag = if tag < 0 {
            ClassTag::Unstratified
        } else {
            ClassTag::Class(tag as usize)
        };
        let target = match c.take(1)?[0] {
            0 => Target::Class(c.u32()?),
            1 => {
                let shape = c.dims()?;
                let len = shape.iter().product();
                Target::Density(Tensor::new(shape, c.f64s(len)?)?)
            }
            k => return Err(Error::Format(format!("unknown target kind {k}"))),
        };
        let features = Tensor::new(fshape.clone(), c.f64s(flen)?)?;
        samples.push(SampleRecord {
            id,
            features,
            target,
            class_tag,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after dataset cache".into()));
    }
    Ok((params, Dataset::new(samples, num_classes, split)?))
}

pub fn save(params: &GeneratorParams, data: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, encode(params, data)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(GeneratorParams, Dataset)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Load `path` if it holds this generator's split, otherwise generate and write it.
pub fn load_or_generate(params: &GeneratorParams, split: Split, path: &Path) -> Result<Dataset> {
    if path.exists() {
        if let Ok((p, d)) = load(path) {
            if &p == params && d.split() == split {
                return Ok(d);
            }
        }
    }
    let d = params.generate(split)?;
    save(params, &d, path)?;
    Ok(d)
}
