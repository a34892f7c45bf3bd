//! `ModelParams` checkpoint file.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "TFTBCKPT"
//! 8       4     u32 format version (1)
//! 12      1     u8 architecture kind: 0 = mlp, 1 = density_conv
//! 13      ...   descriptor, all u32:
//!                 mlp:          input_dim, n_hidden, hidden[n_hidden], num_classes
//!                 density_conv: in_channels, height, width, channels[0], channels[1], kernel
//! ..      8     u64 parameter count
//! ..      8*n   f64 values; for each layer, weight (row-major) then bias
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Architecture, Layer, ModelParams};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"TFTBCKPT";
pub const VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.parameter_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    match params.architecture() {
        Architecture::Mlp {
            input_dim,
            hidden,
            num_classes,
        } => {
            out.push(0);
            put(&mut out, *input_dim);
            put(&mut out, hidden.len());
            for &h in hidden {
                put(&mut out, h);
            }
            put(&mut out, *num_classes);
        }
        Architecture::DensityConv {
            in_channels,
            height,
            width,
            channels,
            kernel,
        } => {
            out.push(1);
            for v in [*in_channels, *height, *width, channels[0], channels[1], *kernel] {
                put(&mut out, v);
            }
        }
    }
    out.extend_from_slice(&(params.parameter_count() as u64).to_le_bytes());
    for t in params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "checkpoint truncated at byte {} (need {n} more)",
                self.pos
            )));
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

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let arch = match r.take(1)?[0] {
        0 => {
            let input_dim = r.u32()?;
            let n_hidden = r.u32()?;
            let hidden = (0..n_hidden).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let num_classes = r.u32()?;
            Architecture::Mlp {
                input_dim,
                hidden,
                num_classes,
            }
        }
        1 => {
            let in_channels = r.u32()?;
            let height = r.u32()?;
            let width = r.u32()?;
            let c0 = r.u32()?;
            let c1 = r.u32()?;
            let kernel = r.u32()?;
            Architecture::DensityConv {
                in_channels,
                height,
                width,
                channels: [c0, c1],
                kernel,
            }
        }
        k => return Err(Error::Format(format!("unknown architecture kind {k}"))),
    };
    arch.validate()?;
    let count = r.u64()?;
    if count != arch.parameter_count() as u64 {
        return Err(Error::Format(format!(
            "parameter count {count} does not match descriptor ({})",
            arch.parameter_count()
        )));
    }
    let mut layers = Vec::new();
    for (ws, bs) in arch.layer_shapes() {
        let mut read = |shape: Vec<usize>| -> Result<Tensor> {
            let n = shape.iter().product();
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            Tensor::new(shape, data)
        };
        let weight = read(ws)?;
        let bias = read(bs)?;
        layers.push(Layer { weight, bias });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        )));
    }
    ModelParams::from_layers(arch, layers)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let p = ModelParams::init(
            Architecture::Mlp {
                input_dim: 2,
                hidden: vec![3],
                num_classes: 2,
            },
            0,
        )
        .unwrap();
        let b = encode(&p);
        assert_eq!(&b[..8], b"TFTBCKPT");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(b[12], 0);
        // descriptor: input 2, one hidden of 3, 2 classes
        let desc: Vec<u32> = b[13..29]
            .chunks(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(desc, vec![2, 1, 3, 2]);
        assert_eq!(b.len(), 29 + 8 + 8 * p.parameter_count());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let p = ModelParams::init(
            Architecture::DensityConv {
                in_channels: 1,
                height: 4,
                width: 4,
                channels: [2, 2],
                kernel: 3,
            },
            0,
        )
        .unwrap();
        let b = encode(&p);
        assert!(decode(&b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad = b;
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), conv in any::<bool>(), h in 1usize..6) {
            let arch = if conv {
                Architecture::DensityConv { in_channels: 1, height: h + 2, width: 5, channels: [h, 2], kernel: 3 }
            } else {
                Architecture::Mlp { input_dim: h, hidden: vec![h + 1, 3], num_classes: 4 }
            };
            let p = ModelParams::init(arch, seed).unwrap();
            let q = decode(&encode(&p)).unwrap();
            let bits = |m: &ModelParams| -> Vec<u64> {
                m.tensors().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
            };
            prop_assert_eq!(p.architecture(), q.architecture());
            prop_assert_eq!(bits(&p), bits(&q));
        }
    }
}
