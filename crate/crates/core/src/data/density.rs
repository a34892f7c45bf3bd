//! Density-map ground truth from point annotations.
//!
//! Each annotated point contributes an isotropic Gaussian evaluated at pixel
//! centres (pixel `(row i, col j)` sits at coordinate `(x = j, y = i)`). The
//! kernel is renormalised to unit mass inside the map, so the map always sums
//! to the number of points, even for points near the border.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DotMap {
    pub width: usize,
    pub height: usize,
    /// `(x, y)` coordinates in pixel units.
    pub points: Vec<(f64, f64)>,
}

impl DotMap {
    pub fn new(width: usize, height: usize, points: Vec<(f64, f64)>) -> Result<Self> {
        let d = DotMap {
            width,
            height,
            points,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<()> {
        for &(x, y) in &self.points {
            let inside = x.is_finite()
                && y.is_finite()
                && x >= 0.0
                && y >= 0.0
                && x < self.width as f64
                && y < self.height as f64;
            if !inside {
                return Err(Error::PointOutOfBounds {
                    x,
                    y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }
}

/// 1-D Gaussian profile along one axis, shifted so its peak is 1.
///
/// The shift cancels in the normalisation but keeps tiny `sigma` from
/// underflowing every entry to zero.
fn axis_profile(len: usize, centre: f64, sigma: f64) -> Vec<f64> {
    let d2: Vec<f64> = (0..len).map(|j| (j as f64 - centre).powi(2)).collect();
    let min = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    let denom = 2.0 * sigma * sigma;
    d2.into_iter().map(|v| (-(v - min) / denom).exp()).collect()
}

/// Sum of unit-mass Gaussians centred on every point, shape `(height, width)`.
pub fn density_map(dot: &DotMap, sigma: f64) -> Result<Tensor> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    dot.validate()?;
    let (h, w) = (dot.height, dot.width);
    let mut map = Tensor::zeros(&[h, w]);
    let data = map.data_mut();
    for &(px, py) in &dot.points {
        let gx = axis_profile(w, px, sigma);
        let gy = axis_profile(h, py, sigma);
        let mass: f64 = gx.iter().sum::<f64>() * gy.iter().sum::<f64>();
        for (i, gyi) in gy.iter().enumerate() {
            let row = &mut data[i * w..(i + 1) * w];
            let s = gyi / mass;
            for (cell, gxj) in row.iter_mut().zip(&gx) {
                *cell += s * gxj;
            }
        }
    }
    Ok(map)
}
