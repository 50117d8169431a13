//! Uniform scalar quantization of the cube `[-1, 1]^3`.
//!
//! Each axis is split into `N` equal bins of width `2 / N`. Quantization
//! floors into a bin and clamps out-of-range values onto the boundary bins;
//! dequantization returns the bin center, so a roundtrip moves a coordinate
//! by at most half a bin (`1 / N`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizeError {
    #[error("resolution {0} is not supported (expected a power of two >= 2)")]
    BadResolution(u32),
    #[error("cannot quantize non-finite value {0}")]
    NonFinite(f64),
    #[error("bin index {index} out of range for resolution {resolution}")]
    IndexOutOfRange { index: u32, resolution: u32 },
}

/// A uniform grid with `resolution` bins per axis over `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct QuantizationGrid {
    resolution: u32,
}

impl TryFrom<u32> for QuantizationGrid {
    type Error = QuantizeError;
    fn try_from(n: u32) -> Result<Self, Self::Error> {
        QuantizationGrid::new(n)
    }
}

impl From<QuantizationGrid> for u32 {
    fn from(g: QuantizationGrid) -> u32 {
        g.resolution
    }
}

/// A vertex expressed as three bin indices.
pub type QuantizedVertex = [u32; 3];

impl QuantizationGrid {
    /// Resolutions used by the tokenizers.
    pub const STANDARD: [u32; 4] = [128, 256, 512, 1024];

    /// Any power of two from 2 up to 2^16 is accepted.
    pub fn new(resolution: u32) -> Result<Self, QuantizeError> {
        if resolution < 2 || !resolution.is_power_of_two() || resolution > 1 << 16 {
            return Err(QuantizeError::BadResolution(resolution));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn bin_width(&self) -> f64 {
        2.0 / self.resolution as f64
    }

    pub fn quantize(&self, x: f64) -> Result<u32, QuantizeError> {
        if !x.is_finite() {
            return Err(QuantizeError::NonFinite(x));
        }
        let n = self.resolution as f64;
        let t = ((x + 1.0) * 0.5 * n).floor();
        Ok(t.clamp(0.0, n - 1.0) as u32)
    }

    pub fn dequantize(&self, index: u32) -> Result<f64, QuantizeError> {
        if index >= self.resolution {
            return Err(QuantizeError::IndexOutOfRange {
                index,
                resolution: self.resolution,
            });
        }
        Ok(self.center(index))
    }

    /// Bin center without range checking; callers guarantee `index < N`.
    pub(crate) fn center(&self, index: u32) -> f64 {
        -1.0 + (index as f64 + 0.5) * self.bin_width()
    }

    pub fn quantize_point(&self, p: &Vec3) -> Result<QuantizedVertex, QuantizeError> {
        Ok([
            self.quantize(p.x)?,
            self.quantize(p.y)?,
            self.quantize(p.z)?,
        ])
    }

    pub fn dequantize_point(&self, q: &QuantizedVertex) -> Result<Vec3, QuantizeError> {
        Ok(Vec3::new(
            self.dequantize(q[0])?,
            self.dequantize(q[1])?,
            self.dequantize(q[2])?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: u32) -> QuantizationGrid {
        QuantizationGrid::new(n).unwrap()
    }

    #[test]
    fn boundary_and_interior_bins() {
        let g = grid(4);
        assert_eq!(g.quantize(-1.0).unwrap(), 0);
        assert_eq!(g.quantize(1.0).unwrap(), 3);
        // floor(1.3 / 2 * 4) = floor(2.6) = 2
        assert_eq!(g.quantize(0.3).unwrap(), 2);
        assert_eq!(g.quantize(-7.0).unwrap(), 0);
        assert_eq!(g.quantize(7.0).unwrap(), 3);
    }

    #[test]
    fn bin_centers() {
        assert_eq!(grid(4).dequantize(2).unwrap(), 0.25);
        assert_eq!(grid(2).dequantize(0).unwrap(), -0.5);
        assert!(matches!(
            grid(4).dequantize(4),
            Err(QuantizeError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(QuantizationGrid::new(0).is_err());
        assert!(QuantizationGrid::new(1).is_err());
        assert!(QuantizationGrid::new(100).is_err());
        assert!(matches!(
            grid(8).quantize(f64::NAN),
            Err(QuantizeError::NonFinite(_))
        ));
        assert!(grid(8).quantize(f64::INFINITY).is_err());
    }

    #[test]
    fn quantize_dequantize_fixed_point_exhaustive() {
        for n in QuantizationGrid::STANDARD {
            let g = grid(n);
            for i in 0..n {
                assert_eq!(g.quantize(g.dequantize(i).unwrap()).unwrap(), i);
            }
        }
    }

    #[test]
    fn half_bin_bound_on_dense_grid() {
        for n in [2, 4, 128, 1024] {
            let g = grid(n);
            let steps = 100_000;
            let mut prev = 0;
            for k in 0..=steps {
                let x = -1.0 + 2.0 * k as f64 / steps as f64;
                let q = g.quantize(x).unwrap();
                assert!(q >= prev, "monotone");
                prev = q;
                let err = (g.dequantize(q).unwrap() - x).abs();
                assert!(err <= 1.0 / n as f64 + 1e-15, "n={n} x={x} err={err}");
            }
        }
    }

    proptest! {
        #[test]
        fn monotone(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = grid(128);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(g.quantize(lo).unwrap() <= g.quantize(hi).unwrap());
        }
    }
}
