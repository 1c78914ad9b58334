//! Sensor noise and 8-bit quantization models.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::frame::Frame;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub factor: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(factor: f64, seed: u64) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(invalid(format!("noise factor must be >= 0, got {factor}")));
        }
        Ok(NoiseSpec { factor, seed })
    }
}

/// Photon-noise-style standard deviation for a pixel of value `v`.
#[inline]
pub fn noise_sigma(v: f64, factor: f64) -> f64 {
    factor * v.max(1.0 / 255.0).sqrt() / 255.0
}

/// The additive noise field before clamping, one sample per value.
pub fn noise_field(frame: &Frame, spec: &NoiseSpec) -> Vec<f64> {
    let mut rng = rng::seeded(spec.seed);
    frame
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * noise_sigma(v, spec.factor)
        })
        .collect()
}

/// Add value-dependent Gaussian noise and clamp to [0, 1].
pub fn add_noise(frame: &Frame, spec: &NoiseSpec) -> Frame {
    if spec.factor == 0.0 {
        return frame.clone();
    }
    let field = noise_field(frame, spec);
    let mut out = frame.clone();
    for (v, n) in out.data_mut().iter_mut().zip(field) {
        *v = (*v + n).clamp(0.0, 1.0);
    }
    out
}

/// Add uniform noise in [-0.5/255, 0.5/255) and round to the 8-bit grid.
pub fn quantize_with_dither(frame: &Frame, seed: u64) -> Frame {
    let mut rng = rng::seeded(seed);
    let mut out = frame.clone();
    for v in out.data_mut() {
        let u: f64 = rng.random_range(-0.5..0.5);
        let level = (*v * 255.0 + u).round().clamp(0.0, 255.0);
        *v = level / 255.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_factor_is_identity() {
        let f = Frame::from_fn(8, 8, 3, |y, x, c| ((y * 8 + x + c) % 7) as f64 / 7.0);
        assert_eq!(add_noise(&f, &NoiseSpec::new(0.0, 9).unwrap()), f);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let f = Frame::filled(16, 16, 1, 0.4);
        let spec = NoiseSpec::new(5.0, 42).unwrap();
        assert_eq!(add_noise(&f, &spec), add_noise(&f, &spec));
        assert_ne!(add_noise(&f, &spec), add_noise(&f, &NoiseSpec::new(5.0, 43).unwrap()));
    }

    #[test]
    fn noise_std_follows_model() {
        let f = Frame::filled(64, 64, 1, 0.5);
        let spec = NoiseSpec::new(100.0, 11).unwrap();
        let field = noise_field(&f, &spec);
        let n = field.len() as f64;
        let mean = field.iter().sum::<f64>() / n;
        let var = field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 100.0 * 0.5f64.sqrt() / 255.0;
        assert!((var.sqrt() / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn negative_factor_rejected() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn dither_keeps_black_black() {
        let f = Frame::filled(32, 32, 1, 0.0);
        assert_eq!(quantize_with_dither(&f, 3), f);
    }

    #[test]
    fn dither_output_on_grid() {
        let f = Frame::filled(16, 16, 3, 100.0 / 255.0);
        let q = quantize_with_dither(&f, 5);
        for &v in q.data() {
            assert_eq!(v, 100.0 / 255.0);
        }
        let g = Frame::from_fn(16, 16, 1, |y, x, _| (y * 16 + x) as f64 / 255.0 + 0.0013);
        for &v in quantize_with_dither(&g, 8).data() {
            let k = v * 255.0;
            assert!((k - k.round()).abs() < 1e-9 && (0.0..=255.0).contains(&k));
        }
    }

    #[test]
    fn dither_splits_half_level_evenly() {
        // 0.5 * 255 = 127.5 sits exactly between levels 127 and 128; the
        // symmetric dither sends half of the pixels each way.
        let f = Frame::filled(1000, 1000, 1, 0.5);
        let q = quantize_with_dither(&f, 17);
        let up = q.data().iter().filter(|&&v| v > 0.5).count() as f64 / 1e6;
        assert!((up - 0.5).abs() < 0.01, "fraction rounded up {up}");
    }
}
