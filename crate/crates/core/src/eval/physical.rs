use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fft::{fft1d, signed_index};

/// Vibration source and camera geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSetup {
    /// Vibration frequency (Hz).
    pub freq: f64,
    /// Peak acceleration (m/s²).
    pub accel_peak: f64,
    /// Camera-to-target distance (m).
    pub distance: f64,
    /// Focal length (m).
    pub focal: f64,
    /// Sensor pixel pitch (m).
    pub pixel_size: f64,
}

impl PhysicalSetup {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.freq, self.accel_peak, self.distance, self.focal, self.pixel_size];
        if fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(invalid("physical setup values must all be positive"))
        }
    }

    /// Angular frequency; `omega_in_hz` takes the frequency value literally.
    pub fn omega(&self, omega_in_hz: bool) -> f64 {
        if omega_in_hz {
            self.freq
        } else {
            2.0 * PI * self.freq
        }
    }

    /// Pixels per metre of target motion.
    pub fn pixels_per_metre(&self) -> f64 {
        self.focal / (self.distance * self.pixel_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalWave {
    pub times: Vec<f64>,
    /// Target displacement (m), before magnification.
    pub metres: Vec<f64>,
    /// Image displacement (px), magnified.
    pub pixels: Vec<f64>,
    /// Analytic peak of `pixels`.
    pub peak_px: f64,
    pub omega: f64,
}

/// Sinusoidal displacement implied by a peak acceleration, mapped to pixels
/// and scaled by `alpha`.
pub fn physical_displacement(
    setup: &PhysicalSetup,
    alpha: f64,
    duration_s: f64,
    fps: f64,
    omega_in_hz: bool,
) -> Result<PhysicalWave> {
    setup.validate()?;
    if !(duration_s > 0.0 && fps > 0.0 && duration_s.is_finite() && fps.is_finite()) {
        return Err(invalid("duration and fps must be positive"));
    }
    if !alpha.is_finite() {
        return Err(invalid("alpha must be finite"));
    }
    let omega = setup.omega(omega_in_hz);
    let mu = setup.accel_peak / (omega * omega);
    let ppm = setup.pixels_per_metre();
    let n = (duration_s * fps).round().max(1.0) as usize;
    let times: Vec<f64> = (0..n).map(|i| i as f64 / fps).collect();
    let metres: Vec<f64> = times.iter().map(|t| mu * (omega * t).sin()).collect();
    let pixels = metres.iter().map(|s| s * ppm * alpha).collect();
    Ok(PhysicalWave {
        times,
        metres,
        pixels,
        peak_px: mu * ppm * alpha,
        omega,
    })
}

/// Second time derivative of a periodic sampled series via the FFT.
pub fn second_derivative_spectral(series: &[f64], fps: f64) -> Vec<f64> {
    let n = series.len();
    let mut buf: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft1d(&mut buf, false);
    for (k, c) in buf.iter_mut().enumerate() {
        let k_signed = signed_index(k, n);
        // the Nyquist bin of an even-length series has no well-defined sign
        if n % 2 == 0 && k == n / 2 {
            *c = Complex64::default();
            continue;
        }
        let w = 2.0 * PI * k_signed as f64 * fps / n as f64;
        *c *= -w * w;
    }
    fft1d(&mut buf, true);
    buf.iter().map(|c| c.re / n as f64).collect()
}
