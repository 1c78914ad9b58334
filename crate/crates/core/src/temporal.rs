//! Temporal filters applied independently to every element of a sequence.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fft::{fft1d, signed_index};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    IdealFft,
    Butterworth,
    DifferenceOfFrames,
}

impl FilterKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ideal" | "ideal-fft" => Ok(FilterKind::IdealFft),
            "butter" | "butterworth" => Ok(FilterKind::Butterworth),
            "diff" | "difference" => Ok(FilterKind::DifferenceOfFrames),
            other => Err(invalid(format!("unknown temporal filter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFilterSpec {
    pub kind: FilterKind,
    pub low_cut: f64,
    pub high_cut: f64,
    pub fps: f64,
}

impl TemporalFilterSpec {
    pub fn new(kind: FilterKind, low_cut: f64, high_cut: f64, fps: f64) -> Result<Self> {
        let spec = TemporalFilterSpec {
            kind,
            low_cut,
            high_cut,
            fps,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) || !self.fps.is_finite() {
            return Err(invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if self.kind == FilterKind::DifferenceOfFrames {
            return Ok(());
        }
        let ok = self.low_cut >= 0.0
            && self.low_cut < self.high_cut
            && self.high_cut <= self.fps / 2.0;
        if !ok {
            return Err(invalid(format!(
                "pass band must satisfy 0 <= low < high <= fps/2, got [{}, {}] at {} fps",
                self.low_cut, self.high_cut, self.fps
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn TemporalFilter>> {
        self.validate()?;
        Ok(match self.kind {
            FilterKind::IdealFft => Box::new(IdealBandpass { spec: *self }),
            FilterKind::Butterworth => Box::new(ButterworthBandpass::design(self)),
            FilterKind::DifferenceOfFrames => Box::new(FrameDifference),
        })
    }
}

pub trait TemporalFilter: Send + Sync {
    fn min_len(&self) -> usize {
        1
    }

    fn filter_series(&self, series: &[f64]) -> Vec<f64>;

    /// Filter a sequence of equally sized element vectors along time.
    fn filter_frames(&self, frames: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let t = frames.len();
        if t < self.min_len() {
            return Err(invalid(format!(
                "temporal filter needs at least {} samples, got {t}",
                self.min_len()
            )));
        }
        let n = frames[0].len();
        if frames.iter().any(|f| f.len() != n) {
            return Err(invalid("temporal filter input has ragged frames"));
        }
        let mut out = vec![vec![0.0; n]; t];
        let mut series = vec![0.0; t];
        for i in 0..n {
            for (s, f) in series.iter_mut().zip(frames) {
                *s = f[i];
            }
            for (o, v) in out.iter_mut().zip(self.filter_series(&series)) {
                o[i] = v;
            }
        }
        Ok(out)
    }
}

pub fn temporal_bandpass(series: &[f64], spec: &TemporalFilterSpec) -> Result<Vec<f64>> {
    let filter = spec.build()?;
    if series.len() < filter.min_len() {
        return Err(invalid(format!(
            "temporal filter needs at least {} samples, got {}",
            filter.min_len(),
            series.len()
        )));
    }
    Ok(filter.filter_series(series))
}

/// Zeroes every DFT bin whose two-sided frequency lies outside the band.
struct IdealBandpass {
    spec: TemporalFilterSpec,
}

impl TemporalFilter for IdealBandpass {
    fn filter_series(&self, series: &[f64]) -> Vec<f64> {
        let n = series.len();
        let mut buf: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft1d(&mut buf, false);
        for (k, c) in buf.iter_mut().enumerate() {
            let f = signed_index(k, n).unsigned_abs() as f64 * self.spec.fps / n as f64;
            if f < self.spec.low_cut || f > self.spec.high_cut {
                *c = Complex64::default();
            }
        }
        fft1d(&mut buf, true);
        buf.iter().map(|c| c.re / n as f64).collect()
    }
}

/// Second-order band-pass (first-order Butterworth prototype, bilinear
/// transform with pre-warped edges), run forward from rest.
struct ButterworthBandpass {
    b: [f64; 3],
    a: [f64; 3],
}

impl ButterworthBandpass {
    fn design(spec: &TemporalFilterSpec) -> Self {
        let k = 2.0 * spec.fps;
        let warp = |f: f64| k * (PI * f / spec.fps).tan();
        let (wl, wh) = (warp(spec.low_cut), warp(spec.high_cut));
        let bw = wh - wl;
        let w0sq = wl * wh;
        let a0 = k * k + bw * k + w0sq;
        ButterworthBandpass {
            b: [bw * k / a0, 0.0, -bw * k / a0],
            a: [1.0, (2.0 * w0sq - 2.0 * k * k) / a0, (k * k - bw * k + w0sq) / a0],
        }
    }
}

impl TemporalFilter for ButterworthBandpass {
    fn min_len(&self) -> usize {
        3
    }

    fn filter_series(&self, series: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        series
            .iter()
            .map(|&x| {
                let y = self.b[0] * x + self.b[1] * x1 + self.b[2] * x2
                    - self.a[1] * y1
                    - self.a[2] * y2;
                x2 = x1;
                x1 = x;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// `x_t - x_{t-1}`, with zero at t = 0.
struct FrameDifference;

impl TemporalFilter for FrameDifference {
    fn filter_series(&self, series: &[f64]) -> Vec<f64> {
        let mut prev = series.first().copied().unwrap_or(0.0);
        series
            .iter()
            .map(|&x| {
                let d = x - prev;
                prev = x;
                d
            })
            .collect()
    }
}
