//! Complex steerable pyramids built in the frequency domain.
//!
//! Radial windows are raised-cosine transitions on a log2 frequency axis,
//! spaced one octave or half an octave apart. Oriented windows are
//! `cos^(K-1)` lobes supported on a half plane, so each band is analytic and
//! its coefficients carry a local phase. The bank is a tight frame for real
//! inputs: the high-pass, low-pass and conjugate-symmetrized oriented
//! responses square-sum to one at every frequency, and collapse is the
//! adjoint of build.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::axtf::Tensor;
use crate::error::{dims, invalid, Error, Result};
use crate::fft::{fft2d, signed_index};
use crate::frame::Frame;

pub const MIN_BAND_SIZE: usize = 8;
pub const MIN_FRAME_SIZE: usize = 32;
/// Width of each radial transition, in octaves.
const TRANSITION_OCTAVES: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bandwidth {
    Octave,
    HalfOctave,
}

impl Bandwidth {
    /// Radial spacing between consecutive bands, in octaves.
    pub fn octave_fraction(self) -> f64 {
        match self {
            Bandwidth::Octave => 1.0,
            Bandwidth::HalfOctave => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidSpec {
    pub orientations: usize,
    pub bandwidth: Bandwidth,
    /// Number of band scales; `None` picks the deepest level whose smallest
    /// band is still at least 8×8.
    pub depth: Option<usize>,
    pub include_residuals: bool,
    /// Rotation of the first orientation axis, in degrees.
    pub angle_offset_deg: f64,
}

impl PyramidSpec {
    pub fn new(orientations: usize, bandwidth: Bandwidth) -> Self {
        PyramidSpec {
            orientations,
            bandwidth,
            depth: None,
            include_residuals: true,
            angle_offset_deg: 0.0,
        }
    }

    /// Two orientations, half-octave spacing, first axis at `angle_deg`.
    pub fn axial(angle_deg: f64) -> Self {
        PyramidSpec {
            angle_offset_deg: angle_deg,
            ..PyramidSpec::new(2, Bandwidth::HalfOctave)
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.orientations < 2 {
            return Err(invalid(format!(
                "a steerable pyramid needs at least 2 orientations, got {}",
                self.orientations
            )));
        }
        if !self.angle_offset_deg.is_finite() {
            return Err(invalid("pyramid angle must be finite"));
        }
        Ok(())
    }

    fn scale_cutoff(&self, j: usize) -> f64 {
        (2.0f64).powf(-(j as f64) * self.bandwidth.octave_fraction())
    }

    /// Deepest band count for an `h × w` frame.
    pub fn max_depth(&self, h: usize, w: usize) -> usize {
        let mut j = 0;
        loop {
            let c = self.scale_cutoff(j);
            if crop_len(h, c) < MIN_BAND_SIZE || crop_len(w, c) < MIN_BAND_SIZE {
                return j;
            }
            j += 1;
        }
    }
}

/// Side length of the grid holding everything below normalized radius `cutoff`.
fn crop_len(n: usize, cutoff: f64) -> usize {
    let half = (n as f64 * cutoff / 2.0).floor() as usize;
    (2 * half + 2).min(n)
}

/// Raised-cosine low-pass: 1 below `cutoff / 2^width`, 0 above `cutoff`.
fn lowpass_window(rho: f64, cutoff: f64) -> f64 {
    if rho <= 0.0 {
        return 1.0;
    }
    let t = (rho / cutoff).log2() / TRANSITION_OCTAVES + 1.0;
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        (std::f64::consts::FRAC_PI_2 * t).cos()
    }
}

fn angular_gain(k: usize) -> f64 {
    // sqrt(2) * 2^(K-1) (K-1)! / sqrt(K (2(K-1))!)
    let kf = k as f64;
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    std::f64::consts::SQRT_2 * 2f64.powi(k as i32 - 1) * fact(k - 1) / (kf * fact(2 * (k - 1))).sqrt()
}

#[derive(Debug, Clone)]
struct Tap {
    big: u32,
    small: u32,
    weight: f64,
}

#[derive(Debug, Clone)]
struct CropFilter {
    height: usize,
    width: usize,
    taps: Vec<Tap>,
}

#[derive(Debug, Clone)]
struct BandFilter {
    scale: usize,
    orientation: usize,
    crop: CropFilter,
}

/// Precomputed frequency responses for one frame size and spec.
#[derive(Debug, Clone)]
pub struct FilterBank {
    spec: PyramidSpec,
    height: usize,
    width: usize,
    depth: usize,
    highpass: Vec<f64>,
    bands: Vec<BandFilter>,
    lowpass: CropFilter,
}

/// One oriented subband.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub scale: usize,
    pub orientation: usize,
    pub height: usize,
    pub width: usize,
    pub coeffs: Vec<Complex64>,
}

/// A real-valued residual grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteerablePyramid {
    pub spec: PyramidSpec,
    pub source_dims: (usize, usize),
    pub depth: usize,
    /// Scale-major, orientation-minor.
    pub bands: Vec<Band>,
    pub highpass: Option<Residual>,
    pub lowpass: Option<Residual>,
}

impl FilterBank {
    pub fn new(height: usize, width: usize, spec: &PyramidSpec) -> Result<Self> {
        spec.validate()?;
        if height < MIN_FRAME_SIZE || width < MIN_FRAME_SIZE {
            return Err(dims(format!(
                "pyramid input must be at least {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE}, got {height}x{width}"
            )));
        }
        let max_depth = spec.max_depth(height, width);
        let depth = spec.depth.unwrap_or(max_depth);
        if depth == 0 || depth > max_depth {
            return Err(dims(format!(
                "{height}x{width} frame supports 1..={max_depth} pyramid levels, requested {depth}"
            )));
        }

        let n = height * width;
        let mut rho = vec![0.0; n];
        let mut theta = vec![0.0; n];
        for ky in 0..height {
            let fy = 2.0 * signed_index(ky, height) as f64 / height as f64;
            for kx in 0..width {
                let fx = 2.0 * signed_index(kx, width) as f64 / width as f64;
                rho[ky * width + kx] = (fx * fx + fy * fy).sqrt();
                theta[ky * width + kx] = fy.atan2(fx);
            }
        }

        let highpass = rho
            .iter()
            .map(|&r| {
                let m = lowpass_window(r, spec.scale_cutoff(0));
                (1.0 - m * m).max(0.0).sqrt()
            })
            .collect();

        let k = spec.orientations;
        let gain = angular_gain(k);
        let offset = spec.angle_offset_deg.to_radians();
        let mut bands = Vec::with_capacity(depth * k);
        for j in 0..depth {
            let (outer, inner) = (spec.scale_cutoff(j), spec.scale_cutoff(j + 1));
            for o in 0..k {
                let axis = offset + o as f64 * std::f64::consts::PI / k as f64;
                let crop = CropFilter::build(height, width, outer, |i| {
                    let mo = lowpass_window(rho[i], outer);
                    let mi = lowpass_window(rho[i], inner);
                    let radial = (mo * mo - mi * mi).max(0.0).sqrt();
                    if radial == 0.0 {
                        return 0.0;
                    }
                    let c = (theta[i] - axis).cos();
                    if c > 0.0 {
                        radial * gain * c.powi(k as i32 - 1)
                    } else {
                        0.0
                    }
                });
                bands.push(BandFilter {
                    scale: j,
                    orientation: o,
                    crop,
                });
            }
        }
        let cutoff = spec.scale_cutoff(depth);
        let lowpass = CropFilter::build(height, width, cutoff, |i| lowpass_window(rho[i], cutoff));

        Ok(FilterBank {
            spec: spec.clone(),
            height,
            width,
            depth,
            highpass,
            bands,
            lowpass,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn spec(&self) -> &PyramidSpec {
        &self.spec
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Per-frequency sum of squared responses, with oriented bands
    /// symmetrized over ±ω as seen by a real-valued signal.
    pub fn squared_response_sum(&self) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        let mut total: Vec<f64> = self.highpass.iter().map(|v| v * v).collect();
        let mirror = |i: usize| {
            let (y, x) = (i / w, i % w);
            ((h - y) % h) * w + (w - x) % w
        };
        for band in &self.bands {
            let mut dense = vec![0.0; n];
            for t in &band.crop.taps {
                dense[t.big as usize] = t.weight;
            }
            for i in 0..n {
                let m = dense[mirror(i)];
                total[i] += 0.5 * (dense[i] * dense[i] + m * m);
            }
        }
        for t in &self.lowpass.taps {
            total[t.big as usize] += t.weight * t.weight;
        }
        total
    }

    pub fn build(&self, frame: &Frame) -> Result<SteerablePyramid> {
        if frame.channels() != 1 {
            return Err(dims("pyramids operate on single-channel frames"));
        }
        if (frame.height(), frame.width()) != (self.height, self.width) {
            return Err(dims(format!(
                "filter bank is {}x{}, frame is {}x{}",
                self.height,
                self.width,
                frame.height(),
                frame.width()
            )));
        }
        let (h, w) = (self.height, self.width);
        let norm = (h * w) as f64;
        let mut spectrum: Vec<Complex64> =
            frame.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2d(&mut spectrum, h, w, false);

        let bands = self
            .bands
            .iter()
            .map(|b| Band {
                scale: b.scale,
                orientation: b.orientation,
                height: b.crop.height,
                width: b.crop.width,
                coeffs: b.crop.analyze(&spectrum, norm),
            })
            .collect();

        let (highpass, lowpass) = if self.spec.include_residuals {
            let mut hp: Vec<Complex64> = spectrum
                .iter()
                .zip(&self.highpass)
                .map(|(s, g)| s * g)
                .collect();
            fft2d(&mut hp, h, w, true);
            let hp = Residual {
                height: h,
                width: w,
                data: hp.iter().map(|c| c.re / norm).collect(),
            };
            let lp = Residual {
                height: self.lowpass.height,
                width: self.lowpass.width,
                data: self
                    .lowpass
                    .analyze(&spectrum, norm)
                    .iter()
                    .map(|c| c.re)
                    .collect(),
            };
            (Some(hp), Some(lp))
        } else {
            (None, None)
        };

        Ok(SteerablePyramid {
            spec: self.spec.clone(),
            source_dims: (h, w),
            depth: self.depth,
            bands,
            highpass,
            lowpass,
        })
    }

    pub fn collapse(&self, pyr: &SteerablePyramid) -> Result<Frame> {
        let (h, w) = (self.height, self.width);
        if pyr.source_dims != (h, w) || pyr.bands.len() != self.bands.len() {
            return Err(dims("pyramid does not match filter bank"));
        }
        let norm = (h * w) as f64;
        let mut acc = vec![Complex64::default(); h * w];
        for (filter, band) in self.bands.iter().zip(&pyr.bands) {
            if band.height != filter.crop.height
                || band.width != filter.crop.width
                || band.coeffs.len() != band.height * band.width
            {
                return Err(dims(format!(
                    "band ({}, {}) has inconsistent dimensions",
                    band.scale, band.orientation
                )));
            }
            filter.crop.synthesize(band.coeffs.clone(), norm, &mut acc);
        }
        if let Some(hp) = &pyr.highpass {
            if hp.data.len() != h * w {
                return Err(dims("high-pass residual has wrong size"));
            }
            let mut s: Vec<Complex64> = hp.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft2d(&mut s, h, w, false);
            for ((a, s), g) in acc.iter_mut().zip(&s).zip(&self.highpass) {
                *a += s * g;
            }
        }
        if let Some(lp) = &pyr.lowpass {
            if lp.height != self.lowpass.height || lp.width != self.lowpass.width {
                return Err(dims("low-pass residual has wrong size"));
            }
            let coeffs = lp.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.lowpass.synthesize(coeffs, norm, &mut acc);
        }
        fft2d(&mut acc, h, w, true);
        Frame::new(h, w, 1, acc.iter().map(|c| c.re / norm).collect())
    }
}

impl CropFilter {
    fn build(height: usize, width: usize, cutoff: f64, weight: impl Fn(usize) -> f64) -> Self {
        let ch = crop_len(height, cutoff);
        let cw = crop_len(width, cutoff);
        let reach = |n: usize, c: usize| -> isize {
            if c == n {
                n as isize
            } else {
                (c as isize - 2) / 2
            }
        };
        let (ry, rx) = (reach(height, ch), reach(width, cw));
        let mut taps = Vec::new();
        for ky in 0..height {
            let sy = signed_index(ky, height);
            if sy.abs() > ry {
                continue;
            }
            for kx in 0..width {
                let sx = signed_index(kx, width);
                if sx.abs() > rx {
                    continue;
                }
                let big = ky * width + kx;
                let g = weight(big);
                if g == 0.0 {
                    continue;
                }
                let small = sy.rem_euclid(ch as isize) as usize * cw + sx.rem_euclid(cw as isize) as usize;
                taps.push(Tap {
                    big: big as u32,
                    small: small as u32,
                    weight: g,
                });
            }
        }
        CropFilter {
            height: ch,
            width: cw,
            taps,
        }
    }

    /// Filtered signal sampled on the cropped grid.
    fn analyze(&self, spectrum: &[Complex64], norm: f64) -> Vec<Complex64> {
        let mut small = vec![Complex64::default(); self.height * self.width];
        for t in &self.taps {
            small[t.small as usize] = spectrum[t.big as usize] * t.weight;
        }
        fft2d(&mut small, self.height, self.width, true);
        small.iter_mut().for_each(|c| *c /= norm);
        small
    }

    /// Adjoint of `analyze`, accumulated into a full-size spectrum.
    fn synthesize(&self, mut coeffs: Vec<Complex64>, norm: f64, acc: &mut [Complex64]) {
        fft2d(&mut coeffs, self.height, self.width, false);
        let scale = norm / (self.height * self.width) as f64;
        for t in &self.taps {
            acc[t.big as usize] += coeffs[t.small as usize] * (t.weight * scale);
        }
    }
}

impl SteerablePyramid {
    pub fn band(&self, scale: usize, orientation: usize) -> Result<&Band> {
        if scale >= self.depth || orientation >= self.spec.orientations {
            return Err(invalid(format!(
                "band ({scale}, {orientation}) out of range for depth {} and {} orientations",
                self.depth, self.spec.orientations
            )));
        }
        Ok(&self.bands[scale * self.spec.orientations + orientation])
    }

    /// Energy of every component expressed at full resolution, in order:
    /// high-pass, bands..., low-pass.
    pub fn energies(&self) -> Vec<f64> {
        let full = (self.source_dims.0 * self.source_dims.1) as f64;
        let mut out = Vec::with_capacity(self.bands.len() + 2);
        if let Some(hp) = &self.highpass {
            out.push(hp.data.iter().map(|v| v * v).sum());
        }
        for b in &self.bands {
            let e: f64 = b.coeffs.iter().map(|c| c.norm_sqr()).sum();
            out.push(e * full / (b.height * b.width) as f64);
        }
        if let Some(lp) = &self.lowpass {
            let e: f64 = lp.data.iter().map(|v| v * v).sum();
            out.push(e * full / (lp.height * lp.width) as f64);
        }
        out
    }

    /// Write one AXTF tensor per band and residual plus a `pyramid.txt` manifest.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::new();
        let s = &self.spec;
        let _ = writeln!(manifest, "orientations {}", s.orientations);
        let _ = writeln!(manifest, "octave_fraction {}", s.bandwidth.octave_fraction());
        let _ = writeln!(manifest, "depth {}", self.depth);
        let _ = writeln!(manifest, "include_residuals {}", s.include_residuals as u8);
        let _ = writeln!(manifest, "angle_offset_deg {}", s.angle_offset_deg);
        let _ = writeln!(manifest, "source_dims {} {}", self.source_dims.0, self.source_dims.1);
        for b in &self.bands {
            let name = format!("band_{:02}_{:02}.axtf", b.scale, b.orientation);
            let data = b.coeffs.iter().flat_map(|c| [c.re as f32, c.im as f32]).collect();
            Tensor::new(vec![b.height, b.width, 2], data)?.save(dir.join(&name))?;
            let _ = writeln!(manifest, "band {} {} {}", b.scale, b.orientation, name);
        }
        for (label, res) in [("highpass", &self.highpass), ("lowpass", &self.lowpass)] {
            if let Some(r) = res {
                let name = format!("{label}.axtf");
                let data = r.data.iter().map(|&v| v as f32).collect();
                Tensor::new(vec![r.height, r.width], data)?.save(dir.join(&name))?;
                let _ = writeln!(manifest, "{label} {name}");
            }
        }
        let path = dir.join("pyramid.txt");
        fs::write(&path, manifest).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("pyramid.txt");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let bad = |msg: &str| Error::Format(format!("pyramid manifest: {msg}"));
        let mut spec = PyramidSpec::new(2, Bandwidth::Octave);
        let mut depth = 0;
        let mut source_dims = (0, 0);
        let mut bands = Vec::new();
        let mut highpass = None;
        let mut lowpass = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<usize> {
                parts
                    .get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(line))
            };
            match parts[0] {
                "orientations" => spec.orientations = num(1)?,
                "octave_fraction" => {
                    spec.bandwidth = match parts.get(1).copied() {
                        Some("1") => Bandwidth::Octave,
                        Some("0.5") => Bandwidth::HalfOctave,
                        _ => return Err(bad(line)),
                    }
                }
                "depth" => depth = num(1)?,
                "include_residuals" => spec.include_residuals = num(1)? != 0,
                "angle_offset_deg" => {
                    spec.angle_offset_deg = parts
                        .get(1)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad(line))?
                }
                "source_dims" => source_dims = (num(1)?, num(2)?),
                "band" => {
                    let file = parts.get(3).ok_or_else(|| bad(line))?;
                    let t = Tensor::load(dir.join(file))?;
                    let (h, w) = match t.dims.as_slice() {
                        [h, w, 2] => (*h, *w),
                        _ => return Err(bad("band tensor must be (h, w, 2)")),
                    };
                    bands.push(Band {
                        scale: num(1)?,
                        orientation: num(2)?,
                        height: h,
                        width: w,
                        coeffs: t
                            .data
                            .chunks_exact(2)
                            .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
                            .collect(),
                    });
                }
                "highpass" | "lowpass" => {
                    let file = parts.get(1).ok_or_else(|| bad(line))?;
                    let t = Tensor::load(dir.join(file))?;
                    let (h, w) = match t.dims.as_slice() {
                        [h, w] => (*h, *w),
                        _ => return Err(bad("residual tensor must be (h, w)")),
                    };
                    let r = Residual {
                        height: h,
                        width: w,
                        data: t.data.iter().map(|&v| v as f64).collect(),
                    };
                    if parts[0] == "highpass" {
                        highpass = Some(r);
                    } else {
                        lowpass = Some(r);
                    }
                }
                _ => return Err(bad(line)),
            }
        }
        spec.depth = Some(depth);
        Ok(SteerablePyramid {
            spec,
            source_dims,
            depth,
            bands,
            highpass,
            lowpass,
        })
    }
}

pub fn build_csp(frame: &Frame, spec: &PyramidSpec) -> Result<SteerablePyramid> {
    FilterBank::new(frame.height(), frame.width(), spec)?.build(frame)
}

pub fn collapse_csp(pyr: &SteerablePyramid) -> Result<Frame> {
    let (h, w) = pyr.source_dims;
    let spec = PyramidSpec {
        depth: Some(pyr.depth),
        ..pyr.spec.clone()
    };
    FilterBank::new(h, w, &spec)?.collapse(pyr)
}

/// Element-wise argument of a band's coefficients, in (-π, π].
pub fn band_phase(pyr: &SteerablePyramid, scale: usize, orientation: usize) -> Result<Vec<f64>> {
    Ok(pyr
        .band(scale, orientation)?
        .coeffs
        .iter()
        .map(|c| wrap_phase(c.arg()))
        .collect())
}

/// Wrap an angle into (-π, π].
#[inline]
pub fn wrap_phase(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
