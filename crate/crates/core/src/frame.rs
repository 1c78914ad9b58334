//! Frames: real-valued H×W×C images with values nominally in [0, 1].

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::axtf::Tensor;
use crate::error::{dims, invalid, Error, Result};

/// A row-major, channel-interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

/// How samples outside the frame are resolved when warping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Replicate,
    /// Mirror about the edge, repeating the edge pixel (`cba|abc`).
    Reflect,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(dims(format!("frame must be non-empty, got {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(dims(format!("frames have 1 or 3 channels, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(dims(format!(
                "{}x{}x{} frame needs {} values, got {}",
                height,
                width,
                channels,
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("frame contains non-finite values"));
        }
        Ok(Frame {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Frame::new(height, width, channels, vec![value; height * width * channels])
            .expect("valid frame dimensions")
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Frame::new(height, width, channels, data).expect("valid frame")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.dims() == other.dims()
    }

    pub fn ensure_same_dims(&self, other: &Frame) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(dims(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )))
        }
    }

    /// Extract one channel as a single-channel frame.
    pub fn channel(&self, c: usize) -> Frame {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Frame {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Interleave single-channel planes into one frame.
    pub fn from_planes(planes: &[Frame]) -> Result<Frame> {
        let first = planes
            .first()
            .ok_or_else(|| invalid("no planes to merge"))?;
        for p in planes {
            if p.channels != 1 || p.height != first.height || p.width != first.width {
                return Err(dims("planes must be single-channel with equal dims"));
            }
        }
        let n = first.height * first.width;
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Frame::new(first.height, first.width, planes.len(), data)
    }

    /// Mean over channels.
    pub fn to_gray(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let c = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect();
        Frame {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Frame {
        Frame {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&self) -> Frame {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Frame> {
        if top + height > self.height || left + width > self.width {
            return Err(dims("crop window exceeds frame"));
        }
        Ok(Frame::from_fn(height, width, self.channels, |y, x, c| {
            self.get(y + top, x + left, c)
        }))
    }

    pub fn max_abs_diff(&self, other: &Frame) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_diff(&self, other: &Frame) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum();
        s / self.data.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sample with clamped (replicate) or mirrored integer coordinates.
    #[inline]
    pub fn sample_int(&self, y: isize, x: isize, c: usize, boundary: Boundary) -> f64 {
        let yy = resolve_index(y, self.height, boundary);
        let xx = resolve_index(x, self.width, boundary);
        self.get(yy, xx, c)
    }

    /// Bilinear sample at a real position (x = column, y = row).
    #[inline]
    pub fn sample_bilinear(&self, y: f64, x: f64, c: usize, boundary: Boundary) -> f64 {
        let y0 = y.floor();
        let x0 = x.floor();
        let fy = y - y0;
        let fx = x - x0;
        let (yi, xi) = (y0 as isize, x0 as isize);
        let a = self.sample_int(yi, xi, c, boundary);
        if fx == 0.0 && fy == 0.0 {
            return a;
        }
        let b = self.sample_int(yi, xi + 1, c, boundary);
        let top = a + fx * (b - a);
        if fy == 0.0 {
            return top;
        }
        let cc = self.sample_int(yi + 1, xi, c, boundary);
        let d = self.sample_int(yi + 1, xi + 1, c, boundary);
        let bottom = cc + fx * (d - cc);
        top + fy * (bottom - top)
    }
}

#[inline]
fn resolve_index(i: isize, n: usize, boundary: Boundary) -> usize {
    let n = n as isize;
    match boundary {
        Boundary::Replicate => i.clamp(0, n - 1) as usize,
        Boundary::Reflect => {
            if n == 1 {
                return 0;
            }
            let period = 2 * n;
            let mut m = i.rem_euclid(period);
            if m >= n {
                m = period - 1 - m;
            }
            m as usize
        }
    }
}

/// Shift a frame by (dx, dy) pixels: `out(x, y) = in(x - dx, y - dy)`.
pub fn translate_bilinear(frame: &Frame, dx: f64, dy: f64, boundary: Boundary) -> Result<Frame> {
    if !dx.is_finite() || !dy.is_finite() {
        return Err(invalid("translation must be finite"));
    }
    let limit = frame.height.min(frame.width) as f64 / 2.0;
    if dx.abs() >= limit || dy.abs() >= limit {
        return Err(invalid(format!(
            "translation ({dx}, {dy}) exceeds half the frame size {limit}"
        )));
    }
    let (h, w, ch) = frame.dims();
    let mut data = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        let sy = y as f64 - dy;
        for x in 0..w {
            let sx = x as f64 - dx;
            for c in 0..ch {
                data.push(frame.sample_bilinear(sy, sx, c, boundary));
            }
        }
    }
    Ok(Frame {
        height: h,
        width: w,
        channels: ch,
        data,
    })
}

/// Peak signal-to-noise ratio in dB for a [0, 1] dynamic range.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}

/// Load a PNG (8- or 16-bit) or an AXTF tensor of shape (H, W) or (H, W, C).
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let is_axtf = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("axtf"));
    if is_axtf {
        return frame_from_tensor(&Tensor::load(path)?);
    }
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    frame_from_image(img).map_err(|message| Error::Image {
        path: path.to_path_buf(),
        message,
    })
}

fn frame_from_image(img: DynamicImage) -> std::result::Result<Frame, String> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLumaA8(_) => {
            let b = img.to_luma8();
            (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageRgba8(_) => {
            let b = img.to_rgb8();
            (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLuma16(b) => {
            (1, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageLumaA16(_) => {
            let b = img.to_luma16();
            (1, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(b) => {
            (3, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgba16(_) => {
            let b = img.to_rgb16();
            (3, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        other => return Err(format!("unsupported bit depth {:?}", other.color())),
    };
    Frame::new(h, w, channels, data).map_err(|e| e.to_string())
}

pub fn frame_from_tensor(t: &Tensor) -> Result<Frame> {
    let (h, w, c) = match t.dims.as_slice() {
        [h, w] => (*h, *w, 1),
        [h, w, c] => (*h, *w, *c),
        other => return Err(dims(format!("frame tensor must be rank 2 or 3, got {other:?}"))),
    };
    let frame = Frame::new(h, w, c, t.data.iter().map(|&v| v as f64).collect())?;
    Ok(frame.clamp01())
}

pub fn frame_to_tensor(frame: &Frame) -> Tensor {
    Tensor {
        dims: vec![frame.height, frame.width, frame.channels],
        data: frame.data.iter().map(|&v| v as f32).collect(),
    }
}

/// Quantize to 8 bits per channel (clamped, rounded to nearest).
pub fn to_u8(frame: &Frame) -> Vec<u8> {
    frame
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Write an 8-bit PNG (grayscale or RGB).
pub fn save_png(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_u8(frame);
    let (w, h) = (frame.width as u32, frame.height as u32);
    let res = if frame.channels == 1 {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer size matches")
            .save(path)
    } else {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer size matches")
            .save(path)
    };
    res.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// Load every PNG or AXTF frame in a directory, ordered by the number in the
/// file name (then by name).
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Vec<Frame>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("axtf"))
        })
        .collect();
    if paths.is_empty() {
        return Err(invalid(format!("{} holds no frames", dir.display())));
    }
    let key = |p: &PathBuf| {
        let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
        let digits: String = name.chars().filter(|c| c.is_ascii_digit()).collect();
        (digits.parse::<u64>().unwrap_or(u64::MAX), name)
    };
    paths.sort_by_key(key);
    let frames: Vec<Frame> = paths.iter().map(load_frame).collect::<Result<_>>()?;
    for f in &frames[1..] {
        frames[0].ensure_same_dims(f)?;
    }
    Ok(frames)
}

/// Write frames as `frame_00000.png`, `frame_00001.png`, ...
pub fn save_sequence(frames: &[Frame], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(format!("frame_{i:05}.png"));
            save_png(f, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences_round_trip_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..12).map(|i| Frame::filled(4, 5, 3, i as f64 / 255.0)).collect();
        save_sequence(&frames, dir.path()).unwrap();
        let back = load_sequence(dir.path()).unwrap();
        assert_eq!(back, frames);
        let other = tempfile::tempdir().unwrap();
        for (name, v) in [("f10.png", 10.0), ("f2.png", 2.0), ("f1.png", 1.0)] {
            save_png(&Frame::filled(2, 2, 1, v / 255.0), other.path().join(name)).unwrap();
        }
        let vals: Vec<f64> = load_sequence(other.path()).unwrap().iter().map(|f| f.get(0, 0, 0) * 255.0).collect();
        assert_eq!(vals, vec![1.0, 2.0, 10.0]);
        assert!(load_sequence(tempfile::tempdir().unwrap().path()).is_err());
    }

    #[test]
    fn constant_frame_is_translation_invariant() {
        let f = Frame::filled(16, 20, 3, 0.7);
        for &(dx, dy) in &[(0.3, -2.7), (5.0, 1.0), (-7.49, 3.25)] {
            for b in [Boundary::Replicate, Boundary::Reflect] {
                assert_eq!(translate_bilinear(&f, dx, dy, b).unwrap(), f);
            }
        }
    }

    #[test]
    fn integer_shift_moves_impulse() {
        let mut f = Frame::filled(32, 32, 1, 0.0);
        f.set(10, 10, 0, 1.0);
        let g = translate_bilinear(&f, 1.0, 0.0, Boundary::Replicate).unwrap();
        assert_eq!(g.get(10, 11, 0), 1.0);
        assert_eq!(g.get(10, 10, 0), 0.0);
        assert_eq!(g.data().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn half_pixel_shift_on_ramp() {
        let w = 40;
        let f = Frame::from_fn(8, w, 1, |_, x, _| x as f64 / w as f64);
        let g = translate_bilinear(&f, 0.5, 0.0, Boundary::Replicate).unwrap();
        for y in 0..8 {
            for x in 1..w - 1 {
                let expected = f.get(y, x, 0) - 0.5 / w as f64;
                assert!((g.get(y, x, 0) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_finite_and_oversized_shift() {
        let f = Frame::filled(8, 8, 1, 0.5);
        assert!(translate_bilinear(&f, f64::NAN, 0.0, Boundary::Replicate).is_err());
        assert!(translate_bilinear(&f, 0.0, 4.0, Boundary::Replicate).is_err());
    }

    #[test]
    fn reflect_mirrors_about_edge() {
        assert_eq!(resolve_index(-1, 5, Boundary::Reflect), 0);
        assert_eq!(resolve_index(-2, 5, Boundary::Reflect), 1);
        assert_eq!(resolve_index(5, 5, Boundary::Reflect), 4);
        assert_eq!(resolve_index(6, 5, Boundary::Reflect), 3);
        assert_eq!(resolve_index(-3, 5, Boundary::Replicate), 0);
    }

    #[test]
    fn affine_images_survive_forward_and_back_shift() {
        let f = Frame::from_fn(24, 24, 1, |y, x, _| 0.2 + 0.01 * x as f64 + 0.015 * y as f64);
        let g = translate_bilinear(&f, 1.3, -0.6, Boundary::Replicate).unwrap();
        let back = translate_bilinear(&g, -1.3, 0.6, Boundary::Replicate).unwrap();
        for y in 4..20 {
            for x in 4..20 {
                assert!((back.get(y, x, 0) - f.get(y, x, 0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gray_is_channel_mean() {
        let f = Frame::from_fn(2, 2, 3, |_, _, c| c as f64 * 0.25);
        assert!(f.to_gray().data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }
}
