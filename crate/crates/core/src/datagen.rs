//! Synthetic layered scenes with per-layer translations and axially
//! magnified targets.
//!
//! A scene is a stack of layers (background first). Each layer is moved by
//! its own translation `d`; the target moves it by the axially magnified
//! translation instead. Layers composite back to front through binary masks.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::filters::gaussian_blur;
use crate::frame::{load_frame, save_png, translate_bilinear, Boundary, Frame};
use crate::magnify::MagMap;
use crate::noise::{add_noise, quantize_with_dither, NoiseSpec};
use crate::rng::{self, Rng};

/// Per-component cap on input motion.
pub const MAX_INPUT_MOTION: f64 = 10.0;
/// Per-component cap on magnified motion before projection.
pub const MAX_MAGNIFIED_MOTION: f64 = 30.0;

pub const SUBPIXEL_LEVELS: usize = 15;
pub const SUBPIXEL_RANGE: (f64, f64) = (0.04, 1.0);
pub const NOISE_LEVELS: usize = 21;
pub const NOISE_RANGE: (f64, f64) = (0.01, 100.0);
pub const NOISE_TEST_MOTION: f64 = 0.05;
/// Amplified motion along the chosen axis in the evaluation sets.
pub const EVAL_TARGET_MOTION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub image: Frame,
    /// Single-channel {0, 1} mask.
    pub mask: Frame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| invalid("layer stack is empty"))?;
        let (h, w, _) = first.image.dims();
        for (k, layer) in self.layers.iter().enumerate() {
            let (lh, lw, _) = layer.image.dims();
            if (lh, lw) != (h, w) || layer.mask.dims() != (h, w, 1) {
                return Err(crate::error::dims(format!(
                    "layer {k} is {lh}x{lw} with a {:?} mask, expected {h}x{w}",
                    layer.mask.dims()
                )));
            }
            if layer.image.channels() != first.image.channels() {
                return Err(crate::error::dims("layers differ in channel count"));
            }
        }
        if first.mask.data().iter().any(|&m| m != 1.0) {
            return Err(invalid("background mask must be all ones"));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        let (h, w, _) = self.layers[0].image.dims();
        (h, w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionAssignment {
    /// (dx, dy) per layer.
    pub translations: Vec<[f64; 2]>,
    /// (α^φ, α^⊥) per layer.
    pub factors: Vec<[f64; 2]>,
    pub angle_deg: f64,
}

impl MotionAssignment {
    pub fn magnified(&self) -> Vec<[f64; 2]> {
        self.translations
            .iter()
            .zip(&self.factors)
            .map(|(d, a)| magnified_translation(*d, *a, self.angle_deg))
            .collect()
    }
}

/// Which kind of sample set to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    None,
    /// Motion magnitude sweep; one axis amplified to 10 px, the other to 5 px.
    Subpixel,
    /// Motion magnitude sweep with equal factors on both axes.
    SubpixelGeneric,
    /// Noise factor sweep at fixed small motion.
    Noise,
}

impl EvalMode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "train" | "none" => EvalMode::None,
            "subpixel" => EvalMode::Subpixel,
            "subpixel-generic" => EvalMode::SubpixelGeneric,
            "noise" => EvalMode::Noise,
            other => return Err(invalid(format!("unknown dataset mode `{other}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::None => "train",
            EvalMode::Subpixel => "subpixel",
            EvalMode::SubpixelGeneric => "subpixel-generic",
            EvalMode::Noise => "noise",
        }
    }

    pub fn levels(self) -> usize {
        match self {
            EvalMode::None => 1,
            EvalMode::Subpixel | EvalMode::SubpixelGeneric => SUBPIXEL_LEVELS,
            EvalMode::Noise => NOISE_LEVELS,
        }
    }

    /// The swept quantity at `level` (motion in px, or noise factor).
    pub fn level_value(self, level: usize) -> f64 {
        match self {
            EvalMode::None => 0.0,
            EvalMode::Subpixel | EvalMode::SubpixelGeneric => log_space(SUBPIXEL_RANGE, SUBPIXEL_LEVELS, level),
            EvalMode::Noise => log_space(NOISE_RANGE, NOISE_LEVELS, level),
        }
    }
}

/// Where layer imagery comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SceneSource {
    #[default]
    Procedural,
    /// `backgrounds/*.png`, `objects/*.png` and same-named `masks/*.png`.
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    /// Samples for training sets; samples per level for evaluation sets.
    pub count: usize,
    pub seed: u64,
    pub size: usize,
    /// Extra border rendered around the output crop so that large
    /// translations do not drag replicated edges into view.
    pub margin: usize,
    /// Total layers including the background.
    pub k_min: usize,
    pub k_max: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    pub source: SceneSource,
    pub eval_mode: EvalMode,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 1,
            seed: 0,
            size: 384,
            margin: 0,
            k_min: 8,
            k_max: 15,
            alpha_min: 1.0,
            alpha_max: 80.0,
            angle_min: 0.0,
            angle_max: 90.0,
            source: SceneSource::Procedural,
            eval_mode: EvalMode::None,
        }
    }
}

impl DatasetConfig {
    pub fn canvas(&self) -> usize {
        self.size + 2 * self.margin
    }

    pub fn total_samples(&self) -> usize {
        self.count * self.eval_mode.levels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return Err(invalid(format!("sample size must be >= 16, got {}", self.size)));
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(invalid(format!(
                "layer count range [{}, {}] is invalid",
                self.k_min, self.k_max
            )));
        }
        if !(self.alpha_min >= 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return Err(invalid(format!(
                "alpha range [{}, {}] is invalid",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.angle_min <= self.angle_max) || !self.angle_max.is_finite() || !self.angle_min.is_finite() {
            return Err(invalid("angle range is invalid"));
        }
        let reach = match self.eval_mode {
            EvalMode::None => MAX_MAGNIFIED_MOTION * std::f64::consts::SQRT_2,
            EvalMode::Subpixel | EvalMode::SubpixelGeneric | EvalMode::Noise => {
                EVAL_TARGET_MOTION * 1.25f64.sqrt() + 1.0
            }
        };
        if self.canvas() as f64 / 2.0 <= reach {
            return Err(invalid(format!(
                "canvas {} (size {} + margin {}) is too small for translations up to {reach:.1} px",
                self.canvas(),
                self.size,
                self.margin
            )));
        }
        Ok(())
    }
}

fn log_space(range: (f64, f64), n: usize, i: usize) -> f64 {
    if n == 1 {
        return range.0;
    }
    if i == n - 1 {
        return range.1;
    }
    let t = i as f64 / (n - 1) as f64;
    (range.0.ln() + t * (range.1.ln() - range.0.ln())).exp()
}

/// `α^φ (d·p) p + α^⊥ (d·q) q` with `p = (cos φ, sin φ)`, `q = (−sin φ, cos φ)`.
pub fn magnified_translation(d: [f64; 2], alpha: [f64; 2], angle_deg: f64) -> [f64; 2] {
    if alpha[0] == alpha[1] {
        return [alpha[0] * d[0], alpha[0] * d[1]];
    }
    let (s, c) = angle_deg.to_radians().sin_cos();
    let along = d[0] * c + d[1] * s;
    let across = -d[0] * s + d[1] * c;
    let (a, b) = (alpha[0] * along, alpha[1] * across);
    [a * c - b * s, a * s + b * c]
}

/// Back-to-front compositing: `out = Ω·L + (1 − Ω)·out`.
pub fn compose(stack: &LayerStack) -> Result<Frame> {
    stack.validate()?;
    let images: Vec<&Frame> = stack.layers.iter().map(|l| &l.image).collect();
    let masks: Vec<&Frame> = stack.layers.iter().map(|l| &l.mask).collect();
    compose_parts(&images, &masks)
}

fn compose_parts(images: &[&Frame], masks: &[&Frame]) -> Result<Frame> {
    let mut out = images[0].clone();
    let ch = out.channels();
    for (img, mask) in images.iter().zip(masks).skip(1) {
        img.ensure_same_dims(&out)?;
        let m = mask.data();
        for ((o, l), i) in out.data_mut().iter_mut().zip(img.data()).zip(0..) {
            let a = m[i / ch];
            *o = a * l + (1.0 - a) * *o;
        }
    }
    Ok(out)
}

/// Composite the stack with every layer translated by its own offset.
pub fn compose_translated(stack: &LayerStack, offsets: &[[f64; 2]]) -> Result<Frame> {
    stack.validate()?;
    if offsets.len() != stack.layers.len() {
        return Err(invalid(format!(
            "{} offsets for {} layers",
            offsets.len(),
            stack.layers.len()
        )));
    }
    let moved: Vec<(Frame, Frame)> = stack
        .layers
        .iter()
        .zip(offsets)
        .map(|(l, d)| {
            Ok((
                translate_bilinear(&l.image, d[0], d[1], Boundary::Replicate)?,
                translate_bilinear(&l.mask, d[0], d[1], Boundary::Replicate)?,
            ))
        })
        .collect::<Result<_>>()?;
    let images: Vec<&Frame> = moved.iter().map(|m| &m.0).collect();
    let masks: Vec<&Frame> = moved.iter().map(|m| &m.1).collect();
    compose_parts(&images, &masks)
}

/// Per-pixel factors of the topmost frame-1 layer.
pub fn magnification_map(stack: &LayerStack, factors: &[[f64; 2]]) -> MagMap {
    let (h, w) = stack.dims();
    let mut map = MagMap::constant(h, w, factors[0]);
    for (layer, a) in stack.layers.iter().zip(factors).skip(1) {
        for (slot, &m) in map.data.iter_mut().zip(layer.mask.data()) {
            if m > 0.5 {
                *slot = *a;
            }
        }
    }
    map
}

// ---------------------------------------------------------------------------
// Procedural imagery

fn unit_noise(rng: &mut Rng, h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut v = gaussian_blur(&raw, h, w, sigma);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    v
}

/// Filtered-noise colour texture with a linear gradient, values in [0, 1].
pub fn procedural_texture(rng: &mut Rng, h: usize, w: usize) -> Frame {
    let (sf, sc) = (rng.random_range(0.6..1.6), rng.random_range(2.0..6.0));
    let fine = unit_noise(rng, h, w, sf);
    let coarse = unit_noise(rng, h, w, sc);
    let mut colour = |spread: f64| -> [f64; 3] {
        [
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
        ]
    };
    let base = colour(0.3).map(|c| c + 0.5);
    let cf = colour(0.12);
    let cc = colour(0.12);
    let cg = colour(0.25);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gs, gc) = angle.sin_cos();
    let scale = 1.0 / h.max(w) as f64;
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let g = ((x as f64 - w as f64 / 2.0) * gc + (y as f64 - h as f64 / 2.0) * gs) * scale;
            for c in 0..3 {
                data.push((base[c] + cf[c] * fine[i] + cc[c] * coarse[i] + cg[c] * g).clamp(0.0, 1.0));
            }
        }
    }
    Frame::new(h, w, 3, data).expect("finite texture")
}

/// Star-shaped blob with a few radial harmonics; exact {0, 1} values.
pub fn blob_mask(rng: &mut Rng, h: usize, w: usize, min_radius: f64, max_radius: f64) -> Frame {
    let cy = rng.random_range(0.15..0.85) * h as f64;
    let cx = rng.random_range(0.15..0.85) * w as f64;
    let r0 = rng.random_range(min_radius..max_radius);
    let harmonics: Vec<(f64, f64)> = (1..=4)
        .map(|i| {
            (
                rng.random_range(0.0..0.3) / i as f64,
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Frame::from_fn(h, w, 1, |y, x, _| {
        let (dy, dx) = (y as f64 - cy, x as f64 - cx);
        let t = dy.atan2(dx);
        let r = r0
            * (1.0
                + harmonics
                    .iter()
                    .enumerate()
                    .map(|(i, (a, p))| a * ((i + 1) as f64 * t + p).cos())
                    .sum::<f64>());
        if dx * dx + dy * dy <= r * r {
            1.0
        } else {
            0.0
        }
    })
}

/// Image pools for directory-sourced scenes.
#[derive(Debug, Clone)]
pub struct ScenePool {
    pub backgrounds: Vec<Frame>,
    pub objects: Vec<(Frame, Frame)>,
}

impl ScenePool {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let list = |sub: &str| -> Result<Vec<PathBuf>> {
            let d = dir.join(sub);
            let mut v: Vec<PathBuf> = fs::read_dir(&d)
                .map_err(|e| Error::io(&d, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "png"))
                .collect();
            v.sort();
            Ok(v)
        };
        let backgrounds = list("backgrounds")?
            .iter()
            .map(|p| load_frame(p).map(to_rgb))
            .collect::<Result<Vec<_>>>()?;
        let mut objects = Vec::new();
        for p in list("objects")? {
            let name = p.file_name().expect("listed file");
            let image = to_rgb(load_frame(&p)?);
            let mask = load_frame(dir.join("masks").join(name))?.to_gray();
            image.channel(0).ensure_same_dims(&mask)?;
            objects.push((image, mask.map(|v| if v > 0.5 { 1.0 } else { 0.0 })));
        }
        if backgrounds.is_empty() || objects.is_empty() {
            return Err(invalid(format!(
                "{} needs at least one background and one object",
                dir.display()
            )));
        }
        Ok(ScenePool { backgrounds, objects })
    }
}

fn to_rgb(f: Frame) -> Frame {
    if f.channels() == 3 {
        f
    } else {
        let g = f.channel(0);
        Frame::from_planes(&[g.clone(), g.clone(), g]).expect("same dims")
    }
}

/// Resample `src` onto an h × w grid (bilinear, stretched to fit).
fn resize(src: &Frame, h: usize, w: usize) -> Frame {
    let (sh, sw, ch) = src.dims();
    let fy = sh as f64 / h as f64;
    let fx = sw as f64 / w as f64;
    Frame::from_fn(h, w, ch, |y, x, c| {
        src.sample_bilinear((y as f64 + 0.5) * fy - 0.5, (x as f64 + 0.5) * fx - 0.5, c, Boundary::Replicate)
    })
}

/// Draw a layer stack of `canvas × canvas` layers.
pub fn sample_scene(rng: &mut Rng, config: &DatasetConfig, pool: Option<&ScenePool>) -> Result<LayerStack> {
    let n = config.canvas();
    let k = rng.random_range(config.k_min..=config.k_max);
    let full = Frame::filled(n, n, 1, 1.0);
    let mut layers = Vec::with_capacity(k);
    let size = config.size as f64;
    match (&config.source, pool) {
        (SceneSource::Procedural, _) => {
            layers.push(Layer {
                image: procedural_texture(rng, n, n),
                mask: full,
            });
            for _ in 1..k {
                let image = procedural_texture(rng, n, n);
                let mask = blob_mask(rng, n, n, 0.06 * size, 0.22 * size);
                layers.push(Layer { image, mask });
            }
        }
        (SceneSource::Directory(dir), None) => {
            return Err(invalid(format!("image pool for {} was not loaded", dir.display())));
        }
        (SceneSource::Directory(_), Some(pool)) => {
            let bg = &pool.backgrounds[rng.random_range(0..pool.backgrounds.len())];
            layers.push(Layer {
                image: resize(bg, n, n),
                mask: full,
            });
            for _ in 1..k {
                let (obj, mask) = &pool.objects[rng.random_range(0..pool.objects.len())];
                let side = rng.random_range(0.15..0.45) * size;
                let (oh, ow) = (obj.height() as f64, obj.width() as f64);
                let s = side / oh.max(ow);
                let (th, tw) = (((oh * s) as usize).max(2), ((ow * s) as usize).max(2));
                let small = resize(obj, th, tw);
                let small_mask = resize(mask, th, tw);
                let top = rng.random_range(0..=n.saturating_sub(th));
                let left = rng.random_range(0..=n.saturating_sub(tw));
                let image = Frame::from_fn(n, n, 3, |y, x, c| {
                    let yy = (y as isize - top as isize).clamp(0, th as isize - 1) as usize;
                    let xx = (x as isize - left as isize).clamp(0, tw as isize - 1) as usize;
                    small.get(yy, xx, c)
                });
                let mask = Frame::from_fn(n, n, 1, |y, x, _| {
                    let inside = y >= top && y < top + th && x >= left && x < left + tw;
                    if inside && small_mask.get(y - top, x - left, 0) > 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                });
                layers.push(Layer { image, mask });
            }
        }
    }
    Ok(LayerStack { layers })
}

/// Draw factors, angle and bounded translations for `k` layers.
pub fn sample_motion(rng: &mut Rng, k: usize, config: &DatasetConfig) -> MotionAssignment {
    let angle_deg = if config.angle_max > config.angle_min {
        rng.random_range(config.angle_min..=config.angle_max)
    } else {
        config.angle_min
    };
    let mut alpha = || {
        if config.alpha_max > config.alpha_min {
            rng.random_range(config.alpha_min..=config.alpha_max)
        } else {
            config.alpha_min
        }
    };
    let factors: Vec<[f64; 2]> = (0..k).map(|_| [alpha(), alpha()]).collect();
    let translations = factors
        .iter()
        .map(|a| {
            let u = motion_bound(*a);
            [rng.random_range(-u..=u), rng.random_range(-u..=u)]
        })
        .collect();
    MotionAssignment {
        translations,
        factors,
        angle_deg,
    }
}

/// `u = min(10, 30 / max(α))`.
pub fn motion_bound(alpha: [f64; 2]) -> f64 {
    let m = alpha[0].max(alpha[1]);
    if m > 0.0 {
        MAX_INPUT_MOTION.min(MAX_MAGNIFIED_MOTION / m)
    } else {
        MAX_INPUT_MOTION
    }
}

/// Seeds of the dither applied to the three rendered images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DitherSeeds {
    pub first: u64,
    pub second: u64,
    pub magnified: u64,
}

impl DitherSeeds {
    pub fn shared(seed: u64) -> Self {
        DitherSeeds {
            first: seed,
            second: seed,
            magnified: seed,
        }
    }
}

/// Where an evaluation sample sits in its sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalInfo {
    pub level: usize,
    pub x_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub frame_a: Frame,
    pub frame_b: Frame,
    pub magnified: Frame,
    pub angle_deg: f64,
    pub mag_map: MagMap,
    pub motion: MotionAssignment,
    pub eval: Option<EvalInfo>,
}

/// Unquantized renders of a sample at canvas resolution.
#[derive(Debug, Clone)]
pub struct RenderedPair {
    pub frame_a: Frame,
    pub frame_b: Frame,
    pub magnified: Frame,
    pub mag_map: MagMap,
}

pub fn render_pair(stack: &LayerStack, motion: &MotionAssignment) -> Result<RenderedPair> {
    let k = stack.layers.len();
    if motion.translations.len() != k || motion.factors.len() != k {
        return Err(invalid("motion assignment does not match the layer count"));
    }
    Ok(RenderedPair {
        frame_a: compose(stack)?,
        frame_b: compose_translated(stack, &motion.translations)?,
        magnified: compose_translated(stack, &motion.magnified())?,
        mag_map: magnification_map(stack, &motion.factors),
    })
}

fn crop_map(map: &MagMap, margin: usize, size: usize) -> MagMap {
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            data.push(map.get(y + margin, x + margin));
        }
    }
    MagMap {
        height: size,
        width: size,
        data,
    }
}

/// Render, crop the margin away and dither.
pub fn make_pair_with_motion(
    stack: &LayerStack,
    motion: &MotionAssignment,
    margin: usize,
    dither: DitherSeeds,
) -> Result<TrainSample> {
    let r = render_pair(stack, motion)?;
    finish(r, motion, margin, dither, None)
}

fn finish(
    r: RenderedPair,
    motion: &MotionAssignment,
    margin: usize,
    dither: DitherSeeds,
    noise: Option<(NoiseSpec, NoiseSpec)>,
) -> Result<TrainSample> {
    let (h, w, _) = r.frame_a.dims();
    let size = h.min(w) - 2 * margin;
    let cut = |f: &Frame| f.crop(margin, margin, size, size);
    let (mut a, mut b) = (cut(&r.frame_a)?, cut(&r.frame_b)?);
    if let Some((na, nb)) = noise {
        a = add_noise(&a, &na);
        b = add_noise(&b, &nb);
    }
    Ok(TrainSample {
        frame_a: quantize_with_dither(&a, dither.first),
        frame_b: quantize_with_dither(&b, dither.second),
        magnified: quantize_with_dither(&cut(&r.magnified)?, dither.magnified),
        angle_deg: motion.angle_deg,
        mag_map: crop_map(&r.mag_map, margin, size),
        motion: motion.clone(),
        eval: None,
    })
}

/// Draw a motion assignment and render a training sample.
///
/// The target shares the second frame's dither seed, so factors of one
/// reproduce the second frame exactly.
pub fn make_pair(stack: &LayerStack, rng: &mut Rng, config: &DatasetConfig) -> Result<TrainSample> {
    let motion = sample_motion(rng, stack.layers.len(), config);
    let first = rng.random();
    let second = rng.random();
    make_pair_with_motion(
        stack,
        &motion,
        config.margin,
        DitherSeeds {
            first,
            second,
            magnified: second,
        },
    )
}

/// Motion for an evaluation sample at input magnitude `m`.
fn eval_motion(rng: &mut Rng, k: usize, m: f64, generic: bool, config: &DatasetConfig) -> MotionAssignment {
    let angle_deg = if config.angle_max > config.angle_min {
        rng.random_range(config.angle_min..=config.angle_max)
    } else {
        config.angle_min
    };
    let big = EVAL_TARGET_MOTION / m;
    if generic {
        let translations = (0..k)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                [m * t.cos(), m * t.sin()]
            })
            .collect();
        return MotionAssignment {
            translations,
            factors: vec![[big, big]; k],
            angle_deg,
        };
    }
    let pair = if rng.random::<bool>() {
        [big, big / 2.0]
    } else {
        [big / 2.0, big]
    };
    let (s, c) = angle_deg.to_radians().sin_cos();
    let translations = (0..k)
        .map(|_| {
            let a = if rng.random::<bool>() { m } else { -m };
            let b = if rng.random::<bool>() { m } else { -m };
            [a * c - b * s, a * s + b * c]
        })
        .collect();
    MotionAssignment {
        translations,
        factors: vec![pair; k],
        angle_deg,
    }
}

/// Generate sample `index` of the dataset described by `config`.
pub fn generate_sample(config: &DatasetConfig, index: usize, pool: Option<&ScenePool>) -> Result<TrainSample> {
    let mut rng = rng::stream(config.seed, index as u64);
    let stack = sample_scene(&mut rng, config, pool)?;
    let k = stack.layers.len();
    if config.eval_mode == EvalMode::None {
        return make_pair(&stack, &mut rng, config);
    }
    let level = index / config.count.max(1);
    let x_value = config.eval_mode.level_value(level);
    let (motion, noise) = match config.eval_mode {
        EvalMode::Noise => {
            let motion = eval_motion(&mut rng, k, NOISE_TEST_MOTION, false, config);
            let na = NoiseSpec::new(x_value, rng.random())?;
            let nb = NoiseSpec::new(x_value, rng.random())?;
            (motion, Some((na, nb)))
        }
        mode => (
            eval_motion(&mut rng, k, x_value, mode == EvalMode::SubpixelGeneric, config),
            None,
        ),
    };
    let first = rng.random();
    let second = rng.random();
    let dither = DitherSeeds {
        first,
        second,
        magnified: second,
    };
    let rendered = render_pair(&stack, &motion)?;
    let mut sample = finish(rendered, &motion, config.margin, dither, noise)?;
    sample.eval = Some(EvalInfo { level, x_value });
    Ok(sample)
}

// ---------------------------------------------------------------------------
// On-disk layout

fn fmt_pair(p: [f64; 2]) -> String {
    format!("{},{}", p[0], p[1])
}

fn parse_pair(s: &str) -> Result<[f64; 2]> {
    let mut it = s.split(',').map(|v| v.trim().parse::<f64>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok([a, b]),
        _ => Err(Error::Format(format!("bad pair `{s}`"))),
    }
}

pub fn sample_dir(root: impl AsRef<Path>, index: usize) -> PathBuf {
    root.as_ref().join(format!("{index:06}"))
}

pub fn write_sample(dir: impl AsRef<Path>, sample: &TrainSample) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_png(&sample.frame_a, dir.join("frameA.png"))?;
    save_png(&sample.frame_b, dir.join("frameB.png"))?;
    save_png(&sample.magnified, dir.join("amplified.png"))?;
    sample.mag_map.save(dir.join("mag_map.axtf"))?;
    let mut meta = format!("angle_deg={}\n", sample.angle_deg);
    for (k, (d, a)) in sample
        .motion
        .translations
        .iter()
        .zip(&sample.motion.factors)
        .enumerate()
    {
        meta.push_str(&format!("d_{}={}\n", k + 1, fmt_pair(*d)));
        meta.push_str(&format!("alpha_{}={}\n", k + 1, fmt_pair(*a)));
    }
    if let Some(e) = sample.eval {
        meta.push_str(&format!("level={}\nx_value={}\n", e.level, e.x_value));
    }
    let path = dir.join("meta.txt");
    fs::write(&path, meta).map_err(|e| Error::io(&path, e))
}

pub fn read_sample(dir: impl AsRef<Path>) -> Result<TrainSample> {
    let dir = dir.as_ref();
    let path = dir.join("meta.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut angle = None;
    let mut d = Vec::new();
    let mut a = Vec::new();
    let (mut level, mut x_value) = (None, None);
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("{}: bad line `{line}`", path.display())))?;
        let num = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("{}: bad value in `{line}`", path.display())))
        };
        match key {
            "angle_deg" => angle = Some(num()?),
            "level" => level = Some(num()? as usize),
            "x_value" => x_value = Some(num()?),
            k if k.starts_with("d_") => d.push(parse_pair(value)?),
            k if k.starts_with("alpha_") => a.push(parse_pair(value)?),
            _ => {}
        }
    }
    let angle_deg = angle.ok_or_else(|| Error::Format(format!("{}: missing angle_deg", path.display())))?;
    Ok(TrainSample {
        frame_a: load_frame(dir.join("frameA.png"))?,
        frame_b: load_frame(dir.join("frameB.png"))?,
        magnified: load_frame(dir.join("amplified.png"))?,
        angle_deg,
        mag_map: MagMap::load(dir.join("mag_map.axtf"))?,
        motion: MotionAssignment {
            translations: d,
            factors: a,
            angle_deg,
        },
        eval: match (level, x_value) {
            (Some(level), Some(x_value)) => Some(EvalInfo { level, x_value }),
            _ => None,
        },
    })
}

/// Sorted sample directories under a dataset root.
pub fn list_samples(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.txt").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(invalid(format!("{} holds no samples", root.display())));
    }
    Ok(dirs)
}

/// Generate and write a whole dataset. Output is identical for any thread count.
pub fn write_dataset(config: &DatasetConfig, root: impl AsRef<Path>) -> Result<usize> {
    config.validate()?;
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let pool = match &config.source {
        SceneSource::Directory(dir) => Some(ScenePool::load(dir)?),
        SceneSource::Procedural => None,
    };
    let n = config.total_samples();
    (0..n).into_par_iter().try_for_each(|i| {
        let sample = generate_sample(config, i, pool.as_ref())?;
        write_sample(sample_dir(root, i), &sample)
    })?;
    let manifest = format!(
        "mode={}\ncount={}\nseed={}\nsize={}\nlevels={}\n",
        config.eval_mode.name(),
        config.count,
        config.seed,
        config.size,
        config.eval_mode.levels()
    );
    let path = root.join("dataset.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(n)
}
