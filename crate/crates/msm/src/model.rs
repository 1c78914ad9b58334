//! Network: encoder, texture branch, shape branch, projection, manipulator
//! and decoder.

use std::path::{Path, PathBuf};

use axmag_core::magnify::{MagMap, MagnificationSpec};
use axmag_core::{rng, Error, Frame, Result};
use rand_distr::{Distribution, Normal};

use crate::params::{load_store, save_store, ParamStore};
use crate::real::Real;
use crate::tape::{ConvSpec, Shape, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Width of the encoder, texture and shape features.
    pub channels: usize,
    pub decoder_channels: usize,
    pub encoder_blocks: usize,
    pub texture_blocks: usize,
    pub decoder_blocks: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 32,
            decoder_channels: 64,
            encoder_blocks: 2,
            texture_blocks: 2,
            decoder_blocks: 2,
            seed: 0,
        }
    }
}

impl ModelConfig {
    fn header(&self) -> Vec<(String, String)> {
        [
            ("channels", self.channels as u64),
            ("decoder_channels", self.decoder_channels as u64),
            ("encoder_blocks", self.encoder_blocks as u64),
            ("texture_blocks", self.texture_blocks as u64),
            ("decoder_blocks", self.decoder_blocks as u64),
            ("seed", self.seed),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    fn from_header(header: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<u64> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| Error::Format(format!("model manifest lacks `{key}`")))?
                .1
                .parse()
                .map_err(|_| Error::Format(format!("model manifest has a bad `{key}`")))
        };
        Ok(ModelConfig {
            channels: get("channels")? as usize,
            decoder_channels: get("decoder_channels")? as usize,
            encoder_blocks: get("encoder_blocks")? as usize,
            texture_blocks: get("texture_blocks")? as usize,
            decoder_blocks: get("decoder_blocks")? as usize,
            seed: get("seed")?,
        })
    }
}

/// A convolution whose weights live in the parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub weight: usize,
    pub bias: Option<usize>,
    pub spec: ConvSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResBlock {
    pub a: ConvLayer,
    pub b: ConvLayer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    enc_in: ConvLayer,
    enc_down: ConvLayer,
    enc_blocks: Vec<ResBlock>,
    tex_down: ConvLayer,
    tex_blocks: Vec<ResBlock>,
    shape_a: ConvLayer,
    shape_b: ConvLayer,
    shape_block: ResBlock,
    manip_g: ConvLayer,
    manip_h: ConvLayer,
    dec_in: ConvLayer,
    dec_blocks: Vec<ResBlock>,
    dec_out: ConvLayer,
}

struct Builder<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: rng::Rng,
}

impl<T: Real> Builder<'_, T> {
    fn conv(&mut self, name: &str, spec: ConvSpec, bias: bool) -> ConvLayer {
        let fan_in = (spec.cin * spec.kh * spec.kw) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("valid std");
        let data = (0..spec.weight_len())
            .map(|_| T::from_f64(normal.sample(&mut self.rng)))
            .collect();
        let weight = self
            .store
            .add(&format!("{name}.w"), vec![spec.cout, spec.cin, spec.kh, spec.kw], data);
        let bias = bias.then(|| {
            self.store
                .add(&format!("{name}.b"), vec![spec.cout], vec![T::ZERO; spec.cout])
        });
        ConvLayer { weight, bias, spec }
    }

    fn block(&mut self, name: &str, c: usize, kh: usize, kw: usize) -> ResBlock {
        ResBlock {
            a: self.conv(&format!("{name}.a"), ConvSpec::same(c, c, kh, kw, 1), true),
            b: self.conv(&format!("{name}.b"), ConvSpec::same(c, c, kh, kw, 1), true),
        }
    }
}

fn build_layout<T: Real>(cfg: &ModelConfig, store: &mut ParamStore<T>) -> Layout {
    let c = cfg.channels;
    let d = cfg.decoder_channels;
    let mut b = Builder {
        store,
        rng: rng::seeded(cfg.seed),
    };
    Layout {
        enc_in: b.conv("enc.in", ConvSpec::same(3, c, 7, 7, 1), true),
        enc_down: b.conv("enc.down", ConvSpec::same(c, c, 3, 3, 2), true),
        enc_blocks: (0..cfg.encoder_blocks).map(|i| b.block(&format!("enc.res{i}"), c, 3, 3)).collect(),
        tex_down: b.conv("tex.down", ConvSpec::same(c, c, 3, 3, 2), true),
        tex_blocks: (0..cfg.texture_blocks).map(|i| b.block(&format!("tex.res{i}"), c, 3, 3)).collect(),
        shape_a: b.conv("shape.a", ConvSpec::same(c, c, 1, 3, 1), true),
        shape_b: b.conv("shape.b", ConvSpec::same(c, c, 1, 3, 1), true),
        shape_block: b.block("shape.res", c, 1, 3),
        manip_g: b.conv("manip.g", ConvSpec::same(c, c, 1, 3, 1), false),
        manip_h: b.conv("manip.h", ConvSpec::same(c, c, 1, 3, 1), false),
        dec_in: b.conv("dec.in", ConvSpec::same(3 * c, d, 3, 3, 1), true),
        dec_blocks: (0..cfg.decoder_blocks).map(|i| b.block(&format!("dec.res{i}"), d, 3, 3)).collect(),
        dec_out: b.conv("dec.out", ConvSpec::same(d, 3, 3, 3, 1), true),
    }
}

/// Per-axis amplification over the half-resolution feature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMaps {
    pub h: usize,
    pub w: usize,
    pub par: Vec<f64>,
    pub perp: Vec<f64>,
}

impl AlphaMaps {
    pub fn constant(h: usize, w: usize, alpha: [f64; 2]) -> Self {
        AlphaMaps {
            h,
            w,
            par: vec![alpha[0]; h * w],
            perp: vec![alpha[1]; h * w],
        }
    }

    /// Nearest-neighbour sampling of a full-resolution map.
    pub fn from_map(map: &MagMap, h: usize, w: usize) -> Self {
        let mut par = Vec::with_capacity(h * w);
        let mut perp = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let a = map.sample_for_grid(y, x, h, w);
                par.push(a[0]);
                perp.push(a[1]);
            }
        }
        AlphaMaps { h, w, par, perp }
    }

    pub fn from_spec(spec: &MagnificationSpec, h: usize, w: usize) -> Self {
        match &spec.per_pixel_map {
            Some(m) => Self::from_map(m, h, w),
            None => Self::constant(h, w, [spec.alpha_par, spec.alpha_perp]),
        }
    }

    fn cast<T: Real>(v: &[f64]) -> Vec<T> {
        v.iter().map(|&a| T::from_f64(a)).collect()
    }

    fn transposed(v: &[f64], h: usize, w: usize) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for y in 0..h {
            for x in 0..w {
                out[x * h + y] = v[y * w + x];
            }
        }
        out
    }
}

/// Parameters placed on a tape.
pub struct Bound {
    vars: Vec<Var>,
}

/// Named intermediate results of one forward pass.
pub struct ForwardVars {
    pub output: Var,
    pub texture_a: Var,
    pub texture_b: Var,
    pub shape_b: (Var, Var),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    layout: Layout,
}

pub fn frame_to_chw<T: Real>(f: &Frame) -> Result<(Shape, Vec<T>)> {
    let (h, w, c) = f.dims();
    if c != 3 {
        return Err(Error::Dimension(format!("the network takes RGB frames, got {c} channels")));
    }
    let d = f.data();
    let mut out = vec![T::ZERO; 3 * h * w];
    for i in 0..h * w {
        for ch in 0..3 {
            out[ch * h * w + i] = T::from_f64(d[i * 3 + ch]);
        }
    }
    Ok((Shape::new(3, h, w), out))
}

pub fn chw_to_frame<T: Real>(shape: Shape, v: &[T]) -> Result<Frame> {
    let (h, w) = (shape.h, shape.w);
    let mut data = vec![0.0; shape.len()];
    for ch in 0..shape.c {
        for i in 0..h * w {
            data[i * shape.c + ch] = v[ch * h * w + i].to_f64();
        }
    }
    Frame::new(h, w, shape.c, data)
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.channels == 0 || config.decoder_channels == 0 {
            return Err(Error::InvalidArgument("channel counts must be positive".into()));
        }
        let mut params = ParamStore::new();
        let layout = build_layout(&config, &mut params);
        Ok(Model { config, params, layout })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config,
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        save_store(&self.params, &self.config.header(), path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (header, params) = load_store::<T>(path.as_ref())?;
        let config = ModelConfig::from_header(&header)?;
        let mut model = Model::new(config)?;
        if model.params.len() != params.len() {
            return Err(Error::Format(format!(
                "model manifest lists {} blocks, the architecture has {}",
                params.len(),
                model.params.len()
            )));
        }
        for (want, got) in model.params.blocks.iter().zip(&params.blocks) {
            if want.name != got.name || want.dims != got.dims {
                return Err(Error::Format(format!(
                    "model block {} {:?} does not match expected {} {:?}",
                    got.name, got.dims, want.name, want.dims
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        Bound {
            vars: self
                .params
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| tape.param(i, &b.data))
                .collect(),
        }
    }

    fn conv(&self, t: &mut Tape<T>, b: &Bound, l: &ConvLayer, x: Var) -> Var {
        t.conv(x, b.vars[l.weight], l.bias.map(|i| b.vars[i]), l.spec)
    }

    fn conv_relu(&self, t: &mut Tape<T>, b: &Bound, l: &ConvLayer, x: Var) -> Var {
        let y = self.conv(t, b, l, x);
        t.relu(y)
    }

    fn res(&self, t: &mut Tape<T>, b: &Bound, r: &ResBlock, x: Var) -> Var {
        let y = self.conv_relu(t, b, &r.a, x);
        let y = self.conv(t, b, &r.b, y);
        t.add(x, y)
    }

    /// Image (3, H, W) to features (C, H/2, W/2).
    pub fn encode(&self, t: &mut Tape<T>, b: &Bound, image: Var) -> Var {
        let x = self.conv_relu(t, b, &self.layout.enc_in, image);
        let mut x = self.conv_relu(t, b, &self.layout.enc_down, x);
        for r in &self.layout.enc_blocks {
            x = self.res(t, b, r, x);
        }
        x
    }

    /// Features to texture (C, H/4, W/4).
    pub fn texture(&self, t: &mut Tape<T>, b: &Bound, e: Var) -> Var {
        let mut x = self.conv_relu(t, b, &self.layout.tex_down, e);
        for r in &self.layout.tex_blocks {
            x = self.res(t, b, r, x);
        }
        x
    }

    /// Horizontal 1D stack; the vertical path runs it on transposed input.
    pub fn shape_branch(&self, t: &mut Tape<T>, b: &Bound, e: Var) -> Var {
        let x = self.conv_relu(t, b, &self.layout.shape_a, e);
        let x = self.conv_relu(t, b, &self.layout.shape_b, x);
        self.res(t, b, &self.layout.shape_block, x)
    }

    /// `(s_x, s_y)` with `s_y = transpose(B(transpose(E)))`.
    pub fn shape_pair(&self, t: &mut Tape<T>, b: &Bound, e: Var) -> (Var, Var) {
        let sx = self.shape_branch(t, b, e);
        let et = t.transpose(e);
        let syt = self.shape_branch(t, b, et);
        let sy = t.transpose(syt);
        (sx, sy)
    }

    /// Rotate an x/y pair onto (φ, φ⊥).
    pub fn project(&self, t: &mut Tape<T>, pair: (Var, Var), angle_deg: f64) -> (Var, Var) {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let (s, c) = (T::from_f64(s), T::from_f64(c));
        let p = t.lincomb(pair.0, c, pair.1, s);
        let q = t.lincomb(pair.0, -s, pair.1, c);
        (p, q)
    }

    /// Rotate a (φ, φ⊥) pair back onto x/y.
    pub fn inverse_project(&self, t: &mut Tape<T>, pair: (Var, Var), angle_deg: f64) -> (Var, Var) {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let (s, c) = (T::from_f64(s), T::from_f64(c));
        let x = t.lincomb(pair.0, c, pair.1, -s);
        let y = t.lincomb(pair.0, s, pair.1, c);
        (x, y)
    }

    /// `g(diff)`, evaluated in the transposed domain for the φ⊥ axis.
    pub fn motion_term(&self, t: &mut Tape<T>, b: &Bound, diff: Var, transposed: bool) -> Var {
        let d = if transposed { t.transpose(diff) } else { diff };
        self.conv_relu(t, b, &self.layout.manip_g, d)
    }

    /// `s2 + h(α ⊙ term)`, with `term` from [`Self::motion_term`].
    pub fn apply_motion(
        &self,
        t: &mut Tape<T>,
        b: &Bound,
        s2: Var,
        term: Var,
        alpha: &[f64],
        transposed: bool,
    ) -> Var {
        let s = t.shape(s2);
        let map = if transposed {
            AlphaMaps::cast(&AlphaMaps::transposed(alpha, s.h, s.w))
        } else {
            AlphaMaps::cast(alpha)
        };
        let scaled = t.mul_map(term, map);
        let hv = self.conv(t, b, &self.layout.manip_h, scaled);
        let hv = if transposed { t.transpose(hv) } else { hv };
        t.add(s2, hv)
    }

    /// `Δ = s2 + h(α ⊙ g(s2 − s1))` for one axis.
    pub fn manipulate(&self, t: &mut Tape<T>, b: &Bound, s1: Var, s2: Var, alpha: &[f64], transposed: bool) -> Var {
        let diff = t.sub(s2, s1);
        let term = self.motion_term(t, b, diff, transposed);
        self.apply_motion(t, b, s2, term, alpha, transposed)
    }

    /// Texture (C, H/4, W/4) and shape deltas (C, H/2, W/2) to an image.
    pub fn decode(&self, t: &mut Tape<T>, b: &Bound, texture: Var, dx: Var, dy: Var) -> Var {
        let up = t.upsample2(texture);
        let cat = t.concat(&[up, dx, dy]);
        let mut x = self.conv_relu(t, b, &self.layout.dec_in, cat);
        for r in &self.layout.dec_blocks {
            x = self.res(t, b, r, x);
        }
        let x = t.upsample2(x);
        self.conv(t, b, &self.layout.dec_out, x)
    }

    /// Full graph for one frame pair.
    pub fn forward_graph(
        &self,
        t: &mut Tape<T>,
        b: &Bound,
        i1: Var,
        i2: Var,
        angle_deg: f64,
        alpha: &AlphaMaps,
    ) -> Result<ForwardVars> {
        let s = t.shape(i1);
        check_dims(s.h, s.w)?;
        if t.shape(i2) != s {
            return Err(Error::Dimension("frame pair differs in size".into()));
        }
        if (alpha.h, alpha.w) != (s.h / 2, s.w / 2) {
            return Err(Error::Dimension(format!(
                "alpha maps are {}x{}, features are {}x{}",
                alpha.h,
                alpha.w,
                s.h / 2,
                s.w / 2
            )));
        }
        let e1 = self.encode(t, b, i1);
        let e2 = self.encode(t, b, i2);
        let texture_a = self.texture(t, b, e1);
        let texture_b = self.texture(t, b, e2);
        let pair1 = self.shape_pair(t, b, e1);
        let pair2 = self.shape_pair(t, b, e2);
        let p1 = self.project(t, pair1, angle_deg);
        let p2 = self.project(t, pair2, angle_deg);
        let dp = self.manipulate(t, b, p1.0, p2.0, &alpha.par, false);
        let dq = self.manipulate(t, b, p1.1, p2.1, &alpha.perp, true);
        let (dx, dy) = self.inverse_project(t, (dp, dq), angle_deg);
        let output = self.decode(t, b, texture_b, dx, dy);
        Ok(ForwardVars {
            output,
            texture_a,
            texture_b,
            shape_b: pair2,
        })
    }

    /// Predict the magnified second frame.
    pub fn forward(&self, i1: &Frame, i2: &Frame, spec: &MagnificationSpec) -> Result<Frame> {
        i1.ensure_same_dims(i2)?;
        let (h, w, _) = i1.dims();
        check_dims(h, w)?;
        spec.validate(Some((h, w)))?;
        let mut t = Tape::new();
        let b = self.bind(&mut t);
        let (s1, d1) = frame_to_chw::<T>(i1)?;
        let (s2, d2) = frame_to_chw::<T>(i2)?;
        let v1 = t.input(s1, d1);
        let v2 = t.input(s2, d2);
        let alpha = AlphaMaps::from_spec(spec, h / 2, w / 2);
        let out = self.forward_graph(&mut t, &b, v1, v2, spec.angle_deg, &alpha)?;
        chw_to_frame(t.shape(out.output), t.value(out.output))
    }
}

pub fn check_dims(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || h % 4 != 0 || w % 4 != 0 {
        return Err(Error::Dimension(format!(
            "network input must have sides divisible by 4, got {h}x{w}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn tiny() -> ModelConfig {
        ModelConfig {
            channels: 4,
            decoder_channels: 6,
            encoder_blocks: 1,
            texture_blocks: 1,
            decoder_blocks: 1,
            seed: 3,
        }
    }

    fn random_frame(h: usize, w: usize, seed: u64) -> Frame {
        let mut r = rng::seeded(seed);
        Frame::from_fn(h, w, 3, |_, _, _| r.random::<f64>())
    }

    fn input(t: &mut Tape<f32>, f: &Frame) -> Var {
        let (s, d) = frame_to_chw::<f32>(f).unwrap();
        t.input(s, d)
    }

    #[test]
    fn feature_shapes() {
        let m = Model::<f32>::new(ModelConfig::default()).unwrap();
        let mut t = Tape::new();
        let b = m.bind(&mut t);
        let x = input(&mut t, &random_frame(64, 64, 1));
        let e = m.encode(&mut t, &b, x);
        assert_eq!(t.shape(e), Shape::new(32, 32, 32));
        let tex = m.texture(&mut t, &b, e);
        assert_eq!(t.shape(tex), Shape::new(32, 16, 16));
        let (sx, sy) = m.shape_pair(&mut t, &b, e);
        assert_eq!(t.shape(sx), t.shape(sy));
        assert_eq!(t.shape(sx), Shape::new(32, 32, 32));
    }

    #[test]
    fn zero_input_gives_zero_features() {
        let m = Model::<f32>::new(tiny()).unwrap();
        let mut t = Tape::new();
        let b = m.bind(&mut t);
        let x = t.input(Shape::new(3, 16, 16), vec![0.0; 768]);
        let e = m.encode(&mut t, &b, x);
        assert!(t.value(e).iter().all(|&v| v == 0.0));
        let (sx, sy) = m.shape_pair(&mut t, &b, e);
        assert!(t.value(sx).iter().chain(t.value(sy)).all(|&v| v == 0.0));
    }

    #[test]
    fn shape_y_is_transposed_shape_x() {
        let m = Model::<f32>::new(tiny()).unwrap();
        let mut t = Tape::new();
        let b = m.bind(&mut t);
        let x = input(&mut t, &random_frame(16, 24, 2));
        let e = m.encode(&mut t, &b, x);
        let (_, sy) = m.shape_pair(&mut t, &b, e);
        let et = t.transpose(e);
        let sxt = m.shape_branch(&mut t, &b, et);
        let expect = t.transpose(sxt);
        assert_eq!(t.value(sy), t.value(expect));
        // equivariance: shape_branch on transposed input swaps the pair
        let (sx2, sy2) = m.shape_pair(&mut t, &b, et);
        let (sx, _) = m.shape_pair(&mut t, &b, e);
        let sxt2 = t.transpose(sx);
        assert_eq!(t.value(sy2), t.value(sxt2));
        let syt = t.transpose(sy);
        assert_eq!(t.value(sx2), t.value(syt));
    }

    #[test]
    fn projection_identities() {
        let m = Model::<f64>::new(tiny()).unwrap();
        let mut t = Tape::<f64>::new();
        let mut r = rng::seeded(4);
        let a = t.input(Shape::new(2, 3, 3), (0..18).map(|_| r.random::<f64>() - 0.5).collect());
        let c = t.input(Shape::new(2, 3, 3), (0..18).map(|_| r.random::<f64>() - 0.5).collect());
        let p0 = m.project(&mut t, (a, c), 0.0);
        assert_eq!(t.value(p0.0), t.value(a));
        assert_eq!(t.value(p0.1), t.value(c));
        let p90 = m.project(&mut t, (a, c), 90.0);
        for i in 0..18 {
            assert!((t.value(p90.0)[i] - t.value(c)[i]).abs() < 1e-15);
            assert!((t.value(p90.1)[i] + t.value(a)[i]).abs() < 1e-15);
        }
        let p = m.project(&mut t, (a, c), 37.0);
        let back = m.inverse_project(&mut t, p, 37.0);
        for i in 0..18 {
            assert!((t.value(back.0)[i] - t.value(a)[i]).abs() < 1e-12);
            assert!((t.value(back.1)[i] - t.value(c)[i]).abs() < 1e-12);
        }
        let q = m.project(&mut t, (a, c), 217.0);
        for i in 0..18 {
            assert!((t.value(q.0)[i] + t.value(p.0)[i]).abs() < 1e-12);
            assert!((t.value(q.1)[i] + t.value(p.1)[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn manipulator_identities() {
        let m = Model::<f32>::new(tiny()).unwrap();
        let mut t = Tape::new();
        let b = m.bind(&mut t);
        let x1 = input(&mut t, &random_frame(16, 16, 5));
        let x2 = input(&mut t, &random_frame(16, 16, 6));
        let s1 = m.encode(&mut t, &b, x1);
        let s2 = m.encode(&mut t, &b, x2);
        for transposed in [false, true] {
            let zero = m.manipulate(&mut t, &b, s1, s2, &[0.0; 64], transposed);
            assert_eq!(t.value(zero), t.value(s2));
            let same = m.manipulate(&mut t, &b, s2, s2, &[7.0; 64], transposed);
            assert_eq!(t.value(same), t.value(s2));
            let scalar = m.manipulate(&mut t, &b, s1, s2, &[3.0; 64], transposed);
            let as_map = AlphaMaps::from_map(&MagMap::constant(16, 16, [3.0, 3.0]), 8, 8);
            let mapped = m.manipulate(&mut t, &b, s1, s2, &as_map.par, transposed);
            assert_eq!(t.value(scalar), t.value(mapped));
        }
    }

    #[test]
    fn zero_alpha_reconstructs_the_second_frame() {
        let m = Model::<f32>::new(tiny()).unwrap();
        let a = random_frame(16, 16, 7);
        let b = random_frame(16, 16, 8);
        let spec = MagnificationSpec::axial(30.0, 0.0, 0.0);
        let out = m.forward(&a, &b, &spec).unwrap();
        let rec = m.forward(&b, &b, &spec).unwrap();
        assert!(out.max_abs_diff(&rec) <= 1e-6);
        let again = m.forward(&a, &b, &MagnificationSpec::axial(30.0, 4.0, 1.0)).unwrap();
        let again2 = m.forward(&a, &b, &MagnificationSpec::axial(30.0, 4.0, 1.0)).unwrap();
        assert_eq!(again, again2);
    }

    #[test]
    fn dims_must_divide_by_four() {
        let m = Model::<f32>::new(tiny()).unwrap();
        let f = random_frame(18, 16, 9);
        assert!(m.forward(&f, &f, &MagnificationSpec::generic(1.0)).is_err());
    }

    #[test]
    fn save_and_load() {
        let m = Model::<f32>::new(tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = Model::<f32>::load(dir.path().join("model.txt")).unwrap();
        assert_eq!(back, m);
    }
}
