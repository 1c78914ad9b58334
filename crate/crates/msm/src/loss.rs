//! Training objective.

use axmag_core::datagen::TrainSample;
use axmag_core::eval::request_for_sample;
use axmag_core::{Frame, Result};

use crate::model::{frame_to_chw, AlphaMaps, Model};
use crate::real::Real;
use crate::tape::{Shape, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the texture and x-shape terms.
    pub beta: f64,
    /// Also weight the y-shape term by beta.
    pub symmetric: bool,
    /// Colour perturbation of the shape target; without it the target is
    /// the shape of frame 2 itself.
    pub perturb: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            beta: 0.5,
            symmetric: false,
            perturb: true,
        }
    }
}

/// Loss components of one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub recon: f64,
    pub texture: f64,
    pub shape_x: f64,
    pub shape_y: f64,
}

impl LossTerms {
    pub fn add(&mut self, o: &LossTerms) {
        self.total += o.total;
        self.recon += o.recon;
        self.texture += o.texture;
        self.shape_x += o.shape_x;
        self.shape_y += o.shape_y;
    }

    pub fn scale(&mut self, s: f64) {
        self.total *= s;
        self.recon *= s;
        self.texture *= s;
        self.shape_x *= s;
        self.shape_y *= s;
    }
}

/// Per-channel gain in [0.8, 1.2] and offset in [-0.05, 0.05], clamped.
pub fn perturb_colour(frame: &Frame, rng: &mut impl rand::Rng) -> Frame {
    let c = frame.channels();
    let gain: Vec<f64> = (0..c).map(|_| rng.random_range(0.8..=1.2)).collect();
    let offset: Vec<f64> = (0..c).map(|_| rng.random_range(-0.05..=0.05)).collect();
    let mut out = frame.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let ch = i % c;
        *v = (*v * gain[ch] + offset[ch]).clamp(0.0, 1.0);
    }
    out
}

/// A training sample in network layout.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub shape: Shape,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub target: Vec<T>,
    pub perturbed: Option<Vec<T>>,
    pub angle_deg: f64,
    pub alpha: AlphaMaps,
}

impl<T: Real> Prepared<T> {
    pub fn new(sample: &TrainSample, perturb: Option<&mut dyn rand::RngCore>) -> Result<Self> {
        let spec = request_for_sample(sample).spec;
        let (h, w, _) = sample.frame_a.dims();
        let alpha = AlphaMaps::from_spec(&spec, h / 2, w / 2);
        Self::from_frames(
            [&sample.frame_a, &sample.frame_b, &sample.magnified],
            sample.angle_deg,
            alpha,
            perturb,
        )
    }

    pub fn from_frames(
        frames: [&Frame; 3],
        angle_deg: f64,
        alpha: AlphaMaps,
        perturb: Option<&mut dyn rand::RngCore>,
    ) -> Result<Self> {
        let (shape, a) = frame_to_chw(frames[0])?;
        let (_, b) = frame_to_chw(frames[1])?;
        let (_, target) = frame_to_chw(frames[2])?;
        let perturbed = match perturb {
            Some(mut rng) => Some(frame_to_chw(&perturb_colour(frames[1], &mut rng))?.1),
            None => None,
        };
        Ok(Prepared {
            shape,
            a,
            b,
            target,
            perturbed,
            angle_deg,
            alpha,
        })
    }
}

/// Builds the loss graph; returns the root and its components.
pub fn loss_graph<T: Real>(
    model: &Model<T>,
    tape: &mut Tape<T>,
    sample: &Prepared<T>,
    cfg: &LossConfig,
) -> Result<(Var, LossTerms)> {
    let bound = model.bind(tape);
    let a = tape.input(sample.shape, sample.a.clone());
    let b = tape.input(sample.shape, sample.b.clone());
    let target = tape.input(sample.shape, sample.target.clone());
    let fwd = model.forward_graph(tape, &bound, a, b, sample.angle_deg, &sample.alpha)?;
    let (sx_ref, sy_ref) = match &sample.perturbed {
        Some(p) => {
            let pv = tape.input(sample.shape, p.clone());
            let e = model.encode(tape, &bound, pv);
            model.shape_pair(tape, &bound, e)
        }
        None => fwd.shape_b,
    };
    let recon = tape.l1(fwd.output, target);
    let texture = tape.l1(fwd.texture_a, fwd.texture_b);
    let shape_x = tape.l1(fwd.shape_b.0, sx_ref);
    let shape_y = tape.l1(fwd.shape_b.1, sy_ref);
    let beta = T::from_f64(cfg.beta);
    let wy = if cfg.symmetric { beta } else { T::ONE };
    let root = tape.scalars(&[(recon, T::ONE), (texture, beta), (shape_x, beta), (shape_y, wy)]);
    let terms = LossTerms {
        total: tape.scalar(root).to_f64(),
        recon: tape.scalar(recon).to_f64(),
        texture: tape.scalar(texture).to_f64(),
        shape_x: tape.scalar(shape_x).to_f64(),
        shape_y: tape.scalar(shape_y).to_f64(),
    };
    Ok((root, terms))
}

/// Loss and parameter gradients of one sample.
pub fn loss_and_gradients<T: Real>(
    model: &Model<T>,
    sample: &Prepared<T>,
    cfg: &LossConfig,
) -> Result<(LossTerms, Vec<Vec<T>>)> {
    let mut tape = Tape::new();
    let (root, terms) = loss_graph(model, &mut tape, sample, cfg)?;
    let mut grads = model.params.zeros_like();
    tape.backward(root).accumulate(&mut grads);
    Ok((terms, grads))
}
