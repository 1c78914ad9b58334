//! Video magnification with a trained network, and its registry entry.

use axmag_core::magnify::{MagnificationSpec, MagnifierRegistry, MagnifyRequest, ReferenceMode};
use axmag_core::temporal::TemporalFilterSpec;
use axmag_core::{Error, Frame, Magnifier, MethodConfig, Result};

use crate::model::{check_dims, chw_to_frame, frame_to_chw, AlphaMaps, Model};
use crate::real::Real;
use crate::tape::{Shape, Tape};

/// Texture and projected shape features of one frame.
struct Analysis<T> {
    texture: Vec<T>,
    par: Vec<T>,
    perp: Vec<T>,
}

struct Shapes {
    texture: Shape,
    feature: Shape,
}

impl<T: Real> Model<T> {
    fn analyse(&self, frame: &Frame, angle_deg: f64) -> Result<(Analysis<T>, Shapes)> {
        let mut t = Tape::new();
        let b = self.bind(&mut t);
        let (s, d) = frame_to_chw::<T>(frame)?;
        let x = t.input(s, d);
        let e = self.encode(&mut t, &b, x);
        let tex = self.texture(&mut t, &b, e);
        let pair = self.shape_pair(&mut t, &b, e);
        let (p, q) = self.project(&mut t, pair, angle_deg);
        let shapes = Shapes {
            texture: t.shape(tex),
            feature: t.shape(p),
        };
        Ok((
            Analysis {
                texture: t.value(tex).to_vec(),
                par: t.value(p).to_vec(),
                perp: t.value(q).to_vec(),
            },
            shapes,
        ))
    }

    /// `g(cur - base)` for both axes.
    fn motion_terms(&self, shape: Shape, cur: &Analysis<T>, base: &Analysis<T>) -> [Vec<T>; 2] {
        let mut t = Tape::new();
        let b = self.bind(&mut t);
        let mut out = [Vec::new(), Vec::new()];
        for (i, (c, r)) in [(&cur.par, &base.par), (&cur.perp, &base.perp)].into_iter().enumerate() {
            let cv = t.input(shape, c.clone());
            let rv = t.input(shape, r.clone());
            let diff = t.sub(cv, rv);
            let g = self.motion_term(&mut t, &b, diff, i == 1);
            out[i] = t.value(g).to_vec();
        }
        out
    }

    fn synthesise(
        &self,
        shapes: &Shapes,
        cur: &Analysis<T>,
        terms: &[Vec<T>; 2],
        alpha: &AlphaMaps,
        angle_deg: f64,
    ) -> Result<Frame> {
        let mut t = Tape::new();
        let b = self.bind(&mut t);
        let f = shapes.feature;
        // g runs on transposed features for the orthogonal axis
        let gt = Shape::new(f.c, f.w, f.h);
        let p = t.input(f, cur.par.clone());
        let q = t.input(f, cur.perp.clone());
        let gp = t.input(f, terms[0].clone());
        let gq = t.input(gt, terms[1].clone());
        let dp = self.apply_motion(&mut t, &b, p, gp, &alpha.par, false);
        let dq = self.apply_motion(&mut t, &b, q, gq, &alpha.perp, true);
        let (dx, dy) = self.inverse_project(&mut t, (dp, dq), angle_deg);
        let tex = t.input(shapes.texture, cur.texture.clone());
        let out = self.decode(&mut t, &b, tex, dx, dy);
        chw_to_frame(t.shape(out), t.value(out))
    }
}

fn add_into<T: Real>(acc: &mut [Vec<T>; 2], step: &[Vec<T>; 2]) {
    for (a, s) in acc.iter_mut().zip(step) {
        for (x, y) in a.iter_mut().zip(s) {
            *x = *x + *y;
        }
    }
}

/// Magnify a frame sequence; static mode references frame 0, dynamic mode
/// accumulates consecutive shape differences.
pub fn magnify_video_msm<T: Real>(
    model: &Model<T>,
    frames: &[Frame],
    spec: &MagnificationSpec,
    filter: Option<&TemporalFilterSpec>,
) -> Result<Vec<Frame>> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 frames, got {}",
            frames.len()
        )));
    }
    for f in &frames[1..] {
        frames[0].ensure_same_dims(f)?;
    }
    let (h, w, _) = frames[0].dims();
    check_dims(h, w)?;
    spec.validate(Some((h, w)))?;
    let alpha = AlphaMaps::from_spec(spec, h / 2, w / 2);
    let angle = spec.angle_deg;

    let (first, shapes) = model.analyse(&frames[0], angle)?;
    let f = shapes.feature;
    let zero = [vec![T::ZERO; f.len()], vec![T::ZERO; f.len()]];

    let Some(tf) = filter else {
        let mut out = vec![model.synthesise(&shapes, &first, &zero, &alpha, angle)?];
        let mut prev = None;
        let mut acc = zero.clone();
        for frame in &frames[1..] {
            let (cur, _) = model.analyse(frame, angle)?;
            let terms = match spec.mode {
                ReferenceMode::Static => model.motion_terms(f, &cur, &first),
                ReferenceMode::Dynamic => {
                    let base = prev.as_ref().unwrap_or(&first);
                    add_into(&mut acc, &model.motion_terms(f, &cur, base));
                    acc.clone()
                }
            };
            out.push(model.synthesise(&shapes, &cur, &terms, &alpha, angle)?);
            prev = Some(cur);
        }
        return Ok(out);
    };

    let filt = tf.build()?;
    if frames.len() < filt.min_len() {
        return Err(Error::InvalidArgument(format!(
            "temporal filter needs at least {} frames, got {}",
            filt.min_len(),
            frames.len()
        )));
    }
    let mut series: [Vec<Vec<f64>>; 2] = [vec![vec![0.0; f.len()]], vec![vec![0.0; f.len()]]];
    let mut prev: Option<Analysis<T>> = None;
    let mut acc = zero.clone();
    for frame in &frames[1..] {
        let (cur, _) = model.analyse(frame, angle)?;
        let terms = match spec.mode {
            ReferenceMode::Static => model.motion_terms(f, &cur, &first),
            ReferenceMode::Dynamic => {
                let base = prev.as_ref().unwrap_or(&first);
                add_into(&mut acc, &model.motion_terms(f, &cur, base));
                acc.clone()
            }
        };
        for (s, t) in series.iter_mut().zip(&terms) {
            s.push(t.iter().map(|v| v.to_f64()).collect());
        }
        prev = Some(cur);
    }
    let par = filt.filter_frames(&series[0])?;
    let perp = filt.filter_frames(&series[1])?;
    frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let (cur, _) = model.analyse(frame, angle)?;
            let cast = |v: &[f64]| v.iter().map(|&x| T::from_f64(x)).collect::<Vec<T>>();
            let terms = [cast(&par[i]), cast(&perp[i])];
            model.synthesise(&shapes, &cur, &terms, &alpha, angle)
        })
        .collect()
}

/// The learned magnifier behind the `msm` method name.
pub struct MsmMagnifier {
    model: Model<f32>,
}

impl MsmMagnifier {
    pub fn new(model: Model<f32>) -> Self {
        MsmMagnifier { model }
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }
}

impl Magnifier for MsmMagnifier {
    fn name(&self) -> &str {
        "msm"
    }

    fn is_axial(&self) -> bool {
        true
    }

    fn magnify(&self, frames: &[Frame], request: &MagnifyRequest) -> Result<Vec<Frame>> {
        magnify_video_msm(&self.model, frames, &request.spec, request.filter.as_ref())
    }
}

pub fn register(registry: &mut MagnifierRegistry) {
    registry.register("msm", |cfg: &MethodConfig| {
        let path = cfg
            .model
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("method `msm` needs a model file".into()))?;
        Ok(Box::new(MsmMagnifier::new(Model::load(path)?)))
    });
}
