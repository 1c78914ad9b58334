//! Adam training loop with CSV logging and per-epoch checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use axmag_core::datagen::{list_samples, read_sample, TrainSample};
use axmag_core::eval::request_for_sample;
use axmag_core::{rng, Error, Frame, Result};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::loss::{loss_and_gradients, LossConfig, LossTerms, Prepared};
use crate::model::{AlphaMaps, Model};
use crate::real::Real;

const PERTURB_LABEL: u64 = 0x7065_7274;

/// A training sample held as 8-bit frames with factors at feature resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSample {
    pub height: usize,
    pub width: usize,
    /// First, second and magnified frames, interleaved RGB.
    pub frames: [Vec<u8>; 3],
    pub angle_deg: f64,
    pub alpha: AlphaMaps,
}

fn to_bytes(f: &Frame) -> Vec<u8> {
    f.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

fn from_bytes(h: usize, w: usize, b: &[u8]) -> Result<Frame> {
    Frame::new(h, w, 3, b.iter().map(|&v| v as f64 / 255.0).collect())
}

impl CompactSample {
    pub fn from_sample(s: &TrainSample) -> Result<Self> {
        let (h, w, c) = s.frame_a.dims();
        if c != 3 {
            return Err(Error::Dimension(format!("training needs RGB frames, got {c} channels")));
        }
        crate::model::check_dims(h, w)?;
        let spec = request_for_sample(s).spec;
        Ok(CompactSample {
            height: h,
            width: w,
            frames: [to_bytes(&s.frame_a), to_bytes(&s.frame_b), to_bytes(&s.magnified)],
            angle_deg: s.angle_deg,
            alpha: AlphaMaps::from_spec(&spec, h / 2, w / 2),
        })
    }

    pub fn prepare<T: Real>(&self, perturb: Option<&mut dyn rand::RngCore>) -> Result<Prepared<T>> {
        let f: Vec<Frame> = self
            .frames
            .iter()
            .map(|b| from_bytes(self.height, self.width, b))
            .collect::<Result<_>>()?;
        Prepared::from_frames([&f[0], &f[1], &f[2]], self.angle_deg, self.alpha.clone(), perturb)
    }
}

/// Read every sample under a dataset root, in directory order.
pub fn load_training_set(root: impl AsRef<Path>) -> Result<Vec<CompactSample>> {
    let dirs = list_samples(root)?;
    dirs.par_iter()
        .map(|d| CompactSample::from_sample(&read_sample(d)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &Model<T>) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: model.params.zeros_like(),
            v: model.params.zeros_like(),
        }
    }

    pub fn update(&mut self, model: &mut Model<T>, grads: &[Vec<T>], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, block) in model.params.blocks.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..block.data.len() {
                let g = grads[i][j].to_f64();
                let mj = self.beta1 * m[j].to_f64() + (1.0 - self.beta1) * g;
                let vj = self.beta2 * v[j].to_f64() + (1.0 - self.beta2) * g * g;
                m[j] = T::from_f64(mj);
                v[j] = T::from_f64(vj);
                let upd = lr * (mj / c1) / ((vj / c2).sqrt() + self.eps);
                block.data[j] = T::from_f64(block.data[j].to_f64() - upd);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub loss: LossConfig,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch: 8,
            lr: 2e-4,
            seed: 0,
            loss: LossConfig::default(),
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} is not usable", self.lr)));
        }
        Ok(())
    }
}

/// Where training writes its log and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub dir: PathBuf,
    pub checkpoints: bool,
}

impl TrainOutput {
    pub fn log_path(&self) -> PathBuf {
        self.dir.join("train_log.csv")
    }

    pub fn checkpoint_dir(&self, epoch: usize) -> PathBuf {
        self.dir.join("checkpoints").join(format!("epoch_{epoch:03}"))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: usize,
    pub epochs: usize,
    /// Mean loss terms per optimizer step.
    pub history: Vec<LossTerms>,
}

/// Mean loss and gradients over a batch; summed in batch order.
pub fn batch_gradients<T: Real>(
    model: &Model<T>,
    batch: &[Prepared<T>],
    loss: &LossConfig,
) -> Result<(LossTerms, Vec<Vec<T>>)> {
    let per: Vec<(LossTerms, Vec<Vec<T>>)> = batch
        .par_iter()
        .map(|s| loss_and_gradients(model, s, loss))
        .collect::<Result<_>>()?;
    let mut terms = LossTerms::default();
    let mut sum = model.params.zeros_like();
    for (t, g) in &per {
        terms.add(t);
        for (acc, gi) in sum.iter_mut().zip(g) {
            for (a, b) in acc.iter_mut().zip(gi) {
                *a = *a + *b;
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    terms.scale(inv);
    let inv_t = T::from_f64(inv);
    for acc in &mut sum {
        for a in acc.iter_mut() {
            *a = *a * inv_t;
        }
    }
    Ok((terms, sum))
}

pub fn train<T: Real>(
    model: &mut Model<T>,
    data: &[CompactSample],
    cfg: &TrainConfig,
    output: Option<&TrainOutput>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut log = match output {
        Some(o) => {
            fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
            let path = o.log_path();
            let mut w = csv::Writer::from_path(&path)
                .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
            w.write_record(["step", "loss", "l_recon", "l_texture", "l_shape_x", "l_shape_y"])
                .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
            Some((w, path))
        }
        None => None,
    };
    let mut adam = Adam::new(model);
    let mut report = TrainReport::default();
    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, epoch as u64));
        let perturb_seed = rng::derive_seed(cfg.seed ^ PERTURB_LABEL, epoch as u64);
        for (bi, chunk) in order.chunks(cfg.batch).enumerate() {
            if cfg.max_steps.is_some_and(|m| report.steps >= m) {
                break 'epochs;
            }
            let batch: Vec<Prepared<T>> = chunk
                .par_iter()
                .enumerate()
                .map(|(j, &idx)| {
                    if cfg.loss.perturb {
                        let mut r = rng::stream(perturb_seed, (bi * cfg.batch + j) as u64);
                        data[idx].prepare(Some(&mut r))
                    } else {
                        data[idx].prepare(None)
                    }
                })
                .collect::<Result<_>>()?;
            let (terms, grads) = batch_gradients(model, &batch, &cfg.loss)?;
            if !terms.total.is_finite() {
                return Err(Error::Compute(format!(
                    "loss became {} at step {} (epoch {}, samples {:?}); recon {}, texture {}, shape {} / {}",
                    terms.total,
                    report.steps + 1,
                    epoch + 1,
                    chunk,
                    terms.recon,
                    terms.texture,
                    terms.shape_x,
                    terms.shape_y
                )));
            }
            adam.update(model, &grads, cfg.lr);
            report.steps += 1;
            if let Some((w, path)) = log.as_mut() {
                w.write_record(&[
                    report.steps.to_string(),
                    terms.total.to_string(),
                    terms.recon.to_string(),
                    terms.texture.to_string(),
                    terms.shape_x.to_string(),
                    terms.shape_y.to_string(),
                ])
                .and_then(|_| w.flush().map_err(Into::into))
                .map_err(|e| Error::io(path.as_path(), std::io::Error::other(e)))?;
            }
            log::debug!("step {} loss {:.6}", report.steps, terms.total);
            report.history.push(terms);
        }
        report.epochs = epoch + 1;
        if let Some(o) = output.filter(|o| o.checkpoints) {
            model.save(o.checkpoint_dir(epoch + 1))?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use axmag_core::datagen::{generate_sample, DatasetConfig};

    fn tiny() -> Model<f32> {
        Model::new(ModelConfig {
            channels: 4,
            decoder_channels: 8,
            encoder_blocks: 1,
            texture_blocks: 1,
            decoder_blocks: 1,
            seed: 5,
        })
        .unwrap()
    }

    fn data(n: usize) -> Vec<CompactSample> {
        let cfg = DatasetConfig {
            count: n,
            size: 32,
            k_min: 2,
            k_max: 3,
            alpha_max: 1.5,
            seed: 11,
            ..DatasetConfig::default()
        };
        (0..n)
            .map(|i| CompactSample::from_sample(&generate_sample(&cfg, i, None).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut m = tiny();
        let init = m.clone();
        let cfg = TrainConfig { epochs: 1, batch: 2, lr: 0.0, ..Default::default() };
        let r = train(&mut m, &data(4), &cfg, None).unwrap();
        assert_eq!(r.steps, 2);
        assert_eq!(m, init);
    }

    #[test]
    fn runs_are_reproducible() {
        let d = data(3);
        let cfg = TrainConfig { epochs: 2, batch: 2, lr: 1e-3, ..Default::default() };
        let mut a = tiny();
        let mut b = tiny();
        let ra = train(&mut a, &d, &cfg, None).unwrap();
        let rb = train(&mut b, &d, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_ne!(a, tiny());
    }

    #[test]
    fn writes_log_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let out = TrainOutput { dir: dir.path().to_path_buf(), checkpoints: true };
        let mut m = tiny();
        let cfg = TrainConfig { epochs: 2, batch: 2, lr: 1e-3, ..Default::default() };
        train(&mut m, &data(3), &cfg, Some(&out)).unwrap();
        let log = fs::read_to_string(out.log_path()).unwrap();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines[0], "step,loss,l_recon,l_texture,l_shape_x,l_shape_y");
        assert_eq!(lines.len(), 5);
        let last = Model::<f32>::load(out.checkpoint_dir(2)).unwrap();
        assert_eq!(last, m);
        assert!(out.checkpoint_dir(1).join("model.txt").is_file());
    }

    #[test]
    fn compact_round_trip_is_exact() {
        let cfg = DatasetConfig { count: 1, size: 32, k_min: 2, k_max: 2, alpha_max: 1.5, ..DatasetConfig::default() };
        let s = generate_sample(&cfg, 0, None).unwrap();
        let c = CompactSample::from_sample(&s).unwrap();
        let p = c.prepare::<f64>(None).unwrap();
        let q = Prepared::<f64>::new(&s, None).unwrap();
        assert_eq!(p.a, q.a);
        assert_eq!(p.target, q.target);
        assert_eq!(p.alpha, q.alpha);
    }
}
