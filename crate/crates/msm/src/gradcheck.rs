//! Central-difference check of the backward pass.

use axmag_core::{rng, Result};
use rand::seq::index;
use rand::Rng as _;

use crate::loss::{loss_graph, LossConfig, Prepared};
use crate::model::Model;
use crate::tape::Tape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Parameters drawn per block (all of them if the block is smaller).
    pub per_block: usize,
    pub step: f64,
    /// Lower bound on the relative-error denominator, so that gradients
    /// that are zero up to rounding do not produce huge ratios.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            per_block: 50,
            step: 1e-5,
            floor: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    /// Parameters whose ±step crossed a ReLU or L1 kink.
    pub skipped: usize,
    pub max_rel_err: f64,
}

/// Replace every bias with a draw from ±`scale`. Zero biases put many
/// pre-activations exactly on a ReLU kink, where no derivative exists.
pub fn randomize_biases(model: &mut Model<f64>, scale: f64, seed: u64) {
    let mut r = rng::seeded(seed);
    for b in model.params.blocks.iter_mut().filter(|b| b.dims.len() == 1) {
        for v in &mut b.data {
            *v = r.random_range(-scale..scale);
        }
    }
}

fn evaluate(model: &Model<f64>, sample: &Prepared<f64>, loss: &LossConfig) -> Result<(f64, Vec<i8>)> {
    let mut t = Tape::new();
    let (_, terms) = loss_graph(model, &mut t, sample, loss)?;
    Ok((terms.total, t.kink_signature()))
}

pub fn check_gradients(
    model: &Model<f64>,
    sample: &Prepared<f64>,
    loss: &LossConfig,
    cfg: &GradCheckConfig,
) -> Result<Vec<BlockCheck>> {
    let mut t = Tape::new();
    let (root, _) = loss_graph(model, &mut t, sample, loss)?;
    let base_sig = t.kink_signature();
    let mut analytic = model.params.zeros_like();
    t.backward(root).accumulate(&mut analytic);
    drop(t);

    let mut rng = rng::seeded(cfg.seed);
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (bi, block) in model.params.blocks.iter().enumerate() {
        let n = block.data.len();
        let picks = index::sample(&mut rng, n, cfg.per_block.min(n)).into_vec();
        let mut report = BlockCheck {
            name: block.name.clone(),
            checked: 0,
            skipped: 0,
            max_rel_err: 0.0,
        };
        for j in picks {
            let orig = block.data[j];
            probe.params.blocks[bi].data[j] = orig + cfg.step;
            let (plus, sp) = evaluate(&probe, sample, loss)?;
            probe.params.blocks[bi].data[j] = orig - cfg.step;
            let (minus, sm) = evaluate(&probe, sample, loss)?;
            probe.params.blocks[bi].data[j] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped += 1;
                continue;
            }
            let num = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[bi][j];
            let err = (num - a).abs() / num.abs().max(a.abs()).max(cfg.floor);
            report.max_rel_err = report.max_rel_err.max(err);
            report.checked += 1;
        }
        out.push(report);
    }
    Ok(out)
}
