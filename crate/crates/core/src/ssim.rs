//! Structural similarity with an 11×11 Gaussian window (σ = 1.5).

use crate::error::{invalid, Result};
use crate::frame::Frame;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps() -> [f64; WINDOW] {
    let mut taps = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Mean SSIM over all valid window positions. 3-channel inputs are reduced to
/// the channel mean first.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    if a.height() < WINDOW || a.width() < WINDOW {
        return Err(invalid(format!(
            "ssim needs frames of at least {WINDOW}x{WINDOW}"
        )));
    }
    let ga = a.to_gray();
    let gb = b.to_gray();
    let (h, w) = (ga.height(), ga.width());
    let x = ga.data();
    let y = gb.data();
    let n = h * w;
    let mut xx = Vec::with_capacity(n);
    let mut yy = Vec::with_capacity(n);
    let mut xy = Vec::with_capacity(n);
    for i in 0..n {
        xx.push(x[i] * x[i]);
        yy.push(y[i] * y[i]);
        xy.push(x[i] * y[i]);
    }
    let taps = gaussian_taps();
    let mu_x = filter_valid(x, h, w, &taps);
    let mu_y = filter_valid(y, h, w, &taps);
    let e_xx = filter_valid(&xx, h, w, &taps);
    let e_yy = filter_valid(&yy, h, w, &taps);
    let e_xy = filter_valid(&xy, h, w, &taps);

    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + C1) * (2.0 * cov + C2))
            / ((mx * mx + my * my + C1) * (vx + vy + C2));
    }
    Ok(total / mu_x.len() as f64)
}

/// Separable "valid" correlation; output is (h - 10) × (w - 10).
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * line[x + k];
            }
            rows[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * rows[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct 2D-window SSIM with scalar loops, no separability.
    fn reference_ssim(a: &Frame, b: &Frame) -> f64 {
        let a = a.to_gray();
        let b = b.to_gray();
        let taps = gaussian_taps();
        let (h, w) = (a.height(), a.width());
        let mut sum = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - WINDOW {
            for x0 in 0..=w - WINDOW {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..WINDOW {
                    for j in 0..WINDOW {
                        let wgt = taps[i] * taps[j];
                        let p = a.get(y0 + i, x0 + j, 0);
                        let q = b.get(y0 + i, x0 + j, 0);
                        mx += wgt * p;
                        my += wgt * q;
                        sxx += wgt * p * p;
                        syy += wgt * q * q;
                        sxy += wgt * p * q;
                    }
                }
                let vx = sxx - mx * mx;
                let vy = syy - my * my;
                let cov = sxy - mx * my;
                sum += ((2.0 * mx * my + C1) * (2.0 * cov + C2))
                    / ((mx * mx + my * my + C1) * (vx + vy + C2));
                count += 1;
            }
        }
        sum / count as f64
    }

    fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Frame {
        Frame::from_fn(h, w, c, |_, _, _| rng.random::<f64>())
    }

    #[test]
    fn identical_frames_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_frame(&mut rng, 32, 40, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_versus_white_is_near_zero() {
        let a = Frame::filled(20, 20, 1, 0.0);
        let b = Frame::filled(20, 20, 1, 1.0);
        let s = ssim(&a, &b).unwrap();
        let closed_form = C1 / (1.0 + C1);
        assert!((s - closed_form).abs() < 1e-12);
        assert!(s < 0.01);
    }

    #[test]
    fn matches_direct_window_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_frame(&mut rng, 64, 64, 1);
        let b = a.map(|v| (v + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0));
        let fast = ssim(&a, &b).unwrap();
        let slow = reference_ssim(&a, &b);
        assert!((fast - slow).abs() < 1e-4, "{fast} vs {slow}");
        let c = random_frame(&mut rng, 64, 64, 3);
        let d = random_frame(&mut rng, 64, 64, 3);
        assert!((ssim(&c, &d).unwrap() - reference_ssim(&c, &d)).abs() < 1e-4);
    }

    #[test]
    fn symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_frame(&mut rng, 30, 25, 3);
        let b = random_frame(&mut rng, 30, 25, 3);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Frame::filled(20, 20, 1, 0.0);
        let b = Frame::filled(20, 21, 1, 0.0);
        assert!(ssim(&a, &b).is_err());
    }
}
