//! Non-learned magnifiers: linear Eulerian and phase-based (generic and axial).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::filters::{gaussian_blur, weighted_gaussian};
use crate::frame::Frame;
use crate::magnify::{
    MagnificationSpec, Magnifier, MagnifierRegistry, MagnifyRequest, MethodConfig, ReferenceMode,
};
use crate::pyramid::{Band, Bandwidth, FilterBank, PyramidSpec, SteerablePyramid};
use crate::temporal::TemporalFilterSpec;

/// Blur widths of the two-level Gaussian split used by the linear method.
pub const EVM_SIGMAS: [f64; 2] = [1.0, 2.0];

fn check_sequence(frames: &[Frame], min: usize) -> Result<()> {
    if frames.len() < min {
        return Err(invalid(format!(
            "need at least {min} frames, got {}",
            frames.len()
        )));
    }
    for f in &frames[1..] {
        frames[0].ensure_same_dims(f)?;
    }
    Ok(())
}

/// Linear Eulerian magnification.
///
/// Each channel is split into `I - G1`, `G1 - G2` and `G2` (Gaussian blurs
/// with σ = 1 and 2). The finest level is left alone; the two coarser levels
/// are temporally band-passed, scaled by α and added back.
pub fn linear_evm(frames: &[Frame], alpha: f64, tf: &TemporalFilterSpec) -> Result<Vec<Frame>> {
    let spec = MagnificationSpec::generic(alpha);
    linear_evm_with(frames, &spec, tf)
}

fn linear_evm_with(frames: &[Frame], spec: &MagnificationSpec, tf: &TemporalFilterSpec) -> Result<Vec<Frame>> {
    check_sequence(frames, 3)?;
    let (h, w, ch) = frames[0].dims();
    spec.validate(Some((h, w)))?;
    let filter = tf.build()?;
    let gain: Vec<f64> = (0..h * w)
        .map(|i| spec.factors_at(i / w, i % w, h, w)[0])
        .collect();
    let level_gains = [0.0, 1.0, 1.0];

    let mut out: Vec<Vec<f64>> = frames.iter().map(|f| f.data().to_vec()).collect();
    for c in 0..ch {
        // levels[l][t] is level l of frame t
        let mut levels: [Vec<Vec<f64>>; 3] = Default::default();
        for f in frames {
            let plane = f.channel(c).into_data();
            let g1 = gaussian_blur(&plane, h, w, EVM_SIGMAS[0]);
            let g2 = gaussian_blur(&plane, h, w, EVM_SIGMAS[1]);
            levels[0].push(plane.iter().zip(&g1).map(|(a, b)| a - b).collect());
            levels[1].push(g1.iter().zip(&g2).map(|(a, b)| a - b).collect());
            levels[2].push(g2);
        }
        for (series, lg) in levels.iter().zip(level_gains) {
            if lg == 0.0 {
                continue;
            }
            let filtered = filter.filter_frames(series)?;
            for (o, bp) in out.iter_mut().zip(&filtered) {
                for (i, v) in bp.iter().enumerate() {
                    o[i * ch + c] += lg * gain[i] * v;
                }
            }
        }
    }
    out.into_iter().map(|d| Frame::new(h, w, ch, d)).collect()
}

/// Phase-based magnification with one factor for every orientation.
pub fn phase_mag_generic(
    frames: &[Frame],
    alpha: f64,
    tf: Option<&TemporalFilterSpec>,
    pspec: &PyramidSpec,
    mode: ReferenceMode,
) -> Result<Vec<Frame>> {
    let mspec = MagnificationSpec::generic(alpha).with_mode(mode);
    PhaseEngine::new(pspec.clone(), false).run(frames, &mspec, tf)
}

/// Axial phase-based magnification on a two-orientation bank whose first
/// orientation is aligned with φ.
pub fn phase_mag_axial(
    frames: &[Frame],
    pspec: &PyramidSpec,
    mspec: &MagnificationSpec,
    tf: Option<&TemporalFilterSpec>,
) -> Result<Vec<Frame>> {
    if pspec.orientations != 2 {
        return Err(invalid(format!(
            "axial magnification needs 2 orientations, got {}",
            pspec.orientations
        )));
    }
    let mut pspec = pspec.clone();
    pspec.angle_offset_deg = mspec.angle_deg;
    PhaseEngine::new(pspec, true).run(frames, mspec, tf)
}

/// Shared machinery of the phase-based methods.
#[derive(Debug, Clone)]
pub struct PhaseEngine {
    pyramid: PyramidSpec,
    axial: bool,
    /// σ of the amplitude-weighted smoothing, in band pixels.
    pub sigma: f64,
}

impl PhaseEngine {
    pub fn new(pyramid: PyramidSpec, axial: bool) -> Self {
        PhaseEngine {
            pyramid,
            axial,
            sigma: 2.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn run(
        &self,
        frames: &[Frame],
        mspec: &MagnificationSpec,
        tf: Option<&TemporalFilterSpec>,
    ) -> Result<Vec<Frame>> {
        check_sequence(frames, 2)?;
        let (h, w, ch) = frames[0].dims();
        mspec.validate(Some((h, w)))?;
        let mut pspec = self.pyramid.clone();
        pspec.include_residuals = true;
        let bank = FilterBank::new(h, w, &pspec)?;

        let template = bank.build(&Frame::filled(h, w, 1, 0.0))?;
        let gains: Vec<Vec<f64>> = template
            .bands
            .iter()
            .map(|b| {
                let slot = if self.axial { b.orientation.min(1) } else { 0 };
                (0..b.height * b.width)
                    .map(|i| mspec.factors_at(i / b.width, i % b.width, b.height, b.width)[slot])
                    .collect()
            })
            .collect();

        let mut planes: Vec<Vec<Frame>> = Vec::with_capacity(ch);
        for c in 0..ch {
            let seq: Vec<Frame> = frames.iter().map(|f| f.channel(c)).collect();
            let out = match tf {
                None => self.run_streaming(&bank, &seq, &gains, mspec.mode)?,
                Some(tf) => self.run_filtered(&bank, &seq, &gains, mspec.mode, tf)?,
            };
            planes.push(out);
        }
        (0..frames.len())
            .map(|t| {
                let chans: Vec<Frame> = planes.iter().map(|p| p[t].clone()).collect();
                Frame::from_planes(&chans)
            })
            .collect()
    }

    fn amplify(&self, band: &mut Band, delta: &[f64], gain: &[f64]) {
        if gain.iter().all(|g| *g == 0.0) {
            return;
        }
        let weights: Vec<f64> = band.coeffs.iter().map(|c| c.norm_sqr()).collect();
        let smooth = weighted_gaussian(delta, &weights, band.height, band.width, self.sigma);
        for ((c, d), g) in band.coeffs.iter_mut().zip(&smooth).zip(gain) {
            *c *= Complex64::from_polar(1.0, g * d);
        }
    }

    /// Without a temporal filter each frame only needs the reference state.
    fn run_streaming(
        &self,
        bank: &FilterBank,
        seq: &[Frame],
        gains: &[Vec<f64>],
        mode: ReferenceMode,
    ) -> Result<Vec<Frame>> {
        let reference = bank.build(&seq[0])?;
        let mut prev = reference.clone();
        let mut acc: Vec<Vec<f64>> = reference.bands.iter().map(|b| vec![0.0; b.coeffs.len()]).collect();
        let mut out = Vec::with_capacity(seq.len());
        for frame in seq {
            let mut pyr = bank.build(frame)?;
            let current = pyr.bands.clone();
            pyr.bands
                .par_iter_mut()
                .zip(acc.par_iter_mut())
                .enumerate()
                .for_each(|(bi, (band, acc))| {
                    let base = match mode {
                        ReferenceMode::Static => &reference.bands[bi],
                        ReferenceMode::Dynamic => &prev.bands[bi],
                    };
                    let step = phase_difference(band, base);
                    match mode {
                        ReferenceMode::Static => *acc = step,
                        ReferenceMode::Dynamic => acc.iter_mut().zip(&step).for_each(|(a, s)| *a += s),
                    }
                    self.amplify(band, acc, &gains[bi]);
                });
            out.push(bank.collapse(&pyr)?);
            prev.bands = current;
        }
        Ok(out)
    }

    fn run_filtered(
        &self,
        bank: &FilterBank,
        seq: &[Frame],
        gains: &[Vec<f64>],
        mode: ReferenceMode,
        tf: &TemporalFilterSpec,
    ) -> Result<Vec<Frame>> {
        let filter = tf.build()?;
        let mut pyrs: Vec<SteerablePyramid> = seq.iter().map(|f| bank.build(f)).collect::<Result<_>>()?;
        let nb = pyrs[0].bands.len();
        for bi in 0..nb {
            let mut deltas: Vec<Vec<f64>> = Vec::with_capacity(pyrs.len());
            let mut acc = vec![0.0; pyrs[0].bands[bi].coeffs.len()];
            for t in 0..pyrs.len() {
                let base = match mode {
                    ReferenceMode::Static => 0,
                    ReferenceMode::Dynamic => t.saturating_sub(1),
                };
                let step = phase_difference(&pyrs[t].bands[bi], &pyrs[base].bands[bi]);
                match mode {
                    ReferenceMode::Static => acc = step,
                    ReferenceMode::Dynamic => acc.iter_mut().zip(&step).for_each(|(a, s)| *a += s),
                }
                deltas.push(acc.clone());
            }
            let filtered = filter.filter_frames(&deltas)?;
            pyrs.par_iter_mut()
                .zip(filtered.par_iter())
                .for_each(|(p, d)| self.amplify(&mut p.bands[bi], d, &gains[bi]));
        }
        pyrs.iter().map(|p| bank.collapse(p)).collect()
    }
}

/// Wrapped phase of `a` relative to `b`, element-wise.
fn phase_difference(a: &Band, b: &Band) -> Vec<f64> {
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x * y.conj()).arg())
        .collect()
}

/// Linear Eulerian method; needs a temporal filter and at least 3 frames.
pub struct LinearMagnifier;

impl Magnifier for LinearMagnifier {
    fn name(&self) -> &str {
        "linear"
    }

    fn magnify(&self, frames: &[Frame], request: &MagnifyRequest) -> Result<Vec<Frame>> {
        let tf = request
            .filter
            .as_ref()
            .ok_or_else(|| invalid("the linear method needs a temporal filter"))?;
        linear_evm_with(frames, &request.spec, tf)
    }
}

/// Generic phase-based method: every orientation gets `alpha_par`.
pub struct PhaseMagnifier {
    pyramid: PyramidSpec,
    sigma: f64,
}

impl Magnifier for PhaseMagnifier {
    fn name(&self) -> &str {
        "phase"
    }

    fn magnify(&self, frames: &[Frame], request: &MagnifyRequest) -> Result<Vec<Frame>> {
        PhaseEngine::new(self.pyramid.clone(), false)
            .with_sigma(self.sigma)
            .run(frames, &request.spec, request.filter.as_ref())
    }
}

/// Axial phase-based method on a two-orientation half-octave bank.
pub struct AxialPhaseMagnifier {
    sigma: f64,
}

impl Magnifier for AxialPhaseMagnifier {
    fn name(&self) -> &str {
        "axial-phase"
    }

    fn is_axial(&self) -> bool {
        true
    }

    fn magnify(&self, frames: &[Frame], request: &MagnifyRequest) -> Result<Vec<Frame>> {
        let pspec = PyramidSpec::axial(request.spec.angle_deg);
        PhaseEngine::new(pspec, true)
            .with_sigma(self.sigma)
            .run(frames, &request.spec, request.filter.as_ref())
    }
}

fn check_sigma(config: &MethodConfig) -> Result<f64> {
    if config.phase_sigma.is_finite() && config.phase_sigma >= 0.0 {
        Ok(config.phase_sigma)
    } else {
        Err(invalid("phase smoothing sigma must be >= 0"))
    }
}

/// Add `linear`, `phase` and `axial-phase` to a registry.
pub fn register(registry: &mut MagnifierRegistry) {
    registry.register("linear", |_| Ok(Box::new(LinearMagnifier)));
    registry.register("phase", |cfg| {
        let pyramid = PyramidSpec::new(cfg.orientations, cfg.bandwidth);
        pyramid.validate()?;
        Ok(Box::new(PhaseMagnifier {
            pyramid,
            sigma: check_sigma(cfg)?,
        }))
    });
    registry.register("axial-phase", |cfg| {
        Ok(Box::new(AxialPhaseMagnifier {
            sigma: check_sigma(cfg)?,
        }))
    });
}

/// Half-octave generic bank with `k` orientations.
pub fn default_phase_pyramid(k: usize) -> PyramidSpec {
    PyramidSpec::new(k, Bandwidth::HalfOctave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::FilterKind;
    use rand::Rng;
    use std::f64::consts::PI;

    fn grating(n: usize, lambda: f64, shift: f64) -> Frame {
        Frame::from_fn(n, n, 1, |_, x, _| {
            0.5 + 0.25 * (2.0 * PI * (x as f64 - shift) / lambda).cos()
        })
    }

    /// Horizontal shift of a periodic x-grating from the phase of its
    /// fundamental, averaged over rows.
    fn grating_shift(a: &Frame, b: &Frame, lambda: f64) -> f64 {
        let (h, w) = (a.height(), a.width());
        let k = 2.0 * PI / lambda;
        let mut acc = Complex64::default();
        for y in 0..h {
            let (mut fa, mut fb) = (Complex64::default(), Complex64::default());
            for x in 0..w {
                let e = Complex64::from_polar(1.0, -k * x as f64);
                fa += a.get(y, x, 0) * e;
                fb += b.get(y, x, 0) * e;
            }
            acc += fb * fa.conj();
        }
        -acc.arg() / k
    }

    fn texture(n: usize, seed: u64) -> Frame {
        let mut rng = crate::rng::seeded(seed);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let smooth = gaussian_blur(&raw, n, n, 2.0);
        Frame::new(n, n, 1, smooth.iter().map(|v| (v - 0.5) * 3.0 + 0.5).collect()).unwrap()
    }

    fn ideal(low: f64, high: f64, fps: f64) -> TemporalFilterSpec {
        TemporalFilterSpec::new(FilterKind::IdealFft, low, high, fps).unwrap()
    }

    #[test]
    fn linear_static_video_is_untouched() {
        let f = texture(32, 1);
        let frames = vec![f.clone(); 8];
        let out = linear_evm(&frames, 20.0, &ideal(1.0, 4.0, 30.0)).unwrap();
        for o in &out {
            assert!(o.max_abs_diff(&f) < 1e-12);
        }
        let moving: Vec<Frame> = (0..8)
            .map(|t| translate_x(&f, 0.1 * t as f64))
            .collect();
        let out = linear_evm(&moving, 0.0, &ideal(1.0, 4.0, 30.0)).unwrap();
        for (o, i) in out.iter().zip(&moving) {
            assert_eq!(o, i);
        }
    }

    fn translate_x(f: &Frame, dx: f64) -> Frame {
        crate::frame::translate_bilinear(f, dx, 0.0, crate::frame::Boundary::Replicate).unwrap()
    }

    #[test]
    fn linear_on_a_ramp_scales_motion_by_one_plus_alpha() {
        let (n, fps, slope) = (64, 30.0, 1.0 / 80.0);
        let disp = |t: usize| 0.1 * (2.0 * PI * t as f64 / fps).sin();
        let ramp = |d: f64| Frame::from_fn(n, n, 1, move |_, x, _| 0.1 + slope * (x as f64 - d));
        let frames: Vec<Frame> = (0..60).map(|t| ramp(disp(t))).collect();
        let out = linear_evm(&frames, 9.0, &ideal(0.5, 1.5, fps)).unwrap();
        let still = ramp(0.0);
        let mut peak: f64 = 0.0;
        for o in &out {
            let mut s = 0.0;
            let mut cnt = 0.0;
            for y in 10..n - 10 {
                for x in 10..n - 10 {
                    s += (still.get(y, x, 0) - o.get(y, x, 0)) / slope;
                    cnt += 1.0;
                }
            }
            peak = peak.max((s / cnt).abs());
        }
        assert!((peak - 1.0).abs() <= 0.15, "peak displacement {peak}");
    }

    #[test]
    fn linear_needs_three_frames() {
        let f = texture(32, 2);
        assert!(linear_evm(&[f.clone(), f], 2.0, &ideal(1.0, 4.0, 30.0)).is_err());
    }

    #[test]
    fn phase_on_static_frames_reconstructs_input() {
        let f = texture(64, 3);
        let pspec = default_phase_pyramid(4);
        let out = phase_mag_generic(&[f.clone(), f.clone(), f.clone()], 10.0, None, &pspec, ReferenceMode::Static)
            .unwrap();
        for o in &out {
            assert!(o.max_abs_diff(&f) < 1e-4);
        }
    }

    #[test]
    fn phase_grating_displacement_is_amplified() {
        let lambda = 16.0;
        let frames = [grating(64, lambda, 0.0), grating(64, lambda, 0.2)];
        let pspec = default_phase_pyramid(4);
        let run = |alpha: f64| {
            let out = phase_mag_generic(&frames, alpha, None, &pspec, ReferenceMode::Static).unwrap();
            grating_shift(&out[0], &out[1], lambda)
        };
        let d9 = run(9.0);
        assert!((d9 - 2.0).abs() <= 0.2, "alpha 9 moved {d9}");
        let d0 = run(0.0);
        assert!((d0 - 0.2).abs() <= 0.02, "alpha 0 moved {d0}");
    }

    #[test]
    fn phase_displacement_grows_linearly() {
        for &lambda in &[8.0, 16.0] {
            for &delta in &[0.1, 0.3, 0.5] {
                let frames = [grating(64, lambda, 0.0), grating(64, lambda, delta)];
                for &alpha in &[1.0, 3.0, 6.0] {
                    if (1.0 + alpha) * delta * 2.0 >= lambda / 2.0 {
                        continue;
                    }
                    let out = phase_mag_generic(
                        &frames,
                        alpha,
                        None,
                        &default_phase_pyramid(4),
                        ReferenceMode::Static,
                    )
                    .unwrap();
                    let got = grating_shift(&out[0], &out[1], lambda);
                    let want = (1.0 + alpha) * delta;
                    assert!(
                        (got - want).abs() <= 0.1 * want,
                        "lambda {lambda} delta {delta} alpha {alpha}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn static_and_dynamic_agree_on_two_frames() {
        let a = texture(64, 4);
        let b = translate_x(&a, 0.3);
        let pspec = default_phase_pyramid(2);
        let s = phase_mag_generic(&[a.clone(), b.clone()], 5.0, None, &pspec, ReferenceMode::Static).unwrap();
        let d = phase_mag_generic(&[a, b], 5.0, None, &pspec, ReferenceMode::Dynamic).unwrap();
        assert_eq!(s, d);
    }

    #[test]
    fn dynamic_accumulates_small_steps() {
        let lambda = 16.0;
        let frames: Vec<Frame> = (0..5).map(|t| grating(64, lambda, 0.1 * t as f64)).collect();
        let pspec = default_phase_pyramid(4);
        let out = phase_mag_generic(&frames, 4.0, None, &pspec, ReferenceMode::Dynamic).unwrap();
        let d = grating_shift(&out[0], &out[4], lambda);
        assert!((d - 2.0).abs() < 0.2, "{d}");
    }

    #[test]
    fn axial_with_equal_factors_matches_generic() {
        let a = texture(64, 5);
        let b = crate::frame::translate_bilinear(&a, 0.3, -0.2, crate::frame::Boundary::Replicate).unwrap();
        let frames = [a, b];
        for angle in [0.0, 30.0] {
            let mut bank = PyramidSpec::new(2, Bandwidth::HalfOctave);
            bank.angle_offset_deg = angle;
            let generic = phase_mag_generic(&frames, 4.0, None, &bank, ReferenceMode::Static).unwrap();
            let axial = phase_mag_axial(
                &frames,
                &PyramidSpec::axial(angle),
                &MagnificationSpec::axial(angle, 4.0, 4.0),
                None,
            )
            .unwrap();
            let diff = axial[1].mean_abs_diff(&generic[1]);
            assert!(diff < 1e-3, "angle {angle}: mean abs diff {diff}");
        }
    }

    #[test]
    fn axial_swapped_axes_give_identical_output() {
        let a = texture(64, 6);
        let b = crate::frame::translate_bilinear(&a, 0.4, 0.25, crate::frame::Boundary::Replicate).unwrap();
        let frames = [a, b];
        let one = phase_mag_axial(&frames, &PyramidSpec::axial(30.0), &MagnificationSpec::axial(30.0, 6.0, 1.0), None)
            .unwrap();
        let two = phase_mag_axial(&frames, &PyramidSpec::axial(120.0), &MagnificationSpec::axial(120.0, 1.0, 6.0), None)
            .unwrap();
        assert!(one[1].max_abs_diff(&two[1]) < 1e-6);
    }

    #[test]
    fn axial_suppresses_the_orthogonal_axis() {
        // x-grating: motion along x is seen only by the band at φ = 0
        let lambda = 16.0;
        let frames = [grating(64, lambda, 0.0), grating(64, lambda, 0.2)];
        let par = phase_mag_axial(&frames, &PyramidSpec::axial(0.0), &MagnificationSpec::axial(0.0, 9.0, 0.0), None)
            .unwrap();
        let d = grating_shift(&par[0], &par[1], lambda);
        assert!((d - 2.0).abs() < 0.2, "{d}");
        let perp = phase_mag_axial(&frames, &PyramidSpec::axial(90.0), &MagnificationSpec::axial(90.0, 9.0, 0.0), None)
            .unwrap();
        let d = grating_shift(&perp[0], &perp[1], lambda);
        assert!((d - 0.2).abs() < 0.02, "{d}");
    }

    #[test]
    fn axial_requires_two_orientations() {
        let f = texture(64, 7);
        let bad = PyramidSpec::new(4, Bandwidth::HalfOctave);
        assert!(phase_mag_axial(&[f.clone(), f], &bad, &MagnificationSpec::axial(0.0, 1.0, 1.0), None).is_err());
    }

    #[test]
    fn temporal_filter_selects_the_motion_band() {
        // 1 Hz sway plus a 5 Hz jitter; only the sway is magnified
        let (lambda, fps) = (16.0, 30.0);
        let disp = |t: usize| {
            let s = t as f64 / fps;
            0.1 * (2.0 * PI * s).sin() + 0.1 * (2.0 * PI * 5.0 * s).sin()
        };
        let frames: Vec<Frame> = (0..30).map(|t| grating(64, lambda, disp(t))).collect();
        let tf = ideal(0.5, 1.5, fps);
        let out = phase_mag_generic(&frames, 9.0, Some(&tf), &default_phase_pyramid(2), ReferenceMode::Static)
            .unwrap();
        for t in [3, 7, 12, 20] {
            let got = grating_shift(&frames[0], &out[t], lambda);
            let sway = 0.1 * (2.0 * PI * t as f64 / fps).sin();
            let want = disp(t) + 9.0 * sway;
            assert!((got - want).abs() < 0.05, "t {t}: {got} vs {want}");
        }
    }

    #[test]
    fn registry_methods_run() {
        let reg = MagnifierRegistry::with_classical();
        let f = texture(64, 8);
        let frames: Vec<Frame> = (0..4).map(|t| translate_x(&f, 0.05 * t as f64)).collect();
        let req = MagnifyRequest::new(MagnificationSpec::axial(45.0, 3.0, 0.0))
            .with_filter(ideal(1.0, 10.0, 30.0));
        for name in ["linear", "phase", "axial-phase"] {
            let m = reg.build(name, &MethodConfig::default()).unwrap();
            let out = m.magnify(&frames, &req).unwrap();
            assert_eq!(out.len(), frames.len());
            assert_eq!(m.name(), name);
        }
    }

    #[test]
    fn colour_channels_are_processed_independently() {
        let g = texture(64, 9);
        let r = texture(64, 10);
        let rgb = Frame::from_planes(&[r.clone(), g.clone(), r.clone()]).unwrap();
        let rgb2 = Frame::from_planes(&[translate_x(&r, 0.2), translate_x(&g, 0.2), translate_x(&r, 0.2)]).unwrap();
        let pspec = default_phase_pyramid(2);
        let col = phase_mag_generic(&[rgb, rgb2], 3.0, None, &pspec, ReferenceMode::Static).unwrap();
        let mono = phase_mag_generic(&[g.clone(), translate_x(&g, 0.2)], 3.0, None, &pspec, ReferenceMode::Static)
            .unwrap();
        assert!(col[1].channel(1).max_abs_diff(&mono[1]) < 1e-12);
    }
}
