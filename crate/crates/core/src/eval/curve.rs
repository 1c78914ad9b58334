use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datagen::{read_sample, TrainSample};
use crate::error::{invalid, Error, Result};
use crate::frame::Frame;
use crate::magnify::{MagMap, MagnificationSpec, Magnifier, MagnifyRequest};
use crate::ssim::ssim;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub level: usize,
    pub x_value: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub n: usize,
}

/// A method's curve and the input-vs-ground-truth reference curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub method: Vec<CurvePoint>,
    pub reference: Vec<CurvePoint>,
    /// Samples whose evaluation failed and were left out.
    pub skipped: usize,
}

/// Magnification request equivalent to a dataset sample.
///
/// Dataset factors scale the input motion (one means unchanged); magnifiers
/// take the amplification on top of the input motion, hence the shift by one.
pub fn request_for_sample(sample: &TrainSample) -> MagnifyRequest {
    let shift = |a: f64| (a - 1.0).max(0.0);
    let map = MagMap {
        height: sample.mag_map.height,
        width: sample.mag_map.width,
        data: sample.mag_map.data.iter().map(|a| [shift(a[0]), shift(a[1])]).collect(),
    };
    let first = map.data.first().copied().unwrap_or([0.0, 0.0]);
    let uniform = map.data.iter().all(|a| *a == first);
    let spec = MagnificationSpec::axial(sample.angle_deg, first[0], first[1]);
    MagnifyRequest::new(if uniform { spec } else { spec.with_map(map) })
}

/// Adapt a magnifier to a per-sample prediction of the magnified frame.
pub fn magnifier_method(m: &dyn Magnifier) -> impl Fn(&TrainSample) -> Result<Frame> + Sync + '_ {
    move |s: &TrainSample| {
        let out = m.magnify(&[s.frame_a.clone(), s.frame_b.clone()], &request_for_sample(s))?;
        out.into_iter()
            .nth(1)
            .ok_or_else(|| Error::Compute("magnifier returned too few frames".into()))
    }
}

fn aggregate(rows: &[(usize, f64, f64)]) -> Vec<CurvePoint> {
    let max_level = rows.iter().map(|r| r.0).max();
    let Some(max_level) = max_level else {
        return Vec::new();
    };
    (0..=max_level)
        .filter_map(|level| {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.0 == level).map(|r| r.2).collect();
            if v.is_empty() {
                return None;
            }
            let x_value = rows.iter().find(|r| r.0 == level).map(|r| r.1).unwrap_or(0.0);
            // sorted summation keeps results independent of sample order
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                v.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            Some(CurvePoint {
                level,
                x_value,
                ssim_mean: mean,
                ssim_std: var.sqrt(),
                n,
            })
        })
        .collect()
}

/// Evaluate a method over in-memory samples.
pub fn run_curve_on_samples<F>(samples: &[TrainSample], method: F) -> Result<CurveReport>
where
    F: Fn(&TrainSample) -> Result<Frame> + Sync,
{
    let rows: Vec<Option<((usize, f64, f64), (usize, f64, f64))>> = samples
        .par_iter()
        .map(|s| evaluate(s, &method))
        .collect::<Result<_>>()?;
    Ok(report(rows))
}

fn evaluate<F>(s: &TrainSample, method: &F) -> Result<Option<((usize, f64, f64), (usize, f64, f64))>>
where
    F: Fn(&TrainSample) -> Result<Frame> + Sync,
{
    let info = s
        .eval
        .ok_or_else(|| invalid("curve evaluation needs samples from an evaluation set"))?;
    let reference = ssim(&s.frame_b, &s.magnified)?;
    let predicted = match method(s).and_then(|out| ssim(&out.clamp01(), &s.magnified)) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("sample at level {} skipped: {e}", info.level);
            return Ok(None);
        }
    };
    Ok(Some((
        (info.level, info.x_value, predicted),
        (info.level, info.x_value, reference),
    )))
}

fn report(rows: Vec<Option<((usize, f64, f64), (usize, f64, f64))>>) -> CurveReport {
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    let (m, r): (Vec<_>, Vec<_>) = rows.into_iter().flatten().unzip();
    CurveReport {
        method: aggregate(&m),
        reference: aggregate(&r),
        skipped,
    }
}

/// Evaluate a method over sample directories, loading them one at a time.
pub fn run_curve<F>(sample_dirs: &[PathBuf], method: F) -> Result<CurveReport>
where
    F: Fn(&TrainSample) -> Result<Frame> + Sync,
{
    let rows: Vec<_> = sample_dirs
        .par_iter()
        .map(|d| evaluate(&read_sample(d)?, &method))
        .collect::<Result<_>>()?;
    Ok(report(rows))
}

pub fn write_curve_csv(points: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["level", "x_value", "ssim_mean", "ssim_std", "n"])
        .map_err(|e| csv_err(path, e))?;
    for p in points {
        w.write_record([
            p.level.to_string(),
            p.x_value.to_string(),
            p.ssim_mean.to_string(),
            p.ssim_std.to_string(),
            p.n.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Plot named curves on a log x axis as a standalone SVG.
pub fn write_curve_svg(series: &[(&str, &[CurvePoint])], path: impl AsRef<Path>) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#555555"];
    let all: Vec<&CurvePoint> = series.iter().flat_map(|s| s.1.iter()).collect();
    let xs: Vec<f64> = all.iter().map(|p| p.x_value.max(1e-12).log10()).collect();
    let (x0, x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (y0, y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.ssim_mean), b.max(p.ssim_mean))
    });
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let sx = |x: f64| PAD + (x.max(1e-12).log10() - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / span(y0, y1) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    if all.is_empty() {
        svg.push_str("</svg>\n");
    } else {
        let _ = writeln!(svg, r#"<text x="{PAD}" y="{}">{y1:.3}</text>"#, PAD - 6.0);
        let _ = writeln!(svg, r#"<text x="{PAD}" y="{}">{y0:.3}</text>"#, H - PAD + 16.0);
        for (i, (name, pts)) in series.iter().enumerate() {
            let colour = COLOURS[i % COLOURS.len()];
            let coords: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.x_value), sy(p.ssim_mean)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                coords.join(" ")
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
                W - PAD - 120.0,
                PAD + 16.0 * (i as f64 + 1.0),
                xml_escape(name)
            );
        }
        svg.push_str("</svg>\n");
    }
    let path = path.as_ref();
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_sample, DatasetConfig, EvalMode};

    fn samples() -> Vec<TrainSample> {
        let cfg = DatasetConfig {
            count: 2,
            size: 32,
            k_min: 2,
            k_max: 3,
            eval_mode: EvalMode::Subpixel,
            ..DatasetConfig::default()
        };
        (0..6).map(|i| generate_sample(&cfg, i, None).unwrap()).collect()
    }

    #[test]
    fn identity_and_oracle_methods() {
        let s = samples();
        let id = run_curve_on_samples(&s, |s| Ok(s.frame_b.clone())).unwrap();
        assert_eq!(id.method, id.reference);
        assert_eq!(id.method.len(), 3);
        assert!(id.method.iter().all(|p| p.n == 2));
        let oracle = run_curve_on_samples(&s, |s| Ok(s.magnified.clone())).unwrap();
        assert!(oracle.method.iter().all(|p| (p.ssim_mean - 1.0).abs() < 1e-12));
    }

    #[test]
    fn curves_ignore_sample_order() {
        let s = samples();
        let mut r = s.clone();
        r.reverse();
        r.swap(0, 3);
        let f = |s: &TrainSample| Ok(s.frame_a.clone());
        let a = run_curve_on_samples(&s, f).unwrap();
        let b = run_curve_on_samples(&r, f).unwrap();
        for (p, q) in a.method.iter().zip(&b.method) {
            assert!((p.ssim_mean - q.ssim_mean).abs() <= 1e-12);
            assert!((p.ssim_std - q.ssim_std).abs() <= 1e-12);
        }
    }

    #[test]
    fn failures_are_skipped() {
        let s = samples();
        let r = run_curve_on_samples(&s, |s| {
            if s.eval.unwrap().level == 1 {
                Err(Error::Compute("boom".into()))
            } else {
                Ok(s.frame_b.clone())
            }
        })
        .unwrap();
        assert_eq!(r.skipped, 2);
        assert_eq!(r.method.len(), 2);
    }

    #[test]
    fn request_shifts_factors_by_one() {
        let s = &samples()[0];
        let req = request_for_sample(s);
        let a = s.motion.factors[0];
        assert!((req.spec.alpha_par - (a[0] as f32 as f64 - 1.0)).abs() < 1e-9);
        assert!(req.spec.per_pixel_map.is_none());
    }

    #[test]
    fn csv_and_svg_outputs() {
        let s = samples();
        let r = run_curve_on_samples(&s, |s| Ok(s.frame_b.clone())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("c.csv");
        write_curve_csv(&r.method, &csv_path).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("level,x_value,ssim_mean,ssim_std,n\n"));
        assert_eq!(text.lines().count(), 4);
        write_curve_svg(&[("input", &r.reference)], dir.path().join("c.svg")).unwrap();
    }
}
