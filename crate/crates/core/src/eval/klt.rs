use std::path::Path;

use rayon::prelude::*;

use crate::error::{dims, invalid, Error, Result};
use crate::frame::{Boundary, Frame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KltParams {
    /// Side of the square integration window.
    pub window: usize,
    pub levels: usize,
    pub iterations: usize,
    /// Stop once an update is shorter than this (px).
    pub epsilon: f64,
    pub max_corners: usize,
    pub min_distance: f64,
    /// Corners weaker than this fraction of the strongest are dropped.
    pub quality: f64,
}

impl Default for KltParams {
    fn default() -> Self {
        KltParams {
            window: 15,
            levels: 3,
            iterations: 30,
            epsilon: 1e-3,
            max_corners: 100,
            min_distance: 8.0,
            quality: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    /// (x, y) per frame.
    pub positions: Vec<(f64, f64)>,
    pub valid: Vec<bool>,
}

impl Track {
    /// Displacement from the first frame, where still valid.
    pub fn displacement(&self, frame: usize) -> Option<(f64, f64)> {
        if !self.valid[frame] {
            return None;
        }
        let (x0, y0) = self.positions[0];
        let (x, y) = self.positions[frame];
        Some((x - x0, y - y0))
    }
}

struct Level {
    h: usize,
    w: usize,
    img: Frame,
    gx: Frame,
    gy: Frame,
}

impl Level {
    fn new(img: Frame) -> Level {
        let (h, w, _) = img.dims();
        let at = |y: isize, x: isize| img.get(y.clamp(0, h as isize - 1) as usize, x.clamp(0, w as isize - 1) as usize, 0);
        // Scharr derivative
        let gx = Frame::from_fn(h, w, 1, |y, x, _| {
            let (y, x) = (y as isize, x as isize);
            (3.0 * (at(y - 1, x + 1) - at(y - 1, x - 1))
                + 10.0 * (at(y, x + 1) - at(y, x - 1))
                + 3.0 * (at(y + 1, x + 1) - at(y + 1, x - 1)))
                / 32.0
        });
        let gy = Frame::from_fn(h, w, 1, |y, x, _| {
            let (y, x) = (y as isize, x as isize);
            (3.0 * (at(y + 1, x - 1) - at(y - 1, x - 1))
                + 10.0 * (at(y + 1, x) - at(y - 1, x))
                + 3.0 * (at(y + 1, x + 1) - at(y - 1, x + 1)))
                / 32.0
        });
        Level { h, w, img, gx, gy }
    }

    #[inline]
    fn sample(f: &Frame, x: f64, y: f64) -> f64 {
        f.sample_bilinear(y, x, 0, Boundary::Replicate)
    }
}

fn downsample(f: &Frame) -> Frame {
    let (h, w, _) = f.dims();
    let taps = [1.0, 4.0, 6.0, 4.0, 1.0].map(|v| v / 16.0);
    let blurred = crate::filters::convolve_separable(f.data(), h, w, &taps);
    let (nh, nw) = (h.div_ceil(2), w.div_ceil(2));
    Frame::from_fn(nh, nw, 1, |y, x, _| blurred[(2 * y) * w + 2 * x])
}

fn build_pyramid(frame: &Frame, levels: usize, window: usize) -> Vec<Level> {
    let mut out = vec![Level::new(frame.to_gray())];
    while out.len() < levels {
        let last = &out[out.len() - 1];
        if last.h.min(last.w) / 2 < 2 * window {
            break;
        }
        let next = downsample(&last.img);
        out.push(Level::new(next));
    }
    out
}

/// Pyramidal Lucas-Kanade for one point between two prepared pyramids.
fn track_point(a: &[Level], b: &[Level], p: (f64, f64), params: &KltParams) -> Option<(f64, f64)> {
    let r = (params.window / 2) as isize;
    let levels = a.len().min(b.len());
    let mut g = (0.0, 0.0);
    for l in (0..levels).rev() {
        let (la, lb) = (&a[l], &b[l]);
        let s = (1u64 << l) as f64;
        let (px, py) = (p.0 / s, p.1 / s);
        let mut tmpl = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (px + dx as f64, py + dy as f64);
                let ix = Level::sample(&la.gx, x, y);
                let iy = Level::sample(&la.gy, x, y);
                tmpl.push((Level::sample(&la.img, x, y), ix, iy, dx as f64, dy as f64));
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
            }
        }
        let det = gxx * gyy - gxy * gxy;
        let n = tmpl.len() as f64;
        let min_eig = 0.5 * (gxx + gyy - ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt()) / n;
        if min_eig < 1e-10 || det.abs() < 1e-30 {
            return None;
        }
        let mut v = (0.0, 0.0);
        for _ in 0..params.iterations {
            let (mut bx, mut by) = (0.0, 0.0);
            for &(i, ix, iy, dx, dy) in &tmpl {
                let j = Level::sample(&lb.img, px + g.0 + v.0 + dx, py + g.1 + v.1 + dy);
                let e = i - j;
                bx += e * ix;
                by += e * iy;
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            v.0 += ex;
            v.1 += ey;
            if !v.0.is_finite() || !v.1.is_finite() {
                return None;
            }
            if ex * ex + ey * ey < params.epsilon * params.epsilon {
                break;
            }
        }
        g = if l > 0 {
            (2.0 * (g.0 + v.0), 2.0 * (g.1 + v.1))
        } else {
            (g.0 + v.0, g.1 + v.1)
        };
    }
    let q = (p.0 + g.0, p.1 + g.1);
    let (w, h) = (a[0].w as f64, a[0].h as f64);
    if q.0 < 0.0 || q.1 < 0.0 || q.0 > w - 1.0 || q.1 > h - 1.0 {
        return None;
    }
    Some(q)
}

/// Strongest min-eigenvalue corners, at least `min_distance` apart and a
/// window away from the border.
pub fn good_features(frame: &Frame, params: &KltParams) -> Vec<(f64, f64)> {
    let lvl = Level::new(frame.to_gray());
    let (h, w) = (lvl.h, lvl.w);
    let r = params.window / 2;
    let margin = params.window;
    if h <= 2 * margin || w <= 2 * margin {
        return Vec::new();
    }
    let prod = |a: &Frame, b: &Frame| -> Vec<f64> { a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect() };
    let box_sum = |v: Vec<f64>| {
        let k = vec![1.0; 2 * r + 1];
        crate::filters::convolve_separable(&v, h, w, &k)
    };
    let sxx = box_sum(prod(&lvl.gx, &lvl.gx));
    let sxy = box_sum(prod(&lvl.gx, &lvl.gy));
    let syy = box_sum(prod(&lvl.gy, &lvl.gy));
    let mut cands = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            let i = y * w + x;
            let (a, b, c) = (sxx[i], sxy[i], syy[i]);
            let e = 0.5 * (a + c - ((a - c).powi(2) + 4.0 * b * b).sqrt());
            cands.push((e, x, y));
        }
    }
    let best = cands.iter().map(|c| c.0).fold(0.0, f64::max);
    if best <= 0.0 {
        return Vec::new();
    }
    cands.retain(|c| c.0 >= params.quality * best);
    cands.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.2.cmp(&q.2)).then(p.1.cmp(&q.1)));
    let mut picked: Vec<(f64, f64)> = Vec::new();
    let d2 = params.min_distance * params.min_distance;
    for (_, x, y) in cands {
        let (x, y) = (x as f64, y as f64);
        if picked.iter().all(|p| (p.0 - x).powi(2) + (p.1 - y).powi(2) >= d2) {
            picked.push((x, y));
            if picked.len() == params.max_corners {
                break;
            }
        }
    }
    picked
}

/// Track points between two frames; `None` where tracking failed.
pub fn track_pair(a: &Frame, b: &Frame, points: &[(f64, f64)], params: &KltParams) -> Result<Vec<Option<(f64, f64)>>> {
    a.ensure_same_dims(b)?;
    let pa = build_pyramid(a, params.levels, params.window);
    let pb = build_pyramid(b, params.levels, params.window);
    Ok(points.par_iter().map(|&p| track_point(&pa, &pb, p, params)).collect())
}

/// Track points (or automatically chosen corners) through a sequence,
/// frame to frame. A track that fails stays invalid from then on.
pub fn klt_track(frames: &[Frame], points: Option<&[(f64, f64)]>, params: &KltParams) -> Result<Vec<Track>> {
    if frames.len() < 2 {
        return Err(invalid(format!("tracking needs at least 2 frames, got {}", frames.len())));
    }
    if params.window < 3 || params.window % 2 == 0 || params.levels == 0 {
        return Err(invalid("KLT window must be odd and >= 3, with at least one level"));
    }
    for f in &frames[1..] {
        frames[0].ensure_same_dims(f)?;
    }
    let (h, w, _) = frames[0].dims();
    let starts: Vec<(f64, f64)> = match points {
        Some(p) => {
            if let Some(bad) = p
                .iter()
                .find(|(x, y)| !(*x >= 0.0 && *y >= 0.0 && *x <= (w - 1) as f64 && *y <= (h - 1) as f64))
            {
                return Err(dims(format!("track point {bad:?} lies outside the {w}x{h} frame")));
            }
            p.to_vec()
        }
        None => good_features(&frames[0], params),
    };
    let mut tracks: Vec<Track> = starts
        .iter()
        .enumerate()
        .map(|(id, &p)| Track {
            id,
            positions: vec![p],
            valid: vec![true],
        })
        .collect();
    let mut prev = build_pyramid(&frames[0], params.levels, params.window);
    for f in &frames[1..] {
        let next = build_pyramid(f, params.levels, params.window);
        let moved: Vec<Option<(f64, f64)>> = tracks
            .par_iter()
            .map(|t| {
                let last = *t.positions.last().expect("non-empty");
                if *t.valid.last().expect("non-empty") {
                    track_point(&prev, &next, last, params)
                } else {
                    None
                }
            })
            .collect();
        for (t, m) in tracks.iter_mut().zip(moved) {
            let last = *t.positions.last().expect("non-empty");
            t.positions.push(m.unwrap_or(last));
            t.valid.push(m.is_some());
        }
        prev = next;
    }
    Ok(tracks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryReport {
    /// RMS of (magnified − α·original) along the axis.
    pub axis_rms: f64,
    /// RMS of (magnified − original) across the axis.
    pub orthogonal_rms: f64,
    pub samples: usize,
}

/// Compare magnified against original trajectories, per axis.
pub fn compare_amplified_trajectories(
    orig: &[Track],
    mag: &[Track],
    alpha: f64,
    axis_deg: f64,
) -> Result<TrajectoryReport> {
    if orig.len() != mag.len() {
        return Err(invalid(format!("{} original tracks vs {} magnified", orig.len(), mag.len())));
    }
    let (s, c) = axis_deg.to_radians().sin_cos();
    let (mut ea, mut eo, mut n) = (0.0, 0.0, 0usize);
    for (o, m) in orig.iter().zip(mag) {
        if o.positions.len() != m.positions.len() {
            return Err(invalid("tracks differ in frame count"));
        }
        for t in 0..o.positions.len() {
            if let (Some(a), Some(b)) = (o.displacement(t), m.displacement(t)) {
                let (pa, qa) = (a.0 * c + a.1 * s, -a.0 * s + a.1 * c);
                let (pb, qb) = (b.0 * c + b.1 * s, -b.0 * s + b.1 * c);
                ea += (pb - alpha * pa).powi(2);
                eo += (qb - qa).powi(2);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(invalid("no valid track samples to compare"));
    }
    Ok(TrajectoryReport {
        axis_rms: (ea / n as f64).sqrt(),
        orthogonal_rms: (eo / n as f64).sqrt(),
        samples: n,
    })
}

/// Tracks as CSV rows `track_id,frame,x,y,status`.
pub fn write_tracks_csv(tracks: &[Track], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["track_id", "frame", "x", "y", "status"]).map_err(io)?;
    for t in tracks {
        for (f, (&(x, y), &ok)) in t.positions.iter().zip(&t.valid).enumerate() {
            w.write_record(&[
                t.id.to_string(),
                f.to_string(),
                x.to_string(),
                y.to_string(),
                if ok { "ok" } else { "lost" }.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::gaussian_blur;
    use crate::frame::translate_bilinear;
    use rand::Rng;

    fn texture(n: usize, seed: u64) -> Frame {
        let mut rng = crate::rng::seeded(seed);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let s = gaussian_blur(&raw, n, n, 1.5);
        Frame::new(n, n, 1, s.iter().map(|v| (v - 0.5) * 4.0 + 0.5).collect()).unwrap()
    }

    #[test]
    fn track_csv_has_one_row_per_frame() {
        let tracks = vec![Track { id: 3, positions: vec![(1.0, 2.0), (1.5, 2.0)], valid: vec![true, false] }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_tracks_csv(&tracks, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "track_id,frame,x,y,status\n3,0,1,2,ok\n3,1,1.5,2,lost\n");
    }

    #[test]
    fn static_video_has_no_motion() {
        let f = texture(64, 1);
        let tracks = klt_track(&[f.clone(), f.clone(), f], None, &KltParams::default()).unwrap();
        assert!(!tracks.is_empty());
        for t in &tracks {
            let d = t.displacement(2).unwrap();
            assert!(d.0.abs() < 1e-3 && d.1.abs() < 1e-3);
        }
    }

    #[test]
    fn half_pixel_shift_is_recovered() {
        let f = texture(64, 2);
        let g = translate_bilinear(&f, 0.5, 0.0, Boundary::Replicate).unwrap();
        let tracks = klt_track(&[f, g], None, &KltParams::default()).unwrap();
        let valid: Vec<(f64, f64)> = tracks.iter().filter_map(|t| t.displacement(1)).collect();
        assert!(valid.len() >= 5);
        let n = valid.len() as f64;
        let dx = valid.iter().map(|d| d.0).sum::<f64>() / n;
        let dy = valid.iter().map(|d| d.1).sum::<f64>() / n;
        assert!((dx - 0.5).abs() <= 0.05, "dx {dx}");
        assert!(dy.abs() <= 0.05, "dy {dy}");
    }

    #[test]
    fn linear_drift_accumulates() {
        let f = texture(96, 3);
        let frames: Vec<Frame> = (0..10)
            .map(|t| translate_bilinear(&f, t as f64, 0.0, Boundary::Replicate).unwrap())
            .collect();
        let pts = [(40.0, 40.0), (48.0, 30.0), (35.0, 55.0)];
        let tracks = klt_track(&frames, Some(&pts), &KltParams::default()).unwrap();
        for t in &tracks {
            let d = t.displacement(9).unwrap();
            assert!((d.0 - 9.0).abs() <= 0.2 && d.1.abs() <= 0.2, "{d:?}");
        }
    }

    #[test]
    fn forward_and_backward_tracking_agree() {
        let f = texture(64, 4);
        let g = translate_bilinear(&f, 0.3, -0.7, Boundary::Replicate).unwrap();
        let p = KltParams::default();
        let pts = good_features(&f, &p);
        let fwd = track_pair(&f, &g, &pts, &p).unwrap();
        let back_pts: Vec<(f64, f64)> = fwd.iter().map(|q| q.unwrap()).collect();
        let back = track_pair(&g, &f, &back_pts, &p).unwrap();
        for ((p0, p1), p2) in pts.iter().zip(&back_pts).zip(&back) {
            let p2 = p2.unwrap();
            let (d1x, d1y) = (p1.0 - p0.0, p1.1 - p0.1);
            let (d2x, d2y) = (p2.0 - p1.0, p2.1 - p1.1);
            assert!((d1x + d2x).abs() <= 0.02 && (d1y + d2y).abs() <= 0.02);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let f = texture(32, 5);
        assert!(klt_track(std::slice::from_ref(&f), None, &KltParams::default()).is_err());
        assert!(klt_track(&[f.clone(), f], Some(&[(40.0, 1.0)]), &KltParams::default()).is_err());
    }

    fn synthetic_track(id: usize, step: (f64, f64), n: usize) -> Track {
        Track {
            id,
            positions: (0..n).map(|t| (10.0 + step.0 * t as f64, 20.0 + step.1 * t as f64)).collect(),
            valid: vec![true; n],
        }
    }

    #[test]
    fn trajectory_comparison() {
        let orig = vec![synthetic_track(0, (0.1, 0.0), 6)];
        let mag = vec![synthetic_track(0, (2.0, 0.0), 6)];
        let r = compare_amplified_trajectories(&orig, &mag, 20.0, 0.0).unwrap();
        assert!(r.axis_rms < 1e-12 && r.orthogonal_rms < 1e-12);

        // (0.1, 0.2) px/frame, x amplified 20x, y untouched
        let orig = vec![synthetic_track(0, (0.1, 0.2), 6), synthetic_track(1, (0.1, 0.2), 6)];
        let mag: Vec<Track> = orig
            .iter()
            .map(|t| {
                let (x0, y0) = t.positions[0];
                Track {
                    id: t.id,
                    positions: t
                        .positions
                        .iter()
                        .map(|&(x, y)| {
                            let d = crate::datagen::magnified_translation([x - x0, y - y0], [20.0, 1.0], 0.0);
                            (x0 + d[0], y0 + d[1])
                        })
                        .collect(),
                    valid: t.valid.clone(),
                }
            })
            .collect();
        let r = compare_amplified_trajectories(&orig, &mag, 20.0, 0.0).unwrap();
        assert!(r.axis_rms < 1e-9 && r.orthogonal_rms < 1e-9);
        assert!(compare_amplified_trajectories(&orig, &mag[..1], 20.0, 0.0).is_err());
    }
}
