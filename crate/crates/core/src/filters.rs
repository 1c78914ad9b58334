//! Separable spatial filters on single-plane grids.

pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable correlation with replicated borders.
pub fn convolve_separable(src: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, g) in kernel.iter().enumerate() {
                acc += g * row[clamp(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, g) in kernel.iter().enumerate() {
                acc += g * tmp[clamp(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn gaussian_blur(src: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    convolve_separable(src, h, w, &gaussian_kernel(sigma))
}

/// Gaussian smoothing of `values` weighted by `weights`:
/// `G * (w v) / G * w`, falling back to the raw value where the weight mass
/// vanishes.
pub fn weighted_gaussian(values: &[f64], weights: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let wv: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    let num = convolve_separable(&wv, h, w, &kernel);
    let den = convolve_separable(weights, h, w, &kernel);
    num.iter()
        .zip(&den)
        .zip(values)
        .map(|((n, d), v)| if *d > 1e-300 { n / d } else { *v })
        .collect()
}
