//! 2D FFT helpers over row-major complex buffers.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// 1D transform in place, unnormalized in both directions.
pub fn fft1d(buf: &mut [Complex64], inverse: bool) {
    if buf.len() > 1 {
        plan(buf.len(), inverse).process(buf);
    }
}

/// 2D transform in place on an `h × w` row-major buffer, unnormalized.
pub fn fft2d(buf: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), h * w);
    if w > 1 {
        let row = plan(w, inverse);
        row.process(buf);
    }
    if h > 1 {
        let col = plan(h, inverse);
        let mut t = vec![Complex64::default(); h * w];
        transpose(buf, &mut t, h, w);
        col.process(&mut t);
        transpose(&t, buf, w, h);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], h: usize, w: usize) {
    for y in 0..h {
        for x in 0..w {
            dst[x * h + y] = src[y * w + x];
        }
    }
}

/// Signed frequency index of bin `k` in a length-`n` transform. The Nyquist
/// bin of an even length maps to `+n/2`.
#[inline]
pub fn signed_index(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}
