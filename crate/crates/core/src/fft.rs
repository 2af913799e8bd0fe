//! 2D complex FFT on row-major buffers, built on `rustfft`.
//!
//! Forward transform is unnormalized; the inverse applies `1/(w*h)`, so
//! `inverse(forward(x)) == x` up to rounding.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.width * self.height, "buffer size mismatch");
        // rustfft processes consecutive chunks of its length in one call
        rows.process(data);
        let mut t = transpose(data, self.width, self.height);
        cols.process(&mut t);
        let back = transpose(&t, self.height, self.width);
        data.copy_from_slice(&back);
    }
}

fn transpose(data: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    const BLOCK: usize = 16;
    for by in (0..height).step_by(BLOCK) {
        for bx in (0..width).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(height) {
                for x in bx..(bx + BLOCK).min(width) {
                    out[x * height + y] = data[y * width + x];
                }
            }
        }
    }
    out
}

/// Signed DFT frequency index: `k` for `k < ceil(n/2)`, otherwise `k - n`.
pub fn signed_index(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                        acc += data[y * w + x] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[v * w + u] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_rectangular_grid() {
        let (w, h) = (6, 5);
        let data: Vec<Complex64> = (0..w * h)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        Fft2::new(w, h).forward(&mut fast);
        let slow = naive_dft(&data, w, h);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let (w, h) = (8, 4);
        let data: Vec<Complex64> = (0..w * h).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let fft = Fft2::new(w, h);
        let mut buf = data.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn signed_indices() {
        let idx: Vec<f64> = (0..5).map(|k| signed_index(k, 5)).collect();
        assert_eq!(idx, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
        let idx: Vec<f64> = (0..4).map(|k| signed_index(k, 4)).collect();
        assert_eq!(idx, vec![0.0, 1.0, -2.0, -1.0]);
    }
}
