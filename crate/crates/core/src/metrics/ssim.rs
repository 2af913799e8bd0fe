use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SsimWindow {
    /// One set of statistics over the whole image.
    Global,
    /// Mean of the local SSIM map under a truncated Gaussian window,
    /// evaluated where the window fits inside the image.
    Gaussian { sigma_px: f64 },
}

/// Stabilization constants and window for [`ssim`].
///
/// Unset constants resolve to `C1 = (0.01 L)^2` and `C2 = (0.03 L)^2`,
/// where `L` is `dynamic_range` or, failing that, the reference maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub dynamic_range: Option<f64>,
    pub window: SsimWindow,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            c1: None,
            c2: None,
            dynamic_range: None,
            window: SsimWindow::Global,
        }
    }
}

impl SsimParams {
    pub fn with_dynamic_range(mut self, l: f64) -> Self {
        self.dynamic_range = Some(l);
        self
    }

    pub fn with_constants(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = Some(c1);
        self.c2 = Some(c2);
        self
    }

    pub fn gaussian(sigma_px: f64) -> Self {
        Self {
            window: SsimWindow::Gaussian { sigma_px },
            ..Self::default()
        }
    }

    /// `(C1, C2)` for a given reference image.
    pub fn constants(&self, reference: &RealImage) -> Result<(f64, f64)> {
        let l = match self.dynamic_range {
            Some(l) => l,
            None => reference.values().iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        let c1 = self.c1.unwrap_or((0.01 * l) * (0.01 * l));
        let c2 = self.c2.unwrap_or((0.03 * l) * (0.03 * l));
        for (name, c) in [("c1", c1), ("c2", c2)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::spec(name, format!("must be positive and finite, got {c}")));
            }
        }
        if let SsimWindow::Gaussian { sigma_px } = self.window {
            if !(sigma_px.is_finite() && sigma_px > 0.0) {
                return Err(Error::spec("sigma_px", format!("must be positive, got {sigma_px}")));
            }
        }
        Ok((c1, c2))
    }
}

fn combine(mu1: f64, mu2: f64, var1: f64, var2: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)) / ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn central_moment(a: &[f64], ma: f64, b: &[f64], mb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

/// Structural similarity of `u1` against the reference `u2`.
///
/// Variances and the cross-covariance are population moments.
pub fn ssim(u1: &RealImage, u2: &RealImage, params: &SsimParams) -> Result<f64> {
    if u1.width() != u2.width() || u1.height() != u2.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            u1.width(),
            u1.height(),
            u2.width(),
            u2.height()
        )));
    }
    let (c1, c2) = params.constants(u2)?;
    match params.window {
        SsimWindow::Global => {
            let (a, b) = (u1.values(), u2.values());
            let (m1, m2) = (mean(a), mean(b));
            let v1 = central_moment(a, m1, a, m1);
            let v2 = central_moment(b, m2, b, m2);
            let cov = central_moment(a, m1, b, m2);
            Ok(combine(m1, m2, v1, v2, cov, c1, c2))
        }
        SsimWindow::Gaussian { sigma_px } => {
            windowed(u1.values(), u2.values(), u1.width(), u1.height(), sigma_px, c1, c2)
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.5 * sigma).ceil() as usize;
    let k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(v: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &v[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = src[x..x + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|j| rows[(y + j) * ow + x] * k[j]).sum();
        }
    }
    out
}

fn windowed(a: &[f64], b: &[f64], w: usize, h: usize, sigma: f64, c1: f64, c2: f64) -> Result<f64> {
    let k = gaussian_kernel(sigma);
    if w < k.len() || h < k.len() {
        return Err(Error::TooSmall(format!(
            "gaussian window of {} px does not fit a {w}x{h} image",
            k.len()
        )));
    }
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu1 = filter_valid(a, w, h, &k);
    let mu2 = filter_valid(b, w, h, &k);
    let e11 = filter_valid(&prod(a, a), w, h, &k);
    let e22 = filter_valid(&prod(b, b), w, h, &k);
    let e12 = filter_valid(&prod(a, b), w, h, &k);
    let mut total = 0.0;
    for i in 0..mu1.len() {
        let (m1, m2) = (mu1[i], mu2[i]);
        let v1 = e11[i] - m1 * m1;
        let v2 = e22[i] - m2 * m2;
        let cov = e12[i] - m1 * m2;
        total += combine(m1, m2, v1, v2, cov, c1, c2);
    }
    Ok(total / mu1.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ImageKind, Optics};

    fn img(w: usize, h: usize, v: Vec<f64>) -> RealImage {
        RealImage::new(w, h, Optics::new(1.0, 0.5).unwrap(), ImageKind::Amplitude, v).unwrap()
    }

    #[test]
    fn identical_images_score_exactly_one() {
        let u = img(3, 2, vec![0.1, 0.7, 0.3, 0.9, 0.2, 0.5]);
        assert_eq!(ssim(&u, &u, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn constant_images_match_closed_form() {
        let (a, b) = (0.4, 0.9);
        let u1 = img(4, 4, vec![a; 16]);
        let u2 = img(4, 4, vec![b; 16]);
        let c1 = (0.01 * b) * (0.01 * b);
        let want = (2.0 * a * b + c1) / (a * a + b * b + c1);
        assert!((ssim(&u1, &u2, &SsimParams::default()).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let u1 = img(2, 2, vec![1.0; 4]);
        let u2 = img(4, 1, vec![1.0; 4]);
        assert!(matches!(ssim(&u1, &u2, &SsimParams::default()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn all_zero_reference_needs_explicit_range() {
        let z = img(2, 2, vec![0.0; 4]);
        assert!(ssim(&z, &z, &SsimParams::default()).is_err());
        assert_eq!(ssim(&z, &z, &SsimParams::default().with_dynamic_range(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_window_identity_and_bounds() {
        let v: Vec<f64> = (0..400).map(|i| ((i * 37 % 101) as f64) / 100.0).collect();
        let w: Vec<f64> = v.iter().rev().copied().collect();
        let p = SsimParams::gaussian(1.5);
        let (u1, u2) = (img(20, 20, v), img(20, 20, w));
        assert!((ssim(&u1, &u1, &p).unwrap() - 1.0).abs() < 1e-12);
        let s = ssim(&u1, &u2, &p).unwrap();
        assert!(s < 1.0 && s > -1.0);
        assert!(matches!(ssim(&img(4, 4, vec![1.0; 16]), &img(4, 4, vec![1.0; 16]), &p), Err(Error::TooSmall(_))));
    }
}
