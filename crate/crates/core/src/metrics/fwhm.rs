use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Search radius around the hint, in pixels.
pub const DEFAULT_HINT_RADIUS: usize = 3;

/// Median of the first and last quarter of a profile.
pub fn outer_quartile_background(profile: &[f64]) -> f64 {
    let q = (profile.len() / 4).max(1);
    let mut tails: Vec<f64> = profile[..q]
        .iter()
        .chain(&profile[profile.len() - q..])
        .copied()
        .collect();
    tails.sort_by(f64::total_cmp);
    let n = tails.len();
    if n % 2 == 1 {
        tails[n / 2]
    } else {
        0.5 * (tails[n / 2 - 1] + tails[n / 2])
    }
}

fn profile(img: &RealImage, x: usize, y: usize, axis: Axis) -> Vec<f64> {
    match axis {
        Axis::X => (0..img.width()).map(|i| img.at(i, y)).collect(),
        Axis::Y => (0..img.height()).map(|j| img.at(x, j)).collect(),
    }
}

/// Full width at half maximum, in micrometers, of the feature near `peak_hint`.
///
/// The profile through the hint along `axis` sets a background level (median
/// of its outer quartiles). The extremum is the pixel within the hint radius
/// deviating most from that background; dips are inverted so dark particles
/// on a bright background measure like peaks. Half-maximum crossings on the
/// profile through the extremum are located by linear interpolation.
pub fn fwhm(img: &RealImage, peak_hint: (usize, usize), axis: Axis) -> Result<f64> {
    fwhm_with_radius(img, peak_hint, axis, DEFAULT_HINT_RADIUS)
}

pub fn fwhm_with_radius(
    img: &RealImage,
    peak_hint: (usize, usize),
    axis: Axis,
    radius: usize,
) -> Result<f64> {
    let (hx, hy) = peak_hint;
    let no_peak = || Error::NoPeak { x: hx, y: hy };
    if hx >= img.width() || hy >= img.height() {
        return Err(no_peak());
    }
    let bg = outer_quartile_background(&profile(img, hx, hy, axis));
    let ys = hy.saturating_sub(radius)..=(hy + radius).min(img.height() - 1);
    let xs = hx.saturating_sub(radius)..=(hx + radius).min(img.width() - 1);
    let mut best = (0.0f64, 1.0);
    for y in ys.clone() {
        for x in xs.clone() {
            let d = img.at(x, y) - bg;
            if d.abs() > best.0 {
                best = (d.abs(), d.signum());
            }
        }
    }
    // flat-bottomed features tie at many pixels; their weighted centroid is the centre
    let (dmax, sign) = best;
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in ys {
        for x in xs.clone() {
            let d = sign * (img.at(x, y) - bg);
            if d >= 0.5 * dmax && d > 0.0 {
                sw += d;
                sx += d * x as f64;
                sy += d * y as f64;
            }
        }
    }
    if sw == 0.0 {
        return Err(no_peak());
    }
    let (px, py) = ((sx / sw).round() as usize, (sy / sw).round() as usize);
    let line = profile(img, px, py, axis);
    let bg = outer_quartile_background(&line);
    let centre = match axis {
        Axis::X => px,
        Axis::Y => py,
    };
    let sign = if line[centre] >= bg { 1.0 } else { -1.0 };
    let p: Vec<f64> = line.iter().map(|v| sign * (v - bg)).collect();
    let peak = p[centre];
    let scale = line.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak.is_nan() || peak <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(no_peak());
    }
    let half = 0.5 * peak;
    let crossing = |step: isize| -> Option<f64> {
        let mut i = centre as isize;
        loop {
            let j = i + step;
            if j < 0 || j as usize >= p.len() {
                return None;
            }
            let (a, b) = (p[i as usize], p[j as usize]);
            if b < half {
                return Some(i as f64 + step as f64 * (a - half) / (a - b));
            }
            i = j;
        }
    };
    let (left, right) = crossing(-1).zip(crossing(1)).ok_or_else(no_peak)?;
    Ok((right - left) * img.pixel_pitch())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ImageKind, Optics};

    fn gaussian_dip(sigma: f64, depth: f64, offset: f64) -> RealImage {
        let n = 41;
        let c = 20.0;
        let v = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64, (i / n) as f64);
                let r2 = (x - c) * (x - c) + (y - c) * (y - c);
                offset - depth * (-r2 / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        RealImage::new(n, n, Optics::new(1.0, 0.5).unwrap(), ImageKind::Amplitude, v).unwrap()
    }

    #[test]
    fn gaussian_dip_width() {
        let w = fwhm(&gaussian_dip(2.0, 0.5, 1.0), (21, 19), Axis::X).unwrap();
        let want = 2.0 * (2.0 * 2f64.ln()).sqrt() * 2.0;
        assert!((w - want).abs() < 0.05, "{w} vs {want}");
        let wy = fwhm(&gaussian_dip(2.0, 0.5, 1.0), (20, 20), Axis::Y).unwrap();
        assert!((w - wy).abs() < 1e-12);
    }

    #[test]
    fn invariant_to_scale_and_offset() {
        let a = fwhm(&gaussian_dip(3.0, 0.5, 1.0), (20, 20), Axis::X).unwrap();
        let b = fwhm(&gaussian_dip(3.0, 1.5, 7.0), (20, 20), Axis::X).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn flat_image_has_no_peak() {
        let flat = gaussian_dip(2.0, 0.0, 1.0);
        assert!(matches!(fwhm(&flat, (20, 20), Axis::X), Err(Error::NoPeak { x: 20, y: 20 })));
        assert!(matches!(fwhm(&flat, (99, 0), Axis::X), Err(Error::NoPeak { .. })));
    }

    #[test]
    fn background_median() {
        assert_eq!(outer_quartile_background(&[1.0, 3.0, 9.0, 9.0, 9.0, 9.0, 2.0, 4.0]), 2.5);
    }
}
