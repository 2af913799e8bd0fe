//! Focus criteria and axial focus search.
//!
//! All criteria follow one convention: a higher score means a sharper
//! image. A search back-propagates a hologram to a set of candidate
//! distances and returns the distance with the highest score; equal scores
//! resolve to the smallest distance, independent of evaluation order.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};
use crate::propagation::AngularSpectrum;

/// Relative contrast below which an image counts as flat.
const FLAT_CONTRAST: f64 = 1e-12;
/// Gradients this small relative to the mean amplitude are rounding noise.
const FLAT_GRADIENT: f64 = 1e-10;
/// Score spread below which a sweep has no usable contrast.
const NO_CONTRAST_SPREAD: f64 = 1e-12;

fn tamura_of_values(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooSmall(format!(
            "tamura needs at least 2 pixels, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= FLAT_CONTRAST * mean {
        return Ok(0.0);
    }
    Ok((std / mean).sqrt())
}

/// Tamura coefficient `sqrt(sigma / mu)` with the population standard deviation.
pub fn tamura(img: &RealImage) -> Result<f64> {
    tamura_of_values(img.values())
}

fn gini_of_values(values: &[f64]) -> Result<f64> {
    if let Some(v) = values.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidField(format!("gini needs nonnegative values, got {v}")));
    }
    let l1: f64 = values.iter().sum();
    if l1 == 0.0 {
        return Err(Error::AllZero);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, a)| (a / l1) * ((n - (i + 1) as f64 + 0.5) / n))
        .sum();
    Ok(1.0 - 2.0 * weighted)
}

/// Sparsity Gini index of the pixel values: 0 for a constant image,
/// `1 - 1/N` for a single nonzero pixel.
pub fn gini(img: &RealImage) -> Result<f64> {
    gini_of_values(img.values())
}

/// Gradient magnitude by central differences with replicated borders.
pub fn gradient_magnitude(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    let at = |x: usize, y: usize| values[y * width + x];
    let mut out = Vec::with_capacity(values.len());
    for y in 0..height {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(height - 1));
        for x in 0..width {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(width - 1));
            let gx = 0.5 * (at(xp, y) - at(xm, y));
            let gy = 0.5 * (at(x, yp) - at(x, ym));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Tamura coefficient of the amplitude's gradient magnitude.
pub fn tamura_of_gradient(field: &ComplexField) -> Result<f64> {
    let (w, h) = (field.width(), field.height());
    if w < 3 || h < 3 {
        return Err(Error::TooSmall(format!("needs at least 3x3, got {w}x{h}")));
    }
    let amp: Vec<f64> = field.values().iter().map(|v| v.norm()).collect();
    let grad = gradient_magnitude(&amp, w, h);
    let amp_mean = amp.iter().sum::<f64>() / amp.len() as f64;
    let grad_mean = grad.iter().sum::<f64>() / grad.len() as f64;
    if amp_mean == 0.0 || grad_mean <= FLAT_GRADIENT * amp_mean {
        return Ok(0.0);
    }
    tamura_of_values(&grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusCriterion {
    /// Tamura coefficient of the amplitude.
    Tamura,
    /// Gini index of the amplitude.
    Gini,
    /// Tamura coefficient of the amplitude gradient.
    TamuraOfGradient,
}

impl FocusCriterion {
    pub fn score(self, field: &ComplexField) -> Result<f64> {
        match self {
            FocusCriterion::Tamura => tamura(&field.amplitude()),
            FocusCriterion::Gini => gini(&field.amplitude()),
            FocusCriterion::TamuraOfGradient => tamura_of_gradient(field),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FocusCriterion::Tamura => "tamura",
            FocusCriterion::Gini => "gini",
            FocusCriterion::TamuraOfGradient => "tog",
        }
    }
}

impl FromStr for FocusCriterion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tamura" => Ok(FocusCriterion::Tamura),
            "gini" => Ok(FocusCriterion::Gini),
            "tog" | "tamura_of_gradient" | "tamura-of-gradient" => {
                Ok(FocusCriterion::TamuraOfGradient)
            }
            other => Err(format!("unknown criterion '{other}' (tamura, gini, tog)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// `n_steps` evenly spaced distances including both ends.
    Grid { n_steps: usize },
    /// A grid of `n_per_level` points per level. Each level after the first
    /// spans one previous grid step either side of the previous best.
    CoarseToFine { levels: usize, n_per_level: usize },
}

impl SearchStrategy {
    /// Number of criterion evaluations the strategy performs.
    pub fn budget(&self) -> usize {
        match *self {
            SearchStrategy::Grid { n_steps } => n_steps,
            SearchStrategy::CoarseToFine {
                levels,
                n_per_level,
            } => levels * n_per_level,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (levels, n) = match *self {
            SearchStrategy::Grid { n_steps } => (1, n_steps),
            SearchStrategy::CoarseToFine {
                levels,
                n_per_level,
            } => (levels, n_per_level),
        };
        if levels == 0 {
            return Err(Error::spec("levels", "must be at least 1"));
        }
        if n < 3 {
            return Err(Error::spec("n_steps", format!("must be at least 3, got {n}")));
        }
        Ok(())
    }
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy::CoarseToFine {
            levels: 3,
            n_per_level: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusResult {
    pub z_hat: f64,
    pub score: f64,
    /// Every `(z, score)` evaluated, in evaluation order.
    pub sweep: Vec<(f64, f64)>,
    pub evaluations: usize,
    /// The best distance, or the best point of the first level, sits on an
    /// edge of the searched range.
    pub boundary_hit: bool,
}

impl FocusResult {
    /// Writes `z_um,score` rows sorted by distance.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows = self.sweep.clone();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = String::from("z_um,score\n");
        for (z, s) in rows {
            out.push_str(&format!("{z},{s}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Index of the best score; ties resolve to the smallest z.
fn best_of(points: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(z, s)) in points.iter().enumerate().skip(1) {
        let (bz, bs) = points[best];
        if s > bs || (s == bs && z < bz) {
            best = i;
        }
    }
    best
}

/// Generic axial search over `[z_min, z_max]` with a caller-supplied score.
pub fn search<F>(z_min: f64, z_max: f64, strategy: SearchStrategy, score: F) -> Result<FocusResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
        return Err(Error::spec(
            "z range",
            format!("need finite z_min < z_max, got [{z_min}, {z_max}]"),
        ));
    }
    strategy.validate()?;
    let (levels, n) = match strategy {
        SearchStrategy::Grid { n_steps } => (1, n_steps),
        SearchStrategy::CoarseToFine {
            levels,
            n_per_level,
        } => (levels, n_per_level),
    };

    let eval = |zs: Vec<f64>| -> Result<Vec<(f64, f64)>> {
        zs.into_par_iter().map(|z| Ok((z, score(z)?))).collect()
    };

    let mut sweep = Vec::with_capacity(levels * n);
    let mut coarse_edge = false;
    let (mut lo, mut hi) = (z_min, z_max);
    for level in 0..levels {
        let zs = linspace(lo, hi, n);
        let step = (hi - lo) / (n - 1) as f64;
        let scored = eval(zs)?;
        if level == 0 {
            let (min, max) = scored
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, s)| (a.min(s), b.max(s)));
            if max - min <= NO_CONTRAST_SPREAD {
                return Err(Error::NoContrast);
            }
        }
        let best = best_of(&scored);
        if level == 0 {
            coarse_edge = best == 0 || best == n - 1;
        }
        let centre = scored[best].0;
        sweep.extend(scored);
        lo = (centre - step).max(z_min);
        hi = (centre + step).min(z_max);
        if hi <= lo {
            // bracket collapsed onto a range edge; keep a tiny interval
            let eps = step.max(f64::EPSILON * centre.abs().max(1.0));
            lo = (centre - eps).max(z_min);
            hi = (centre + eps).min(z_max);
        }
    }

    let best = best_of(&sweep);
    let (z_hat, best_score) = sweep[best];
    let tol = 1e-9 * (z_max - z_min);
    Ok(FocusResult {
        z_hat,
        score: best_score,
        evaluations: sweep.len(),
        boundary_hit: coarse_edge || (z_hat - z_min).abs() <= tol || (z_max - z_hat).abs() <= tol,
        sweep,
    })
}

/// Focus search on a precomputed hologram spectrum: a candidate `z` is
/// scored on the hologram back-propagated by `z`.
pub fn autofocus_spectrum(
    spectrum: &AngularSpectrum,
    z_min: f64,
    z_max: f64,
    criterion: FocusCriterion,
    strategy: SearchStrategy,
) -> Result<FocusResult> {
    search(z_min, z_max, strategy, |z| criterion.score(&spectrum.at(-z)?))
}

/// Autofocus a single intensity hologram over `[z_min, z_max]`.
pub fn autofocus_search(
    holo: &RealImage,
    z_min: f64,
    z_max: f64,
    criterion: FocusCriterion,
    strategy: SearchStrategy,
) -> Result<FocusResult> {
    let spectrum = AngularSpectrum::from_hologram(holo)?;
    autofocus_spectrum(&spectrum, z_min, z_max, criterion, strategy)
}
