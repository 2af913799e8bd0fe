use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fwhm::{fwhm, Axis};
use super::ssim::{ssim, SsimParams};
use crate::error::{Error, Result};
use crate::field::{CaptureGeometry, ImageKind, RealImage};
use crate::io::{read_field, StoredField};
use crate::phase_retrieval::{mhpr, HologramStack, MhprParams};
use crate::propagation::AngularSpectrum;
use crate::simulator::{render_hologram, render_stack, Scene};

/// One scene prepared for a defocus sweep.
#[derive(Debug, Clone)]
pub struct SweepCase {
    /// Single hologram recorded at `z_star_um`.
    pub hologram: RealImage,
    pub z_star_um: f64,
    /// In-focus ground-truth amplitude.
    pub reference: RealImage,
    /// Multi-height stack whose first height is `z_star_um`.
    pub stack: Option<HologramStack>,
    /// Pixel to measure a particle width at.
    pub peak_hint: Option<(usize, usize)>,
}

impl SweepCase {
    /// Renders the hologram (and the stack, when the geometry lists heights).
    pub fn simulate(scene: &Scene, geometry: &CaptureGeometry) -> Result<Self> {
        let hologram = render_hologram(scene, geometry)?;
        let stack = match geometry.heights_um {
            Some(_) => Some(render_stack(scene, geometry)?),
            None => None,
        };
        let n = scene.spec.fov as i64;
        let peak_hint = scene.particles.first().map(|p| {
            let (x, y) = p.pixel_centre(scene.spec.pixel_pitch_um);
            (
                (x.round() as i64).rem_euclid(n) as usize,
                (y.round() as i64).rem_euclid(n) as usize,
            )
        });
        Ok(Self {
            hologram,
            z_star_um: geometry.z2_um,
            reference: scene.object_amplitude(),
            stack,
            peak_hint,
        })
    }
}

/// A reconstruction procedure evaluated at a set of focus errors.
pub trait Reconstructor: Sync {
    fn name(&self) -> String;

    /// Amplitude reconstructions of `case` for each focus error in `dz_grid`.
    fn reconstruct(&self, index: usize, case: &SweepCase, dz_grid: &[f64]) -> Result<Vec<RealImage>>;
}

/// Plain back-propagation of the single hologram to `z* + dz`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Backprop;

impl Reconstructor for Backprop {
    fn name(&self) -> String {
        "backprop".into()
    }

    fn reconstruct(&self, _: usize, case: &SweepCase, dz_grid: &[f64]) -> Result<Vec<RealImage>> {
        let spectrum = AngularSpectrum::from_hologram(&case.hologram)?;
        dz_grid
            .iter()
            .map(|dz| Ok(spectrum.at(-(case.z_star_um + dz))?.amplitude()))
            .collect()
    }
}

/// Multi-height phase recovery with every height misjudged by `dz`.
///
/// Shifting all heights by one offset leaves the inter-height steps
/// unchanged, so this is the recovered object field propagated by `-dz`.
#[derive(Debug, Clone, Default)]
pub struct Mhpr {
    pub params: MhprParams,
}

impl Reconstructor for Mhpr {
    fn name(&self) -> String {
        "mhpr".into()
    }

    fn reconstruct(&self, _: usize, case: &SweepCase, dz_grid: &[f64]) -> Result<Vec<RealImage>> {
        let stack = case
            .stack
            .as_ref()
            .ok_or_else(|| Error::InvalidGeometry("mhpr sweep needs a height stack".into()))?;
        let object = mhpr(stack, &self.params)?.field;
        let spectrum = AngularSpectrum::new(&object);
        dz_grid.iter().map(|dz| Ok(spectrum.at(-dz)?.amplitude())).collect()
    }
}

/// Returns the reference itself; every SSIM is 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Reconstructor for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn reconstruct(&self, _: usize, case: &SweepCase, dz_grid: &[f64]) -> Result<Vec<RealImage>> {
        Ok(vec![case.reference.clone(); dz_grid.len()])
    }
}

/// File name shared by exported sweep inputs and externally produced outputs.
pub fn sweep_file_name(scene: usize, dz_um: f64) -> String {
    format!("scene{scene:04}_dz{dz_um:+.2}.hidf")
}

/// Reconstructions produced elsewhere (for instance by a trained network),
/// one field container per scene and focus error named by [`sweep_file_name`].
/// Complex and amplitude containers are accepted.
#[derive(Debug, Clone)]
pub struct FromDirectory {
    pub label: String,
    pub dir: PathBuf,
}

impl FromDirectory {
    /// True when the directory holds an output for every scene and focus error.
    pub fn covers(&self, scenes: usize, dz_grid: &[f64]) -> bool {
        (0..scenes).all(|s| dz_grid.iter().all(|dz| self.dir.join(sweep_file_name(s, *dz)).is_file()))
    }
}

impl Reconstructor for FromDirectory {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn reconstruct(&self, index: usize, _: &SweepCase, dz_grid: &[f64]) -> Result<Vec<RealImage>> {
        dz_grid
            .iter()
            .map(|dz| {
                let path = self.dir.join(sweep_file_name(index, *dz));
                match read_field(&path)? {
                    StoredField::Complex(f) => Ok(f.amplitude()),
                    StoredField::Real(img) if img.kind() == ImageKind::Amplitude => Ok(img),
                    StoredField::Real(img) => Err(Error::corrupt(
                        &path,
                        format!("expected an amplitude or complex field, found {:?}", img.kind()),
                    )),
                }
            })
            .collect()
    }
}

/// Writes each case's back-propagated input at every focus error, named by
/// [`sweep_file_name`], for an external reconstructor to consume.
pub fn export_sweep_inputs(cases: &[SweepCase], dz_grid: &[f64], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, case) in cases.iter().enumerate() {
        let spectrum = AngularSpectrum::from_hologram(&case.hologram)?;
        for dz in dz_grid {
            let field = spectrum.at(-(case.z_star_um + dz))?;
            crate::io::write_complex(&field, &dir.join(sweep_file_name(i, *dz)))?;
        }
    }
    Ok(())
}

/// What a sweep measures on each reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum SweepMetric {
    /// SSIM against the case reference.
    Ssim(SsimParams),
    /// Particle width at the case's peak hint, in micrometers.
    Fwhm { axis: Axis },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dz_um: Vec<f64>,
    pub methods: Vec<String>,
    /// `scores[k][i]`: method `k` at `dz_um[i]`, averaged over scenes.
    pub scores: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn method(&self, name: &str) -> Option<&[f64]> {
        self.methods
            .iter()
            .position(|m| m == name)
            .map(|k| self.scores[k].as_slice())
    }

    pub fn score_at(&self, name: &str, dz: f64) -> Option<f64> {
        let i = self.dz_um.iter().position(|d| (d - dz).abs() < 1e-9)?;
        self.method(name).map(|s| s[i])
    }

    /// `dz_um,<method>...` with one row per focus error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dz_um");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (i, dz) in self.dz_um.iter().enumerate() {
            out.push_str(&format!("{dz}"));
            for s in &self.scores {
                out.push_str(&format!(",{}", s[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Focus errors from `min` to `max` inclusive in steps of `step`.
pub fn dz_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::spec("step", format!("must be positive, got {step}")));
    }
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(Error::spec("dz_min", format!("range [{min}, {max}] is empty")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| min + i as f64 * step).collect())
}

fn score(metric: &SweepMetric, recon: &RealImage, case: &SweepCase) -> Result<f64> {
    match metric {
        SweepMetric::Ssim(p) => ssim(recon, &case.reference, p),
        SweepMetric::Fwhm { axis } => {
            let hint = case
                .peak_hint
                .ok_or_else(|| Error::InvalidField("fwhm sweep needs a particle hint".into()))?;
            match fwhm(recon, hint, *axis) {
                Ok(w) => Ok(w),
                Err(Error::NoPeak { .. }) => Ok(f64::NAN),
                Err(e) => Err(e),
            }
        }
    }
}

/// Mean score per focus error for each method across `cases`.
///
/// Scenes run in parallel; averages are summed in scene order. A width
/// that cannot be measured counts as NaN and is left out of the mean.
pub fn defocus_sweep(
    methods: &[&dyn Reconstructor],
    cases: &[SweepCase],
    dz_grid: &[f64],
    metric: &SweepMetric,
) -> Result<SweepResult> {
    if dz_grid.is_empty() {
        return Err(Error::spec("dz_grid", "must not be empty"));
    }
    if cases.is_empty() {
        return Err(Error::spec("scenes", "must not be empty"));
    }
    let mut order: Vec<usize> = (0..dz_grid.len()).collect();
    order.sort_by(|a, b| dz_grid[*a].total_cmp(&dz_grid[*b]));
    let sorted: Vec<f64> = order.iter().map(|&i| dz_grid[i]).collect();

    let mut scores = Vec::with_capacity(methods.len());
    for method in methods {
        let per_case: Vec<Vec<f64>> = cases
            .par_iter()
            .enumerate()
            .map(|(i, case)| {
                let recons = method.reconstruct(i, case, &sorted)?;
                recons.iter().map(|r| score(metric, r, case)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let means = (0..sorted.len())
            .map(|j| {
                let finite: Vec<f64> = per_case.iter().map(|s| s[j]).filter(|v| v.is_finite()).collect();
                if finite.is_empty() {
                    f64::NAN
                } else {
                    finite.iter().sum::<f64>() / finite.len() as f64
                }
            })
            .collect();
        scores.push(means);
    }
    Ok(SweepResult {
        dz_um: sorted,
        methods: methods.iter().map(|m| m.name()).collect(),
        scores,
    })
}
