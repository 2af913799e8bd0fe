//! Multi-height phase recovery.
//!
//! Holograms of one sample recorded at several sample-to-sensor distances
//! constrain the missing phase. The recovery starts from the first
//! hologram's amplitude with zero phase and repeatedly visits every height,
//! propagating the current estimate there and replacing its amplitude with
//! the measured one while keeping the phase. Each pass climbs through the
//! heights and comes back down (`h1 .. hN .. h1`). The converged field is
//! finally propagated back to the object plane (distance zero).

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autofocus::{autofocus_search, FocusCriterion, SearchStrategy};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{validate_heights, ComplexField, ImageKind, Optics, RealImage};
use crate::propagation::{intensity_to_field, TransferFunction};

/// Intensity holograms of one sample at increasing sample-to-sensor distances.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramStack {
    holograms: Vec<RealImage>,
    heights: Vec<f64>,
}

impl HologramStack {
    pub fn new(holograms: Vec<RealImage>, heights: Vec<f64>) -> Result<Self> {
        if holograms.is_empty() {
            return Err(Error::spec("holograms", "at least one hologram is required"));
        }
        if holograms.len() != heights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} holograms but {} heights",
                holograms.len(),
                heights.len()
            )));
        }
        validate_heights(&heights).map_err(Error::InvalidGeometry)?;
        for h in &holograms {
            if h.kind() != ImageKind::Intensity {
                return Err(Error::DimensionMismatch(format!(
                    "stack entries must be intensities, got {:?}",
                    h.kind()
                )));
            }
            h.ensure_same_grid(&holograms[0])?;
        }
        Ok(Self { holograms, heights })
    }

    pub fn len(&self) -> usize {
        self.holograms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holograms.is_empty()
    }

    pub fn holograms(&self) -> &[RealImage] {
        &self.holograms
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn optics(&self) -> Optics {
        self.holograms[0].optics()
    }

    pub fn width(&self) -> usize {
        self.holograms[0].width()
    }

    pub fn height(&self) -> usize {
        self.holograms[0].height()
    }

    /// Same holograms, different assumed heights.
    pub fn with_heights(&self, heights: Vec<f64>) -> Result<Self> {
        Self::new(self.holograms.clone(), heights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhprParams {
    pub iterations: usize,
    /// Autofocus every hologram around its nominal height before iterating.
    pub refine_heights: bool,
    pub refine_bracket_um: f64,
    pub refine_criterion: FocusCriterion,
    /// Weight of the measured amplitude in each amplitude update.
    pub relaxation: f64,
}

impl Default for MhprParams {
    fn default() -> Self {
        Self {
            iterations: 20,
            refine_heights: false,
            refine_bracket_um: 20.0,
            refine_criterion: FocusCriterion::TamuraOfGradient,
            relaxation: 1.0,
        }
    }
}

impl MhprParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::spec("iterations", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.relaxation) {
            return Err(Error::spec("relaxation", "must lie in [0, 1]"));
        }
        if self.refine_heights && (self.refine_bracket_um.is_nan() || self.refine_bracket_um <= 0.0) {
            return Err(Error::spec("refine_bracket_um", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MhprResult {
    /// Recovered complex field at the object plane.
    pub field: ComplexField,
    /// Mean amplitude mismatch of each pass, averaged over its projections.
    pub residuals: Vec<f64>,
    /// Heights actually used (after refinement, if requested).
    pub heights: Vec<f64>,
}

impl MhprResult {
    /// Writes `pass,residual` rows, passes numbered from 1.
    pub fn write_residual_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("pass,residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, r));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Re-estimates each height by autofocusing its hologram within `± bracket_um`.
pub fn refine_heights(
    stack: &HologramStack,
    criterion: FocusCriterion,
    bracket_um: f64,
) -> Result<HologramStack> {
    if !(bracket_um > 0.0 && bracket_um.is_finite()) {
        return Err(Error::spec("bracket_um", "must be positive"));
    }
    let refined = stack
        .holograms()
        .iter()
        .zip(stack.heights())
        .map(|(holo, &h)| {
            autofocus_search(
                holo,
                h - bracket_um,
                h + bracket_um,
                criterion,
                SearchStrategy::default(),
            )
            .map(|r| r.z_hat)
        })
        .collect::<Result<Vec<f64>>>()?;
    if refined.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::HeightsOutOfOrder(refined));
    }
    stack.with_heights(refined)
}

/// The sequence of height indices visited in one pass.
fn pass_order(n: usize) -> Vec<usize> {
    if n == 1 {
        return vec![0];
    }
    (1..n).chain((0..n - 1).rev()).collect()
}

/// Runs multi-height phase recovery and returns the object-plane field.
pub fn mhpr(stack: &HologramStack, params: &MhprParams) -> Result<MhprResult> {
    params.validate()?;
    let stack = if params.refine_heights {
        refine_heights(stack, params.refine_criterion, params.refine_bracket_um)?
    } else {
        stack.clone()
    };
    let heights = stack.heights().to_vec();
    let (w, h) = (stack.width(), stack.height());
    let optics = stack.optics();
    let targets: Vec<Vec<f64>> = stack
        .holograms()
        .iter()
        .map(|holo| holo.values().iter().map(|v| v.sqrt()).collect())
        .collect();

    let fft = Fft2::new(w, h);
    let mut tf_cache: Vec<(f64, TransferFunction)> = Vec::new();
    let mut propagate = |buf: &mut Vec<Complex64>, dz: f64| -> Result<()> {
        if dz == 0.0 {
            return Ok(());
        }
        let idx = match tf_cache.iter().position(|(z, _)| *z == dz) {
            Some(i) => i,
            None => {
                tf_cache.push((dz, TransferFunction::new(w, h, optics, dz)?));
                tf_cache.len() - 1
            }
        };
        let tf = &tf_cache[idx].1;
        fft.forward(buf);
        for (v, t) in buf.iter_mut().zip(tf.values()) {
            *v *= t;
        }
        fft.inverse(buf);
        Ok(())
    };

    let mut buf = intensity_to_field(&stack.holograms()[0])?.into_values();
    let mut current = heights[0];
    let order = pass_order(heights.len());
    let mut residuals = Vec::with_capacity(params.iterations);
    let rel = params.relaxation;

    for pass in 0..params.iterations {
        let mut mismatch_sum = 0.0;
        for &j in &order {
            propagate(&mut buf, heights[j] - current)?;
            current = heights[j];
            let target = &targets[j];
            let mut mismatch = 0.0;
            for (v, &t) in buf.iter_mut().zip(target) {
                let a = v.norm();
                mismatch += (a - t).abs();
                let new_amp = (1.0 - rel) * a + rel * t;
                *v = Complex64::from_polar(new_amp, v.arg());
            }
            mismatch_sum += mismatch / target.len() as f64;
        }
        if buf.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFiniteField(pass + 1));
        }
        residuals.push(mismatch_sum / order.len() as f64);
    }

    propagate(&mut buf, -current)?;
    let field = ComplexField::new(w, h, optics, buf).map_err(|_| Error::NonFiniteField(params.iterations))?;
    Ok(MhprResult {
        field,
        residuals,
        heights,
    })
}

/// Convenience: amplitude of the recovered object.
pub fn mhpr_amplitude(stack: &HologramStack, params: &MhprParams) -> Result<RealImage> {
    Ok(mhpr(stack, params)?.field.amplitude())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CaptureGeometry;
    use crate::propagation::backpropagate_intensity;
    use crate::simulator::{generate_scene_seeded, render_stack, SceneSpec};

    fn uniform_stack(n: usize) -> HologramStack {
        let o = CaptureGeometry::default().optics();
        let holos = (0..n)
            .map(|_| RealImage::filled(16, 16, o, ImageKind::Intensity, 1.0).unwrap())
            .collect();
        HologramStack::new(holos, (0..n).map(|k| 1000.0 + 15.0 * k as f64).collect()).unwrap()
    }

    #[test]
    fn pass_order_is_ping_pong() {
        assert_eq!(pass_order(1), vec![0]);
        assert_eq!(pass_order(2), vec![1, 0]);
        assert_eq!(pass_order(4), vec![1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn single_height_reduces_to_back_propagation() {
        let scene = generate_scene_seeded(&SceneSpec::particles(3, 5).with_fov(32)).unwrap();
        let g = CaptureGeometry::default().with_heights(vec![1000.0]).unwrap();
        let stack = render_stack(&scene, &g).unwrap();
        let params = MhprParams {
            iterations: 1,
            relaxation: 1.0,
            ..Default::default()
        };
        let out = mhpr(&stack, &params).unwrap();
        let bp = backpropagate_intensity(&stack.holograms()[0], 1000.0).unwrap();
        assert_eq!(out.field, bp);
    }

    #[test]
    fn uniform_stack_is_a_fixed_point() {
        let out = mhpr(&uniform_stack(4), &MhprParams::default()).unwrap();
        assert_eq!(out.residuals[0], out.residuals[0].min(1e-12));
        assert!(out.residuals.iter().all(|r| *r < 1e-12));
        let first = out.field.values()[0];
        for v in out.field.values() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!((v - first).norm() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let scene = generate_scene_seeded(&SceneSpec::texture(2).with_fov(32)).unwrap();
        let g = CaptureGeometry::default().with_height_series(3, 15.0).unwrap();
        let stack = render_stack(&scene, &g).unwrap();
        let p = MhprParams {
            iterations: 3,
            ..Default::default()
        };
        let a = mhpr(&stack, &p).unwrap();
        let b = mhpr(&stack, &p).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.residuals, b.residuals);
    }

    #[test]
    fn stack_validation() {
        let o = CaptureGeometry::default().optics();
        let a = RealImage::filled(8, 8, o, ImageKind::Intensity, 1.0).unwrap();
        let b = RealImage::filled(8, 4, o, ImageKind::Intensity, 1.0).unwrap();
        assert!(HologramStack::new(vec![], vec![]).is_err());
        assert!(HologramStack::new(vec![a.clone(), b], vec![1.0, 2.0]).is_err());
        assert!(HologramStack::new(vec![a.clone(), a.clone()], vec![2.0, 1.0]).is_err());
        assert!(HologramStack::new(vec![a.clone()], vec![1.0, 2.0]).is_err());
        let amp = RealImage::filled(8, 8, o, ImageKind::Amplitude, 1.0).unwrap();
        assert!(HologramStack::new(vec![amp], vec![1.0]).is_err());
    }

    #[test]
    fn params_validation() {
        let p = MhprParams {
            iterations: 0,
            ..MhprParams::default()
        };
        assert!(mhpr(&uniform_stack(2), &p).is_err());
        let p = MhprParams {
            relaxation: 1.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn empty_scene_refinement_has_no_contrast() {
        assert!(matches!(
            refine_heights(&uniform_stack(3), FocusCriterion::TamuraOfGradient, 10.0),
            Err(Error::NoContrast)
        ));
    }
}
