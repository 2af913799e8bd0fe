//! Sampled optical fields and real-valued images.
//!
//! Every field and image carries its grid metadata (pixel pitch and
//! wavelength, both in micrometers). Operations that combine two grids
//! refuse to run when that metadata differs instead of silently resampling.
//!
//! Samples are stored row-major: index `y * width + x`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel pitch and wavelength shared by every sample of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optics {
    pub pixel_pitch_um: f64,
    pub wavelength_um: f64,
}

impl Optics {
    pub fn new(pixel_pitch_um: f64, wavelength_um: f64) -> Result<Self> {
        let optics = Self {
            pixel_pitch_um,
            wavelength_um,
        };
        optics.validate()?;
        Ok(optics)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_pitch_um.is_finite() && self.pixel_pitch_um > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch_um
            )));
        }
        if !(self.wavelength_um.is_finite() && self.wavelength_um > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {}",
                self.wavelength_um
            )));
        }
        Ok(())
    }
}

/// What a [`RealImage`] holds. The numeric codes match the container format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    Intensity,
    Amplitude,
    Phase,
}

impl ImageKind {
    pub fn code(self) -> u8 {
        match self {
            ImageKind::Intensity => 1,
            ImageKind::Amplitude => 2,
            ImageKind::Phase => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ImageKind::Intensity),
            2 => Some(ImageKind::Amplitude),
            3 => Some(ImageKind::Phase),
            _ => None,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidField(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if len != width * height {
        return Err(Error::InvalidField(format!(
            "expected {} samples for {width}x{height}, got {len}",
            width * height
        )));
    }
    Ok(())
}

/// A 2D complex optical field on a uniform square-pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    optics: Optics,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, optics: Optics, values: Vec<Complex64>) -> Result<Self> {
        optics.validate()?;
        check_dims(width, height, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            width,
            height,
            optics,
            values,
        })
    }

    /// Field with every sample equal to `value`.
    pub fn filled(width: usize, height: usize, optics: Optics, value: Complex64) -> Result<Self> {
        Self::new(width, height, optics, vec![value; width * height])
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        optics: Optics,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, optics, values)
    }

    /// Internal constructor for values produced by finite arithmetic on a valid field.
    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        optics: Optics,
        values: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            optics,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn optics(&self) -> Optics {
        self.optics
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.optics.pixel_pitch_um
    }

    pub fn wavelength(&self) -> f64 {
        self.optics.wavelength_um
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, x: usize, y: usize) -> Complex64 {
        self.values[y * self.width + x]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Fails unless `other` has the same shape and optics.
    pub fn ensure_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        if self.optics != other.optics {
            return Err(Error::DimensionMismatch(format!(
                "optics {:?} vs {:?}",
                self.optics, other.optics
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<ComplexField> {
        Self::new(
            self.width,
            self.height,
            self.optics,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise product, used for stacking thin transmission planes.
    pub fn multiply(&self, other: &ComplexField) -> Result<ComplexField> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self::new(self.width, self.height, self.optics, values)
    }

    /// Euclidean norm of the sample vector.
    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||self - reference|| / ||reference||`.
    pub fn relative_l2_error(&self, reference: &ComplexField) -> Result<f64> {
        self.ensure_same_grid(reference)?;
        let num: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference.values.iter().map(|v| v.norm_sqr()).sum();
        if den == 0.0 {
            return Ok(num.sqrt());
        }
        Ok((num / den).sqrt())
    }

    /// The `w x h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ComplexField> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            values.extend_from_slice(&self.values[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(Self::from_parts_unchecked(w, h, self.optics, values))
    }

    /// Rotates the grid counter-clockwise by `quarter_turns * 90` degrees.
    pub fn rotate_quarter_turns(&self, quarter_turns: u8) -> ComplexField {
        let (width, height, values) =
            rotate_buffer(self.width, self.height, &self.values, quarter_turns);
        Self::from_parts_unchecked(width, height, self.optics, values)
    }

    pub fn amplitude(&self) -> RealImage {
        RealImage::from_parts_unchecked(
            self.width,
            self.height,
            self.optics,
            ImageKind::Amplitude,
            self.values.iter().map(|v| v.norm()).collect(),
        )
    }

    pub fn phase(&self) -> RealImage {
        RealImage::from_parts_unchecked(
            self.width,
            self.height,
            self.optics,
            ImageKind::Phase,
            self.values.iter().map(|v| wrap_phase(v.arg())).collect(),
        )
    }

    pub fn intensity(&self) -> RealImage {
        RealImage::from_parts_unchecked(
            self.width,
            self.height,
            self.optics,
            ImageKind::Intensity,
            self.values.iter().map(|v| v.norm_sqr()).collect(),
        )
    }
}

pub(crate) fn rotate_buffer<T: Copy>(
    width: usize,
    height: usize,
    values: &[T],
    quarter_turns: u8,
) -> (usize, usize, Vec<T>) {
    match quarter_turns % 4 {
        0 => (width, height, values.to_vec()),
        1 => {
            // counter-clockwise: new (x', y') = (y, width - 1 - x)
            let (nw, nh) = (height, width);
            let mut out = Vec::with_capacity(values.len());
            for ny in 0..nh {
                for nx in 0..nw {
                    let x = width - 1 - ny;
                    let y = nx;
                    out.push(values[y * width + x]);
                }
            }
            (nw, nh, out)
        }
        2 => {
            let mut out = values.to_vec();
            out.reverse();
            (width, height, out)
        }
        _ => {
            let (nw, nh) = (height, width);
            let mut out = Vec::with_capacity(values.len());
            for ny in 0..nh {
                for nx in 0..nw {
                    let x = ny;
                    let y = height - 1 - nx;
                    out.push(values[y * width + x]);
                }
            }
            (nw, nh, out)
        }
    }
}

/// A real-valued image: a recorded intensity, or the amplitude or phase of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    optics: Optics,
    kind: ImageKind,
    values: Vec<f64>,
}

impl RealImage {
    pub fn new(
        width: usize,
        height: usize,
        optics: Optics,
        kind: ImageKind,
        values: Vec<f64>,
    ) -> Result<Self> {
        optics.validate()?;
        check_dims(width, height, values.len())?;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidField(format!("non-finite sample at index {i}")));
            }
            match kind {
                ImageKind::Intensity | ImageKind::Amplitude if v < 0.0 => {
                    if kind == ImageKind::Intensity {
                        return Err(Error::NegativeIntensity { index: i, value: v });
                    }
                    return Err(Error::InvalidField(format!(
                        "negative amplitude {v} at index {i}"
                    )));
                }
                ImageKind::Phase if !(v > -PI && v <= PI) => {
                    return Err(Error::InvalidField(format!(
                        "phase {v} at index {i} outside (-pi, pi]"
                    )));
                }
                _ => {}
            }
        }
        Ok(Self {
            width,
            height,
            optics,
            kind,
            values,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        optics: Optics,
        kind: ImageKind,
        value: f64,
    ) -> Result<Self> {
        Self::new(width, height, optics, kind, vec![value; width * height])
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        optics: Optics,
        kind: ImageKind,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            optics,
            kind,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn optics(&self) -> Optics {
        self.optics
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.optics.pixel_pitch_um
    }

    pub fn wavelength(&self) -> f64 {
        self.optics.wavelength_um
    }

    pub fn kind(&self) -> ImageKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn ensure_same_grid(&self, other: &RealImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        if self.optics != other.optics {
            return Err(Error::DimensionMismatch(format!(
                "optics {:?} vs {:?}",
                self.optics, other.optics
            )));
        }
        Ok(())
    }

    pub fn rotate_quarter_turns(&self, quarter_turns: u8) -> RealImage {
        let (width, height, values) =
            rotate_buffer(self.width, self.height, &self.values, quarter_turns);
        Self::from_parts_unchecked(width, height, self.optics, self.kind, values)
    }

    /// Scales every sample by `factor`; used for intensity normalization.
    pub fn scaled(&self, factor: f64) -> Result<RealImage> {
        Self::new(
            self.width,
            self.height,
            self.optics,
            self.kind,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Splits a field into its amplitude and phase images.
pub fn decompose(field: &ComplexField) -> (RealImage, RealImage) {
    (field.amplitude(), field.phase())
}

/// Rebuilds a field from amplitude and phase images on the same grid.
pub fn compose(amplitude: &RealImage, phase: &RealImage) -> Result<ComplexField> {
    if amplitude.kind() != ImageKind::Amplitude {
        return Err(Error::DimensionMismatch(format!(
            "expected amplitude image, got {:?}",
            amplitude.kind()
        )));
    }
    if phase.kind() != ImageKind::Phase {
        return Err(Error::DimensionMismatch(format!(
            "expected phase image, got {:?}",
            phase.kind()
        )));
    }
    amplitude.ensure_same_grid(phase)?;
    let values = amplitude
        .values()
        .iter()
        .zip(phase.values())
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    ComplexField::new(amplitude.width(), amplitude.height(), amplitude.optics(), values)
}

/// Imaging geometry of an on-chip in-line holographic microscope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureGeometry {
    pub wavelength_um: f64,
    pub pixel_pitch_um: f64,
    /// Sample-to-sensor distance.
    pub z2_um: f64,
    /// Sample-to-sensor distances of a multi-height acquisition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heights_um: Option<Vec<f64>>,
}

impl Default for CaptureGeometry {
    fn default() -> Self {
        Self {
            wavelength_um: 0.53,
            pixel_pitch_um: 1.12,
            z2_um: 1000.0,
            heights_um: None,
        }
    }
}

impl CaptureGeometry {
    pub fn new(wavelength_um: f64, pixel_pitch_um: f64, z2_um: f64) -> Result<Self> {
        let g = Self {
            wavelength_um,
            pixel_pitch_um,
            z2_um,
            heights_um: None,
        };
        g.validate()?;
        Ok(g)
    }

    /// Adds `count` heights starting at `z2` and spaced by `spacing_um`.
    pub fn with_height_series(mut self, count: usize, spacing_um: f64) -> Result<Self> {
        self.heights_um = Some((0..count).map(|k| self.z2_um + k as f64 * spacing_um).collect());
        self.validate()?;
        Ok(self)
    }

    pub fn with_heights(mut self, heights_um: Vec<f64>) -> Result<Self> {
        self.heights_um = Some(heights_um);
        self.validate()?;
        Ok(self)
    }

    pub fn optics(&self) -> Optics {
        Optics {
            pixel_pitch_um: self.pixel_pitch_um,
            wavelength_um: self.wavelength_um,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optics().validate()?;
        if !self.z2_um.is_finite() {
            return Err(Error::InvalidGeometry("z2 must be finite".into()));
        }
        if let Some(h) = &self.heights_um {
            validate_heights(h).map_err(Error::InvalidGeometry)?;
        }
        Ok(())
    }

    /// The grid cannot represent every propagating angle when the pitch
    /// exceeds half a wavelength; high-angle scattering then aliases.
    pub fn aliasing_risk(&self) -> bool {
        self.wavelength_um < 2.0 * self.pixel_pitch_um
    }
}

pub(crate) fn validate_heights(heights: &[f64]) -> std::result::Result<(), String> {
    if heights.is_empty() {
        return Err("at least one height is required".into());
    }
    if heights.iter().any(|h| !h.is_finite()) {
        return Err("heights must be finite".into());
    }
    if heights.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("heights must be strictly increasing: {heights:?}"));
    }
    Ok(())
}
