//! Angular-spectrum propagation of scalar fields.
//!
//! A field is propagated over a signed axial distance `z` (micrometers) by
//! multiplying its 2D spectrum by
//!
//! ```text
//! H(fx, fy; z) = exp(+i 2 pi z sqrt(1/lambda^2 - fx^2 - fy^2))       inside the band
//! H(fx, fy; z) = exp(-2 pi |z| sqrt(fx^2 + fy^2 - 1/lambda^2))       evanescent
//! ```
//!
//! Positive `z` moves toward the sensor; back-propagation uses negative `z`.
//! Spatial frequencies follow the DFT layout `f_k = k / (N * pitch)` with
//! indices `k >= ceil(N/2)` mapped to `k - N`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};
use crate::field::{ComplexField, ImageKind, Optics, RealImage};

/// Zero padding policy for propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Propagate on the field's own (periodic) grid.
    #[default]
    None,
    /// Embed the field in a grid twice as large in each direction, filled
    /// with the mean of the field's border, then crop back.
    Double,
}

/// The angular-spectrum transfer function for one grid and distance.
#[derive(Debug, Clone)]
pub struct TransferFunction {
    width: usize,
    height: usize,
    z_um: f64,
    values: Vec<Complex64>,
}

impl TransferFunction {
    pub fn new(width: usize, height: usize, optics: Optics, z_um: f64) -> Result<Self> {
        optics.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!("empty grid {width}x{height}")));
        }
        if !z_um.is_finite() {
            return Err(Error::InvalidGeometry(format!("distance must be finite, got {z_um}")));
        }
        let inv_lambda_sq = 1.0 / (optics.wavelength_um * optics.wavelength_um);
        let dfx = 1.0 / (width as f64 * optics.pixel_pitch_um);
        let dfy = 1.0 / (height as f64 * optics.pixel_pitch_um);
        let mut values = Vec::with_capacity(width * height);
        for ky in 0..height {
            let fy = signed_index(ky, height) * dfy;
            for kx in 0..width {
                let fx = signed_index(kx, width) * dfx;
                let arg = inv_lambda_sq - fx * fx - fy * fy;
                let h = if arg >= 0.0 {
                    Complex64::from_polar(1.0, 2.0 * PI * z_um * arg.sqrt())
                } else {
                    Complex64::new((-2.0 * PI * z_um.abs() * (-arg).sqrt()).exp(), 0.0)
                };
                values.push(h);
            }
        }
        Ok(Self {
            width,
            height,
            z_um,
            values,
        })
    }

    pub fn for_field(field: &ComplexField, z_um: f64) -> Result<Self> {
        Self::new(field.width(), field.height(), field.optics(), z_um)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn z_um(&self) -> f64 {
        self.z_um
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Builds the transfer function of `field`'s grid for distance `z_um`.
pub fn transfer_function(field: &ComplexField, z_um: f64) -> Result<TransferFunction> {
    TransferFunction::for_field(field, z_um)
}

/// Whether spectral bin `(kx, ky)` lies inside the propagating band.
pub fn is_propagating(kx: usize, ky: usize, width: usize, height: usize, optics: Optics) -> bool {
    let fx = signed_index(kx, width) / (width as f64 * optics.pixel_pitch_um);
    let fy = signed_index(ky, height) / (height as f64 * optics.pixel_pitch_um);
    fx * fx + fy * fy <= 1.0 / (optics.wavelength_um * optics.wavelength_um)
}

/// Reusable propagator for one grid shape; keeps FFT plans alive between calls.
#[derive(Debug, Clone)]
pub struct Propagator {
    fft: Fft2,
    padding: Padding,
}

impl Propagator {
    pub fn new(width: usize, height: usize, padding: Padding) -> Self {
        let (w, h) = match padding {
            Padding::None => (width, height),
            Padding::Double => (2 * width, 2 * height),
        };
        Self {
            fft: Fft2::new(w, h),
            padding,
        }
    }

    pub fn for_field(field: &ComplexField) -> Self {
        Self::new(field.width(), field.height(), Padding::None)
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        let (w, h) = match self.padding {
            Padding::None => (field.width(), field.height()),
            Padding::Double => (2 * field.width(), 2 * field.height()),
        };
        if w != self.fft.width() || h != self.fft.height() {
            return Err(Error::DimensionMismatch(format!(
                "propagator planned for {}x{}, field is {}x{}",
                self.fft.width(),
                self.fft.height(),
                field.width(),
                field.height()
            )));
        }
        Ok(())
    }

    pub fn propagate(&self, field: &ComplexField, z_um: f64) -> Result<ComplexField> {
        self.check(field)?;
        match self.padding {
            Padding::None => {
                let tf = TransferFunction::for_field(field, z_um)?;
                let mut buf = field.values().to_vec();
                self.fft.forward(&mut buf);
                for (v, h) in buf.iter_mut().zip(tf.values()) {
                    *v *= h;
                }
                self.fft.inverse(&mut buf);
                finish(field, buf)
            }
            Padding::Double => {
                let (w, h) = (field.width(), field.height());
                let (pw, ph) = (2 * w, 2 * h);
                let tf = TransferFunction::new(pw, ph, field.optics(), z_um)?;
                let fill = border_mean(field);
                let mut buf = vec![fill; pw * ph];
                for y in 0..h {
                    buf[y * pw..y * pw + w].copy_from_slice(&field.values()[y * w..(y + 1) * w]);
                }
                self.fft.forward(&mut buf);
                for (v, t) in buf.iter_mut().zip(tf.values()) {
                    *v *= t;
                }
                self.fft.inverse(&mut buf);
                let mut out = Vec::with_capacity(w * h);
                for y in 0..h {
                    out.extend_from_slice(&buf[y * pw..y * pw + w]);
                }
                finish(field, out)
            }
        }
    }
}

fn finish(like: &ComplexField, values: Vec<Complex64>) -> Result<ComplexField> {
    let out = ComplexField::from_parts_unchecked(like.width(), like.height(), like.optics(), values);
    if !out.all_finite() {
        return Err(Error::InvalidField("propagation produced non-finite samples".into()));
    }
    Ok(out)
}

fn border_mean(field: &ComplexField) -> Complex64 {
    let (w, h) = (field.width(), field.height());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if y == 0 || x == 0 || y == h - 1 || x == w - 1 {
                acc += field.at(x, y);
                n += 1;
            }
        }
    }
    acc / n as f64
}

/// Propagates `field` by `z_um` on its own periodic grid.
pub fn propagate(field: &ComplexField, z_um: f64) -> Result<ComplexField> {
    Propagator::for_field(field).propagate(field, z_um)
}

pub fn propagate_padded(field: &ComplexField, z_um: f64, padding: Padding) -> Result<ComplexField> {
    Propagator::new(field.width(), field.height(), padding).propagate(field, z_um)
}

/// Square root of a hologram as a zero-phase field; the starting point of
/// every single-intensity reconstruction.
pub fn intensity_to_field(holo: &RealImage) -> Result<ComplexField> {
    if holo.kind() != ImageKind::Intensity {
        return Err(Error::DimensionMismatch(format!(
            "expected intensity image, got {:?}",
            holo.kind()
        )));
    }
    if let Some((index, &value)) = holo.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeIntensity { index, value });
    }
    let values = holo
        .values()
        .iter()
        .map(|&i| Complex64::new(i.sqrt(), 0.0))
        .collect();
    ComplexField::new(holo.width(), holo.height(), holo.optics(), values)
}

/// Back-propagates a recorded intensity by `z_um` toward the object,
/// discarding the missing phase. The result carries the twin image.
pub fn backpropagate_intensity(holo: &RealImage, z_um: f64) -> Result<ComplexField> {
    propagate(&intensity_to_field(holo)?, -z_um)
}

/// The spectrum of a field, kept so that many distances can be evaluated
/// with one inverse FFT each.
#[derive(Debug, Clone)]
pub struct AngularSpectrum {
    like: ComplexField,
    spectrum: Vec<Complex64>,
    fft: Fft2,
    kz: Vec<f64>,
}

impl AngularSpectrum {
    pub fn new(field: &ComplexField) -> Self {
        let fft = Fft2::new(field.width(), field.height());
        let mut spectrum = field.values().to_vec();
        fft.forward(&mut spectrum);
        let optics = field.optics();
        let (w, h) = (field.width(), field.height());
        let inv_lambda_sq = 1.0 / (optics.wavelength_um * optics.wavelength_um);
        let mut kz = Vec::with_capacity(w * h);
        for ky in 0..h {
            let fy = signed_index(ky, h) / (h as f64 * optics.pixel_pitch_um);
            for kx in 0..w {
                let fx = signed_index(kx, w) / (w as f64 * optics.pixel_pitch_um);
                let arg = inv_lambda_sq - fx * fx - fy * fy;
                // evanescent bins carry the negated decay rate
                kz.push(if arg >= 0.0 { arg.sqrt() } else { -(-arg).sqrt() });
            }
        }
        Self {
            like: field.clone(),
            spectrum,
            fft,
            kz,
        }
    }

    /// Backed by the same transfer function as [`propagate`], so results agree bit for bit.
    pub fn from_hologram(holo: &RealImage) -> Result<Self> {
        Ok(Self::new(&intensity_to_field(holo)?))
    }

    pub fn width(&self) -> usize {
        self.like.width()
    }

    pub fn height(&self) -> usize {
        self.like.height()
    }

    pub fn optics(&self) -> Optics {
        self.like.optics()
    }

    /// The field propagated by `z_um`.
    pub fn at(&self, z_um: f64) -> Result<ComplexField> {
        if !z_um.is_finite() {
            return Err(Error::InvalidGeometry(format!("distance must be finite, got {z_um}")));
        }
        let mut buf: Vec<Complex64> = self
            .spectrum
            .iter()
            .zip(&self.kz)
            .map(|(s, &kz)| {
                let h = if kz >= 0.0 {
                    Complex64::from_polar(1.0, 2.0 * PI * z_um * kz)
                } else {
                    Complex64::new((2.0 * PI * z_um.abs() * kz).exp(), 0.0)
                };
                s * h
            })
            .collect();
        self.fft.inverse(&mut buf);
        finish(&self.like, buf)
    }
}
