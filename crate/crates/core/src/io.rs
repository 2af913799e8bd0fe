//! The `HIDF` field container.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                                     |
//! |-------|-------------------------------------------------------------|
//! | 4     | magic `HIDF`                                                |
//! | 2     | `u16` version, currently 1                                  |
//! | 1     | `u8` kind: 0 complex, 1 intensity, 2 amplitude, 3 phase     |
//! | 4     | `u32` width                                                 |
//! | 4     | `u32` height                                                |
//! | 8     | `f64` pixel pitch (um)                                      |
//! | 8     | `f64` wavelength (um)                                       |
//! | ...   | `f32` samples row-major; complex samples interleave re, im  |
//!
//! An optional JSON sidecar with the same stem carries provenance.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{wrap_phase, ComplexField, ImageKind, Optics, RealImage};

pub const FIELD_MAGIC: &[u8; 4] = b"HIDF";
pub const FIELD_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4 + 8 + 8;

/// Contents of a field container.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredField {
    Complex(ComplexField),
    Real(RealImage),
}

impl StoredField {
    pub fn kind_code(&self) -> u8 {
        match self {
            StoredField::Complex(_) => 0,
            StoredField::Real(img) => img.kind().code(),
        }
    }

    pub fn into_complex(self) -> Option<ComplexField> {
        match self {
            StoredField::Complex(f) => Some(f),
            StoredField::Real(_) => None,
        }
    }

    pub fn into_real(self) -> Option<RealImage> {
        match self {
            StoredField::Real(r) => Some(r),
            StoredField::Complex(_) => None,
        }
    }
}

fn header(kind: u8, width: usize, height: usize, optics: Optics) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&optics.pixel_pitch_um.to_le_bytes());
    out.extend_from_slice(&optics.wavelength_um.to_le_bytes());
    out
}

pub fn encode_complex(field: &ComplexField) -> Vec<u8> {
    let mut out = header(0, field.width(), field.height(), field.optics());
    out.reserve(field.len() * 8);
    for v in field.values() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

pub fn encode_real(img: &RealImage) -> Vec<u8> {
    let mut out = header(img.kind().code(), img.width(), img.height(), img.optics());
    out.reserve(img.len() * 4);
    for v in img.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::corrupt(
                self.path,
                format!("truncated: need {} bytes at offset {}, have {}", n, self.pos, self.bytes.len()),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::corrupt(
                self.path,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

/// f32 rounding can push a wrapped phase just past `pi`; fold it back.
pub(crate) fn restore_phase(v: f32) -> f64 {
    let p = wrap_phase(v as f64);
    if p > std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        p
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<StoredField> {
    let mut c = Cursor::new(bytes, path);
    if c.take(4)? != FIELD_MAGIC {
        return Err(Error::corrupt(path, "bad magic, expected HIDF"));
    }
    let version = c.u16()?;
    if version != FIELD_VERSION {
        return Err(Error::corrupt(path, format!("unsupported version {version}")));
    }
    let kind = c.u8()?;
    let width = c.u32()? as usize;
    let height = c.u32()? as usize;
    let optics = Optics {
        pixel_pitch_um: c.f64()?,
        wavelength_um: c.f64()?,
    };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::corrupt(path, "dimensions overflow"))?;
    let bad = |e: Error| Error::corrupt(path, e.to_string());
    let stored = if kind == 0 {
        let raw = c.f32s(2 * n)?;
        let values = raw
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0] as f64, p[1] as f64))
            .collect();
        StoredField::Complex(ComplexField::new(width, height, optics, values).map_err(bad)?)
    } else {
        let kind = ImageKind::from_code(kind)
            .ok_or_else(|| Error::corrupt(path, format!("unknown kind code {kind}")))?;
        let raw = c.f32s(n)?;
        let values = match kind {
            ImageKind::Phase => raw.into_iter().map(restore_phase).collect(),
            _ => raw.into_iter().map(|v| v as f64).collect(),
        };
        StoredField::Real(RealImage::new(width, height, optics, kind, values).map_err(bad)?)
    };
    c.finish()?;
    Ok(stored)
}

pub fn write_complex(field: &ComplexField, path: &Path) -> Result<()> {
    std::fs::write(path, encode_complex(field)).map_err(|e| Error::io(path, e))
}

pub fn write_real(img: &RealImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_real(img)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<StoredField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Reads a container that must hold a complex field.
pub fn read_complex(path: &Path) -> Result<ComplexField> {
    read_field(path)?
        .into_complex()
        .ok_or_else(|| Error::corrupt(path, "expected a complex field"))
}

/// Reads a container that must hold a real image of `kind`.
pub fn read_real(path: &Path, kind: ImageKind) -> Result<RealImage> {
    match read_field(path)? {
        StoredField::Real(img) if img.kind() == kind => Ok(img),
        other => Err(Error::corrupt(
            path,
            format!("expected {kind:?} image, found kind code {}", other.kind_code()),
        )),
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes pretty JSON next to `path` (same stem, `.json`).
pub fn write_sidecar<T: Serialize>(path: &Path, meta: &T) -> Result<()> {
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(meta)?;
    std::fs::write(&side, text + "\n").map_err(|e| Error::io(side, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn optics() -> Optics {
        Optics::new(1.12, 0.53).unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let f = ComplexField::filled(3, 2, optics(), Complex64::new(1.5, -2.0)).unwrap();
        let bytes = encode_complex(&f);
        assert_eq!(&bytes[0..4], b"HIDF");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 0);
        assert_eq!(&bytes[7..11], &[3, 0, 0, 0]);
        assert_eq!(&bytes[11..15], &[2, 0, 0, 0]);
        assert_eq!(&bytes[15..23], &1.12f64.to_le_bytes());
        assert_eq!(&bytes[23..31], &0.53f64.to_le_bytes());
        assert_eq!(bytes.len(), HEADER_LEN + 6 * 8);
        assert_eq!(&bytes[31..35], &1.5f32.to_le_bytes());
        assert_eq!(&bytes[35..39], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn complex_round_trip_at_f32_precision() {
        let f = ComplexField::from_fn(5, 4, optics(), |x, y| {
            Complex64::new(x as f64 * 0.1 + 0.3, -(y as f64) / 7.0)
        })
        .unwrap();
        let back = decode(&encode_complex(&f), Path::new("mem")).unwrap().into_complex().unwrap();
        assert_eq!(back.optics(), f.optics());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.re, b.re as f32 as f64);
            assert_eq!(a.im, b.im as f32 as f64);
        }
    }

    #[test]
    fn phase_images_stay_in_range_after_f32_rounding() {
        let img = RealImage::new(2, 1, optics(), ImageKind::Phase, vec![PI, -PI + 1e-12]).unwrap();
        let back = decode(&encode_real(&img), Path::new("mem")).unwrap().into_real().unwrap();
        assert_eq!(back.kind(), ImageKind::Phase);
        assert!(back.values().iter().all(|v| *v > -PI && *v <= PI));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let img = RealImage::filled(4, 4, optics(), ImageKind::Intensity, 0.5).unwrap();
        let bytes = encode_real(&img);
        let p = Path::new("x.hidf");
        assert!(matches!(decode(&bytes[..bytes.len() - 3], p), Err(Error::CorruptFile { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, p), Err(Error::CorruptFile { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad, p), Err(Error::CorruptFile { .. })));
        let mut bad = bytes.clone();
        bad[6] = 7;
        assert!(matches!(decode(&bad, p), Err(Error::CorruptFile { .. })));
        let mut bad = bytes;
        bad.push(0);
        assert!(matches!(decode(&bad, p), Err(Error::CorruptFile { .. })));
    }

    #[test]
    fn files_and_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("holo.hidf");
        let img = RealImage::filled(4, 4, optics(), ImageKind::Intensity, 0.5).unwrap();
        write_real(&img, &p).unwrap();
        write_sidecar(&p, &serde_json::json!({"seed": 7})).unwrap();
        assert_eq!(read_real(&p, ImageKind::Intensity).unwrap(), img);
        assert!(read_real(&p, ImageKind::Amplitude).is_err());
        assert!(read_complex(&p).is_err());
        assert!(dir.path().join("holo.json").exists());
        let missing = dir.path().join("nope.hidf");
        match read_field(&missing) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
    }
}
