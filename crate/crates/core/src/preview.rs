//! 8-bit PNG previews. Display only; metrics always read the HIDF data.

use std::path::Path;

use image::{GrayImage, Luma};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::RealImage;
use crate::io::write_sidecar;

/// The linear map used for a preview: `min` renders black, `max` white.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreviewScale {
    pub min: f64,
    pub max: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    kind: &'a str,
    width: usize,
    height: usize,
    scaling: &'a str,
    min: f64,
    max: f64,
}

pub fn to_gray(img: &RealImage) -> (GrayImage, PreviewScale) {
    let (min, max) = img
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = max - min;
    let out = GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = img.at(x as usize, y as usize);
        let t = if span > 0.0 { (v - min) / span } else { 0.0 };
        Luma([(t * 255.0).round() as u8])
    });
    (out, PreviewScale { min, max })
}

/// Writes `path` as an 8-bit PNG scaled to the image's own range, plus a
/// JSON sidecar recording that range.
pub fn write_preview(img: &RealImage, path: &Path) -> Result<PreviewScale> {
    let (gray, scale) = to_gray(img);
    gray.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_sidecar(
        path,
        &Sidecar {
            kind: match img.kind() {
                crate::field::ImageKind::Intensity => "intensity",
                crate::field::ImageKind::Amplitude => "amplitude",
                crate::field::ImageKind::Phase => "phase",
            },
            width: img.width(),
            height: img.height(),
            scaling: "8-bit per-image min-max",
            min: scale.min,
            max: scale.max,
        },
    )?;
    Ok(scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ImageKind, Optics};

    #[test]
    fn min_max_scaling() {
        let img = RealImage::new(
            3,
            1,
            Optics::new(1.0, 0.5).unwrap(),
            ImageKind::Amplitude,
            vec![0.5, 1.0, 1.5],
        )
        .unwrap();
        let (g, s) = to_gray(&img);
        assert_eq!(s, PreviewScale { min: 0.5, max: 1.5 });
        assert_eq!(g.as_raw(), &vec![0, 128, 255]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        write_preview(&img, &p).unwrap();
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
        assert_eq!(side["max"], 1.5);
    }
}
