//! Apparent width of a small particle as the reconstruction drifts out of focus.

use holofocus::metrics::sweep::{Backprop, Reconstructor, SweepCase};
use holofocus::prelude::*;
use holofocus::simulator::SceneContent;

fn main() -> holofocus::Result<()> {
    let mut spec = SceneSpec::particles(1, 0).with_fov(128);
    if let SceneContent::Particles { radius_um, opacity, .. } = &mut spec.content {
        *radius_um = [2.0, 2.0];
        *opacity = [1.0, 1.0];
    }
    let case = SweepCase::simulate(&generate_scene_seeded(&spec)?, &CaptureGeometry::default())?;
    let hint = case.peak_hint.expect("scene has a particle");
    println!("ground truth FWHM {:.2} um", fwhm(&case.reference, hint, Axis::X)?);

    let grid: Vec<f64> = (-6..=6).map(|k| 10.0 * k as f64).collect();
    for (dz, img) in grid.iter().zip(Backprop.reconstruct(0, &case, &grid)?) {
        match fwhm(&img, hint, Axis::X) {
            Ok(w) => println!("dz {dz:+6.1} um  FWHM {w:6.2} um"),
            Err(e) => println!("dz {dz:+6.1} um  {e}"),
        }
    }
    Ok(())
}
