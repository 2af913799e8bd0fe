//! Reconstruction quality against focus error for back-propagation and
//! multi-height recovery, written as CSV.
//!
//! Passing a directory of externally produced reconstructions adds a third column.

use std::path::PathBuf;

use holofocus::metrics::sweep::{Backprop, FromDirectory, Mhpr, Reconstructor, SweepCase, SweepMetric};
use holofocus::metrics::{defocus_sweep, dz_grid};
use holofocus::prelude::*;

fn main() -> holofocus::Result<()> {
    let network = std::env::args().nth(1).map(PathBuf::from);
    let geometry = CaptureGeometry::default().with_height_series(8, 15.0)?;
    let cases = (0..2)
        .map(|s| SweepCase::simulate(&generate_scene_seeded(&SceneSpec::texture(s).with_fov(96))?, &geometry))
        .collect::<holofocus::Result<Vec<_>>>()?;
    let grid = dz_grid(-100.0, 100.0, 10.0)?;

    let mhpr = Mhpr::default();
    let mut methods: Vec<&dyn Reconstructor> = vec![&Backprop, &mhpr];
    let external = network.map(|dir| FromDirectory {
        label: "network".into(),
        dir,
    });
    if let Some(ext) = external.as_ref().filter(|e| e.covers(cases.len(), &grid)) {
        methods.push(ext);
    }
    let result = defocus_sweep(&methods, &cases, &grid, &SweepMetric::Ssim(SsimParams::default()))?;
    print!("{}", result.to_csv());
    Ok(())
}
