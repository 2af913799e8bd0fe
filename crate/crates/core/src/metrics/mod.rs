//! Reconstruction quality and cost measurements.

mod fwhm;
mod ssim;
pub mod sweep;
pub mod timing;

pub use fwhm::{fwhm, fwhm_with_radius, outer_quartile_background, Axis, DEFAULT_HINT_RADIUS};
pub use ssim::{ssim, SsimParams, SsimWindow};
pub use sweep::{defocus_sweep, dz_grid, Reconstructor, SweepCase, SweepMetric, SweepResult};
pub use timing::{loglog_slope, timing_study, TimingConfig, TimingRow, TimingStudy};
