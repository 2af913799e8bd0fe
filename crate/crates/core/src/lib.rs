//! In-line digital holography toolkit.
//!
//! `holofocus` simulates lensfree in-line holograms, reconstructs them by
//! angular-spectrum back-propagation and multi-height phase recovery,
//! autofocuses them, builds defocus-augmented training datasets for
//! extended depth-of-field reconstruction networks, and measures
//! reconstruction quality (SSIM, particle FWHM, defocus sweeps, timing).
//!
//! All lengths are micrometers. A quick tour:
//!
//! ```no_run
//! use holofocus::prelude::*;
//!
//! let geometry = CaptureGeometry::default();
//! let scene = generate_scene_seeded(&SceneSpec::particles(5, 7).with_fov(128))?;
//! let holo = render_hologram(&scene, &geometry)?;
//! let focus = autofocus_search(
//!     &holo,
//!     900.0,
//!     1100.0,
//!     FocusCriterion::TamuraOfGradient,
//!     SearchStrategy::default(),
//! )?;
//! let recon = backpropagate_intensity(&holo, focus.z_hat)?;
//! println!("focus at {:.1} um, mean amplitude {:.3}", focus.z_hat, recon.amplitude().mean());
//! # Ok::<(), holofocus::Error>(())
//! ```
//!
//! Runnable programs for each capability live in `examples/`.

pub mod autofocus;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod metrics;
pub mod phase_retrieval;
pub mod preview;
pub mod propagation;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::autofocus::{
        autofocus_search, gini, tamura, tamura_of_gradient, FocusCriterion, FocusResult,
        SearchStrategy,
    };
    pub use crate::dataset::{build_dataset, DatasetConfig, DatasetManifest, DefocusSpec, TargetMode};
    pub use crate::error::{Error, Result};
    pub use crate::field::{
        compose, decompose, CaptureGeometry, ComplexField, ImageKind, Optics, RealImage,
    };
    pub use crate::metrics::{fwhm, ssim, Axis, SsimParams, SsimWindow};
    pub use crate::phase_retrieval::{mhpr, refine_heights, HologramStack, MhprParams};
    pub use crate::propagation::{backpropagate_intensity, propagate, AngularSpectrum};
    pub use crate::rng::Rng;
    pub use crate::simulator::{
        generate_scene, generate_scene_seeded, render_hologram, render_stack, Scene, SceneSpec,
    };
}
