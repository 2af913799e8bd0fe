//! Focus search on a simulated particle hologram with each sharpness criterion,
//! compared against a dense grid.

use holofocus::prelude::*;

fn main() -> holofocus::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let geometry = CaptureGeometry::default();
    let scene = generate_scene_seeded(&SceneSpec::particles(10, seed).with_fov(128))?;
    let holo = render_hologram(&scene, &geometry)?;

    for criterion in [FocusCriterion::TamuraOfGradient, FocusCriterion::Tamura, FocusCriterion::Gini] {
        let fast = autofocus_search(&holo, 800.0, 1200.0, criterion, SearchStrategy::default())?;
        let dense = autofocus_search(&holo, 800.0, 1200.0, criterion, SearchStrategy::Grid { n_steps: 801 })?;
        println!(
            "{:>6}: coarse-to-fine {:.2} um in {} evaluations, dense grid {:.2} um in {}",
            criterion.name(),
            fast.z_hat,
            fast.evaluations,
            dense.z_hat,
            dense.evaluations
        );
    }

    let off = autofocus_search(&holo, 1100.0, 1300.0, FocusCriterion::TamuraOfGradient, SearchStrategy::default())?;
    println!("search over [1100, 1300]: {:.1} um, boundary hit {}", off.z_hat, off.boundary_hit);
    Ok(())
}
