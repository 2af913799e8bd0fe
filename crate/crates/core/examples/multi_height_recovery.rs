//! Multi-height phase recovery on a textured sample versus single-hologram
//! back-propagation.

use holofocus::prelude::*;

fn main() -> holofocus::Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let geometry = CaptureGeometry::default();
    let scene = generate_scene_seeded(&SceneSpec::texture(2).with_fov(256))?;
    let stack = render_stack(&scene, &geometry.clone().with_height_series(8, 15.0)?)?;
    let truth = scene.object_amplitude();

    let single = backpropagate_intensity(&stack.holograms()[0], geometry.z2_um)?.amplitude();
    let result = mhpr(&stack, &MhprParams { iterations, ..MhprParams::default() })?;
    let recovered = result.field.amplitude();

    let p = SsimParams::default();
    let err = |a: &RealImage| -> f64 {
        a.values().iter().zip(truth.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    println!("SSIM single {:.3}  mhpr {:.3}", ssim(&single, &truth, &p)?, ssim(&recovered, &truth, &p)?);
    println!("amplitude error reduced {:.2}x", err(&single) / err(&recovered));
    for (i, r) in result.residuals.iter().enumerate().step_by(4) {
        println!("pass {:>2}: residual {r:.3e}", i + 1);
    }

    // heights known only approximately: refine them first
    let shifted = stack.with_heights(stack.heights().iter().map(|h| h + 6.0).collect())?;
    let params = MhprParams {
        iterations,
        refine_heights: true,
        ..MhprParams::default()
    };
    let refined = mhpr(&shifted, &params)?;
    println!("refined heights {:?}", refined.heights.iter().map(|h| format!("{h:.1}")).collect::<Vec<_>>());
    Ok(())
}
