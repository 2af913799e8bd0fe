//! Angular-spectrum propagation: forward to the sensor, back again, and the
//! reuse of one spectrum across many distances.

use holofocus::prelude::*;

fn main() -> holofocus::Result<()> {
    let scene = generate_scene_seeded(&SceneSpec::texture(4).with_fov(128))?;
    let object = scene.object_field();

    let at_sensor = propagate(&object, 1000.0)?;
    let back = propagate(&at_sensor, -1000.0)?;
    println!("round trip relative L2 error {:.2e}", back.relative_l2_error(&object)?);

    let split = propagate(&propagate(&object, 350.0)?, 650.0)?;
    println!("350 + 650 um vs 1000 um: {:.2e}", split.relative_l2_error(&at_sensor)?);

    // only the intensity reaches a sensor; back-propagating it leaves a twin image
    let holo = at_sensor.intensity();
    let naive = backpropagate_intensity(&holo, 1000.0)?;
    let p = SsimParams::default();
    println!("SSIM of intensity back-propagation {:.3}", ssim(&naive.amplitude(), &scene.object_amplitude(), &p)?);

    let spectrum = AngularSpectrum::from_hologram(&holo)?;
    for dz in [-40.0, -20.0, 0.0, 20.0, 40.0] {
        let a = spectrum.at(-(1000.0 + dz))?.amplitude();
        println!("dz {dz:+5} um  SSIM {:.3}", ssim(&a, &scene.object_amplitude(), &p)?);
    }
    Ok(())
}
