//! Renders a particle hologram and a three-height texture stack, writing HIDF
//! files and PNG previews.
//!
//! ```text
//! cargo run --example simulate_hologram -- [out_dir] [seed]
//! ```

use std::path::PathBuf;

use holofocus::io::{write_complex, write_real};
use holofocus::prelude::*;
use holofocus::preview::write_preview;

fn main() -> holofocus::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "example_out/simulate".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    std::fs::create_dir_all(&out).map_err(|e| holofocus::Error::io(&out, e))?;

    let geometry = CaptureGeometry::default();
    let scene = generate_scene_seeded(&SceneSpec::particles(12, seed).with_fov(256))?;
    let holo = render_hologram(&scene, &geometry)?;
    write_real(&holo, &out.join("particles.hidf"))?;
    write_complex(&scene.object_field(), &out.join("particles_object.hidf"))?;
    write_preview(&holo, &out.join("particles.png"))?;
    println!("{} particles, hologram mean {:.4}", scene.particles.len(), holo.mean());

    let texture = generate_scene_seeded(&SceneSpec::texture(seed).with_fov(256))?;
    let stack = render_stack(&texture, &geometry.with_height_series(3, 15.0)?)?;
    for (i, (h, z)) in stack.holograms().iter().zip(stack.heights()).enumerate() {
        write_real(h, &out.join(format!("texture_{i:02}.hidf")))?;
        println!("texture hologram {i} at z = {z} um");
    }
    write_preview(&texture.object_amplitude(), &out.join("texture_truth.png"))?;
    Ok(())
}
