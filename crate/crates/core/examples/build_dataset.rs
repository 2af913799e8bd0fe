//! Builds a small defocus-augmented training set and reads it back.

use std::path::PathBuf;

use holofocus::dataset::{generate_scenes, load_split, Split};
use holofocus::prelude::*;

fn main() -> holofocus::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example_out/dataset".into()));
    let seed = 7;
    let scenes = generate_scenes(&SceneSpec::particles(3, seed).with_fov(32), 17, seed)?;

    let mut config = DatasetConfig::particles(seed);
    config.defocus.n_distances = 5;
    let manifest = build_dataset(&scenes, &config, &out)?;

    println!(
        "{} sources -> {} regions, {} pairs ({} train / {} validation)",
        manifest.source_count,
        manifest.regions,
        manifest.pairs.len(),
        manifest.count(Split::Train),
        manifest.count(Split::Validation)
    );
    println!("validation sources {:?}", manifest.source_ids(Split::Validation));
    assert!(manifest.leaked_sources().is_empty());

    let val = load_split(&out, Split::Validation)?;
    let first = &val[0];
    println!(
        "first validation pair: source {:?}, dz {:+.1} um, rotation {} deg, {}x{}",
        first.source_id,
        first.dz_um,
        first.rotation_deg(),
        first.input.width(),
        first.input.height()
    );
    Ok(())
}
