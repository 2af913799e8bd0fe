//! End-to-end checks against the simulator, which supplies ground truth.

use holofocus::dataset::{read_pair, Split, PAIR_DIR};
use holofocus::io::{read_complex, write_complex};
use holofocus::prelude::*;
use holofocus::simulator::SceneContent;

fn geometry() -> CaptureGeometry {
    CaptureGeometry::default()
}

fn single_particle(seed: u64, radius: f64, fov: usize) -> Scene {
    let mut spec = SceneSpec::particles(1, seed).with_fov(fov);
    if let SceneContent::Particles { radius_um, opacity, .. } = &mut spec.content {
        *radius_um = [radius, radius];
        *opacity = [1.0, 1.0];
    }
    generate_scene_seeded(&spec).unwrap()
}

fn l2(a: &RealImage, b: &RealImage) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn particle_centre_is_darkest_in_focus() {
    let g = geometry();
    for seed in 0..4 {
        let scene = single_particle(seed, 3.0, 64);
        let at_sensor = propagate(&scene.object_field(), g.z2_um).unwrap();
        let (cx, cy) = scene.particles[0].pixel_centre(g.pixel_pitch_um);
        let (x, y) = (cx.round() as usize % 64, cy.round() as usize % 64);
        let sweep: Vec<(f64, f64)> = (-4..=4)
            .map(|k| {
                let dz = 10.0 * k as f64;
                (dz, propagate(&at_sensor, -(g.z2_um + dz)).unwrap().amplitude().at(x, y))
            })
            .collect();
        let darkest = sweep.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(darkest.0, 0.0, "{sweep:?}");
        assert!(darkest.1 < 1e-6);
    }
}

#[test]
fn intensity_back_propagation_keeps_half_the_contrast() {
    // the other half goes to the twin image
    let g = geometry();
    let scene = single_particle(1, 2.0, 64);
    let holo = render_hologram(&scene, &g).unwrap();
    let (cx, cy) = scene.particles[0].pixel_centre(g.pixel_pitch_um);
    let a = backpropagate_intensity(&holo, g.z2_um).unwrap().amplitude();
    let centre = a.at(cx.round() as usize % 64, cy.round() as usize % 64);
    assert!((centre - 0.5).abs() < 0.1, "{centre}");
}

#[test]
fn tog_prefers_focus_over_fifty_micron_defocus() {
    let g = geometry();
    for seed in 0..3 {
        let scene = generate_scene_seeded(&SceneSpec::particles(10, seed).with_fov(128)).unwrap();
        let holo = render_hologram(&scene, &g).unwrap();
        let focused = tamura_of_gradient(&backpropagate_intensity(&holo, g.z2_um).unwrap()).unwrap();
        let blurred = tamura_of_gradient(&backpropagate_intensity(&holo, g.z2_um + 50.0).unwrap()).unwrap();
        assert!(focused > blurred, "seed {seed}: {focused} vs {blurred}");
    }
}

#[test]
fn coarse_to_fine_matches_dense_sweep() {
    let g = geometry();
    let scene = generate_scene_seeded(&SceneSpec::particles(10, 9).with_fov(128)).unwrap();
    let holo = render_hologram(&scene, &g).unwrap();
    let c = FocusCriterion::TamuraOfGradient;
    let fast = autofocus_search(&holo, 800.0, 1200.0, c, SearchStrategy::default()).unwrap();
    let dense = autofocus_search(&holo, 800.0, 1200.0, c, SearchStrategy::Grid { n_steps: 801 }).unwrap();
    assert_eq!(fast.evaluations, 63);
    assert!((fast.z_hat - dense.z_hat).abs() <= 2.0, "{} vs {}", fast.z_hat, dense.z_hat);
    assert!((fast.z_hat - 1000.0).abs() <= 5.0);
    assert!(!fast.boundary_hit);

    let outside = autofocus_search(&holo, 1100.0, 1300.0, c, SearchStrategy::default()).unwrap();
    assert!(outside.boundary_hit);
}

#[test]
fn refinement_recovers_perturbed_heights() {
    let g = geometry().with_height_series(3, 15.0).unwrap();
    let scene = generate_scene_seeded(&SceneSpec::particles(6, 4).with_fov(96)).unwrap();
    let stack = render_stack(&scene, &g).unwrap();
    let truth = stack.heights().to_vec();
    let off = stack.with_heights(truth.iter().map(|h| h + 10.0).collect()).unwrap();
    let refined = refine_heights(&off, FocusCriterion::TamuraOfGradient, 20.0).unwrap();
    for (r, t) in refined.heights().iter().zip(&truth) {
        assert!((r - t).abs() <= 2.0, "{r} vs {t}");
    }
}

#[test]
fn multi_height_recovery_halves_error() {
    let g = geometry();
    let stack_geometry = g.clone().with_height_series(8, 15.0).unwrap();
    let scene = generate_scene_seeded(&SceneSpec::texture(7).with_fov(256)).unwrap();
    let stack = render_stack(&scene, &stack_geometry).unwrap();
    let truth = scene.object_amplitude();
    let single = backpropagate_intensity(&stack.holograms()[0], g.z2_um).unwrap().amplitude();
    let result = mhpr(&stack, &MhprParams::default()).unwrap();
    let recovered = result.field.amplitude();
    let p = SsimParams::default();
    assert!(ssim(&recovered, &truth, &p).unwrap() > ssim(&single, &truth, &p).unwrap());
    let ratio = l2(&single, &truth) / l2(&recovered, &truth);
    assert!(ratio >= 2.0, "error ratio {ratio}");
    assert_eq!(result.residuals.len(), 20);
    assert!(result.residuals.windows(2).all(|w| w[1] <= w[0] + 1e-6));
}

#[test]
fn field_files_round_trip_at_f32_precision() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate_scene_seeded(&SceneSpec::texture(1).with_fov(32)).unwrap();
    let f = scene.object_field();
    let path = dir.path().join("object.hidf");
    write_complex(&f, &path).unwrap();
    let back = read_complex(&path).unwrap();
    assert_eq!(back.optics(), f.optics());
    assert!(back.relative_l2_error(&f).unwrap() < 1e-6);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = read_complex(&path).unwrap_err();
    assert!(matches!(err, holofocus::Error::CorruptFile { .. }), "{err}");
    assert!(err.to_string().contains("object.hidf"));
}

fn small_dataset(dir: &std::path::Path, seed: u64) -> DatasetManifest {
    let spec = SceneSpec::particles(2, seed).with_fov(16);
    let scenes = holofocus::dataset::generate_scenes(&spec, 6, seed).unwrap();
    let mut cfg = DatasetConfig::particles(seed);
    cfg.defocus.n_distances = 3;
    build_dataset(&scenes, &cfg, dir).unwrap()
}

#[test]
fn dataset_is_deterministic_and_self_consistent() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = small_dataset(a.path(), 12);
    let mb = small_dataset(b.path(), 12);
    assert_eq!(ma, mb);
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
    for p in &ma.pairs {
        assert_eq!(std::fs::read(a.path().join(&p.file)).unwrap(), std::fs::read(b.path().join(&p.file)).unwrap());
    }
    assert_eq!(ma.pairs.len(), 6 * 3 * 4);
    assert!(ma.leaked_sources().is_empty());
    assert_eq!(ma.count(Split::Train) + ma.count(Split::Validation), ma.pairs.len());

    let optics = ma.config.geometry.optics();
    for p in ma.pairs.iter().take(8) {
        let pair = read_pair(&a.path().join(&p.file), optics).unwrap();
        assert_eq!(pair.dz_um as f32, p.dz_um as f32);
        assert_eq!(pair.rotation_deg(), p.rotation_deg);
        assert!((-100.0..=100.0).contains(&pair.dz_um));
    }

    let other = tempfile::tempdir().unwrap();
    assert_ne!(small_dataset(other.path(), 13).pairs[0].dz_um, ma.pairs[0].dz_um);
}

#[test]
fn dataset_reconcile_and_corrupt_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_dataset(dir.path(), 3);
    let victim = dir.path().join(&m.pairs[5].file);
    let bytes = std::fs::read(&victim).unwrap();
    std::fs::write(&victim, &bytes[..bytes.len() / 2]).unwrap();
    let optics = m.config.geometry.optics();
    assert!(matches!(read_pair(&victim, optics), Err(holofocus::Error::CorruptFile { .. })));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    std::fs::write(&victim, &bad_magic).unwrap();
    assert!(matches!(read_pair(&victim, optics), Err(holofocus::Error::CorruptFile { .. })));

    std::fs::remove_file(&victim).unwrap();
    std::fs::write(dir.path().join(PAIR_DIR).join("stray.hidp"), b"x").unwrap();
    let (missing, extra) = m.reconcile(dir.path()).unwrap();
    assert_eq!(missing, vec![m.pairs[5].file.clone()]);
    assert_eq!(extra.len(), 1);
}
