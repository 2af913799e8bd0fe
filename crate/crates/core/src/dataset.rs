//! Defocus-augmented training pairs for extended depth-of-field networks.
//!
//! Each source scene is recorded as a single hologram, brought to its
//! global focus `z*` by autofocusing, and back-propagated to `z* + dz` for
//! a set of focus errors `dz`. Every defocused input is paired with the
//! in-focus object (ground truth, or multi-height phase recovery) and
//! emitted at four rotations. Sources are split 14:3 between training and
//! validation, so no source contributes to both.
//!
//! Pair files (`.hidp`), little-endian:
//!
//! | bytes   | content                                  |
//! |---------|------------------------------------------|
//! | 4       | magic `HIDP`                             |
//! | 2       | `u16` version, currently 1               |
//! | 4       | `u32` height                             |
//! | 4       | `u32` width                              |
//! | 8       | `f64` dz (um)                            |
//! | 1       | `u8` rotation code, quarter turns CCW    |
//! | 4 x H W | `f32` input amplitude, input phase, target amplitude, target phase |

use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autofocus::{autofocus_spectrum, FocusCriterion, SearchStrategy};
use crate::error::{Error, Result};
use crate::field::{compose, decompose, CaptureGeometry, ComplexField, ImageKind, Optics, RealImage};
use crate::io::{restore_phase, write_json, Cursor};
use crate::phase_retrieval::{mhpr, MhprParams};
use crate::propagation::AngularSpectrum;
use crate::rng::Rng;
use crate::simulator::{generate_scene, render_hologram, render_stack, Scene, SceneSpec};

pub const PAIR_MAGIC: &[u8; 4] = b"HIDP";
pub const PAIR_VERSION: u16 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAIR_DIR: &str = "pairs";
pub const ROTATIONS: u8 = 4;

const SHARED_DISTANCE_STREAM: u64 = 1 << 61;
const SPLIT_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    UniformRandom,
    /// Evenly spaced, endpoints included; a single distance sits at the midpoint.
    UniformGrid,
}

/// How far, and how many times, each source is defocused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefocusSpec {
    pub dz_min_um: f64,
    pub dz_max_um: f64,
    pub n_distances: usize,
    pub distribution: Distribution,
    pub seed: u64,
}

impl DefocusSpec {
    pub fn new(dz_min_um: f64, dz_max_um: f64, n_distances: usize, distribution: Distribution, seed: u64) -> Result<Self> {
        let s = Self {
            dz_min_um,
            dz_max_um,
            n_distances,
            distribution,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// A degenerate range is accepted only for a single distance.
    pub fn validate(&self) -> Result<()> {
        if !(self.dz_min_um.is_finite() && self.dz_max_um.is_finite()) {
            return Err(Error::spec("dz_min_um", "range must be finite"));
        }
        if self.n_distances == 0 {
            return Err(Error::spec("n_distances", "must be at least 1"));
        }
        let ordered = self.dz_min_um < self.dz_max_um
            || (self.dz_min_um == self.dz_max_um && self.n_distances == 1);
        if !ordered {
            return Err(Error::spec(
                "dz_max_um",
                format!("must exceed dz_min_um ({} >= {})", self.dz_min_um, self.dz_max_um),
            ));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let (lo, hi, n) = (self.dz_min_um, self.dz_max_um, self.n_distances);
        match self.distribution {
            Distribution::UniformRandom => (0..n).map(|_| rng.uniform_in(lo, hi)).collect(),
            Distribution::UniformGrid if n == 1 => vec![0.5 * (lo + hi)],
            Distribution::UniformGrid => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// The simulated object transmission.
    GroundTruth,
    /// Multi-height phase recovery of a stack rendered for the source.
    Mhpr,
}

/// One defocused input and its in-focus target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: ComplexField,
    pub target: ComplexField,
    pub dz_um: f64,
    /// Quarter turns counter-clockwise, 0 to 3.
    pub rotation: u8,
    /// Not stored in pair files; the manifest carries it.
    pub source_id: Option<usize>,
}

impl TrainingPair {
    pub fn rotation_deg(&self) -> u16 {
        self.rotation as u16 * 90
    }
}

pub fn encode_pair(pair: &TrainingPair) -> Result<Vec<u8>> {
    pair.input.ensure_same_grid(&pair.target)?;
    if pair.rotation >= ROTATIONS {
        return Err(Error::spec("rotation", format!("code {} is not 0..=3", pair.rotation)));
    }
    let (w, h) = (pair.input.width(), pair.input.height());
    let mut out = Vec::with_capacity(23 + 16 * w * h);
    out.extend_from_slice(PAIR_MAGIC);
    out.extend_from_slice(&PAIR_VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&pair.dz_um.to_le_bytes());
    out.push(pair.rotation);
    let (ia, ip) = decompose(&pair.input);
    let (ta, tp) = decompose(&pair.target);
    for plane in [&ia, &ip, &ta, &tp] {
        for v in plane.values() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_pair(pair: &TrainingPair, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pair(pair)?).map_err(|e| Error::io(path, e))
}

/// Decodes a pair file. Pair files do not record optics, so the caller supplies them.
pub fn decode_pair(bytes: &[u8], path: &Path, optics: Optics) -> Result<TrainingPair> {
    let mut c = Cursor::new(bytes, path);
    if c.take(4)? != PAIR_MAGIC {
        return Err(Error::corrupt(path, "bad magic, expected HIDP"));
    }
    let version = c.u16()?;
    if version != PAIR_VERSION {
        return Err(Error::corrupt(path, format!("unsupported version {version}")));
    }
    let h = c.u32()? as usize;
    let w = c.u32()? as usize;
    let dz_um = c.f64()?;
    let rotation = c.u8()?;
    if rotation >= ROTATIONS {
        return Err(Error::corrupt(path, format!("rotation code {rotation}")));
    }
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::corrupt(path, "dimensions overflow"))?;
    let bad = |e: Error| Error::corrupt(path, e.to_string());
    let mut plane = |kind: ImageKind| -> Result<RealImage> {
        let raw = c.f32s(n)?;
        let values = match kind {
            ImageKind::Phase => raw.into_iter().map(restore_phase).collect(),
            _ => raw.into_iter().map(|v| v as f64).collect(),
        };
        RealImage::new(w, h, optics, kind, values).map_err(bad)
    };
    let ia = plane(ImageKind::Amplitude)?;
    let ip = plane(ImageKind::Phase)?;
    let ta = plane(ImageKind::Amplitude)?;
    let tp = plane(ImageKind::Phase)?;
    c.finish()?;
    Ok(TrainingPair {
        input: compose(&ia, &ip).map_err(bad)?,
        target: compose(&ta, &tp).map_err(bad)?,
        dz_um,
        rotation,
        source_id: None,
    })
}

pub fn read_pair(path: &Path, optics: Optics) -> Result<TrainingPair> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pair(&bytes, path, optics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub geometry: CaptureGeometry,
    pub defocus: DefocusSpec,
    pub target_mode: TargetMode,
    /// Autofocus searches `z2` plus or minus this distance.
    pub focus_bracket_um: f64,
    pub criterion: FocusCriterion,
    pub strategy: SearchStrategy,
    /// Stack used by the `mhpr` target mode, starting at the focus estimate.
    pub mhpr_heights: usize,
    pub mhpr_spacing_um: f64,
    pub mhpr: MhprParams,
    /// Use one set of focus errors for every source instead of redrawing.
    pub share_distances: bool,
    /// Train:validation source ratio.
    pub split: [usize; 2],
}

impl DatasetConfig {
    /// 81 random focus errors in [-100, 100] um per source.
    pub fn particles(seed: u64) -> Self {
        Self {
            geometry: CaptureGeometry::default(),
            defocus: DefocusSpec {
                dz_min_um: -100.0,
                dz_max_um: 100.0,
                n_distances: 81,
                distribution: Distribution::UniformRandom,
                seed,
            },
            target_mode: TargetMode::GroundTruth,
            focus_bracket_um: 200.0,
            criterion: FocusCriterion::TamuraOfGradient,
            strategy: SearchStrategy::default(),
            mhpr_heights: 8,
            mhpr_spacing_um: 15.0,
            mhpr: MhprParams::default(),
            share_distances: false,
            split: [14, 3],
        }
    }

    /// 41 random focus errors in [-100, 100] um per source.
    pub fn texture(seed: u64) -> Self {
        let mut c = Self::particles(seed);
        c.defocus.n_distances = 41;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.defocus.validate()?;
        self.strategy.validate()?;
        self.mhpr.validate()?;
        if !(self.focus_bracket_um.is_finite() && self.focus_bracket_um > 0.0) {
            return Err(Error::spec("focus_bracket_um", "must be positive"));
        }
        if self.target_mode == TargetMode::Mhpr && self.mhpr_heights == 0 {
            return Err(Error::spec("mhpr_heights", "must be at least 1"));
        }
        if self.split[0] == 0 || self.split[1] == 0 {
            return Err(Error::spec("split", "both parts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// Relative to the dataset directory.
    pub file: String,
    pub source_id: usize,
    pub dz_um: f64,
    pub rotation_deg: u16,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_id: usize,
    pub z_star_um: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSource {
    pub source_id: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u16,
    pub config: DatasetConfig,
    /// Sources offered, including skipped ones.
    pub source_count: usize,
    /// Emitted sources times rotations.
    pub regions: usize,
    pub split_ratio: [usize; 2],
    pub sources: Vec<SourceRecord>,
    pub skipped: Vec<SkippedSource>,
    pub pairs: Vec<PairRecord>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::corrupt(path, e.to_string()))
    }

    pub fn count(&self, split: Split) -> usize {
        self.pairs.iter().filter(|p| p.split == split).count()
    }

    pub fn source_ids(&self, split: Split) -> Vec<usize> {
        self.sources
            .iter()
            .filter(|s| s.split == split)
            .map(|s| s.source_id)
            .collect()
    }

    /// Sources that contribute pairs to both splits.
    pub fn leaked_sources(&self) -> Vec<usize> {
        let mut seen: std::collections::BTreeMap<usize, Split> = Default::default();
        let mut leaked = std::collections::BTreeSet::new();
        for p in &self.pairs {
            if let Some(s) = seen.insert(p.source_id, p.split) {
                if s != p.split {
                    leaked.insert(p.source_id);
                }
            }
        }
        leaked.into_iter().collect()
    }

    /// Listed pair files missing from `dir`, and `.hidp` files in `dir` the manifest does not list.
    pub fn reconcile(&self, dir: &Path) -> Result<(Vec<String>, Vec<String>)> {
        let listed: std::collections::BTreeSet<&str> = self.pairs.iter().map(|p| p.file.as_str()).collect();
        let pair_dir = dir.join(PAIR_DIR);
        let mut on_disk = std::collections::BTreeSet::new();
        if pair_dir.is_dir() {
            for entry in std::fs::read_dir(&pair_dir).map_err(|e| Error::io(&pair_dir, e))? {
                let entry = entry.map_err(|e| Error::io(&pair_dir, e))?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if name.ends_with(".hidp") {
                    on_disk.insert(format!("{PAIR_DIR}/{name}"));
                }
            }
        }
        let missing = listed.iter().filter(|f| !on_disk.contains(**f)).map(|f| f.to_string()).collect();
        let extra = on_disk.iter().filter(|f| !listed.contains(f.as_str())).cloned().collect();
        Ok((missing, extra))
    }
}

/// `count` scenes from one template, each realized on its own sub-stream of `seed`.
pub fn generate_scenes(template: &SceneSpec, count: usize, seed: u64) -> Result<Vec<Scene>> {
    let root = Rng::new(seed);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut spec = template.clone();
            spec.seed = seed;
            generate_scene(&spec, &mut root.fork(i as u64))
        })
        .collect()
}

/// Number of validation sources for `n` sources at ratio `train:val`.
pub fn validation_count(n: usize, split: [usize; 2]) -> usize {
    let total = split[0] + split[1];
    ((n * split[1]) as f64 / total as f64).round() as usize
}

pub fn pair_file_name(source: usize, distance: usize, rotation: u8) -> String {
    format!("{PAIR_DIR}/src{source:04}_dz{distance:03}_rot{:03}.hidp", rotation as u16 * 90)
}

struct SourceOutput {
    z_star: f64,
    dz: Vec<f64>,
}

fn build_source(
    id: usize,
    scene: &Scene,
    config: &DatasetConfig,
    shared: Option<&[f64]>,
    out_dir: &Path,
) -> Result<SourceOutput> {
    let g = &config.geometry;
    let holo = render_hologram(scene, g)?;
    let spectrum = AngularSpectrum::from_hologram(&holo)?;
    let focus = autofocus_spectrum(
        &spectrum,
        g.z2_um - config.focus_bracket_um,
        g.z2_um + config.focus_bracket_um,
        config.criterion,
        config.strategy,
    )?;
    let z_star = focus.z_hat;
    let target = match config.target_mode {
        TargetMode::GroundTruth => scene.object_field(),
        TargetMode::Mhpr => {
            let stack_geometry = g.clone().with_height_series(config.mhpr_heights, config.mhpr_spacing_um)?;
            let stack = render_stack(scene, &stack_geometry)?;
            // only the spacing is known; the absolute distance comes from autofocus
            let heights = stack.heights().iter().map(|h| h - g.z2_um + z_star).collect();
            mhpr(&stack.with_heights(heights)?, &config.mhpr)?.field
        }
    };
    let dz = match shared {
        Some(d) => d.to_vec(),
        None => config.defocus.draw(&mut Rng::new(config.defocus.seed).fork(id as u64)),
    };
    let targets: Vec<ComplexField> = (0..ROTATIONS).map(|r| target.rotate_quarter_turns(r)).collect();
    for (j, &d) in dz.iter().enumerate() {
        let input = spectrum.at(-(z_star + d))?;
        for r in 0..ROTATIONS {
            let pair = TrainingPair {
                input: input.rotate_quarter_turns(r),
                target: targets[r as usize].clone(),
                dz_um: d,
                rotation: r,
                source_id: Some(id),
            };
            write_pair(&pair, &out_dir.join(pair_file_name(id, j, r)))?;
        }
    }
    Ok(SourceOutput { z_star, dz })
}

/// Generates pair files under `out_dir/pairs` and writes `out_dir/manifest.json`.
///
/// Sources are processed in parallel; the manifest is assembled in source
/// order. A source whose focus criterion is flat is skipped with a warning
/// and listed in the manifest. The split shuffles emitted sources and sends
/// the rounded validation share to validation.
pub fn build_dataset(scenes: &[Scene], config: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(Error::spec("scenes", "at least one scene is required"));
    }
    let pair_dir = out_dir.join(PAIR_DIR);
    std::fs::create_dir_all(&pair_dir).map_err(|e| Error::io(&pair_dir, e))?;
    let shared = config
        .share_distances
        .then(|| config.defocus.draw(&mut Rng::new(config.defocus.seed).fork(SHARED_DISTANCE_STREAM)));

    let outputs: Vec<Result<SourceOutput>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| build_source(i, scene, config, shared.as_deref(), out_dir))
        .collect();

    let mut emitted = Vec::new();
    let mut skipped = Vec::new();
    for (i, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => emitted.push((i, o)),
            Err(Error::NoContrast) => {
                warn!("source {i}: focus criterion is flat, skipped");
                skipped.push(SkippedSource {
                    source_id: i,
                    reason: Error::NoContrast.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let mut order: Vec<usize> = emitted.iter().map(|(i, _)| *i).collect();
    Rng::new(config.defocus.seed).fork(SPLIT_STREAM).shuffle(&mut order);
    let n_val = validation_count(order.len(), config.split);
    let validation: std::collections::BTreeSet<usize> = order[..n_val].iter().copied().collect();
    let split_of = |i: usize| if validation.contains(&i) { Split::Validation } else { Split::Train };

    let mut sources = Vec::with_capacity(emitted.len());
    let mut pairs = Vec::new();
    for (i, o) in &emitted {
        let split = split_of(*i);
        sources.push(SourceRecord {
            source_id: *i,
            z_star_um: o.z_star,
            split,
        });
        for (j, &d) in o.dz.iter().enumerate() {
            for r in 0..ROTATIONS {
                pairs.push(PairRecord {
                    file: pair_file_name(*i, j, r),
                    source_id: *i,
                    dz_um: d,
                    rotation_deg: r as u16 * 90,
                    split,
                });
            }
        }
    }
    let manifest = DatasetManifest {
        format: "HIDP".into(),
        version: PAIR_VERSION,
        config: config.clone(),
        source_count: scenes.len(),
        regions: emitted.len() * ROTATIONS as usize,
        split_ratio: config.split,
        sources,
        skipped,
        pairs,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reads every pair listed for one split, attaching source ids.
pub fn load_split(dir: &Path, split: Split) -> Result<Vec<TrainingPair>> {
    let manifest = DatasetManifest::load(&dir.join(MANIFEST_FILE))?;
    let optics = manifest.config.geometry.optics();
    manifest
        .pairs
        .iter()
        .filter(|p| p.split == split)
        .map(|p| {
            let mut pair = read_pair(&dir.join(&p.file), optics)?;
            pair.source_id = Some(p.source_id);
            Ok(pair)
        })
        .collect()
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
