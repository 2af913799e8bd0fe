//! Synthetic samples and in-line hologram rendering.
//!
//! Two kinds of sample are generated: sparse particle fields (opaque to
//! semi-opaque discs scattered over one or more depth planes) and connected
//! textured objects (smooth random absorption and phase, single plane).
//! A hologram is rendered with the exact thin-plane forward model: a unit
//! plane wave is multiplied by each plane's transmission in turn, propagated
//! between planes and finally to the sensor, and recorded as `|U|^2`.
//!
//! A plane at depth offset `d` sits at distance `z2 + d` from the sensor.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};
use crate::field::{CaptureGeometry, ComplexField, ImageKind, Optics, RealImage};
use crate::phase_retrieval::HologramStack;
use crate::propagation::Propagator;
use crate::rng::Rng;

/// Largest allowed depth offset magnitude.
pub const MAX_DEPTH_OFFSET_UM: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SceneContent {
    Particles {
        count: usize,
        radius_um: [f64; 2],
        opacity: [f64; 2],
        /// Depth offsets around `z2`.
        depth_um: [f64; 2],
    },
    Texture {
        correlation_um: f64,
        /// Peak phase excursion in radians.
        phase_amplitude_rad: f64,
        absorption: [f64; 2],
    },
}

/// Declarative description of a synthetic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(flatten)]
    pub content: SceneContent,
    pub fov: usize,
    pub pixel_pitch_um: f64,
    pub wavelength_um: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Particle field with the default optics.
    pub fn particles(count: usize, seed: u64) -> Self {
        let g = CaptureGeometry::default();
        Self {
            content: SceneContent::Particles {
                count,
                radius_um: [2.0, 6.0],
                opacity: [0.6, 1.0],
                depth_um: [0.0, 0.0],
            },
            fov: 512,
            pixel_pitch_um: g.pixel_pitch_um,
            wavelength_um: g.wavelength_um,
            seed,
        }
    }

    /// Connected tissue-like texture with the default optics.
    pub fn texture(seed: u64) -> Self {
        let g = CaptureGeometry::default();
        Self {
            content: SceneContent::Texture {
                correlation_um: 1.5,
                phase_amplitude_rad: 0.8,
                absorption: [0.6, 1.0],
            },
            fov: 512,
            pixel_pitch_um: g.pixel_pitch_um,
            wavelength_um: g.wavelength_um,
            seed,
        }
    }

    pub fn with_fov(mut self, fov: usize) -> Self {
        self.fov = fov;
        self
    }

    pub fn optics(&self) -> Optics {
        Optics {
            pixel_pitch_um: self.pixel_pitch_um,
            wavelength_um: self.wavelength_um,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fov < 3 {
            return Err(Error::spec("fov", format!("must be at least 3 pixels, got {}", self.fov)));
        }
        if !(self.pixel_pitch_um.is_finite() && self.pixel_pitch_um > 0.0) {
            return Err(Error::spec("pixel_pitch_um", "must be positive"));
        }
        if !(self.wavelength_um.is_finite() && self.wavelength_um > 0.0) {
            return Err(Error::spec("wavelength_um", "must be positive"));
        }
        let range = |name: &str, r: [f64; 2], lo: f64, hi: f64| -> Result<()> {
            if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
                return Err(Error::spec(name, format!("need min <= max, got {r:?}")));
            }
            if r[0] < lo || r[1] > hi {
                return Err(Error::spec(name, format!("{r:?} outside [{lo}, {hi}]")));
            }
            Ok(())
        };
        match &self.content {
            SceneContent::Particles {
                radius_um,
                opacity,
                depth_um,
                ..
            } => {
                range("radius_um", *radius_um, f64::MIN_POSITIVE, f64::MAX)?;
                range("opacity", *opacity, 0.0, 1.0)?;
                range("depth_um", *depth_um, -MAX_DEPTH_OFFSET_UM, MAX_DEPTH_OFFSET_UM)?;
            }
            SceneContent::Texture {
                correlation_um,
                phase_amplitude_rad,
                absorption,
            } => {
                if !(correlation_um.is_finite() && *correlation_um > 0.0) {
                    return Err(Error::spec("correlation_um", "must be positive"));
                }
                if !(0.0..=1.0).contains(phase_amplitude_rad) {
                    return Err(Error::spec("phase_amplitude_rad", "must lie in [0, 1]"));
                }
                range("absorption", *absorption, f64::MIN_POSITIVE, 1.0)?;
            }
        }
        Ok(())
    }
}

/// One particle as placed in a scene. Positions are measured from the grid origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x_um: f64,
    pub y_um: f64,
    pub radius_um: f64,
    pub opacity: f64,
    pub depth_um: f64,
}

impl Particle {
    /// Centre in pixel coordinates (pixel `i` covers `[i, i+1)` times the pitch).
    pub fn pixel_centre(&self, pitch_um: f64) -> (f64, f64) {
        (self.x_um / pitch_um - 0.5, self.y_um / pitch_um - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePlane {
    pub depth_um: f64,
    pub transmission: ComplexField,
}

/// A realized sample: thin transmission planes at depth offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub planes: Vec<ScenePlane>,
    pub particles: Vec<Particle>,
    pub spec: SceneSpec,
}

impl Scene {
    pub fn optics(&self) -> Optics {
        self.spec.optics()
    }

    /// The all-in-focus object: the product of every plane's transmission.
    pub fn object_field(&self) -> ComplexField {
        let mut acc = self.planes[0].transmission.clone();
        for p in &self.planes[1..] {
            acc = acc
                .multiply(&p.transmission)
                .expect("scene planes share one grid");
        }
        acc
    }

    pub fn object_amplitude(&self) -> RealImage {
        self.object_field().amplitude()
    }
}

/// Realizes `spec` using `rng`.
pub fn generate_scene(spec: &SceneSpec, rng: &mut Rng) -> Result<Scene> {
    spec.validate()?;
    match &spec.content {
        SceneContent::Particles {
            count,
            radius_um,
            opacity,
            depth_um,
        } => {
            let fov_um = spec.fov as f64 * spec.pixel_pitch_um;
            let particles: Vec<Particle> = (0..*count)
                .map(|_| Particle {
                    x_um: rng.uniform() * fov_um,
                    y_um: rng.uniform() * fov_um,
                    radius_um: rng.uniform_in(radius_um[0], radius_um[1]),
                    opacity: rng.uniform_in(opacity[0], opacity[1]),
                    depth_um: rng.uniform_in(depth_um[0], depth_um[1]),
                })
                .collect();
            Ok(Scene {
                planes: particle_planes(spec, &particles)?,
                particles,
                spec: spec.clone(),
            })
        }
        SceneContent::Texture {
            correlation_um,
            phase_amplitude_rad,
            absorption,
        } => {
            let t = texture_plane(spec, *correlation_um, *phase_amplitude_rad, *absorption, rng)?;
            Ok(Scene {
                planes: vec![ScenePlane {
                    depth_um: 0.0,
                    transmission: t,
                }],
                particles: Vec::new(),
                spec: spec.clone(),
            })
        }
    }
}

/// Realizes `spec` with a generator seeded from `spec.seed`.
pub fn generate_scene_seeded(spec: &SceneSpec) -> Result<Scene> {
    generate_scene(spec, &mut Rng::new(spec.seed))
}

fn particle_planes(spec: &SceneSpec, particles: &[Particle]) -> Result<Vec<ScenePlane>> {
    let optics = spec.optics();
    let n = spec.fov;
    if particles.is_empty() {
        return Ok(vec![ScenePlane {
            depth_um: 0.0,
            transmission: ComplexField::filled(n, n, optics, Complex64::new(1.0, 0.0))?,
        }]);
    }
    // group by exact depth so co-planar particles share a plane
    let mut by_depth: BTreeMap<u64, Vec<&Particle>> = BTreeMap::new();
    for p in particles {
        by_depth.entry(p.depth_um.to_bits()).or_default().push(p);
    }
    let mut planes = Vec::with_capacity(by_depth.len());
    for (bits, group) in by_depth {
        let mut t = vec![1.0f64; n * n];
        for p in group {
            stamp_disc(&mut t, n, spec.pixel_pitch_um, p);
        }
        planes.push(ScenePlane {
            depth_um: f64::from_bits(bits),
            transmission: ComplexField::new(
                n,
                n,
                optics,
                t.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            )?,
        });
    }
    Ok(planes)
}

/// Multiplies an anti-aliased disc into `t`, wrapping periodically.
fn stamp_disc(t: &mut [f64], n: usize, pitch: f64, p: &Particle) {
    let (cx, cy) = p.pixel_centre(pitch);
    let r = p.radius_um / pitch;
    let reach = (r + 1.0).ceil() as i64;
    let (icx, icy) = (cx.round() as i64, cy.round() as i64);
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (px, py) = (icx + dx, icy + dy);
            let d = ((px as f64 - cx).powi(2) + (py as f64 - cy).powi(2)).sqrt();
            let coverage = (r - d + 0.5).clamp(0.0, 1.0);
            if coverage == 0.0 {
                continue;
            }
            let x = px.rem_euclid(n as i64) as usize;
            let y = py.rem_euclid(n as i64) as usize;
            t[y * n + x] *= 1.0 - p.opacity * coverage;
        }
    }
}

/// Gaussian low-pass filtered white noise, normalized to zero mean and unit std.
fn correlated_noise(n: usize, pitch: f64, correlation_um: f64, rng: &mut Rng) -> Vec<f64> {
    let fft = Fft2::new(n, n);
    let mut buf: Vec<Complex64> = (0..n * n).map(|_| Complex64::new(rng.normal(), 0.0)).collect();
    fft.forward(&mut buf);
    let df = 1.0 / (n as f64 * pitch);
    let s2 = 2.0 * PI * PI * correlation_um * correlation_um;
    for ky in 0..n {
        let fy = signed_index(ky, n) * df;
        for kx in 0..n {
            let fx = signed_index(kx, n) * df;
            buf[ky * n + kx] *= (-s2 * (fx * fx + fy * fy)).exp();
        }
    }
    fft.inverse(&mut buf);
    let re: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = re.iter().sum::<f64>() / re.len() as f64;
    let std = (re.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / re.len() as f64).sqrt();
    let std = if std > 0.0 { std } else { 1.0 };
    re.into_iter().map(|v| (v - mean) / std).collect()
}

fn texture_plane(
    spec: &SceneSpec,
    correlation_um: f64,
    phase_amplitude: f64,
    absorption: [f64; 2],
    rng: &mut Rng,
) -> Result<ComplexField> {
    let n = spec.fov;
    let phase_noise = correlated_noise(n, spec.pixel_pitch_um, correlation_um, rng);
    let own_noise = correlated_noise(n, spec.pixel_pitch_um, correlation_um, rng);
    let peak = phase_noise.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak = if peak > 0.0 { peak } else { 1.0 };
    // absorption shares half its variance with the phase map
    let mix = 0.75f64.sqrt();
    let values = phase_noise
        .iter()
        .zip(&own_noise)
        .map(|(&p, &q)| {
            let phi = phase_amplitude * p / peak;
            let u = 0.5 + 0.5 * (0.5 * p + mix * q).tanh();
            let a = absorption[0] + (absorption[1] - absorption[0]) * u;
            Complex64::from_polar(a, phi)
        })
        .collect();
    ComplexField::new(n, n, spec.optics(), values)
}

fn check_optics(scene: &Scene, geometry: &CaptureGeometry) -> Result<()> {
    geometry.validate()?;
    if scene.optics() != geometry.optics() {
        return Err(Error::InvalidGeometry(format!(
            "scene optics {:?} differ from capture optics {:?}",
            scene.optics(),
            geometry.optics()
        )));
    }
    Ok(())
}

/// Renders the hologram recorded at sample-to-sensor distance `z2_um`.
pub fn render_at(scene: &Scene, z2_um: f64) -> Result<RealImage> {
    let mut planes: Vec<&ScenePlane> = scene.planes.iter().collect();
    // farthest from the sensor first
    planes.sort_by(|a, b| b.depth_um.total_cmp(&a.depth_um));
    let distances: Vec<f64> = planes.iter().map(|p| z2_um + p.depth_um).collect();
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidGeometry(format!(
            "plane at distance {d} um lies behind the sensor"
        )));
    }
    let first = &planes[0].transmission;
    let propagator = Propagator::for_field(first);
    let mut field = first.clone();
    for i in 0..planes.len() {
        if i > 0 {
            field = field.multiply(&planes[i].transmission)?;
        }
        let next = distances.get(i + 1).copied().unwrap_or(0.0);
        let step = distances[i] - next;
        if step != 0.0 {
            field = propagator.propagate(&field, step)?;
        }
    }
    Ok(field.intensity())
}

/// Renders the single hologram at `geometry.z2_um`.
pub fn render_hologram(scene: &Scene, geometry: &CaptureGeometry) -> Result<RealImage> {
    check_optics(scene, geometry)?;
    render_at(scene, geometry.z2_um)
}

/// Renders one hologram per entry of `geometry.heights_um`.
pub fn render_stack(scene: &Scene, geometry: &CaptureGeometry) -> Result<HologramStack> {
    check_optics(scene, geometry)?;
    let heights = geometry
        .heights_um
        .clone()
        .ok_or_else(|| Error::InvalidGeometry("no heights given for a stack".into()))?;
    let holograms = heights
        .iter()
        .map(|&h| render_at(scene, h))
        .collect::<Result<Vec<_>>>()?;
    HologramStack::new(holograms, heights)
}

/// Adds zero-mean Gaussian noise of standard deviation `sigma`, clamping at zero.
pub fn add_sensor_noise(holo: &RealImage, sigma: f64, rng: &mut Rng) -> Result<RealImage> {
    let values = holo
        .values()
        .iter()
        .map(|v| (v + sigma * rng.normal()).max(0.0))
        .collect();
    RealImage::new(
        holo.width(),
        holo.height(),
        holo.optics(),
        ImageKind::Intensity,
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_particles(count: usize, seed: u64) -> SceneSpec {
        SceneSpec::particles(count, seed).with_fov(64)
    }

    #[test]
    fn empty_particle_scene_is_a_single_unit_plane() {
        let scene = generate_scene_seeded(&small_particles(0, 1)).unwrap();
        assert_eq!(scene.planes.len(), 1);
        assert!(scene.planes[0]
            .transmission
            .values()
            .iter()
            .all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn empty_scene_renders_uniform_intensity() {
        let scene = generate_scene_seeded(&small_particles(0, 1)).unwrap();
        let holo = render_hologram(&scene, &CaptureGeometry::default()).unwrap();
        assert!(holo.values().iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene_seeded(&small_particles(5, 9)).unwrap();
        let b = generate_scene_seeded(&small_particles(5, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate_scene_seeded(&small_particles(5, 10)).unwrap();
        assert_ne!(a, c);
        let t1 = generate_scene_seeded(&SceneSpec::texture(3).with_fov(32)).unwrap();
        let t2 = generate_scene_seeded(&SceneSpec::texture(3).with_fov(32)).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn particle_transmission_is_bounded() {
        let scene = generate_scene_seeded(&small_particles(12, 4)).unwrap();
        for p in &scene.planes {
            assert!(p.transmission.values().iter().all(|v| v.norm() <= 1.0 && v.im == 0.0));
        }
        // some pixels are darkened
        assert!(scene.object_amplitude().values().iter().any(|&a| a < 0.9));
    }

    #[test]
    fn texture_is_connected_and_bounded() {
        let scene = generate_scene_seeded(&SceneSpec::texture(5).with_fov(64)).unwrap();
        assert_eq!(scene.planes.len(), 1);
        assert_eq!(scene.planes[0].depth_um, 0.0);
        for v in scene.planes[0].transmission.values() {
            let a = v.norm();
            assert!(a > 0.0 && a <= 1.0);
            assert!(*v != Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn weak_phase_object_conserves_mean_intensity() {
        let mut spec = SceneSpec::texture(11).with_fov(64);
        spec.content = SceneContent::Texture {
            correlation_um: 1.5,
            phase_amplitude_rad: 0.1,
            absorption: [1.0, 1.0],
        };
        let scene = generate_scene_seeded(&spec).unwrap();
        let holo = render_hologram(&scene, &CaptureGeometry::default()).unwrap();
        assert!((holo.mean() - 1.0).abs() < 0.01);
    }

    #[test]
    fn stack_entries_equal_single_renders() {
        let scene = generate_scene_seeded(&small_particles(4, 2)).unwrap();
        let geometry = CaptureGeometry::default().with_height_series(8, 15.0).unwrap();
        let stack = render_stack(&scene, &geometry).unwrap();
        assert_eq!(stack.len(), 8);
        for (holo, &h) in stack.holograms().iter().zip(stack.heights()) {
            let single = CaptureGeometry {
                z2_um: h,
                ..CaptureGeometry::default()
            };
            assert_eq!(holo, &render_hologram(&scene, &single).unwrap());
        }
    }

    #[test]
    fn plane_order_does_not_matter() {
        let mut spec = small_particles(6, 21);
        spec.content = SceneContent::Particles {
            count: 6,
            radius_um: [3.0, 5.0],
            opacity: [0.7, 1.0],
            depth_um: [-40.0, 40.0],
        };
        let scene = generate_scene_seeded(&spec).unwrap();
        assert!(scene.planes.len() > 1);
        let mut shuffled = scene.clone();
        shuffled.planes.reverse();
        shuffled.planes.swap(0, 1);
        let g = CaptureGeometry::default();
        assert_eq!(render_hologram(&scene, &g).unwrap(), render_hologram(&shuffled, &g).unwrap());
    }

    #[test]
    fn mismatched_optics_rejected() {
        let scene = generate_scene_seeded(&small_particles(1, 1)).unwrap();
        let g = CaptureGeometry::new(0.6, 1.12, 1000.0).unwrap();
        assert!(matches!(render_hologram(&scene, &g), Err(Error::InvalidGeometry(_))));
        let no_heights = CaptureGeometry::default();
        assert!(render_stack(&scene, &no_heights).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = small_particles(3, 1);
        spec.content = SceneContent::Particles {
            count: 3,
            radius_um: [2.0, 4.0],
            opacity: [0.5, 1.0],
            depth_um: [-250.0, 0.0],
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec { field, .. }) if field == "depth_um"));
        let mut spec = SceneSpec::texture(1);
        spec.content = SceneContent::Texture {
            correlation_um: 2.0,
            phase_amplitude_rad: 1.5,
            absorption: [0.5, 1.0],
        };
        assert!(spec.validate().is_err());
        assert!(SceneSpec::texture(1).with_fov(2).validate().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = small_particles(20, 7);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"mode\":\"particles\""));
        let back: SceneSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn noise_is_seeded_and_nonnegative() {
        let holo = RealImage::filled(8, 8, CaptureGeometry::default().optics(), ImageKind::Intensity, 0.01)
            .unwrap();
        let a = add_sensor_noise(&holo, 0.05, &mut Rng::new(3)).unwrap();
        let b = add_sensor_noise(&holo, 0.05, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| *v >= 0.0));
    }
}
