use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autofocus::tamura_of_gradient;
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::CaptureGeometry;
use crate::phase_retrieval::{mhpr, MhprParams};
use crate::propagation::AngularSpectrum;
use crate::rng::Rng;
use crate::simulator::{generate_scene, render_at, render_stack, SceneSpec};

pub const CLASSICAL: &str = "classical";
pub const FIXED_COST: &str = "fixed_cost";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub fov: usize,
    /// Side of the square region scored around each particle.
    pub roi: usize,
    /// Axial range each particle is searched over.
    pub search_range_um: f64,
    /// Number of holograms and passes of the per-particle phase recovery.
    pub mhpr_heights: usize,
    pub mhpr_iterations: usize,
    /// Rounds over all configurations; each keeps its fastest run.
    pub repeats: usize,
    /// FFT round trips of the fixed-cost stand-in for network inference.
    pub fixed_cost_passes: usize,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            fov: 256,
            roi: 32,
            search_range_um: 200.0,
            mhpr_heights: 2,
            mhpr_iterations: 2,
            repeats: 5,
            fixed_cost_passes: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub m: usize,
    pub seconds: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStudy {
    pub rows: Vec<TimingRow>,
    /// n held fixed while m varies, and m held fixed while n varies.
    pub fixed_n: usize,
    pub fixed_m: usize,
    pub classical_slope_m: f64,
    pub classical_slope_n: f64,
    pub fixed_cost_slope_m: f64,
    pub fixed_cost_slope_n: f64,
}

impl TimingStudy {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut s = String::from("n,m,seconds,method\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.n, r.m, r.seconds, r.method));
        }
        f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct Workload {
    spectrum: AngularSpectrum,
    z2: f64,
    centres: Vec<(usize, usize)>,
    stacks: Vec<crate::phase_retrieval::HologramStack>,
    config: TimingConfig,
}

impl Workload {
    fn new(n: usize, config: &TimingConfig) -> Result<Self> {
        let geometry = CaptureGeometry::default();
        let spec = SceneSpec::particles(n, config.seed).with_fov(config.fov);
        let scene = generate_scene(&spec, &mut Rng::new(config.seed))?;
        let holo = render_at(&scene, geometry.z2_um)?;
        let spectrum = AngularSpectrum::from_hologram(&holo)?;
        let half = config.roi / 2;
        let centres: Vec<(usize, usize)> = scene
            .particles
            .iter()
            .map(|p| {
                let (x, y) = p.pixel_centre(spec.pixel_pitch_um);
                let clamp = |v: f64| (v.round().max(0.0) as usize).clamp(half, config.fov - half);
                (clamp(x), clamp(y))
            })
            .collect();
        // each particle's phase recovery runs on its own region of interest
        let roi_geometry = geometry.clone().with_height_series(config.mhpr_heights, 15.0)?;
        let stack = render_stack(&scene, &roi_geometry)?;
        let stacks = centres
            .iter()
            .map(|&(cx, cy)| {
                let crops = stack
                    .holograms()
                    .iter()
                    .map(|h| {
                        let f = crate::propagation::intensity_to_field(h)?;
                        Ok(f.crop(cx - half, cy - half, config.roi, config.roi)?.intensity())
                    })
                    .collect::<Result<Vec<_>>>()?;
                crate::phase_retrieval::HologramStack::new(crops, stack.heights().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spectrum,
            z2: geometry.z2_um,
            centres,
            stacks,
            config: config.clone(),
        })
    }

    /// Per particle: score `m` planes on its region, then recover its phase.
    fn classical(&self, m: usize) -> Result<f64> {
        let c = &self.config;
        let half = c.roi / 2;
        let params = MhprParams {
            iterations: c.mhpr_iterations,
            ..MhprParams::default()
        };
        let mut checksum = 0.0;
        for (&(cx, cy), stack) in self.centres.iter().zip(&self.stacks) {
            let mut best = (f64::NEG_INFINITY, self.z2);
            for k in 0..m {
                let z = self.z2 - 0.5 * c.search_range_um + c.search_range_um * k as f64 / m.max(2) as f64;
                let plane = self.spectrum.at(-z)?;
                let s = tamura_of_gradient(&plane.crop(cx - half, cy - half, c.roi, c.roi)?)?;
                if s > best.0 {
                    best = (s, z);
                }
            }
            checksum += best.1 + mhpr(stack, &params)?.field.norm_l2();
        }
        Ok(checksum)
    }
}

fn fixed_cost(fft: &Fft2, passes: usize, fov: usize) -> f64 {
    let mut buf = vec![num_complex::Complex64::new(1.0, 0.5); fov * fov];
    for _ in 0..passes {
        fft.forward(&mut buf);
        for v in buf.iter_mut() {
            *v = v.scale(0.5) + num_complex::Complex64::new(0.1, 0.0);
        }
        fft.inverse(&mut buf);
    }
    buf.iter().map(|v| v.re).sum()
}

fn best_of<F: FnMut() -> Result<f64>>(repeats: usize, mut f: F) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        std::hint::black_box(f()?);
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Wall-clock cost of the per-particle classical pipeline against the
/// number of particles `n` and focus planes `m`, next to a fixed-cost path.
///
/// The m-sweep holds n at the smallest entry of `n_list`, and the n-sweep
/// holds m at the smallest entry of `m_list`. Runs are sequential.
pub fn timing_study(n_list: &[usize], m_list: &[usize], config: &TimingConfig) -> Result<TimingStudy> {
    if n_list.is_empty() || m_list.is_empty() {
        return Err(Error::spec("n_list", "particle and plane lists must be non-empty"));
    }
    if n_list.contains(&0) || m_list.contains(&0) {
        return Err(Error::spec("n_list", "counts must be positive"));
    }
    if config.roi < 3 || config.roi > config.fov {
        return Err(Error::spec("roi", format!("must lie in [3, {}], got {}", config.fov, config.roi)));
    }
    let fixed_n = *n_list.iter().min().unwrap();
    let fixed_m = *m_list.iter().min().unwrap();
    let fft = Fft2::new(config.fov, config.fov);
    let base = Workload::new(fixed_n, config)?;
    let workloads = n_list
        .iter()
        .map(|&n| Workload::new(n, config))
        .collect::<Result<Vec<_>>>()?;
    // (n, m, workload) for the m-sweep, then the n-sweep
    let mut plan: Vec<(usize, usize, &Workload)> = m_list.iter().map(|&m| (fixed_n, m, &base)).collect();
    plan.extend(n_list.iter().zip(&workloads).map(|(&n, w)| (n, fixed_m, w)));

    // settle allocator and cache state before anything is timed
    for _ in 0..2 {
        std::hint::black_box(base.classical(*m_list.iter().max().unwrap())?);
        std::hint::black_box(fixed_cost(&fft, config.fixed_cost_passes, config.fov));
    }
    // round-robin over configurations so slow spells of the host hit them evenly
    let mut classical = vec![f64::INFINITY; plan.len()];
    let mut fixed = vec![f64::INFINITY; plan.len()];
    for _ in 0..config.repeats.max(1) {
        for (k, &(_, m, w)) in plan.iter().enumerate() {
            classical[k] = classical[k].min(best_of(1, || w.classical(m))?);
            fixed[k] = fixed[k].min(best_of(1, || Ok(fixed_cost(&fft, config.fixed_cost_passes, config.fov)))?);
        }
    }
    let mut rows = Vec::with_capacity(2 * plan.len());
    for (k, &(n, m, _)) in plan.iter().enumerate() {
        rows.push(TimingRow { n, m, seconds: classical[k], method: CLASSICAL.into() });
        rows.push(TimingRow { n, m, seconds: fixed[k], method: FIXED_COST.into() });
    }
    let nm = m_list.len();
    let (cm, cn) = (&classical[..nm], &classical[nm..]);
    let (fm, f_n) = (&fixed[..nm], &fixed[nm..]);
    let ms: Vec<f64> = m_list.iter().map(|&v| v as f64).collect();
    let ns: Vec<f64> = n_list.iter().map(|&v| v as f64).collect();
    Ok(TimingStudy {
        classical_slope_m: loglog_slope(&ms, cm),
        classical_slope_n: loglog_slope(&ns, cn),
        fixed_cost_slope_m: loglog_slope(&ms, fm),
        fixed_cost_slope_n: loglog_slope(&ns, f_n),
        rows,
        fixed_n,
        fixed_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&x, &[2.0; 4]).abs() < 1e-12);
    }

    #[test]
    fn small_study_runs() {
        let cfg = TimingConfig {
            fov: 64,
            roi: 16,
            repeats: 1,
            fixed_cost_passes: 1,
            ..TimingConfig::default()
        };
        let s = timing_study(&[1, 2], &[2, 3], &cfg).unwrap();
        assert_eq!(s.rows.len(), 8);
        assert_eq!((s.fixed_n, s.fixed_m), (1, 2));
        assert!(timing_study(&[], &[1], &cfg).is_err());
    }
}
