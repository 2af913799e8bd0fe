//! Distribution checks for the scene generator and the defocus sampler.
//! p-values come from the small reference implementations below.

use holofocus::dataset::Distribution;
use holofocus::prelude::*;
use holofocus::simulator::SceneContent;

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let t = x + 7.5;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        let (mut term, mut sum, mut n) = (1.0 / a, 1.0 / a, a);
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Lentz continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }
}

fn chi_square_p(stat: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Asymptotic Kolmogorov distribution tail with the usual small-sample correction.
fn ks_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (-2.0 * k * k * lambda * lambda).exp();
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn oracles_match_tabulated_values() {
    // chi-square 95th percentiles
    assert!((chi_square_p(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
    assert!((chi_square_p(16.918_977_604_620_45, 9) - 0.05).abs() < 1e-9);
    assert!((chi_square_p(21.665_994_333_461_924, 9) - 0.01).abs() < 1e-9);
    // Kolmogorov: P(K > 1.358) ~ 0.05
    assert!((ks_p(1.358 / (1000f64.sqrt() + 0.12 + 0.11 / 1000f64.sqrt()), 1000) - 0.05).abs() < 1e-3);
}

#[test]
fn particle_depths_uniform_over_range() {
    let mut spec = SceneSpec::particles(20, 0).with_fov(8);
    if let SceneContent::Particles { depth_um, .. } = &mut spec.content {
        *depth_um = [-45.0, 45.0];
    }
    let root = Rng::new(2024);
    let bins = 10;
    let mut hist = vec![0usize; bins];
    for i in 0..1000 {
        let scene = generate_scene(&spec, &mut root.fork(i)).unwrap();
        assert_eq!(scene.particles.len(), 20);
        for p in &scene.particles {
            assert!((-45.0..=45.0).contains(&p.depth_um), "{}", p.depth_um);
            let b = (((p.depth_um + 45.0) / 90.0) * bins as f64).floor() as usize;
            hist[b.min(bins - 1)] += 1;
        }
    }
    let expected = 20_000.0 / bins as f64;
    let stat: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = chi_square_p(stat, bins - 1);
    assert!(p > 0.01, "chi2 {stat} p {p} hist {hist:?}");
}

#[test]
fn random_defocus_uniform_over_range() {
    for seed in [1u64, 77] {
        let spec = DefocusSpec::new(-100.0, 100.0, 2000, Distribution::UniformRandom, seed).unwrap();
        let dz = spec.draw(&mut Rng::new(seed));
        assert_eq!(dz.len(), 2000);
        assert!(dz.iter().all(|d| (-100.0..=100.0).contains(d)));
        let d = ks_uniform(dz, -100.0, 100.0);
        let p = ks_p(d, 2000);
        assert!(p > 0.01, "seed {seed}: D {d} p {p}");
    }
}

#[test]
fn grid_defocus_is_evenly_spaced() {
    let dz = DefocusSpec::new(-100.0, 100.0, 41, Distribution::UniformGrid, 0)
        .unwrap()
        .draw(&mut Rng::new(0));
    assert_eq!(dz.len(), 41);
    for (i, d) in dz.iter().enumerate() {
        assert!((d - (-100.0 + 5.0 * i as f64)).abs() < 1e-9);
    }
}
