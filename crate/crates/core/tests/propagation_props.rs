use holofocus::fft::{signed_index, Fft2};
use holofocus::prelude::*;
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 32;

fn optics() -> Optics {
    CaptureGeometry::default().optics()
}

/// Random field whose spectrum is confined to the inner half band.
fn field_from(samples: &[(f64, f64)]) -> ComplexField {
    let fft = Fft2::new(N, N);
    let mut buf: Vec<Complex64> = samples.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    fft.forward(&mut buf);
    for ky in 0..N {
        for kx in 0..N {
            if signed_index(kx, N).hypot(signed_index(ky, N)) > N as f64 / 4.0 {
                buf[ky * N + kx] = Complex64::new(0.0, 0.0);
            }
        }
    }
    fft.inverse(&mut buf);
    ComplexField::new(N, N, optics(), buf).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), N * N)
}

fn rel(a: &ComplexField, b: &ComplexField) -> f64 {
    a.relative_l2_error(b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip(s in samples(), z in 1.0f64..2000.0) {
        let f = field_from(&s);
        let back = propagate(&propagate(&f, z).unwrap(), -z).unwrap();
        prop_assert!(rel(&back, &f) < 1e-9);
    }

    #[test]
    fn semigroup(s in samples(), z1 in -800.0f64..800.0, z2 in -800.0f64..800.0) {
        let f = field_from(&s);
        let two = propagate(&propagate(&f, z1).unwrap(), z2).unwrap();
        prop_assert!(rel(&two, &propagate(&f, z1 + z2).unwrap()) < 1e-9);
    }

    #[test]
    fn linear(a in samples(), b in samples(), k in -3.0f64..3.0, z in -1500.0f64..1500.0) {
        let (fa, fb) = (field_from(&a), field_from(&b));
        let sum: Vec<Complex64> = fa.values().iter().zip(fb.values()).map(|(x, y)| x * k + y).collect();
        let lhs = propagate(&ComplexField::new(N, N, optics(), sum).unwrap(), z).unwrap();
        let (pa, pb) = (propagate(&fa, z).unwrap(), propagate(&fb, z).unwrap());
        let rhs: Vec<Complex64> = pa.values().iter().zip(pb.values()).map(|(x, y)| x * k + y).collect();
        let rhs = ComplexField::new(N, N, optics(), rhs).unwrap();
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn energy_preserved_on_propagating_band(s in samples(), z in -2000.0f64..2000.0) {
        let f = field_from(&s);
        let g = propagate(&f, z).unwrap();
        prop_assert!((g.norm_l2() - f.norm_l2()).abs() <= 1e-10 * f.norm_l2());
    }

    #[test]
    fn compose_decompose_round_trip(s in samples()) {
        let f = field_from(&s);
        let (a, p) = decompose(&f);
        prop_assert!(rel(&compose(&a, &p).unwrap(), &f) < 1e-12);
    }

    #[test]
    fn sharpness_scores_scale_invariant(v in prop::collection::vec(0.01f64..1.0, 64), k in 0.1f64..50.0) {
        let img = RealImage::new(8, 8, optics(), ImageKind::Amplitude, v.clone()).unwrap();
        let scaled = img.scaled(k).unwrap();
        prop_assert!((tamura(&img).unwrap() - tamura(&scaled).unwrap()).abs() < 1e-12);
        prop_assert!((gini(&img).unwrap() - gini(&scaled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_symmetric_with_fixed_range(a in prop::collection::vec(0.0f64..1.0, 64), b in prop::collection::vec(0.0f64..1.0, 64)) {
        let u1 = RealImage::new(8, 8, optics(), ImageKind::Amplitude, a).unwrap();
        let u2 = RealImage::new(8, 8, optics(), ImageKind::Amplitude, b).unwrap();
        let p = SsimParams::default().with_dynamic_range(1.0);
        let (x, y) = (ssim(&u1, &u2, &p).unwrap(), ssim(&u2, &u1, &p).unwrap());
        prop_assert!((x - y).abs() < 1e-14);
        prop_assert!(x <= 1.0 + 1e-12);
    }
}

#[test]
fn spectrum_reuse_matches_direct_propagation() {
    let s: Vec<(f64, f64)> = (0..N * N).map(|i| ((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    let f = field_from(&s);
    let spectrum = AngularSpectrum::new(&f);
    for z in [-300.0, 0.0, 950.0] {
        assert_eq!(spectrum.at(z).unwrap().values(), propagate(&f, z).unwrap().values());
    }
}
