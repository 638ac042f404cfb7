use holowave::cauchy::CurveHandle;
use holowave::grid::{make_grid, Field, Keep};
use num_complex::Complex64;
use proptest::prelude::*;

fn cexp(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

fn samples(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

fn curve_offset() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (1e-3f64..0.05, 0.5f64..2.0, -1.0f64..1.0, 0.3f64..1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval(v in samples(64)) {
        let g = make_grid(64, 3.0, 1.0 / 3.0).unwrap();
        let f = Field::from_samples(&g, v).unwrap();
        let energy: f64 = f.samples().iter().map(|z| z.norm_sqr()).sum();
        let spectral: f64 = f.modes().iter().map(|z| z.norm_sqr()).sum::<f64>() / 64.0;
        prop_assert!((energy - spectral).abs() <= 1e-12 * energy.max(1.0));
    }

    #[test]
    fn dealias_is_a_projector(v in samples(64)) {
        let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
        let f = Field::from_samples(&g, v).unwrap();
        let once = f.dealias();
        prop_assert!((&once.dealias() - &once).linf() <= 1e-12);
        let lo = f.freq_cutoff(5.0, Keep::Low);
        let hi = f.freq_cutoff(5.0, Keep::High);
        prop_assert!((&(&lo + &hi) - &f).linf() <= 1e-12);
        prop_assert!((&lo.freq_cutoff(5.0, Keep::Low) - &lo).linf() <= 1e-12);
    }

    #[test]
    fn flat_hilbert_squares_to_identity_off_mean_and_nyquist(v in samples(64)) {
        let g = make_grid(64, 2.0, 0.0).unwrap();
        let f = Field::from_samples(&g, v).unwrap();
        let mut modes = f.modes();
        modes[0] = Complex64::new(0.0, 0.0);
        modes[32] = Complex64::new(0.0, 0.0);
        let f = Field::from_modes(&g, modes);
        prop_assert!((&f.flat_hilbert().flat_hilbert() - &f).linf() <= 1e-12);
    }

    #[test]
    fn derivative_commutes_with_flat_hilbert(v in samples(32)) {
        let g = make_grid(32, 1.5, 0.0).unwrap();
        let f = Field::from_samples(&g, v).unwrap();
        let a = f.deriv(1).flat_hilbert();
        let b = f.flat_hilbert().deriv(1);
        prop_assert!((&a - &b).linf() <= 1e-10 * f.deriv(1).linf().max(1.0));
    }

    #[test]
    fn resample_round_trip_keeps_resolved_modes(amp in 0.1f64..2.0, m in 1i32..10) {
        let g = make_grid(64, 2.0, 1.0 / 3.0).unwrap();
        let fine = make_grid(128, 2.0, 1.0 / 3.0).unwrap();
        let f = Field::from_fn(&g, |a| amp * cexp(m as f64 * a / 2.0));
        let back = f.resample(&fine).resample(&g);
        prop_assert!((&back - &f).linf() <= 1e-12 * amp);
    }

    #[test]
    fn curve_hilbert_is_an_involution_on_small_curves((eps, k, shift, width) in curve_offset()) {
        let g = make_grid(256, 2.0, 1.0 / 3.0).unwrap();
        let x = Field::from_fn(&g, |a| {
            Complex64::new(0.0, eps) * (-((a - shift) / width).powi(2)).exp() * cexp(k * a)
        }).freq_cutoff(0.0, Keep::High);
        let c = CurveHandle::new(&x).unwrap();
        let f = c.hilbert(&Field::from_real_fn(&g, |a| (-(a * a)).exp()));
        let back = c.hilbert(&c.hilbert(&f));
        prop_assert!((&back - &f).l2() / f.l2() < 1e-6);
    }

    #[test]
    fn curve_projectors_are_idempotent(eps in 1e-3f64..0.05) {
        let g = make_grid(128, 2.0, 1.0 / 3.0).unwrap();
        let x = Field::from_fn(&g, |a| eps * (-(a * a) / 2.0).exp() * cexp(1.5 * a) + eps * 0.3 * cexp(0.5 * a));
        let c = CurveHandle::new(&x).unwrap();
        let f = Field::from_fn(&g, |a| Complex64::new(a.sin(), (-(a * a)).exp()));
        let p = c.holomorphic_part(&f);
        let pp = c.holomorphic_part(&p);
        prop_assert!((&pp - &p).linf() <= 1e-12 * f.linf());
    }
}

#[test]
fn flat_curve_reduces_to_flat_transform() {
    let g = make_grid(64, 1.0, 0.0).unwrap();
    let c = CurveHandle::new(&Field::zeros(&g)).unwrap();
    let f = Field::from_real_fn(&g, |a| a.sin() + 0.5 * (3.0 * a).cos());
    assert!((&c.hilbert(&f) - &f.flat_hilbert()).linf() < 1e-13);
}

#[test]
fn flat_hilbert_of_plane_waves() {
    let g = make_grid(64, 2.0, 0.0).unwrap();
    for m in 1..10 {
        let k = m as f64 / 2.0;
        let plus = Field::from_fn(&g, |a| cexp(k * a));
        let minus = Field::from_fn(&g, |a| cexp(-k * a));
        assert!((&plus.flat_hilbert() + &plus).linf() < 1e-13);
        assert!((&minus.flat_hilbert() - &minus).linf() < 1e-13);
    }
}
