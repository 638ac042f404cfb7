use holowave::identity::{
    check_decouple2_zero, check_decouple_main, check_hilbert_exp, check_transition,
    TestFunction,
};
use holowave::identity::quad::PvQuadConfig;
use num_complex::Complex64;

fn cfg() -> PvQuadConfig {
    PvQuadConfig::default()
}

#[test]
fn decouple_main_at_a_reference_point() {
    let c = check_decouple_main(10.0, 5.0, &cfg()).unwrap();
    let reference = Complex64::new(0.0, 0.125) * Complex64::from_polar(1.0, -0.625);
    assert!((c.computed - reference).norm() < 1e-6, "{}", c.computed);
}

#[test]
fn decouple_main_rescales_with_alpha() {
    // at fixed ξ = t²/4α the value is ξ·(2/α)·i·e^{−iξ}
    let a = check_decouple_main(4.0, 4.0, &cfg()).unwrap().computed;
    let b = check_decouple_main(16.0, 8.0, &cfg()).unwrap().computed;
    assert!((a / b - Complex64::new(4.0, 0.0)).norm() < 1e-6);
}

#[test]
fn decouple_main_across_phase_range() {
    for alpha in [1.0f64, 2.5, -5.0] {
        for xi in [1.0f64, 3.0, 10.0] {
            let t = (4.0 * alpha.abs() * xi).sqrt();
            let c = check_decouple_main(alpha, t, &cfg()).unwrap();
            assert!(c.abs_err < 1e-6, "α={alpha}, ξ={xi}: {}", c.abs_err);
        }
    }
}

#[test]
fn decouple2_vanishes() {
    for (alpha, t) in [(10.0, 5.0), (-7.0, 3.0), (5.0, 1e-3)] {
        let c = check_decouple2_zero(alpha, t, &cfg()).unwrap();
        assert!(c.computed.norm() < 1e-6, "({alpha}, {t}): {}", c.computed);
    }
}

#[test]
fn hilbert_of_exponentials() {
    for xi in [0.5, 1.0, 3.0, -2.0] {
        let minus = check_hilbert_exp(xi, -1.0, &cfg()).unwrap();
        let reference = Complex64::from_polar(1.0, -xi);
        assert!((minus.computed - reference).norm() < 1e-8, "ξ={xi}");
        let plus = check_hilbert_exp(xi, 1.0, &cfg()).unwrap();
        assert!((plus.computed + Complex64::from_polar(1.0, xi)).norm() < 1e-8, "ξ={xi}");
    }
}

#[test]
fn transition_holds_for_pure_phase() {
    for (alpha, t) in [(1.0, 0.5), (-3.0, 2.0), (20.0, 7.0)] {
        assert!(check_transition(alpha, t, &TestFunction::PurePhase).unwrap() < 1e-13);
    }
}

#[test]
fn transition_holds_for_self_similar_profile() {
    let f = TestFunction::RationalPhase { c_re: 1.0, c_im: 0.0, p: 0.0, q: -0.5 };
    let (v, _, _) = f.eval(3.0, 2.0);
    let reference = Complex64::from_polar(1.0, -4.0 / 12.0) / 2f64.sqrt();
    assert!((v - reference).norm() < 1e-15);
    assert!(check_transition(3.0, 2.0, &f).unwrap() < 1e-12);
}

#[test]
fn transition_rejects_bad_points() {
    assert!(check_transition(0.0, 1.0, &TestFunction::PurePhase).is_err());
    assert!(check_transition(1.0, 0.0, &TestFunction::PurePhase).is_err());
}
