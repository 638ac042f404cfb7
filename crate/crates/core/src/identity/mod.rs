//! Closed-form identities behind the localization argument, certified by
//! quadrature on the line: the oscillatory bilinear integrals, the flat
//! Hilbert transform of `e^{∓iξ}`, and the transition-of-derivatives
//! algebra for the vector fields `L₀ = ½t∂_t + α∂_α`, `Ω₀ = α∂_t + ½ti`.

pub mod quad;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use quad::{pv_quad, PvQuadConfig, PvResult};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// `ℍf(ξ) = (1/πi) p.v.∫ f(η)/(ξ − η) dη`.
pub fn flat_hilbert_at<F: Fn(f64) -> Complex64>(f: F, xi: f64, cfg: &PvQuadConfig) -> Result<PvResult> {
    let r = pv_quad(|eta| f(eta) / (xi - eta), xi, cfg)?;
    Ok(PvResult {
        value: r.value / (PI * I),
        error: r.error / PI,
    })
}

/// One certified identity value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub computed: Complex64,
    pub expected: Complex64,
    pub abs_err: f64,
    /// Quadrature error estimate of `computed`.
    pub estimate: f64,
}

/// `ℍe^{−iξ}` (`sign = −1`) or `ℍe^{iξ}` (`sign = +1`) against `∓e^{±iξ}`.
pub fn check_hilbert_exp(xi: f64, sign: f64, cfg: &PvQuadConfig) -> Result<IdentityCheck> {
    let r = flat_hilbert_at(|eta| cis(sign * eta), xi, cfg)?;
    let expected = cis(sign * xi) * (-sign);
    Ok(IdentityCheck {
        computed: r.value,
        expected,
        abs_err: (r.value - expected).norm(),
        estimate: r.error,
    })
}

fn phases(alpha: f64, t: f64) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::Input("alpha must be nonzero".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Input("t must be positive".into()));
    }
    Ok(t * t / (4.0 * alpha))
}

/// `(1/πi)∫((e^{−it²/4α} − e^{−it²/4β})/(α − β))² e^{it²/4β} dβ` against
/// `it²/(2α²)e^{−it²/4α}`, evaluated in `η = t²/4β`.
pub fn check_decouple_main(alpha: f64, t: f64, cfg: &PvQuadConfig) -> Result<IdentityCheck> {
    let xi = phases(alpha, t)?;
    let e_xi = cis(-xi);
    let integrand = |eta: f64| {
        let d = (e_xi - cis(-eta)) / (xi - eta);
        d * d * cis(eta)
    };
    let r = pv_quad(integrand, xi, cfg)?;
    // dβ/(α − β)² = (4ξ²/t²) dη/(ξ − η)², orientation included
    let jac = 4.0 * xi * xi / (t * t);
    let computed = r.value * jac / (PI * I);
    let expected = I * (t * t / (2.0 * alpha * alpha)) * e_xi;
    Ok(IdentityCheck {
        computed,
        expected,
        abs_err: (computed - expected).norm(),
        estimate: r.error * jac / PI,
    })
}

/// `(1/πi)∫(e^{−it²/4α} − e^{−it²/4β})(e^{it²/4α} − e^{it²/4β})/(α − β)²
/// · e^{−it²/4β} dβ`, expected to vanish.
pub fn check_decouple2_zero(alpha: f64, t: f64, cfg: &PvQuadConfig) -> Result<IdentityCheck> {
    let xi = phases(alpha, t)?;
    let integrand = |eta: f64| {
        let d = xi - eta;
        (cis(-xi) - cis(-eta)) * (cis(xi) - cis(eta)) / (d * d) * cis(-eta)
    };
    let r = pv_quad(integrand, xi, cfg)?;
    let jac = 4.0 * xi * xi / (t * t);
    let computed = r.value * jac / (PI * I);
    Ok(IdentityCheck {
        computed,
        expected: Complex64::new(0.0, 0.0),
        abs_err: computed.norm(),
        estimate: r.error * jac / PI,
    })
}

/// The main decouple integral taken directly in `β`, cutting out
/// `|β| < cut` where the phase `t²/4β` degenerates. A loose cross-check.
pub fn decouple_main_in_beta(alpha: f64, t: f64, cut: f64, cfg: &PvQuadConfig) -> Result<Complex64> {
    let xi = phases(alpha, t)?;
    let e_xi = cis(-xi);
    let c = t * t / 4.0;
    let integrand = |beta: f64| {
        if beta.abs() < cut {
            return Complex64::new(0.0, 0.0);
        }
        let d = (e_xi - cis(-c / beta)) / (alpha - beta);
        d * d * cis(c / beta)
    };
    let cfg = PvQuadConfig {
        period: cfg.period.max(alpha.abs()),
        radius: cfg.radius.max(4.0 * alpha.abs()),
        ..*cfg
    };
    let r = pv_quad(integrand, alpha, &cfg)?;
    Ok(r.value / (PI * I))
}

/// A function `f(α, t) = e^{−it²/4α}g(α)h(t)` with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `g = 1`, `h = 1`.
    PurePhase,
    /// `g = c·exp(−(α − m)²/(2s²))`, `h = t^q`.
    GaussianPhase { c_re: f64, c_im: f64, m: f64, s: f64, q: f64 },
    /// `g = c/(1 + pα²)`, `h = t^q`.
    RationalPhase { c_re: f64, c_im: f64, p: f64, q: f64 },
}

impl TestFunction {
    /// `(f, ∂_tf, ∂_αf)`.
    pub fn eval(&self, alpha: f64, t: f64) -> (Complex64, Complex64, Complex64) {
        let phase = -t * t / (4.0 * alpha);
        let phase_t = -t / (2.0 * alpha);
        let phase_a = t * t / (4.0 * alpha * alpha);
        let (g, g_log_a, h_log_t) = match *self {
            TestFunction::PurePhase => (Complex64::new(1.0, 0.0), 0.0, 0.0),
            TestFunction::GaussianPhase { c_re, c_im, m, s, q } => {
                let x = alpha - m;
                let g = Complex64::new(c_re, c_im) * (-(x * x) / (2.0 * s * s)).exp() * t.powf(q);
                (g, -x / (s * s), q / t)
            }
            TestFunction::RationalPhase { c_re, c_im, p, q } => {
                let den = 1.0 + p * alpha * alpha;
                let g = Complex64::new(c_re, c_im) / den * t.powf(q);
                (g, -2.0 * p * alpha / den, q / t)
            }
        };
        let f = g * cis(phase);
        let f_t = f * (I * phase_t + h_log_t);
        let f_a = f * (I * phase_a + g_log_a);
        (f, f_t, f_a)
    }
}

/// `L₀f = ½t∂_tf + α∂_αf`.
pub fn l0(alpha: f64, t: f64, f_t: Complex64, f_a: Complex64) -> Complex64 {
    0.5 * t * f_t + alpha * f_a
}

/// `Ω₀f = α∂_tf + ½tif`.
pub fn omega0(alpha: f64, t: f64, f: Complex64, f_t: Complex64) -> Complex64 {
    alpha * f_t + 0.5 * t * I * f
}

/// Largest scaled residual of the four transition identities
///
/// ```text
/// f   = −(2α/it)∂_tf + (2/it)Ω₀f
/// ∂_tf = −(it/2α)f + (1/α)Ω₀f
/// f   = −(4α/it²)L₀f + (2/it)Ω₀f + (4α²/it²)∂_αf
/// ∂_αf = (it²/4α²)f + (1/α)L₀f − (t/2α²)Ω₀f
/// ```
///
/// each divided by the sum of the moduli of its terms.
pub fn check_transition(alpha: f64, t: f64, testfn: &TestFunction) -> Result<f64> {
    phases(alpha, t)?;
    let (f, f_t, f_a) = testfn.eval(alpha, t);
    let l = l0(alpha, t, f_t, f_a);
    let o = omega0(alpha, t, f, f_t);
    let it = I * t;
    let it2 = I * t * t;
    let scaled = |lhs: Complex64, terms: &[Complex64]| {
        let rhs: Complex64 = terms.iter().sum();
        let size = lhs.norm() + terms.iter().map(|z| z.norm()).sum::<f64>();
        if size == 0.0 {
            0.0
        } else {
            (lhs - rhs).norm() / size
        }
    };
    let r1 = scaled(f, &[-(2.0 * alpha / it) * f_t, (2.0 / it) * o]);
    let r2 = scaled(f_t, &[-(it / (2.0 * alpha)) * f, o / alpha]);
    let r3 = scaled(
        f,
        &[-(4.0 * alpha / it2) * l, (2.0 / it) * o, (4.0 * alpha * alpha / it2) * f_a],
    );
    let r4 = scaled(
        f_a,
        &[it2 / (4.0 * alpha * alpha) * f, l / alpha, -(t / (2.0 * alpha * alpha)) * o],
    );
    Ok(r1.max(r2).max(r3).max(r4))
}

/// A seeded random member of the closed-form families together with a
/// random evaluation point.
pub fn random_sample(rng: &mut ChaCha8Rng) -> (TestFunction, f64, f64) {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let alpha = sign * rng.random_range(0.5..20.0);
    let t = rng.random_range(0.5..10.0);
    let c_re = rng.random_range(-2.0..2.0);
    let c_im = rng.random_range(-2.0..2.0);
    let q = rng.random_range(-1.0..2.0);
    let f = if rng.random::<bool>() {
        TestFunction::GaussianPhase {
            c_re,
            c_im,
            m: alpha + rng.random_range(-3.0..3.0),
            s: rng.random_range(1.0..10.0),
            q,
        }
    } else {
        TestFunction::RationalPhase {
            c_re,
            c_im,
            p: rng.random_range(0.0..2.0),
            q,
        }
    };
    (f, alpha, t)
}

/// Maximum transition residual over `count` seeded random samples.
pub fn randomized_transition(seed: u64, count: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (f, a, t) = random_sample(&mut rng);
        worst = worst.max(check_transition(a, t, &f)?);
    }
    Ok(worst)
}

/// One row of the certification table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub identity: String,
    pub alpha: f64,
    pub t: f64,
    pub computed_re: f64,
    pub computed_im: f64,
    pub expected_re: f64,
    pub expected_im: f64,
    pub abs_err: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CertRow {
    fn new(identity: &str, alpha: f64, t: f64, c: &IdentityCheck, threshold: f64) -> CertRow {
        CertRow {
            identity: identity.to_string(),
            alpha,
            t,
            computed_re: c.computed.re,
            computed_im: c.computed.im,
            expected_re: c.expected.re,
            expected_im: c.expected.im,
            abs_err: c.abs_err,
            threshold,
            pass: c.abs_err < threshold,
        }
    }
}

/// Thresholds of the certification sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertThresholds {
    pub decouple: f64,
    pub hilbert: f64,
    pub transition: f64,
}

impl Default for CertThresholds {
    fn default() -> Self {
        CertThresholds {
            decouple: 1e-6,
            hilbert: 1e-8,
            transition: 1e-11,
        }
    }
}

/// The default `(α, t)` grid: `α ∈ ±{2, 5, 10, 20}`, `t ∈ {1, 2, 5}`.
pub fn default_grid() -> (Vec<f64>, Vec<f64>) {
    let base = [2.0, 5.0, 10.0, 20.0];
    let alphas = base.iter().flat_map(|&a| [-a, a]).collect();
    (alphas, vec![1.0, 2.0, 5.0])
}

/// Runs every identity on the `(α, t)` grid. Quadrature failures become
/// failing rows with infinite error.
pub fn certify(alphas: &[f64], ts: &[f64], cfg: &PvQuadConfig, thr: &CertThresholds) -> Result<Vec<CertRow>> {
    cfg.validate()?;
    let failed = |name: &str, a: f64, t: f64, threshold: f64| CertRow {
        identity: name.to_string(),
        alpha: a,
        t,
        computed_re: f64::NAN,
        computed_im: f64::NAN,
        expected_re: f64::NAN,
        expected_im: f64::NAN,
        abs_err: f64::INFINITY,
        threshold,
        pass: false,
    };
    let mut rows = Vec::new();
    for &a in alphas {
        for &t in ts {
            phases(a, t)?;
            match check_decouple_main(a, t, cfg) {
                Ok(c) => rows.push(CertRow::new("decouple_main", a, t, &c, thr.decouple)),
                Err(Error::Quadrature(_)) => rows.push(failed("decouple_main", a, t, thr.decouple)),
                Err(e) => return Err(e),
            }
            match check_decouple2_zero(a, t, cfg) {
                Ok(c) => rows.push(CertRow::new("decouple2_zero", a, t, &c, thr.decouple)),
                Err(Error::Quadrature(_)) => rows.push(failed("decouple2_zero", a, t, thr.decouple)),
                Err(e) => return Err(e),
            }
            let r = check_transition(a, t, &TestFunction::PurePhase)?;
            let zero = Complex64::new(0.0, 0.0);
            let c = IdentityCheck {
                computed: Complex64::new(r, 0.0),
                expected: zero,
                abs_err: r,
                estimate: 0.0,
            };
            rows.push(CertRow::new("transition_pure_phase", a, t, &c, thr.transition));
        }
    }
    for xi in [0.5, 1.0, 3.0] {
        for (name, sign) in [("hilbert_exp_minus", -1.0), ("hilbert_exp_plus", 1.0)] {
            match check_hilbert_exp(xi, sign, cfg) {
                Ok(c) => rows.push(CertRow::new(name, xi, 0.0, &c, thr.hilbert)),
                Err(Error::Quadrature(_)) => rows.push(failed(name, xi, 0.0, thr.hilbert)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

/// Writes the certification table as CSV.
pub fn write_certification<W: Write>(out: W, rows: &[CertRow]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "identity", "alpha", "t", "computed_re", "computed_im", "expected_re", "expected_im", "abs_err", "threshold",
        "pass",
    ])?;
    for r in rows {
        w.write_record([
            r.identity.clone(),
            format!("{:?}", r.alpha),
            format!("{:?}", r.t),
            format!("{:?}", r.computed_re),
            format!("{:?}", r.computed_im),
            format!("{:?}", r.expected_re),
            format!("{:?}", r.expected_im),
            format!("{:?}", r.abs_err),
            format!("{:?}", r.threshold),
            if r.pass { "pass" } else { "fail" }.to_string(),
        ])?;
    }
    w.flush()
}
