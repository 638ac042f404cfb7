//! Adaptive Gauss–Kronrod quadrature and principal values on the line.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// 21-point Kronrod nodes on [0, 1] (positive half) with weights, and the
// weights of the embedded 10-point Gauss rule on the odd-indexed nodes.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452725,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One 21-point Gauss–Kronrod panel: `(value, |Kronrod − Gauss|)`.
pub fn gk21<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[10];
    let mut g = ZERO;
    for j in 0..10 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

/// Globally adaptive Gauss–Kronrod integration on `[a, b]`.
///
/// Returns the value and the summed panel error estimates.
pub fn integrate<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<(Complex64, f64)> {
    let (v, e) = gk21(f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= abs_tol {
            break;
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "{} panels on [{a}, {b}] left error {total_err:.3e} above {abs_tol:.3e}",
                panels.len()
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk21(f, lo, mid);
        let (v2, e2) = gk21(f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let value = panels.iter().map(|p| p.2).sum();
    let err = panels.iter().map(|p| p.3).sum();
    Ok((value, err))
}

/// Settings of [`pv_quad`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvQuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Largest excluded half-width around the singular point.
    pub window: f64,
    /// Number of window halvings fed to the extrapolation.
    pub window_levels: usize,
    /// Smallest truncation radius; a multiple of `period`.
    pub radius: f64,
    /// Number of radius doublings fed to the extrapolation.
    pub radius_levels: usize,
    /// Period of the integrand's oscillation in the distance from the
    /// singular point. Radii are rounded to multiples of it.
    pub period: f64,
    /// Cap on adaptive panels per segment.
    pub max_panels: usize,
}

impl Default for PvQuadConfig {
    fn default() -> Self {
        PvQuadConfig {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            window: 0.05,
            window_levels: 7,
            radius: 16.0 * std::f64::consts::PI,
            radius_levels: 6,
            period: 2.0 * std::f64::consts::PI,
            max_panels: 4000,
        }
    }
}

impl PvQuadConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.window > 0.0
            && self.window_levels >= 1
            && self.radius > self.window
            && self.radius_levels >= 1
            && self.period > 0.0
            && self.max_panels >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid quadrature settings".into()))
        }
    }
}

/// Value and error estimate of a principal value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvResult {
    pub value: Complex64,
    pub error: f64,
}

/// Richardson extrapolation of `values[j] ≈ L + Σ c_p h_j^p` with
/// `h_j = h_0/2^j`. Returns the limit and the last correction.
pub fn richardson(values: &[Complex64]) -> (Complex64, f64) {
    let mut row: Vec<Complex64> = values.to_vec();
    let mut last_change = f64::INFINITY;
    let mut p = 1;
    while row.len() > 1 {
        let factor = (1u64 << p) as f64 - 1.0;
        let next: Vec<Complex64> = row.windows(2).map(|w| w[1] + (w[1] - w[0]) / factor).collect();
        last_change = (next[next.len() - 1] - row[row.len() - 1]).norm();
        row = next;
        p += 1;
    }
    (row[0], last_change)
}

/// `p.v.∫_ℝ f(x) dx` with the singular point `x0`.
///
/// The integrand is folded about `x0`; the excluded window and the
/// truncation radius are both extrapolated to their limits.
///
/// ```
/// use holowave::identity::quad::{pv_quad, PvQuadConfig};
/// use num_complex::Complex64;
/// let v = pv_quad(|x| Complex64::new(x.sin() / x, 0.0), 0.0, &PvQuadConfig::default()).unwrap();
/// assert!((v.value.re - std::f64::consts::PI).abs() < 1e-10);
/// ```
pub fn pv_quad<F: Fn(f64) -> Complex64>(f: F, x0: f64, cfg: &PvQuadConfig) -> Result<PvResult> {
    cfg.validate()?;
    let mut folded = |s: f64| f(x0 + s) + f(x0 - s);
    let r0 = (cfg.radius / cfg.period).ceil() * cfg.period;
    let tol = cfg.abs_tol / (4 * (cfg.window_levels + cfg.radius_levels)) as f64;

    // near part: ∫_δ^{r0} for shrinking δ
    let mut near = Vec::with_capacity(cfg.window_levels);
    let mut quad_err = 0.0;
    let (core, e) = integrate(&mut folded, cfg.window, r0, tol, cfg.max_panels)?;
    quad_err += e;
    let mut delta = cfg.window;
    let mut acc = core;
    near.push(acc);
    for _ in 1..cfg.window_levels {
        let (piece, e) = integrate(&mut folded, delta / 2.0, delta, tol, cfg.max_panels)?;
        quad_err += e;
        acc += piece;
        near.push(acc);
        delta /= 2.0;
    }
    let (near_value, near_change) = if near.len() > 1 { richardson(&near) } else { (near[0], 0.0) };

    // far part: ∫_{r0}^{R} for growing R, extrapolated in 1/R
    let mut far = vec![ZERO];
    let mut r = r0;
    let mut acc = ZERO;
    for _ in 0..cfg.radius_levels {
        let (piece, e) = integrate(&mut folded, r, 2.0 * r, tol, cfg.max_panels)?;
        quad_err += e;
        acc += piece;
        far.push(acc);
        r *= 2.0;
    }
    let (far_value, far_change) = richardson(&far);

    let value = near_value + far_value;
    let error = quad_err + near_change + far_change;
    let target = cfg.abs_tol.max(cfg.rel_tol * value.norm());
    if !(error <= target) || !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Quadrature(format!(
            "principal value at {x0} did not converge: estimate {error:.3e} above {target:.3e}"
        )));
    }
    Ok(PvResult { value, error })
}
