//! The cubic nonlinearities `G₁`, `G₂`, the source of the `σ`-equation, the
//! residuals of both equations, and the commutator sources of the
//! differentiated equations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy::{Branch, CurveHandle};
use crate::error::{Error, Result};
use crate::flow::{compute_dt_b, ladders, AuxQuantities, SolverSettings, WaveState};
use crate::grid::Field;
use crate::material::{theta_expr, Base, Expr, Sym};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

const U0: Sym = Sym::new(Base::U, 0);
const Y0: Sym = Sym::new(Base::Y, 0);

/// `G₁ = −2[D_tζ, H(1/ζ_α) + H̄(1/ζ̄_α)]∂_αD_tζ`.
pub fn g1_expr() -> Expr {
    Expr::new()
        .singular(-2.0 * ONE, vec![U0], 1, Branch::Direct, U0, vec![])
        .singular(2.0 * ONE, vec![U0], 1, Branch::Conjugate, U0, vec![])
}

/// `G₂ = (1/πi)∫(ΔD_tζ/Δζ)²∂_β(ζ − ζ̄)dβ`.
pub fn g2_expr() -> Expr {
    Expr::new().singular(ONE, vec![U0, U0], 2, Branch::Direct, Y0, vec![])
}

/// `G₁ + G₂`.
pub fn g_expr() -> Expr {
    g1_expr().singular(ONE, vec![U0, U0], 2, Branch::Direct, Y0, vec![])
}

/// Cubic terms and the residuals of the `θ`- and `σ`-equations.
#[derive(Clone, Debug)]
pub struct CubicBundle {
    pub g1: Field,
    pub g2: Field,
    pub g: Field,
    pub dt_g: Field,
    /// `(D_t² − iA∂_α)θ − G`.
    pub residual_theta: Field,
    /// `(D_t² − iA∂_α)σ − (D_tG + i(a_t/a)Aθ_α)`.
    pub residual_sigma: Field,
}

/// `(G₁, G₂)` with `G₁` in the two-transform form.
pub fn compute_g(curve: &CurveHandle, state: &WaveState, aux: &AuxQuantities) -> Result<(Field, Field)> {
    let lad = ladders(&state.zeta_offset, &state.u, &aux.w, &aux.dt_w);
    let g1 = g1_expr().eval(curve, &lad)?.dealias();
    let g2 = g2_expr().eval(curve, &lad)?.dealias();
    Ok((g1, g2))
}

/// `G₁` with the operator `H(1/ζ_α) + H̄(1/ζ̄_α)` in its real-kernel form.
pub fn compute_g1_real_kernel(curve: &CurveHandle, state: &WaveState) -> Result<Field> {
    let u = &state.u;
    let ua = u.deriv(1);
    let ku = curve.k_operator_real_kernel(&ua)?;
    let k_uua = curve.k_operator_real_kernel(&(u * &ua))?;
    Ok((&(u * &ku) - &k_uua).scale_re(-2.0).dealias())
}

/// `D_tG`, expanded by the product rule over the kernels of `G₁` and `G₂`.
pub fn compute_dt_g(curve: &CurveHandle, state: &WaveState, aux: &AuxQuantities) -> Result<Field> {
    let lad = ladders(&state.zeta_offset, &state.u, &aux.w, &aux.dt_w);
    Ok(g_expr().dt().eval(curve, &lad)?.dealias())
}

/// Builds the full [`CubicBundle`].
pub fn compute_bundle(curve: &CurveHandle, state: &WaveState, aux: &AuxQuantities) -> Result<CubicBundle> {
    let lad = ladders(&state.zeta_offset, &state.u, &aux.w, &aux.dt_w);
    let (g1, g2) = compute_g(curve, state, aux)?;
    let g = &g1 + &g2;
    let dt_g = compute_dt_g(curve, state, aux)?;
    let theta = &aux.theta_alt;
    let d3 = theta_expr().dt().dt().dt().eval(curve, &lad)?;
    let transport = |f: &Field| (&aux.a * &f.deriv(1)).scale(I);
    let residual_theta = &(&aux.dt_sigma - &transport(theta)) - &g;
    let source = &dt_g + &(&(&aux.at_over_a * &aux.a) * &theta.deriv(1)).scale(I);
    let residual_sigma = &(&d3 - &transport(&aux.sigma)) - &source;
    let bundle = CubicBundle {
        g1,
        g2,
        g,
        dt_g,
        residual_theta,
        residual_sigma,
    };
    for f in [&bundle.g, &bundle.dt_g, &bundle.residual_theta, &bundle.residual_sigma] {
        f.check_finite("cubic terms")?;
    }
    Ok(bundle)
}

/// `L²`, `L^∞` and `H¹` norms of a residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
}

impl ResidualNorms {
    pub fn of(f: &Field) -> ResidualNorms {
        let n = f.norms(1);
        ResidualNorms {
            l2: n.l2,
            linf: n.linf,
            h1: n.h[1],
        }
    }
}

/// Norms of `(residual_theta, residual_sigma)`.
pub fn cubic_residual(bundle: &CubicBundle) -> (ResidualNorms, ResidualNorms) {
    (
        ResidualNorms::of(&bundle.residual_theta),
        ResidualNorms::of(&bundle.residual_sigma),
    )
}

/// Which unknown a differentiated equation is written for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unknown {
    Theta,
    Sigma,
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `[D_t, ∂_α^k]f = −Σ_{j=1}^k C(k,j)(∂_α^j b)∂_α^{k−j+1}f`.
pub fn dt_commutator(b: &Field, f: &Field, k: u32) -> Field {
    let mut acc = Field::zeros(f.grid());
    for j in 1..=k {
        let term = &b.deriv(j) * &f.deriv(k - j + 1);
        acc = &acc - &term.scale_re(binomial(k, j));
    }
    acc
}

/// `D_t∂_α^k f = ∂_α^k D_tf + [D_t, ∂_α^k]f`.
pub fn dt_of_derivative(b: &Field, f: &Field, dt_f: &Field, k: u32) -> Field {
    &dt_f.deriv(k) + &dt_commutator(b, f, k)
}

/// Inputs of [`commutator_source`] that are not part of [`AuxQuantities`].
#[derive(Clone, Debug)]
pub struct SourceInputs {
    pub dt_b: Field,
    pub g: Field,
    pub dt_g: Field,
}

impl SourceInputs {
    pub fn new(curve: &CurveHandle, state: &WaveState, aux: &AuxQuantities, s: &SolverSettings) -> Result<Self> {
        let dt_b = compute_dt_b(curve, &state.u, &aux.b, &aux.w, s)?.f;
        let (g1, g2) = compute_g(curve, state, aux)?;
        let dt_g = compute_dt_g(curve, state, aux)?;
        Ok(SourceInputs {
            dt_b,
            g: &g1 + &g2,
            dt_g,
        })
    }
}

/// `G_k = ∂_α^kG + [D_t² − iA∂_α, ∂_α^k]f` for `f = θ` (with `G`) or
/// `f = σ` (with `D_tG + i(a_t/a)Aθ_α`).
pub fn commutator_source(aux: &AuxQuantities, src: &SourceInputs, k: u32, which: Unknown) -> Field {
    let b = &aux.b;
    let (f, dt_f, g) = match which {
        Unknown::Theta => (&aux.theta_alt, &aux.sigma, src.g.clone()),
        Unknown::Sigma => {
            let extra = (&(&aux.at_over_a * &aux.a) * &aux.theta_alt.deriv(1)).scale(I);
            (&aux.sigma, &aux.dt_sigma, &src.dt_g + &extra)
        }
    };
    let mut acc = g.deriv(k);
    for j in 1..=k {
        let c = binomial(k, j);
        let m = k - j + 1;
        // D_t of −C(k,j)(∂^j b)(∂^m f)
        let dt_bj = dt_of_derivative(b, b, &src.dt_b, j);
        let dt_fm = dt_of_derivative(b, f, dt_f, m);
        let d1 = &(&dt_bj * &f.deriv(m)) + &(&b.deriv(j) * &dt_fm);
        // −C(k,j)(∂^j b)(∂^m D_t f)
        let d2 = &b.deriv(j) * &dt_f.deriv(m);
        // iC(k,j)(∂^j A)(∂^m f)
        let d3 = (&aux.a.deriv(j) * &f.deriv(m)).scale(I);
        acc = &acc + &(&d3 - &(&d1 + &d2)).scale_re(c);
    }
    acc
}

/// Half-open intervals `[lo, hi)` of `α`.
pub type Region = Vec<(f64, f64)>;

/// Raw main-term diagnostics; no thresholds attached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainTermGap {
    /// `‖(I − H)G₁‖_{L²}`.
    pub projected_g1: f64,
    pub g1: f64,
    /// `‖G₂ − i(t/α)|w|²σ‖_{L²(region)}`.
    pub g2_vs_sigma: f64,
    /// `‖G₂ − i(t/α)|w|²u‖_{L²(region)}`.
    pub g2_vs_u: f64,
    /// `‖b + (2α/t)|w|²‖_{L^∞(region)}`.
    pub b_gap: f64,
}

/// Compares `G₁`, `G₂`, `b` with their asymptotic main terms on `region`.
pub fn main_term_gap(
    curve: &CurveHandle,
    state: &WaveState,
    aux: &AuxQuantities,
    region: &[(f64, f64)],
) -> Result<MainTermGap> {
    if region.iter().any(|&(lo, hi)| !(lo < hi) || (lo <= 0.0 && hi > 0.0)) {
        return Err(Error::Input("region must avoid α = 0".into()));
    }
    if !(state.t > 0.0) {
        return Err(Error::Input("main terms need t > 0".into()));
    }
    let (g1, g2) = compute_g(curve, state, aux)?;
    let projected = &g1 - &curve.hilbert(&g1);
    let spec = *state.zeta_offset.spec();
    let h = spec.spacing();
    let t = state.t;
    let inside = |a: f64| region.iter().any(|&(lo, hi)| a >= lo && a < hi);
    let (mut sig, mut uu, mut bb) = (0.0, 0.0, 0.0f64);
    for j in 0..spec.n {
        let a = spec.alpha(j);
        if !inside(a) {
            continue;
        }
        let w2 = aux.w.samples()[j].norm_sqr();
        let main = I * (t / a) * w2;
        let g2j = g2.samples()[j];
        sig += (g2j - main * aux.sigma.samples()[j]).norm_sqr() * h;
        uu += (g2j - main * state.u.samples()[j]).norm_sqr() * h;
        bb = bb.max((aux.b.samples()[j] + 2.0 * a / t * w2).norm());
    }
    Ok(MainTermGap {
        projected_g1: projected.l2(),
        g1: g1.l2(),
        g2_vs_sigma: sig.sqrt(),
        g2_vs_u: uu.sqrt(),
        b_gap: bb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(6, 6), 1.0);
    }

    #[test]
    fn commutator_matches_direct_difference() {
        let g = crate::grid::make_grid(64, 1.0, 1.0 / 3.0).unwrap();
        let b = Field::from_real_fn(&g, |a| 0.3 * a.sin() + 0.1 * (2.0 * a).cos());
        let f = Field::from_fn(&g, |a| Complex64::new((3.0 * a).cos(), a.sin()));
        for k in 0..4 {
            let direct = &(&b * &f.deriv(k + 1)) - &(&b * &f.deriv(1)).deriv(k);
            let err = (&direct - &dt_commutator(&b, &f, k)).linf();
            let scale = (&b * &f.deriv(k + 1)).linf();
            assert!(err < 1e-12 * scale, "k={k}: {err}");
        }
    }
}
