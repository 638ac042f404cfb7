//! Derived quantities of a wave state: `b`, `A`, `w = D_t²ζ`,
//! `a_t/a∘κ⁻¹`, `θ`, `σ = D_tθ`, `D_t²θ`, `Q_α` and `D_tQ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy::{Branch, CurveHandle, ProjectionSolve, Weight};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::material::{theta_expr, Ladders};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Unknowns of the evolution: `ζ − α` and `u = D_tζ` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub zeta_offset: Field,
    pub u: Field,
}

impl WaveState {
    /// The flat, still surface `ζ = α`, `u = 0`.
    pub fn equilibrium(grid: &std::sync::Arc<crate::grid::Grid>) -> WaveState {
        WaveState {
            t: 0.0,
            zeta_offset: Field::zeros(grid),
            u: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &std::sync::Arc<crate::grid::Grid> {
        self.zeta_offset.grid()
    }

    pub fn curve(&self) -> Result<CurveHandle> {
        CurveHandle::new(&self.zeta_offset)
    }
}

/// Tolerances of the projection solves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Cap on the outer iteration that resolves the implicit `A`-equation.
    pub max_outer: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-11,
            max_iter: 200,
            max_outer: 50,
        }
    }
}

/// Iteration count and residual of one projection solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub quantity: String,
    pub iterations: usize,
    pub increment: f64,
    pub residual: f64,
}

impl SolveTrace {
    fn from(quantity: &str, s: &ProjectionSolve) -> SolveTrace {
        SolveTrace {
            quantity: quantity.to_string(),
            iterations: s.iterations,
            increment: s.increment,
            residual: s.residual,
        }
    }
}

/// Everything derived from one [`WaveState`].
#[derive(Clone, Debug)]
pub struct AuxQuantities {
    pub b: Field,
    pub a: Field,
    pub a_minus_1: Field,
    pub w: Field,
    pub at_over_a: Field,
    /// `D_t w = iA(a_t/a·ζ_α + u_α)`.
    pub dt_w: Field,
    /// `(I − H)(ζ − α)`.
    pub theta: Field,
    /// `(I − H)(ζ − ζ̄)`; equal to `theta` on the constraint manifold.
    pub theta_alt: Field,
    pub sigma: Field,
    pub dt_sigma: Field,
    pub q_alpha: Field,
    pub dt_q: Field,
    pub solves: Vec<SolveTrace>,
}

/// `(I − H)b = −[u, H]((ζ̄_α − 1)/ζ_α)`.
pub fn compute_b(curve: &CurveHandle, u: &Field, s: &SolverSettings) -> Result<ProjectionSolve> {
    let za_bar_m1 = curve.zeta_alpha().conj().add_const(-ONE);
    let g = -&curve.singular(&[u], &za_bar_m1, 1, Branch::Direct)?;
    curve.solve_projection(&g, &Weight::None, s.tol, s.max_iter)
}

/// `w = iAζ_α − i`, evaluated as `i(A − 1)ζ_α + i(ζ_α − 1)` so that small
/// amplitudes keep their relative accuracy.
pub fn compute_w(curve: &CurveHandle, a_minus_1: &Field) -> Field {
    let za_m1 = curve.zeta_offset().deriv(1);
    (&(a_minus_1 * curve.zeta_alpha()) + &za_m1).scale(I)
}

/// Right side of the `A`-equation for a trial `A`, without the leading 1.
fn a_rhs(curve: &CurveHandle, u: &Field, a_minus_1: &Field) -> Result<Field> {
    let w = compute_w(curve, a_minus_1);
    let ubar_a = u.conj().deriv(1);
    let za_bar_m1 = curve.zeta_alpha().conj().add_const(-ONE);
    let t1 = curve.singular(&[u], &ubar_a, 1, Branch::Direct)?;
    let t2 = curve.singular(&[&w], &za_bar_m1, 1, Branch::Direct)?;
    Ok((&t1 + &t2).scale(I))
}

/// Solves `(I − H)A = 1 + i[u, H](ū_α/ζ_α) + i[w, H]((ζ̄_α − 1)/ζ_α)` with
/// `w = iAζ_α − i` by outer iteration from `A = 1`. Returns `A − 1`.
pub fn compute_a_minus_1(curve: &CurveHandle, u: &Field, s: &SolverSettings) -> Result<(Field, SolveTrace)> {
    solve_a_minus_1(curve, u, s, true)
}

/// [`compute_a_minus_1`] without the closing residual evaluation; the trace
/// reports a residual of zero.
pub fn compute_a_minus_1_fast(curve: &CurveHandle, u: &Field, s: &SolverSettings) -> Result<(Field, SolveTrace)> {
    solve_a_minus_1(curve, u, s, false)
}

fn solve_a_minus_1(curve: &CurveHandle, u: &Field, s: &SolverSettings, diagnose: bool) -> Result<(Field, SolveTrace)> {
    let grid = curve.grid();
    let one = Field::constant(grid, ONE);
    let h1 = curve.hilbert(&one);
    let mut a_minus_1 = Field::zeros(grid);
    let mut total_iter = 0;
    let mut last: Option<ProjectionSolve> = None;
    for _ in 0..s.max_outer {
        let g = &a_rhs(curve, u, &a_minus_1)? + &h1;
        let sol = curve.solve_projection(&g, &Weight::None, s.tol, s.max_iter)?;
        total_iter += sol.iterations;
        let change = (&sol.f - &a_minus_1).l2();
        let size = sol.f.l2();
        a_minus_1 = sol.f.clone();
        last = Some(sol);
        if change <= s.tol * size {
            let a = a_minus_1.add_const(ONE);
            let min = a.samples().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(Error::TaylorSign(min));
            }
            let sol = last.expect("at least one pass");
            let residual = if diagnose {
                let g = &a_rhs(curve, u, &a_minus_1)? + &h1;
                curve.projection_residual(&a_minus_1, &g, None)
            } else {
                0.0
            };
            let trace = SolveTrace {
                quantity: "A".into(),
                iterations: total_iter,
                increment: sol.increment.max(change),
                residual,
            };
            return Ok((a_minus_1, trace));
        }
    }
    let sol = last.expect("max_outer > 0");
    Err(Error::SolverDiverged {
        iterations: total_iter,
        increment: sol.increment,
        residual: sol.residual,
    })
}

/// `A` itself; see [`compute_a_minus_1`].
pub fn compute_a(curve: &CurveHandle, u: &Field, s: &SolverSettings) -> Result<(Field, SolveTrace)> {
    let (a_minus_1, trace) = compute_a_minus_1(curve, u, s)?;
    Ok((a_minus_1.add_const(ONE), trace))
}

/// `(I − H)(a_t/a∘κ⁻¹ · Aζ̄_α) = 2i[w, H](ū_α/ζ_α) + 2i[u, H](w̄_α/ζ_α)
/// − (1/π)∫(Δu/Δζ)² ū_β dβ`.
pub fn compute_at_over_a(
    curve: &CurveHandle,
    u: &Field,
    a: &Field,
    w: &Field,
    s: &SolverSettings,
) -> Result<ProjectionSolve> {
    let ubar_a = u.conj().deriv(1);
    let wbar_a = w.conj().deriv(1);
    let t1 = curve.singular(&[w], &ubar_a, 1, Branch::Direct)?;
    let t2 = curve.singular(&[u], &wbar_a, 1, Branch::Direct)?;
    let t3 = curve.singular(&[u, u], &ubar_a, 2, Branch::Direct)?;
    let g = &(&t1 + &t2).scale(2.0 * I) - &t3.scale(I);
    let weight = Weight::Custom(a * &curve.zeta_alpha().conj());
    curve.solve_projection(&g, &weight, s.tol, s.max_iter)
}

/// `D_t b` from `(I − H)D_tb = [u, H](b_α/ζ_α) − [w, H]((ζ̄_α − 1)/ζ_α)
/// − [u, H](ū_α/ζ_α) + (1/πi)∫(Δu/Δζ)²(ζ̄_β − 1) dβ`.
pub fn compute_dt_b(
    curve: &CurveHandle,
    u: &Field,
    b: &Field,
    w: &Field,
    s: &SolverSettings,
) -> Result<ProjectionSolve> {
    let za_bar_m1 = curve.zeta_alpha().conj().add_const(-ONE);
    let t1 = curve.singular(&[u], &b.deriv(1), 1, Branch::Direct)?;
    let t2 = curve.singular(&[w], &za_bar_m1, 1, Branch::Direct)?;
    let t3 = curve.singular(&[u], &u.conj().deriv(1), 1, Branch::Direct)?;
    let t4 = curve.singular(&[u, u], &za_bar_m1, 2, Branch::Direct)?;
    let g = &(&(&t1 - &t2) - &t3) + &t4;
    curve.solve_projection(&g, &Weight::None, s.tol, s.max_iter)
}

/// `D_t w = iA(a_t/a∘κ⁻¹ · ζ_α + u_α)`, from `D_tA = A(a_t/a∘κ⁻¹ + b_α)`.
pub fn compute_dt_w(curve: &CurveHandle, u: &Field, a: &Field, at_over_a: &Field) -> Field {
    let inner = &(at_over_a * curve.zeta_alpha()) + &u.deriv(1);
    (a * &inner).scale(I)
}

/// Both assemblies of `θ` and their difference.
#[derive(Clone, Debug)]
pub struct ThetaAssembly {
    /// `(I − H)(ζ − α)`.
    pub theta: Field,
    /// `(I − H)(ζ − ζ̄)`.
    pub theta_alt: Field,
    /// `‖theta − theta_alt‖_{L²}`.
    pub difference: f64,
}

pub fn compute_theta(curve: &CurveHandle, zeta_offset: &Field) -> ThetaAssembly {
    let x = zeta_offset;
    let y = x - &x.conj();
    let theta = x - &curve.hilbert(x);
    let theta_alt = &y - &curve.hilbert(&y);
    let difference = (&theta - &theta_alt).l2();
    ThetaAssembly {
        theta,
        theta_alt,
        difference,
    }
}

/// `D_t(I − H)f = (I − H)D_tf − [u, H](f_α/ζ_α)`.
pub fn material_deriv_projected(curve: &CurveHandle, u: &Field, f: &Field, dt_f: &Field) -> Result<Field> {
    let proj = dt_f - &curve.hilbert(dt_f);
    let comm = curve.singular(&[u], &f.deriv(1), 1, Branch::Direct)?;
    Ok(&proj - &comm)
}

/// `Q_α` and `D_tQ` for `Q = (I − H)(ψ∘κ⁻¹)`.
pub fn compute_q(curve: &CurveHandle, zeta_offset: &Field, u: &Field) -> Result<(Field, Field)> {
    let za = curve.zeta_alpha();
    let zab = za.conj();
    let ubar = u.conj();
    let t1 = za * &curve.hilbert(&ubar);
    let t2 = &zab * &curve.conj_hilbert(&(&(za * &ubar)).div(&zab));
    let q_alpha_bar = &(&ubar + &(&za.add_const(-ONE) * &ubar)) - &(&t1 + &t2).scale_re(0.5);
    let q_alpha = q_alpha_bar.conj();

    let re_part = (&zab * u).re();
    let c = curve.singular(&[u], &re_part, 1, Branch::Direct)?;
    let speed2 = u.map(|z| Complex64::new(z.norm_sqr(), 0.0));
    let y = zeta_offset - &zeta_offset.conj();
    let p1 = &speed2 - &curve.hilbert(&speed2);
    let p2 = &y - &curve.hilbert(&y);
    let dt_q = &(&p1.scale_re(0.5) - &c) - &p2.scale(Complex64::new(0.0, -0.5));
    Ok((q_alpha, dt_q))
}

/// The ladders `D_t^j u`, `j = 0, 1, 2`, used by symbolic material
/// derivatives.
pub fn ladders(zeta_offset: &Field, u: &Field, w: &Field, dt_w: &Field) -> Ladders {
    Ladders::new(zeta_offset, vec![u.clone(), w.clone(), dt_w.clone()])
}

/// Computes every derived quantity of `state`.
pub fn compute_aux(curve: &CurveHandle, state: &WaveState, s: &SolverSettings) -> Result<AuxQuantities> {
    let u = &state.u;
    let bs = compute_b(curve, u, s)?;
    let (a_minus_1, a_trace) = compute_a_minus_1(curve, u, s)?;
    let a = a_minus_1.add_const(ONE);
    let w = compute_w(curve, &a_minus_1);
    let ats = compute_at_over_a(curve, u, &a, &w, s)?;
    let dt_w = compute_dt_w(curve, u, &a, &ats.f);
    let th = compute_theta(curve, &state.zeta_offset);
    let lad = ladders(&state.zeta_offset, u, &w, &dt_w);
    let e0 = theta_expr();
    let e1 = e0.dt();
    let e2 = e1.dt();
    let sigma = e1.eval(curve, &lad)?;
    let dt_sigma = e2.eval(curve, &lad)?;
    let (q_alpha, dt_q) = compute_q(curve, &state.zeta_offset, u)?;
    let aux = AuxQuantities {
        b: bs.f.clone(),
        a,
        a_minus_1,
        w,
        at_over_a: ats.f.clone(),
        dt_w,
        theta: th.theta,
        theta_alt: th.theta_alt,
        sigma,
        dt_sigma,
        q_alpha,
        dt_q,
        solves: vec![
            SolveTrace::from("b", &bs),
            a_trace,
            SolveTrace::from("at_over_a", &ats),
        ],
    };
    for f in [&aux.b, &aux.a, &aux.w, &aux.at_over_a, &aux.sigma, &aux.dt_sigma, &aux.q_alpha, &aux.dt_q] {
        f.check_finite("derived quantities")?;
    }
    Ok(aux)
}

/// `(‖(I − H)(ζ̄ − α)‖_{L²}, ‖(I − H)ū‖_{L²})`.
pub fn constraint_residual(curve: &CurveHandle, state: &WaveState) -> (f64, f64) {
    let xb = state.zeta_offset.conj();
    let ub = state.u.conj();
    let rz = (&xb - &curve.hilbert(&xb)).l2();
    let ru = (&ub - &curve.hilbert(&ub)).l2();
    (rz, ru)
}
