//! Cauchy integrals on a periodic curve `ζ(α) = α + X(α)`.
//!
//! Kernels are periodized exactly: `1/z` becomes
//! `π_L(z) = cot(z/2L)/(2L)` and higher powers follow from
//! `d/dz π_L = −(π_L² + 1/(4L²))`. All integrals are punctured trapezoid
//! sums with an analytic diagonal value, which is spectrally accurate for
//! the periodic integrands that remain after the odd part of the kernel is
//! removed.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Smallest chord-arc ratio accepted for a curve.
pub const CHORD_ARC_FLOOR: f64 = 0.1;
/// Smallest `|ζ_α|` accepted for a curve.
pub const MIN_SPEED: f64 = 0.5;
/// Highest kernel power supported by [`CurveHandle::singular`].
pub const MAX_POWER: u32 = 6;

/// Which curve a kernel is built on: `ζ` or its mirror image `ζ̄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Direct,
    Conjugate,
}

/// Whether the density of a singular integral is `f` or `f_β`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    S1,
    S2,
}

/// Sign selector for [`CurveHandle::cauchy_project`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Plus,
}

/// Multiplicative weight for [`CurveHandle::solve_projection`].
#[derive(Clone, Debug)]
pub enum Weight {
    None,
    ZetaBarAlpha,
    Custom(Field),
}

/// Outcome of a projection solve.
#[derive(Clone, Debug)]
pub struct ProjectionSolve {
    pub f: Field,
    pub iterations: usize,
    /// L² size of the last fixed-point update.
    pub increment: f64,
    /// `‖(I−H)(fW) − g‖_{L²}`, reassembled after the solve.
    pub residual: f64,
}

/// `cot(z)` for complex `z`, written to stay accurate near the real zeros of
/// `sin`.
pub fn cot(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let (s, c) = x.sin_cos();
    if y == 0.0 {
        return Complex64::new(c / s, 0.0);
    }
    let sh = y.sinh();
    let ch = (1.0 + sh * sh).sqrt();
    let den = s * s + sh * sh;
    Complex64::new(s * c / den, -sh * ch / den)
}

/// Periodized Cauchy kernel `π_L(z) = Σ_m 1/(z − 2πLm)`.
pub fn periodic_kernel(z: Complex64, length: f64) -> Complex64 {
    cot(z / (2.0 * length)) / (2.0 * length)
}

/// Coefficients (ascending) of the polynomial `q_p` with `P_p = q_p(P_1)`,
/// where `P_p` is the periodization of `z^{−p}`.
fn kernel_polynomial(power: u32, c: f64) -> Vec<f64> {
    let mut q = vec![0.0, 1.0];
    for p in 1..power {
        // q_{p+1}(x) = q_p'(x)·(x² + c)/p
        let d: Vec<f64> = (1..q.len()).map(|i| i as f64 * q[i]).collect();
        let mut next = vec![0.0; d.len() + 2];
        for (i, &a) in d.iter().enumerate() {
            next[i] += c * a;
            next[i + 2] += a;
        }
        for v in next.iter_mut() {
            *v /= p as f64;
        }
        q = next;
    }
    q
}

fn horner(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, &a| acc * x + a)
}

/// A curve together with its cached kernel matrices.
pub struct CurveHandle {
    grid: Arc<Grid>,
    zeta_offset: Field,
    zeta_alpha: Field,
    zeta_aa: Field,
    chord_arc: (f64, f64),
    /// `π_L(ζ_i − ζ_j)`, row major, zero diagonal.
    p1: Vec<Complex64>,
    /// `ζ_β,j π_L(ζ_i − ζ_j) − π_L(α_i − α_j)` with the diagonal limit
    /// `−ζ_αα/(2ζ_α)`.
    correction: Vec<Complex64>,
}

impl std::fmt::Debug for CurveHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurveHandle")
            .field("grid", self.grid.spec())
            .field("chord_arc", &self.chord_arc)
            .finish()
    }
}

impl CurveHandle {
    /// Builds the curve `ζ = α + zeta_offset`.
    ///
    /// ```
    /// use holowave::grid::{make_grid, Field};
    /// use holowave::cauchy::CurveHandle;
    /// let g = make_grid(32, 1.0, 1.0 / 3.0).unwrap();
    /// let flat = CurveHandle::new(&Field::zeros(&g)).unwrap();
    /// assert_eq!(flat.chord_arc_bounds(), (1.0, 1.0));
    /// ```
    pub fn new(zeta_offset: &Field) -> Result<CurveHandle> {
        zeta_offset.check_finite("curve construction")?;
        let grid = zeta_offset.grid().clone();
        let n = grid.n();
        let h = grid.spacing();
        let length = grid.spec().length;
        let dx = zeta_offset.deriv(1);
        let zeta_alpha = dx.add_const(ONE);
        let zeta_aa = zeta_offset.deriv(2);

        let min_speed = zeta_alpha.samples().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if min_speed <= MIN_SPEED {
            return Err(Error::ChordArc(format!("min |ζ_α| = {min_speed:.4}")));
        }
        let chord_arc = chord_arc_bounds(zeta_offset);
        if chord_arc.0 < CHORD_ARC_FLOOR {
            return Err(Error::ChordArc(format!(
                "chord-arc lower bound {:.4}",
                chord_arc.0
            )));
        }

        let flat: Vec<Complex64> = (0..n)
            .map(|d| {
                if d == 0 {
                    ZERO
                } else {
                    periodic_kernel(Complex64::new(d as f64 * h, 0.0), length)
                }
            })
            .collect();
        let x = zeta_offset.samples();
        let za = zeta_alpha.samples();
        let zaa = zeta_aa.samples();
        let mut p1 = vec![ZERO; n * n];
        let mut correction = vec![ZERO; n * n];
        for i in 0..n {
            correction[i * n + i] = -zaa[i] / (2.0 * za[i]);
            for j in (i + 1)..n {
                let d = j - i;
                let k = if x[i] == x[j] {
                    -flat[d]
                } else {
                    periodic_kernel(Complex64::new(-(d as f64) * h, 0.0) + (x[i] - x[j]), length)
                };
                p1[i * n + j] = k;
                p1[j * n + i] = -k;
                // π_L(α_i − α_j) = −flat[d] and π_L(α_j − α_i) = flat[d]
                correction[i * n + j] = za[j] * k + flat[d];
                correction[j * n + i] = -(za[i] * k) - flat[d];
            }
        }
        Ok(CurveHandle {
            grid,
            zeta_offset: zeta_offset.clone(),
            zeta_alpha,
            zeta_aa,
            chord_arc,
            p1,
            correction,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn zeta_offset(&self) -> &Field {
        &self.zeta_offset
    }

    pub fn zeta_alpha(&self) -> &Field {
        &self.zeta_alpha
    }

    pub fn zeta_alpha_alpha(&self) -> &Field {
        &self.zeta_aa
    }

    /// Measured `(β₀, β₁)` over dyadic offsets.
    pub fn chord_arc_bounds(&self) -> (f64, f64) {
        self.chord_arc
    }

    fn check(&self, f: &Field) {
        assert!(
            f.grid().spec() == self.grid.spec(),
            "field and curve live on different grids"
        );
    }

    /// `(H − ℍ)f`, the smooth part of the curve Hilbert transform.
    pub fn hilbert_correction(&self, f: &Field) -> Field {
        self.check(f);
        let n = self.grid.n();
        let fs = f.samples();
        if fs.iter().all(|z| *z == ZERO) {
            return Field::zeros(&self.grid);
        }
        let scale = Complex64::new(0.0, -self.grid.spacing() / PI);
        let out = (0..n)
            .map(|i| {
                let row = &self.correction[i * n..(i + 1) * n];
                row.iter().zip(fs).map(|(k, v)| k * v).sum::<Complex64>() * scale
            })
            .collect();
        Field::from_vec_unchecked(&self.grid, out)
    }

    /// `Hf = (1/πi) p.v.∫ ζ_β/(ζ(α) − ζ(β)) f(β) dβ`.
    ///
    /// ```
    /// use holowave::grid::{make_grid, Field};
    /// use holowave::cauchy::CurveHandle;
    /// use num_complex::Complex64;
    /// let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
    /// let c = CurveHandle::new(&Field::zeros(&g)).unwrap();
    /// let f = Field::from_fn(&g, |a| Complex64::new(0.0, -2.0 * a).exp());
    /// assert!((&c.hilbert(&f) - &f).linf() < 1e-12);
    /// ```
    pub fn hilbert(&self, f: &Field) -> Field {
        &f.flat_hilbert() + &self.hilbert_correction(f)
    }

    /// `H̄f = conj(H(conj f))` with the kernel of the mirrored curve `ζ̄`.
    pub fn conj_hilbert(&self, f: &Field) -> Field {
        self.hilbert(&f.conj()).conj()
    }

    /// `(I ∓ H)f / 2`.
    pub fn cauchy_project(&self, f: &Field, sign: Sign) -> Field {
        let hf = self.hilbert(f);
        match sign {
            Sign::Minus => (f - &hf).scale_re(0.5),
            Sign::Plus => (f + &hf).scale_re(0.5),
        }
    }

    /// Projector onto the kernel of `I − H`.
    ///
    /// On the torus `H` annihilates constants, so `(I + H)/2` is only a
    /// projector on the range of `H`; `(H + H²)/2` is one everywhere.
    pub fn holomorphic_part(&self, f: &Field) -> Field {
        let hf = self.hilbert(f);
        let hhf = self.hilbert(&hf);
        (&hf + &hhf).scale_re(0.5)
    }

    /// `[g, H]f = g·Hf − H(gf)`.
    pub fn commutator(&self, g: &Field, f: &Field) -> Result<Field> {
        let density = f * &self.zeta_alpha;
        self.singular(&[g], &density, 1, Branch::Direct)
    }

    /// `[g, H](f/ζ_α)`, the bracket as it appears in most formulas.
    pub fn commutator_over_zeta_alpha(&self, g: &Field, f: &Field) -> Result<Field> {
        self.singular(&[g], f, 1, Branch::Direct)
    }

    /// The operator `H(1/ζ_α) + H̄(1/ζ̄_α)` assembled from the two transforms.
    pub fn k_operator(&self, f: &Field) -> Field {
        let a = self.hilbert(&f.div(&self.zeta_alpha));
        let b = self.conj_hilbert(&f.div(&self.zeta_alpha.conj()));
        &a + &b
    }

    /// The same operator through its kernel `(2/π) Im π_L(ζ(α) − ζ(β))`.
    pub fn k_operator_real_kernel(&self, f: &Field) -> Result<Field> {
        let a = self.singular(&[], f, 1, Branch::Direct)?;
        let b = self.singular(&[], f, 1, Branch::Conjugate)?;
        Ok(&a - &b)
    }

    /// Operator form of the singular integrals:
    /// `S1 = (1/πi) p.v.∫ Π_k(A_k(α) − A_k(β)) / (ζ(α) − ζ(β))^p f(β) dβ`,
    /// `S2` the same with `f_β`.
    pub fn singular_s(
        &self,
        numerators: &[&Field],
        f: &Field,
        variant: Variant,
        power: u32,
    ) -> Result<Field> {
        if numerators.is_empty() {
            return Err(Error::Input("singular_S needs at least one numerator".into()));
        }
        match variant {
            Variant::S1 => self.singular(numerators, f, power, Branch::Direct),
            Variant::S2 => self.singular(numerators, &f.deriv(1), power, Branch::Direct),
        }
    }

    /// `(1/πi) p.v.∫ Π_k ΔA_k · P_p(Δζ) · g(β) dβ` where `P_p` is the
    /// periodized `z^{−p}` and `Δζ = ζ(α) − ζ(β)`, or `ζ̄(α) − ζ̄(β)` on the
    /// conjugate branch.
    pub fn singular(
        &self,
        numerators: &[&Field],
        density: &Field,
        power: u32,
        branch: Branch,
    ) -> Result<Field> {
        let m = numerators.len();
        if power == 0 || power > MAX_POWER || power as usize > m + 1 {
            return Err(Error::NotIntegrable {
                power,
                numerators: m,
            });
        }
        self.check(density);
        for a in numerators {
            self.check(a);
        }
        let vanishes = |f: &Field| f.samples().iter().all(|z| *z == ZERO);
        if vanishes(density) || numerators.iter().any(|a| vanishes(a)) {
            return Ok(Field::zeros(&self.grid));
        }
        let n = self.grid.n();
        let h = self.grid.spacing();
        let length = self.grid.spec().length;
        let poly = kernel_polynomial(power, 1.0 / (4.0 * length * length));
        let g = density.samples();
        let nums: Vec<&[Complex64]> = numerators.iter().map(|a| a.samples()).collect();
        let conj = branch == Branch::Conjugate;

        let diag = self.diagonal(numerators, density, power, branch);
        let scale = Complex64::new(0.0, -h / PI);
        let mut out = vec![ZERO; n];
        let mut ai = [ZERO; MAX_POWER as usize];
        for (i, o) in out.iter_mut().enumerate() {
            for (k, a) in nums.iter().enumerate() {
                ai[k] = a[i];
            }
            let row = &self.p1[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let x = if conj { row[j].conj() } else { row[j] };
                let mut w = g[j];
                for (k, a) in nums.iter().enumerate() {
                    w *= ai[k] - a[j];
                }
                acc += w * horner(&poly, x);
            }
            *o = (acc + diag[i]) * scale;
        }
        Ok(Field::from_vec_unchecked(&self.grid, out))
    }

    /// Limit of the regularized integrand on the diagonal.
    fn diagonal(&self, numerators: &[&Field], density: &Field, power: u32, branch: Branch) -> Vec<Complex64> {
        let n = self.grid.n();
        let m = numerators.len();
        let p = power as usize;
        if m > p {
            return vec![ZERO; n];
        }
        let conj = branch == Branch::Conjugate;
        let pick = |z: Complex64| if conj { z.conj() } else { z };
        let za = self.zeta_alpha.samples();
        let zaa = self.zeta_aa.samples();
        let d1: Vec<Field> = numerators.iter().map(|a| a.deriv(1)).collect();
        let g = density.samples();
        if m == p {
            return (0..n)
                .map(|i| {
                    let prod: Complex64 = d1.iter().map(|d| d.samples()[i]).product();
                    prod * pick(za[i]).powi(-(p as i32)) * g[i]
                })
                .collect();
        }
        // m = p − 1: the derivative at d = 0 of
        // Q(d) = Π_k (ΔA_k/d) · (Δζ/d)^{−p} · g(α − d).
        let d2: Vec<Field> = numerators.iter().map(|a| a.deriv(2)).collect();
        let dg = density.deriv(1);
        (0..n)
            .map(|i| {
                let s1 = pick(za[i]);
                let s2 = pick(zaa[i]);
                let firsts: Vec<Complex64> = d1.iter().map(|d| d.samples()[i]).collect();
                let prod: Complex64 = firsts.iter().product();
                let mut dprod = ZERO;
                for k in 0..m {
                    let mut t = -0.5 * d2[k].samples()[i];
                    for (l, f) in firsts.iter().enumerate() {
                        if l != k {
                            t *= f;
                        }
                    }
                    dprod += t;
                }
                let inv = s1.powi(-(p as i32));
                dprod * inv * g[i] + prod * (0.5 * p as f64) * s2 * inv / s1 * g[i]
                    - prod * inv * dg.samples()[i]
            })
            .collect()
    }

    /// Solves `(I − H)(f·W) = g` for real `f` by the fixed point
    /// `f ← Re{g + (H − ℍ)(fW) − (I − ℍ)(f(W − 1))}`.
    ///
    /// The iteration stops once the update is below `tol` relative to the
    /// iterate; the equation residual is reported separately because the
    /// discrete right-hand side is consistent only to discretization
    /// accuracy.
    pub fn solve_projection(
        &self,
        g: &Field,
        weight: &Weight,
        tol: f64,
        max_iter: usize,
    ) -> Result<ProjectionSolve> {
        self.check(g);
        if !(tol > 0.0) {
            return Err(Error::Input("solver tolerance must be positive".into()));
        }
        let w = match weight {
            Weight::None => None,
            Weight::ZetaBarAlpha => Some(self.zeta_alpha.conj()),
            Weight::Custom(w) => {
                self.check(w);
                Some(w.clone())
            }
        };
        let wm1 = w.as_ref().map(|w| w.add_const(-ONE));
        let mut f = Field::zeros(&self.grid);
        let mut increment = f64::INFINITY;
        let mut last_increment = f64::INFINITY;
        for it in 1..=max_iter {
            let mut rhs = g.clone();
            match (&w, &wm1) {
                (Some(w), Some(wm1)) => {
                    let fw = &f * w;
                    rhs = &rhs + &self.hilbert_correction(&fw);
                    let e = &f * wm1;
                    let ie = &e - &e.flat_hilbert();
                    rhs = &rhs - &ie;
                }
                _ => {
                    rhs = &rhs + &self.hilbert_correction(&f);
                }
            }
            let next = rhs.re();
            next.check_finite("projection solve")?;
            increment = (&next - &f).l2();
            let size = next.l2();
            f = next;
            if increment <= tol * size {
                let residual = self.projection_residual(&f, g, w.as_ref());
                return Ok(ProjectionSolve {
                    f,
                    iterations: it,
                    increment,
                    residual,
                });
            }
            if it > 3 && increment > 2.0 * last_increment {
                break;
            }
            last_increment = increment;
        }
        let residual = self.projection_residual(&f, g, w.as_ref());
        Err(Error::SolverDiverged {
            iterations: max_iter,
            increment,
            residual,
        })
    }

    /// `‖(I − H)(fW) − g‖_{L²}`.
    pub fn projection_residual(&self, f: &Field, g: &Field, w: Option<&Field>) -> f64 {
        let fw = match w {
            Some(w) => f * w,
            None => f.clone(),
        };
        let lhs = &fw - &self.hilbert(&fw);
        (&lhs - g).l2()
    }
}

/// `(min, max)` of `|ζ(α + d) − ζ(α)| / d` over dyadic grid offsets `d`.
pub fn chord_arc_bounds(zeta_offset: &Field) -> (f64, f64) {
    let n = zeta_offset.len();
    let h = zeta_offset.grid().spacing();
    let x = zeta_offset.samples();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut d = 1;
    while d <= n / 2 {
        let span = d as f64 * h;
        for j in 0..n {
            let dz = Complex64::new(span, 0.0) + x[(j + d) % n] - x[j];
            let r = dz.norm() / span;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        d *= 2;
    }
    (lo, hi)
}
