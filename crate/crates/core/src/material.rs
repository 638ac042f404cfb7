//! Symbolic material derivatives of singular integrals.
//!
//! Every quantity handled here is a sum of local products and terms
//!
//! ```text
//! c · (1/πi) p.v.∫ Π_k (A_k(α) − A_k(β)) · P_p(Δζ) · ∂_β F(β) · Π_l Z_l(β) dβ
//! ```
//!
//! where each `A_k`, `F`, `Z_l` sits on one of the ladders
//! `D_t^j ζ`, `D_t^j u`, `D_t^j ū`, `D_t^j (ζ − ζ̄)`. In Lagrangian labels `D_t`
//! is a plain time derivative, so it acts on such a term by the product rule:
//! once on every numerator, once on the kernel
//! (`D_t P_p(Δζ) = −p P_{p+1}(Δζ) Δu`), and once on every density factor.
//! The `b`-terms produced by the moving measure cancel against the
//! derivative of the one-form `∂_β F`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::cauchy::{Branch, CurveHandle};
use crate::error::{Error, Result};
use crate::grid::Field;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Base quantity of a ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Base {
    /// `ζ`; only its `α`-derivative is ever evaluated.
    Zeta,
    U,
    UBar,
    /// `ζ − ζ̄`.
    Y,
}

/// `D_t^level` of a base quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym {
    pub base: Base,
    pub level: u8,
}

impl Sym {
    pub const fn new(base: Base, level: u8) -> Sym {
        Sym { base, level }
    }

    fn dt(self) -> Sym {
        Sym {
            base: self.base,
            level: self.level + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    numerators: Vec<Sym>,
    power: u32,
    conjugate: bool,
    form: Sym,
    plain: Vec<Sym>,
}

/// A linear combination of local products and singular integrals.
#[derive(Clone, Debug, Default)]
pub struct Expr {
    locals: BTreeMap<Vec<Sym>, Complex64>,
    terms: BTreeMap<TermKey, Complex64>,
}

impl Expr {
    pub fn new() -> Expr {
        Expr::default()
    }

    /// Adds `c · Π factors`.
    pub fn local(mut self, c: Complex64, mut factors: Vec<Sym>) -> Expr {
        factors.sort();
        *self.locals.entry(factors).or_insert(ZERO) += c;
        self
    }

    /// Adds `c · (1/πi)∫ Π ΔA · P_p · ∂_β(form) · Π plain`.
    pub fn singular(
        mut self,
        c: Complex64,
        mut numerators: Vec<Sym>,
        power: u32,
        branch: Branch,
        form: Sym,
        mut plain: Vec<Sym>,
    ) -> Expr {
        numerators.sort();
        plain.sort();
        let key = TermKey {
            numerators,
            power,
            conjugate: branch == Branch::Conjugate,
            form,
            plain,
        };
        *self.terms.entry(key).or_insert(ZERO) += c;
        self
    }

    pub fn term_count(&self) -> usize {
        self.locals.len() + self.terms.len()
    }

    /// Material derivative.
    pub fn dt(&self) -> Expr {
        let mut out = Expr::new();
        for (factors, &c) in &self.locals {
            for k in 0..factors.len() {
                let mut f = factors.clone();
                f[k] = f[k].dt();
                out = out.local(c, f);
            }
        }
        for (key, &c) in &self.terms {
            let branch = if key.conjugate {
                Branch::Conjugate
            } else {
                Branch::Direct
            };
            for k in 0..key.numerators.len() {
                let mut nums = key.numerators.clone();
                nums[k] = nums[k].dt();
                out = out.singular(c, nums, key.power, branch, key.form, key.plain.clone());
            }
            let mover = if key.conjugate {
                Sym::new(Base::UBar, 0)
            } else {
                Sym::new(Base::U, 0)
            };
            let mut nums = key.numerators.clone();
            nums.push(mover);
            out = out.singular(
                -c * key.power as f64,
                nums,
                key.power + 1,
                branch,
                key.form,
                key.plain.clone(),
            );
            out = out.singular(
                c,
                key.numerators.clone(),
                key.power,
                branch,
                key.form.dt(),
                key.plain.clone(),
            );
            for l in 0..key.plain.len() {
                let mut plain = key.plain.clone();
                plain[l] = plain[l].dt();
                out = out.singular(c, key.numerators.clone(), key.power, branch, key.form, plain);
            }
        }
        out.prune()
    }

    fn prune(mut self) -> Expr {
        self.locals.retain(|_, c| *c != ZERO);
        self.terms.retain(|_, c| *c != ZERO);
        self
    }

    /// Evaluates on a curve with the given ladder values.
    pub fn eval(&self, curve: &CurveHandle, ladders: &Ladders) -> Result<Field> {
        let grid = curve.grid();
        let mut acc = Field::zeros(grid);
        for (factors, &c) in &self.locals {
            let mut p = Field::constant(grid, c);
            for s in factors {
                p = &p * ladders.value(*s)?;
            }
            acc = &acc + &p;
        }
        for (key, &c) in &self.terms {
            let mut density = ladders.one_form(key.form)?;
            for s in &key.plain {
                density = &density * ladders.value(*s)?;
            }
            let nums: Vec<&Field> = key
                .numerators
                .iter()
                .map(|s| ladders.value(*s))
                .collect::<Result<_>>()?;
            let branch = if key.conjugate {
                Branch::Conjugate
            } else {
                Branch::Direct
            };
            let s = curve.singular(&nums, &density, key.power, branch)?;
            acc = &acc + &s.scale(c);
        }
        Ok(acc)
    }
}

/// Values of the ladders `D_t^j` of `ζ`, `u`, `ū`, `ζ − ζ̄` at one instant.
#[derive(Clone, Debug)]
pub struct Ladders {
    /// `D_t^j u` for `j = 0..`.
    u: Vec<Field>,
    ubar: Vec<Field>,
    y: Vec<Field>,
    /// `∂_α D_t^j ζ`.
    zeta_forms: Vec<Field>,
    u_forms: Vec<Field>,
    ubar_forms: Vec<Field>,
    y_forms: Vec<Field>,
}

impl Ladders {
    /// `u_ladder[j] = D_t^j u`, and `zeta_offset = ζ − α`.
    pub fn new(zeta_offset: &Field, u_ladder: Vec<Field>) -> Ladders {
        let ubar: Vec<Field> = u_ladder.iter().map(Field::conj).collect();
        let mut y = vec![&*zeta_offset - &zeta_offset.conj()];
        for (a, b) in u_ladder.iter().zip(&ubar) {
            y.push(a - b);
        }
        let mut zeta_forms = vec![zeta_offset.deriv(1).add_const(Complex64::new(1.0, 0.0))];
        zeta_forms.extend(u_ladder.iter().map(|f| f.deriv(1)));
        let u_forms = u_ladder.iter().map(|f| f.deriv(1)).collect();
        let ubar_forms = ubar.iter().map(|f| f.deriv(1)).collect();
        let y_forms = y.iter().map(|f| f.deriv(1)).collect();
        Ladders {
            u: u_ladder,
            ubar,
            y,
            zeta_forms,
            u_forms,
            ubar_forms,
            y_forms,
        }
    }

    fn missing(s: Sym) -> Error {
        Error::Input(format!("material derivative {:?} not available", s))
    }

    pub fn value(&self, s: Sym) -> Result<&Field> {
        let l = s.level as usize;
        let v = match s.base {
            Base::Zeta => {
                if l == 0 {
                    return Err(Error::Input("ζ itself is not periodic".into()));
                }
                self.u.get(l - 1)
            }
            Base::U => self.u.get(l),
            Base::UBar => self.ubar.get(l),
            Base::Y => self.y.get(l),
        };
        v.ok_or_else(|| Ladders::missing(s))
    }

    pub fn one_form(&self, s: Sym) -> Result<Field> {
        let l = s.level as usize;
        let v = match s.base {
            Base::Zeta => self.zeta_forms.get(l),
            Base::U => self.u_forms.get(l),
            Base::UBar => self.ubar_forms.get(l),
            Base::Y => self.y_forms.get(l),
        };
        v.cloned().ok_or_else(|| Ladders::missing(s))
    }
}

/// `θ = (I − H)(ζ − ζ̄)`.
pub fn theta_expr() -> Expr {
    let one = Complex64::new(1.0, 0.0);
    Expr::new()
        .local(one, vec![Sym::new(Base::Y, 0)])
        .singular(
            -one,
            vec![],
            1,
            Branch::Direct,
            Sym::new(Base::Zeta, 0),
            vec![Sym::new(Base::Y, 0)],
        )
}
