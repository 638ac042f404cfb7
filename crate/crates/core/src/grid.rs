//! Uniform periodic grid, Fourier multipliers and norms.
//!
//! A [`Field`] holds `n` complex samples `f(α_j)` at `α_j = −πL + jΔα`,
//! `Δα = 2πL/n`. Mode `m` of the discrete transform carries wavenumber
//! `k_m = m/L` with `m ∈ {−n/2, …, n/2−1}`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Grid parameters. The fundamental domain is `[−πL, πL)` with `L = length`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub length: f64,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
}

fn default_dealias() -> f64 {
    1.0 / 3.0
}

impl GridSpec {
    pub fn new(n: usize, length: f64, dealias_fraction: f64) -> Result<Self> {
        let spec = GridSpec {
            n,
            length,
            dealias_fraction,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n % 2 != 0 {
            return Err(Error::InvalidGrid("n must be even".into()));
        }
        if self.n < 16 {
            return Err(Error::InvalidGrid("n must be at least 16".into()));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidGrid("length must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.dealias_fraction) {
            return Err(Error::InvalidGrid("dealias_fraction out of range".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI * self.length / self.n as f64
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * self.length
    }

    pub fn alpha(&self, j: usize) -> f64 {
        -PI * self.length + j as f64 * self.spacing()
    }

    /// Signed mode number of transform slot `slot`.
    pub fn mode(&self, slot: usize) -> i64 {
        let n = self.n as i64;
        let s = slot as i64;
        if s < n / 2 {
            s
        } else {
            s - n
        }
    }

    pub fn wavenumber(&self, slot: usize) -> f64 {
        self.mode(slot) as f64 / self.length
    }

    /// Largest mode number kept by [`Field::dealias`].
    pub fn dealias_cutoff(&self) -> i64 {
        ((1.0 - self.dealias_fraction) * (self.n / 2) as f64).floor() as i64
    }
}

/// A grid together with its transform plans.
pub struct Grid {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

/// Builds a validated grid. See [`GridSpec::validate`] for the rules.
///
/// ```
/// let g = holowave::grid::make_grid(256, 16.0, 1.0 / 3.0).unwrap();
/// assert!((g.spec().spacing() - std::f64::consts::PI / 8.0).abs() < 1e-15);
/// assert!(holowave::grid::make_grid(15, 1.0, 1.0 / 3.0).is_err());
/// ```
pub fn make_grid(n: usize, length: f64, dealias_fraction: f64) -> Result<Arc<Grid>> {
    Grid::new(GridSpec::new(n, length, dealias_fraction)?)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Grid>> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.n);
        let inverse = planner.plan_fft_inverse(spec.n);
        let k = (0..spec.n).map(|m| spec.wavenumber(m)).collect();
        Ok(Arc::new(Grid {
            spec,
            forward,
            inverse,
            k,
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.spec.n).map(|j| self.spec.alpha(j)).collect()
    }

    fn fft(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    fn ifft(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let s = 1.0 / self.spec.n as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }
}

/// Which side of a sharp frequency cutoff to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    Low,
    High,
}

/// Norm table of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    /// `h[k]` is the `H^k` norm, `k = 0..=s_max`.
    pub h: Vec<f64>,
    /// `‖Λf‖_{L²}`.
    pub lambda_l2: f64,
}

/// Complex samples of a function on a periodic grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    samples: Vec<Complex64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.spec == other.grid.spec && self.samples == other.samples
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: &Arc<Grid>, c: Complex64) -> Field {
        Field {
            grid: grid.clone(),
            samples: vec![c; grid.n()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Field {
        let samples = (0..grid.n()).map(|j| f(grid.spec.alpha(j))).collect();
        Field {
            grid: grid.clone(),
            samples,
        }
    }

    pub fn from_real_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(grid, |a| Complex64::new(f(a), 0.0))
    }

    pub fn from_samples(grid: &Arc<Grid>, samples: Vec<Complex64>) -> Result<Field> {
        if samples.len() != grid.n() {
            return Err(Error::Input(format!(
                "expected {} samples, got {}",
                grid.n(),
                samples.len()
            )));
        }
        let f = Field {
            grid: grid.clone(),
            samples,
        };
        f.check_finite("from_samples")?;
        Ok(f)
    }

    pub(crate) fn from_vec_unchecked(grid: &Arc<Grid>, samples: Vec<Complex64>) -> Field {
        debug_assert_eq!(samples.len(), grid.n());
        Field {
            grid: grid.clone(),
            samples,
        }
    }

    /// Field with the given (unnormalized) discrete Fourier coefficients.
    pub fn from_modes(grid: &Arc<Grid>, mut modes: Vec<Complex64>) -> Field {
        assert_eq!(modes.len(), grid.n());
        grid.ifft(&mut modes);
        Field {
            grid: grid.clone(),
            samples: modes,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec == other.grid.spec
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }

    /// Unnormalized discrete Fourier coefficients, slot order.
    pub fn modes(&self) -> Vec<Complex64> {
        let mut data = self.samples.clone();
        self.grid.fft(&mut data);
        data
    }

    /// Applies the Fourier multiplier `symbol(slot, k)`.
    pub fn apply_multiplier(&self, symbol: impl Fn(usize, f64) -> Complex64) -> Field {
        let mut data = self.modes();
        for (slot, z) in data.iter_mut().enumerate() {
            *z *= symbol(slot, self.grid.k[slot]);
        }
        Field::from_modes(&self.grid, data)
    }

    fn apply_real_multiplier(&self, symbol: impl Fn(usize, f64) -> f64) -> Field {
        let mut data = self.modes();
        for (slot, z) in data.iter_mut().enumerate() {
            *z *= symbol(slot, self.grid.k[slot]);
        }
        Field::from_modes(&self.grid, data)
    }

    /// `∂_α^order` by multiplication with `(ik)^order`. Odd orders drop the
    /// unpaired Nyquist slot so that real fields stay real.
    ///
    /// ```
    /// use holowave::grid::{make_grid, Field};
    /// use num_complex::Complex64;
    /// let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
    /// let f = Field::from_fn(&g, |a| Complex64::new(0.0, 3.0 * a).exp());
    /// let df = f.deriv(1);
    /// let err = (&df - &f.scale(Complex64::new(0.0, 3.0))).linf();
    /// assert!(err < 1e-12);
    /// ```
    pub fn deriv(&self, order: u32) -> Field {
        if order == 0 {
            return self.clone();
        }
        let nyq = self.grid.n() / 2;
        let odd = order % 2 == 1;
        self.apply_multiplier(|slot, k| {
            if odd && slot == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                (I * k).powu(order)
            }
        })
    }

    /// `Λ = |∂_α|^{1/2}`.
    pub fn half_deriv(&self) -> Field {
        self.apply_real_multiplier(|_, k| k.abs().sqrt())
    }

    /// `|∂_α|`.
    pub fn abs_deriv(&self) -> Field {
        self.apply_real_multiplier(|_, k| k.abs())
    }

    /// Flat Hilbert transform, symbol `−sgn(k)`: `ℍe^{−iα} = e^{−iα}`.
    ///
    /// The unpaired Nyquist slot is mapped to zero so that real fields go to
    /// purely imaginary ones.
    ///
    /// ```
    /// use holowave::grid::{make_grid, Field};
    /// use num_complex::Complex64;
    /// let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
    /// let e = Field::from_fn(&g, |a| Complex64::new(0.0, -3.0 * a).exp());
    /// assert!((&e.flat_hilbert() - &e).linf() < 1e-13);
    /// ```
    pub fn flat_hilbert(&self) -> Field {
        let nyq = self.grid.n() / 2;
        self.apply_real_multiplier(|slot, k| {
            if slot == nyq {
                0.0
            } else if k > 0.0 {
                -1.0
            } else if k < 0.0 {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Sharp projector onto `|k| ≤ cutoff` (low) or `|k| > cutoff` (high).
    pub fn freq_cutoff(&self, cutoff: f64, keep: Keep) -> Field {
        self.apply_real_multiplier(|_, k| {
            let low = k.abs() <= cutoff;
            if low == (keep == Keep::Low) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Zeroes the top `dealias_fraction` of modes.
    pub fn dealias(&self) -> Field {
        let cut = self.grid.spec.dealias_cutoff();
        let spec = self.grid.spec;
        self.apply_real_multiplier(|slot, _| {
            if spec.mode(slot).abs() <= cut {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Dealiasing combined with the smooth filter `exp(−strength·(|m|/m_c)^order)`.
    pub fn dealias_filtered(&self, strength: f64, order: i32) -> Field {
        let cut = self.grid.spec.dealias_cutoff();
        let spec = self.grid.spec;
        self.apply_real_multiplier(|slot, _| {
            let m = spec.mode(slot).abs();
            if m > cut {
                0.0
            } else if strength > 0.0 {
                (-strength * (m as f64 / cut as f64).powi(order)).exp()
            } else {
                1.0
            }
        })
    }

    pub fn mean(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.len() as f64
    }

    /// Trapezoid integral over one period.
    pub fn integral(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * self.grid.spacing()
    }

    pub fn l2(&self) -> f64 {
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norms(&self, s_max: u32) -> Norms {
        let modes = self.modes();
        let n = self.grid.n() as f64;
        let w = self.grid.spec.period() / (n * n);
        let mut h = vec![0.0; s_max as usize + 1];
        let mut lam = 0.0;
        for (z, &k) in modes.iter().zip(&self.grid.k) {
            let p = z.norm_sqr();
            let weight = 1.0 + k * k;
            let mut acc = p;
            for hk in h.iter_mut() {
                *hk += acc;
                acc *= weight;
            }
            lam += k.abs() * p;
        }
        Norms {
            l2: self.l2(),
            linf: self.linf(),
            h: h.into_iter().map(|v| (v * w).sqrt()).collect(),
            lambda_l2: (lam * w).sqrt(),
        }
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    pub fn re(&self) -> Field {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn im(&self) -> Field {
        self.map(|z| Complex64::new(z.im, 0.0))
    }

    pub fn max_abs_im(&self) -> f64 {
        self.samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|z| z * c)
    }

    pub fn scale_re(&self, c: f64) -> Field {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        assert!(self.same_grid(other), "grid mismatch");
        Field {
            grid: self.grid.clone(),
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn div(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a / b)
    }

    pub fn add_const(&self, c: Complex64) -> Field {
        self.map(|z| z + c)
    }

    /// `∫ f ḡ dα`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        assert!(self.same_grid(other), "grid mismatch");
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * self.grid.spacing()
    }

    /// Evaluates the trigonometric interpolant on another grid of the same
    /// period. Modes that do not fit are dropped.
    pub fn resample(&self, target: &Arc<Grid>) -> Field {
        assert!(
            (target.spec.length - self.grid.spec.length).abs() < 1e-14 * self.grid.spec.length,
            "resample needs equal periods"
        );
        let src = self.modes();
        let n_src = self.grid.n();
        let n_dst = target.n();
        let half = (n_src.min(n_dst) / 2) as i64;
        let mut dst = vec![Complex64::new(0.0, 0.0); n_dst];
        let ratio = n_dst as f64 / n_src as f64;
        for (slot, z) in src.iter().enumerate() {
            let m = self.grid.spec.mode(slot);
            if m.abs() >= half {
                continue;
            }
            let d = if m >= 0 { m as usize } else { (n_dst as i64 + m) as usize };
            dst[d] = *z * ratio;
        }
        // α_0 = −πL on both grids, so no phase correction is needed.
        Field::from_modes(target, dst)
    }
}

impl<'a> Add<&'a Field> for &'a Field {
    type Output = Field;
    fn add(self, rhs: &'a Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Field> for &'a Field {
    type Output = Field;
    fn sub(self, rhs: &'a Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Field> for &'a Field {
    type Output = Field;
    fn mul(self, rhs: &'a Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|z| -z)
    }
}

impl Add for Field {
    type Output = Field;
    fn add(self, rhs: Field) -> Field {
        &self + &rhs
    }
}

impl Sub for Field {
    type Output = Field;
    fn sub(self, rhs: Field) -> Field {
        &self - &rhs
    }
}

impl Mul for Field {
    type Output = Field;
    fn mul(self, rhs: Field) -> Field {
        &self * &rhs
    }
}

/// A named field at a time instant, the unit of the text dump format.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRecord {
    pub name: String,
    pub t: f64,
    pub field: Field,
}

/// Writes records in the plain-text dump format:
///
/// ```text
/// field <name>
/// n <n>
/// L <length>
/// t <t>
/// <re_0> <im_0>
/// ...
/// <re_{n-1}> <im_{n-1}>
/// end
/// ```
///
/// Numbers use the shortest representation that parses back to the same
/// `f64`, so a write/read cycle is bit exact.
pub fn write_records<W: Write>(out: &mut W, records: &[FieldRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "field {}", r.name)?;
        writeln!(out, "n {}", r.field.len())?;
        writeln!(out, "L {:?}", r.field.spec().length)?;
        writeln!(out, "t {:?}", r.t)?;
        for z in r.field.samples() {
            writeln!(out, "{:?} {:?}", z.re, z.im)?;
        }
        writeln!(out, "end")?;
    }
    Ok(())
}

/// Reads records written by [`write_records`]. Each record is placed on a
/// grid with `n` and `L` from its header and the given dealias fraction.
pub fn read_records<R: BufRead>(input: R, dealias_fraction: f64) -> Result<Vec<FieldRecord>> {
    let mut lines = input.lines().enumerate();
    let mut out = Vec::new();
    let bad = |line: usize, msg: &str| Error::Input(format!("field dump line {}: {}", line + 1, msg));
    let next = |lines: &mut std::iter::Enumerate<std::io::Lines<R>>| -> Result<Option<(usize, String)>> {
        loop {
            match lines.next() {
                None => return Ok(None),
                Some((i, Ok(l))) => {
                    if l.trim().is_empty() {
                        continue;
                    }
                    return Ok(Some((i, l)));
                }
                Some((i, Err(e))) => return Err(bad(i, &e.to_string())),
            }
        }
    };
    fn keyed<'a>(line: &'a str, key: &str) -> Option<&'a str> {
        let mut it = line.splitn(2, ' ');
        if it.next()? == key {
            Some(it.next().unwrap_or("").trim())
        } else {
            None
        }
    }
    while let Some((i, l)) = next(&mut lines)? {
        let name = keyed(&l, "field").ok_or_else(|| bad(i, "expected 'field <name>'"))?.to_string();
        let (i, l) = next(&mut lines)?.ok_or_else(|| bad(i, "truncated header"))?;
        let n: usize = keyed(&l, "n")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(i, "expected 'n <count>'"))?;
        let (i, l) = next(&mut lines)?.ok_or_else(|| bad(i, "truncated header"))?;
        let length: f64 = keyed(&l, "L")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(i, "expected 'L <length>'"))?;
        let (i, l) = next(&mut lines)?.ok_or_else(|| bad(i, "truncated header"))?;
        let t: f64 = keyed(&l, "t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(i, "expected 't <time>'"))?;
        let grid = Grid::new(GridSpec::new(n, length, dealias_fraction)?)?;
        let mut samples = Vec::with_capacity(n);
        let mut last = i;
        for _ in 0..n {
            let (i, l) = next(&mut lines)?.ok_or_else(|| bad(last, "truncated samples"))?;
            let mut parts = l.split_whitespace();
            let re: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(i, "bad real part"))?;
            let im: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(i, "bad imaginary part"))?;
            samples.push(Complex64::new(re, im));
            last = i;
        }
        let (i, l) = next(&mut lines)?.ok_or_else(|| bad(last, "missing 'end'"))?;
        if l.trim() != "end" {
            return Err(bad(i, "expected 'end'"));
        }
        out.push(FieldRecord {
            name,
            t,
            field: Field::from_samples(&grid, samples)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cexp(x: f64) -> Complex64 {
        Complex64::new(0.0, x).exp()
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(256, 16.0, 1.0 / 3.0).unwrap();
        assert!((g.spacing() - PI / 8.0).abs() < 1e-15);
        let e = make_grid(15, 1.0, 1.0 / 3.0).unwrap_err();
        assert!(e.to_string().contains("n must be even"));
        let e = make_grid(64, 1.0, 0.6).unwrap_err();
        assert!(e.to_string().contains("dealias_fraction out of range"));
        assert!(make_grid(64, 0.0, 0.2).is_err());
        assert!(make_grid(8, 1.0, 0.2).is_err());
    }

    #[test]
    fn wavenumber_layout() {
        let s = GridSpec::new(16, 2.0, 0.0).unwrap();
        assert_eq!(s.mode(0), 0);
        assert_eq!(s.mode(7), 7);
        assert_eq!(s.mode(8), -8);
        assert_eq!(s.mode(15), -1);
        assert_eq!(s.wavenumber(3), 1.5);
    }

    #[test]
    fn derivative_examples() {
        let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
        let c = Field::constant(&g, Complex64::new(2.5, -1.0));
        assert!(c.deriv(1).linf() < 1e-14);
        assert!(c.deriv(3).linf() < 1e-14);
        let s = Field::from_real_fn(&g, f64::sin);
        let d2 = s.deriv(2);
        assert!((&d2 + &s).linf() < 1e-12);
    }

    #[test]
    fn half_derivative_examples() {
        let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
        let f = Field::from_fn(&g, |a| cexp(4.0 * a));
        assert!((&f.half_deriv() - &f.scale_re(2.0)).linf() < 1e-12);
        let c = Field::constant(&g, Complex64::new(1.0, 0.0));
        assert!(c.half_deriv().linf() < 1e-15);
    }

    #[test]
    fn cutoff_examples() {
        let g = make_grid(128, 1.0, 1.0 / 3.0).unwrap();
        let lo = Field::from_fn(&g, |a| cexp(2.0 * a));
        let hi = Field::from_fn(&g, |a| cexp(40.0 * a));
        let f = &lo + &hi;
        assert!((&f.freq_cutoff(10.0, Keep::Low) - &lo).linf() < 1e-13);
        let shifted = f.add_const(Complex64::new(3.0, 0.0));
        assert!((&shifted.freq_cutoff(0.0, Keep::High) - &f).linf() < 1e-13);
    }

    #[test]
    fn norm_examples() {
        let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
        let z = Field::zeros(&g).norms(3);
        assert_eq!(z.l2, 0.0);
        assert!(z.h.iter().all(|&v| v == 0.0));
        let e = Field::from_fn(&g, cexp);
        assert!((e.l2() - (2.0 * PI).sqrt()).abs() < 1e-13);
        let nm = e.norms(1);
        let expected = (e.l2().powi(2) + e.deriv(1).l2().powi(2)).sqrt();
        assert!((nm.h[1] - expected).abs() < 1e-12);
        assert!((nm.lambda_l2 - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hilbert_examples() {
        let g = make_grid(64, 1.0, 1.0 / 3.0).unwrap();
        let m = Field::from_fn(&g, |a| cexp(-3.0 * a));
        let p = Field::from_fn(&g, |a| cexp(3.0 * a));
        assert!((&m.flat_hilbert() - &m).linf() < 1e-13);
        assert!((&p.flat_hilbert() + &p).linf() < 1e-13);
        let c = Field::constant(&g, Complex64::new(1.0, 1.0));
        assert!(c.flat_hilbert().linf() < 1e-15);
    }

    #[test]
    fn dealias_keeps_low_band() {
        let g = make_grid(48, 1.0, 1.0 / 3.0).unwrap();
        assert_eq!(g.spec().dealias_cutoff(), 16);
        let keep = Field::from_fn(&g, |a| cexp(16.0 * a));
        let drop = Field::from_fn(&g, |a| cexp(-17.0 * a));
        assert!((&keep.dealias() - &keep).linf() < 1e-13);
        assert!(drop.dealias().linf() < 1e-13);
    }

    #[test]
    fn resample_band_limited() {
        let g1 = make_grid(32, 2.0, 0.0).unwrap();
        let g2 = make_grid(128, 2.0, 0.0).unwrap();
        let f = |a: f64| cexp(1.5 * a) + Complex64::new((0.5 * a).cos(), 0.0);
        let up = Field::from_fn(&g1, f).resample(&g2);
        assert!((&up - &Field::from_fn(&g2, f)).linf() < 1e-12);
        let down = up.resample(&g1);
        assert!((&down - &Field::from_fn(&g1, f)).linf() < 1e-12);
    }

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let g = make_grid(16, 3.0, 1.0 / 3.0).unwrap();
        let f = Field::from_fn(&g, |a| Complex64::new(a.sin() / 3.0, a.cos() * 1e-300));
        let recs = vec![
            FieldRecord { name: "a".into(), t: 0.1, field: f.clone() },
            FieldRecord { name: "b".into(), t: 0.1, field: f.conj() },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let back = read_records(&buf[..], 1.0 / 3.0).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn dump_rejects_garbage() {
        assert!(read_records(&b"field x\nn 16\nL 1\nt 0\n1 2\n"[..], 0.0).is_err());
        assert!(read_records(&b"hello\n"[..], 0.0).is_err());
    }
}
