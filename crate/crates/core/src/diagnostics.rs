//! Energies, norm tables, conservation and scaling reports, and the time
//! series written to disk.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy::CurveHandle;
use crate::cubic::{compute_g, dt_commutator, Unknown};
use crate::error::{Error, Result};
use crate::evolution::{RunConfig, Trajectory};
use crate::flow::{constraint_residual, AuxQuantities, SolveTrace, WaveState};
use crate::grid::{Field, Norms};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Norms recorded with every snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub zeta_alpha_minus_1: Norms,
    pub u: Norms,
    pub w: Norms,
    /// `‖Λθ_k‖_{L²}`, `k = 0..=s`.
    pub lambda_theta: Vec<f64>,
    pub b_linf: f64,
    pub a_minus_1_linf: f64,
    pub at_over_a_linf: f64,
    /// `‖G₁ + G₂‖_{L²}`.
    pub g_l2: f64,
    /// `‖θ − 2(ζ − α)‖_{L²}`.
    pub theta_gap: f64,
}

/// Energies and norms at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    pub t: f64,
    pub e_theta: Vec<Complex64>,
    pub e_sigma: Vec<Complex64>,
    /// `ℰ_s`, the sum of the real parts.
    pub e_total: f64,
    pub norms: NormTable,
    /// `(‖(I − H)(ζ̄ − α)‖, ‖(I − H)ū‖)`.
    pub constraint: (f64, f64),
    pub solves: Vec<SolveTrace>,
}

impl EnergySnapshot {
    /// Largest `|Im E|/(1 + |Re E|)` over all energies.
    pub fn realness_defect(&self) -> f64 {
        self.e_theta
            .iter()
            .chain(&self.e_sigma)
            .map(|e| e.im.abs() / (1.0 + e.re.abs()))
            .fold(0.0, f64::max)
    }
}

/// `D_tf_k` for `f_k = ∂_α^k f`.
fn dt_of_kth(aux: &AuxQuantities, f: &Field, dt_f: &Field, k: u32) -> Field {
    &dt_f.deriv(k) + &dt_commutator(&aux.b, f, k)
}

/// `E_k = ∫|D_tf_k|²/A + i∫f_k∂_αf̄_k` for `f = θ` or `f = σ`.
pub fn energy_k(aux: &AuxQuantities, k: u32, which: Unknown) -> Complex64 {
    let (f, dt_f) = match which {
        Unknown::Theta => (&aux.theta_alt, &aux.sigma),
        Unknown::Sigma => (&aux.sigma, &aux.dt_sigma),
    };
    let fk = f.deriv(k);
    let dfk = dt_of_kth(aux, f, dt_f, k);
    let h = fk.grid().spacing();
    let kinetic: f64 = dfk
        .samples()
        .iter()
        .zip(aux.a.samples())
        .map(|(d, a)| d.norm_sqr() / a.re)
        .sum::<f64>()
        * h;
    let pot: Complex64 = fk
        .samples()
        .iter()
        .zip(fk.deriv(1).samples())
        .map(|(a, d)| a * d.conj())
        .sum::<Complex64>()
        * h;
    Complex64::new(kinetic, 0.0) + I * pot
}

/// `ℰ_s = Σ_{k≤s} Re(E_k^θ + E_k^σ)`.
pub fn total_energy(aux: &AuxQuantities, s: u32) -> f64 {
    (0..=s)
        .map(|k| energy_k(aux, k, Unknown::Theta).re + energy_k(aux, k, Unknown::Sigma).re)
        .sum()
}

/// Builds the snapshot of `state` from its derived quantities.
pub fn energy_snapshot(
    curve: &CurveHandle,
    state: &WaveState,
    aux: &AuxQuantities,
    s: u32,
) -> Result<EnergySnapshot> {
    let e_theta: Vec<Complex64> = (0..=s).map(|k| energy_k(aux, k, Unknown::Theta)).collect();
    let e_sigma: Vec<Complex64> = (0..=s).map(|k| energy_k(aux, k, Unknown::Sigma)).collect();
    let e_total = e_theta.iter().chain(&e_sigma).map(|e| e.re).sum();
    let (g1, g2) = compute_g(curve, state, aux)?;
    let norms = NormTable {
        zeta_alpha_minus_1: state.zeta_offset.deriv(1).norms(s),
        u: state.u.norms(s),
        w: aux.w.norms(s),
        lambda_theta: (0..=s).map(|k| aux.theta_alt.deriv(k).norms(0).lambda_l2).collect(),
        b_linf: aux.b.linf(),
        a_minus_1_linf: aux.a_minus_1.linf(),
        at_over_a_linf: aux.at_over_a.linf(),
        g_l2: (&g1 + &g2).l2(),
        theta_gap: (&aux.theta - &state.zeta_offset.scale_re(2.0)).l2(),
    };
    Ok(EnergySnapshot {
        t: state.t,
        e_theta,
        e_sigma,
        e_total,
        norms,
        constraint: constraint_residual(curve, state),
        solves: aux.solves.clone(),
    })
}

/// Energy drift of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub epsilon: f64,
    pub e0: f64,
    /// `max_t |ℰ_s(t) − ℰ_s(0)|`.
    pub max_drift: f64,
    pub relative_drift: f64,
    pub t_of_max: f64,
}

/// Drift report from `(t, ℰ_s)` samples.
pub fn conservation_from_series(epsilon: f64, series: &[(f64, f64)]) -> Result<ConservationReport> {
    if series.len() < 2 {
        return Err(Error::Input("conservation report needs at least two snapshots".into()));
    }
    let e0 = series[0].1;
    let (mut max_drift, mut t_of_max) = (0.0, series[0].0);
    for &(t, e) in series {
        let d = (e - e0).abs();
        if d > max_drift {
            max_drift = d;
            t_of_max = t;
        }
    }
    let relative_drift = if e0 != 0.0 { max_drift / e0.abs() } else { 0.0 };
    Ok(ConservationReport {
        epsilon,
        e0,
        max_drift,
        relative_drift,
        t_of_max,
    })
}

pub fn conservation_report(traj: &Trajectory) -> Result<ConservationReport> {
    conservation_from_series(traj.config.epsilon, &traj.energies())
}

/// The configuration with every field that may differ between paired runs
/// cleared.
fn shape_of(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        epsilon: 1.0,
        constraint_ceiling: None,
        checkpoint_path: None,
        series_path: None,
        ..cfg.clone()
    }
}

/// Whether two configurations differ at most in amplitude and output paths.
pub fn same_shape(a: &RunConfig, b: &RunConfig) -> bool {
    shape_of(a) == shape_of(b)
}

/// Paired drift ratio `drift(ε)/drift(ε/2)`; quartic scaling gives 16.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDrift {
    pub large: ConservationReport,
    pub small: ConservationReport,
    pub ratio: f64,
    /// `log(ratio)/log(ε_large/ε_small)`.
    pub exponent: f64,
}

pub fn paired_drift(large: &Trajectory, small: &Trajectory) -> Result<PairedDrift> {
    if !same_shape(&large.config, &small.config) {
        return Err(Error::Input("paired runs differ in more than epsilon".into()));
    }
    paired_from_reports(conservation_report(large)?, conservation_report(small)?)
}

pub fn paired_from_reports(large: ConservationReport, small: ConservationReport) -> Result<PairedDrift> {
    if !(large.epsilon > small.epsilon && small.epsilon > 0.0) {
        return Err(Error::Input("paired runs need two distinct positive amplitudes".into()));
    }
    let ratio = large.max_drift / small.max_drift;
    let exponent = ratio.ln() / (large.epsilon / small.epsilon).ln();
    Ok(PairedDrift {
        large,
        small,
        ratio,
        exponent,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Amplitude-dependent quantities of one run at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    pub epsilon: f64,
    pub b: f64,
    pub a_minus_1: f64,
    pub at_over_a: f64,
    pub g: f64,
    pub theta_gap: f64,
    /// Energy drift over the whole run; absent when not measured.
    pub drift: Option<f64>,
}

impl ScalingSample {
    /// Takes the snapshot closest to `t`.
    pub fn from_trajectory(traj: &Trajectory, t: f64) -> Result<ScalingSample> {
        let snap = traj
            .checkpoints
            .iter()
            .map(|c| &c.energy)
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .ok_or_else(|| Error::Input("empty trajectory".into()))?;
        let drift = conservation_report(traj).ok().map(|r| r.max_drift);
        Ok(ScalingSample::from_snapshot(traj.config.epsilon, snap, drift))
    }

    pub fn from_snapshot(epsilon: f64, snap: &EnergySnapshot, drift: Option<f64>) -> ScalingSample {
        ScalingSample {
            epsilon,
            b: snap.norms.b_linf,
            a_minus_1: snap.norms.a_minus_1_linf,
            at_over_a: snap.norms.at_over_a_linf,
            g: snap.norms.g_l2,
            theta_gap: snap.norms.theta_gap,
            drift,
        }
    }
}

/// Fitted exponents; the expected values are 2, 2, 2, 3, 2 and 4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub epsilons: Vec<f64>,
    pub b: f64,
    pub a_minus_1: f64,
    pub at_over_a: f64,
    pub g: f64,
    pub theta_gap: f64,
    pub drift: Option<f64>,
}

impl ScalingReport {
    /// `(name, fitted, expected)` rows.
    pub fn rows(&self) -> Vec<(&'static str, f64, f64)> {
        let mut rows = vec![
            ("b", self.b, 2.0),
            ("a_minus_1", self.a_minus_1, 2.0),
            ("at_over_a", self.at_over_a, 2.0),
            ("g", self.g, 3.0),
            ("theta_gap", self.theta_gap, 2.0),
        ];
        if let Some(d) = self.drift {
            rows.push(("drift", d, 4.0));
        }
        rows
    }
}

pub fn scaling_report(samples: &[ScalingSample]) -> Result<ScalingReport> {
    let mut eps: Vec<f64> = samples.iter().map(|s| s.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 2 {
        return Err(Error::Input("scaling report needs at least two amplitudes".into()));
    }
    let fit = |f: &dyn Fn(&ScalingSample) -> f64| {
        let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.epsilon, f(s))).collect();
        log_log_slope(&pts).unwrap_or(f64::NAN)
    };
    let drift = if samples.iter().all(|s| s.drift.is_some()) {
        Some(fit(&|s| s.drift.unwrap_or(0.0)))
    } else {
        None
    };
    Ok(ScalingReport {
        epsilons: eps,
        b: fit(&|s| s.b),
        a_minus_1: fit(&|s| s.a_minus_1),
        at_over_a: fit(&|s| s.at_over_a),
        g: fit(&|s| s.g),
        theta_gap: fit(&|s| s.theta_gap),
        drift,
    })
}

/// Column names of the series CSV for energies up to order `s`.
pub fn series_header(s: u32) -> Vec<String> {
    let mut h = vec!["t".to_string(), "e_total".to_string()];
    for k in 0..=s {
        h.push(format!("e_theta_{k}_re"));
        h.push(format!("e_theta_{k}_im"));
    }
    for k in 0..=s {
        h.push(format!("e_sigma_{k}_re"));
        h.push(format!("e_sigma_{k}_im"));
    }
    for name in ["zeta_alpha_minus_1", "u", "w"] {
        h.push(format!("{name}_l2"));
        h.push(format!("{name}_linf"));
        for k in 1..=s {
            h.push(format!("{name}_h{k}"));
        }
    }
    for k in 0..=s {
        h.push(format!("lambda_theta_{k}"));
    }
    for name in [
        "b_linf",
        "a_minus_1_linf",
        "at_over_a_linf",
        "g_l2",
        "theta_gap",
        "constraint_zeta",
        "constraint_u",
    ] {
        h.push(name.to_string());
    }
    h
}

fn series_row(snap: &EnergySnapshot, s: u32) -> Vec<f64> {
    let mut r = vec![snap.t, snap.e_total];
    for e in snap.e_theta.iter().chain(&snap.e_sigma) {
        r.push(e.re);
        r.push(e.im);
    }
    for n in [&snap.norms.zeta_alpha_minus_1, &snap.norms.u, &snap.norms.w] {
        r.push(n.l2);
        r.push(n.linf);
        r.extend((1..=s as usize).map(|k| n.h.get(k).copied().unwrap_or(f64::NAN)));
    }
    r.extend(&snap.norms.lambda_theta);
    r.extend([
        snap.norms.b_linf,
        snap.norms.a_minus_1_linf,
        snap.norms.at_over_a_linf,
        snap.norms.g_l2,
        snap.norms.theta_gap,
        snap.constraint.0,
        snap.constraint.1,
    ]);
    r
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Serialize, Deserialize)]
struct SidecarHeader {
    config: RunConfig,
    config_hash: String,
    steps: usize,
    terminated_early: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SidecarLine {
    t: f64,
    solves: Vec<SolveTrace>,
}

/// Path of the JSONL sidecar of a series CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("jsonl")
}

/// Writes the CSV series and its JSONL sidecar.
pub fn write_series(traj: &Trajectory, path: &Path) -> Result<()> {
    let s = traj.config.s_track;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(series_header(s)).map_err(|e| csv_error(path, e))?;
    for c in &traj.checkpoints {
        let row: Vec<String> = series_row(&c.energy, s).into_iter().map(fmt_f64).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let mut out = Vec::new();
    let header = SidecarHeader {
        config: traj.config.clone(),
        config_hash: traj.config_hash.clone(),
        steps: traj.steps,
        terminated_early: traj.terminated_early.clone(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes")).expect("in-memory write");
    for c in &traj.checkpoints {
        let line = SidecarLine {
            t: c.energy.t,
            solves: c.energy.solves.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&line).expect("line serializes")).expect("in-memory write");
    }
    std::fs::write(&side, out).map_err(|e| Error::io(&side, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// A series read back from disk.
#[derive(Clone, Debug)]
pub struct Series {
    pub path: PathBuf,
    pub config: RunConfig,
    pub config_hash: String,
    pub terminated_early: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn energies(&self) -> Vec<(f64, f64)> {
        match (self.column("t"), self.column("e_total")) {
            (Some(t), Some(e)) => t.into_iter().zip(e).collect(),
            _ => Vec::new(),
        }
    }

    /// Named values of the row closest to `t`.
    pub fn row_near(&self, t: f64) -> Option<BTreeMap<&str, f64>> {
        let ts = self.column("t")?;
        let (j, _) = ts
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?;
        Some(self.columns.iter().map(String::as_str).zip(self.rows[j].iter().copied()).collect())
    }
}

/// Reads a series CSV and its sidecar.
pub fn read_series(path: &Path) -> Result<Series> {
    let side = sidecar_path(path);
    let file = std::fs::File::open(&side).map_err(|e| Error::io(&side, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::parse(&side, "empty sidecar"))?
        .map_err(|e| Error::io(&side, e))?;
    let header: SidecarHeader = serde_json::from_str(&first).map_err(|e| Error::parse(&side, e.to_string()))?;
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(|e| csv_error(path, e))?;
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected = series_header(header.config.s_track);
    if columns != expected {
        return Err(Error::parse(path, "columns do not match the series schema"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, format!("line {}: {e}", rec.position().map_or(0, |p| p.line()))))?;
        rows.push(row);
    }
    Ok(Series {
        path: path.to_path_buf(),
        config: header.config,
        config_hash: header.config_hash,
        terminated_early: header.terminated_early,
        columns,
        rows,
    })
}

/// Regression pins, versioned with the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub version: u32,
    /// Upper bound on `|Δℰ_s|/ℰ_s(0)` for the default run.
    pub relative_drift_pin: f64,
    pub paired_ratio_min: f64,
    pub paired_ratio_max: f64,
    pub slope_tolerance: f64,
}

impl Expectations {
    pub fn builtin() -> Expectations {
        serde_json::from_str(include_str!("../expectations.json")).expect("bundled expectations parse")
    }

    pub fn load(path: &Path) -> Result<Expectations> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Re-pins the drift threshold at twice the measured drift and bumps the
    /// version.
    pub fn recalibrated(&self, measured_relative_drift: f64) -> Expectations {
        Expectations {
            version: self.version + 1,
            relative_drift_pin: 2.0 * measured_relative_drift,
            ..self.clone()
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("expectations serialize") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
