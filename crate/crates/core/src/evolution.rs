//! Initial data, the laboratory-time right-hand side, RK4 stepping and the
//! run loop.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{energy_snapshot, EnergySnapshot};
use crate::error::{Error, Result};
use crate::flow::{compute_a_minus_1_fast, compute_aux, compute_b, compute_w, constraint_residual, SolverSettings, WaveState};
use crate::grid::{read_records, write_records, Field, FieldRecord, Grid, GridSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Shape of the initial surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `exp(−α²/2w²)·e^{ik₀α}`.
    GaussianPacket { width: f64 },
    /// `sech(α/w)·e^{ik₀α}`.
    SechPacket { width: f64 },
    /// `e^{ik₀α}`.
    SingleMode,
    /// Gaussian envelope over `modes` neighbours of the carrier with seeded
    /// random amplitudes and phases.
    RandomPacket { width: f64, modes: usize },
    /// `zeta_offset` and `u` records of a field dump, used verbatim.
    File { path: PathBuf },
}

/// Everything that determines a run. Serialized into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub epsilon: f64,
    pub profile: Profile,
    /// Carrier mode number `m`; the wavenumber is `m/L`.
    pub carrier_wavenumber: u32,
    #[serde(default = "defaults::s_track")]
    pub s_track: u32,
    pub t_end: f64,
    #[serde(default = "defaults::dt_safety")]
    pub dt_safety: f64,
    #[serde(default = "defaults::solver_tol")]
    pub solver_tol: f64,
    /// Defaults to `1e−7·ε`.
    #[serde(default)]
    pub constraint_ceiling: Option<f64>,
    /// Time between energy snapshots.
    #[serde(default = "defaults::output_interval")]
    pub output_interval: f64,
    /// Re-project onto the holomorphic class every this many steps; 0 never.
    #[serde(default = "defaults::reproject_every")]
    pub reproject_every: u32,
    /// Strength of the exponential filter applied with dealiasing.
    #[serde(default)]
    pub filter_strength: f64,
    #[serde(default = "defaults::filter_order")]
    pub filter_order: i32,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default)]
    pub series_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn s_track() -> u32 {
        4
    }
    pub fn dt_safety() -> f64 {
        0.5
    }
    pub fn solver_tol() -> f64 {
        1e-11
    }
    pub fn output_interval() -> f64 {
        1.0
    }
    pub fn reproject_every() -> u32 {
        1
    }
    pub fn filter_order() -> i32 {
        36
    }
}

impl RunConfig {
    /// The reference configuration used by the acceptance suite.
    pub fn default_run() -> RunConfig {
        RunConfig {
            grid: GridSpec {
                n: 512,
                length: 8.0,
                dealias_fraction: 1.0 / 3.0,
            },
            epsilon: 1e-2,
            profile: Profile::SechPacket { width: 0.6 },
            carrier_wavenumber: 8,
            s_track: 4,
            t_end: 50.0,
            dt_safety: 0.5,
            solver_tol: 1e-11,
            constraint_ceiling: None,
            output_interval: 1.0,
            reproject_every: 1,
            filter_strength: 0.0,
            filter_order: 36,
            checkpoint_path: None,
            series_path: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be nonnegative");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be nonnegative");
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety must lie in (0, 1]");
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol must be positive");
        }
        if !(self.output_interval > 0.0) {
            return bad("output_interval must be positive");
        }
        if let Some(c) = self.constraint_ceiling {
            if !(c > 0.0) {
                return bad("constraint_ceiling must be positive");
            }
        }
        if self.filter_strength < 0.0 {
            return bad("filter_strength must be nonnegative");
        }
        match &self.profile {
            Profile::GaussianPacket { width } | Profile::SechPacket { width } if !(*width > 0.0) => {
                bad("profile width must be positive")
            }
            Profile::RandomPacket { width, .. } if !(*width > 0.0) => bad("profile width must be positive"),
            _ => Ok(()),
        }
    }

    pub fn ceiling(&self) -> f64 {
        self.constraint_ceiling.unwrap_or(1e-7 * self.epsilon)
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            tol: self.solver_tol,
            ..SolverSettings::default()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => Error::Config(format!("{}: {e}", path.display())),
            _ => Error::parse(path, e.to_string()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// `‖u‖_{H^{s+1/2}} + ‖X‖_{Ḣ^{1/2}} + ‖∂X‖_{H^s}`, the unweighted part of the
/// smallness norm.
pub fn epsilon_norm(state: &WaveState, s: u32) -> f64 {
    let u = sobolev(&state.u, s as f64 + 0.5);
    let x = state.zeta_offset.norms(0).lambda_l2;
    let dx = sobolev(&state.zeta_offset.deriv(1), s as f64);
    u + x + dx
}

fn sobolev(f: &Field, r: f64) -> f64 {
    let modes = f.modes();
    let n = f.len() as f64;
    let w = f.spec().period() / (n * n);
    let sum: f64 = modes
        .iter()
        .zip(f.grid().wavenumbers())
        .map(|(z, k)| z.norm_sqr() * (1.0 + k * k).powf(r))
        .sum();
    (sum * w).sqrt()
}

fn positive_part(f: &Field) -> Field {
    f.apply_multiplier(|_, k| if k > 0.0 { ONE } else { ZERO })
}

fn trial_surface(cfg: &RunConfig, grid: &std::sync::Arc<Grid>) -> Field {
    let k0 = cfg.carrier_wavenumber as f64 / cfg.grid.length;
    let carrier = |a: f64| Complex64::new(0.0, k0 * a).exp();
    let f = match &cfg.profile {
        Profile::GaussianPacket { width } => {
            Field::from_fn(grid, |a| carrier(a) * (-(a * a) / (2.0 * width * width)).exp())
        }
        Profile::SechPacket { width } => Field::from_fn(grid, |a| carrier(a) / (a / width).cosh()),
        Profile::SingleMode => Field::from_fn(grid, carrier),
        Profile::RandomPacket { width, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let terms: Vec<(f64, f64, f64)> = (0..*modes)
                .map(|j| {
                    let k = (cfg.carrier_wavenumber as f64 + j as f64) / cfg.grid.length;
                    (k, rng.random::<f64>(), rng.random::<f64>() * std::f64::consts::TAU)
                })
                .collect();
            Field::from_fn(grid, |a| {
                let env = (-(a * a) / (2.0 * width * width)).exp();
                terms
                    .iter()
                    .map(|&(k, amp, ph)| Complex64::from_polar(amp, k * a + ph))
                    .sum::<Complex64>()
                    * env
            })
        }
        Profile::File { .. } => unreachable!("file profile is loaded, not synthesized"),
    };
    positive_part(&f.dealias())
}

/// Projects `(ζ − α, u)` onto the holomorphic class of its own curve once.
pub fn reproject(state: &WaveState) -> Result<WaveState> {
    let c = state.curve()?;
    let x = c.holomorphic_part(&state.zeta_offset.conj()).conj();
    let u = c.holomorphic_part(&state.u.conj()).conj();
    Ok(WaveState {
        t: state.t,
        zeta_offset: x,
        u,
    })
}

/// Builds admissible initial data for `cfg`.
pub fn make_initial_data(cfg: &RunConfig) -> Result<WaveState> {
    cfg.validate()?;
    let grid = Grid::new(cfg.grid)?;
    if let Profile::File { path } = &cfg.profile {
        return load_state(path, cfg);
    }
    if cfg.epsilon == 0.0 {
        return Ok(WaveState::equilibrium(&grid));
    }
    let x0 = trial_surface(cfg, &grid);
    let u0 = x0.half_deriv().scale(Complex64::new(0.0, -1.0));
    let mut state = WaveState {
        t: 0.0,
        zeta_offset: x0,
        u: u0,
    };
    let ceiling = cfg.ceiling();
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let eps = epsilon_norm(&state, cfg.s_track);
        let lam = cfg.epsilon / eps;
        state.zeta_offset = state.zeta_offset.scale_re(lam);
        state.u = state.u.scale_re(lam);
        state = reproject(&state)?;
        let c = state.curve()?;
        let (rz, ru) = constraint_residual(&c, &state);
        let eps = epsilon_norm(&state, cfg.s_track);
        worst = rz.max(ru);
        if worst < ceiling && (eps / cfg.epsilon - 1.0).abs() < 1e-3 {
            return Ok(state);
        }
    }
    Err(Error::ConstraintCeiling {
        residual: worst,
        ceiling,
    })
}

fn load_state(path: &Path, cfg: &RunConfig) -> Result<WaveState> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let recs = read_records(std::io::BufReader::new(file), cfg.grid.dealias_fraction)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let find = |name: &str| {
        recs.iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::parse(path, format!("missing record '{name}'")))
    };
    let x = find("zeta_offset")?;
    let u = find("u")?;
    if x.field.spec() != &cfg.grid || u.field.spec() != &cfg.grid {
        return Err(Error::parse(path, "grid does not match configuration"));
    }
    Ok(WaveState {
        t: x.t,
        zeta_offset: x.field.clone(),
        u: u.field.clone(),
    })
}

/// Options of the right-hand side and the stepper.
#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub solver: SolverSettings,
    pub filter_strength: f64,
    pub filter_order: i32,
}

impl StepOptions {
    pub fn from_config(cfg: &RunConfig) -> StepOptions {
        StepOptions {
            solver: cfg.solver(),
            filter_strength: cfg.filter_strength,
            filter_order: cfg.filter_order,
        }
    }

    fn smooth(&self, f: &Field) -> Field {
        f.dealias_filtered(self.filter_strength, self.filter_order)
    }
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            solver: SolverSettings::default(),
            filter_strength: 0.0,
            filter_order: 36,
        }
    }
}

/// `∂_t(ζ − α) = u − bζ_α`, `∂_t u = w − b u_α` with `b`, `A` recomputed.
pub fn rhs(state: &WaveState, opts: &StepOptions) -> Result<(Field, Field)> {
    let c = state.curve()?;
    let b = compute_b(&c, &state.u, &opts.solver)?.f;
    let (a_minus_1, _) = compute_a_minus_1_fast(&c, &state.u, &opts.solver)?;
    let w = compute_w(&c, &a_minus_1);
    let dz = &state.u - &(&b * c.zeta_alpha());
    let du = &w - &(&b * &state.u.deriv(1));
    let dz = opts.smooth(&dz);
    let du = opts.smooth(&du);
    dz.check_finite("rhs")?;
    du.check_finite("rhs")?;
    Ok((dz, du))
}

/// One classical RK4 step of `d(x, u)/dt = f(x, u)`.
pub fn rk4<F>(x: &Field, u: &Field, dt: f64, mut f: F) -> Result<(Field, Field)>
where
    F: FnMut(&Field, &Field) -> Result<(Field, Field)>,
{
    let axpy = |a: &Field, s: f64, b: &Field| a.zip_map(b, |p, q| p + q * s);
    let (k1x, k1u) = f(x, u)?;
    let (k2x, k2u) = f(&axpy(x, 0.5 * dt, &k1x), &axpy(u, 0.5 * dt, &k1u))?;
    let (k3x, k3u) = f(&axpy(x, 0.5 * dt, &k2x), &axpy(u, 0.5 * dt, &k2u))?;
    let (k4x, k4u) = f(&axpy(x, dt, &k3x), &axpy(u, dt, &k3u))?;
    let comb = |y: &Field, k1: &Field, k2: &Field, k3: &Field, k4: &Field| {
        let n = y.len();
        let mut out = y.clone();
        let s = out.samples_mut();
        for j in 0..n {
            s[j] += (k1.samples()[j] + 2.0 * k2.samples()[j] + 2.0 * k3.samples()[j] + k4.samples()[j]) * (dt / 6.0);
        }
        out
    };
    Ok((comb(x, &k1x, &k2x, &k3x, &k4x), comb(u, &k1u, &k2u, &k3u, &k4u)))
}

/// One RK4 step of the full system.
///
/// ```
/// use holowave::evolution::{step_rk4, StepOptions};
/// use holowave::flow::WaveState;
/// use holowave::grid::make_grid;
/// let g = make_grid(32, 1.0, 1.0 / 3.0).unwrap();
/// let s0 = WaveState::equilibrium(&g);
/// let s1 = step_rk4(&s0, 0.1, &StepOptions::default()).unwrap();
/// assert_eq!(s1.zeta_offset, s0.zeta_offset);
/// assert_eq!(s1.u, s0.u);
/// ```
pub fn step_rk4(state: &WaveState, dt: f64, opts: &StepOptions) -> Result<WaveState> {
    if !(dt > 0.0) {
        return Err(Error::Input("time step must be positive".into()));
    }
    let t = state.t;
    let (x, u) = rk4(&state.zeta_offset, &state.u, dt, |x, u| {
        rhs(
            &WaveState {
                t,
                zeta_offset: x.clone(),
                u: u.clone(),
            },
            opts,
        )
    })?;
    Ok(WaveState {
        t: state.t + dt,
        zeta_offset: x,
        u,
    })
}

/// The linearization about equilibrium: `∂_t X = u`, `∂_t u = i∂_α X`.
pub fn linear_rhs(x: &Field, u: &Field) -> Result<(Field, Field)> {
    Ok((u.clone(), x.deriv(1).scale(Complex64::new(0.0, 1.0))))
}

/// Exact solution of [`linear_rhs`] for the mode `e^{ikα}`, `k > 0`.
pub fn linear_mode(grid: &std::sync::Arc<Grid>, mode: u32, t: f64) -> (Field, Field) {
    let k = mode as f64 / grid.spec().length;
    let om = k.sqrt();
    let x = Field::from_fn(grid, |a| Complex64::new(0.0, k * a - om * t).exp());
    let u = x.scale(Complex64::new(0.0, -om));
    (x, u)
}

/// Time step for the current state.
pub fn time_step(cfg: &RunConfig, a: &Field, b: &Field) -> f64 {
    let amax = a.linf();
    let bmax = b.linf();
    cfg.dt_safety * cfg.grid.spacing() / 1.0f64.max(amax).max(bmax)
}

/// One stored point of a trajectory.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: WaveState,
    pub energy: EnergySnapshot,
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: RunConfig,
    pub config_hash: String,
    pub checkpoints: Vec<Checkpoint>,
    pub steps: usize,
    /// Largest constraint residual observed before a re-projection.
    pub max_drift: f64,
    /// Constraint residual after the first step.
    pub first_drift: f64,
    pub terminated_early: Option<String>,
    pub wall_time: f64,
}

impl Trajectory {
    /// Ratio of the largest per-step constraint residual to the first one.
    pub fn constraint_growth(&self) -> f64 {
        if self.first_drift > 0.0 {
            self.max_drift / self.first_drift
        } else if self.max_drift == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }

    pub fn energies(&self) -> Vec<(f64, f64)> {
        self.checkpoints.iter().map(|c| (c.state.t, c.energy.e_total)).collect()
    }
}

fn snapshot(state: &WaveState, cfg: &RunConfig) -> Result<EnergySnapshot> {
    let c = state.curve()?;
    let aux = compute_aux(&c, state, &cfg.solver())?;
    energy_snapshot(&c, state, &aux, cfg.s_track)
}

/// Writes `zeta_offset` and `u` with the config hash as a header comment.
pub fn write_checkpoint(path: &Path, state: &WaveState, config_hash: &str) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(format!("# config {config_hash}\n").as_bytes());
    let recs = [
        FieldRecord {
            name: "zeta_offset".into(),
            t: state.t,
            field: state.zeta_offset.clone(),
        },
        FieldRecord {
            name: "u".into(),
            t: state.t,
            field: state.u.clone(),
        },
    ];
    write_records(&mut buf, &recs).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Integrates `cfg` from its initial data to `t_end`.
pub fn run(cfg: &RunConfig) -> Result<Trajectory> {
    let start = Instant::now();
    let state = make_initial_data(cfg)?;
    run_from(cfg, state, start)
}

/// Integrates from a given state.
pub fn run_from(cfg: &RunConfig, mut state: WaveState, start: Instant) -> Result<Trajectory> {
    cfg.validate()?;
    let opts = StepOptions::from_config(cfg);
    let hash = cfg.hash();
    let mut traj = Trajectory {
        config: cfg.clone(),
        config_hash: hash.clone(),
        checkpoints: vec![Checkpoint {
            energy: snapshot(&state, cfg)?,
            state: state.clone(),
        }],
        steps: 0,
        max_drift: 0.0,
        first_drift: 0.0,
        terminated_early: None,
        wall_time: 0.0,
    };
    let ceiling = cfg.ceiling();
    let mut next_out = state.t + cfg.output_interval;
    let t_end = state.t + cfg.t_end;
    let eps_t = 1e-12 * t_end.max(1.0);
    while state.t < t_end - eps_t {
        let step = (|| -> Result<WaveState> {
            let c = state.curve()?;
            let b = compute_b(&c, &state.u, &opts.solver)?.f;
            let (a_minus_1, _) = compute_a_minus_1_fast(&c, &state.u, &opts.solver)?;
            let mut dt = time_step(cfg, &a_minus_1.add_const(ONE), &b);
            let target = next_out.min(t_end);
            if state.t + dt > target - eps_t {
                dt = target - state.t;
            } else if state.t + 2.0 * dt > target {
                dt = 0.5 * (target - state.t);
            }
            let mut s = step_rk4(&state, dt, &opts)?;
            if (target - s.t).abs() <= eps_t {
                s.t = target;
            }
            Ok(s)
        })();
        let mut next = match step {
            Ok(s) => s,
            Err(e) if e.is_scientific() => {
                traj.terminated_early = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        traj.steps += 1;
        if cfg.reproject_every > 0 && traj.steps % cfg.reproject_every as usize == 0 {
            let drift = match next.curve() {
                Ok(c) => {
                    let (rz, ru) = constraint_residual(&c, &next);
                    rz.max(ru)
                }
                Err(e) => {
                    traj.terminated_early = Some(e.to_string());
                    break;
                }
            };
            if traj.steps == cfg.reproject_every as usize {
                traj.first_drift = drift;
            }
            traj.max_drift = traj.max_drift.max(drift);
            next = match reproject(&next) {
                Ok(s) => s,
                Err(e) => {
                    traj.terminated_early = Some(e.to_string());
                    break;
                }
            };
        }
        state = next;
        if state.t >= next_out - eps_t || state.t >= t_end - eps_t {
            let energy = match snapshot(&state, cfg) {
                Ok(e) => e,
                Err(e) if e.is_scientific() => {
                    traj.terminated_early = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            };
            let breach = energy.constraint.0.max(energy.constraint.1);
            traj.checkpoints.push(Checkpoint {
                state: state.clone(),
                energy,
            });
            if breach > ceiling {
                traj.terminated_early = Some(
                    Error::ConstraintCeiling {
                        residual: breach,
                        ceiling,
                    }
                    .to_string(),
                );
                break;
            }
            next_out += cfg.output_interval;
        }
    }
    if let Some(path) = &cfg.checkpoint_path {
        write_checkpoint(path, &state, &hash)?;
    }
    traj.wall_time = start.elapsed().as_secs_f64();
    Ok(traj)
}
