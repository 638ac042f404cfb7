//! Command-line front end.
//!
//! Exit codes: 0 success, 1 scientific failure, 2 usage or invalid
//! configuration, 3 file-system or parse failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::diagnostics::{
    conservation_from_series, paired_from_reports, read_series, scaling_report, write_series, ConservationReport,
    Expectations, ScalingSample, Series,
};
use crate::error::{Error, Result};
use crate::evolution::{run, write_checkpoint, RunConfig, Trajectory};
use crate::identity::quad::PvQuadConfig;
use crate::identity::{certify, default_grid, randomized_transition, write_certification, CertThresholds};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCIENTIFIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "holowave", version, about = "Water waves in holomorphic coordinates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, PartialEq)]
pub enum Command {
    /// Run one configuration and write its time series.
    Simulate {
        config: PathBuf,
        /// Output directory; the series goes to `series.csv` unless the
        /// configuration names a path.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one configuration at several amplitudes.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Certify the closed-form identities on an (α, t) grid.
    #[command(alias = "verify-identities")]
    Verify {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        alpha: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = "certification.csv")]
        out: PathBuf,
    },
    /// Merge series files into conservation and scaling reports.
    Report {
        #[arg(required = true)]
        series: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Time at which amplitude scalings are read off.
        #[arg(long, default_value_t = 10.0)]
        at: f64,
        /// Rewrites this expectations file from the first series' drift.
        #[arg(long)]
        recalibrate: Option<PathBuf>,
    },
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        Error::InvalidGrid(_) | Error::Config(_) | Error::Input(_) | Error::GridMismatch => EXIT_USAGE,
        _ if e.is_scientific() => EXIT_SCIENTIFIC,
        _ => EXIT_SCIENTIFIC,
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    status: &'a str,
    exit_code: i32,
    message: String,
}

fn report_error<W: Write>(err: &mut W, e: &Error) -> i32 {
    let code = exit_code(e);
    let status = match code {
        EXIT_SCIENTIFIC => "scientific-failure",
        EXIT_USAGE => "usage",
        _ => "io",
    };
    let r = ErrorReport {
        status,
        exit_code: code,
        message: e.to_string(),
    };
    let _ = writeln!(err, "{}", serde_json::to_string(&r).expect("report serializes"));
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T, O, E>(args: I, out: &mut O, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    O: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => report_error(err, &e),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs a parsed command and returns its exit code.
pub fn dispatch<O: Write, E: Write>(cmd: &Command, out: &mut O, err: &mut E) -> Result<i32> {
    match cmd {
        Command::Simulate { config, out: dir } => {
            let cfg = RunConfig::load(config)?;
            ensure_dir(dir)?;
            let series = cfg.series_path.clone().unwrap_or_else(|| dir.join("series.csv"));
            let traj = run(&cfg)?;
            write_series(&traj, &series)?;
            let _ = writeln!(out, "{}", summary_line(&traj, &series));
            finish(&traj, err)
        }
        Command::Sweep {
            config,
            epsilon,
            out: dir,
            jobs,
        } => {
            let base = RunConfig::load(config)?;
            if epsilon.is_empty() {
                return Err(Error::Input("empty epsilon list".into()));
            }
            ensure_dir(dir)?;
            let mut eps = epsilon.clone();
            eps.sort_by(|a, b| b.total_cmp(a));
            eps.dedup();
            let configs: Vec<RunConfig> = eps
                .iter()
                .map(|&e| RunConfig {
                    epsilon: e,
                    series_path: None,
                    checkpoint_path: None,
                    ..base.clone()
                })
                .collect();
            for c in &configs {
                c.validate()?;
            }
            let jobs = jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1);
            let results = run_parallel(&configs, jobs);
            let mut code = EXIT_OK;
            let mut paths = Vec::new();
            for (j, res) in results.into_iter().enumerate() {
                let traj = res?;
                let path = dir.join(format!("series_{j}.csv"));
                write_series(&traj, &path)?;
                let _ = writeln!(out, "{}", summary_line(&traj, &path));
                if let Some(why) = &traj.terminated_early {
                    code = scientific_report(err, why);
                }
                paths.push(path);
            }
            let series = paths.iter().map(|p| read_series(p)).collect::<Result<Vec<_>>>()?;
            emit_report(&series, dir, base.t_end.min(10.0))?;
            Ok(code)
        }
        Command::Verify { alpha, t, tol, out: path } => {
            let (da, dt) = default_grid();
            let alphas = alpha.clone().unwrap_or(da);
            let ts = t.clone().unwrap_or(dt);
            if !(*tol > 0.0) {
                return Err(Error::Input("tolerance must be positive".into()));
            }
            let thr = CertThresholds {
                decouple: *tol,
                ..CertThresholds::default()
            };
            let mut rows = certify(&alphas, &ts, &PvQuadConfig::default(), &thr)?;
            let worst = randomized_transition(0, 100)?;
            rows.push(crate::identity::CertRow {
                identity: "transition_random_100".into(),
                alpha: f64::NAN,
                t: f64::NAN,
                computed_re: worst,
                computed_im: 0.0,
                expected_re: 0.0,
                expected_im: 0.0,
                abs_err: worst,
                threshold: thr.transition,
                pass: worst < thr.transition,
            });
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(dir)?;
            }
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_certification(file, &rows).map_err(|e| Error::io(path, e))?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            let _ = writeln!(out, "{} identities checked, {failed} failed -> {}", rows.len(), path.display());
            Ok(if failed == 0 {
                EXIT_OK
            } else {
                scientific_report(err, &format!("{failed} identity checks failed"))
            })
        }
        Command::Report {
            series,
            out: dir,
            at,
            recalibrate,
        } => {
            let data = series.iter().map(|p| read_series(p)).collect::<Result<Vec<_>>>()?;
            ensure_dir(dir)?;
            let text = emit_report(&data, dir, *at)?;
            let _ = write!(out, "{text}");
            if let Some(path) = recalibrate {
                let current = if path.exists() {
                    Expectations::load(path)?
                } else {
                    Expectations::builtin()
                };
                let rep = conservation_from_series(data[0].config.epsilon, &data[0].energies())?;
                current.recalibrated(rep.relative_drift).save(path)?;
                let _ = writeln!(out, "recalibrated {}", path.display());
            }
            Ok(EXIT_OK)
        }
    }
}

fn run_parallel(configs: &[RunConfig], jobs: usize) -> Vec<Result<Trajectory>> {
    let mut results: Vec<Option<Result<Trajectory>>> = (0..configs.len()).map(|_| None).collect();
    for chunk_start in (0..configs.len()).step_by(jobs) {
        let end = (chunk_start + jobs).min(configs.len());
        let chunk: Vec<Result<Trajectory>> = std::thread::scope(|s| {
            let handles: Vec<_> = configs[chunk_start..end].iter().map(|c| s.spawn(move || run(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Input("worker panicked".into()))))
                .collect()
        });
        for (j, r) in chunk.into_iter().enumerate() {
            results[chunk_start + j] = Some(r);
        }
    }
    results.into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn summary_line(traj: &Trajectory, series: &Path) -> String {
    format!(
        "epsilon {:e}: {} steps, {} snapshots, {} -> {}",
        traj.config.epsilon,
        traj.steps,
        traj.checkpoints.len(),
        traj.terminated_early.as_deref().unwrap_or("completed"),
        series.display()
    )
}

fn scientific_report<E: Write>(err: &mut E, why: &str) -> i32 {
    let r = ErrorReport {
        status: "scientific-failure",
        exit_code: EXIT_SCIENTIFIC,
        message: why.to_string(),
    };
    let _ = writeln!(err, "{}", serde_json::to_string(&r).expect("report serializes"));
    EXIT_SCIENTIFIC
}

fn finish<E: Write>(traj: &Trajectory, err: &mut E) -> Result<i32> {
    if let (Some(path), Some(last)) = (&traj.config.checkpoint_path, traj.checkpoints.last()) {
        write_checkpoint(path, &last.state, &traj.config_hash)?;
    }
    Ok(match &traj.terminated_early {
        Some(why) => scientific_report(err, why),
        None => EXIT_OK,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `report.csv`, `summary.txt` and `long.csv` into `dir` and returns
/// the summary text.
pub fn emit_report(series: &[Series], dir: &Path, at: f64) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Input("no series given".into()));
    }
    let mut reports: Vec<(usize, ConservationReport)> = Vec::new();
    for (j, s) in series.iter().enumerate() {
        if let Ok(r) = conservation_from_series(s.config.epsilon, &s.energies()) {
            reports.push((j, r));
        }
    }
    let mut csv_rows = vec![vec![
        "section".to_string(),
        "name".to_string(),
        "epsilon".to_string(),
        "value".to_string(),
        "expected".to_string(),
    ]];
    let mut text = String::from("conservation\n");
    for (j, r) in &reports {
        text += &format!(
            "  series {j}: epsilon {:e}, E0 {:e}, max drift {:e}, relative {:e} at t = {}\n",
            r.epsilon, r.e0, r.max_drift, r.relative_drift, r.t_of_max
        );
        for (name, v) in [("e0", r.e0), ("max_drift", r.max_drift), ("relative_drift", r.relative_drift)] {
            csv_rows.push(vec!["conservation".into(), name.into(), fmt(r.epsilon), fmt(v), String::new()]);
        }
    }

    let shapes_match = series
        .windows(2)
        .all(|w| crate::diagnostics::same_shape(&w[0].config, &w[1].config));
    let mut eps: Vec<f64> = series.iter().map(|s| s.config.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    text += "scaling\n";
    if eps.len() < 2 {
        text += "  needs ≥2 ε\n";
        csv_rows.push(vec![
            "scaling".into(),
            "status".into(),
            String::new(),
            "needs ≥2 ε".into(),
            String::new(),
        ]);
    } else if !shapes_match {
        return Err(Error::Input(format!(
            "series differ in more than epsilon: {}",
            series
                .iter()
                .map(|s| s.path.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    } else {
        let mut samples = Vec::new();
        for s in series {
            let row = s
                .row_near(at)
                .ok_or_else(|| Error::Input("series without a time column".into()))?;
            let drift = conservation_from_series(s.config.epsilon, &s.energies())
                .ok()
                .map(|r| r.max_drift);
            samples.push(ScalingSample {
                epsilon: s.config.epsilon,
                b: row["b_linf"],
                a_minus_1: row["a_minus_1_linf"],
                at_over_a: row["at_over_a_linf"],
                g: row["g_l2"],
                theta_gap: row["theta_gap"],
                drift,
            });
        }
        let rep = scaling_report(&samples)?;
        text += &format!("  slopes at t = {at}\n");
        for (name, slope, expected) in rep.rows() {
            text += &format!("  {name:<10} {slope:>8.4} (expected {expected})\n");
            csv_rows.push(vec!["scaling".into(), name.into(), String::new(), fmt(slope), fmt(expected)]);
        }
        let mut by_eps: Vec<&(usize, ConservationReport)> = reports.iter().collect();
        by_eps.sort_by(|a, b| b.1.epsilon.total_cmp(&a.1.epsilon));
        for w in by_eps.windows(2) {
            let p = paired_from_reports(w[0].1.clone(), w[1].1.clone())?;
            text += &format!(
                "  paired drift {:e}/{:e}: ratio {:.4}, exponent {:.4}\n",
                p.large.epsilon, p.small.epsilon, p.ratio, p.exponent
            );
            csv_rows.push(vec![
                "paired".into(),
                "drift_ratio".into(),
                fmt(p.large.epsilon),
                fmt(p.ratio),
                fmt((p.large.epsilon / p.small.epsilon).powi(4)),
            ]);
        }
    }

    let report_path = dir.join("report.csv");
    write_csv(&report_path, &csv_rows)?;
    let mut long = vec![vec![
        "series".to_string(),
        "epsilon".to_string(),
        "t".to_string(),
        "name".to_string(),
        "value".to_string(),
    ]];
    for (j, s) in series.iter().enumerate() {
        let tcol = s.column("t").unwrap_or_default();
        for (c, name) in s.columns.iter().enumerate().skip(1) {
            for (r, row) in s.rows.iter().enumerate() {
                long.push(vec![j.to_string(), fmt(s.config.epsilon), fmt(tcol[r]), name.clone(), fmt(row[c])]);
            }
        }
    }
    write_csv(&dir.join("long.csv"), &long)?;
    write_text(&dir.join("summary.txt"), &text)?;
    Ok(text)
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Command, clap::Error> {
        Cli::try_parse_from(std::iter::once("holowave").chain(args.iter().copied())).map(|c| c.command)
    }

    #[test]
    fn simulate_parses() {
        assert_eq!(
            parse(&["simulate", "run.json"]).unwrap(),
            Command::Simulate {
                config: "run.json".into(),
                out: ".".into()
            }
        );
    }

    #[test]
    fn verify_grid_parses() {
        match parse(&["verify", "--alpha", "5,10", "--t", "3,5"]).unwrap() {
            Command::Verify { alpha, t, .. } => {
                assert_eq!(alpha.unwrap().len() * t.unwrap().len(), 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["holowave", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
    }

    #[test]
    fn help_succeeds() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["holowave", "--help"], &mut o, &mut e), EXIT_OK);
        assert!(!o.is_empty());
    }
}
