//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its own line under a plain `cargo test`.

use std::time::Instant;

use holowave::cubic::{compute_bundle, cubic_residual};
use holowave::diagnostics::{
    conservation_report, paired_drift, scaling_report, write_series, Expectations, ScalingSample,
};
use holowave::evolution::{
    linear_mode, linear_rhs, make_initial_data, rk4, run, step_rk4, time_step, Profile, RunConfig, StepOptions,
};
use holowave::flow::{compute_aux, WaveState};
use holowave::grid::{Field, Grid, GridSpec};
use holowave::identity::quad::PvQuadConfig;
use holowave::identity::{certify, default_grid, randomized_transition, CertThresholds};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn at_n(n: usize) -> RunConfig {
    RunConfig {
        grid: GridSpec::new(n, 8.0, 1.0 / 3.0).unwrap(),
        ..RunConfig::default_run()
    }
}

fn identity_certification() -> Outcome {
    let start = Instant::now();
    let (alphas, ts) = default_grid();
    let rows = match certify(&alphas, &ts, &PvQuadConfig::default(), &CertThresholds::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let worst = |name: &str| {
        rows.iter()
            .filter(|r| r.identity.starts_with(name))
            .map(|r| r.abs_err)
            .fold(0.0, f64::max)
    };
    let failed = rows.iter().filter(|r| !r.pass).count();
    outcome(
        failed == 0 && secs < 60.0,
        format!(
            "{} rows, {failed} failed; max err main {:.1e}, second {:.1e}, exp {:.1e}; {secs:.1}s",
            rows.len(),
            worst("decouple_main"),
            worst("decouple2"),
            worst("hilbert_exp")
        ),
    )
}

fn transition_algebra() -> Outcome {
    let start = Instant::now();
    match randomized_transition(2024, 100) {
        Ok(r) => outcome(
            r < 1e-11,
            format!("max residual {r:.2e} over 100 samples; {:.2}s", start.elapsed().as_secs_f64()),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn equilibrium() -> Outcome {
    let start = Instant::now();
    let cfg = at_n(256);
    let grid = Grid::new(cfg.grid).unwrap();
    let opts = StepOptions::from_config(&cfg);
    let mut state = WaveState::equilibrium(&grid);
    let dt = time_step(&cfg, &Field::constant(&grid, Complex64::new(1.0, 0.0)), &Field::zeros(&grid));
    for _ in 0..10_000 {
        state = match step_rk4(&state, dt, &opts) {
            Ok(s) => s,
            Err(e) => return outcome(false, e.to_string()),
        };
    }
    let curve = state.curve().unwrap();
    let aux = compute_aux(&curve, &state, &cfg.solver()).unwrap();
    let bundle = compute_bundle(&curve, &state, &aux).unwrap();
    let worst = [
        state.zeta_offset.linf(),
        state.u.linf(),
        aux.b.linf(),
        aux.a_minus_1.linf(),
        aux.at_over_a.linf(),
        aux.theta.linf(),
        bundle.g.linf(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-13 && secs < 60.0,
        format!("max deviation {worst:.1e} after 10^4 steps; {secs:.1}s"),
    )
}

fn power_laws() -> Outcome {
    let start = Instant::now();
    let mut samples = Vec::new();
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let cfg = RunConfig {
            epsilon: eps,
            t_end: 10.0,
            ..RunConfig::default_run()
        };
        let traj = match run(&cfg) {
            Ok(t) => t,
            Err(e) => return outcome(false, e.to_string()),
        };
        if let Some(why) = traj.terminated_early {
            return outcome(false, why);
        }
        samples.push(ScalingSample::from_trajectory(&traj, 10.0).unwrap());
    }
    let rep = scaling_report(&samples).unwrap();
    let tol = Expectations::builtin().slope_tolerance;
    let pass = rep
        .rows()
        .iter()
        .filter(|(n, _, _)| *n != "drift")
        .all(|(_, s, e)| (s - e).abs() <= tol);
    let secs = start.elapsed().as_secs_f64();
    let table: Vec<String> = rep.rows().iter().map(|(n, s, _)| format!("{n} {s:.3}")).collect();
    outcome(pass && secs < 600.0, format!("{}; {secs:.0}s", table.join(", ")))
}

fn almost_conservation() -> Outcome {
    let start = Instant::now();
    let exp = Expectations::builtin();
    let base = RunConfig {
        profile: Profile::SechPacket { width: 2.0 },
        dt_safety: 0.25,
        ..RunConfig::default_run()
    };
    let mut trajs = Vec::new();
    for eps in [1e-2, 5e-3] {
        match run(&RunConfig { epsilon: eps, ..base.clone() }) {
            Ok(t) if t.terminated_early.is_none() => trajs.push(t),
            Ok(t) => return outcome(false, t.terminated_early.unwrap()),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let rel = conservation_report(&trajs[0]).unwrap().relative_drift;
    let paired = paired_drift(&trajs[0], &trajs[1]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = rel < exp.relative_drift_pin
        && paired.ratio >= exp.paired_ratio_min
        && paired.ratio <= exp.paired_ratio_max
        && secs < 1800.0;
    outcome(
        pass,
        format!(
            "relative drift {rel:.2e}, paired ratio {:.2} (exponent {:.2}); {secs:.0}s",
            paired.ratio, paired.exponent
        ),
    )
}

fn cubic_consistency() -> Outcome {
    let start = Instant::now();
    let mut theta = Vec::new();
    let mut sigma = Vec::new();
    let mut rel = (0.0, 0.0);
    for n in [256, 512, 1024] {
        let cfg = at_n(n);
        let res = (|| {
            let state = make_initial_data(&cfg)?;
            let curve = state.curve()?;
            let aux = compute_aux(&curve, &state, &cfg.solver())?;
            let bundle = compute_bundle(&curve, &state, &aux)?;
            let (rt, rs) = cubic_residual(&bundle);
            Ok::<_, holowave::Error>((rt.l2, rs.l2, bundle.g.l2(), bundle.dt_g.l2()))
        })();
        match res {
            Ok((rt, rs, g, dtg)) => {
                theta.push(rt);
                sigma.push(rs);
                rel = (rt / g, rs / dtg);
            }
            Err(e) => return outcome(false, format!("n = {n}: {e}")),
        }
    }
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let secs = start.elapsed().as_secs_f64();
    let pass = monotone(&theta) && monotone(&sigma) && rel.0 < 1e-4 && rel.1 < 1e-4 && secs < 1800.0;
    outcome(
        pass,
        format!(
            "theta {:.2e} > {:.2e} > {:.2e} (rel {:.1e}); sigma {:.2e} > {:.2e} > {:.2e} (rel {:.1e}); {secs:.0}s",
            theta[0], theta[1], theta[2], rel.0, sigma[0], sigma[1], sigma[2], rel.1
        ),
    )
}

fn rk4_slope() -> (bool, String) {
    let grid = holowave::grid::make_grid(64, 1.0, 1.0 / 3.0).unwrap();
    let t_final = 2.0;
    let mut pts = Vec::new();
    for steps in [20usize, 40, 80, 160] {
        let dt = t_final / steps as f64;
        let (mut x, mut u) = linear_mode(&grid, 4, 0.0);
        for _ in 0..steps {
            (x, u) = rk4(&x, &u, dt, linear_rhs).unwrap();
        }
        let (xe, _) = linear_mode(&grid, 4, t_final);
        pts.push((dt, (&x - &xe).linf()));
    }
    let slope = holowave::diagnostics::log_log_slope(&pts).unwrap();
    ((slope - 4.0).abs() <= 0.2, format!("RK4 slope {slope:.3}"))
}

fn involution_and_projectors() -> (bool, String) {
    let cfg = at_n(512);
    let state = make_initial_data(&cfg).unwrap();
    let curve = state.curve().unwrap();
    let grid = state.grid().clone();
    let g = Field::from_real_fn(&grid, |a| (-(a * a) / 4.0).exp() * (2.0 * a).cos());
    let f = curve.hilbert(&g);
    let inv = (&curve.hilbert(&curve.hilbert(&f)) - &f).l2() / f.l2();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<Complex64> = (0..512)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let r = Field::from_samples(&grid, samples).unwrap();
    let direct: f64 = r.samples().iter().map(|z| z.norm_sqr()).sum();
    let spectral: f64 = r.modes().iter().map(|z| z.norm_sqr()).sum::<f64>() / 512.0;
    let parseval = (direct - spectral).abs() / direct;
    let d = r.dealias();
    let dealias = (&d.dealias() - &d).linf() / d.linf();
    let p = curve.holomorphic_part(&r);
    let proj = (&curve.holomorphic_part(&p) - &p).linf() / r.linf();
    let worst = parseval.max(dealias).max(proj);
    (
        inv < 1e-6 && worst < 1e-12,
        format!("involution {inv:.1e}, Parseval {parseval:.1e}, dealias {dealias:.1e}, projector {proj:.1e}"),
    )
}

fn constraint_growth() -> (bool, String) {
    match run(&RunConfig::default_run()) {
        Ok(t) if t.terminated_early.is_none() => {
            let g = t.constraint_growth();
            (
                g < 10.0,
                format!("constraint growth {g:.2} (first {:.1e}, max {:.1e})", t.first_drift, t.max_drift),
            )
        }
        Ok(t) => (false, t.terminated_early.unwrap()),
        Err(e) => (false, e.to_string()),
    }
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        grid: GridSpec::new(128, 8.0, 1.0 / 3.0).unwrap(),
        t_end: 2.0,
        ..RunConfig::default_run()
    };
    let mut blobs = Vec::new();
    for k in 0..2 {
        let sub = dir.path().join(format!("run{k}"));
        std::fs::create_dir_all(&sub).unwrap();
        let traj = run(&cfg).unwrap();
        let path = sub.join("series.csv");
        write_series(&traj, &path).unwrap();
        let series = holowave::diagnostics::read_series(&path).unwrap();
        holowave::cli::emit_report(&[series], &sub, 1.0).unwrap();
        let mut files = Vec::new();
        for f in ["series.csv", "series.jsonl", "report.csv", "long.csv", "summary.txt"] {
            files.push(std::fs::read(sub.join(f)).unwrap());
        }
        blobs.push(files);
    }
    let same = blobs[0] == blobs[1];
    (same, format!("outputs {}", if same { "byte-identical" } else { "differ" }))
}

fn hygiene() -> Outcome {
    let start = Instant::now();
    let parts = [
        rk4_slope(),
        involution_and_projectors(),
        constraint_growth(),
        determinism(),
    ];
    let pass = parts.iter().all(|p| p.0);
    let detail: Vec<&str> = parts.iter().map(|p| p.1.as_str()).collect();
    outcome(pass, format!("{}; {:.0}s", detail.join("; "), start.elapsed().as_secs_f64()))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 identity certification", identity_certification),
        ("2 transition algebra", transition_algebra),
        ("3 equilibrium fixed point", equilibrium),
        ("4 amplitude power laws", power_laws),
        ("5 almost conservation", almost_conservation),
        ("6 cubic consistency under refinement", cubic_consistency),
        ("7 numerical hygiene", hygiene),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
