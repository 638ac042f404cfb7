use holowave::cubic::{commutator_source, compute_bundle, cubic_residual, SourceInputs, Unknown};
use holowave::diagnostics::{energy_k, energy_snapshot, total_energy};
use holowave::evolution::{make_initial_data, Profile, RunConfig};
use holowave::flow::{compute_aux, AuxQuantities, SolverSettings, WaveState};
use holowave::grid::{make_grid, Field, GridSpec};
use num_complex::Complex64;

fn packet(eps: f64) -> RunConfig {
    RunConfig {
        grid: GridSpec::new(256, 8.0, 1.0 / 3.0).unwrap(),
        epsilon: eps,
        profile: Profile::SechPacket { width: 2.0 },
        ..RunConfig::default_run()
    }
}

struct Sample {
    state: WaveState,
    aux: AuxQuantities,
    src: SourceInputs,
    g: f64,
    dt_g: f64,
}

fn sample(eps: f64) -> Sample {
    let cfg = packet(eps);
    let state = make_initial_data(&cfg).unwrap();
    let curve = state.curve().unwrap();
    let s = cfg.solver();
    let aux = compute_aux(&curve, &state, &s).unwrap();
    let src = SourceInputs::new(&curve, &state, &aux, &s).unwrap();
    let bundle = compute_bundle(&curve, &state, &aux).unwrap();
    let g = bundle.g.l2();
    let dt_g = bundle.dt_g.l2();
    Sample { state, aux, src, g, dt_g }
}

fn pair() -> (Sample, Sample) {
    (sample(1e-2), sample(5e-3))
}

fn assert_ratio(name: &str, big: f64, small: f64, expected: f64, rel: f64) {
    let r = big / small;
    assert!((r / expected - 1.0).abs() <= rel, "{name}: ratio {r}, expected {expected}");
}

#[test]
fn quadratic_quantities_scale_like_eps_squared() {
    let (p, q) = pair();
    let gap = |x: &Sample| (&x.aux.theta - &x.state.zeta_offset.scale_re(2.0)).l2();
    let sigma_gap = |x: &Sample| (&x.aux.sigma - &x.state.u.scale_re(2.0)).l2();
    let q_gap = |x: &Sample| (&x.aux.q_alpha - &x.state.u).l2();
    assert_ratio("b", p.aux.b.linf(), q.aux.b.linf(), 4.0, 0.15);
    assert_ratio("A-1", p.aux.a_minus_1.linf(), q.aux.a_minus_1.linf(), 4.0, 0.15);
    assert_ratio("at/a", p.aux.at_over_a.linf(), q.aux.at_over_a.linf(), 4.0, 0.15);
    assert_ratio("theta gap", gap(&p), gap(&q), 4.0, 0.15);
    assert_ratio("sigma gap", sigma_gap(&p), sigma_gap(&q), 4.0, 0.15);
    assert_ratio("Q gap", q_gap(&p), q_gap(&q), 4.0, 0.15);
    assert_ratio("w", p.aux.w.linf(), q.aux.w.linf(), 2.0, 0.1);
}

#[test]
fn real_quantities_stay_real_and_a_stays_positive() {
    let (p, _) = pair();
    for f in [&p.aux.b, &p.aux.a, &p.aux.at_over_a] {
        let im = f.samples().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(im < 1e-12, "imaginary part {im}");
    }
    let min_a = p.aux.a.samples().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    assert!(min_a > 0.9);
}

#[test]
fn cubic_sources_scale_like_eps_cubed() {
    let (p, q) = pair();
    assert_ratio("G", p.g, q.g, 8.0, 0.2);
    assert_ratio("DtG", p.dt_g, q.dt_g, 8.0, 0.2);
    for which in [Unknown::Theta, Unknown::Sigma] {
        let big = commutator_source(&p.aux, &p.src, 2, which).l2();
        let small = commutator_source(&q.aux, &q.src, 2, which).l2();
        assert!(big / small >= 8.0 * 0.8, "k=2 {which:?}: ratio {}", big / small);
    }
}

#[test]
fn energies_are_real_and_quadratic() {
    let (p, q) = pair();
    for k in 0..=4 {
        for which in [Unknown::Theta, Unknown::Sigma] {
            let e = energy_k(&p.aux, k, which);
            assert!(e.re > 0.0, "E_{k} {which:?} = {e}");
            assert!(e.im.abs() <= 1e-6 * e.re, "E_{k} {which:?} = {e}");
        }
    }
    assert_ratio("energy", total_energy(&p.aux, 4), total_energy(&q.aux, 4), 4.0, 0.15);
}

#[test]
fn energy_is_stable_under_grid_refinement() {
    let cfg = packet(1e-2);
    let state = make_initial_data(&cfg).unwrap();
    let fine = make_grid(512, 8.0, 1.0 / 3.0).unwrap();
    let refined = WaveState {
        t: 0.0,
        zeta_offset: state.zeta_offset.resample(&fine),
        u: state.u.resample(&fine),
    };
    let s = cfg.solver();
    let e = |st: &WaveState| {
        let c = st.curve().unwrap();
        total_energy(&compute_aux(&c, st, &s).unwrap(), 4)
    };
    let (coarse, fine) = (e(&state), e(&refined));
    assert!((coarse / fine - 1.0).abs() < 0.05, "{coarse} vs {fine}");
}

#[test]
fn equilibrium_has_no_derived_quantities() {
    let g = make_grid(64, 2.0, 1.0 / 3.0).unwrap();
    let state = WaveState::equilibrium(&g);
    let curve = state.curve().unwrap();
    let s = SolverSettings::default();
    let aux = compute_aux(&curve, &state, &s).unwrap();
    for f in [&aux.b, &aux.a_minus_1, &aux.w, &aux.at_over_a, &aux.theta, &aux.sigma, &aux.q_alpha] {
        assert!(f.linf() == 0.0);
    }
    let src = SourceInputs::new(&curve, &state, &aux, &s).unwrap();
    assert!(src.g.linf() == 0.0 && src.dt_g.linf() == 0.0);
    assert!(commutator_source(&aux, &src, 0, Unknown::Theta).linf() == 0.0);
    let snap = energy_snapshot(&curve, &state, &aux, 3).unwrap();
    assert!(snap.e_total == 0.0);
}

#[test]
fn cubic_residual_does_not_depend_on_solver_tolerance() {
    let cfg = RunConfig {
        grid: GridSpec::new(512, 8.0, 1.0 / 3.0).unwrap(),
        ..packet(1e-2)
    };
    let state = make_initial_data(&cfg).unwrap();
    let curve = state.curve().unwrap();
    let residual = |tol: f64| {
        let s = SolverSettings { tol, ..SolverSettings::default() };
        let aux = compute_aux(&curve, &state, &s).unwrap();
        let bundle = compute_bundle(&curve, &state, &aux).unwrap();
        cubic_residual(&bundle).0.l2
    };
    let loose = residual(1e-11);
    let tight = residual(1e-12);
    assert!(((loose - tight) / tight).abs() < 0.01, "{loose} vs {tight}");
}

#[test]
fn w_is_i_times_a_minus_1_on_a_flat_curve() {
    let g = make_grid(64, 2.0, 1.0 / 3.0).unwrap();
    let curve = holowave::cauchy::CurveHandle::new(&Field::zeros(&g)).unwrap();
    let a_minus_1 = Field::from_real_fn(&g, |x| 1e-3 * (-(x * x)).exp());
    let w = holowave::flow::compute_w(&curve, &a_minus_1);
    assert!((&w - &a_minus_1.scale(Complex64::i())).linf() < 1e-15);
}

#[test]
fn main_terms_are_finite_after_a_short_run() {
    let cfg = RunConfig { t_end: 2.0, output_interval: 2.0, ..packet(1e-2) };
    let traj = holowave::evolution::run(&cfg).unwrap();
    let state = &traj.checkpoints.last().unwrap().state;
    assert!(state.t > 1.9);
    let curve = state.curve().unwrap();
    let aux = compute_aux(&curve, state, &cfg.solver()).unwrap();
    let gap = holowave::cubic::main_term_gap(&curve, state, &aux, &[(-20.0, -2.0), (2.0, 20.0)]).unwrap();
    for v in [gap.projected_g1, gap.g1, gap.g2_vs_sigma, gap.g2_vs_u, gap.b_gap] {
        assert!(v.is_finite());
    }
    // G₁ sits in the class of θ, where I − H acts as 2
    let ratio = gap.projected_g1 / gap.g1;
    assert!(ratio > 1.5 && ratio < 2.01, "{gap:?}");
    assert!(holowave::cubic::main_term_gap(&curve, state, &aux, &[(-1.0, 1.0)]).is_err());
}
