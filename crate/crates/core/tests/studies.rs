//! End-to-end runs of the integrator and the studies.

use oneleg::harness::{
    convergence_study, entropy_decay_study, run, ProblemSpec, SchemeSpec,
};
use oneleg::integrator::euler_startup;
use oneleg::newton::NewtonOptions;
use oneleg::real::Real;

#[test]
fn test_b_relaxes_to_a_constant() {
    let spec = ProblemSpec::skt_test_b();
    let traj = run(&spec).unwrap().unwrap();
    let v = traj.final_state();
    let alpha = spec.alpha.0;
    for sp in 0..2 {
        let u: Vec<f64> = v.species(sp).map(|x| x.powf(2.0 / alpha)).collect();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        let dev = u.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
        assert!(dev <= 1e-3 * mean, "species {sp}: {dev} vs {mean}");
    }
}

#[test]
fn test_a_still_produces_a_trace() {
    let mut spec = ProblemSpec::skt_test_b();
    spec.model = oneleg::harness::ModelSpec::SktTestA;
    spec.t_final = Real(5e-3);
    let r = entropy_decay_study(&spec).unwrap();
    assert_eq!(r.trace.len(), 501);
    assert!(r.trace.iter().all(|row| row.h.is_finite() && row.min_w > 0.0));
}

#[test]
fn gamma_method_decays_like_bdf2() {
    let mut spec = ProblemSpec::skt_test_b();
    spec.t_final = Real(0.02);
    let bdf = entropy_decay_study(&spec).unwrap();
    spec.scheme = SchemeSpec::Gamma { gamma: Real(0.2) };
    let gam = entropy_decay_study(&spec).unwrap();
    assert!(gam.monotone && bdf.monotone);
    assert!((gam.rate / bdf.rate - 1.0).abs() < 0.05, "{} vs {}", gam.rate, bdf.rate);
}

#[test]
fn literal_form_runs() {
    let mut spec = ProblemSpec::skt_test_b();
    spec.form = oneleg::skt::SktForm::Literal;
    spec.t_final = Real(1e-3);
    let traj = run(&spec).unwrap().unwrap();
    assert_eq!(traj.records.len(), 100);
}

#[test]
fn first_order_scheme_gives_first_order_rate() {
    let mut spec = ProblemSpec::skt_test_b();
    spec.n = 50;
    spec.scheme = SchemeSpec::Euler;
    let r = convergence_study(&spec, &[8e-6, 4e-6, 2e-6, 1e-6], 6.25e-8, 5e-4).unwrap();
    assert!((0.8..=1.2).contains(&r.rate), "rate {}", r.rate);
}

#[test]
fn fitted_rate_is_stable_under_halving() {
    let mut spec = ProblemSpec::skt_test_b();
    spec.n = 200;
    let a = convergence_study(&spec, &[8e-6, 4e-6, 2e-6, 1e-6], 6.25e-8, 5e-4).unwrap();
    let b = convergence_study(&spec, &[4e-6, 2e-6, 1e-6, 5e-7], 3.125e-8, 5e-4).unwrap();
    assert!((a.rate - b.rate).abs() < 0.15, "{} vs {}", a.rate, b.rate);
    // the comparison of the largest step happens at the last multiple below t_m
    assert!((a.times[0] - 62.0 * 8e-6).abs() < 1e-15);
}

#[test]
fn rates_per_alpha_are_ordered_as_reported() {
    let mut rates = Vec::new();
    for alpha in [1.5, 2.0] {
        let mut spec = ProblemSpec::skt_test_b();
        spec.n = 100;
        spec.alpha = Real(alpha);
        let r = convergence_study(&spec, &[8e-6, 4e-6, 2e-6, 1e-6], 6.25e-8, 5e-4).unwrap();
        assert!((1.75..=2.4).contains(&r.rate));
        rates.push(r.rate);
    }
    eprintln!("rate alpha=1.5: {}, alpha=2: {}", rates[0], rates[1]);
}

#[test]
fn startup_first_step_error_is_second_order() {
    // Richardson-style oracle: reference from four quarter steps
    let mut spec = ProblemSpec::skt_test_b();
    spec.n = 16;
    let v0 = spec.initial_state().unwrap();
    let m = spec.build_model().unwrap();
    let opts = NewtonOptions {
        tol_residual: 1e-13,
        ..Default::default()
    };
    let err = |tau: f64| {
        let one = euler_startup(&v0, &m, 1.5, tau, &opts).unwrap();
        let mut r = v0.clone();
        for _ in 0..4 {
            r = euler_startup(&r, &m, 1.5, tau / 4.0, &opts).unwrap();
        }
        oneleg::harness::l2_error(&one, &r).unwrap()
    };
    let ratio = err(2e-6) / err(1e-6);
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn identical_specs_give_identical_trajectories() {
    let mut spec = ProblemSpec::dlss_default();
    spec.t_final = Real(2e-5);
    let a = run(&spec).unwrap().unwrap();
    let b = run(&spec).unwrap().unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_length_run_is_rejected_by_spec() {
    let mut spec = ProblemSpec::skt_test_b();
    spec.t_final = Real(0.0);
    assert!(run(&spec).is_err());
}
