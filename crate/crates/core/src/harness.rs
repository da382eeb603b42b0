//! Problem specifications, convergence and entropy-decay studies, the scheme
//! catalogue, and CSV output.
//!
//! Every CSV file starts with `# key=value` comment lines recording the
//! configuration that produced it.

use std::io::Write;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{dlss_alpha_bound, relative_entropy, to_entropy_var, EntropyConfig};
use crate::integrator::{Integrator, Model, RunFailure, Trajectory};
use crate::newton::NewtonOptions;
use crate::real::Real;
use crate::schemes::{
    family_g_matrix, bdf2, family_scheme, gamma_method, implicit_euler, implicit_midpoint,
    verify_g_stability, SchemeCoefficients,
};
use crate::skt::{skt_initial_data, SktForm, SktOperator, SktParams, SktTest};
use crate::state::GridState;
use crate::{Error, Result};

/// Relative slack when deciding whether a time is a multiple of a step size.
const MULTIPLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    SktTestA,
    SktTestB,
    SktCustom { d1: Real, d2: Real, a1: Real, a2: Real },
    Dlss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeSpec {
    Bdf2,
    Midpoint,
    /// Implicit Euler used as the stepping scheme (first order, no startup).
    Euler,
    Gamma { gamma: Real },
    Family { alpha2: Real, beta2: Real },
}

impl SchemeSpec {
    pub fn build(&self) -> Result<SchemeCoefficients> {
        match self {
            SchemeSpec::Bdf2 => Ok(bdf2()),
            SchemeSpec::Midpoint => Ok(implicit_midpoint()),
            SchemeSpec::Euler => Ok(implicit_euler()),
            SchemeSpec::Gamma { gamma } => gamma_method(gamma.0),
            SchemeSpec::Family { alpha2, beta2 } => family_scheme(alpha2.0, beta2.0),
        }
    }
}

/// Initial densities `u` (before the transformation to `v`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Population profiles for the SKT models, `1 + 0.5 sin(2 pi x)` for DLSS.
    #[default]
    Default,
    Constant { value: Real },
    /// `mean + amplitude sin(2 pi x)` in every species.
    Sine { mean: Real, amplitude: Real },
}

fn default_form() -> SktForm {
    SktForm::Corrected
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub model: ModelSpec,
    pub scheme: SchemeSpec,
    pub alpha: Real,
    pub n: usize,
    pub tau: Real,
    pub t_final: Real,
    #[serde(default)]
    pub newton: NewtonOptions,
    /// Keep every `snapshot_every`-th state; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub experimental: bool,
    #[serde(default = "default_form")]
    pub form: SktForm,
    #[serde(default)]
    pub initial: InitialSpec,
}

impl ProblemSpec {
    /// Test B, BDF2, `alpha = 3/2`, `N = 100`, `tau = 1e-5`, `t = 0.05`.
    pub fn skt_test_b() -> Self {
        Self {
            model: ModelSpec::SktTestB,
            scheme: SchemeSpec::Bdf2,
            alpha: Real(1.5),
            n: 100,
            tau: Real(1e-5),
            t_final: Real(0.05),
            newton: NewtonOptions::default(),
            snapshot_every: 0,
            experimental: false,
            form: SktForm::Corrected,
            initial: InitialSpec::Default,
        }
    }

    /// BDF2, `alpha = 1.2`, `N = 128`, `tau = 1e-7`, 2000 steps.
    pub fn dlss_default() -> Self {
        Self {
            model: ModelSpec::Dlss,
            scheme: SchemeSpec::Bdf2,
            alpha: Real(1.2),
            n: 128,
            tau: Real(1e-7),
            t_final: Real(2e-4),
            newton: NewtonOptions::default(),
            snapshot_every: 0,
            experimental: false,
            form: SktForm::Corrected,
            initial: InitialSpec::Default,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parameter(format!("invalid problem specification: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Parameter(format!("need N >= 4, got {}", self.n)));
        }
        let (tau, t_final) = (self.tau.0, self.t_final.0);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
        }
        if !(t_final >= tau && t_final.is_finite()) {
            return Err(Error::Parameter(format!(
                "t_final = {t_final} must be at least tau = {tau}"
            )));
        }
        let alpha = self.alpha.0;
        EntropyConfig::new(alpha, self.experimental)?;
        if self.model == ModelSpec::Dlss && !self.experimental && alpha >= dlss_alpha_bound(1) {
            return Err(Error::Parameter(format!(
                "DLSS needs alpha < 4/3 outside experimental mode, got {alpha}"
            )));
        }
        self.newton.validate()?;
        self.build_model()?;
        self.scheme.build()?.g_matrix()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        let params = match &self.model {
            ModelSpec::SktTestA => SktTest::A.params(),
            ModelSpec::SktTestB => SktTest::B.params(),
            ModelSpec::SktCustom { d1, d2, a1, a2 } => SktParams::new(d1.0, d2.0, a1.0, a2.0)?,
            ModelSpec::Dlss => return Ok(Model::Dlss),
        };
        Ok(Model::Skt(SktOperator::with_form(params, self.form)))
    }

    pub fn n_species(&self) -> usize {
        match self.model {
            ModelSpec::Dlss => 1,
            _ => 2,
        }
    }

    /// Initial densities on the grid.
    pub fn initial_density(&self) -> Result<GridState> {
        let ns = self.n_species();
        let u = match &self.initial {
            InitialSpec::Default => match self.model {
                ModelSpec::Dlss => GridState::from_fn(1, self.n, |_, x| {
                    1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()
                }),
                _ => skt_initial_data(SktTest::B, self.n)?.0,
            },
            InitialSpec::Constant { value } => GridState::constant(ns, self.n, value.0),
            InitialSpec::Sine { mean, amplitude } => GridState::from_fn(ns, self.n, |_, x| {
                mean.0 + amplitude.0 * (2.0 * std::f64::consts::PI * x).sin()
            }),
        };
        u.check_positive()?;
        Ok(u)
    }

    /// Initial entropy variable `v_0 = u_0^{alpha/2}`.
    pub fn initial_state(&self) -> Result<GridState> {
        to_entropy_var(&self.initial_density()?, self.alpha.0)
    }

    /// Number of steps: the largest `k` with `k tau <= t_final`.
    pub fn n_steps(&self) -> usize {
        steps_within(self.t_final.0, self.tau.0)
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Integrator::new(
            self.build_model()?,
            self.scheme.build()?,
            self.alpha.0,
            self.tau.0,
            self.newton,
        )
    }

    /// Flattened `key=value` pairs of the specification, sorted by key.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let value = serde_json::to_value(self).expect("specification serializes");
        let mut out = Vec::new();
        flatten_json("", &value, &mut out);
        out
    }
}

fn flatten_json(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, v, out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Largest `k` with `k * tau <= t` up to a relative slack.
fn steps_within(t: f64, tau: f64) -> usize {
    (t / tau * (1.0 + MULTIPLE_TOL)).floor() as usize
}

/// Validates the specification and runs it to `t_final`.
pub fn run(spec: &ProblemSpec) -> Result<std::result::Result<Trajectory, RunFailure>> {
    spec.validate()?;
    let integ = spec.integrator()?;
    let v0 = spec.initial_state()?;
    Ok(integ.run(&v0, spec.n_steps(), spec.snapshot_every))
}

/// `(h sum_{i,s} (v - v_ref)^2)^{1/2}`.
pub fn l2_error(v: &GridState, v_ref: &GridState) -> Result<f64> {
    if !v.same_shape(v_ref) {
        return Err(Error::Dimension(format!(
            "grids differ: {}x{} vs {}x{}",
            v.n_species(),
            v.n_nodes(),
            v_ref.n_species(),
            v_ref.n_nodes()
        )));
    }
    let sum: f64 = v
        .as_slice()
        .iter()
        .zip(v_ref.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((sum * v.h()).sqrt())
}

/// Least-squares line `y = slope x + intercept` and its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!(
            "need at least two matching points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub taus: Vec<f64>,
    /// Comparison time of each run: the largest multiple of its tau not
    /// exceeding `t_m`.
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    /// Slope of `log(error)` against `log(tau)`.
    pub rate: f64,
    pub r_squared: f64,
    pub tau_ref: f64,
    pub t_m: f64,
}

/// Runs `base` with every step size in `taus` and with `tau_ref`, and fits the
/// observed order from the l2 errors against the reference run.
pub fn convergence_study(
    base: &ProblemSpec,
    taus: &[f64],
    tau_ref: f64,
    t_m: f64,
) -> Result<ConvergenceReport> {
    if taus.len() < 2 {
        return Err(Error::Parameter("need at least two step sizes".into()));
    }
    if taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Parameter(format!("step sizes must be positive: {taus:?}")));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter(format!(
            "step sizes must be strictly decreasing: {taus:?}"
        )));
    }
    let tau_min = taus[taus.len() - 1];
    if !(tau_ref > 0.0 && tau_ref <= tau_min / 8.0 * (1.0 + MULTIPLE_TOL)) {
        return Err(Error::Parameter(format!(
            "reference step {tau_ref} must be at most min(taus)/8 = {}",
            tau_min / 8.0
        )));
    }
    if !(t_m >= taus[0]) {
        return Err(Error::Parameter(format!(
            "comparison time {t_m} is shorter than the largest step {}",
            taus[0]
        )));
    }

    // comparison step counts and the matching reference steps
    let mut steps = Vec::with_capacity(taus.len());
    let mut ref_steps = Vec::with_capacity(taus.len());
    for &tau in taus {
        let k = steps_within(t_m, tau);
        if ((k as f64) * tau - t_m).abs() > MULTIPLE_TOL * t_m {
            warn!(
                "t_m = {t_m} is not a multiple of tau = {tau}; comparing at t = {}",
                k as f64 * tau
            );
        }
        let ratio = k as f64 * tau / tau_ref;
        let r = ratio.round();
        if (ratio - r).abs() > 1e-6 {
            return Err(Error::Parameter(format!(
                "comparison time {} of tau = {tau} is not a multiple of tau_ref = {tau_ref}",
                k as f64 * tau
            )));
        }
        steps.push(k);
        ref_steps.push(r as usize);
    }
    let snapshot_every = ref_steps.iter().copied().fold(0, gcd);
    let ref_total = *ref_steps.iter().max().expect("nonempty");

    let spec_for = |tau: f64| -> Result<ProblemSpec> {
        let mut s = base.clone();
        s.tau = Real(tau);
        s.t_final = Real(t_m.max(tau));
        s.snapshot_every = 0;
        s.validate()?;
        Ok(s)
    };
    let v0 = base.initial_state()?;

    // job 0 is the reference run
    let jobs: Vec<(f64, usize, usize)> = std::iter::once((tau_ref, ref_total, snapshot_every))
        .chain(taus.iter().zip(&steps).map(|(&t, &k)| (t, k, 0)))
        .collect();
    let results: Vec<Result<Trajectory>> = jobs
        .par_iter()
        .map(|&(tau, n, every)| {
            let integ = spec_for(tau)?.integrator()?;
            info!("convergence run tau = {tau:e}, {n} steps");
            integ.run(&v0, n, every).map_err(|f| Error::StudyRun {
                tau,
                source: Box::new(f.error),
            })
        })
        .collect();
    let mut results = results.into_iter();
    let reference = results.next().expect("reference job")?;

    let mut errors = Vec::with_capacity(taus.len());
    for ((traj, &k_ref), &tau) in results.zip(&ref_steps).zip(taus) {
        let traj = traj?;
        let snap = reference
            .snapshots
            .iter()
            .find(|s| s.step == k_ref)
            .ok_or_else(|| Error::Parameter(format!("missing reference state at step {k_ref}")))?;
        let err = l2_error(traj.final_state(), &snap.state)?;
        if !(err > 0.0) {
            return Err(Error::Parameter(format!(
                "error for tau = {tau} is {err}; a rate cannot be fitted"
            )));
        }
        errors.push(err);
    }
    let lx: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let fit = linear_fit(&lx, &ly)?;
    Ok(ConvergenceReport {
        taus: taus.to_vec(),
        times: taus.iter().zip(&steps).map(|(t, &k)| k as f64 * t).collect(),
        errors,
        rate: fit.slope,
        r_squared: fit.r_squared,
        tau_ref,
        t_m,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "E_rel")]
    pub e_rel: f64,
    pub production: f64,
    pub min_w: f64,
    /// Largest per-species weighted mass residual.
    pub mass_residual: f64,
}

/// Entropy trace of a trajectory relative to `h_star`. Row 0 holds the
/// initial window.
pub fn entropy_trace(spec: &ProblemSpec, traj: &Trajectory, h_star: f64) -> Result<Vec<TraceRow>> {
    let v0 = spec.initial_state()?;
    let model = spec.build_model()?;
    let q = model.density_exponent(spec.alpha.0);
    let w0 = v0.map(|x| x.powf(q));
    let mut rows = vec![TraceRow {
        step: 0,
        time: 0.0,
        h: traj.initial_entropy,
        e_rel: relative_entropy(traj.initial_entropy, h_star),
        production: model.production(&w0, spec.alpha.0)?,
        min_w: w0.min(),
        mass_residual: 0.0,
    }];
    rows.extend(traj.records.iter().map(|r| {
        let d = &r.diagnostics;
        TraceRow {
            step: r.step,
            time: r.time,
            h: d.entropy,
            e_rel: relative_entropy(d.entropy, h_star),
            production: d.entropy_production,
            min_w: d.min_w,
            mass_residual: d.mass_residual.iter().copied().fold(0.0, f64::max),
        }
    }));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyDecayReport {
    pub h_star: f64,
    /// False when some earlier window had lower entropy than the final one
    /// and `h_star` was taken from it.
    pub h_star_from_final: bool,
    /// Slope of `log(E_rel)` against `t` on the fit window.
    pub rate: f64,
    pub r_squared: f64,
    pub fit_points: usize,
    /// `H` nonincreasing within `1e-8 |H|` at every step, including the
    /// startup step.
    pub monotone: bool,
    /// Largest `(H_{k+1} - H_k) / |H_k|` over the run.
    pub max_relative_increase: f64,
    /// Steps with `H_{k+1} + tau P > H_k + 1e-6 |H_k|` (SKT only, reported).
    pub rate_check_violations: usize,
    pub min_w: f64,
    /// Largest weighted mass residual over all steps and species.
    pub max_mass_residual: f64,
    pub trace: Vec<TraceRow>,
}

/// Relative tolerance of the entropy monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-8;

/// Runs `spec` and analyses the decay of the relative entropy.
pub fn entropy_decay_study(spec: &ProblemSpec) -> Result<EntropyDecayReport> {
    let traj = run(spec)?.map_err(|f| f.error)?;
    entropy_decay_report(spec, &traj)
}

pub fn entropy_decay_report(spec: &ProblemSpec, traj: &Trajectory) -> Result<EntropyDecayReport> {
    let entropies: Vec<f64> = std::iter::once(traj.initial_entropy)
        .chain(traj.records.iter().map(|r| r.diagnostics.entropy))
        .collect();
    let h_final = *entropies.last().expect("initial entropy");
    let h_min = entropies.iter().copied().fold(f64::INFINITY, f64::min);
    let h_star_from_final = h_min >= h_final;
    let h_star = if h_star_from_final { h_final } else { h_min };
    if !h_star_from_final {
        warn!("final entropy {h_final} exceeds trajectory minimum {h_min}; using the minimum");
    }

    let mut monotone = true;
    let mut max_rel = f64::NEG_INFINITY;
    for (k, w) in entropies.windows(2).enumerate() {
        let rel = (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE);
        max_rel = max_rel.max(rel);
        if rel > MONOTONE_TOL {
            monotone = false;
            warn!("entropy increased at step {}: {} -> {}", k + 1, w[0], w[1]);
        }
    }

    let mut violations = 0;
    if matches!(spec.model, ModelSpec::Dlss) {
        // production constant unknown for DLSS
    } else {
        let tau = spec.tau.0;
        for (k, r) in traj.records.iter().enumerate() {
            let prev = entropies[k];
            if r.diagnostics.entropy + tau * r.diagnostics.entropy_production
                > prev + 1e-6 * prev.abs()
            {
                violations += 1;
            }
        }
        if violations > 0 {
            info!("dissipation-rate check failed at {violations} steps");
        }
    }

    let trace = entropy_trace(spec, traj, h_star)?;
    let e0 = trace[0].e_rel;
    let (xs, ys): (Vec<f64>, Vec<f64>) = trace
        .iter()
        .filter(|r| r.e_rel >= 1e-10 * e0 && r.e_rel <= 0.5 * e0 && r.e_rel > 0.0)
        .map(|r| (r.time, r.e_rel.ln()))
        .unzip();
    let (rate, r_squared) = match linear_fit(&xs, &ys) {
        Ok(fit) => (fit.slope, fit.r_squared),
        Err(_) => {
            warn!("too few points in the fit window ({})", xs.len());
            (f64::NAN, f64::NAN)
        }
    };
    Ok(EntropyDecayReport {
        h_star,
        h_star_from_final,
        rate,
        r_squared,
        fit_points: xs.len(),
        monotone,
        max_relative_increase: max_rel,
        rate_check_violations: violations,
        min_w: trace.iter().map(|r| r.min_w).fold(f64::INFINITY, f64::min),
        max_mass_residual: traj
            .records
            .iter()
            .flat_map(|r| r.diagnostics.mass_residual.iter().copied())
            .fold(0.0, f64::max),
        trace,
    })
}

/// One row of `schemes.csv`. Entries that do not exist for the scheme are
/// left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeRow {
    pub name: String,
    pub p: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: Option<f64>,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: Option<f64>,
    pub g00: Option<f64>,
    pub g01: Option<f64>,
    pub g11: Option<f64>,
    pub certified: bool,
    pub scale_used: Option<f64>,
}

fn scheme_row(s: &SchemeCoefficients) -> SchemeRow {
    let (a, b) = (s.alphas(), s.betas());
    let p = s.steps();
    let cert = s.g_matrix().and_then(|g| {
        // the certifier already tried the scale, so report the base candidate
        let base = match s.family_parameters() {
            Some((a2, b2)) if p == 2 => family_g_matrix(a2, b2)?,
            _ => g.clone(),
        };
        Ok((g, verify_g_stability(s, &base)?))
    });
    let (g, certified, scale) = match cert {
        Ok((g, c)) => (Some(g), c.certified, Some(c.scale_used)),
        Err(_) => (None, false, None),
    };
    SchemeRow {
        name: s.name().to_string(),
        p,
        alpha0: a[0],
        alpha1: a[1],
        alpha2: a.get(2).copied(),
        beta0: b[0],
        beta1: b[1],
        beta2: b.get(2).copied(),
        g00: g.as_ref().map(|g| g.get(0, 0)),
        g01: g.as_ref().filter(|g| g.dim() == 2).map(|g| g.get(0, 1)),
        g11: g.as_ref().filter(|g| g.dim() == 2).map(|g| g.get(1, 1)),
        certified,
        scale_used: scale,
    }
}

/// Catalogue of named schemes and a 10 x 10 sample of the two-parameter
/// family `alpha2 = 0.25 k`, `beta2 = 0.15 l`. Inadmissible samples are kept
/// with `certified = false` and no G-matrix.
pub fn scheme_report() -> Vec<SchemeRow> {
    let mut rows = vec![scheme_row(&bdf2()), scheme_row(&implicit_midpoint())];
    for gamma in [9.0 - 4.0 * 5f64.sqrt(), 0.2, 1.0] {
        rows.push(scheme_row(&gamma_method(gamma).expect("gamma in range")));
    }
    for k in 1..=10 {
        for l in 1..=10 {
            let (a2, b2) = (k as f64 / 4.0, (15 * l) as f64 / 100.0);
            let name = format!("family({a2},{b2})");
            let row = match family_scheme(a2, b2) {
                Ok(s) => {
                    let mut row = scheme_row(&s);
                    row.name = name;
                    row
                }
                Err(_) => SchemeRow {
                    name,
                    p: 2,
                    alpha0: a2 - 1.0,
                    alpha1: 1.0 - 2.0 * a2,
                    alpha2: Some(a2),
                    beta0: 0.5 - a2 + b2,
                    beta1: 0.5 + a2 - 2.0 * b2,
                    beta2: Some(b2),
                    g00: None,
                    g01: None,
                    g11: None,
                    certified: false,
                    scale_used: None,
                },
            };
            rows.push(row);
        }
    }
    rows
}

/// Writes `# key=value` lines.
pub fn write_header<W: Write>(out: &mut W, pairs: &[(String, String)]) -> Result<()> {
    for (k, v) in pairs {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

fn write_rows<W: Write, T: Serialize>(out: &mut W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(
    out: &mut W,
    spec: &ProblemSpec,
    report: &EntropyDecayReport,
) -> Result<()> {
    let mut header = spec.provenance();
    header.extend([
        ("H_star".to_string(), report.h_star.to_string()),
        ("decay_rate".to_string(), report.rate.to_string()),
        ("r_squared".to_string(), report.r_squared.to_string()),
        ("monotone".to_string(), report.monotone.to_string()),
    ]);
    write_header(out, &header)?;
    write_rows(out, &report.trace)
}

#[derive(Serialize)]
struct ConvergenceRow {
    tau: f64,
    time: f64,
    error: f64,
}

pub fn write_convergence<W: Write>(
    out: &mut W,
    spec: &ProblemSpec,
    report: &ConvergenceReport,
) -> Result<()> {
    let mut header = spec.provenance();
    header.extend([
        ("tau_ref".to_string(), report.tau_ref.to_string()),
        ("t_m".to_string(), report.t_m.to_string()),
        ("rate".to_string(), report.rate.to_string()),
        ("r_squared".to_string(), report.r_squared.to_string()),
    ]);
    write_header(out, &header)?;
    let rows: Vec<ConvergenceRow> = report
        .taus
        .iter()
        .zip(&report.times)
        .zip(&report.errors)
        .map(|((&tau, &time), &error)| ConvergenceRow { tau, time, error })
        .collect();
    write_rows(out, &rows)
}

pub fn write_schemes<W: Write>(out: &mut W, rows: &[SchemeRow]) -> Result<()> {
    write_header(
        out,
        &[("rows".to_string(), rows.len().to_string())],
    )?;
    write_rows(out, rows)
}

/// One node per row: `x`, then `v` and `u = v^{2/alpha}` per species.
pub fn write_snapshot<W: Write>(
    out: &mut W,
    state: &GridState,
    step: usize,
    time: f64,
    alpha: f64,
) -> Result<()> {
    write_header(
        out,
        &[
            ("step".to_string(), step.to_string()),
            ("time".to_string(), time.to_string()),
        ],
    )?;
    let ns = state.n_species();
    let mut wtr = csv::Writer::from_writer(out);
    let mut head = vec!["x".to_string()];
    head.extend((1..=ns).map(|s| format!("v{s}")));
    head.extend((1..=ns).map(|s| format!("u{s}")));
    wtr.write_record(&head)?;
    for i in 0..state.n_nodes() {
        let mut rec = vec![state.node_x(i).to_string()];
        rec.extend((0..ns).map(|s| state.value(s, i).to_string()));
        rec.extend((0..ns).map(|s| state.value(s, i).powf(2.0 / alpha).to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
