//! Fixed-step one-leg time stepping with implicit-Euler startup.

use log::{debug, warn};

use crate::dlss::{dlss_jacobian, dlss_residual};
use crate::entropy::{discrete_entropy, dlss_entropy_production, skt_entropy_production};
use crate::linalg::CyclicBandMatrix;
use crate::newton::{newton_solve, NewtonOptions, NewtonReport};
use crate::schemes::{implicit_euler, GMatrix, SchemeCoefficients};
use crate::skt::SktOperator;
use crate::state::{apply_rho, apply_sigma, GridState, History};
use crate::{Error, Result};

/// The spatially discretized operator being integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Skt(SktOperator),
    Dlss,
}

impl Model {
    pub fn n_species(&self) -> usize {
        match self {
            Model::Skt(_) => 2,
            Model::Dlss => 1,
        }
    }

    /// Exponent `q` such that `w = sigma^q`.
    pub fn density_exponent(&self, alpha: f64) -> f64 {
        match self {
            Model::Skt(op) => op.exponent(alpha),
            Model::Dlss => 2.0 / alpha,
        }
    }

    pub fn residual(
        &self,
        hist: &History,
        v_new: &GridState,
        s: &SchemeCoefficients,
        alpha: f64,
        tau: f64,
    ) -> Result<Vec<f64>> {
        match self {
            Model::Skt(op) => op.residual(hist, v_new, s, alpha, tau),
            Model::Dlss => dlss_residual(hist, v_new, s, alpha, tau),
        }
    }

    pub fn jacobian(
        &self,
        hist: &History,
        v_new: &GridState,
        s: &SchemeCoefficients,
        alpha: f64,
        tau: f64,
    ) -> Result<CyclicBandMatrix> {
        match self {
            Model::Skt(op) => op.jacobian(hist, v_new, s, alpha, tau),
            Model::Dlss => dlss_jacobian(hist, v_new, s, alpha, tau),
        }
    }

    /// Entropy production integral of the model evaluated at the density `w`.
    pub fn production(&self, w: &GridState, alpha: f64) -> Result<f64> {
        match self {
            Model::Skt(op) => skt_entropy_production(w, alpha, op.params.d1, op.params.d2),
            Model::Dlss => dlss_entropy_production(w, alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iters: usize,
    pub residual_norm: f64,
    /// `H` of the trailing window after the step.
    pub entropy: f64,
    pub entropy_production: f64,
    /// `|h sum_i sigma_i^{q-1} (rho v)_i|` per species.
    pub mass_residual: Vec<f64>,
    pub min_sigma_v: f64,
    pub min_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Index `k` of the newly computed state `v_k`.
    pub step: usize,
    pub time: f64,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub state: GridState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `H` of the window filled with copies of `v_0`.
    pub initial_entropy: f64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    /// The most recent `p` states.
    pub window: History,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridState {
        self.window.newest()
    }
}

/// A run that stopped early; carries everything computed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("run aborted after {} accepted steps: {error}", partial.records.len())]
pub struct RunFailure {
    pub partial: Box<Trajectory>,
    #[source]
    pub error: Error,
}

/// Implicit Euler step `v_0 -> v_1` used to fill the first window of two-step
/// schemes.
pub fn euler_startup(
    v0: &GridState,
    model: &Model,
    alpha: f64,
    tau: f64,
    opts: &NewtonOptions,
) -> Result<GridState> {
    let hist = History::new(vec![v0.clone()])?;
    let euler = implicit_euler();
    let (v1, _) = solve(model, &euler, &hist, v0.clone(), alpha, tau, opts)?;
    Ok(v1)
}

/// One step of `s` on `model`; see [`Integrator::step`].
pub fn step(
    hist: &History,
    s: &SchemeCoefficients,
    model: &Model,
    alpha: f64,
    tau: f64,
    opts: &NewtonOptions,
) -> Result<(GridState, StepDiagnostics)> {
    Integrator::new(*model, s.clone(), alpha, tau, *opts)?.step(hist)
}

fn solve(
    model: &Model,
    scheme: &SchemeCoefficients,
    hist: &History,
    guess: GridState,
    alpha: f64,
    tau: f64,
    opts: &NewtonOptions,
) -> Result<(GridState, NewtonReport)> {
    let template = guess.clone();
    let (x, report) = newton_solve(
        |x| model.residual(hist, &template.with_data(x.to_vec())?, scheme, alpha, tau),
        |x| model.jacobian(hist, &template.with_data(x.to_vec())?, scheme, alpha, tau),
        guess.into_vec(),
        opts,
    )?;
    Ok((template.with_data(x)?, report))
}

/// Fixed-step driver for one model, scheme and step size.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub model: Model,
    pub scheme: SchemeCoefficients,
    pub g: GMatrix,
    pub alpha: f64,
    pub tau: f64,
    pub newton: NewtonOptions,
}

impl Integrator {
    /// Uses the certified G-matrix of `scheme` for the entropy diagnostics.
    pub fn new(
        model: Model,
        scheme: SchemeCoefficients,
        alpha: f64,
        tau: f64,
        newton: NewtonOptions,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Parameter(format!("time step must be positive, got {tau}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        newton.validate()?;
        let g = scheme.g_matrix()?;
        Ok(Self {
            model,
            scheme,
            g,
            alpha,
            tau,
            newton,
        })
    }

    pub fn steps(&self) -> usize {
        self.scheme.steps()
    }

    fn diagnostics(
        &self,
        scheme: &SchemeCoefficients,
        hist: &History,
        v_new: &GridState,
        report: NewtonReport,
        window: &History,
    ) -> Result<StepDiagnostics> {
        let sigma = apply_sigma(scheme, hist, v_new)?;
        let rho = apply_rho(scheme, hist, v_new)?;
        let q = self.model.density_exponent(self.alpha);
        let w = sigma.map(|x| x.powf(q));
        let h = sigma.h();
        let mass_residual = (0..sigma.n_species())
            .map(|sp| {
                let sum: f64 = sigma
                    .species(sp)
                    .zip(rho.species(sp))
                    .map(|(sg, rh)| sg.powf(q - 1.0) * rh)
                    .sum();
                (sum * h).abs()
            })
            .collect();
        Ok(StepDiagnostics {
            newton_iters: report.iterations,
            residual_norm: report.residual_norm,
            entropy: if window.len() == self.g.dim() {
                discrete_entropy(&self.g, window)?
            } else {
                f64::NAN
            },
            entropy_production: self.model.production(&w, self.alpha)?,
            mass_residual,
            min_sigma_v: sigma.min(),
            min_w: w.min(),
        })
    }

    /// Implicit Euler first step with diagnostics for the window `(v_0, v_1)`.
    pub fn startup(&self, v0: &GridState) -> Result<(GridState, StepDiagnostics)> {
        let hist = History::new(vec![v0.clone()])?;
        let euler = implicit_euler();
        let (v1, report) = solve(
            &self.model,
            &euler,
            &hist,
            v0.clone(),
            self.alpha,
            self.tau,
            &self.newton,
        )?;
        let window = History::new(vec![v0.clone(), v1.clone()])?;
        let diag = self.diagnostics(&euler, &hist, &v1, report, &window)?;
        Ok((v1, diag))
    }

    /// Solves for `v_{k+p}` given the full window `(v_k, ..., v_{k+p-1})`.
    pub fn step(&self, hist: &History) -> Result<(GridState, StepDiagnostics)> {
        let p = self.steps();
        if hist.len() != p {
            return Err(Error::Dimension(format!(
                "scheme needs {p} history states, got {}",
                hist.len()
            )));
        }
        let newest = hist.newest().clone();
        let guess = if p == 2 {
            let prev = &hist.states()[0];
            let data = newest
                .as_slice()
                .iter()
                .zip(prev.as_slice())
                .map(|(a, b)| 2.0 * a - b)
                .collect();
            newest.with_data(data)?
        } else {
            newest.clone()
        };
        let args = (&self.model, &self.scheme, hist);
        let solved = match solve(args.0, args.1, args.2, guess, self.alpha, self.tau, &self.newton)
        {
            Err(e) if p == 2 && e.is_solver_failure() => {
                debug!("extrapolated guess failed ({e}); retrying from the newest state");
                solve(args.0, args.1, args.2, newest, self.alpha, self.tau, &self.newton)
            }
            other => other,
        };
        let (v_new, report) = solved?;
        let window = hist.shifted(v_new.clone())?;
        let diag = self.diagnostics(&self.scheme, hist, &v_new, report, &window)?;
        Ok((v_new, diag))
    }

    /// Computes `v_1, ..., v_{n_steps}` from `v_0`; with `snapshot_every > 0`
    /// the states `v_0, v_m, v_{2m}, ...` are kept.
    pub fn run(
        &self,
        v0: &GridState,
        n_steps: usize,
        snapshot_every: usize,
    ) -> std::result::Result<Trajectory, RunFailure> {
        let p = self.steps();
        let fail = |traj: Trajectory, error: Error| RunFailure {
            partial: Box::new(traj),
            error,
        };
        let initial = History::new(vec![v0.clone(); p]).and_then(|w| {
            if v0.n_species() != self.model.n_species() {
                return Err(Error::Dimension(format!(
                    "model has {} species, initial state has {}",
                    self.model.n_species(),
                    v0.n_species()
                )));
            }
            v0.check_positive()?;
            Ok(w)
        });
        let window = match initial {
            Ok(w) => w,
            Err(e) => {
                let traj = Trajectory {
                    initial_entropy: f64::NAN,
                    records: vec![],
                    snapshots: vec![],
                    window: History::new(vec![v0.clone()]).expect("single state"),
                };
                return Err(fail(traj, e));
            }
        };
        let mut traj = Trajectory {
            initial_entropy: discrete_entropy(&self.g, &window).unwrap_or(f64::NAN),
            records: Vec::with_capacity(n_steps),
            snapshots: vec![],
            window,
        };
        let snap = |traj: &mut Trajectory, step: usize, state: &GridState| {
            if snapshot_every > 0 && step.is_multiple_of(snapshot_every) {
                traj.snapshots.push(Snapshot {
                    step,
                    time: step as f64 * self.tau,
                    state: state.clone(),
                });
            }
        };
        snap(&mut traj, 0, v0);

        for k in 1..=n_steps {
            let result = if p == 2 && k == 1 {
                self.startup(v0)
            } else {
                self.step(&traj.window)
            };
            let (v_new, diagnostics) = match result {
                Ok(x) => x,
                Err(e) => {
                    warn!("step {k} failed: {e}");
                    return Err(fail(
                        traj,
                        Error::Step {
                            step: k,
                            source: Box::new(e),
                        },
                    ));
                }
            };
            snap(&mut traj, k, &v_new);
            if p == 2 && k == 1 {
                traj.window = History::new(vec![v0.clone(), v_new]).expect("same shape");
            } else {
                traj.window.advance(v_new).expect("same shape");
            }
            traj.records.push(StepRecord {
                step: k,
                time: k as f64 * self.tau,
                diagnostics,
            });
        }
        Ok(traj)
    }
}
