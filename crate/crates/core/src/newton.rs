//! Damped Newton iteration with a positivity safeguard.
//!
//! Each Newton direction is scaled by `1, 1/2, 1/4, ...` until the residual
//! can be evaluated (the blended state stays strictly positive) and its
//! max-norm does not increase.

use serde::{Deserialize, Serialize};

use crate::linalg::CyclicBandMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Stop once the max-norm of the residual is at most this.
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Step halvings allowed per Newton iteration.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_iters: 50,
            max_halvings: 30,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || self.max_iters == 0 || self.max_halvings == 0 {
            return Err(Error::Parameter(format!(
                "Newton options must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norm: f64,
    /// Total number of step halvings over all iterations.
    pub halvings: usize,
}

pub fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves `residual(x) = 0` starting from `guess`.
///
/// `residual` signals an inadmissible iterate (non-positive blended state)
/// with [`Error::Positivity`]; such trial points are rejected by halving.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport)>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<CyclicBandMatrix>,
{
    let mut x = guess;
    let mut r = residual(&x)?;
    let mut norm = max_norm(&r);
    let mut halvings_total = 0;
    for iter in 0..opts.max_iters {
        if norm <= opts.tol_residual {
            return Ok((
                x,
                NewtonReport {
                    iterations: iter,
                    residual_norm: norm,
                    halvings: halvings_total,
                },
            ));
        }
        let dx = jacobian(&x)?.solve(&r)?;
        let mut lambda = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - lambda * d).collect();
            match residual(&trial) {
                Ok(rt) => {
                    let nt = max_norm(&rt);
                    if nt <= norm {
                        x = trial;
                        r = rt;
                        norm = nt;
                        break;
                    }
                }
                Err(Error::Positivity { .. }) => {}
                Err(e) => return Err(e),
            }
            if halvings == opts.max_halvings {
                return Err(Error::PositivityTrap {
                    iteration: iter,
                    halvings,
                    residual: norm,
                });
            }
            halvings += 1;
            lambda *= 0.5;
        }
        halvings_total += halvings;
    }
    if norm <= opts.tol_residual {
        Ok((
            x,
            NewtonReport {
                iterations: opts.max_iters,
                residual_norm: norm,
                halvings: halvings_total,
            },
        ))
    } else {
        Err(Error::NonConvergence {
            iterations: opts.max_iters,
            residual: norm,
        })
    }
}
