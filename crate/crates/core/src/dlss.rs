//! Finite-difference discretization of the one-dimensional DLSS equation
//! `u_t + (u (log u)_xx)_xx = 0` on the periodic unit interval, in
//! transformed one-leg form:
//!
//! ```text
//! r_i = (2/alpha) sigma_i^{2/alpha - 1} (rho v)_i + (tau/h^4) D2[ w D2(log w) ]_i,
//! w = sigma^{2/alpha}.
//! ```
//!
//! The strong form is discretized directly; the nested second differences
//! couple five neighbouring nodes. The Jacobian is obtained by colored
//! central-difference probing of the residual.

use crate::linalg::CyclicBandMatrix;
use crate::schemes::SchemeCoefficients;
use crate::state::{apply_rho, apply_sigma, second_difference, GridState, History};
use crate::{Error, Result};

/// Relative probing step of the finite-difference Jacobian.
pub const FD_STEP: f64 = 1e-6;

/// Node bandwidth of the residual stencil.
const BANDWIDTH: usize = 2;

/// `(w (log w)_xx)_xx` at the nodes, via nested periodic second differences.
pub fn dlss_operator(w: &GridState) -> Result<Vec<f64>> {
    if w.n_species() != 1 {
        return Err(Error::Dimension(format!(
            "DLSS equation has one species, got {}",
            w.n_species()
        )));
    }
    w.check_positive()?;
    let h = w.h();
    let log_w: Vec<f64> = w.as_slice().iter().map(|x| x.ln()).collect();
    let flux: Vec<f64> = second_difference(&log_w)
        .iter()
        .zip(w.as_slice())
        .map(|(d, wi)| wi * d)
        .collect();
    let h4 = h.powi(4);
    Ok(second_difference(&flux).into_iter().map(|x| x / h4).collect())
}

pub fn dlss_residual(
    hist: &History,
    v_new: &GridState,
    s: &SchemeCoefficients,
    alpha: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    let sigma = apply_sigma(s, hist, v_new)?;
    sigma.check_positive()?;
    let rho = apply_rho(s, hist, v_new)?;
    let q = 2.0 / alpha;
    let w = sigma.map(|x| x.powf(q));
    let spatial = dlss_operator(&w)?;
    Ok(sigma
        .as_slice()
        .iter()
        .zip(rho.as_slice())
        .zip(&spatial)
        .map(|((sg, rh), a)| 2.0 / alpha * sg.powf(q - 1.0) * rh + tau * a)
        .collect())
}

/// Greedy coloring of the columns such that no two columns of the same
/// color have overlapping row supports (cyclic distance > 2 * bandwidth).
fn probe_colors(n: usize, bandwidth: usize) -> Vec<Vec<usize>> {
    let reach = 2 * bandwidth;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        let clash = |c: usize| {
            groups[c].iter().any(|&k| {
                let d = j.abs_diff(k);
                d.min(n - d) <= reach
            })
        };
        let c = (0..groups.len()).find(|&c| !clash(c)).unwrap_or_else(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[c].push(j);
    }
    groups
}

/// Banded Jacobian of [`dlss_residual`] by colored central differences.
pub fn dlss_jacobian(
    hist: &History,
    v_new: &GridState,
    s: &SchemeCoefficients,
    alpha: f64,
    tau: f64,
) -> Result<CyclicBandMatrix> {
    let n = v_new.n_nodes();
    let base = v_new.as_slice();
    let steps: Vec<f64> = base.iter().map(|x| FD_STEP * x.abs().max(1.0)).collect();
    let mut jac = CyclicBandMatrix::zeros(n, 1, BANDWIDTH);
    for group in probe_colors(n, BANDWIDTH) {
        let mut plus = base.to_vec();
        let mut minus = base.to_vec();
        for &j in &group {
            plus[j] += steps[j];
            minus[j] -= steps[j];
        }
        let rp = dlss_residual(hist, &v_new.with_data(plus)?, s, alpha, tau)?;
        let rm = dlss_residual(hist, &v_new.with_data(minus)?, s, alpha, tau)?;
        for &j in &group {
            for d in 0..=2 * BANDWIDTH {
                let i = (j + n + d - BANDWIDTH) % n;
                // small grids: neighbours wrap onto each other
                if d > 0 && (0..d).any(|e| (j + n + e - BANDWIDTH) % n == i) {
                    continue;
                }
                jac.add(i, j, (rp[i] - rm[i]) / (2.0 * steps[j]));
            }
        }
    }
    Ok(jac)
}
