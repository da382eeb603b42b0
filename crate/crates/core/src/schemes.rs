//! One-leg multistep schemes `(rho, sigma)` with
//! `rho(E) u_k = sum_j alpha_j u_{k+j}` and `sigma(E) u_k = sum_j beta_j u_{k+j}`.
//!
//! Besides the named schemes this module provides the two-parameter family of
//! all second-order two-step schemes, the order conditions, and a numerical
//! certifier for G-stability. The certifier is the authority on the G-matrix
//! convention: candidate matrices (such as [`family_g_matrix`]) are checked
//! against the defining inequality
//!
//! ```text
//! (rho(E)v) (sigma(E)v) - 1/2 V_1^T G V_1 + 1/2 V_0^T G V_0 >= 0   for all v
//! ```
//!
//! and rescaled by two when the candidate only satisfies the variant of the
//! inequality without the factors 1/2.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::{Error, Result};

/// Absolute tolerance on the order-condition residuals.
pub const ORDER_TOL: f64 = 1e-12;
/// Tolerance on the normalization `sigma(1) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-13;
/// Relative tolerance of the PSD test, w.r.t. the largest entry of the
/// remainder, of `G` and of `alpha beta^T`.
pub const PSD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeCoefficients {
    name: String,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl SchemeCoefficients {
    /// Builds a `p`-step scheme from `p + 1` coefficients each.
    ///
    /// Requires `p` in `{1, 2}`, `alpha_p > 0`, `beta_p > 0` and
    /// `sum(betas) = 1`.
    pub fn new(name: impl Into<String>, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if alphas.len() != betas.len() {
            return Err(Error::Parameter(format!(
                "{name}: {} alpha coefficients but {} beta coefficients",
                alphas.len(),
                betas.len()
            )));
        }
        let p = alphas.len().saturating_sub(1);
        if !(1..=2).contains(&p) {
            return Err(Error::Parameter(format!(
                "{name}: step count must be 1 or 2, got {p}"
            )));
        }
        if alphas.iter().chain(&betas).any(|c| !c.is_finite()) {
            return Err(Error::Parameter(format!("{name}: non-finite coefficient")));
        }
        if alphas[p] <= 0.0 {
            return Err(Error::Parameter(format!(
                "{name}: leading coefficient alpha_p = {} must be positive",
                alphas[p]
            )));
        }
        if betas[p] <= 0.0 {
            return Err(Error::Parameter(format!(
                "{name}: leading coefficient beta_p = {} must be positive",
                betas[p]
            )));
        }
        let sigma_one: f64 = betas.iter().sum();
        if (sigma_one - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Parameter(format!(
                "{name}: sigma(1) = {sigma_one} is not normalized to 1"
            )));
        }
        Ok(Self {
            name,
            alphas,
            betas,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of steps `p`.
    pub fn steps(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn leading_alpha(&self) -> f64 {
        self.alphas[self.steps()]
    }

    pub fn leading_beta(&self) -> f64 {
        self.betas[self.steps()]
    }

    /// Evaluates the normalization, consistency and second-order conditions.
    pub fn check_order(&self) -> OrderReport {
        let moment = |c: &[f64], k: u32| -> f64 {
            c.iter()
                .enumerate()
                .map(|(j, &cj)| {
                    let j = j as f64;
                    let weight = match k {
                        0 => 1.0,
                        1 => j,
                        _ => j * (j - 1.0),
                    };
                    weight * cj
                })
                .sum()
        };
        let rho_1 = moment(&self.alphas, 0);
        let drho_1 = moment(&self.alphas, 1);
        let ddrho_1 = moment(&self.alphas, 2);
        let sigma_1 = moment(&self.betas, 0);
        let dsigma_1 = moment(&self.betas, 1);
        let residuals = [
            rho_1,
            drho_1 - 1.0,
            sigma_1 - 1.0,
            drho_1 + ddrho_1 - 2.0 * dsigma_1,
        ];
        let consistent = residuals[..3].iter().all(|r| r.abs() < ORDER_TOL);
        OrderReport {
            consistent,
            second_order: consistent && residuals[3].abs() < ORDER_TOL,
            residuals,
        }
    }

    /// The free parameters `(alpha_2, beta_2)` of a two-step scheme.
    pub fn family_parameters(&self) -> Option<(f64, f64)> {
        (self.steps() == 2).then(|| (self.alphas[2], self.betas[2]))
    }

    /// A certified G-matrix for this scheme, in the convention of the
    /// defining inequality (with factors 1/2).
    ///
    /// One-step schemes are tried with the identity; second-order two-step
    /// schemes with the closed-form family matrix, rescaled as certified.
    pub fn g_matrix(&self) -> Result<GMatrix> {
        let candidate = match self.steps() {
            1 => GMatrix::identity(1),
            _ => {
                if !self.check_order().second_order {
                    return Err(Error::GStabilityViolation(format!(
                        "{}: no G-matrix candidate for a two-step scheme that is not of second order",
                        self.name
                    )));
                }
                let (a2, b2) = self.family_parameters().expect("two-step scheme");
                family_g_matrix(a2, b2)?
            }
        };
        let cert = verify_g_stability(self, &candidate)?;
        if !cert.certified {
            return Err(Error::GStabilityViolation(format!(
                "{}: remainder has minimum eigenvalue {:e}",
                self.name, cert.remainder_min_eig
            )));
        }
        Ok(candidate.scaled(cert.scale_used))
    }

    /// Applies `sum_j c_j x_j` for the alpha (`rho`) coefficients.
    pub fn rho_of(&self, values: &[f64]) -> f64 {
        dot(&self.alphas, values)
    }

    /// Applies `sum_j c_j x_j` for the beta (`sigma`) coefficients.
    pub fn sigma_of(&self, values: &[f64]) -> f64 {
        dot(&self.betas, values)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residuals of the four conditions
/// `rho(1)`, `rho'(1) - 1`, `sigma(1) - 1`, `rho'(1) + rho''(1) - 2 sigma'(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReport {
    pub consistent: bool,
    pub second_order: bool,
    pub residuals: [f64; 4],
}

/// Two-step backward differentiation formula.
pub fn bdf2() -> SchemeCoefficients {
    SchemeCoefficients::new("bdf2", vec![0.5, -2.0, 1.5], vec![0.0, 0.0, 1.0])
        .expect("valid coefficients")
}

/// Implicit mid-point rule.
pub fn implicit_midpoint() -> SchemeCoefficients {
    SchemeCoefficients::new("midpoint", vec![-1.0, 1.0], vec![0.5, 0.5])
        .expect("valid coefficients")
}

/// Implicit Euler, used to compute the first step of two-step schemes.
pub fn implicit_euler() -> SchemeCoefficients {
    SchemeCoefficients::new("euler", vec![-1.0, 1.0], vec![0.0, 1.0]).expect("valid coefficients")
}

/// The two-step gamma-method, `0 < gamma <= 1`.
pub fn gamma_method(gamma: f64) -> Result<SchemeCoefficients> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Parameter(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    let a = 1.0 / (gamma + 1.0);
    let b = 1.0 / (2.0 * (gamma + 1.0) * (gamma + 1.0));
    SchemeCoefficients::new(
        format!("gamma({gamma})"),
        vec![-gamma * a, (gamma - 1.0) * a, a],
        vec![
            gamma * (gamma + 3.0) * b,
            (gamma - 1.0) * (gamma - 1.0) * b,
            (3.0 * gamma + 1.0) * b,
        ],
    )
}

/// Checks the admissible region `beta2 > alpha2 / 2`, `alpha2 >= 1/2` of
/// the second-order family.
///
/// Below `alpha2 = 1/2` the second root `(alpha2 - 1) / alpha2` of `rho`
/// leaves the unit disk, so no G-matrix exists there.
fn check_family_parameters(alpha2: f64, beta2: f64) -> Result<()> {
    if !alpha2.is_finite() || !beta2.is_finite() {
        return Err(Error::Parameter(format!(
            "non-finite family parameters ({alpha2}, {beta2})"
        )));
    }
    if beta2 <= alpha2 / 2.0 {
        return Err(Error::GStabilityViolation(format!(
            "family requires beta2 > alpha2 / 2, got alpha2 = {alpha2}, beta2 = {beta2}"
        )));
    }
    if alpha2 < 0.5 {
        return Err(Error::GStabilityViolation(format!(
            "family requires alpha2 >= 1/2, got alpha2 = {alpha2}"
        )));
    }
    Ok(())
}

/// Member of the two-parameter family of second-order G-stable two-step
/// schemes.
pub fn family_scheme(alpha2: f64, beta2: f64) -> Result<SchemeCoefficients> {
    check_family_parameters(alpha2, beta2)?;
    SchemeCoefficients::new(
        format!("family({alpha2},{beta2})"),
        vec![alpha2 - 1.0, 1.0 - 2.0 * alpha2, alpha2],
        vec![0.5 - alpha2 + beta2, 0.5 + alpha2 - 2.0 * beta2, beta2],
    )
}

/// Closed-form G-matrix candidate of the second-order family.
///
/// This is a candidate only; pass it through [`verify_g_stability`], which
/// reports the scale (1 or 2) at which it satisfies the inequality.
pub fn family_g_matrix(alpha2: f64, beta2: f64) -> Result<GMatrix> {
    check_family_parameters(alpha2, beta2)?;
    let g00 = 0.25 * ((2.0 * alpha2 - 5.0) * alpha2 + 2.0 * beta2 + 2.0);
    let g01 = 0.25 * ((-2.0 * alpha2 + 3.0) * alpha2 - 2.0 * beta2);
    let g11 = 0.25 * ((2.0 * alpha2 - 1.0) * alpha2 + 2.0 * beta2);
    GMatrix::new(2, vec![g00, g01, g01, g11])
}

/// Symmetric positive definite `p x p` matrix defining the G-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GMatrix {
    entries: DMatrix<f64>,
}

impl GMatrix {
    /// Builds a G-matrix from row-major entries; rejects non-symmetric or
    /// non-positive-definite input.
    pub fn new(p: usize, row_major: Vec<f64>) -> Result<Self> {
        if p == 0 || row_major.len() != p * p {
            return Err(Error::Dimension(format!(
                "G-matrix of size {p} needs {} entries, got {}",
                p * p,
                row_major.len()
            )));
        }
        let entries = DMatrix::from_row_slice(p, p, &row_major);
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("G-matrix has non-finite entries".into()));
        }
        for i in 0..p {
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::Parameter(format!(
                        "G-matrix is not symmetric: G[{i}][{j}] = {} but G[{j}][{i}] = {}",
                        entries[(i, j)],
                        entries[(j, i)]
                    )));
                }
            }
        }
        if entries.clone().cholesky().is_none() {
            return Err(Error::Parameter(
                "G-matrix is not positive definite".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            entries: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * factor,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Outcome of [`verify_g_stability`].
#[derive(Debug, Clone)]
pub struct Certification {
    pub certified: bool,
    /// Minimum eigenvalue of the remainder form at `scale_used`.
    pub remainder_min_eig: f64,
    /// 1 or 2: the factor applied to the supplied G.
    pub scale_used: f64,
    /// Symmetric `(p+1) x (p+1)` matrix of the remainder form at `scale_used`.
    pub remainder: DMatrix<f64>,
}

/// Symmetric matrix `M` with `v^T M v = (rho v)(sigma v) - 1/2 V_1^T G V_1 + 1/2 V_0^T G V_0`.
pub fn remainder_form(scheme: &SchemeCoefficients, g: &GMatrix) -> Result<DMatrix<f64>> {
    let p = scheme.steps();
    if g.dim() != p {
        return Err(Error::Dimension(format!(
            "G-matrix is {0}x{0} but the scheme has {p} steps",
            g.dim()
        )));
    }
    let a = scheme.alphas();
    let b = scheme.betas();
    let mut m = DMatrix::<f64>::zeros(p + 1, p + 1);
    for i in 0..=p {
        for j in 0..=p {
            m[(i, j)] = 0.5 * (a[i] * b[j] + a[j] * b[i]);
        }
    }
    for i in 0..p {
        for j in 0..p {
            m[(i + 1, j + 1)] -= 0.5 * g.get(i, j);
            m[(i, j)] += 0.5 * g.get(i, j);
        }
    }
    Ok(m)
}

/// Certifies that `scheme` is G-stable with matrix `g`, retrying with `2 g`.
pub fn verify_g_stability(scheme: &SchemeCoefficients, g: &GMatrix) -> Result<Certification> {
    let attempt = |scale: f64| -> Result<Certification> {
        let remainder = remainder_form(scheme, &g.scaled(scale))?;
        // entries of the terms the remainder is built from; a remainder that
        // cancels to round-off would otherwise set its own tolerance
        let largest = remainder
            .iter()
            .chain(g.as_matrix().iter())
            .map(|x| x.abs() * scale)
            .chain(scheme.alphas().iter().flat_map(|a| {
                scheme.betas().iter().map(move |b| (a * b).abs())
            }))
            .fold(0.0f64, f64::max);
        let min_eig = SymmetricEigen::new(remainder.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Ok(Certification {
            certified: min_eig >= -PSD_REL_TOL * largest,
            remainder_min_eig: min_eig,
            scale_used: scale,
            remainder,
        })
    };
    let first = attempt(1.0)?;
    if first.certified {
        return Ok(first);
    }
    let second = attempt(2.0)?;
    if second.certified {
        return Ok(second);
    }
    Ok(first)
}
