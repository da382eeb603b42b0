//! Power entropies `h(u) = u^alpha`, the transformation `v = h(u)^{1/2}`, the
//! discrete entropy of a solution window and entropy-production diagnostics.

use crate::schemes::GMatrix;
use crate::state::{g_norm_sq, second_difference, GridState, History};
use crate::{Error, Result};

/// Exponent of the entropy density `h(u) = u^alpha`.
///
/// Analysis-backed runs need `1 < alpha <= 2`. With `experimental` set, any
/// finite `alpha >= 1` is accepted (e.g. `alpha = 1`, for which the
/// transformation still works but the dissipation theory does not apply).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig {
    alpha: f64,
    experimental: bool,
}

impl EntropyConfig {
    pub fn new(alpha: f64, experimental: bool) -> Result<Self> {
        let ok = if experimental {
            alpha.is_finite() && alpha >= 1.0
        } else {
            alpha > 1.0 && alpha <= 2.0
        };
        if !ok {
            return Err(Error::Parameter(format!(
                "entropy exponent alpha = {alpha} outside {}",
                if experimental { "[1, inf)" } else { "(1, 2]" }
            )));
        }
        Ok(Self {
            alpha,
            experimental,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn experimental(&self) -> bool {
        self.experimental
    }

    /// `h(u) = u^alpha`.
    pub fn density(&self, u: f64) -> f64 {
        u.powf(self.alpha)
    }
}

/// Upper bound `(sqrt(d) + 1)^2 / (d + 2)` of the analysis-backed exponent
/// range of the quantum diffusion equation in `d` space dimensions.
pub fn dlss_alpha_bound(dim: usize) -> f64 {
    let d = dim as f64;
    (d.sqrt() + 1.0).powi(2) / (d + 2.0)
}

/// `v = u^{alpha/2}` nodewise.
pub fn to_entropy_var(u: &GridState, alpha: f64) -> Result<GridState> {
    if let Some(k) = u.as_slice().iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::Domain(format!(
            "density must be nonnegative, found {} at index {k}",
            u.as_slice()[k]
        )));
    }
    let e = alpha / 2.0;
    Ok(u.map(|x| x.powf(e)))
}

/// `w = (sigma(E) v)^{2/alpha}` nodewise; requires a strictly positive input.
pub fn reconstruct_w(sigma_v: &GridState, alpha: f64) -> Result<GridState> {
    sigma_v.check_positive()?;
    let e = 2.0 / alpha;
    Ok(sigma_v.map(|x| x.powf(e)))
}

/// `H[V] = 1/2 |V|_G^2`.
pub fn discrete_entropy(g: &GMatrix, hist: &History) -> Result<f64> {
    Ok(0.5 * g_norm_sq(g, hist)?)
}

pub fn relative_entropy(h_k: f64, h_star: f64) -> f64 {
    h_k - h_star
}

fn check_density(w: &GridState) -> Result<()> {
    w.check_positive().map_err(|e| match e {
        Error::Positivity {
            species,
            node,
            value,
        } => Error::Domain(format!(
            "density must be positive, found {value:e} (species {species}, node {node})"
        )),
        other => other,
    })
}

/// `(2/alpha^2)(alpha - 1) int d_1 |(w_1^{alpha/2})_x|^2 + d_2 |(w_2^{alpha/2})_x|^2`
/// with forward differences and periodic wrap.
pub fn skt_entropy_production(w: &GridState, alpha: f64, d1: f64, d2: f64) -> Result<f64> {
    if w.n_species() != 2 {
        return Err(Error::Dimension(format!(
            "cross-diffusion production needs 2 species, got {}",
            w.n_species()
        )));
    }
    check_density(w)?;
    let n = w.n_nodes();
    let h = w.h();
    let mut total = 0.0;
    for (s, d) in [(0, d1), (1, d2)] {
        let p: Vec<f64> = w.species(s).map(|x| x.powf(alpha / 2.0)).collect();
        let grad_sq: f64 = (0..n)
            .map(|i| {
                let g = (p[(i + 1) % n] - p[i]) / h;
                g * g
            })
            .sum();
        total += d * grad_sq * h;
    }
    Ok(2.0 / (alpha * alpha) * (alpha - 1.0) * total)
}

/// `int (Laplacian w^{alpha/2})^2` via the three-point second difference,
/// without the alpha-dependent prefactor.
pub fn dlss_entropy_production(w: &GridState, alpha: f64) -> Result<f64> {
    check_density(w)?;
    let h = w.h();
    let mut total = 0.0;
    for s in 0..w.n_species() {
        let p: Vec<f64> = w.species(s).map(|x| x.powf(alpha / 2.0)).collect();
        total += second_difference(&p)
            .iter()
            .map(|d| (d / (h * h)).powi(2))
            .sum::<f64>();
    }
    Ok(total * h)
}
