//! Finite-difference discretization of the Shigesada-Kawasaki-Teramoto
//! cross-diffusion system on the periodic unit interval, in transformed
//! one-leg form.
//!
//! For species `s` (and `o` the other species) the residual at node `i` is
//!
//! ```text
//! r_{s,i} = (2/alpha) sigma_{s,i}^{q-1} (rho v)_{s,i}
//!         - (tau/h^2) D2[ d_s sigma_s^q + (a_s/2) sigma_s^{2q} + (sigma_s sigma_o)^q ]_i
//! ```
//!
//! with `sigma = sigma(E) v`, `D2` the periodic three-point second difference
//! and `q = 2/alpha`, so that `sigma^q = w` is the density. The spatial
//! operator is the conservative form `-(d_s w_s + a_s/2 w_s^2 + w_1 w_2)_xx`.
//! [`SktForm::Literal`] instead uses `q = alpha/2`, for comparison runs.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::CyclicBandMatrix;
use crate::schemes::SchemeCoefficients;
use crate::state::{apply_rho, apply_sigma, GridState, History};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SktParams {
    pub d1: f64,
    pub d2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SktParams {
    pub fn new(d1: f64, d2: f64, a1: f64, a2: f64) -> Result<Self> {
        let p = Self { d1, d2, a1, a2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d1", self.d1), ("d2", self.d2), ("a1", self.a1), ("a2", self.a2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `4 a1 a2 >= max(a1, a2) + 1`, the condition under which the continuous
    /// system dissipates the power entropies. Reported, not enforced.
    pub fn entropy_condition_met(&self) -> bool {
        4.0 * self.a1 * self.a2 >= self.a1.max(self.a2) + 1.0
    }

    fn diffusion(&self, species: usize) -> f64 {
        if species == 0 {
            self.d1
        } else {
            self.d2
        }
    }

    fn self_diffusion(&self, species: usize) -> f64 {
        if species == 0 {
            self.a1
        } else {
            self.a2
        }
    }

    /// Exchanges the roles of the two species.
    pub fn swapped(&self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
            a1: self.a2,
            a2: self.a1,
        }
    }
}

/// The two parameter sets used in the population experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SktTest {
    /// Weak self-diffusion, `d = 1`, `a = 0.01`.
    A,
    /// All coefficients equal to one.
    B,
}

impl SktTest {
    pub fn params(self) -> SktParams {
        match self {
            SktTest::A => SktParams {
                d1: 1.0,
                d2: 1.0,
                a1: 0.01,
                a2: 0.01,
            },
            SktTest::B => SktParams {
                d1: 1.0,
                d2: 1.0,
                a1: 1.0,
                a2: 1.0,
            },
        }
    }
}

/// Initial densities `u1 = 2 e^{-x} sin(2 pi x) + 10`,
/// `u2 = -4 e^{-x} sin(2 pi x) + 10` sampled at `x_i = i / N`.
pub fn skt_initial_data(test: SktTest, n: usize) -> Result<(GridState, SktParams)> {
    if n < 4 {
        return Err(Error::Parameter(format!("need at least 4 nodes, got {n}")));
    }
    let u = GridState::from_fn(2, n, |s, x| {
        let bump = (-x).exp() * (2.0 * PI * x).sin();
        if s == 0 {
            2.0 * bump + 10.0
        } else {
            -4.0 * bump + 10.0
        }
    });
    Ok((u, test.params()))
}

/// Which exponents the finite-difference residual uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SktForm {
    /// `w = sigma^{2/alpha}`, time weight `sigma^{2/alpha - 1}`.
    #[default]
    Corrected,
    /// `sigma^{alpha/2}` in place of `w`, time weight `sigma^{alpha/2 - 1}`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SktOperator {
    pub params: SktParams,
    pub form: SktForm,
}

impl SktOperator {
    pub fn new(params: SktParams) -> Self {
        Self {
            params,
            form: SktForm::Corrected,
        }
    }

    pub fn with_form(params: SktParams, form: SktForm) -> Self {
        Self { params, form }
    }

    /// Exponent `q` with `sigma^q` playing the role of the density.
    pub fn exponent(&self, alpha: f64) -> f64 {
        match self.form {
            SktForm::Corrected => 2.0 / alpha,
            SktForm::Literal => alpha / 2.0,
        }
    }

    fn blended(
        &self,
        hist: &History,
        v_new: &GridState,
        s: &SchemeCoefficients,
    ) -> Result<(GridState, GridState)> {
        if v_new.n_species() != 2 {
            return Err(Error::Dimension(format!(
                "cross-diffusion system needs 2 species, got {}",
                v_new.n_species()
            )));
        }
        let sigma = apply_sigma(s, hist, v_new)?;
        sigma.check_positive()?;
        let rho = apply_rho(s, hist, v_new)?;
        Ok((sigma, rho))
    }

    /// Potentials `d_s sigma_s^q + (a_s/2) sigma_s^{2q} + (sigma_1 sigma_2)^q`,
    /// node-major like the state.
    fn potentials(&self, sigma: &GridState, q: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(sigma.as_slice().len());
        for node in sigma.as_slice().chunks_exact(2) {
            let w = [node[0].powf(q), node[1].powf(q)];
            let cross = w[0] * w[1];
            for s in 0..2 {
                out.push(
                    self.params.diffusion(s) * w[s]
                        + 0.5 * self.params.self_diffusion(s) * w[s] * w[s]
                        + cross,
                );
            }
        }
        out
    }

    pub fn residual(
        &self,
        hist: &History,
        v_new: &GridState,
        s: &SchemeCoefficients,
        alpha: f64,
        tau: f64,
    ) -> Result<Vec<f64>> {
        let (sigma, rho) = self.blended(hist, v_new, s)?;
        let q = self.exponent(alpha);
        let n = sigma.n_nodes();
        let h = sigma.h();
        let c = tau / (h * h);
        let pot = self.potentials(&sigma, q);
        let sig = sigma.as_slice();
        let rh = rho.as_slice();
        let mut r = vec![0.0; 2 * n];
        for i in 0..n {
            let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
            for sp in 0..2 {
                let k = 2 * i + sp;
                let time = 2.0 / alpha * sig[k].powf(q - 1.0) * rh[k];
                let lap = pot[2 * ip + sp] - 2.0 * pot[k] + pot[2 * im + sp];
                r[k] = time - c * lap;
            }
        }
        Ok(r)
    }

    /// Spatial part `-(tau/h^2) D2[potential]` alone.
    pub fn spatial_part(&self, sigma: &GridState, alpha: f64, tau: f64) -> Vec<f64> {
        let q = self.exponent(alpha);
        let n = sigma.n_nodes();
        let h = sigma.h();
        let pot = self.potentials(sigma, q);
        (0..2 * n)
            .map(|k| {
                let (i, sp) = (k / 2, k % 2);
                let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
                -tau / (h * h) * (pot[2 * ip + sp] - 2.0 * pot[k] + pot[2 * im + sp])
            })
            .collect()
    }

    /// Analytic Jacobian of [`Self::residual`] with respect to `v_new`.
    pub fn jacobian(
        &self,
        hist: &History,
        v_new: &GridState,
        s: &SchemeCoefficients,
        alpha: f64,
        tau: f64,
    ) -> Result<CyclicBandMatrix> {
        let (sigma, rho) = self.blended(hist, v_new, s)?;
        let q = self.exponent(alpha);
        let n = sigma.n_nodes();
        let h = sigma.h();
        let c = tau / (h * h);
        let (ap, bp) = (s.leading_alpha(), s.leading_beta());
        let sig = sigma.as_slice();
        let rh = rho.as_slice();

        // dpot[k][t]: derivative of potential k = (node, species) w.r.t.
        // v_new of species t at the same node
        let mut dpot = vec![[0.0f64; 2]; 2 * n];
        for i in 0..n {
            let sg = [sig[2 * i], sig[2 * i + 1]];
            let w = [sg[0].powf(q), sg[1].powf(q)];
            let dw = [q * sg[0].powf(q - 1.0), q * sg[1].powf(q - 1.0)];
            for sp in 0..2 {
                let o = 1 - sp;
                let d = self.params.diffusion(sp);
                let a = self.params.self_diffusion(sp);
                dpot[2 * i + sp][sp] = bp * (d * dw[sp] + a * w[sp] * dw[sp] + dw[sp] * w[o]);
                dpot[2 * i + sp][o] = bp * w[sp] * dw[o];
            }
        }

        let mut jac = CyclicBandMatrix::zeros(n, 2, 1);
        for i in 0..n {
            let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
            for sp in 0..2 {
                let row = 2 * i + sp;
                let time = 2.0 / alpha
                    * ((q - 1.0) * sig[row].powf(q - 2.0) * bp * rh[row]
                        + sig[row].powf(q - 1.0) * ap);
                jac.add(row, row, time);
                for (node, weight) in [(im, 1.0), (i, -2.0), (ip, 1.0)] {
                    for t in 0..2 {
                        jac.add(row, 2 * node + t, -c * weight * dpot[2 * node + sp][t]);
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Residual of the corrected scheme.
pub fn skt_residual(
    hist: &History,
    v_new: &GridState,
    s: &SchemeCoefficients,
    par: &SktParams,
    alpha: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    SktOperator::new(*par).residual(hist, v_new, s, alpha, tau)
}

/// Analytic Jacobian of [`skt_residual`].
pub fn skt_jacobian(
    hist: &History,
    v_new: &GridState,
    s: &SchemeCoefficients,
    par: &SktParams,
    alpha: f64,
    tau: f64,
) -> Result<CyclicBandMatrix> {
    SktOperator::new(*par).jacobian(hist, v_new, s, alpha, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{bdf2, gamma_method, implicit_midpoint};
    use crate::state::second_difference;
    use approx::assert_abs_diff_eq;

    #[test]
    fn initial_data_values() {
        let (u, par) = skt_initial_data(SktTest::B, 8).unwrap();
        assert_eq!(par, SktParams::new(1.0, 1.0, 1.0, 1.0).unwrap());
        assert_eq!(u.value(0, 0), 10.0);
        assert_eq!(u.value(1, 0), 10.0);
        // x = 0.25 is node 2 of 8
        assert_abs_diff_eq!(u.value(0, 2), 11.55760156614281, epsilon = 1e-12);
        let (_, par) = skt_initial_data(SktTest::A, 8).unwrap();
        assert_eq!((par.a1, par.a2), (0.01, 0.01));
        assert!(!par.entropy_condition_met());
        assert!(SktTest::B.params().entropy_condition_met());
        assert!(skt_initial_data(SktTest::A, 3).is_err());
    }

    #[test]
    fn params_must_be_positive() {
        assert!(SktParams::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(SktParams::new(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn constant_state_has_zero_residual() {
        let par = SktTest::B.params();
        for s in [bdf2(), gamma_method(0.2).unwrap(), implicit_midpoint()] {
            let v = GridState::constant(2, 12, 3.3);
            let hist = History::new(vec![v.clone(); s.steps()]).unwrap();
            let r = skt_residual(&hist, &v, &s, &par, 1.5, 1e-3).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-13), "{}", s.name());
        }
    }

    #[test]
    fn spatial_part_matches_fourier_symbol() {
        // w1 = 2 + sin(2 pi x), w2 = c, alpha = 2 so w = sigma; constant in
        // time so only the spatial part remains
        let n = 32;
        let h = 1.0 / n as f64;
        let (tau, cst) = (1e-3, 1.5);
        let par = SktParams::new(0.7, 1.3, 0.4, 0.9).unwrap();
        let v = GridState::from_fn(2, n, |s, x| if s == 0 { 2.0 + (2.0 * PI * x).sin() } else { cst });
        let hist = History::new(vec![v.clone(), v.clone()]).unwrap();
        let r = skt_residual(&hist, &v, &bdf2(), &par, 2.0, tau).unwrap();
        let s1 = (PI * h).sin().powi(2);
        let s2 = (2.0 * PI * h).sin().powi(2);
        for i in 0..n {
            let x = i as f64 * h;
            // D2[w1] = -4 sin^2(pi h) sin(2 pi x), D2[w1^2] = 4 D2[sin] + 2 sin^2(2 pi h) cos(4 pi x)
            let d2_w = -4.0 * s1 * (2.0 * PI * x).sin();
            let d2_w2 = 4.0 * d2_w + 2.0 * s2 * (4.0 * PI * x).cos();
            let expected = -tau / (h * h) * ((par.d1 + cst) * d2_w + 0.5 * par.a1 * d2_w2);
            assert_abs_diff_eq!(r[2 * i], expected, epsilon = 1e-12);
        }
        // the stencil helper agrees with the closed-form symbol
        let f: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 * h).sin()).collect();
        for (i, d) in second_difference(&f).iter().enumerate() {
            assert_abs_diff_eq!(*d, -4.0 * s1 * f[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn alpha_two_reduces_to_untransformed_scheme() {
        let n = 10;
        let par = SktTest::B.params();
        let tau = 1e-4;
        let a = GridState::from_fn(2, n, |s, x| 3.0 + s as f64 + (2.0 * PI * x).cos());
        let b = a.map(|x| x * 1.01);
        let c = a.map(|x| x * 1.02 + 0.01);
        let hist = History::new(vec![a.clone(), b.clone()]).unwrap();
        let s = gamma_method(0.2).unwrap();
        let r = skt_residual(&hist, &c, &s, &par, 2.0, tau).unwrap();
        let sigma = apply_sigma(&s, &hist, &c).unwrap();
        let rho = apply_rho(&s, &hist, &c).unwrap();
        let spatial = SktOperator::new(par).spatial_part(&sigma, 2.0, tau);
        for k in 0..2 * n {
            assert_abs_diff_eq!(r[k], rho.as_slice()[k] + spatial[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_small_tau_alpha_two_is_scaled_identity() {
        let n = 6;
        let a = GridState::from_fn(2, n, |s, x| 2.0 + s as f64 + x);
        let hist = History::new(vec![a.clone(), a.clone()]).unwrap();
        let s = bdf2();
        let j = skt_jacobian(&hist, &a, &s, &SktTest::B.params(), 2.0, 0.0).unwrap();
        for r in 0..2 * n {
            for c in 0..2 * n {
                let expected = if r == c { s.leading_alpha() } else { 0.0 };
                assert_abs_diff_eq!(j.get(r, c), expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn jacobian_rows_of_spatial_block_sum_to_zero_on_constants() {
        // on a constant state the time term has zero rho; the spatial
        // stencil columns (1, -2, 1) cancel per species pair
        let n = 8;
        let v = GridState::constant(2, n, 2.5);
        let hist = History::new(vec![v.clone(), v.clone()]).unwrap();
        let s = bdf2();
        let alpha = 1.5;
        let j = skt_jacobian(&hist, &v, &s, &SktTest::B.params(), alpha, 1e-3).unwrap();
        let time_diag = 2.0 / alpha * 2.5f64.powf(2.0 / alpha - 1.0) * s.leading_alpha();
        for r in 0..2 * n {
            let sum: f64 = (0..2 * n).map(|c| j.get(r, c)).sum();
            assert_abs_diff_eq!(sum, time_diag, epsilon = 1e-10);
        }
    }

    #[test]
    fn positivity_violation_reported() {
        let n = 6;
        let v = GridState::constant(2, n, 1.0);
        let mut bad = v.clone().into_vec();
        bad[3] = -0.5;
        let bad = v.with_data(bad).unwrap();
        let hist = History::new(vec![v.clone(), v]).unwrap();
        let err = skt_residual(&hist, &bad, &bdf2(), &SktTest::B.params(), 1.5, 1e-4).unwrap_err();
        assert!(matches!(err, Error::Positivity { species: 1, node: 1, .. }));
    }

    #[test]
    fn literal_form_coincides_at_alpha_two() {
        let n = 8;
        let a = GridState::from_fn(2, n, |s, x| 2.0 + s as f64 + (2.0 * PI * x).sin() * 0.3);
        let b = a.map(|x| x * 1.05);
        let hist = History::new(vec![a.clone(), a]).unwrap();
        let par = SktTest::A.params();
        let lit = SktOperator::with_form(par, SktForm::Literal);
        let cor = SktOperator::new(par);
        let s = bdf2();
        assert_eq!(
            lit.residual(&hist, &b, &s, 2.0, 1e-4).unwrap(),
            cor.residual(&hist, &b, &s, 2.0, 1e-4).unwrap()
        );
        assert_ne!(
            lit.residual(&hist, &b, &s, 1.5, 1e-4).unwrap(),
            cor.residual(&hist, &b, &s, 1.5, 1e-4).unwrap()
        );
    }
}
