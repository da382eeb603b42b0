//! Randomized checks of the structural invariants.

use oneleg::dlss::{dlss_jacobian, dlss_operator, dlss_residual};
use oneleg::entropy::{discrete_entropy, reconstruct_w, to_entropy_var};
use oneleg::schemes::{
    family_g_matrix, bdf2, family_scheme, gamma_method, verify_g_stability, GMatrix,
};
use oneleg::skt::{SktOperator, SktParams};
use oneleg::state::{apply_rho, apply_sigma, g_norm_sq, GridState, History};
use oneleg::SchemeCoefficients;
use proptest::prelude::*;

fn positive_state(ns: usize, n: usize) -> impl Strategy<Value = GridState> {
    prop::collection::vec(0.5f64..3.0, ns * n)
        .prop_map(move |d| GridState::from_interleaved(ns, n, d).unwrap())
}

fn any_state(ns: usize, n: usize) -> impl Strategy<Value = GridState> {
    prop::collection::vec(-2.0f64..2.0, ns * n)
        .prop_map(move |d| GridState::from_interleaved(ns, n, d).unwrap())
}

fn family_params() -> impl Strategy<Value = (f64, f64)> {
    (0.5f64..3.0, 0.01f64..10.0).prop_map(|(a2, gap)| (a2, a2 / 2.0 + gap))
}

fn certified_scheme() -> impl Strategy<Value = SchemeCoefficients> {
    prop_oneof![
        Just(bdf2()),
        (0.01f64..=1.0).prop_map(|g| gamma_method(g).unwrap()),
        family_params().prop_map(|(a, b)| family_scheme(a, b).unwrap()),
    ]
}

/// Dense central-difference Jacobian of `f` at `x`.
fn dense_fd(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let step = 1e-6 * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let (rp, rm) = (f(&xp), f(&xm));
        for i in 0..n {
            jac[i][j] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    jac
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn family_is_second_order_and_certified((a2, b2) in family_params()) {
        let s = family_scheme(a2, b2).unwrap();
        let report = s.check_order();
        prop_assert!(report.second_order, "{:?}", report);
        let c = verify_g_stability(&s, &family_g_matrix(a2, b2).unwrap()).unwrap();
        prop_assert!(c.certified);
        prop_assert!(c.remainder_min_eig >= -1e-10);
        prop_assert!(c.scale_used == 1.0 || c.scale_used == 2.0);
    }

    #[test]
    fn certification_invariant_under_halving((a2, b2) in family_params()) {
        let s = family_scheme(a2, b2).unwrap();
        let g = s.g_matrix().unwrap();
        let full = verify_g_stability(&s, &g).unwrap();
        let half = verify_g_stability(&s, &g.scaled(0.5)).unwrap();
        prop_assert!(full.certified && full.scale_used == 1.0);
        prop_assert!(half.certified && half.scale_used == 2.0);
    }

    #[test]
    fn g_norm_positive_on_nonzero_windows(
        s in certified_scheme(),
        a in any_state(1, 6),
        b in any_state(1, 6),
    ) {
        prop_assume!(a.as_slice().iter().chain(b.as_slice()).any(|x| *x != 0.0));
        let g = s.g_matrix().unwrap();
        let w = History::new(vec![a, b]).unwrap();
        prop_assert!(g_norm_sq(&g, &w).unwrap() > 0.0);
    }

    #[test]
    fn reconstruction_inverts_transformation(
        u in positive_state(2, 8),
        alpha in prop::sample::select(vec![1.0, 1.5, 2.0]),
    ) {
        let w = reconstruct_w(&to_entropy_var(&u, alpha).unwrap(), alpha).unwrap();
        for (a, b) in w.as_slice().iter().zip(u.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn g_stability_inequality_on_grid_functions(
        s in certified_scheme(),
        v0 in any_state(2, 5),
        v1 in any_state(2, 5),
        v2 in any_state(2, 5),
    ) {
        let g = s.g_matrix().unwrap();
        let hist = History::new(vec![v0, v1]).unwrap();
        let rho = apply_rho(&s, &hist, &v2).unwrap();
        let sigma = apply_sigma(&s, &hist, &v2).unwrap();
        let lhs = rho.inner(&sigma).unwrap();
        let before = discrete_entropy(&g, &hist).unwrap();
        let after = discrete_entropy(&g, &hist.shifted(v2).unwrap()).unwrap();
        prop_assert!(lhs >= after - before - 1e-12 * (1.0 + before.abs() + after.abs()),
            "{} < {}", lhs, after - before);
    }
}

fn skt_params() -> impl Strategy<Value = SktParams> {
    (0.1f64..2.0, 0.1f64..2.0, 0.01f64..2.0, 0.01f64..2.0)
        .prop_map(|(d1, d2, a1, a2)| SktParams::new(d1, d2, a1, a2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn skt_jacobian_matches_finite_differences(
        par in skt_params(),
        s in certified_scheme(),
        alpha in 1.1f64..2.0,
        v0 in positive_state(2, 6),
        v1 in positive_state(2, 6),
        v2 in positive_state(2, 6),
    ) {
        let op = SktOperator::new(par);
        let hist = History::new(vec![v0, v1]).unwrap();
        prop_assume!(apply_sigma(&s, &hist, &v2).unwrap().min() > 0.1);
        let tau = 1e-3;
        let f = |x: &[f64]| {
            op.residual(&hist, &v2.with_data(x.to_vec()).unwrap(), &s, alpha, tau)
                .unwrap()
        };
        let fd = dense_fd(f, v2.as_slice());
        let jac = op.jacobian(&hist, &v2, &s, alpha, tau).unwrap().to_dense();
        let scale = max_abs(&jac);
        for (ra, rb) in jac.iter().zip(&fd) {
            for (a, b) in ra.iter().zip(rb) {
                prop_assert!((a - b).abs() <= 1e-6 * scale, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn dlss_probed_jacobian_matches_dense_differences(
        alpha in 1.05f64..1.33,
        v0 in positive_state(1, 12),
        v1 in positive_state(1, 12),
    ) {
        let s = bdf2();
        let hist = History::new(vec![v0.clone(), v0]).unwrap();
        let tau = 1e-6;
        let f = |x: &[f64]| {
            dlss_residual(&hist, &v1.with_data(x.to_vec()).unwrap(), &s, alpha, tau).unwrap()
        };
        let fd = dense_fd(f, v1.as_slice());
        let jac = dlss_jacobian(&hist, &v1, &s, alpha, tau).unwrap().to_dense();
        let scale = max_abs(&jac);
        let n: usize = 12;
        for i in 0..n {
            for j in 0..n {
                let d = i.abs_diff(j).min(n - i.abs_diff(j));
                if d > 2 {
                    prop_assert_eq!(jac[i][j], 0.0);
                }
                prop_assert!((jac[i][j] - fd[i][j]).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn spatial_parts_are_conservative(
        par in skt_params(),
        alpha in 1.1f64..2.0,
        sigma in positive_state(2, 16),
        w in positive_state(1, 16),
    ) {
        let spatial = SktOperator::new(par).spatial_part(&sigma, alpha, 1e-3);
        for sp in 0..2 {
            let sum: f64 = spatial.iter().skip(sp).step_by(2).sum();
            let scale: f64 = spatial.iter().map(|x| x.abs()).sum();
            prop_assert!(sum.abs() <= 1e-12 * scale.max(1.0));
        }
        let d = dlss_operator(&w).unwrap();
        let scale: f64 = d.iter().map(|x| x.abs()).sum();
        prop_assert!(d.iter().sum::<f64>().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn species_swap_permutes_residual(
        par in skt_params(),
        s in certified_scheme(),
        alpha in 1.1f64..2.0,
        v0 in positive_state(2, 8),
        v1 in positive_state(2, 8),
        v2 in positive_state(2, 8),
    ) {
        let swap = |v: &GridState| {
            GridState::from_species(&[v.species_vec(1), v.species_vec(0)]).unwrap()
        };
        let tau = 1e-3;
        let hist = History::new(vec![v0.clone(), v1.clone()]).unwrap();
        prop_assume!(apply_sigma(&s, &hist, &v2).unwrap().min() > 0.0);
        let r = SktOperator::new(par).residual(&hist, &v2, &s, alpha, tau).unwrap();
        let hist_sw = History::new(vec![swap(&v0), swap(&v1)]).unwrap();
        let r_sw = SktOperator::new(par.swapped())
            .residual(&hist_sw, &swap(&v2), &s, alpha, tau)
            .unwrap();
        for i in 0..8 {
            prop_assert_eq!(r[2 * i], r_sw[2 * i + 1]);
            prop_assert_eq!(r[2 * i + 1], r_sw[2 * i]);
        }
    }

    #[test]
    fn residuals_are_translation_equivariant(
        m in 0usize..10,
        alpha in 1.05f64..1.33,
        v0 in positive_state(1, 10),
        v1 in positive_state(1, 10),
        u0 in positive_state(2, 10),
        u1 in positive_state(2, 10),
    ) {
        let s = bdf2();
        let tau = 1e-5;
        let hist = History::new(vec![v0.clone(), v0.clone()]).unwrap();
        let hist_m = History::new(vec![v0.shifted(m), v0.shifted(m)]).unwrap();
        let r = dlss_residual(&hist, &v1, &s, alpha, tau).unwrap();
        let r_m = dlss_residual(&hist_m, &v1.shifted(m), &s, alpha, tau).unwrap();
        let expect = GridState::from_interleaved(1, 10, r).unwrap().shifted(m);
        prop_assert_eq!(expect.as_slice(), &r_m[..]);

        let op = SktOperator::new(SktParams::new(1.0, 0.5, 0.3, 0.7).unwrap());
        let hist = History::new(vec![u0.clone(), u0.clone()]).unwrap();
        let hist_m = History::new(vec![u0.shifted(m), u0.shifted(m)]).unwrap();
        let r = op.residual(&hist, &u1, &s, alpha, tau).unwrap();
        let r_m = op.residual(&hist_m, &u1.shifted(m), &s, alpha, tau).unwrap();
        let expect = GridState::from_interleaved(2, 10, r).unwrap().shifted(m);
        prop_assert_eq!(expect.as_slice(), &r_m[..]);
    }
}

#[test]
fn gamma_method_g_matrix_is_positive_definite() {
    for gamma in [0.05, 0.2, 0.5, 1.0] {
        let g = gamma_method(gamma).unwrap().g_matrix().unwrap();
        assert!(g.determinant() > 0.0 && g.get(0, 0) > 0.0);
        assert!(GMatrix::new(2, vec![g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1)]).is_ok());
    }
}

#[test]
fn dlss_entropy_form_positive_under_refinement() {
    // h sum_i D2[w D2 log w]_i w_i^{alpha-1} / h^4 for a smooth positive w
    let alpha = 1.2;
    let form = |n: usize| {
        let w = GridState::from_fn(1, n, |_, x| {
            1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()
                + 0.2 * (4.0 * std::f64::consts::PI * x).cos()
        });
        let a = dlss_operator(&w).unwrap();
        a.iter()
            .zip(w.as_slice())
            .map(|(ai, wi)| ai * wi.powf(alpha - 1.0))
            .sum::<f64>()
            * w.h()
    };
    let values: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| form(n)).collect();
    assert!(values.iter().all(|v| *v > 0.0), "{values:?}");
    let d1 = (values[2] - values[1]).abs();
    let d2 = (values[3] - values[2]).abs();
    assert!(d2 < d1, "{values:?}");
}
