use lassoinf::linalg::select_columns;
use lassoinf::rlasso::{
    compute_loadings, lambda_heteroscedastic_xdep, lambda_heteroscedastic_xindep, lambda_homoscedastic_xdep, lambda_homoscedastic_xindep,
    rlasso_fit, rlassologit_fit, shooting_lasso, sup_score_test, Homoscedastic, PenaltyConfig, ShootingOptions,
};
use lassoinf::simkit::{equicorrelated_normal, gen_sparse_linear, standard_normal_matrix, RngStream, SparseDgpConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn problem(seed: u64, n: usize, p: usize, s: usize) -> (DMatrix<f64>, DVector<f64>) {
    let sim = gen_sparse_linear(&SparseDgpConfig { n, p, s: s.min(p), beta_value: 2.0, ..Default::default() }, RngStream::new(seed, 0)).unwrap();
    (sim.design.x, sim.y)
}

/// OLS through the normal equations, kept independent of the library solver.
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x).cholesky().unwrap().solve(&(x.transpose() * y))
}

#[test]
fn loadings_hand_computation() {
    let x = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
    let e = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0]);
    let psi = compute_loadings(&x, Some(&e), false).unwrap();
    assert!((psi[0] - 7.5f64.sqrt()).abs() < 1e-15);
    let unit = compute_loadings(&x, None, true).unwrap();
    assert_eq!(unit[0], 1.0);
}

#[test]
fn lambda_is_linear_in_sigma_and_c() {
    let base = lambda_homoscedastic_xindep(100, 100, 1.0, 1.1, 0.1).unwrap();
    assert_eq!(lambda_homoscedastic_xindep(100, 100, 2.0, 1.1, 0.1).unwrap(), 2.0 * base);
    assert!((lambda_homoscedastic_xindep(100, 100, 1.0, 2.2, 0.1).unwrap() - 2.0 * base).abs() < 1e-12);
    assert_eq!(lambda_heteroscedastic_xindep(100, 100, 1.1, 0.1).unwrap(), base);
    assert!(lambda_heteroscedastic_xindep(100, 200, 1.1, 0.1).unwrap() > base);
    assert!(lambda_homoscedastic_xindep(1, 1, 1.0, 1.0, 2.5).is_err());
}

#[test]
fn xdep_ones_column_matches_half_normal() {
    // n·E_n[1·e] = √n·Z, so the (1−γ) quantile is √n Φ⁻¹(1 − γ/2)
    let n = 64;
    let x = DMatrix::from_element(n, 1, 1.0);
    let lam = lambda_homoscedastic_xdep(&x, 1.0, 0.5, 0.1, 20_000, RngStream::new(5, 0)).unwrap();
    let oracle = (n as f64).sqrt() * 1.644_853_626_951_472;
    assert!((lam / oracle - 1.0).abs() < 0.02, "{lam} vs {oracle}");
}

#[test]
fn xdep_duplicate_column_gives_same_lambda() {
    let mut rng = RngStream::new(6, 0).rng();
    let x1 = standard_normal_matrix(50, 1, &mut rng);
    let x2 = DMatrix::from_fn(50, 2, |i, _| x1[(i, 0)]);
    let a = lambda_homoscedastic_xdep(&x1, 1.0, 1.1, 0.1, 2000, RngStream::new(6, 1)).unwrap();
    let b = lambda_homoscedastic_xdep(&x2, 1.0, 1.1, 0.1, 2000, RngStream::new(6, 1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn xdep_adapts_to_correlated_designs() {
    let mut rng = RngStream::new(7, 0).rng();
    let x = equicorrelated_normal(100, 50, 0.9, &mut rng);
    let mut xs = x.clone();
    for mut c in xs.column_iter_mut() {
        let s = (c.norm_squared() / 100.0).sqrt();
        c /= s;
    }
    let dep = lambda_homoscedastic_xdep(&xs, 1.0, 1.1, 0.1, 5000, RngStream::new(7, 1)).unwrap();
    let indep = lambda_homoscedastic_xindep(100, 50, 1.0, 1.1, 0.1).unwrap();
    assert!(dep <= indep, "{dep} > {indep}");
}

#[test]
fn xdep_heteroscedastic_rules() {
    let mut rng = RngStream::new(8, 0).rng();
    let x = standard_normal_matrix(80, 10, &mut rng);
    let zero = lambda_heteroscedastic_xdep(&x, &DVector::zeros(80), 1.1, 0.1, 500, RngStream::new(8, 1)).unwrap();
    assert!(zero.degenerate && zero.lambda == 0.0);
    let e = DVector::from_fn(80, |_, _| rng.random::<f64>() - 0.5);
    let a = lambda_heteroscedastic_xdep(&x, &e, 1.1, 0.1, 500, RngStream::new(8, 2)).unwrap().lambda;
    let b = lambda_heteroscedastic_xdep(&x, &(&e * 3.0), 1.1, 0.1, 500, RngStream::new(8, 2)).unwrap().lambda;
    assert!((b - 3.0 * a).abs() < 1e-10 * b);
}

#[test]
fn xdep_rules_agree_under_homoscedasticity() {
    let mut rng = RngStream::new(9, 0).rng();
    let n = 400;
    let mut x = standard_normal_matrix(n, 20, &mut rng);
    for mut c in x.column_iter_mut() {
        let s = (c.norm_squared() / n as f64).sqrt();
        c /= s;
    }
    let e = DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let het = lambda_heteroscedastic_xdep(&x, &e, 1.1, 0.1, 5000, RngStream::new(9, 1)).unwrap().lambda;
    let hom = lambda_homoscedastic_xdep(&x, 1.0, 1.1, 0.1, 5000, RngStream::new(9, 2)).unwrap();
    assert!((het / hom - 1.0).abs() < 0.05, "{het} vs {hom}");
}

#[test]
fn predict_identities() {
    let (x, y) = problem(11, 80, 30, 3);
    let fit = rlasso_fit(&x, &y, &PenaltyConfig::default(), true, true, RngStream::new(11, 1)).unwrap();
    let zero = fit.predict(&DMatrix::zeros(3, 30)).unwrap();
    assert!(zero.iter().all(|&v| v == fit.intercept.unwrap()));
    let fitted = fit.predict(&x).unwrap();
    assert!((&fitted - (&y - &fit.residuals)).amax() < 1e-12);
    assert!(fit.predict(&DMatrix::zeros(3, 29)).is_err());
}

#[test]
fn strong_signal_post_lasso_near_truth() {
    let sim = gen_sparse_linear(&SparseDgpConfig::default(), RngStream::new(12, 0)).unwrap();
    let fit = rlasso_fit(&sim.design.x, &sim.y, &PenaltyConfig::default(), true, true, RngStream::new(12, 1)).unwrap();
    let xs = select_columns(&sim.design.x, &fit.support);
    let n = sim.y.len() as f64;
    let sigma2 = fit.residuals.norm_squared() / (n - fit.support.len() as f64 - 1.0);
    let cov = (xs.transpose() * &xs).try_inverse().unwrap() * sigma2;
    for j in 0..3 {
        let k = fit.support.iter().position(|&s| s == j).expect("true column selected");
        assert!((fit.coefficients[j] - 5.0).abs() < 3.0 * cov[(k, k)].sqrt());
    }
}

#[test]
fn non_finite_input_rejected() {
    let (x, mut y) = problem(13, 30, 5, 1);
    y[3] = f64::NAN;
    assert!(rlasso_fit(&x, &y, &PenaltyConfig::default(), true, true, RngStream::new(13, 1)).is_err());
}

#[test]
fn shooting_objective_never_increases() {
    let (x, y) = problem(14, 60, 40, 4);
    let load = DVector::from_element(40, 1.0);
    let obj = |b: &DVector<f64>| lassoinf::rlasso::lasso_objective(&(&y - &x * b), b, 30.0, &load);
    let mut beta = DVector::zeros(40);
    let mut last = obj(&beta);
    for _ in 0..20 {
        beta = shooting_lasso(&x, &y, 30.0, &load, Some(&beta), ShootingOptions { max_pass: 1, tol_coef: 0.0 }).unwrap().coefficients;
        let now = obj(&beta);
        assert!(now <= last + 1e-12);
        last = now;
    }
}

#[test]
fn sup_score_constant_outcome_never_rejects() {
    let (x, _) = problem(15, 50, 10, 1);
    let y = DVector::from_element(50, 3.0);
    let res = sup_score_test(&x, &y, 200, 0.05, true, RngStream::new(15, 1)).unwrap();
    assert_eq!(res.statistic, 0.0);
    assert!(!res.reject);
    assert!(res.p_value >= 1.0 / 201.0);
}

#[test]
fn sup_score_rejects_sparse_signal() {
    let sim = gen_sparse_linear(&SparseDgpConfig::default(), RngStream::new(16, 0)).unwrap();
    let res = sup_score_test(&sim.design.x, &sim.y, 1000, 0.05, true, RngStream::new(16, 1)).unwrap();
    assert!(res.reject);
    assert!((res.p_value - 1.0 / 1001.0).abs() < 1e-15);
}

#[test]
fn logit_null_and_infinite_penalty() {
    let mut rng = RngStream::new(17, 0).rng();
    let x = standard_normal_matrix(400, 5, &mut rng);
    let d = DVector::from_fn(400, |_, _| f64::from(rng.random::<f64>() < 0.3));
    let cfg = PenaltyConfig { lambda_start: Some(1e12), ..Default::default() };
    let fit = rlassologit_fit(&x, &d, &cfg).unwrap();
    assert!(fit.coefficients.iter().all(|&b| b == 0.0));
    let m = d.mean();
    assert!((fit.intercept.unwrap() - (m / (1.0 - m)).ln()).abs() < 1e-4);
    assert!(rlassologit_fit(&x, &DVector::zeros(400), &PenaltyConfig::default()).is_err());
}

#[test]
fn logit_strong_predictor_sign() {
    for seed in 0..5 {
        let mut rng = RngStream::new(18 + seed, 0).rng();
        let x = standard_normal_matrix(500, 1, &mut rng);
        let d = DVector::from_fn(500, |i, _| f64::from(rng.random::<f64>() < 1.0 / (1.0 + (1.5 * x[(i, 0)]).exp())));
        let fit = rlassologit_fit(&x, &d, &PenaltyConfig::default()).unwrap();
        assert!(fit.coefficients[0] < 0.0);
        let p = fit.predict_proba(&x).unwrap();
        assert!(p.iter().all(|&v| (1e-6..=1.0 - 1e-6).contains(&v)));
    }
}

/// Maximal KKT violation of a Lasso solution on centered data.
fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64, load: &DVector<f64>) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * beta;
    (0..x.ncols())
        .map(|j| {
            let g = 2.0 * x.column(j).dot(&r) / n;
            let w = lambda * load[j] / n;
            if beta[j] != 0.0 { (g - w * beta[j].signum()).abs() } else { (g.abs() - w).max(0.0) }
        })
        .fold(0.0, f64::max)
}

fn center(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut xc = x.clone();
    for mut c in xc.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    (xc, y.add_scalar(-y.mean()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kkt_holds(seed in 0u64..10_000, n in 30usize..90, p in 5usize..60, homo in any::<bool>()) {
        let (x, y) = problem(seed, n, p, 3);
        let cfg = PenaltyConfig { homoscedastic: if homo { Homoscedastic::Yes } else { Homoscedastic::No }, ..PenaltyConfig::lasso_default() };
        let fit = rlasso_fit(&x, &y, &cfg, false, true, RngStream::new(seed, 1)).unwrap();
        let (xc, yc) = center(&x, &y);
        prop_assert!(kkt_violation(&xc, &yc, &fit.lasso_coefficients, fit.lambda, &fit.loadings) < 1e-6);
    }

    #[test]
    fn post_lasso_is_ols_on_support(seed in 0u64..10_000, n in 40usize..100, p in 5usize..50) {
        let (x, y) = problem(seed, n, p, 3);
        let fit = rlasso_fit(&x, &y, &PenaltyConfig::default(), true, true, RngStream::new(seed, 1)).unwrap();
        prop_assume!(!fit.support.is_empty());
        let xs = select_columns(&x, &fit.support);
        let xs = xs.clone().insert_column(xs.ncols(), 1.0);
        let b = ols(&xs, &y);
        for (k, &j) in fit.support.iter().enumerate() {
            prop_assert!((fit.coefficients[j] - b[k]).abs() < 1e-8 * (1.0 + b[k].abs()));
        }
        prop_assert!((fit.intercept.unwrap() - b[fit.support.len()]).abs() < 1e-8 * (1.0 + b[fit.support.len()].abs()));
        prop_assert!(fit.adj_r2 <= fit.r2 && fit.r2 <= 1.0);
    }

    #[test]
    fn column_rescaling_is_equivariant(seed in 0u64..10_000, j in 0usize..10, big in any::<bool>()) {
        let kappa = if big { 10.0 } else { 0.1 };
        let (x, y) = problem(seed, 80, 10, 3);
        let mut xk = x.clone();
        xk.column_mut(j).scale_mut(kappa);
        let cfg = PenaltyConfig { homoscedastic: Homoscedastic::Yes, ..Default::default() };
        let a = rlasso_fit(&x, &y, &cfg, true, true, RngStream::new(seed, 1)).unwrap();
        let b = rlasso_fit(&xk, &y, &cfg, true, true, RngStream::new(seed, 1)).unwrap();
        prop_assert_eq!(&a.support, &b.support);
        prop_assert!((&a.residuals - &b.residuals).amax() < 1e-8);
        prop_assert!((a.coefficients[j] - kappa * b.coefficients[j]).abs() < 1e-8 * (1.0 + a.coefficients[j].abs()));
        prop_assert!((a.r2 - b.r2).abs() < 1e-10);
    }
}
