use lassoinf::dataio::{DesignMatrix, Role};
use lassoinf::inference::{confidence_band, double_selection_effect, effects_batch, partialling_out_effect, EffectMethod, EffectsSet};
use lassoinf::rlasso::PenaltyConfig;
use lassoinf::simkit::{gen_causes_controls, gen_partially_linear, gen_sparse_linear, standard_normal_matrix, MultiplierKind, RngStream, SparseDgpConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn slope(y: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let (ym, dm) = (y.mean(), d.mean());
    let num: f64 = y.iter().zip(d.iter()).map(|(a, b)| (a - ym) * (b - dm)).sum();
    let den: f64 = d.iter().map(|b| (b - dm).powi(2)).sum();
    num / den
}

/// Controls orthogonal to both `y` and `d` (and to the constant).
fn orthogonal_case(seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = RngStream::new(seed, 0).rng();
    let n = 120;
    let raw = standard_normal_matrix(n, 6, &mut rng);
    let q = raw.insert_column(0, 1.0).qr().q();
    let d = DVector::from_column_slice(q.column(1).as_slice()) * 10.0;
    let y = &d * 0.7 + DVector::from_column_slice(q.column(2).as_slice()) * 3.0;
    let x = DMatrix::from_fn(n, 4, |i, j| q[(i, j + 3)] * 10.0);
    (x, y, d)
}

#[test]
fn orthogonal_controls_reduce_to_simple_slope() {
    let (x, y, d) = orthogonal_case(1);
    let e = partialling_out_effect(&x, &y, &d, &PenaltyConfig::default(), RngStream::new(1, 1)).unwrap();
    assert!((e.alpha_hat - slope(&y, &d)).abs() < 1e-6);
}

#[test]
fn empty_selection_double_selection_is_simple_slope() {
    let (x, y, d) = orthogonal_case(2);
    let e = double_selection_effect(&x, &y, &d, &PenaltyConfig::fixed(f64::INFINITY), RngStream::new(2, 1)).unwrap();
    assert!(e.selected_controls.is_empty());
    assert!((e.alpha_hat - slope(&y, &d)).abs() < 1e-10);
}

#[test]
fn target_explained_by_controls_fails() {
    let mut rng = RngStream::new(3, 0).rng();
    let x = standard_normal_matrix(60, 4, &mut rng);
    let d = DVector::from_column_slice(x.column(0).as_slice()) * 2.0;
    let y = DVector::from_fn(60, |_, _| rng.random::<f64>());
    let err = partialling_out_effect(&x, &y, &d, &PenaltyConfig::default(), RngStream::new(3, 1)).unwrap_err();
    assert!(err.to_string().contains("no residual variation"));
}

#[test]
fn union_too_large_fails() {
    let mut rng = RngStream::new(4, 0).rng();
    let x = standard_normal_matrix(6, 5, &mut rng);
    let d = DVector::from_fn(6, |_, _| rng.random::<f64>());
    let y = DVector::from_fn(6, |_, _| rng.random::<f64>());
    let err = double_selection_effect(&x, &y, &d, &PenaltyConfig::fixed(0.0), RngStream::new(4, 1)).unwrap_err();
    assert!(err.to_string().contains("union support too large"));
}

#[test]
fn low_dimensional_design_recovers_unit_effect() {
    // n = 5000, twenty regressors all with coefficient one; the first is the target
    let sim = gen_sparse_linear(&SparseDgpConfig { n: 5000, p: 20, s: 20, beta_value: 1.0, ..Default::default() }, RngStream::new(5, 0)).unwrap();
    let x = sim.design.x.columns(1, 19).into_owned();
    let d = DVector::from_column_slice(sim.design.x.column(0).as_slice());
    let cfg = PenaltyConfig::default();
    let po = partialling_out_effect(&x, &sim.y, &d, &cfg, RngStream::new(5, 1)).unwrap();
    let ds = double_selection_effect(&x, &sim.y, &d, &cfg, RngStream::new(5, 2)).unwrap();
    assert!((po.alpha_hat - 1.0).abs() < 3.0 * po.se);
    assert!((ds.alpha_hat - 1.0).abs() < 3.0 * ds.se);
}

#[test]
fn batch_matches_single_target_and_reports_failures() {
    let sim = gen_sparse_linear(&SparseDgpConfig { n: 100, p: 30, s: 3, beta_value: 3.0, ..Default::default() }, RngStream::new(6, 0)).unwrap();
    let mut x = sim.design.x.clone();
    // column 5 duplicates column 4, so neither can be separated from the other
    let dup = x.column(4).into_owned();
    x.set_column(5, &dup);
    let dm = DesignMatrix::unnamed(x.clone(), Role::Control);
    let cfg = PenaltyConfig::default();
    let stream = RngStream::new(6, 1);
    let es = effects_batch(&dm, &sim.y, &[0, 5, 2], EffectMethod::PartiallingOut, &cfg, stream).unwrap();
    assert_eq!(es.failures.len(), 1);
    assert_eq!(es.failures[0].0, "V6");
    assert_eq!(es.estimates.iter().map(|e| e.target_name.as_str()).collect::<Vec<_>>(), vec!["V1", "V3"]);
    assert_eq!(es.influence.ncols(), 2);

    let single = effects_batch(&dm, &sim.y, &[0], EffectMethod::PartiallingOut, &cfg, stream).unwrap();
    let controls = x.clone().remove_column(0);
    let direct = partialling_out_effect(&controls, &sim.y, &DVector::from_column_slice(x.column(0).as_slice()), &cfg, stream.substream(0)).unwrap();
    assert_eq!(single.estimates[0].alpha_hat, direct.alpha_hat);
    assert_eq!(single.estimates[0].se, direct.se);
}

#[test]
fn many_causes_effects_pattern() {
    let sim = gen_sparse_linear(&SparseDgpConfig { beta_value: 3.0, ..Default::default() }, RngStream::new(7, 0)).unwrap();
    let y = sim.y.add_scalar(1.0);
    let dm = DesignMatrix::unnamed(sim.design.x, Role::Control);
    let es = effects_batch(&dm, &y, &[0, 1, 2, 49], EffectMethod::PartiallingOut, &PenaltyConfig::default(), RngStream::new(7, 1)).unwrap();
    for e in &es.estimates[..3] {
        assert!((e.alpha_hat - 3.0).abs() < 3.0 * e.se);
        assert!(e.p_value < 0.001);
    }
    assert!(es.estimates[3].p_value > 0.001);
}

#[test]
fn joint_band_contains_pointwise_band() {
    let (dm, y) = gen_causes_controls(100, 10, 10, 5.0, 5.0, RngStream::new(8, 0)).unwrap();
    let es = effects_batch(&dm, &y, &(0..10).collect::<Vec<_>>(), EffectMethod::PartiallingOut, &PenaltyConfig::default(), RngStream::new(8, 1)).unwrap();
    let joint = confidence_band(&es, 0.95, true, 1000, MultiplierKind::Normal, RngStream::new(8, 2)).unwrap();
    let point = confidence_band(&es, 0.95, false, 1000, MultiplierKind::Normal, RngStream::new(8, 2)).unwrap();
    assert!((point.critical_value - 1.959_963_984_540_054).abs() < 1e-12);
    assert!(joint.critical_value > point.critical_value);
    for j in 0..10 {
        assert!(joint.upper[j] >= point.upper[j] && joint.lower[j] <= point.lower[j]);
        assert!(joint.lower[j] < joint.upper[j]);
    }
    assert!(!joint.contains_zero(0));
}

#[test]
fn band_rejects_bad_inputs() {
    let es = EffectsSet::from_estimates(Vec::new(), Vec::new(), 10);
    assert!(confidence_band(&es, 0.95, true, 100, MultiplierKind::Normal, RngStream::new(0, 0)).is_err());
}

/// Coefficient on the first column from a dense OLS through the normal equations.
fn full_ols_first(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let xi = x.clone().insert_column(x.ncols(), 1.0);
    (xi.transpose() * &xi).cholesky().unwrap().solve(&(xi.transpose() * y))[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn influence_has_mean_zero_and_methods_agree(seed in 0u64..5000) {
        let sim = gen_partially_linear(300, 30, 3, 1.0, 1.0, 0.5, RngStream::new(seed, 0));
        let cfg = PenaltyConfig::default();
        let po = partialling_out_effect(&sim.x, &sim.y, &sim.d, &cfg, RngStream::new(seed, 1)).unwrap();
        let ds = double_selection_effect(&sim.x, &sim.y, &sim.d, &cfg, RngStream::new(seed, 1)).unwrap();
        prop_assert!(po.influence.mean().abs() < 1e-8);
        prop_assert!(ds.influence.mean().abs() < 1e-8);
        prop_assert!((po.alpha_hat - ds.alpha_hat).abs() < 3.0 * po.se.max(ds.se));
    }

    #[test]
    fn double_selection_with_everything_selected_is_full_ols(seed in 0u64..5000) {
        let sim = gen_partially_linear(200, 8, 8, 1.0, 1.0, 0.3, RngStream::new(seed, 0));
        let ds = double_selection_effect(&sim.x, &sim.y, &sim.d, &PenaltyConfig::fixed(0.0), RngStream::new(seed, 1)).unwrap();
        prop_assume!(ds.selected_controls.len() == 8);
        let full = full_ols_first(&sim.x.clone().insert_column(0, 0.0).map_with_location(|i, j, v| if j == 0 { sim.d[i] } else { v }), &sim.y);
        prop_assert!((ds.alpha_hat - full).abs() < 1e-8);
    }
}
