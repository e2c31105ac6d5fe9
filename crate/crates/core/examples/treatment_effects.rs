//! Average treatment effects with selection of the outcome and propensity
//! controls, and local effects with a binary instrument.

use lassoinf::report::treatment_summary;
use lassoinf::simkit::{standard_normal_matrix, MultiplierKind, RngStream};
use lassoinf::treatment::{rlasso_ate, rlasso_atet, rlasso_late, rlasso_latet, TreatmentOptions};
use lassoinf::Result;
use nalgebra::DVector;
use rand::Rng;

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn main() -> Result<()> {
    let n = 2000;
    let mut rng = RngStream::new(401, 0).rng();
    let x = standard_normal_matrix(n, 30, &mut rng);
    // eligibility depends on x1, take-up needs eligibility
    let z = DVector::from_fn(n, |i, _| f64::from(rng.random::<f64>() < logistic(0.7 * x[(i, 0)])));
    let d = DVector::from_fn(n, |i, _| z[i] * f64::from(rng.random::<f64>() < 0.7));
    let y = DVector::from_fn(n, |i, _| 1.5 * d[i] + x[(i, 0)] + 0.5 * x[(i, 1)] + rng.random::<f64>() - 0.5);

    let opts = TreatmentOptions::default();
    let stream = RngStream::new(401, 1);
    println!("{}", treatment_summary(&rlasso_ate(&x, &d, &y, &opts, stream)?));
    println!("{}", treatment_summary(&rlasso_atet(&x, &d, &y, &opts, stream)?));
    println!("{}", treatment_summary(&rlasso_late(&x, &d, &y, &z, &opts, stream)?));
    println!("{}", treatment_summary(&rlasso_latet(&x, &d, &y, &z, &opts, stream)?));

    let boot = TreatmentOptions { bootstrap: Some(MultiplierKind::Bayes), n_rep: 500, ..Default::default() };
    let fit = rlasso_ate(&x, &d, &y, &boot, stream)?;
    println!("ATE with Bayesian bootstrap se: {:.4} ({:.4})", fit.alpha_hat, fit.se);
    Ok(())
}
