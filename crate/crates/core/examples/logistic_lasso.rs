//! Logistic Lasso for a binary outcome.

use lassoinf::rlasso::{rlassologit_fit_with, LogitOptions, PenaltyConfig};
use lassoinf::simkit::{standard_normal_matrix, RngStream};
use lassoinf::Result;
use nalgebra::DVector;
use rand::Rng;

fn main() -> Result<()> {
    let (n, p) = (500, 100);
    let mut rng = RngStream::new(3, 0).rng();
    let x = standard_normal_matrix(n, p, &mut rng);
    let d = DVector::from_fn(n, |i, _| {
        let eta = 1.5 * x[(i, 0)] - x[(i, 1)] + 0.5 * x[(i, 2)];
        f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))
    });
    for post in [false, true] {
        let fit = rlassologit_fit_with(&x, &d, &PenaltyConfig::default(), LogitOptions { post })?;
        let coefs: Vec<String> = fit.support.iter().map(|&j| format!("x{}={:.3}", j + 1, fit.coefficients[j])).collect();
        println!("post={post}: lambda {:.2}, intercept {:.3}, {}", fit.lambda, fit.intercept.unwrap_or(0.0), coefs.join(" "));
        let prob = fit.predict_proba(&x)?;
        let hits = prob.iter().zip(d.iter()).filter(|(q, di)| (**q > 0.5) == (**di == 1.0)).count();
        println!("        in-sample accuracy {:.3}", hits as f64 / n as f64);
    }
    Ok(())
}
