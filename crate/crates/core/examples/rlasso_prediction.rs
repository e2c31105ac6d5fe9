//! Lasso and post-Lasso on exactly and approximately sparse designs,
//! compared by out-of-sample mean absolute error.

use lassoinf::report::fit_summary;
use lassoinf::rlasso::{rlasso_fit, PenaltyConfig};
use lassoinf::simkit::{gen_approx_sparse_linear, gen_sparse_linear, RngStream, SparseDgpConfig};
use lassoinf::Result;

fn mae(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    (a - b).abs().mean()
}

fn main() -> Result<()> {
    let cfg = SparseDgpConfig { n: 100, p: 100, s: 3, ..Default::default() };
    let train = gen_sparse_linear(&cfg, RngStream::new(1, 0))?;
    let test = gen_sparse_linear(&cfg, RngStream::new(1, 1))?;

    let lasso = rlasso_fit(&train.design.x, &train.y, &PenaltyConfig::lasso_default(), false, true, RngStream::new(1, 2))?;
    let post = rlasso_fit(&train.design.x, &train.y, &PenaltyConfig::default(), true, true, RngStream::new(1, 2))?;
    println!("{}", fit_summary(&train.design.column_names, &post, None));

    let truth = &test.design.x * &test.beta;
    println!("exactly sparse   MAE lasso {:.3}  post {:.3}", mae(&lasso.predict(&test.design.x)?, &truth), mae(&post.predict(&test.design.x)?, &truth));

    let approx = gen_approx_sparse_linear(&cfg, RngStream::new(2, 0))?;
    let fresh = gen_approx_sparse_linear(&cfg, RngStream::new(2, 1))?;
    let truth = &fresh.design.x * &fresh.beta;
    let lasso = rlasso_fit(&approx.design.x, &approx.y, &PenaltyConfig::lasso_default(), false, true, RngStream::new(2, 2))?;
    let post = rlasso_fit(&approx.design.x, &approx.y, &PenaltyConfig::default(), true, true, RngStream::new(2, 2))?;
    println!(
        "approx. sparse   MAE lasso {:.3}  post {:.3}  ({} and {} selected)",
        mae(&lasso.predict(&fresh.design.x)?, &truth),
        mae(&post.predict(&fresh.design.x)?, &truth),
        lasso.support.len(),
        post.support.len()
    );
    Ok(())
}
