//! Joint significance of all slopes with the sup-score test, under the
//! null and under a sparse alternative.

use lassoinf::report::sup_score_line;
use lassoinf::rlasso::sup_score_test;
use lassoinf::simkit::{gen_sparse_linear, RngStream, SparseDgpConfig};
use lassoinf::Result;

fn main() -> Result<()> {
    for (label, beta) in [("null", 0.0), ("signal", 1.0)] {
        let cfg = SparseDgpConfig { n: 100, p: 100, s: 3, beta_value: beta, ..Default::default() };
        let sim = gen_sparse_linear(&cfg, RngStream::new(11, 0))?;
        let res = sup_score_test(&sim.design.x, &sim.y, 1000, 0.05, true, RngStream::new(11, 1))?;
        println!("{label:>6}: {}", sup_score_line(&res).trim());
        println!("        critical value {:.3}, reject at 5%: {}", res.critical_value, res.reject);
    }
    Ok(())
}
