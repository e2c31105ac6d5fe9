//! Instrumental variables with many instruments, many controls or both.

use lassoinf::iv::rlasso_iv;
use lassoinf::report::iv_summary;
use lassoinf::rlasso::PenaltyConfig;
use lassoinf::simkit::{standard_normal_matrix, standard_normal_vector, RngStream};
use lassoinf::Result;
use nalgebra::DVector;

fn main() -> Result<()> {
    let (n, kx, kz) = (500, 50, 40);
    let mut rng = RngStream::new(99, 0).rng();
    let x = standard_normal_matrix(n, kx, &mut rng);
    let z = standard_normal_matrix(n, kz, &mut rng);
    let u = standard_normal_vector(n, &mut rng);
    let v = &u * 0.7 + standard_normal_vector(n, &mut rng) * 0.7;

    // only z1, z2 are relevant; only x1, x2 confound
    let d: DVector<f64> = z.column(0) + z.column(1) * 0.5 + x.column(0) + x.column(1) + v;
    let y: DVector<f64> = &d * 1.0 + x.column(0) * 2.0 - x.column(1) + u;

    let cfg = PenaltyConfig::default();
    let stream = RngStream::new(99, 1);
    for (select_x, select_z) in [(false, false), (false, true), (true, false), (true, true)] {
        let fit = rlasso_iv(Some(&x), &d, &y, &z, select_x, select_z, &cfg, stream)?;
        println!("regime {:?}: {} controls, {} instruments kept", fit.regime, fit.selected_x.len(), fit.selected_z.len());
        println!("{}", iv_summary("d", &fit));
    }
    Ok(())
}
