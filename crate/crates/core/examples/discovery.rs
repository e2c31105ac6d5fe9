//! Repeated many-causes experiment: how often does any null cause appear
//! significant under pointwise and under simultaneous intervals?

use lassoinf::inference::{confidence_band, effects_batch, EffectMethod};
use lassoinf::rlasso::PenaltyConfig;
use lassoinf::simkit::{gen_causes_controls, MultiplierKind, RngStream};
use lassoinf::Result;

fn main() -> Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50u64);
    let targets: Vec<usize> = (0..20).collect();
    let cfg = PenaltyConfig::default();
    let (mut found, mut false_pointwise, mut false_joint) = (0, 0, 0);
    for r in 0..reps {
        let root = RngStream::new(7, r);
        let (design, y) = gen_causes_controls(100, 20, 20, 5.0, 5.0, root.substream(0))?;
        let es = effects_batch(&design, &y, &targets, EffectMethod::PartiallingOut, &cfg, root.substream(1))?;
        let pw = confidence_band(&es, 0.95, false, 1000, MultiplierKind::Normal, root.substream(2))?;
        let joint = confidence_band(&es, 0.95, true, 1000, MultiplierKind::Normal, root.substream(2))?;
        found += usize::from(!joint.contains_zero(0));
        false_pointwise += usize::from((1..pw.names.len()).any(|j| !pw.contains_zero(j)));
        false_joint += usize::from((1..joint.names.len()).any(|j| !joint.contains_zero(j)));
    }
    println!("{reps} replications");
    println!("true cause found (joint):        {found}");
    println!("any false discovery (pointwise): {false_pointwise}");
    println!("any false discovery (joint):     {false_joint}");
    Ok(())
}
