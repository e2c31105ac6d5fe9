//! Many causes, many controls: one effect per target with pointwise and
//! simultaneous confidence intervals.

use lassoinf::inference::{confidence_band, effects_batch, EffectMethod};
use lassoinf::report::{band_table, effects_summary};
use lassoinf::rlasso::PenaltyConfig;
use lassoinf::simkit::{gen_causes_controls, MultiplierKind, RngStream};
use lassoinf::Result;

fn main() -> Result<()> {
    let root = RngStream::new(2024, 0);
    let (design, y) = gen_causes_controls(100, 20, 20, 5.0, 5.0, root.substream(0))?;
    let targets: Vec<usize> = (0..20).collect();
    let cfg = PenaltyConfig::default();

    for method in [EffectMethod::PartiallingOut, EffectMethod::DoubleSelection] {
        let es = effects_batch(&design, &y, &targets, method, &cfg, root.substream(1))?;
        println!("{method:?}\n{}", effects_summary(&es));
        if method == EffectMethod::PartiallingOut {
            let pointwise = confidence_band(&es, 0.95, false, 1000, MultiplierKind::Normal, root.substream(2))?;
            let joint = confidence_band(&es, 0.95, true, 1000, MultiplierKind::Normal, root.substream(2))?;
            println!("pointwise critical value {:.3}, joint {:.3}", pointwise.critical_value, joint.critical_value);
            println!("{}", band_table(&joint));
            let excluded: Vec<&str> = (0..joint.names.len()).filter(|&j| !joint.contains_zero(j)).map(|j| joint.names[j].as_str()).collect();
            println!("joint band excludes zero for: {excluded:?}\n");
        }
    }
    Ok(())
}
