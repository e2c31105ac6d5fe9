//! Load a CSV, build a design with interactions and run a fit on it.

use lassoinf::dataio::{expand_design, load_csv, pairwise, write_csv, DesignSpec, NaPolicy, Role};
use lassoinf::inference::{effects_batch, EffectMethod};
use lassoinf::report::effects_summary;
use lassoinf::rlasso::PenaltyConfig;
use lassoinf::simkit::{standard_normal_matrix, standard_normal_vector, RngStream};
use lassoinf::Result;

fn main() -> Result<()> {
    let n = 300;
    let mut rng = RngStream::new(5, 0).rng();
    let w = standard_normal_matrix(n, 4, &mut rng);
    let d = standard_normal_vector(n, &mut rng) + w.column(0) * 0.5;
    let y = &d * 0.8 + w.column(0).component_mul(&w.column(1)) + standard_normal_vector(n, &mut rng);

    let path = std::env::temp_dir().join("lassoinf_csv_design.csv");
    let names: Vec<String> = ["y", "d", "w1", "w2", "w3", "w4", "const"].iter().map(|s| s.to_string()).collect();
    let ones = vec![1.0; n];
    let mut cols: Vec<&[f64]> = vec![y.as_slice(), d.as_slice()];
    cols.extend((0..4).map(|j| &w.as_slice()[j * n..(j + 1) * n]));
    cols.push(&ones);
    write_csv(&path, &names, &cols)?;

    let (ds, report) = load_csv(&path, NaPolicy::Reject)?;
    println!("loaded {} rows, {} dropped", ds.n(), report.dropped_rows);

    let base: Vec<String> = names[2..].to_vec();
    let spec = DesignSpec {
        outcome: "y".into(),
        targets: vec!["d".into()],
        controls: base.clone(),
        interactions: pairwise(&base[..4]),
        ..Default::default()
    };
    let design = expand_design(&ds, &spec)?;
    println!("design has {} columns; removed as constant: {:?}", design.p(), design.removed);

    let targets = design.indices_with_role(Role::Target);
    let es = effects_batch(&design, &ds.vector("y")?, &targets, EffectMethod::DoubleSelection, &PenaltyConfig::default(), RngStream::new(5, 1))?;
    println!("{}", effects_summary(&es));
    let picked: Vec<&str> = es.estimates[0].selected_controls.iter().map(|&j| design.column_names[j].as_str()).collect();
    println!("controls kept by double selection: {picked:?}");
    std::fs::remove_file(path).ok();
    Ok(())
}
