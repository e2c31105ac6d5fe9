//! Drive the command-line interface in-process: simulate a dataset, then
//! estimate a target effect from it and print the JSON output.

use lassoinf::cli::run;

fn main() {
    let path = std::env::temp_dir().join("lassoinf_cli_workflow.csv");
    let csv = path.to_string_lossy().into_owned();
    let steps: Vec<Vec<&str>> = vec![
        vec!["simulate", "plm", "--n", "500", "--p", "50", "--s", "3", "--seed", "1", "--out", &csv],
        vec!["fit", "--input", &csv, "--outcome", "y", "--post"],
        vec!["effects", "--input", &csv, "--outcome", "y", "--targets", "d", "--format", "json"],
        vec!["supscore", "--input", &csv, "--outcome", "y", "--controls", "x1..x50"],
    ];
    for step in steps {
        println!("$ lassoinf {}", step.join(" "));
        let out = run(std::iter::once("lassoinf").chain(step));
        print!("{}{}", out.stdout, out.stderr);
        if out.code != 0 {
            std::process::exit(out.code);
        }
    }
    std::fs::remove_file(path).ok();
}
