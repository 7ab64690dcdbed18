//! A JSON experiment run end to end, writing report.json, summary.csv,
//! trace.jsonl and plotdata/ into a directory.

use std::path::Path;

use mwlab::report::{run, write_outputs, ExperimentConfig, Sections};

const CONFIG: &str = r#"{
  "geometry": { "d": 1, "L": 6 },
  "weight": { "spec": { "kind": "random-log-lipschitz", "n": 2, "amplitude": 0.5 }, "seed": 3 },
  "p": 3.0,
  "q": 2.0,
  "theorems": ["a1", "aq", "endpoint-rough"],
  "trials": 6,
  "sparse": { "corpus": [0, 1, 30], "dominate": true }
}"#;

fn main() -> mwlab::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "mwlab-example-out".into());
    let cfg = ExperimentConfig::from_json(CONFIG, Path::new("."))?;
    cfg.validate()?;
    let outcome = run(&cfg, Sections::ALL)?;
    write_outputs(Path::new(&out), &outcome)?;
    let v = &outcome.report.verdict;
    println!(
        "{} passed, failed {:?}, inconclusive {:?}, exit code {}",
        v.passed, v.failed, v.inconclusive, v.exit_code
    );
    println!("wrote {out}/report.json, summary.csv, trace.jsonl and {} plot files", outcome.plots.len());
    Ok(())
}
