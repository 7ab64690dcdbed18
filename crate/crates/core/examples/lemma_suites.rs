//! Exact parameter lemmas, the randomized matrix inequalities and reverse
//! Hölder on the reference weights.

use mwlab::grid::GridGeometry;
use mwlab::verify::{matrix_lemma_sweep, param_lemma_checks, rh_entry, LemmaGrid};
use mwlab::weights::{generate_weight, weight_corpus};

fn main() -> mwlab::Result<()> {
    let rep = param_lemma_checks(&LemmaGrid::default());
    println!("parameter grid: {} points", rep.points);
    for c in &rep.claims {
        println!("  {:<14} checked {:>6} violations {:>4}  {}", c.id, c.checked, c.violations, c.statement);
        if let Some(v) = &c.first_violation {
            println!("  {:<14} first: {v}", "");
        }
    }

    let m = matrix_lemma_sweep(2000, 1e6, 1)?;
    println!(
        "matrix: bownik {}/{} worst {:.6}, holder {}/{} worst {:.6}",
        m.bownik_violations, m.bownik_checks, m.bownik_worst, m.holder_violations, m.holder_checks, m.holder_worst
    );

    let geom = GridGeometry::new(1, 7)?;
    for (spec, seed) in weight_corpus(1) {
        let e = rh_entry(&generate_weight(geom, &spec, seed)?, 2.0, 32 * spec.n())?;
        println!(
            "RH n={} scalar {:.6} matrix {:.6} (<= {}) holds={}",
            e.n,
            e.scalar_ratio,
            e.matrix_ratio,
            2 * e.n,
            e.holds
        );
    }
    Ok(())
}
