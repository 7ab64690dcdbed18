//! Domination ratio on a few corpus instances, at L and L + 1.

use mwlab::report::sparse_run;
use mwlab::sparse::{corpus_instance, SparseParams};

fn main() -> mwlab::Result<()> {
    let params = SparseParams::default();
    println!("{:>4} {:>3} {:>3} {:>7} {:>10} {:>10}", "id", "d", "n", "cubes", "C(L)", "C(L+1)");
    for k in [0, 1, 2, 7, 30, 33] {
        let inst = corpus_instance(k, 1)?;
        let t = inst.operator()?;
        let (run, _) = sparse_run(&format!("corpus-{k}"), &t, &inst.f, &inst.g, &params, true, true, 1)?;
        let (c, c_fine) = (run.domination.map(|d| d.ratio_upper), run.refined.map(|d| d.ratio_upper));
        println!(
            "{k:>4} {:>3} {:>3} {:>7} {:>10.4} {:>10.4}",
            run.d,
            run.n,
            run.cubes,
            c.unwrap_or(f64::NAN),
            c_fine.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
