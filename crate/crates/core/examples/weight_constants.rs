//! Matrix A_p, A_1 and scalar-family A_inf constants over the reference weights,
//! with the scalar oracles alongside for scalar-embedded weights.

use mwlab::grid::{GridGeometry, ScalarGridFunction};
use mwlab::report::spec_label;
use mwlab::scalar::{fujii_ainfty, scalar_ap};
use mwlab::weights::{ainfty_sc, generate_weight, matrix_a1, matrix_ap, weight_corpus, WeightSpec};

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(1, 7)?;
    let p = 3.0;
    println!("{:<34} {:>10} {:>10} {:>10}", "weight", "A_3", "A_1", "Ainf_3");
    for (spec, seed) in weight_corpus(1) {
        let w = generate_weight(geom, &spec, seed)?;
        let ap = matrix_ap(&w, p)?;
        let ai = ainfty_sc(&w, p, 32 * w.n)?;
        println!("{:<34} {:>10.4} {:>10.4} {:>10.4}", spec_label(&spec), ap.value, matrix_a1(&w)?, ai.value);
        if let WeightSpec::ScalarEmbedded { .. } = spec {
            let s = ScalarGridFunction::from_fn(geom, |c| w.cell(c).mat().get(0, 0));
            println!("{:<34} {:>10.4} {:>10} {:>10.4}", "  scalar oracle", scalar_ap(&s, p)?, "", fujii_ainfty(&s)?);
        }
    }
    Ok(())
}
