//! Weak-type level set curve lambda -> lambda |{|W T W^{-1} f| > lambda}|
//! for one trial input.

use mwlab::grid::GridGeometry;
use mwlab::operators::{KernelOperator, KernelSpec};
use mwlab::verify::{endpoint_sweep, vector_trials};
use mwlab::weights::{generate_weight, WeightSpec};

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(1, 8)?;
    let w = generate_weight(geom, &WeightSpec::ScalarEmbedded { n: 2, a: 0.3, center: [1.0 / 3.0, 1.0 / 3.0] }, 0)?;
    let t = KernelOperator::new(geom, KernelSpec::Hilbert)?;
    let f = &vector_trials(&geom, 2, 3, 1)[1];
    println!("lambda,value");
    for (l, v) in endpoint_sweep(&w, &t, f, None, 16)? {
        println!("{l:.6e},{v:.6e}");
    }
    Ok(())
}
