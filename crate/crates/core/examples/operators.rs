//! Kernels on the grid: Hilbert, rough and the Hörmander example, with weak
//! norms, Hörmander constants and the sharp maximal operators.

use mwlab::grid::{GridGeometry, ScalarGridFunction};
use mwlab::operators::{hormander_constant, mpt_maximal, weak_norm_estimate, KernelOperator, KernelSpec};

fn main() -> mwlab::Result<()> {
    let line = GridGeometry::new(1, 9)?;
    let plane = GridGeometry::new(2, 4)?;
    let ops = [
        KernelOperator::new(line, KernelSpec::Hilbert)?,
        KernelOperator::new(line, KernelSpec::HormanderExample)?,
        KernelOperator::new(plane, KernelSpec::rough_odd(16))?,
    ];
    for t in &ops {
        let weak = weak_norm_estimate(t, 1.0, 9, 1)?;
        let strong2 = weak_norm_estimate(t, 2.0, 9, 1)?;
        println!("{:<18} weak(1,1) {:.4}  weak(2,2) {:.4}", t.spec.name(), weak.weak_norm, strong2.weak_norm);
        if t.geom.d == 1 {
            let h = hormander_constant(t, 2.0, 8)?;
            println!("{:<18} H_(2,1) {:.4}  H_(2,2) {:.4}", "", h.h1, h.h2);
        }
    }

    let t = &ops[0];
    let f = ScalarGridFunction::from_fn(line, |c| if (100..140).contains(&c) { 1.0 } else { 0.0 });
    let m = mpt_maximal(t, &f, 2.0)?;
    let peak = m.values.iter().cloned().fold(0.0, f64::max);
    println!("M_(2,T) of an indicator peaks at {peak:.4}");
    Ok(())
}
