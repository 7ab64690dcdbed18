//! Reducing matrices: the p = 2 closed form and the ellipsoid fit with its
//! certified bracket.

use mwlab::grid::{DyadicCube, GridGeometry};
use mwlab::spd::jacobi_eigen;
use mwlab::weights::{generate_weight, reducing_matrix, Side, WeightSpec};

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(1, 6)?;
    let w = generate_weight(geom, &WeightSpec::RandomLogLipschitz { n: 3, amplitude: 0.6, modes: 3 }, 11)?;
    let q = DyadicCube { level: 2, coords: [1, 0] };

    let r2 = reducing_matrix(&w, 2.0, &q, Side::Direct)?;
    let cells = q.cell_box(&geom).cells(&geom);
    let mut avg = mwlab::Mat::zeros(3, 3);
    for &c in &cells {
        avg = avg.add(w.cell(c).mat());
    }
    let exact = jacobi_eigen(&avg.scale(1.0 / cells.len() as f64)).apply(f64::sqrt);
    println!("p=2 closed form: {}  max deviation {:.2e}", r2.closed_form, r2.matrix.mat().sub(&exact).max_abs());

    for p in [1.0, 1.5, 3.0] {
        for side in [Side::Direct, Side::Dual] {
            if p == 1.0 && side == Side::Dual {
                continue;
            }
            let r = reducing_matrix(&w, p, &q, side)?;
            println!(
                "p={p} {side:?}: bracket [{:.6}, {:.6}] within [1, sqrt 3 = {:.6}], {} iterations",
                r.bracket.0,
                r.bracket.1,
                3f64.sqrt(),
                r.iterations
            );
        }
    }
    Ok(())
}
