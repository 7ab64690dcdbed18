//! The C_{p,q} check, the sparse Hölder step and Ap from reverse Hölder.

use mwlab::grid::{DyadicCube, GridFunction, GridGeometry};
use mwlab::sparse::{sparse_certify, FamilyMember, SparseFamily};
use mwlab::verify::{apfromrh_check, cpq_check, keyap_check};
use mwlab::weights::{generate_weight, reducing_matrix, Side, WeightSpec};
use num_rational::Rational64;

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(1, 5)?;
    let w = generate_weight(geom, &WeightSpec::RandomLogLipschitz { n: 2, amplitude: 0.4, modes: 3 }, 2)?;

    let cpq = cpq_check(&w, 2.0, 3.0, 1.25, 10.0)?;
    println!(
        "C_(2,3): worst ratio {:.4} on {:?} ({}), holds={}",
        cpq.worst_ratio, cpq.worst_cube, cpq.denominator, cpq.holds
    );

    let cubes = [DyadicCube::root(), DyadicCube { level: 1, coords: [1, 0] }, DyadicCube { level: 3, coords: [2, 0] }];
    let mut fam = SparseFamily::new(geom, cubes.iter().map(|&q| FamilyMember::new(q, false)).collect());
    sparse_certify(&mut fam, Rational64::new(1, 2))?;
    let h = GridFunction::from_fn(geom, 2, |c| vec![(c as f64 * 0.3).sin(), 1.0]);
    let g = GridFunction::from_fn(geom, 2, |c| vec![1.0, (c % 4) as f64 - 1.5]);
    let p = 2.0;
    let u = |q: &DyadicCube| Ok(*reducing_matrix(&w, p, q, Side::Direct)?.matrix.mat());
    let v = |q: &DyadicCube| Ok(*reducing_matrix(&w, p, q, Side::Dual)?.matrix.mat());
    let k = keyap_check(&w, p, 1.0, 1.0, &fam, &h, &g, &u, &v)?;
    println!("sparse Hölder step: lhs {:.4} <= rhs {:.4} (slack {:.2}), holds={}", k.lhs, k.rhs, k.slack, k.holds);

    let a = apfromrh_check(&w, 2.0, 1.2, 1.2, &DyadicCube::root())?;
    println!("Ap from RH: {:?}, ratio {:.4} <= bound {:.4}, holds={}", a.status, a.ratio, a.bound, a.holds);
    Ok(())
}
