//! Dyadic grids, p-averages, refinement and the binary containers.

use mwlab::grid::{p_average, DyadicCube, GridFunction, GridGeometry};
use mwlab::io::{read_gfn, read_mwt, write_gfn, write_mwt};
use mwlab::weights::{generate_weight, WeightSpec};

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(2, 4)?;
    println!("d={} L={} side={} cells={}", geom.d, geom.depth, geom.side(), geom.cells());

    let f = GridFunction::from_fn(geom, 2, |c| {
        let [x, y] = geom.center(c);
        vec![(6.0 * x).sin(), x * y - 0.25]
    });
    let q = DyadicCube { level: 1, coords: [1, 0] };
    for p in [1.0, 2.0, 4.0] {
        println!("<|f|>_{{{p},Q}} = {:.6}", p_average(&f, &q, p)?);
    }
    let fine = f.refined()?;
    println!("after refinement: {:.6} (same average, {} cells)", p_average(&fine, &q, 2.0)?, fine.geom.cells());
    println!("tripled {:?} covers {} cells", q, q.tripled(&geom).count());

    let mut buf = Vec::new();
    write_gfn(&mut buf, &f)?;
    let back = read_gfn(&mut buf.as_slice())?;
    println!(".gfn: {} bytes, round trip equal: {}", buf.len(), back.data == f.data);

    let w = generate_weight(geom, &WeightSpec::RotatingPower { n: 2, a: 0.4, center: [0.5, 0.5] }, 0)?;
    let mut buf = Vec::new();
    write_mwt(&mut buf, &w)?;
    let back = read_mwt(&mut buf.as_slice())?;
    println!(".mwt: {} bytes, spec {:?}", buf.len(), back.meta.spec);
    Ok(())
}
