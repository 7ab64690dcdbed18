//! Convex body averages: support function, rank of degenerate bodies,
//! the product bracket and John normalization.

use mwlab::convex::{body_product_bracket, john_normalize, ConvexBodyAverage};
use mwlab::grid::{p_average, DyadicCube, GridFunction, GridGeometry};

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(1, 6)?;
    let q = DyadicCube::root();
    let f = GridFunction::from_fn(geom, 3, |c| {
        let x = geom.center(c)[0];
        vec![(5.0 * x).cos(), x - 0.5, (x * 9.0).sin().abs()]
    });
    let g = GridFunction::from_fn(geom, 3, |c| {
        let x = geom.center(c)[0];
        vec![1.0, (3.0 * x).sin(), 0.0]
    });

    let a = ConvexBodyAverage::new(&f, &q, 1.5)?;
    let b = ConvexBodyAverage::new(&g, &q, 2.0)?;
    println!("rank <<f>> = {}, rank <<g>> = {}", a.degenerate_rank(), b.degenerate_rank());
    for e in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]] {
        println!("h_f({e:?}) = {:.6}", a.support(&e));
    }
    let br = body_product_bracket(&a, &b)?;
    println!("sup <a,b> in [{:.6}, {:.6}]", br.lower, br.upper);

    let j = john_normalize(&f, &q, 1.5)?;
    for i in 0..j.components.n {
        let c = GridFunction::new(geom, 1, j.components.component(i))?;
        println!("normalized component {i}: <|f_i|>_1.5 = {:.6} (bound sqrt 3)", p_average(&c, &q, 1.5)?);
    }
    Ok(())
}
