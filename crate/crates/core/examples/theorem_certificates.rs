//! Every certificate kind on one weight, against the identity calibration.

use mwlab::grid::GridGeometry;
use mwlab::operators::KernelOperator;
use mwlab::verify::{calibration_ratio, verify_calibrated, TheoremKind, TheoremParams};
use mwlab::weights::{generate_weight, WeightSpec};

fn main() -> mwlab::Result<()> {
    let geom = GridGeometry::new(1, 6)?;
    let w = generate_weight(geom, &WeightSpec::RotatingPower { n: 2, a: 0.3, center: [1.0 / 3.0, 1.0 / 3.0] }, 0)?;
    let params = TheoremParams { p: 3.0, q: Some(2.0), r: Some(1.5), trials: 6, ..TheoremParams::default() };
    for kind in TheoremKind::ALL {
        let kernel = kind.default_kernel(1);
        let cal = calibration_ratio(&KernelOperator::new(geom, kernel.clone())?, w.n, kind, &params)?;
        let cert = verify_calibrated(&w, &kernel, kind, &params, cal)?;
        println!(
            "{:<19} ratio {:.4e}  bound {:.4e}  {:?}  exponents hold: {}",
            kind.id(),
            cert.ratio,
            cert.pass_bound,
            cert.status,
            cert.exponents.hold()
        );
        for s in cert.exponents.side_conditions.iter().filter(|s| !s.holds) {
            println!("    fails: {}  ({:.4} vs {:.4})", s.name, s.lhs, s.rhs);
        }
    }
    Ok(())
}
