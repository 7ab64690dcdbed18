//! The stopping-time construction on one seeded instance, its trace, and the
//! max-flow sparseness certificate.

use mwlab::sparse::{build_global_sparse, corpus_instance, sparse_certify, tripled_eta, SparseParams};

fn main() -> mwlab::Result<()> {
    let inst = corpus_instance(31, 1)?;
    let t = inst.operator()?;
    let params = SparseParams::default();
    let mut gs = build_global_sparse(&t, &inst.f, &inst.g, &params, None)?;
    println!(
        "{} on d={} L={} n={}: {} partition cubes",
        t.spec.name(),
        t.geom.d,
        t.geom.depth,
        inst.f.n,
        gs.partition.len()
    );
    for rec in gs.trace.iter().take(8) {
        println!(
            "  pass {:>2} cube {:?} |Q0|={} |Omega|={} CZ cubes={} omega_ok={} cz_ok={}",
            rec.iteration,
            rec.cube,
            rec.q0_cells,
            rec.omega_cells,
            rec.cz_count,
            rec.omega_ok(t.geom.d),
            rec.cz_half_ok()
        );
    }
    let eta = tripled_eta(t.geom.d);
    let cert = sparse_certify(&mut gs.family, eta)?;
    println!(
        "{} cubes, eta = {eta}: flow {}/{} feasible={} Carleson {:.3}",
        gs.family.cubes.len(),
        cert.flow,
        cert.demand,
        cert.flow_feasible,
        cert.carleson
    );
    Ok(())
}
