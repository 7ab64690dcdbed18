//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line.
//!
//! The machine budget checks are wall-clock, so the criteria run one at a time.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use mwlab::convex::john_normalize;
use mwlab::grid::{p_average, DyadicCube, GridFunction, GridGeometry, ScalarGridFunction};
use mwlab::operators::KernelOperator;
use mwlab::report::{report_json, run, sparse_run, ExperimentConfig, LemmaConfig, Sections, SparseConfig};
use mwlab::scalar::{fujii_ainfty, scalar_a1, scalar_ap};
use mwlab::sparse::{build_global_sparse, corpus_instance, sparse_certify, tripled_eta, SparseParams};
use mwlab::spd::{jacobi_eigen, Mat};
use mwlab::verify::{
    calibration_ratio, matrix_lemma_sweep, param_lemma_checks, rh_entry, verify_calibrated, LemmaGrid, Status,
    TheoremKind, TheoremParams,
};
use mwlab::weights::{
    ainfty_sc, generate_weight, matrix_a1, matrix_ap, reducing_matrix, weight_corpus, MatrixWeight, Side, WeightSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

const CORPUS: usize = 50;
const SEED: u64 = 1;

fn report(id: u32, ok: bool, detail: String, elapsed: Duration) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("criterion {id}: {tag}  {detail}  ({:.1} s)", elapsed.as_secs_f64());
    assert!(ok, "criterion {id} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_1_sparse_construction() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let params = SparseParams::default();
    let mut bad = Vec::new();
    let mut passes = 0;
    for k in 0..CORPUS {
        let inst = corpus_instance(k, SEED).unwrap();
        let t = inst.operator().unwrap();
        let (r, trace) = sparse_run(&format!("{k}"), &t, &inst.f, &inst.g, &params, false, false, SEED).unwrap();
        passes += trace.len();
        let d = t.geom.d;
        let exact = trace.iter().all(|rec| rec.omega_ok(d) && rec.cz_half_ok());
        if !(r.certificate.flow_feasible && exact && r.holds) {
            bad.push(k);
        }
    }
    let elapsed = start.elapsed();
    let ok = bad.is_empty() && elapsed <= Duration::from_secs(300);
    report(1, ok, format!("{CORPUS} instances, {passes} passes, failing {bad:?}"), elapsed);
}

/// `sum_c |Tf(c) g(c)| |cell|` and `sum_Q |Q| <|f|^r>^{1/r} <|g|^s>^{1/s}` for
/// `n = 1`, by direct summation over the kernel at center offsets.
fn scalar_sparse_form(
    t: &KernelOperator,
    f: &[f64],
    g: &[f64],
    regions: &[mwlab::CellBox],
    r: f64,
    s: f64,
) -> (f64, f64) {
    let geom = t.geom;
    let h = geom.cell_measure();
    let cells = geom.cells();
    let mut lhs = 0.0;
    for i in 0..cells {
        let [xi, yi] = geom.coords(i);
        let mut tf = 0.0;
        for j in 0..cells {
            if j == i || f[j] == 0.0 {
                continue;
            }
            let [xj, yj] = geom.coords(j);
            tf += t.kernel_offset(xi as i64 - xj as i64, yi as i64 - yj as i64) * f[j];
        }
        lhs += (tf * h * g[i]).abs();
    }
    lhs *= h;
    let avg = |v: &[f64], b: &mwlab::CellBox, p: f64| {
        let cs = b.cells(&geom);
        (cs.iter().map(|&c| v[c].abs().powf(p)).sum::<f64>() / cs.len() as f64).powf(1.0 / p)
    };
    let rhs = regions.iter().map(|b| b.measure(&geom) * avg(f, b, r) * avg(g, b, s)).sum();
    (lhs, rhs)
}

#[test]
fn criterion_2_domination() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let params = SparseParams::default();
    let (mut c, mut c_fine) = (0.0f64, 0.0f64);
    let mut oracle_worst = 0.0f64;
    let mut oracle_runs = 0;
    for k in 0..CORPUS {
        let inst = corpus_instance(k, SEED).unwrap();
        let t = inst.operator().unwrap();
        let (r, _) = sparse_run(&format!("{k}"), &t, &inst.f, &inst.g, &params, true, true, SEED).unwrap();
        c = c.max(r.domination.unwrap().ratio_upper);
        c_fine = c_fine.max(r.refined.unwrap().ratio_upper);
        if inst.f.n == 1 {
            let dm = r.domination.unwrap();
            let mut gs = build_global_sparse(&t, &inst.f, &inst.g, &params, None).unwrap();
            sparse_certify(&mut gs.family, tripled_eta(t.geom.d)).unwrap();
            let (lhs, rhs) =
                scalar_sparse_form(&t, &inst.f.data, &inst.g.data, &gs.family.regions(), params.r, params.s);
            for e in [rel(lhs, dm.lhs), rel(rhs, dm.rhs_upper), rel(rhs, dm.rhs_lower)] {
                oracle_worst = oracle_worst.max(e);
            }
            oracle_runs += 1;
        }
    }
    let stable = c_fine <= 1.25 * c;
    let ok = c.is_finite() && stable && oracle_worst <= 1e-8;
    report(
        2,
        ok,
        format!("C={c:.4} C(L+1)={c_fine:.4} scalar oracle on {oracle_runs} runs, worst rel {oracle_worst:.2e}"),
        start.elapsed(),
    );
}

fn scalar_weights() -> Vec<MatrixWeight> {
    let mut out = Vec::new();
    for (d, depth) in [(1, 7), (2, 4)] {
        let geom = GridGeometry::new(d, depth).unwrap();
        for (spec, seed) in weight_corpus(d) {
            if matches!(spec, WeightSpec::ScalarEmbedded { .. }) {
                out.push(generate_weight(geom, &spec, seed).unwrap());
            }
        }
        for (n, a) in [(1, 0.8), (3, -0.6), (2, 0.25)] {
            let spec = WeightSpec::ScalarEmbedded { n, a, center: [0.6, 0.2] };
            out.push(generate_weight(geom, &spec, 0).unwrap());
        }
    }
    out
}

#[test]
fn criterion_3_scalar_reductions() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut worst = 0.0f64;
    let weights = scalar_weights();
    for w in &weights {
        let s = ScalarGridFunction::from_fn(w.geom, |c| w.cell(c).mat().get(0, 0));
        let dirs = 32 * w.n;
        let fujii = fujii_ainfty(&s).unwrap();
        for p in [1.5, 2.0, 3.0] {
            worst = worst.max(rel(matrix_ap(w, p).unwrap().value, scalar_ap(&s, p).unwrap()));
            // |W^{1/p} e|^p = w for every unit e
            worst = worst.max(rel(ainfty_sc(w, p, dirs).unwrap().value, fujii));
        }
        worst = worst.max(rel(matrix_a1(w).unwrap(), scalar_a1(&s).unwrap()));
    }
    let mut identity_ok = true;
    for d in 1..=2 {
        let geom = GridGeometry::new(d, 4).unwrap();
        for n in 1..=3 {
            let w = MatrixWeight::identity(geom, n);
            for p in [1.5, 2.0, 3.0] {
                identity_ok &= matrix_ap(&w, p).unwrap().value == 1.0;
                identity_ok &= ainfty_sc(&w, p, 32 * n).unwrap().value == 1.0;
            }
            identity_ok &= matrix_a1(&w).unwrap() == 1.0;
        }
    }
    let ok = worst <= 1e-10 && identity_ok;
    report(
        3,
        ok,
        format!("{} scalar weights, worst rel {worst:.2e}, identity exact: {identity_ok}", weights.len()),
        start.elapsed(),
    );
}

#[test]
fn criterion_4_reverse_holder() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut violations = Vec::new();
    let (mut scalar_worst, mut matrix_worst) = (0.0f64, 0.0f64);
    let mut count = 0;
    for (d, depth) in [(1, 8), (2, 5)] {
        let geom = GridGeometry::new(d, depth).unwrap();
        for (spec, seed) in weight_corpus(d) {
            let w = generate_weight(geom, &spec, seed).unwrap();
            for p in [2.0, 3.0] {
                let e = rh_entry(&w, p, 32 * w.n).unwrap();
                scalar_worst = scalar_worst.max(e.scalar_ratio);
                matrix_worst = matrix_worst.max(e.matrix_ratio / (2.0 * w.n as f64));
                if !(e.scalar_ratio <= 2.0 && e.matrix_ratio <= 2.0 * w.n as f64) {
                    violations.push(format!("{spec:?} p={p}"));
                }
                count += 1;
            }
        }
    }
    let ok = violations.is_empty();
    report(
        4,
        ok,
        format!("{count} checks, worst scalar {scalar_worst:.4}, worst matrix/(2n) {matrix_worst:.4}, violations {violations:?}"),
        start.elapsed(),
    );
}

#[test]
fn criterion_5_matrix_lemmas() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let r = matrix_lemma_sweep(10_000, 1e6, SEED).unwrap();
    let elapsed = start.elapsed();
    let ok = r.pairs >= 10_000
        && r.alphas.len() == 9
        && r.bownik_violations == 0
        && r.holder_violations == 0
        && elapsed <= Duration::from_secs(60);
    report(
        5,
        ok,
        format!(
            "{} pairs, bownik {}/{} (worst {:.6}), holder {}/{} (worst {:.6})",
            r.pairs,
            r.bownik_violations,
            r.bownik_checks,
            r.bownik_worst,
            r.holder_violations,
            r.holder_checks,
            r.holder_worst
        ),
        elapsed,
    );
}

#[test]
fn criterion_6_parameter_lemmas() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let r = param_lemma_checks(&LemmaGrid::default());
    let elapsed = start.elapsed();
    let failing: Vec<String> = r
        .claims
        .iter()
        .filter(|c| c.violations > 0)
        .map(|c| format!("{} ({}/{})", c.id, c.violations, c.checked))
        .collect();
    let ok = r.points >= 10_000 && r.passed() && elapsed <= Duration::from_secs(30);
    report(6, ok, format!("{} grid points, claims with violations: {failing:?}", r.points), elapsed);
}

/// `(avg_Q W)^{1/2}` by eigendecomposition of the plain average.
fn p2_closed_form(w: &MatrixWeight, q: &DyadicCube) -> Mat {
    let cells = q.cell_box(&w.geom).cells(&w.geom);
    let mut sum = Mat::zeros(w.n, w.n);
    for &c in &cells {
        sum = sum.add(w.cell(c).mat());
    }
    jacobi_eigen(&sum.scale(1.0 / cells.len() as f64)).apply(f64::sqrt)
}

#[test]
fn criterion_7_john_machinery() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut closed_worst = 0.0f64;
    let mut bracket_bad = 0;
    let mut brackets = 0;
    for (d, depth) in [(1, 5), (2, 3)] {
        let geom = GridGeometry::new(d, depth).unwrap();
        for (spec, seed) in weight_corpus(d) {
            let w = generate_weight(geom, &spec, seed).unwrap();
            let cubes: Vec<DyadicCube> = (0..=2).flat_map(|l| geom.cubes_at(l)).collect();
            for q in &cubes {
                let r = reducing_matrix(&w, 2.0, q, Side::Direct).unwrap();
                let exact = p2_closed_form(&w, q);
                closed_worst = closed_worst.max(r.matrix.mat().sub(&exact).max_abs() / exact.max_abs());
                for p in [1.5, 3.0] {
                    for side in [Side::Direct, Side::Dual] {
                        let r = reducing_matrix(&w, p, q, side).unwrap();
                        brackets += 1;
                        let root_n = (w.n as f64).sqrt();
                        if !(r.bracket.0 >= 1.0 - 1e-6 && r.bracket.1 <= root_n + 1e-6) {
                            bracket_bad += 1;
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut john_bad = 0;
    let mut john_worst = 0.0f64;
    let instances = 1000;
    for _ in 0..instances {
        let d = rng.gen_range(1..=2);
        let geom = GridGeometry::new(d, if d == 1 { 5 } else { 2 }).unwrap();
        let n = rng.gen_range(1..=4);
        let p = [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)];
        // sparse supports give rank-deficient bodies as well
        let density = rng.gen_range(0.2..1.0);
        let f = GridFunction::from_fn(geom, n, |_| {
            if rng.gen_bool(density) {
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
            } else {
                vec![0.0; n]
            }
        });
        let q = DyadicCube::root();
        let j = john_normalize(&f, &q, p).unwrap();
        if j.surrogate.rank == 0 {
            continue;
        }
        let bound = (n as f64).sqrt();
        for i in 0..j.components.n {
            let c = GridFunction::new(geom, 1, j.components.component(i)).unwrap();
            let v = p_average(&c, &q, p).unwrap();
            john_worst = john_worst.max(v / bound);
            if v > bound + 1e-6 {
                john_bad += 1;
            }
        }
    }
    let ok = closed_worst <= 1e-8 && bracket_bad == 0 && john_bad == 0;
    report(
        7,
        ok,
        format!(
            "p=2 closed form worst rel {closed_worst:.2e}; brackets {bracket_bad}/{brackets} outside [1, sqrt n]; john {john_bad} over bound on {instances} instances (worst/sqrt n {john_worst:.4})"
        ),
        start.elapsed(),
    );
}

#[test]
fn criterion_8_theorem_certificates() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let base = TheoremParams { p: 3.0, q: Some(2.0), r: Some(1.5), trials: 8, ..TheoremParams::default() };
    let mut total = 0;
    let mut over = Vec::new();
    let mut side = Vec::new();
    let mut inconclusive = 0;
    for (d, depth) in [(1, 7), (2, 5)] {
        let geom = GridGeometry::new(d, depth).unwrap();
        let weights: Vec<MatrixWeight> =
            weight_corpus(d).iter().map(|(s, seed)| generate_weight(geom, s, *seed).unwrap()).collect();
        for kind in TheoremKind::ALL {
            let kernel = kind.default_kernel(d);
            let t = KernelOperator::new(geom, kernel.clone()).unwrap();
            let mut cal = std::collections::BTreeMap::new();
            for w in &weights {
                let c = *cal.entry(w.n).or_insert_with(|| calibration_ratio(&t, w.n, kind, &base).unwrap());
                let cert = verify_calibrated(w, &kernel, kind, &base, c).unwrap();
                total += 1;
                let label = format!("{} d={d} {:?}", kind.id(), w.meta.spec);
                match cert.status {
                    Status::Pass => {}
                    Status::Fail => over.push(label.clone()),
                    Status::Inconclusive => inconclusive += 1,
                }
                for s in cert.exponents.side_conditions.iter().filter(|s| !s.holds) {
                    side.push(format!("{}: {}", kind.id(), s.name));
                }
            }
        }
    }
    side.sort();
    side.dedup();
    let frac = inconclusive as f64 / total as f64;
    let ok = over.is_empty() && side.is_empty() && frac < 0.1;
    report(
        8,
        ok,
        format!(
            "{total} certificates, over 10x calibration {over:?}, inconclusive {inconclusive}, failing side conditions {side:?}"
        ),
        start.elapsed(),
    );
}

fn full_suite() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::minimal(1, 6);
    cfg.weight = Some(mwlab::report::WeightConfig {
        spec: Some(WeightSpec::RandomLogLipschitz { n: 2, amplitude: 0.5, modes: 3 }),
        seed: 7,
        file: None,
    });
    cfg.p = 3.0;
    cfg.q = Some(2.0);
    cfg.r = Some(1.5);
    cfg.trials = 4;
    cfg.theorems = TheoremKind::ALL.to_vec();
    cfg.sparse = Some(SparseConfig {
        corpus: vec![0, 1, 5, 30],
        f: None,
        g: None,
        params: SparseParams::default(),
        dominate: true,
        refine: true,
    });
    cfg.lemmas = Some(LemmaConfig {
        grid: LemmaGrid { steps: 8, denominator: 4, taus: vec![3, 8], scales: vec![1, 4] },
        matrix_pairs: 200,
        ..LemmaConfig::default()
    });
    cfg.validate().unwrap();
    cfg
}

#[test]
fn criterion_9_determinism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = full_suite();
    let a = report_json(&run(&cfg, Sections::ALL).unwrap().report).unwrap();
    let b = report_json(&run(&cfg, Sections::ALL).unwrap().report).unwrap();
    let ok = a.as_bytes() == b.as_bytes();
    report(9, ok, format!("report.json {} bytes, identical: {ok}", a.len()), start.elapsed());
}
