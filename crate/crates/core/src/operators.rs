//! Discrete singular integrals, kernel regularity and the maximal operators
//! built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::grid::{CellBox, DyadicCube, GridFunction, GridGeometry, ScalarGridFunction};
use crate::spd::{jacobi_eigen, norm2, Mat};
use crate::sum::tree_sum;
use crate::weights::MatrixWeight;

/// Kernel description as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `1/(pi (x - y))`, d = 1.
    Hilbert,
    /// `Omega(theta)/|x - y|^2`, d = 2, `Omega` piecewise constant on equal sectors.
    Rough {
        omega_samples: Vec<f64>,
        #[serde(default = "yes")]
        enforce_mean_zero: bool,
    },
    /// `sgn(t) b(|t|)/(pi |t|)` with `b(t) = 1 + (-1)^{floor(log2 t)}/2`, d = 1.
    HormanderExample,
    Zero,
}

fn yes() -> bool {
    true
}

impl KernelSpec {
    /// `Omega = sign of the first coordinate` on `m` sectors.
    pub fn rough_odd(m: usize) -> KernelSpec {
        let omega = (0..m)
            .map(|k| {
                let mid = std::f64::consts::TAU * (k as f64 + 0.5) / m as f64;
                mid.cos().signum()
            })
            .collect();
        KernelSpec::Rough { omega_samples: omega, enforce_mean_zero: true }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Hilbert => "hilbert",
            KernelSpec::Rough { .. } => "rough",
            KernelSpec::HormanderExample => "hormander-example",
            KernelSpec::Zero => "zero",
        }
    }
}

/// Convolution-type kernel on a grid, with its Toeplitz table of offsets.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    pub geom: GridGeometry,
    pub spec: KernelSpec,
    omega: Vec<f64>,
    table: Vec<f64>,
    /// `table` reversed, so that a source row reads it forwards.
    rev: Vec<f64>,
    /// Warnings raised while building the kernel.
    pub warnings: Vec<String>,
}

impl KernelOperator {
    pub fn new(geom: GridGeometry, spec: KernelSpec) -> Result<KernelOperator> {
        let mut warnings = Vec::new();
        let omega = match &spec {
            KernelSpec::Hilbert | KernelSpec::HormanderExample => {
                if geom.d != 1 {
                    return Err(LabError::InvalidInput(format!("{} kernel needs d = 1", spec.name())));
                }
                Vec::new()
            }
            KernelSpec::Rough { omega_samples, enforce_mean_zero } => {
                if geom.d != 2 {
                    return Err(LabError::InvalidInput("rough kernel needs d = 2".into()));
                }
                if omega_samples.len() < 8 {
                    return Err(LabError::InvalidInput("at least 8 angular samples required".into()));
                }
                if omega_samples.iter().any(|v| !v.is_finite()) {
                    return Err(LabError::InvalidInput("non-finite angular sample".into()));
                }
                let mut om = omega_samples.clone();
                if *enforce_mean_zero {
                    let mean = crate::sum::pairwise(&om) / om.len() as f64;
                    for v in om.iter_mut() {
                        *v -= mean;
                    }
                }
                if om.iter().all(|&v| v == 0.0) {
                    warnings.push("angular profile vanishes identically".into());
                }
                om
            }
            KernelSpec::Zero => Vec::new(),
        };
        let mut op = KernelOperator { geom, spec, omega, table: Vec::new(), rev: Vec::new(), warnings };
        let s = geom.side() as i64;
        let mut table = Vec::new();
        if geom.d == 1 {
            for o in -(s - 1)..s {
                table.push(if o == 0 { 0.0 } else { op.kernel_offset(o, 0) });
            }
        } else {
            for oy in -(s - 1)..s {
                for ox in -(s - 1)..s {
                    table.push(if ox == 0 && oy == 0 { 0.0 } else { op.kernel_offset(ox, oy) });
                }
            }
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Numeric("kernel is not finite off the diagonal".into()));
        }
        op.rev = table.iter().rev().copied().collect();
        op.table = table;
        Ok(op)
    }

    /// Angular profile after optional centering.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// `K` at the separation of two cell centers `o` cells apart.
    pub fn kernel_offset(&self, ox: i64, oy: i64) -> f64 {
        let h = self.geom.cell_size();
        self.kernel(ox as f64 * h, oy as f64 * h)
    }

    /// `K(x, y)` as a function of `x - y`.
    pub fn kernel(&self, dx: f64, dy: f64) -> f64 {
        match &self.spec {
            KernelSpec::Hilbert => 1.0 / (std::f64::consts::PI * dx),
            KernelSpec::HormanderExample => {
                let t = dx.abs();
                let b = if (t.log2().floor() as i64).rem_euclid(2) == 0 { 1.5 } else { 0.5 };
                dx.signum() * b / (std::f64::consts::PI * t)
            }
            KernelSpec::Rough { .. } => {
                let m = self.omega.len();
                let mut theta = dy.atan2(dx);
                if theta < 0.0 {
                    theta += std::f64::consts::TAU;
                }
                let k = ((theta / std::f64::consts::TAU * m as f64) as usize).min(m - 1);
                self.omega[k] / (dx * dx + dy * dy)
            }
            KernelSpec::Zero => 0.0,
        }
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        let s = self.geom.side();
        if self.geom.d == 1 {
            self.table[i + s - 1 - j]
        } else {
            let (xi, yi) = (i & (s - 1), i >> self.geom.depth);
            let (xj, yj) = (j & (s - 1), j >> self.geom.depth);
            let w = 2 * s - 1;
            self.table[(xi + s - 1 - xj) + w * (yi + s - 1 - yj)]
        }
    }

    /// The operator with kernel `K(y, x)`.
    pub fn adjoint(&self) -> KernelOperator {
        let mut out = self.clone();
        std::mem::swap(&mut out.table, &mut out.rev);
        out
    }

    /// `sum_{j in sources, j != i} K(x_i, x_j) f_j |cell|` for each target cell.
    pub fn apply_on(&self, f: &[f64], sources: &[usize], targets: &[usize]) -> Vec<f64> {
        let h = self.geom.cell_measure();
        let src: Vec<usize> = sources.iter().copied().filter(|&j| f[j] != 0.0).collect();
        if src.is_empty() || matches!(self.spec, KernelSpec::Zero) {
            return vec![0.0; targets.len()];
        }
        targets.iter().map(|&i| tree_sum(src.len(), &|k| self.entry(i, src[k]) * f[src[k]]) * h).collect()
    }

    pub fn apply_scalar(&self, f: &[f64]) -> Vec<f64> {
        let dom = self.geom.domain_box();
        self.apply_box(f, &dom, &dom)
    }

    /// `T(f chi_src)` on the cells of `target`, in `target.cells` order.
    /// Sources are summed one at a time in cell order, so over the whole domain
    /// this is the plain double sum bit for bit.
    pub fn apply_box(&self, f: &[f64], src: &CellBox, target: &CellBox) -> Vec<f64> {
        let mut out = vec![0.0; target.count()];
        self.accumulate_box(f, src, target, &mut out);
        out
    }

    fn accumulate_box(&self, f: &[f64], src: &CellBox, target: &CellBox, out: &mut [f64]) {
        if matches!(self.spec, KernelSpec::Zero) || src.count() == 0 {
            return;
        }
        let s = self.geom.side();
        let w = 2 * s - 1;
        let h = self.geom.cell_measure();
        let (x0, x1) = (src.lo[0], src.hi[0]);
        let len = x1 - x0;
        let mut k = 0;
        for yi in target.lo[1]..target.hi[1] {
            for xi in target.lo[0]..target.hi[0] {
                let mut acc = 0.0;
                for yj in src.lo[1]..src.hi[1] {
                    // rev index (s-1-xi+xj) + w (s-1-yi+yj); a single row when d = 1
                    let row = if self.geom.d == 1 { 0 } else { w * (s - 1 + yj - yi) };
                    let base = (s - 1 + x0 - xi) + row;
                    for (kv, fv) in self.rev[base..base + len].iter().zip(&f[yj * s + x0..yj * s + x1]) {
                        acc += kv * fv;
                    }
                }
                out[k] += acc * h;
                k += 1;
            }
        }
    }

    /// Componentwise application to an R^n-valued function.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.geom != self.geom {
            return Err(LabError::InvalidInput("geometry mismatch".into()));
        }
        let comps: Vec<Vec<f64>> = (0..f.n).map(|i| self.apply_scalar(&f.component(i))).collect();
        Ok(GridFunction::from_components(self.geom, &comps))
    }

    pub fn apply_adjoint(&self, f: &GridFunction) -> Result<GridFunction> {
        self.adjoint().apply(f)
    }

    /// `T(f chi_{src \ excl})` on `target`, using whichever of the direct sum
    /// and the difference `T(f chi_src) - T(f chi_excl)` touches fewer cells.
    /// `full` optionally holds `T(f chi_src)` on all cells.
    pub fn apply_excluding(
        &self,
        f: &[f64],
        src: &CellBox,
        excl: &CellBox,
        target: &CellBox,
        full: Option<&[f64]>,
    ) -> Vec<f64> {
        let Some(inner) = src.intersect(excl) else {
            return self.apply_box(f, src, target);
        };
        if inner == *src {
            return vec![0.0; target.count()];
        }
        let rest = src.count() - inner.count();
        match full {
            Some(full) if inner.count() < rest => {
                let near = self.apply_box(f, &inner, target);
                target.cells(&self.geom).iter().zip(near).map(|(&c, v)| full[c] - v).collect()
            }
            _ => {
                let mut out = vec![0.0; target.count()];
                for piece in box_difference(src, &inner) {
                    self.accumulate_box(f, &piece, target, &mut out);
                }
                out
            }
        }
    }
}

/// `outer \ inner` as disjoint boxes, for `inner` inside `outer`.
pub fn box_difference(outer: &CellBox, inner: &CellBox) -> Vec<CellBox> {
    let mut out = Vec::new();
    let mut push = |lo: [usize; 2], hi: [usize; 2]| {
        if lo[0] < hi[0] && lo[1] < hi[1] {
            out.push(CellBox { lo, hi });
        }
    };
    push(outer.lo, [outer.hi[0], inner.lo[1]]);
    push([outer.lo[0], inner.hi[1]], outer.hi);
    push([outer.lo[0], inner.lo[1]], [inner.lo[0], inner.hi[1]]);
    push([inner.hi[0], inner.lo[1]], [outer.hi[0], inner.hi[1]]);
    out
}

/// Hörmander regularity estimate with the per-annulus terms at the worst configuration.
#[derive(Clone, Debug, Serialize)]
pub struct HormanderProfile {
    pub h1: f64,
    pub h2: f64,
    pub terms1: Vec<f64>,
    pub terms2: Vec<f64>,
    pub r_prime: f64,
    pub normalized: bool,
}

const ANNULUS_POINTS_1D: usize = 512;
const ANNULUS_POINTS_2D: usize = 64;

/// Truncated `H_{r,1}`, `H_{r,2}` over centered cubes of several sizes, with
/// midpoint quadrature of the annuli `2^k Q \ 2^{k-1} Q` in the continuum.
pub fn hormander_constant(t: &KernelOperator, r_prime: f64, k_max: usize) -> Result<HormanderProfile> {
    hormander_constant_with(t, r_prime, k_max, true)
}

pub fn hormander_constant_with(
    t: &KernelOperator,
    r_prime: f64,
    k_max: usize,
    normalized: bool,
) -> Result<HormanderProfile> {
    if !(r_prime > 1.0) {
        return domain("r' must exceed 1");
    }
    if k_max < 1 {
        return domain("k_max must be at least 1");
    }
    let d = t.geom.d;
    let sides = [1.0, 0.75, 0.25, 1.0 / 16.0, 3.0 / 64.0];
    let offsets = [-0.25, 0.0, 0.25];
    let half_pts: Vec<[f64; 2]> = if d == 1 {
        offsets.iter().map(|&a| [a, 0.0]).collect()
    } else {
        offsets.iter().flat_map(|&a| offsets.iter().map(move |&b| [a, b])).collect()
    };
    let mut best = [(0.0f64, Vec::new()), (0.0f64, Vec::new())];
    for &l in &sides {
        for x in &half_pts {
            for z in &half_pts {
                if x == z {
                    continue;
                }
                let x = [x[0] * l, x[1] * l];
                let z = [z[0] * l, z[1] * l];
                for (which, slot) in best.iter_mut().enumerate() {
                    let terms: Vec<f64> = (1..=k_max)
                        .map(|k| {
                            let big = (k as f64).exp2() * l;
                            let small = big / 2.0;
                            let diff = |y: [f64; 2]| -> f64 {
                                if which == 0 {
                                    t.kernel(x[0] - y[0], x[1] - y[1]) - t.kernel(z[0] - y[0], z[1] - y[1])
                                } else {
                                    t.kernel(y[0] - x[0], y[1] - x[1]) - t.kernel(y[0] - z[0], y[1] - z[1])
                                }
                            };
                            let norm = annulus_norm(d, big, small, r_prime, normalized, diff);
                            big.powi(d as i32) * norm
                        })
                        .collect();
                    let total = crate::sum::pairwise(&terms);
                    if total > slot.0 {
                        *slot = (total, terms);
                    }
                }
            }
        }
    }
    let [(h1, terms1), (h2, terms2)] = best;
    Ok(HormanderProfile { h1, h2, terms1, terms2, r_prime, normalized })
}

/// `L^{r'}` norm of `g` over the centered annulus, averaged over the outer cube
/// when `normalized`; `r' = inf` gives the maximum.
fn annulus_norm(d: usize, big: f64, small: f64, r: f64, normalized: bool, g: impl Fn([f64; 2]) -> f64) -> f64 {
    let m = if d == 1 { ANNULUS_POINTS_1D } else { ANNULUS_POINTS_2D };
    let step = big / m as f64;
    let cell = step.powi(d as i32);
    let half_small = small / 2.0;
    let mut vals = Vec::new();
    let coord = |i: usize| -big / 2.0 + (i as f64 + 0.5) * step;
    if d == 1 {
        for i in 0..m {
            let y = coord(i);
            if y.abs() >= half_small {
                vals.push(g([y, 0.0]).abs());
            }
        }
    } else {
        for j in 0..m {
            for i in 0..m {
                let y = [coord(i), coord(j)];
                if y[0].abs().max(y[1].abs()) >= half_small {
                    vals.push(g(y).abs());
                }
            }
        }
    }
    let top = vals.iter().fold(0.0f64, |a, &v| a.max(v));
    if r.is_infinite() || top == 0.0 {
        return top;
    }
    // scaled by the maximum so that large r' neither overflows nor underflows
    let integral = tree_sum(vals.len(), &|k| (vals[k] / top).powf(r)) * cell;
    let measure = if normalized { big.powi(d as i32) } else { 1.0 };
    top * (integral / measure).powf(1.0 / r)
}

/// Every dyadic cube, coarse to fine.
fn all_cubes(geom: &GridGeometry) -> Vec<DyadicCube> {
    (0..=geom.depth).flat_map(|l| geom.cubes_at(l)).collect()
}

/// `sup_{Q ni x} agg_Q(|T(f chi_{dom \ 3Q})|, g)` for a per-cube aggregate.
fn sharp_sup(t: &KernelOperator, f: &[f64], agg: impl Fn(&[f64], &[usize]) -> f64) -> Vec<f64> {
    let geom = &t.geom;
    let dom = geom.domain_box();
    let full = t.apply_box(f, &dom, &dom);
    let mut out = vec![0.0f64; geom.cells()];
    for q in all_cubes(geom) {
        let b = q.cell_box(geom);
        let vals = t.apply_excluding(f, &dom, &q.tripled(geom), &b, Some(&full));
        let cells = b.cells(geom);
        let v = agg(&vals, &cells);
        for &c in &cells {
            if v > out[c] {
                out[c] = v;
            }
        }
    }
    out
}

/// `M_T(f, g)(x) = sup_{Q ni x} avg_Q |T(f chi_{(3Q)^c})| |g|`.
pub fn bilinear_sharp_maximal(
    t: &KernelOperator,
    f: &ScalarGridFunction,
    g: &ScalarGridFunction,
) -> ScalarGridFunction {
    let gv = &g.values;
    let values = sharp_sup(t, &f.values, |vals, cells| {
        tree_sum(cells.len(), &|k| vals[k].abs() * gv[cells[k]].abs()) / cells.len() as f64
    });
    ScalarGridFunction { geom: t.geom, values }
}

/// `M_{p,T} f(x) = sup_{Q ni x} (avg_Q |T(f chi_{(3Q)^c})|^p)^{1/p}`; `p = inf` takes the max.
pub fn mpt_maximal(t: &KernelOperator, f: &ScalarGridFunction, p: f64) -> Result<ScalarGridFunction> {
    if !(p >= 1.0) {
        return domain("p must be at least 1");
    }
    let values = sharp_sup(t, &f.values, |vals, cells| {
        if p.is_infinite() {
            vals.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        } else {
            (tree_sum(cells.len(), &|k| vals[k].abs().powf(p)) / cells.len() as f64).powf(1.0 / p)
        }
    });
    Ok(ScalarGridFunction { geom: t.geom, values })
}

/// Which power of the weight enters the grand maximal function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightSign {
    /// `W^{-1/p}`.
    Minus,
    /// `W^{+1/p}`.
    Plus,
}

/// `z -> sup_{Q ni z} (avg_Q |V_Q^{-1} W^{-+1/p} h|^r)^{1/r}`.
pub fn grand_maximal(
    h: &GridFunction,
    w: &MatrixWeight,
    v: impl Fn(&DyadicCube) -> Result<Mat>,
    p: f64,
    r: f64,
    sign: WeightSign,
) -> Result<ScalarGridFunction> {
    if !(r >= 1.0) || !(p >= 1.0) {
        return domain("p and r must be at least 1");
    }
    if h.geom != w.geom || h.n != w.n {
        return Err(LabError::InvalidInput("function and weight do not match".into()));
    }
    let geom = &w.geom;
    let alpha = match sign {
        WeightSign::Minus => -1.0 / p,
        WeightSign::Plus => 1.0 / p,
    };
    let field = w.power_field(alpha);
    let wh: Vec<Vec<f64>> = (0..geom.cells()).map(|c| field[c].mul_vec(h.at(c))).collect();
    let mut out = vec![0.0f64; geom.cells()];
    for q in all_cubes(geom) {
        let vq = v(&q)?;
        let e = jacobi_eigen(&vq.symmetrize());
        if !(e.values[0] > 0.0) || (vq.sub(&vq.transpose())).max_abs() > 1e-9 * vq.max_abs() {
            return domain("V_Q must be symmetric positive definite");
        }
        let inv = e.apply(|l| 1.0 / l);
        let cells = q.cell_box(geom).cells(geom);
        let s = tree_sum(cells.len(), &|k| norm2(&inv.mul_vec(&wh[cells[k]])).powf(r)) / cells.len() as f64;
        let val = s.powf(1.0 / r);
        for &c in &cells {
            if val > out[c] {
                out[c] = val;
            }
        }
    }
    Ok(ScalarGridFunction { geom: *geom, values: out })
}

/// `sup_lambda lambda |{|v| > lambda}|^{1/q}`, exact via order statistics.
pub fn weak_quasi_norm(values: &[f64], cell_measure: f64, q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter()
        .enumerate()
        .take_while(|(_, &x)| x > 0.0)
        .map(|(k, &x)| x * ((k + 1) as f64 * cell_measure).powf(1.0 / q))
        .fold(0.0, f64::max)
}

/// Deterministic trial inputs: cell atoms, dyadic indicators with random
/// signs, and Rademacher fields.
pub fn trial_inputs(geom: &GridGeometry, trials: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = geom.cells();
    (0..trials)
        .map(|k| match k % 3 {
            0 => {
                let mut f = vec![0.0; cells];
                f[rng.gen_range(0..cells)] = 1.0;
                f
            }
            1 => {
                let level = rng.gen_range(1..=geom.depth.min(4)) as u32;
                let cubes = geom.cubes_at(level as usize);
                let mut f = vec![0.0; cells];
                for q in cubes {
                    if rng.gen_bool(0.5) {
                        let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        for c in q.cell_box(geom).cells(geom) {
                            f[c] = s;
                        }
                    }
                }
                f
            }
            _ => (0..cells).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect(),
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorProfile {
    pub q: f64,
    pub weak_norm: f64,
    /// Empirical `M_T: L^r x L^s -> L^{nu,inf}` norm when computed.
    pub mt_norm: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

/// Empirical `||T||_{L^q -> L^{q,inf}}` over deterministic trial inputs.
pub fn weak_norm_estimate(t: &KernelOperator, q: f64, trials: usize, seed: u64) -> Result<OperatorProfile> {
    if !(q >= 1.0) || trials == 0 {
        return domain("need q >= 1 and at least one trial");
    }
    let h = t.geom.cell_measure();
    let mut best = 0.0f64;
    for f in trial_inputs(&t.geom, trials, seed) {
        let norm = crate::grid::lp_norm(&f, h, q);
        if norm == 0.0 {
            continue;
        }
        best = best.max(weak_quasi_norm(&t.apply_scalar(&f), h, q) / norm);
    }
    Ok(OperatorProfile { q, weak_norm: best, mt_norm: None, trials, seed })
}

/// Adds the empirical norm of `M_T` from `L^r x L^s` to `L^{nu,inf}`, `1/nu = 1/r + 1/s`.
pub fn bilinear_norm_estimate(t: &KernelOperator, r: f64, s: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(r >= 1.0 && s >= 1.0) {
        return domain("r and s must be at least 1");
    }
    let nu = r * s / (r + s);
    let h = t.geom.cell_measure();
    let fs = trial_inputs(&t.geom, trials, seed);
    let gs = trial_inputs(&t.geom, trials, seed.wrapping_add(1));
    let mut best = 0.0f64;
    for (f, g) in fs.iter().zip(&gs) {
        let nf = crate::grid::lp_norm(f, h, r);
        let ng = crate::grid::lp_norm(g, h, s);
        if nf == 0.0 || ng == 0.0 {
            continue;
        }
        let fg = ScalarGridFunction { geom: t.geom, values: f.clone() };
        let gg = ScalarGridFunction { geom: t.geom, values: g.clone() };
        let m = bilinear_sharp_maximal(t, &fg, &gg);
        best = best.max(weak_quasi_norm(&m.values, h, nu) / (nf * ng));
    }
    Ok(best)
}
