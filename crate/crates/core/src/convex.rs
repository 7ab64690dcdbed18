//! Averaged norms, John-type ellipsoid surrogates and convex body averages.
//!
//! A norm of the form `rho(e) = (avg_x |A_x e|^t)^{1/t}` covers both the
//! support function of a convex body average (rows `A_x = f(x)^T`) and the
//! norms behind reducing matrices (`A_x = W(x)^{+-1/p}`). Its unit ball is
//! sampled along deterministic probe directions and enclosed by a centered
//! minimum-volume ellipsoid, which brackets the norm within `sqrt(k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{CellBox, DyadicCube, GridFunction};
use crate::spd::{dot, jacobi_eigen, norm2, Mat, SpdMatrix};
use crate::sum::tree_sum;

pub const MVEE_TOL: f64 = 1e-9;
pub const MVEE_MAX_ITER: usize = 100_000;
pub const PROBES_PER_DIM: usize = 64;
/// Relative eigenvalue floor below which a direction is outside the span.
const RANK_TOL: f64 = 1e-12;
pub const BRACKET_TOL: f64 = 1e-6;

/// Deterministic unit directions in R^n. For n = 2 these are `count` equally
/// spaced angles in [0, pi); otherwise axes, then pairwise diagonals, then a
/// Halton sequence mapped to the sphere. Sets are nested under doubling.
pub fn probe_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0]],
        2 => (0..count.max(2))
            .map(|j| {
                let t = std::f64::consts::PI * j as f64 / count.max(2) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(count);
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                out.push(e);
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                for j in i + 1..n {
                    for s in [1.0, -1.0] {
                        let mut e = vec![0.0; n];
                        e[i] = h;
                        e[j] = s * h;
                        out.push(e);
                    }
                }
            }
            let primes = [2u64, 3, 5, 7, 11, 13, 17, 19];
            let mut k = 1u64;
            while out.len() < count {
                let v: Vec<f64> = primes[..n].iter().map(|&b| 2.0 * radical_inverse(k, b) - 1.0).collect();
                k += 1;
                let r = norm2(&v);
                if r > 1e-3 {
                    out.push(v.iter().map(|x| x / r).collect());
                }
            }
            out.truncate(count.max(n));
            out
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// `rho(e) = (avg_x |A_x e|^t)^{1/t}` with each `A_x` an `m x n` block.
#[derive(Clone, Debug)]
pub struct AverageNorm {
    pub n: usize,
    pub m: usize,
    pub t: f64,
    /// Stacked rows, `m` per sample, each of length `n`.
    rows: Vec<f64>,
}

impl AverageNorm {
    pub fn new(n: usize, m: usize, t: f64, rows: Vec<f64>) -> Result<AverageNorm> {
        if !(t >= 1.0) || !t.is_finite() {
            return Err(LabError::Domain(format!("exponent {t} must be a finite value >= 1")));
        }
        if n == 0 || m == 0 || rows.is_empty() || rows.len() % (n * m) != 0 {
            return Err(LabError::InvalidInput("bad sample layout".into()));
        }
        Ok(AverageNorm { n, m, t, rows })
    }

    /// Rows `f(x)^T` over the cells of a box.
    pub fn from_function(f: &GridFunction, b: &CellBox, t: f64) -> Result<AverageNorm> {
        let mut rows = Vec::with_capacity(b.count() * f.n);
        for c in b.cells(&f.geom) {
            rows.extend_from_slice(f.at(c));
        }
        AverageNorm::new(f.n, 1, t, rows)
    }

    /// Blocks `A_x` from a list of square matrices.
    pub fn from_matrices(mats: &[Mat], t: f64) -> Result<AverageNorm> {
        let n = mats.first().map_or(0, |m| m.cols());
        let mut rows = vec![0.0; mats.len() * n * n];
        for (k, a) in mats.iter().enumerate() {
            a.write_slice(&mut rows[k * n * n..(k + 1) * n * n]);
        }
        AverageNorm::new(n, n, t, rows)
    }

    pub fn samples(&self) -> usize {
        self.rows.len() / (self.n * self.m)
    }

    #[inline]
    fn block_apply(&self, k: usize, e: &[f64]) -> f64 {
        let base = k * self.n * self.m;
        if self.m == 1 {
            dot(&self.rows[base..base + self.n], e).abs()
        } else {
            let mut s = 0.0;
            for i in 0..self.m {
                let r = &self.rows[base + i * self.n..base + (i + 1) * self.n];
                let v = dot(r, e);
                s += v * v;
            }
            s.sqrt()
        }
    }

    pub fn eval(&self, e: &[f64]) -> f64 {
        let ns = self.samples();
        let t = self.t;
        let s = if t == 1.0 {
            tree_sum(ns, &|k| self.block_apply(k, e))
        } else if t == 2.0 {
            tree_sum(ns, &|k| {
                let v = self.block_apply(k, e);
                v * v
            })
        } else {
            tree_sum(ns, &|k| self.block_apply(k, e).powf(t))
        };
        (s / ns as f64).powf(1.0 / t)
    }

    /// Second moment `avg_x A_x^T A_x`; its range is the span of the body.
    pub fn gram(&self) -> Mat {
        let n = self.n;
        let ns = self.samples();
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = tree_sum(ns, &|k| {
                    let base = k * n * self.m;
                    let mut s = 0.0;
                    for r in 0..self.m {
                        s += self.rows[base + r * n + i] * self.rows[base + r * n + j];
                    }
                    s
                }) / ns as f64;
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// Norm of the body direction `e` together with the maximizing support
    /// point `avg(A_x^T psi_x)` of the dual body (vector case only).
    pub fn support_point(&self, e: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(self.m, 1, "support points are defined for vector samples");
        let n = self.n;
        let ns = self.samples();
        let h = self.eval(e);
        let mut point = vec![0.0; n];
        if h == 0.0 {
            return (0.0, point);
        }
        let t = self.t;
        for (i, pi) in point.iter_mut().enumerate() {
            *pi = tree_sum(ns, &|k| {
                let row = &self.rows[k * n..(k + 1) * n];
                let s = dot(row, e);
                let psi = if s == 0.0 {
                    0.0
                } else if t == 1.0 {
                    s.signum()
                } else {
                    s.signum() * (s.abs() / h).powf(t - 1.0)
                };
                row[i] * psi
            }) / ns as f64;
        }
        (h, point)
    }
}

/// Result of a centered minimum-volume enclosing ellipsoid computation.
#[derive(Clone, Debug)]
pub struct Mvee {
    /// Shape `A` of `{x : x^T A x <= 1}`, rescaled to touch the farthest point.
    pub shape: Mat,
    pub iterations: usize,
    pub gap: f64,
}

/// Khachiyan ascent with Todd–Yıldırım away steps for the centered MVEE of
/// the symmetric set `{+-x_j}`.
pub fn mvee(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Mvee> {
    let fit = mvee_run(points, tol, max_iter)?;
    if fit.gap > tol {
        return Err(LabError::Numeric(format!(
            "mvee did not converge: gap {:e} after {} iterations",
            fit.gap, fit.iterations
        )));
    }
    Ok(fit)
}

/// As [`mvee`], but returns the last iterate with its gap when the cap is hit.
pub fn mvee_run(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Mvee> {
    mvee_until(points, tol, max_iter, None)
}

/// Also stops, checked every 256 iterations, once `max g / min g <= spread`:
/// the scaled ellipsoid then brackets every point within `sqrt(spread)`.
pub fn mvee_until(points: &[Vec<f64>], tol: f64, max_iter: usize, spread: Option<f64>) -> Result<Mvee> {
    let n = points.first().map_or(0, |p| p.len());
    let np = points.len();
    if n == 0 || np < n {
        return Err(LabError::InvalidInput("mvee needs at least n points".into()));
    }
    let nf = n as f64;
    let mut u = vec![1.0 / np as f64; np];
    let moment = |u: &[f64]| {
        let mut x = Mat::zeros(n, n);
        for (w, p) in u.iter().zip(points) {
            if *w == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    x.set(i, j, x.get(i, j) + w * p[i] * p[j]);
                }
            }
        }
        x
    };
    let invert = |x: &Mat| -> Result<Mat> {
        let e = jacobi_eigen(x);
        if e.values[0] <= 1e-300 || e.values[0] < 1e-15 * e.values[n - 1] {
            return Err(LabError::Numeric("mvee moment matrix is singular".into()));
        }
        Ok(e.apply(|l| 1.0 / l))
    };
    let quad = |xi: &Mat, p: &[f64]| dot(p, &xi.mul_vec(p));
    let mut xinv = invert(&moment(&u))?;
    let mut g: Vec<f64> = points.iter().map(|p| quad(&xinv, p)).collect();
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < max_iter {
        let (jmax, gmax) =
            g.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (j, &v)| if v > a.1 { (j, v) } else { a });
        let (jmin, gmin) = g.iter().enumerate().filter(|(j, _)| u[*j] > 0.0).fold((0, f64::INFINITY), |a, (j, &v)| {
            if v < a.1 {
                (j, v)
            } else {
                a
            }
        });
        // max g <= n(1+tol) already gives E/sqrt(n(1+tol)) inside the hull
        gap = gmax / nf - 1.0;
        if gap <= tol {
            break;
        }
        if let Some(limit) = spread {
            if iterations > 0 && iterations % 256 == 0 {
                let low = g.iter().copied().fold(f64::INFINITY, f64::min);
                if gmax <= limit * low {
                    break;
                }
            }
        }
        iterations += 1;
        let (j, gj, mut alpha) = if gmax - nf >= nf - gmin {
            (jmax, gmax, (gmax - nf) / (nf * (gmax - 1.0)))
        } else {
            (jmin, gmin, (gmin - nf) / (nf * (gmin - 1.0)))
        };
        let mut drop = false;
        if alpha < 0.0 && alpha <= -u[j] / (1.0 - u[j]) {
            alpha = -u[j] / (1.0 - u[j]);
            drop = true;
        }
        if alpha == 0.0 || !alpha.is_finite() {
            break;
        }
        // X' = (1-a) X + a x x^T, updated by Sherman–Morrison
        let xj = &points[j];
        let w = xinv.mul_vec(xj);
        let c = alpha / (1.0 - alpha);
        let denom = 1.0 + c * gj;
        if denom <= 0.0 {
            return Err(LabError::Numeric("mvee update lost positive definiteness".into()));
        }
        for (k, gk) in g.iter_mut().enumerate() {
            let s = dot(&points[k], &w);
            *gk = (*gk - c * s * s / denom) / (1.0 - alpha);
        }
        let mut nx = Mat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                nx.set(a, b, (xinv.get(a, b) - c * w[a] * w[b] / denom) / (1.0 - alpha));
            }
        }
        xinv = nx;
        for (k, uk) in u.iter_mut().enumerate() {
            *uk *= 1.0 - alpha;
            if k == j {
                *uk += alpha;
            }
        }
        if drop || u[j] < 1e-300 {
            u[j] = 0.0;
        }
        if iterations % 512 == 0 {
            xinv = invert(&moment(&u))?;
            for (gk, p) in g.iter_mut().zip(points) {
                *gk = quad(&xinv, p);
            }
        }
    }
    let xinv = invert(&moment(&u))?;
    let far = points.iter().map(|p| quad(&xinv, p)).fold(0.0f64, f64::max);
    Ok(Mvee { shape: xinv.scale(1.0 / far).symmetrize(), iterations, gap })
}

/// Ellipsoidal surrogate `M` of an averaged norm: `|Me| <= rho(e) <= sqrt(k)|Me|`.
#[derive(Clone, Debug, Serialize)]
pub struct Surrogate {
    pub n: usize,
    pub rank: usize,
    /// `n x n`, equal to `U_k M_k U_k^T`.
    #[serde(serialize_with = "ser_mat")]
    pub matrix: Mat,
    /// Orthonormal basis of the span, `n x k`.
    #[serde(skip)]
    pub basis: Mat,
    /// Matrix within the span, `k x k`.
    #[serde(skip)]
    pub reduced: Mat,
    /// min and max of `rho(e)/|Me|` over the certification probes.
    pub bracket: (f64, f64),
    pub probes: usize,
    pub iterations: usize,
    pub closed_form: bool,
    /// Final ellipsoid gap `max_j x_j^T X^{-1} x_j / k - 1`; zero for closed forms.
    pub gap: f64,
}

fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.to_rows().serialize(s)
}

impl Surrogate {
    /// Bracket within `[1, sqrt(rank)]` up to `BRACKET_TOL`.
    pub fn certified(&self) -> bool {
        self.rank == 0
            || (self.bracket.0 >= 1.0 - BRACKET_TOL && self.bracket.1 <= (self.rank as f64).sqrt() + BRACKET_TOL)
    }

    /// `M_k^{-1} U_k^T v`, coordinates of `v` in the normalized span.
    pub fn reduce(&self, v: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = (0..self.rank).map(|c| (0..self.n).map(|i| self.basis.get(i, c) * v[i]).sum()).collect();
        let inv = jacobi_eigen(&self.reduced).apply(|l| 1.0 / l);
        inv.mul_vec(&y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurrogateMethod {
    /// Closed form `Gram^{1/2}` when `t = 2`, ellipsoid fit otherwise.
    Auto,
    /// Always fit the ellipsoid to probe points.
    Mvee,
}

pub fn fit_surrogate(norm: &AverageNorm, method: SurrogateMethod) -> Result<Surrogate> {
    let n = norm.n;
    let gram = norm.gram();
    let eg = jacobi_eigen(&gram);
    let top = eg.values[n - 1];
    let keep: Vec<usize> = (0..n).filter(|&k| top > 0.0 && eg.values[k] > RANK_TOL * top).collect();
    let k = keep.len();
    let mut basis = Mat::zeros(n, k.max(1));
    for (c, &src) in keep.iter().enumerate() {
        for i in 0..n {
            basis.set(i, c, eg.vectors.get(i, src));
        }
    }
    let lift = |u: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..k).map(|c| basis.get(i, c) * u[c]).sum()).collect() };
    let mut gap = 0.0;
    let (reduced, iterations, closed_form) = if k == 0 {
        (Mat::zeros(1, 1), 0, true)
    } else if k == 1 {
        let v = norm.eval(&lift(&[1.0]));
        (Mat::diag(&[v]), 0, true)
    } else if norm.t == 2.0 && method == SurrogateMethod::Auto {
        let g: Vec<f64> = keep.iter().map(|&s| eg.values[s].sqrt()).collect();
        (Mat::diag(&g), 0, true)
    } else {
        // certification probes seen from inside the span, plus native ones
        let mut dirs = Vec::new();
        for e in probe_directions(n, PROBES_PER_DIM * n) {
            let u: Vec<f64> = (0..k).map(|c| (0..n).map(|i| basis.get(i, c) * e[i]).sum()).collect();
            let r = norm2(&u);
            if r > 1e-8 {
                dirs.push(u.iter().map(|x| x / r).collect::<Vec<f64>>());
            }
        }
        if k < n {
            dirs.extend(probe_directions(k, PROBES_PER_DIM * k));
        }
        let mut pts = Vec::with_capacity(dirs.len());
        for u in &dirs {
            let r = norm.eval(&lift(u));
            if !(r > 0.0) {
                return Err(LabError::Numeric("norm vanishes inside its own span".into()));
            }
            pts.push(u.iter().map(|x| x / r).collect::<Vec<f64>>());
        }
        // a certified bracket is all the surrogate promises
        let spread = k as f64 * (1.0 - 1e-9);
        let fit = mvee_until(&pts, MVEE_TOL, MVEE_MAX_ITER, Some(spread))?;
        gap = fit.gap;
        let root = jacobi_eigen(&fit.shape).apply(|l| l.max(0.0).sqrt());
        (root, fit.iterations, false)
    };
    let mut matrix = Mat::zeros(n, n);
    if k > 0 {
        let bm = {
            let mut t = Mat::zeros(n, k);
            for i in 0..n {
                for c in 0..k {
                    t.set(i, c, (0..k).map(|q| basis.get(i, q) * reduced.get(q, c)).sum());
                }
            }
            t
        };
        for i in 0..n {
            for j in 0..n {
                matrix.set(i, j, (0..k).map(|c| bm.get(i, c) * basis.get(j, c)).sum());
            }
        }
        matrix = matrix.symmetrize();
    }
    let probes = probe_directions(n, PROBES_PER_DIM * n);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for e in &probes {
        let me = norm2(&matrix.mul_vec(e));
        let r = norm.eval(e);
        let ratio = if me <= 1e-14 * top.sqrt() && r <= 1e-12 * top.sqrt() { 1.0 } else { r / me };
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    if k == 0 {
        lo = 1.0;
        hi = 1.0;
    }
    let out = Surrogate {
        n,
        rank: k,
        matrix,
        basis: if k == 0 { Mat::zeros(n, 1) } else { basis },
        reduced,
        bracket: (lo, hi),
        probes: probes.len(),
        iterations,
        closed_form,
        gap,
    };
    // a capped ellipsoid run is kept only if the bracket still certifies it
    if gap > MVEE_TOL && !out.certified() {
        return Err(LabError::Numeric(format!(
            "mvee did not converge: gap {gap:e} after {} iterations, bracket {:?}",
            out.iterations, out.bracket
        )));
    }
    Ok(out)
}

/// The convex body average `<<f>>_{p,Q}` with its support oracle and surrogate.
#[derive(Clone, Debug)]
pub struct ConvexBodyAverage {
    pub p: f64,
    pub region: CellBox,
    pub norm: AverageNorm,
    pub surrogate: Surrogate,
}

impl ConvexBodyAverage {
    pub fn new(f: &GridFunction, q: &DyadicCube, p: f64) -> Result<ConvexBodyAverage> {
        if !q.valid_in(&f.geom) {
            return Err(LabError::InvalidInput("cube outside geometry".into()));
        }
        ConvexBodyAverage::on_box(f, &q.cell_box(&f.geom), p)
    }

    pub fn on_box(f: &GridFunction, region: &CellBox, p: f64) -> Result<ConvexBodyAverage> {
        let norm = AverageNorm::from_function(f, region, p)?;
        let surrogate = fit_surrogate(&norm, SurrogateMethod::Auto)?;
        Ok(ConvexBodyAverage { p, region: *region, norm, surrogate })
    }

    pub fn n(&self) -> usize {
        self.norm.n
    }

    pub fn support(&self, e: &[f64]) -> f64 {
        self.norm.eval(e)
    }

    pub fn degenerate_rank(&self) -> usize {
        self.surrogate.rank
    }

    /// `M` with `M(B) subset body subset sqrt(n) M(B)`; degenerate bodies are reported.
    pub fn ellipsoid_surrogate(&self) -> Result<SpdMatrix> {
        if self.surrogate.rank < self.n() {
            return Err(LabError::Degenerate { rank: self.surrogate.rank, dim: self.n() });
        }
        SpdMatrix::new(self.surrogate.matrix)
    }
}

/// Lower and upper bound for `sup{<a,b> : a in A, b in B}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProductBracket {
    pub lower: f64,
    pub upper: f64,
}

pub const PRODUCT_ROUNDS: usize = 20;
pub const PRODUCT_STARTS: usize = 4;

pub fn body_product_bracket(a: &ConvexBodyAverage, b: &ConvexBodyAverage) -> Result<ProductBracket> {
    let n = a.n();
    if b.n() != n {
        return Err(LabError::InvalidInput("bodies must share the dimension".into()));
    }
    if a.surrogate.rank == 0 || b.surrogate.rank == 0 {
        return Ok(ProductBracket { lower: 0.0, upper: 0.0 });
    }
    let prod = a.surrogate.matrix.mul(&b.surrogate.matrix);
    let upper = n as f64 * prod.op_norm()?;
    let mut starts = Vec::with_capacity(PRODUCT_STARTS);
    // top right singular vector of M_A M_B, pushed through M_B
    let eg = jacobi_eigen(&prod.transpose().mul(&prod));
    let v = eg.vectors.column(n - 1);
    starts.push(b.surrogate.matrix.mul_vec(&v));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while starts.len() < PRODUCT_STARTS {
        starts.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let mut lower = 0.0f64;
    for dir in starts {
        if norm2(&dir) == 0.0 {
            continue;
        }
        let mut bdir = dir;
        for _ in 0..PRODUCT_ROUNDS {
            let (_, apt) = a.norm.support_point(&bdir);
            let (val, bpt) = b.norm.support_point(&apt);
            lower = lower.max(val);
            if norm2(&bpt) == 0.0 {
                break;
            }
            bdir = bpt;
        }
    }
    Ok(ProductBracket { lower, upper: upper.max(lower) })
}

/// John normalization on a region: returns the surrogate and the components
/// of `f~ = M_k^{-1} U_k^T f` (one vector per span coordinate) over all cells.
#[derive(Clone, Debug)]
pub struct JohnNormalized {
    pub surrogate: Surrogate,
    pub components: GridFunction,
}

pub fn john_normalize_box(f: &GridFunction, region: &CellBox, p: f64) -> Result<JohnNormalized> {
    let norm = AverageNorm::from_function(f, region, p)?;
    let surrogate = fit_surrogate(&norm, SurrogateMethod::Auto)?;
    let k = surrogate.rank;
    if k == 0 {
        return Ok(JohnNormalized { surrogate, components: GridFunction::zeros(f.geom, 1) });
    }
    let inv = jacobi_eigen(&surrogate.reduced).apply(|l| 1.0 / l);
    let mut data = vec![0.0; f.geom.cells() * k];
    let mut y = vec![0.0; k];
    for c in region.cells(&f.geom) {
        let v = f.at(c);
        for (q, yq) in y.iter_mut().enumerate() {
            *yq = (0..f.n).map(|i| surrogate.basis.get(i, q) * v[i]).sum();
        }
        let z = inv.mul_vec(&y);
        data[c * k..(c + 1) * k].copy_from_slice(&z);
    }
    Ok(JohnNormalized { surrogate, components: GridFunction { geom: f.geom, n: k, data } })
}

pub fn john_normalize(f: &GridFunction, q: &DyadicCube, p: f64) -> Result<JohnNormalized> {
    john_normalize_box(f, &q.cell_box(&f.geom), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{p_average, GridGeometry};

    fn random_f(seed: u64, d: usize, l: usize, n: usize) -> GridFunction {
        let g = GridGeometry::new(d, l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(g, n, |_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn probes_are_unit_and_nested() {
        for n in 1..=5 {
            let a = probe_directions(n, 64 * n);
            assert!(a.iter().all(|e| (norm2(e) - 1.0).abs() < 1e-14));
            let b = probe_directions(n, 128 * n);
            for e in &a {
                assert!(b.iter().any(|x| x == e));
            }
        }
    }

    #[test]
    fn constant_function_is_a_segment() {
        let g = GridGeometry::new(1, 4).unwrap();
        let f = GridFunction::from_fn(g, 2, |_| vec![3.0, -1.0]);
        let body = ConvexBodyAverage::new(&f, &DyadicCube::root(), 1.5).unwrap();
        assert_eq!(body.degenerate_rank(), 1);
        for e in probe_directions(2, 32) {
            assert!((body.support(&e) - (3.0 * e[0] - e[1]).abs()).abs() < 1e-13);
        }
        assert!(matches!(body.ellipsoid_surrogate(), Err(LabError::Degenerate { rank: 1, dim: 2 })));
    }

    #[test]
    fn zero_body_is_rank_zero() {
        let g = GridGeometry::new(2, 2).unwrap();
        let f = GridFunction::zeros(g, 3);
        let body = ConvexBodyAverage::new(&f, &DyadicCube::root(), 2.0).unwrap();
        assert_eq!(body.degenerate_rank(), 0);
        assert!(matches!(body.ellipsoid_surrogate(), Err(LabError::Degenerate { rank: 0, .. })));
    }

    #[test]
    fn mvee_recovers_ellipse() {
        let a = Mat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let pts: Vec<Vec<f64>> = probe_directions(2, 256)
            .iter()
            .map(|e| {
                let r = dot(e, &a.mul_vec(e)).sqrt();
                e.iter().map(|x| x / r).collect()
            })
            .collect();
        let fit = mvee(&pts, 1e-12, MVEE_MAX_ITER).unwrap();
        assert!(fit.shape.sub(&a).max_abs() < 1e-5, "{:?}", fit.shape);
    }

    #[test]
    fn mvee_p2_close_to_gram() {
        let f = random_f(21, 1, 6, 3);
        let norm = AverageNorm::from_function(&f, &f.geom.domain_box(), 2.0).unwrap();
        let exact = fit_surrogate(&norm, SurrogateMethod::Auto).unwrap();
        let fitted = fit_surrogate(&norm, SurrogateMethod::Mvee).unwrap();
        assert!(exact.closed_form && !fitted.closed_form);
        let rel = fitted.matrix.sub(&exact.matrix).max_abs() / exact.matrix.max_abs();
        assert!(rel < 1e-3, "{rel}");
        assert!(fitted.certified() && exact.certified());
    }

    #[test]
    fn p1_bracket_certified() {
        for seed in 0..5 {
            let f = random_f(seed, 2, 3, 2);
            let body = ConvexBodyAverage::new(&f, &DyadicCube::root(), 1.0).unwrap();
            assert_eq!(body.surrogate.rank, 2);
            assert!(body.surrogate.certified(), "{:?}", body.surrogate.bracket);
        }
    }

    #[test]
    fn support_point_attains_support() {
        let f = random_f(4, 1, 5, 3);
        for p in [1.0, 1.5, 3.0] {
            let body = ConvexBodyAverage::new(&f, &DyadicCube::root(), p).unwrap();
            let e = [0.3, -0.7, 0.2];
            let (h, pt) = body.norm.support_point(&e);
            assert!((dot(&pt, &e) - h).abs() < 1e-12 * h);
        }
    }

    #[test]
    fn segments_product_is_one() {
        let g = GridGeometry::new(1, 3).unwrap();
        let f = GridFunction::from_fn(g, 2, |_| vec![1.0, 0.0]);
        let a = ConvexBodyAverage::new(&f, &DyadicCube::root(), 1.0).unwrap();
        let br = body_product_bracket(&a, &a).unwrap();
        assert!(br.lower <= 1.0 + 1e-14 && br.upper >= 1.0 - 1e-14 && br.lower > 1.0 - 1e-12);
    }

    #[test]
    fn ellipsoid_product_closed_form() {
        let f = random_f(8, 1, 5, 2);
        let g = random_f(9, 1, 5, 2);
        let a = ConvexBodyAverage::new(&f, &DyadicCube::root(), 2.0).unwrap();
        let b = ConvexBodyAverage::new(&g, &DyadicCube::root(), 2.0).unwrap();
        let exact = b.surrogate.matrix.mul(&a.surrogate.matrix).op_norm().unwrap();
        let br = body_product_bracket(&a, &b).unwrap();
        assert!(br.lower <= exact * (1.0 + 1e-12) && exact <= br.upper);
        assert!(br.lower > exact * (1.0 - 1e-9));
    }

    #[test]
    fn john_components_bounded() {
        for seed in 0..20 {
            let f = random_f(100 + seed, 1, 5, 3);
            let q = DyadicCube::root();
            for p in [1.0, 2.0, 3.0] {
                let j = john_normalize(&f, &q, p).unwrap();
                for i in 0..j.components.n {
                    let c = GridFunction::new(f.geom, 1, j.components.component(i)).unwrap();
                    assert!(p_average(&c, &q, p).unwrap() <= 3f64.sqrt() + 1e-6);
                }
            }
        }
    }
}
