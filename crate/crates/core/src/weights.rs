//! Matrix weights on dyadic grids and their Muckenhoupt-type constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::convex::{fit_surrogate, probe_directions, AverageNorm, Surrogate, SurrogateMethod};
use crate::error::{domain, LabError, Result};
use crate::grid::{DyadicCube, GridGeometry, ScalarGridFunction};
use crate::scalar::{fujii_ainfty, rh_exponent};
use crate::spd::{jacobi_eigen, norm2, Eigen, Mat, SpdMatrix, MAX_DIM};
use crate::sum::tree_sum;

/// Recipe for a generated weight; serialized into `.mwt` headers and configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    Identity {
        n: usize,
    },
    /// `|x - x0|^a I_n`.
    ScalarEmbedded {
        n: usize,
        a: f64,
        #[serde(default = "default_center")]
        center: [f64; 2],
    },
    /// `R(t) diag(r^a, 1) R(t)^T` with `r = |x - x0|`, `t = a ln r`, padded by the identity.
    RotatingPower {
        n: usize,
        a: f64,
        #[serde(default = "default_center")]
        center: [f64; 2],
    },
    /// `exp(S(x))` for a smooth random symmetric field `S`.
    RandomLogLipschitz {
        n: usize,
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: usize,
    },
    /// `diag(|x - x0|^{a_i})`.
    BlockDiagonal {
        exponents: Vec<f64>,
        #[serde(default = "default_center")]
        center: [f64; 2],
    },
}

fn default_center() -> [f64; 2] {
    [1.0 / 3.0, 1.0 / 3.0]
}

fn default_modes() -> usize {
    3
}

impl WeightSpec {
    pub fn n(&self) -> usize {
        match self {
            WeightSpec::Identity { n }
            | WeightSpec::ScalarEmbedded { n, .. }
            | WeightSpec::RotatingPower { n, .. }
            | WeightSpec::RandomLogLipschitz { n, .. } => *n,
            WeightSpec::BlockDiagonal { exponents, .. } => exponents.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightMeta {
    pub spec: Option<WeightSpec>,
    pub seed: u64,
}

/// SPD matrix per cell with its spectral decomposition cached at construction.
#[derive(Clone, Debug)]
pub struct MatrixWeight {
    pub geom: GridGeometry,
    pub n: usize,
    cells: Vec<SpdMatrix>,
    eigen: Vec<Eigen>,
    pub meta: WeightMeta,
}

impl MatrixWeight {
    pub fn new(geom: GridGeometry, mats: Vec<Mat>, meta: WeightMeta) -> Result<MatrixWeight> {
        if mats.len() != geom.cells() {
            return Err(LabError::InvalidInput("weight size does not match geometry".into()));
        }
        let n = mats.first().map_or(0, |m| m.rows());
        if n == 0 || n > MAX_DIM {
            return Err(LabError::InvalidInput(format!("matrix dimension {n} outside [1,8]")));
        }
        let mut cells = Vec::with_capacity(mats.len());
        for (c, m) in mats.into_iter().enumerate() {
            if m.rows() != n {
                return Err(LabError::InvalidInput("mixed matrix dimensions".into()));
            }
            cells.push(SpdMatrix::new(m).map_err(|e| match e {
                LabError::IllConditioned(s) => LabError::IllConditioned(format!("cell {c}: {s}")),
                LabError::InvalidInput(s) => LabError::InvalidInput(format!("cell {c}: {s}")),
                other => other,
            })?);
        }
        let eigen = cells.iter().map(|m| m.eigen()).collect();
        Ok(MatrixWeight { geom, n, cells, eigen, meta })
    }

    pub fn identity(geom: GridGeometry, n: usize) -> MatrixWeight {
        generate_weight(geom, &WeightSpec::Identity { n }, 0).expect("identity weight")
    }

    pub fn from_scalar(w: &ScalarGridFunction, n: usize) -> Result<MatrixWeight> {
        w.as_weight()?;
        let mats = w.values.iter().map(|&v| Mat::identity(n).scale(v)).collect();
        MatrixWeight::new(w.geom, mats, WeightMeta { spec: None, seed: 0 })
    }

    pub fn cell(&self, c: usize) -> &SpdMatrix {
        &self.cells[c]
    }

    pub fn eigen(&self, c: usize) -> &Eigen {
        &self.eigen[c]
    }

    /// `W(x)^alpha` for every cell.
    pub fn power_field(&self, alpha: f64) -> Vec<Mat> {
        if alpha == 1.0 {
            return self.cells.iter().map(|m| *m.mat()).collect();
        }
        self.eigen.iter().map(|e| e.apply(|l| l.powf(alpha))).collect()
    }

    /// `c W`; used to probe scale invariance.
    pub fn scaled(&self, c: f64) -> Result<MatrixWeight> {
        let mats = self.cells.iter().map(|m| m.mat().scale(c)).collect();
        MatrixWeight::new(self.geom, mats, self.meta.clone())
    }

    /// The weight `W^alpha`.
    pub fn powered(&self, alpha: f64) -> Result<MatrixWeight> {
        MatrixWeight::new(self.geom, self.power_field(alpha), WeightMeta { spec: None, seed: self.meta.seed })
    }

    /// Row-major `n x n` entries per cell.
    pub fn to_flat(&self) -> Vec<f64> {
        let nn = self.n * self.n;
        let mut out = vec![0.0; self.cells.len() * nn];
        for (k, m) in self.cells.iter().enumerate() {
            m.mat().write_slice(&mut out[k * nn..(k + 1) * nn]);
        }
        out
    }
}

fn distance(geom: &GridGeometry, c: usize, x0: [f64; 2]) -> f64 {
    let x = geom.center(c);
    let dy = if geom.d == 1 { 0.0 } else { x[1] - x0[1] };
    ((x[0] - x0[0]).powi(2) + dy * dy).sqrt()
}

pub fn generate_weight(geom: GridGeometry, spec: &WeightSpec, seed: u64) -> Result<MatrixWeight> {
    let n = spec.n();
    if n == 0 || n > MAX_DIM {
        return Err(LabError::InvalidInput(format!("matrix dimension {n} outside [1,8]")));
    }
    let power_ok = |a: f64| -> Result<()> {
        if !(a > -(geom.d as f64)) || !a.is_finite() {
            return Err(LabError::InvalidInput(format!("power exponent {a} must exceed -d")));
        }
        Ok(())
    };
    let cells = geom.cells();
    let mats: Vec<Mat> = match spec {
        WeightSpec::Identity { .. } => vec![Mat::identity(n); cells],
        WeightSpec::ScalarEmbedded { a, center, .. } => {
            power_ok(*a)?;
            (0..cells).map(|c| Mat::identity(n).scale(distance(&geom, c, *center).powf(*a))).collect()
        }
        WeightSpec::RotatingPower { a, center, .. } => {
            power_ok(*a)?;
            if n < 2 {
                return Err(LabError::InvalidInput("rotating-power needs n >= 2".into()));
            }
            (0..cells)
                .map(|c| {
                    let r = distance(&geom, c, *center);
                    let t = a * r.ln();
                    let (s, co) = t.sin_cos();
                    let big = r.powf(*a);
                    let mut m = Mat::identity(n);
                    m.set(0, 0, co * co * big + s * s);
                    m.set(1, 1, s * s * big + co * co);
                    m.set(0, 1, co * s * (big - 1.0));
                    m.set(1, 0, co * s * (big - 1.0));
                    m
                })
                .collect()
        }
        WeightSpec::RandomLogLipschitz { amplitude, modes, .. } => {
            if !(*amplitude >= 0.0) || *modes == 0 {
                return Err(LabError::InvalidInput("amplitude must be >= 0 and modes >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut terms = Vec::with_capacity(*modes);
            for k in 1..=*modes {
                let mut b = Mat::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v: f64 = rng.sample(StandardNormal);
                        b.set(i, j, v);
                        b.set(j, i, v);
                    }
                }
                let omega = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                terms.push((b.scale(amplitude / k as f64), omega, phase, k as f64));
            }
            (0..cells)
                .map(|c| {
                    let x = geom.center(c);
                    let mut s = Mat::zeros(n, n);
                    for (b, om, ph, k) in &terms {
                        let arg = std::f64::consts::TAU * k * (om[0] * x[0] + om[1] * x[1]) + ph;
                        s = s.add(&b.scale(arg.cos()));
                    }
                    jacobi_eigen(&s).apply(f64::exp)
                })
                .collect()
        }
        WeightSpec::BlockDiagonal { exponents, center } => {
            for &a in exponents {
                power_ok(a)?;
            }
            (0..cells)
                .map(|c| {
                    let r = distance(&geom, c, *center);
                    Mat::diag(&exponents.iter().map(|&a| r.powf(a)).collect::<Vec<f64>>())
                })
                .collect()
        }
    };
    MatrixWeight::new(geom, mats, WeightMeta { spec: Some(spec.clone()), seed })
}

/// Seeded reference weights: power weights with and without rotation,
/// smooth random fields and a diagonal mixture.
pub fn weight_corpus(d: usize) -> Vec<(WeightSpec, u64)> {
    let c = default_center();
    let mut out = vec![
        (WeightSpec::ScalarEmbedded { n: 1, a: 0.5, center: c }, 0),
        (WeightSpec::ScalarEmbedded { n: 1, a: -0.5, center: c }, 0),
        (WeightSpec::ScalarEmbedded { n: 2, a: 0.3, center: c }, 0),
        (WeightSpec::RotatingPower { n: 2, a: 0.3, center: c }, 0),
        (WeightSpec::RotatingPower { n: 2, a: -0.3, center: c }, 0),
        (WeightSpec::RandomLogLipschitz { n: 2, amplitude: 0.5, modes: 3 }, 1),
        (WeightSpec::RandomLogLipschitz { n: 2, amplitude: 0.5, modes: 3 }, 2),
        (WeightSpec::RandomLogLipschitz { n: 3, amplitude: 0.4, modes: 3 }, 3),
        (WeightSpec::BlockDiagonal { exponents: vec![0.4, -0.3], center: c }, 0),
    ];
    if d == 2 {
        out = vec![
            (WeightSpec::ScalarEmbedded { n: 2, a: -0.5, center: c }, 0),
            (WeightSpec::RotatingPower { n: 2, a: 0.3, center: c }, 0),
            (WeightSpec::RandomLogLipschitz { n: 2, amplitude: 0.4, modes: 3 }, 4),
        ];
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Norm `(avg |W^{1/p} e|^p)^{1/p}`.
    Direct,
    /// Norm `(avg |W^{-1/p} e|^{p'})^{1/p'}`.
    Dual,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducingMatrix {
    pub cube: DyadicCube,
    pub p: f64,
    pub side: Side,
    pub matrix: SpdMatrix,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub closed_form: bool,
}

pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Matrix whose norm represents `(avg_Q |W^alpha e|^t)^{1/t}` within `sqrt(n)`.
pub fn reducing_surrogate(field: &[Mat], geom: &GridGeometry, q: &DyadicCube, t: f64) -> Result<Surrogate> {
    let mats: Vec<Mat> = q.cell_box(geom).cells(geom).iter().map(|&c| field[c]).collect();
    let norm = AverageNorm::from_matrices(&mats, t)?;
    let s = fit_surrogate(&norm, SurrogateMethod::Auto)?;
    if s.rank < norm.n {
        return Err(LabError::Numeric("reducing norm is degenerate".into()));
    }
    Ok(s)
}

pub fn reducing_matrix(w: &MatrixWeight, p: f64, q: &DyadicCube, side: Side) -> Result<ReducingMatrix> {
    if !(p >= 1.0) {
        return domain("p must be at least 1");
    }
    if !q.valid_in(&w.geom) {
        return Err(LabError::InvalidInput("cube outside geometry".into()));
    }
    let (alpha, t) = match side {
        Side::Direct => (1.0 / p, p),
        Side::Dual => {
            if p == 1.0 {
                return domain("dual reducing matrix needs p > 1");
            }
            (-1.0 / p, conjugate(p))
        }
    };
    let field = w.power_field(alpha);
    let s = reducing_surrogate(&field, &w.geom, q, t)?;
    Ok(ReducingMatrix {
        cube: *q,
        p,
        side,
        matrix: SpdMatrix::trusted(s.matrix),
        bracket: s.bracket,
        iterations: s.iterations,
        closed_form: s.closed_form,
    })
}

/// For each cell `x` and level `l`, `sum_{y in Q_l(x)} m(x, y)`, summed pairwise.
fn level_row_sums(geom: &GridGeometry, m: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let cells = geom.cells();
    let mut row = vec![0.0; cells];
    let mut out = Vec::with_capacity(cells);
    for x in 0..cells {
        for (y, r) in row.iter_mut().enumerate() {
            *r = m(x, y);
        }
        let sums = (0..=geom.depth as u32)
            .map(|l| {
                let b = DyadicCube::of_cell(geom, x, l).cell_box(geom);
                let ys = b.cells(geom);
                tree_sum(ys.len(), &|k| row[ys[k]])
            })
            .collect();
        out.push(sums);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ApReport {
    pub p: f64,
    pub value: f64,
    pub worst_cube: DyadicCube,
    /// `sup_Q |W_{p,Q} W'_{p',Q}|^p` when requested.
    pub proxy: Option<f64>,
    pub proxy_ratio: Option<f64>,
}

/// `sup_Q avg_x (avg_y |W^{1/p}(x) W^{-1/p}(y)|^{p'})^{p/p'}`.
pub fn matrix_ap(w: &MatrixWeight, p: f64) -> Result<ApReport> {
    matrix_ap_with(w, p, false)
}

pub fn matrix_ap_with(w: &MatrixWeight, p: f64, proxy: bool) -> Result<ApReport> {
    if !(p > 1.0) || !p.is_finite() {
        return domain("p must exceed 1");
    }
    let pp = conjugate(p);
    let geom = &w.geom;
    let a = w.power_field(1.0 / p);
    let b = w.power_field(-1.0 / p);
    let sums = level_row_sums(geom, |x, y| {
        let v = a[x].mul(&b[y]).op_norm_unchecked();
        if pp == 2.0 {
            v * v
        } else {
            v.powf(pp)
        }
    });
    let mut value = 0.0f64;
    let mut worst = DyadicCube::root();
    for l in 0..=geom.depth {
        for q in geom.cubes_at(l) {
            let xs = q.cell_box(geom).cells(geom);
            let size = xs.len() as f64;
            let s = tree_sum(xs.len(), &|k| (sums[xs[k]][l] / size).powf(p / pp)) / size;
            if s > value {
                value = s;
                worst = q;
            }
        }
    }
    let (proxy, proxy_ratio) = if proxy {
        let mut best = 0.0f64;
        for l in 0..=geom.depth {
            for q in geom.cubes_at(l) {
                let u = reducing_surrogate(&a, geom, &q, p)?;
                let v = reducing_surrogate(&b, geom, &q, pp)?;
                best = best.max(u.matrix.mul(&v.matrix).op_norm()?.powf(p));
            }
        }
        (Some(best), Some(best / value))
    } else {
        (None, None)
    };
    Ok(ApReport { p, value, worst_cube: worst, proxy, proxy_ratio })
}

/// `sup_Q max_{y in Q} avg_{x in Q} |W(x) W^{-1}(y)|`: cellwise supremum over
/// `y`, which reduces to the scalar `<w>_Q / min_Q w`.
pub fn matrix_a1(w: &MatrixWeight) -> Result<f64> {
    let geom = &w.geom;
    let a = w.power_field(1.0);
    let b = w.power_field(-1.0);
    let sums = level_row_sums(geom, |y, x| a[x].mul(&b[y]).op_norm_unchecked());
    let mut best = 0.0f64;
    for y in 0..geom.cells() {
        for (l, s) in sums[y].iter().enumerate() {
            let size = DyadicCube::of_cell(geom, y, l as u32).cell_box(geom).count() as f64;
            best = best.max(s / size);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct AinftyReport {
    /// Lower bound for the supremum over all directions.
    pub value: f64,
    pub directions: usize,
    pub worst_direction: Vec<f64>,
}

/// `max_e [ |W^alpha e|^t ]_{A_inf}` over deterministic directions.
pub fn ainfty_sc_power(w: &MatrixWeight, alpha: f64, t: f64, n_dirs: usize) -> Result<AinftyReport> {
    if n_dirs < 2 * w.n {
        return domain("need at least 2n directions");
    }
    let field = w.power_field(alpha);
    let dirs = probe_directions(w.n, n_dirs);
    let mut best = AinftyReport { value: 0.0, directions: dirs.len(), worst_direction: dirs[0].clone() };
    for e in &dirs {
        let vals = ScalarGridFunction::from_fn(w.geom, |c| norm2(&field[c].mul_vec(e)).powf(t));
        let a = fujii_ainfty(&vals)?;
        if a > best.value {
            best.value = a;
            best.worst_direction = e.clone();
        }
    }
    Ok(best)
}

/// `[W]_{A_{inf,p}^{sc}}` sampled on `n_dirs` directions.
pub fn ainfty_sc(w: &MatrixWeight, p: f64, n_dirs: usize) -> Result<AinftyReport> {
    if !(p >= 1.0) {
        return domain("p must be at least 1");
    }
    ainfty_sc_power(w, 1.0 / p, p, n_dirs)
}

/// `sup_Q <|W^{1/p} A|^r>^{1/r} / <|W^{1/p} A|>`.
pub fn matrix_rh_check(w: &MatrixWeight, p: f64, a: &SpdMatrix, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return domain("r must exceed 1");
    }
    if a.dim() != w.n {
        return Err(LabError::InvalidInput("dimension mismatch".into()));
    }
    let field = w.power_field(1.0 / p);
    let vals: Vec<f64> = field.iter().map(|m| m.mul(a.mat()).op_norm_unchecked()).collect();
    let pow: Vec<f64> = vals.iter().map(|v| v.powf(r)).collect();
    let mut best = 0.0f64;
    for l in 0..=w.geom.depth {
        for q in w.geom.cubes_at(l) {
            let b = q.cell_box(&w.geom);
            let num = crate::grid::box_average(&w.geom, &pow, &b).powf(1.0 / r);
            let den = crate::grid::box_average(&w.geom, &vals, &b);
            best = best.max(num / den);
        }
    }
    Ok(best)
}

/// The matrix reverse Hölder exponent `1 + 1/(2^{d+11} [W]_{A_inf,p}^{sc})`.
pub fn matrix_rh_exponent(d: usize, ainfty: f64) -> f64 {
    rh_exponent(d, ainfty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{scalar_a1, scalar_ap};

    fn g1() -> GridGeometry {
        GridGeometry::new(1, 5).unwrap()
    }

    #[test]
    fn identity_constants_are_one() {
        for d in 1..=2 {
            let g = GridGeometry::new(d, 3).unwrap();
            let w = MatrixWeight::identity(g, 2);
            assert_eq!(matrix_ap(&w, 2.0).unwrap().value, 1.0);
            assert_eq!(matrix_ap(&w, 3.0).unwrap().value, 1.0);
            assert_eq!(matrix_a1(&w).unwrap(), 1.0);
            assert_eq!(ainfty_sc(&w, 2.0, 8).unwrap().value, 1.0);
            let r = reducing_matrix(&w, 3.0, &DyadicCube::root(), Side::Direct).unwrap();
            assert!(r.matrix.mat().sub(&Mat::identity(2)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_embedded_matches_scalar() {
        let g = g1();
        let spec = WeightSpec::ScalarEmbedded { n: 2, a: 0.6, center: [0.3, 0.0] };
        let w = generate_weight(g, &spec, 0).unwrap();
        let s = ScalarGridFunction::from_fn(g, |c| w.cell(c).mat().get(0, 0));
        for p in [1.5, 2.0, 4.0] {
            let m = matrix_ap(&w, p).unwrap().value;
            let o = scalar_ap(&s, p).unwrap();
            assert!((m - o).abs() < 1e-10 * o, "{m} {o}");
        }
        let a1 = matrix_a1(&w).unwrap();
        assert!((a1 - scalar_a1(&s).unwrap()).abs() < 1e-10 * a1);
        let ai = ainfty_sc(&w, 2.0, 8).unwrap().value;
        assert!((ai - fujii_ainfty(&s).unwrap()).abs() < 1e-10 * ai);
    }

    #[test]
    fn diagonal_a1_is_component_max() {
        let g = g1();
        let spec = WeightSpec::BlockDiagonal { exponents: vec![0.5, -0.4], center: [0.4, 0.0] };
        let w = generate_weight(g, &spec, 0).unwrap();
        let comp = |i: usize| ScalarGridFunction::from_fn(g, |c| w.cell(c).mat().get(i, i));
        let expect = scalar_a1(&comp(0)).unwrap().max(scalar_a1(&comp(1)).unwrap());
        assert!((matrix_a1(&w).unwrap() - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn p2_reducing_closed_form() {
        let g = GridGeometry::new(2, 3).unwrap();
        let spec = WeightSpec::BlockDiagonal { exponents: vec![0.7, -0.5], center: [0.3, 0.6] };
        let w = generate_weight(g, &spec, 0).unwrap();
        let q = DyadicCube { level: 1, coords: [1, 0] };
        let r = reducing_matrix(&w, 2.0, &q, Side::Direct).unwrap();
        let cells = q.cell_box(&g).cells(&g);
        for i in 0..2 {
            let avg: f64 = cells.iter().map(|&c| w.cell(c).mat().get(i, i)).sum::<f64>() / cells.len() as f64;
            assert!((r.matrix.mat().get(i, i) - avg.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn random_p3_bracket() {
        let g = GridGeometry::new(1, 4).unwrap();
        let w = generate_weight(g, &WeightSpec::RandomLogLipschitz { n: 3, amplitude: 0.8, modes: 3 }, 5).unwrap();
        for side in [Side::Direct, Side::Dual] {
            let r = reducing_matrix(&w, 3.0, &DyadicCube::root(), side).unwrap();
            assert!(r.bracket.0 >= 1.0 - 1e-6 && r.bracket.1 <= 3f64.sqrt() + 1e-6, "{:?}", r.bracket);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let g = GridGeometry::new(2, 3).unwrap();
        let spec = WeightSpec::RandomLogLipschitz { n: 2, amplitude: 1.0, modes: 4 };
        let a = generate_weight(g, &spec, 9).unwrap().to_flat();
        let b = generate_weight(g, &spec, 9).unwrap().to_flat();
        assert_eq!(a, b);
        let c = generate_weight(g, &spec, 10).unwrap().to_flat();
        assert_ne!(a, c);
    }

    #[test]
    fn rotating_power_zero_is_constant() {
        let g = g1();
        let w = generate_weight(g, &WeightSpec::RotatingPower { n: 2, a: 0.0, center: [0.3, 0.0] }, 0).unwrap();
        assert_eq!(matrix_ap(&w, 2.0).unwrap().value, 1.0);
        let w = generate_weight(g, &WeightSpec::RotatingPower { n: 2, a: 0.5, center: [0.3, 0.0] }, 0).unwrap();
        assert!(matrix_ap(&w, 2.0).unwrap().value > 1.0);
    }

    #[test]
    fn rh_identity_and_scalar() {
        let g = g1();
        let w = MatrixWeight::identity(g, 2);
        assert_eq!(matrix_rh_check(&w, 2.0, &SpdMatrix::identity(2), 1.5).unwrap(), 1.0);
        let w = generate_weight(g, &WeightSpec::ScalarEmbedded { n: 2, a: -0.5, center: [0.3, 0.0] }, 0).unwrap();
        let ai = ainfty_sc(&w, 2.0, 8).unwrap().value;
        let r = matrix_rh_exponent(1, ai);
        assert!(matrix_rh_check(&w, 2.0, &SpdMatrix::identity(2), r).unwrap() <= 2.0);
        assert!(matrix_rh_check(&w, 2.0, &SpdMatrix::identity(2), 1.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = g1();
        assert!(generate_weight(g, &WeightSpec::ScalarEmbedded { n: 2, a: -1.5, center: [0.3, 0.0] }, 0).is_err());
        assert!(generate_weight(g, &WeightSpec::RotatingPower { n: 1, a: 0.5, center: [0.3, 0.0] }, 0).is_err());
        // condition number beyond the cap
        let g = GridGeometry::new(1, 10).unwrap();
        assert!(generate_weight(g, &WeightSpec::BlockDiagonal { exponents: vec![0.9, -0.9], center: [0.0, 0.0] }, 0)
            .is_ok());
        assert!(matches!(
            generate_weight(g, &WeightSpec::BlockDiagonal { exponents: vec![4.0, 0.0], center: [0.0, 0.0] }, 0),
            Err(LabError::IllConditioned(_))
        ));
    }
}
