//! Small dense matrices (n <= 8) and SPD spectral calculus.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, LabError, Result};

pub const MAX_DIM: usize = 8;
const STRIDE: usize = MAX_DIM;
const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;
/// Largest accepted condition number for an `SpdMatrix`.
pub const COND_CAP: f64 = 1e8;

/// Dense `rows x cols` matrix stored inline, row-major with a fixed stride.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        assert!(rows <= MAX_DIM && cols <= MAX_DIM, "matrix too large");
        Mat { rows, cols, a: [0.0; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Mat {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if r == 0 || r > MAX_DIM || c == 0 || c > MAX_DIM {
            return Err(LabError::InvalidInput(format!("bad shape {r}x{c}")));
        }
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(LabError::InvalidInput("ragged rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Build from a row-major slice of length `rows * cols`.
    pub fn from_slice(rows: usize, cols: usize, data: &[f64]) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, data[i * cols + j]);
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn write_slice(&self, out: &mut [f64]) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i * self.cols + j] = self.get(i, j);
            }
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * STRIDE + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * STRIDE + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.a[i * STRIDE + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// `self * v`, with `v.len() == cols`; writes `rows` entries.
    #[inline]
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        let mut out = *self;
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j) + other.get(i, j));
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = *self;
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j) * s);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j).is_finite()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn symmetrize(&self) -> Mat {
        let mut out = *self;
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> Result<f64> {
        if !self.is_finite() {
            return Err(LabError::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(self.op_norm_unchecked())
    }

    /// Largest singular value without the finiteness check (hot loops).
    pub fn op_norm_unchecked(&self) -> f64 {
        if self.rows == 1 || self.cols == 1 {
            let mut s = 0.0;
            for i in 0..self.rows {
                for j in 0..self.cols {
                    s += self.get(i, j) * self.get(i, j);
                }
            }
            return s.sqrt();
        }
        let g = self.transpose().mul(self);
        if g.rows == 2 {
            // closed form for the 2x2 Gram matrix
            let (a, b, d) = (g.get(0, 0), g.get(0, 1), g.get(1, 1));
            let half_tr = 0.5 * (a + d);
            let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            return (half_tr + disc).max(0.0).sqrt();
        }
        let e = jacobi_eigen(&g);
        e.values[g.rows - 1].max(0.0).sqrt()
    }
}

/// Spectral decomposition of a symmetric matrix; eigenvalues ascending,
/// eigenvectors in the columns of `vectors`.
#[derive(Clone, Copy, Debug)]
pub struct Eigen {
    pub values: [f64; MAX_DIM],
    pub vectors: Mat,
    pub dim: usize,
}

impl Eigen {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    /// U diag(g(lambda)) U^T.
    pub fn apply(&self, g: impl Fn(f64) -> f64) -> Mat {
        let n = self.dim;
        let mut out = Mat::zeros(n, n);
        for k in 0..n {
            let gk = g(self.values[k]);
            for i in 0..n {
                let uik = self.vectors.get(i, k) * gk;
                for j in 0..n {
                    out.a[i * STRIDE + j] += uik * self.vectors.get(j, k);
                }
            }
        }
        out.symmetrize()
    }
}

/// Cyclic Jacobi eigensolver for symmetric input.
pub fn jacobi_eigen(m: &Mat) -> Eigen {
    let n = m.rows;
    assert_eq!(n, m.cols, "jacobi needs a square matrix");
    let mut a = m.symmetrize();
    let mut v = Mat::identity(n);
    let total: f64 = {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a.get(i, j) * a.get(i, j);
            }
        }
        s.sqrt()
    };
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a.get(i, j) * a.get(i, j);
                }
            }
        }
        if off.sqrt() <= JACOBI_TOL * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let mut values = [0.0; MAX_DIM];
    let mut vectors = Mat::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        values[k] = a.get(src, src);
        for i in 0..n {
            vectors.set(i, k, v.get(i, src));
        }
    }
    Eigen { values, vectors, dim: n }
}

/// Validated symmetric positive definite matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdMatrix {
    m: Mat,
}

impl SpdMatrix {
    /// Validate symmetry, positive definiteness and the condition cap.
    pub fn new(m: Mat) -> Result<SpdMatrix> {
        let s = SpdMatrix::check_shape(m)?;
        let e = jacobi_eigen(&s.m);
        let lo = e.values[0];
        let hi = e.values[e.dim - 1];
        if lo <= 0.0 {
            return Err(LabError::InvalidInput(format!("not positive definite (min eigenvalue {lo:e})")));
        }
        if hi / lo > COND_CAP {
            return Err(LabError::IllConditioned(format!("condition number {:e} exceeds cap", hi / lo)));
        }
        Ok(s)
    }

    /// Accept a matrix already known to be SPD (constructed spectrally); only
    /// symmetry and shape are checked.
    pub(crate) fn trusted(m: Mat) -> SpdMatrix {
        SpdMatrix { m: m.symmetrize() }
    }

    fn check_shape(m: Mat) -> Result<SpdMatrix> {
        if m.rows != m.cols || m.rows == 0 {
            return Err(LabError::InvalidInput("SPD matrix must be square".into()));
        }
        if !m.is_finite() {
            return Err(LabError::InvalidInput("non-finite matrix entry".into()));
        }
        let scale = m.max_abs();
        for i in 0..m.rows {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return Err(LabError::InvalidInput("matrix is not symmetric".into()));
                }
            }
        }
        Ok(SpdMatrix { m: m.symmetrize() })
    }

    pub fn identity(n: usize) -> SpdMatrix {
        SpdMatrix { m: Mat::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.m.rows
    }

    pub fn mat(&self) -> &Mat {
        &self.m
    }

    pub fn eigen(&self) -> Eigen {
        jacobi_eigen(&self.m)
    }

    /// Largest eigenvalue.
    pub fn op_norm(&self) -> f64 {
        let e = self.eigen();
        e.values[e.dim - 1]
    }

    pub fn frac_power(&self, alpha: f64) -> Result<SpdMatrix> {
        frac_power(self, alpha)
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        frac_power(self, -1.0)
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            dim: usize,
            entries: Vec<Vec<f64>>,
        }
        Repr { dim: self.dim(), entries: self.m.to_rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            entries: Vec<Vec<f64>>,
        }
        let r = Repr::deserialize(d)?;
        if r.entries.len() != r.dim {
            return Err(serde::de::Error::custom("dim does not match entries"));
        }
        let m = Mat::from_rows(&r.entries).map_err(serde::de::Error::custom)?;
        SpdMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Largest singular value of any square matrix.
pub fn op_norm(a: &Mat) -> Result<f64> {
    a.op_norm()
}

/// Spectral power U diag(lambda^alpha) U^T.
pub fn frac_power(a: &SpdMatrix, alpha: f64) -> Result<SpdMatrix> {
    if !alpha.is_finite() {
        return domain("exponent must be finite");
    }
    let e = a.eigen();
    let tr = a.m.trace();
    if e.values[0] < 1e-14 * tr {
        return Err(LabError::IllConditioned(format!("eigenvalue {:e} below 1e-14 * trace", e.values[0])));
    }
    Ok(SpdMatrix::trusted(e.apply(|l| l.powf(alpha))))
}

/// Returns (|A^a B^a|, n |AB|^a).
pub fn bownik_bound(a: &SpdMatrix, b: &SpdMatrix, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain("alpha must lie in (0,1)");
    }
    if a.dim() != b.dim() {
        return Err(LabError::InvalidInput("dimension mismatch".into()));
    }
    let lhs = frac_power(a, alpha)?.m.mul(&frac_power(b, alpha)?.m).op_norm()?;
    let rhs = a.dim() as f64 * a.m.mul(&b.m).op_norm()?.powf(alpha);
    Ok((lhs, rhs))
}

/// Returns (|A^a e|, |A e|^a) for a unit vector e.
pub fn holder_mccarthy_check(a: &SpdMatrix, alpha: f64, e: &[f64]) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain("alpha must lie in (0,1)");
    }
    if e.len() != a.dim() {
        return Err(LabError::InvalidInput("dimension mismatch".into()));
    }
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return domain("e must be a unit vector");
    }
    let lhs = norm2(&frac_power(a, alpha)?.m.mul_vec(e));
    let rhs = norm2(&a.m.mul_vec(e)).powf(alpha);
    Ok((lhs, rhs))
}

/// `U diag(lambda) U^T` with Haar-like `U` and log-uniform spectrum whose
/// condition number is itself log-uniform in `[1, max_cond]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, max_cond: f64) -> SpdMatrix {
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.sample(StandardNormal);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    let u = jacobi_eigen(&g).vectors;
    let spread = rng.gen_range(0.0..=1.0) * max_cond.ln();
    let mut vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    if n > 1 {
        vals[0] = 0.0;
        vals[n - 1] = 1.0;
    }
    let scale = rng.gen_range(-3.0f64..3.0).exp();
    let d = Mat::diag(&vals.iter().map(|t| scale * (t * spread).exp()).collect::<Vec<f64>>());
    SpdMatrix::trusted(u.mul(&d).mul(&u.transpose()).symmetrize())
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SpdMatrix {
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        SpdMatrix::new(g.transpose().mul(&g).add(&Mat::identity(n).scale(0.5))).unwrap()
    }

    fn power_iteration_norm(a: &Mat) -> f64 {
        let g = a.transpose().mul(a);
        let mut v = vec![1.0; a.cols()];
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w = g.mul_vec(&v);
            let nw = norm2(&w);
            v = w.iter().map(|x| x / nw).collect();
            if (nw - lambda).abs() <= 1e-14 * nw {
                lambda = nw;
                break;
            }
            lambda = nw;
        }
        lambda.sqrt()
    }

    #[test]
    fn identity_and_diagonal_norms() {
        assert_eq!(Mat::identity(3).op_norm().unwrap(), 1.0);
        assert_eq!(SpdMatrix::identity(3).op_norm(), 1.0);
        let d = SpdMatrix::new(Mat::diag(&[2.0, 3.0])).unwrap();
        assert!((d.op_norm() - 3.0).abs() < 1e-15);
        assert!((d.mat().op_norm().unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn op_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(&mut rng, 4);
        let oracle = power_iteration_norm(a.mat());
        assert!((a.op_norm() - oracle).abs() <= 1e-10 * oracle);
        assert!((a.mat().op_norm().unwrap() - oracle).abs() <= 1e-10 * oracle);
        let mut g = Mat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                g.set(i, j, rng.gen_range(-2.0..2.0));
            }
        }
        let oracle = power_iteration_norm(&g);
        assert!((g.op_norm().unwrap() - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = Mat::identity(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(m.op_norm(), Err(LabError::InvalidInput(_))));
    }

    #[test]
    fn frac_power_closed_forms() {
        let i = SpdMatrix::identity(3);
        assert_eq!(frac_power(&i, 0.5).unwrap().mat(), &Mat::identity(3));
        let d = SpdMatrix::new(Mat::diag(&[4.0, 9.0])).unwrap();
        let r = frac_power(&d, 0.5).unwrap();
        assert!(r.mat().sub(&Mat::diag(&[2.0, 3.0])).max_abs() < 1e-14);
    }

    #[test]
    fn frac_power_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(&mut rng, 4);
        let back = frac_power(&frac_power(&a, 1.0 / 3.0).unwrap(), 3.0).unwrap();
        assert!(back.mat().sub(a.mat()).max_abs() < 1e-9);
    }

    #[test]
    fn frac_power_rejects_near_singular() {
        let m = SpdMatrix::trusted(Mat::diag(&[1.0, 1e-16]));
        assert!(matches!(frac_power(&m, -0.5), Err(LabError::IllConditioned(_))));
    }

    #[test]
    fn spd_validation() {
        assert!(SpdMatrix::new(Mat::diag(&[1.0, -1.0])).is_err());
        assert!(matches!(SpdMatrix::new(Mat::diag(&[1.0, 1e-9])), Err(LabError::IllConditioned(_))));
        let mut m = Mat::identity(2);
        m.set(0, 1, 0.1);
        assert!(SpdMatrix::new(m).is_err());
    }

    #[test]
    fn bownik_examples() {
        let i = SpdMatrix::identity(3);
        let (l, r) = bownik_bound(&i, &i, 0.5).unwrap();
        assert!((l - 1.0).abs() < 1e-15 && (r - 3.0).abs() < 1e-15);
        let a = SpdMatrix::new(Mat::diag(&[4.0, 1.0])).unwrap();
        let b = SpdMatrix::new(Mat::diag(&[1.0, 4.0])).unwrap();
        let (l, r) = bownik_bound(&a, &b, 0.5).unwrap();
        assert!((l - 2.0).abs() < 1e-14 && (r - 4.0).abs() < 1e-14);
        assert!(bownik_bound(&a, &b, 1.0).is_err());
    }

    #[test]
    fn holder_mccarthy_examples() {
        let a = SpdMatrix::new(Mat::diag(&[4.0, 1.0])).unwrap();
        let (l, r) = holder_mccarthy_check(&a, 0.5, &[1.0, 0.0]).unwrap();
        assert!((l - 2.0).abs() < 1e-15 && (r - 2.0).abs() < 1e-15);
        let (l, r) = holder_mccarthy_check(&SpdMatrix::identity(2), 0.3, &[0.6, 0.8]).unwrap();
        assert!((l - 1.0).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
        assert!(holder_mccarthy_check(&a, 0.5, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = SpdMatrix::new(Mat::diag(&[2.0, 5.0])).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"dim":2,"entries":[[2.0,0.0],[0.0,5.0]]}"#);
        let b: SpdMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
