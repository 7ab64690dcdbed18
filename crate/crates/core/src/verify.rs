//! Certificates for the weighted estimates: exponent choices, both sides of
//! every bound, calibration against the identity weight, and the auxiliary
//! parameter, Hölder and reverse Hölder lemmas.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::convex::{body_product_bracket, probe_directions, AverageNorm, ConvexBodyAverage};
use crate::error::{domain, LabError, Result};
use crate::grid::{lp_norm, DyadicCube, GridFunction, GridGeometry};
use crate::operators::{grand_maximal, trial_inputs, weak_quasi_norm, KernelOperator, KernelSpec, WeightSign};
use crate::scalar::rh_exponent;
use crate::sparse::SparseFamily;
use crate::spd::{frac_power, norm2, Mat, SpdMatrix};
use crate::weights::{
    ainfty_sc, ainfty_sc_power, conjugate, matrix_a1, matrix_ap, reducing_matrix, reducing_surrogate, MatrixWeight,
    Side, WeightSpec,
};

/// Constants above this are treated as saturated by the sampling.
pub const SATURATION: f64 = 1e6;
/// Tolerance for the algebraic side conditions.
pub const SIDE_TOL: f64 = 1e-12;
/// Truncation radius of the `C_{p,q}` denominator, in domain widths.
pub const CPQ_RADIUS: f64 = 8.0;

/// `tau_d = 2^{d+11}`, used for every exponent choice.
pub fn tau(d: usize) -> f64 {
    (d as f64 + 11.0).exp2()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremKind {
    RoughAp,
    HormAp,
    A1,
    Aq,
    CfCzo,
    CfRough,
    CfHormander,
    EndpointRough,
    EndpointHormander,
}

impl TheoremKind {
    pub const ALL: [TheoremKind; 9] = [
        TheoremKind::RoughAp,
        TheoremKind::HormAp,
        TheoremKind::A1,
        TheoremKind::Aq,
        TheoremKind::CfCzo,
        TheoremKind::CfRough,
        TheoremKind::CfHormander,
        TheoremKind::EndpointRough,
        TheoremKind::EndpointHormander,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            TheoremKind::RoughAp => "rough-ap",
            TheoremKind::HormAp => "horm-ap",
            TheoremKind::A1 => "a1",
            TheoremKind::Aq => "aq",
            TheoremKind::CfCzo => "cf-czo",
            TheoremKind::CfRough => "cf-rough",
            TheoremKind::CfHormander => "cf-hormander",
            TheoremKind::EndpointRough => "endpoint-rough",
            TheoremKind::EndpointHormander => "endpoint-hormander",
        }
    }

    pub fn exponent_kind(&self) -> ExponentKind {
        match self {
            TheoremKind::RoughAp => ExponentKind::RoughAp,
            TheoremKind::HormAp => ExponentKind::HormAp,
            TheoremKind::A1 | TheoremKind::EndpointRough | TheoremKind::EndpointHormander => ExponentKind::A1,
            TheoremKind::Aq => ExponentKind::Aq,
            TheoremKind::CfCzo | TheoremKind::CfRough | TheoremKind::CfHormander => ExponentKind::Cf,
        }
    }

    /// Kernel used when a configuration does not name one.
    pub fn default_kernel(&self, d: usize) -> KernelSpec {
        let hormander = matches!(self, TheoremKind::HormAp | TheoremKind::CfHormander | TheoremKind::EndpointHormander);
        match (d, hormander) {
            (1, true) => KernelSpec::HormanderExample,
            (1, false) => KernelSpec::Hilbert,
            _ => KernelSpec::rough_odd(16),
        }
    }

    fn needs_r(&self) -> bool {
        matches!(self, TheoremKind::HormAp | TheoremKind::CfHormander | TheoremKind::EndpointHormander)
    }
}

impl FromStr for TheoremKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<TheoremKind> {
        TheoremKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| LabError::Config(format!("unknown theorem '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentKind {
    RoughAp,
    HormAp,
    A1,
    Aq,
    Cf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremParams {
    pub p: f64,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directions for `A_inf^{sc}`; defaults to `32 n`.
    #[serde(default)]
    pub n_dirs: Option<usize>,
    #[serde(default = "default_multiplier")]
    pub pass_multiplier: f64,
}

fn default_trials() -> usize {
    12
}

fn default_seed() -> u64 {
    1
}

fn default_multiplier() -> f64 {
    10.0
}

impl Default for TheoremParams {
    fn default() -> Self {
        TheoremParams {
            p: 2.0,
            q: None,
            r: None,
            trials: default_trials(),
            seed: default_seed(),
            n_dirs: None,
            pass_multiplier: default_multiplier(),
        }
    }
}

impl TheoremParams {
    fn dirs(&self, n: usize) -> usize {
        self.n_dirs.unwrap_or(32 * n).max(2 * n)
    }

    fn r_value(&self) -> Result<f64> {
        match self.r {
            Some(r) if r > 1.0 && r.is_finite() => Ok(r),
            Some(_) => domain("r must exceed 1"),
            None => Err(LabError::Config("this theorem needs r".into())),
        }
    }

    /// Preconditions that do not depend on the weight.
    pub fn check(&self, kind: TheoremKind) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return domain("p must exceed 1");
        }
        if self.trials == 0 {
            return domain("need at least one trial");
        }
        if !(self.pass_multiplier > 0.0) {
            return domain("pass multiplier must be positive");
        }
        if kind.needs_r() {
            let r = self.r_value()?;
            if kind != TheoremKind::EndpointHormander && !(self.p > r) {
                return domain(format!("{} needs p > r", kind.id()));
            }
        }
        if kind == TheoremKind::Aq {
            let Some(q) = self.q else {
                return Err(LabError::Config("aq needs q".into()));
            };
            if !(q > 1.0 && q < self.p) {
                return domain("aq needs 1 < q < p");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideCondition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl SideCondition {
    fn equal(name: &str, lhs: f64, rhs: f64) -> SideCondition {
        Self::close(name, lhs, rhs, SIDE_TOL)
    }

    fn close(name: &str, lhs: f64, rhs: f64, tol: f64) -> SideCondition {
        let holds = (lhs - rhs).abs() <= tol * rhs.abs().max(1.0);
        SideCondition { name: name.into(), lhs, rhs, holds }
    }

    fn at_most(name: &str, lhs: f64, rhs: f64) -> SideCondition {
        SideCondition { name: name.into(), lhs, rhs, holds: lhs <= rhs * (1.0 + SIDE_TOL) }
    }

    fn less(name: &str, lhs: f64, rhs: f64) -> SideCondition {
        SideCondition { name: name.into(), lhs, rhs, holds: lhs < rhs }
    }
}

/// Exponent choices of the proofs together with their algebraic checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub kind: ExponentKind,
    pub values: BTreeMap<String, f64>,
    pub side_conditions: Vec<SideCondition>,
    /// Reported but not gating.
    pub diagnostics: Vec<SideCondition>,
}

impl Exponents {
    pub fn hold(&self) -> bool {
        self.side_conditions.iter().all(|c| c.holds)
    }
}

/// The proofs' exponents from already computed constants. `a` is the
/// `A_inf^{sc}` constant the exponent is built on, `b` the dual one
/// (`rough-ap`, `horm-ap`).
pub fn exponents_from_constants(
    d: usize,
    p: f64,
    kind: ExponentKind,
    a: f64,
    b: f64,
    q: Option<f64>,
    r: Option<f64>,
) -> Result<Exponents> {
    if !(p > 1.0) {
        return domain("p must exceed 1");
    }
    let t = tau(d);
    let pp = conjugate(p);
    let mut values = BTreeMap::new();
    let mut side = Vec::new();
    let mut diag = Vec::new();
    values.insert("tau".to_string(), t);
    match kind {
        ExponentKind::RoughAp | ExponentKind::Cf => {
            let half = (pp + 1.0) / 2.0;
            let gamma = 1.0 + 1.0 / (half * t * a);
            let s = half * (1.0 + t * a) / (1.0 + half * t * a);
            let s_prime = conjugate(s);
            values.insert("gamma".into(), gamma);
            values.insert("s".into(), s);
            values.insert("s_prime".into(), s_prime);
            side.push(SideCondition::equal("s*gamma = 1 + 1/(tau [W]_Ainf,p)", s * gamma, 1.0 + 1.0 / (t * a)));
            side.push(SideCondition::less("p' > s (p gamma)'", s * conjugate(p * gamma), pp));
            // s - 1 is about 1/tau, so s' carries ~tau ulps of cancellation
            diag.push(SideCondition::close(
                "s' = (2p-1)(1 + tau [W]_Ainf,p)",
                s_prime,
                (2.0 * p - 1.0) * (1.0 + t * a),
                1e-9,
            ));
            diag.push(SideCondition::at_most("s' <= 4 p tau [W]_Ainf,p", s_prime, 4.0 * p * t * a));
            if kind == ExponentKind::RoughAp {
                let r = 1.0 + 1.0 / (t * b);
                values.insert("r".into(), r);
                side.push(SideCondition::at_most("s' <= 4 p [W]_Ainf,p", s_prime, 4.0 * p * a));
                side.push(SideCondition::equal("r = 1 + 1/(tau [W^-p'/p]_Ainf,p')", r, rh_exponent(d, b)));
            } else {
                let r = 1.0 + 1.0 / (t * a);
                values.insert("r".into(), r);
                side.push(SideCondition::equal("r = 1 + 1/(tau [W]_Ainf,p)", r, rh_exponent(d, a)));
            }
        }
        ExponentKind::HormAp => {
            let Some(r) = r else {
                return Err(LabError::Config("horm-ap needs r".into()));
            };
            if !(r > 1.0 && p > r) {
                return domain("horm-ap needs 1 < r < p");
            }
            let pr = p / r;
            let alpha = 1.0 + 1.0 / (t * b);
            let beta = 1.0 + 1.0 / (t * a);
            values.insert("r".into(), r);
            values.insert("alpha".into(), alpha);
            values.insert("beta".into(), beta);
            side.push(SideCondition::equal(
                "alpha = 1 + 1/(tau [W^-(r/p)(p/r)']_Ainf,(p/r)')",
                alpha,
                rh_exponent(d, b),
            ));
            side.push(SideCondition::equal("beta = 1 + 1/(tau [W]_Ainf,p/r)", beta, rh_exponent(d, a)));
            side.push(SideCondition::less("r (alpha (p/r)')' < p", r * conjugate(alpha * conjugate(pr)), p));
            side.push(SideCondition::less("(p beta)' < p'", conjugate(p * beta), pp));
        }
        ExponentKind::A1 => {
            let s = (p + 1.0) / 2.0;
            values.insert("s".into(), s);
            side.push(SideCondition::less("1 < s", 1.0, s));
            side.push(SideCondition::less("s < p", s, p));
        }
        ExponentKind::Aq => {
            let Some(q) = q else {
                return Err(LabError::Config("aq needs q".into()));
            };
            if !(q > 1.0 && q < p) {
                return domain("aq needs 1 < q < p");
            }
            let s = (p / q + 1.0) / 2.0;
            values.insert("q".into(), q);
            values.insert("s".into(), s);
            side.push(SideCondition::less("1 < s", 1.0, s));
            side.push(SideCondition::less("(q/p) s < 1", q / p * s, 1.0));
        }
    }
    Ok(Exponents { kind, values, side_conditions: side, diagnostics: diag })
}

/// The `A_inf^{sc}` constants that the exponents of `kind` are built on.
fn exponent_constants(
    w: &MatrixWeight,
    p: f64,
    kind: ExponentKind,
    r: Option<f64>,
    n_dirs: usize,
) -> Result<(f64, f64)> {
    Ok(match kind {
        ExponentKind::RoughAp => {
            (ainfty_sc(w, p, n_dirs)?.value, ainfty_sc_power(w, -1.0 / p, conjugate(p), n_dirs)?.value)
        }
        ExponentKind::HormAp => {
            let r = r.ok_or_else(|| LabError::Config("horm-ap needs r".into()))?;
            if !(r > 1.0 && p > r) {
                return domain("horm-ap needs 1 < r < p");
            }
            let pr = p / r;
            (ainfty_sc(w, pr, n_dirs)?.value, ainfty_sc_power(w, -1.0 / pr, conjugate(pr), n_dirs)?.value)
        }
        ExponentKind::Cf => {
            let a = match r {
                Some(r) => ainfty_sc(w, p / r, n_dirs)?.value,
                None => ainfty_sc(w, p, n_dirs)?.value,
            };
            (a, a)
        }
        ExponentKind::A1 | ExponentKind::Aq => (1.0, 1.0),
    })
}

pub fn certificate_exponents(
    w: &MatrixWeight,
    p: f64,
    kind: ExponentKind,
    q: Option<f64>,
    r: Option<f64>,
) -> Result<Exponents> {
    let (a, b) = exponent_constants(w, p, kind, r, 32 * w.n)?;
    exponents_from_constants(w.geom.d, p, kind, a, b, q, r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub theorem: TheoremKind,
    pub kernel: KernelSpec,
    pub weight: Option<WeightSpec>,
    pub weight_seed: u64,
    pub d: usize,
    pub depth: usize,
    pub n: usize,
    pub params: TheoremParams,
    pub exponents: Exponents,
    /// The `[W]` constants entering the bound.
    pub constants: BTreeMap<String, f64>,
    pub constant_expression: f64,
    pub empirical: f64,
    pub ratio: f64,
    pub calibration_ratio: f64,
    pub pass_bound: f64,
    pub status: Status,
    /// Where the exponent thresholds come from.
    pub thresholds: String,
}

impl CertificateReport {
    /// Ratio within the bound and every gating side condition satisfied.
    pub fn passed(&self) -> bool {
        self.status == Status::Pass && self.exponents.hold()
    }
}

/// The `[W]` constants of `kind` and the value of the theorem's bound.
pub fn bound_constants(
    w: &MatrixWeight,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<(BTreeMap<String, f64>, f64)> {
    params.check(kind)?;
    let p = params.p;
    let pp = conjugate(p);
    let dirs = params.dirs(w.n);
    let mut c = BTreeMap::new();
    let value = match kind {
        TheoremKind::RoughAp => {
            let ap = matrix_ap(w, p)?.value;
            let a = ainfty_sc(w, p, dirs)?.value;
            let b = ainfty_sc_power(w, -1.0 / p, pp, dirs)?.value;
            c.insert("ap".to_string(), ap);
            c.insert("ainf_p".to_string(), a);
            c.insert("ainf_dual".to_string(), b);
            // the two one-sided products of the proof
            c.insert("one_sided_direct".to_string(), ap.powf(1.0 / p) * a.powf(1.0 + 1.0 / pp) * b.powf(1.0 / p));
            c.insert("one_sided_dual".to_string(), ap.powf(1.0 / p) * a.powf(1.0 / pp) * b.powf(1.0 + 1.0 / p));
            ap.powf(1.0 / p) * b.powf(1.0 / p) * a.powf(1.0 / pp) * a.min(b)
        }
        TheoremKind::HormAp => {
            let pr = p / params.r_value()?;
            let ap = matrix_ap(w, pr)?.value;
            let a = ainfty_sc(w, pr, dirs)?.value;
            let b = ainfty_sc_power(w, -1.0 / pr, conjugate(pr), dirs)?.value;
            c.insert("ap_r".to_string(), ap);
            c.insert("ainf_p_r".to_string(), a);
            c.insert("ainf_dual_r".to_string(), b);
            ap.powf(1.0 / p) * b.powf(1.0 / p) * a.powf(1.0 / pp)
        }
        TheoremKind::A1 => {
            let a1 = matrix_a1(w)?;
            let a = ainfty_sc(w, 1.0, dirs)?.value;
            c.insert("a1".to_string(), a1);
            c.insert("ainf_1".to_string(), a);
            a1.powf(1.0 / p) * a.powf(1.0 / pp)
        }
        TheoremKind::Aq => {
            let q = params.q.expect("checked");
            let aq = matrix_ap(w, q)?.value;
            let a = ainfty_sc(w, q, dirs)?.value;
            c.insert("aq".to_string(), aq);
            c.insert("ainf_q".to_string(), a);
            aq.powf(1.0 / p) * a.powf(1.0 / pp)
        }
        TheoremKind::CfCzo | TheoremKind::CfRough => {
            let a = ainfty_sc(w, p, dirs)?.value;
            c.insert("ainf_p".to_string(), a);
            if kind == TheoremKind::CfCzo {
                a.powf(1.0 / p)
            } else {
                a.powf(1.0 + 1.0 / p)
            }
        }
        TheoremKind::CfHormander => {
            let a = ainfty_sc(w, p / params.r_value()?, dirs)?.value;
            c.insert("ainf_p_r".to_string(), a);
            a.powf(1.0 / p)
        }
        TheoremKind::EndpointRough | TheoremKind::EndpointHormander => {
            let a1 = matrix_a1(w)?;
            let a = ainfty_sc(w, 1.0, dirs)?.value;
            c.insert("a1".to_string(), a1);
            c.insert("ainf_1".to_string(), a);
            if kind == TheoremKind::EndpointRough {
                a1 * a * (a1 + std::f64::consts::E).ln().max(a)
            } else {
                a1.powf(1.0 / params.r_value()?) * a
            }
        }
    };
    Ok((c, value))
}

/// Vector trial inputs: component `i` is drawn with seed `seed + i`.
pub fn vector_trials(geom: &GridGeometry, n: usize, trials: usize, seed: u64) -> Vec<GridFunction> {
    let comps: Vec<Vec<Vec<f64>>> = (0..n).map(|i| trial_inputs(geom, trials, seed.wrapping_add(i as u64))).collect();
    (0..trials)
        .map(|k| GridFunction::from_components(*geom, &comps.iter().map(|c| c[k].clone()).collect::<Vec<_>>()))
        .collect()
}

/// `|W^a T(W^{-a} f)|` cellwise.
fn weighted_image(t: &KernelOperator, plus: &[Mat], minus: &[Mat], f: &GridFunction) -> Result<Vec<f64>> {
    let u = GridFunction::from_fn(f.geom, f.n, |c| minus[c].mul_vec(f.at(c)));
    let tu = t.apply(&u)?;
    Ok((0..f.geom.cells()).map(|c| norm2(&plus[c].mul_vec(tu.at(c)))).collect())
}

/// Cube -> matrix table, evaluated once for all trials.
fn cube_table(geom: &GridGeometry, mut m: impl FnMut(&DyadicCube) -> Result<Mat>) -> Result<BTreeMap<DyadicCube, Mat>> {
    let mut out = BTreeMap::new();
    for l in 0..=geom.depth {
        for q in geom.cubes_at(l) {
            out.insert(q, m(&q)?);
        }
    }
    Ok(out)
}

/// The maximal side of the Coifman–Fefferman bounds: `V_Q^{-1}` is the
/// reducing matrix `W_{p,Q}` (or `W_{p/r,Q}^{1/r}`), averaged with power `r`.
fn cf_matrices(w: &MatrixWeight, p: f64, r: Option<f64>) -> Result<BTreeMap<DyadicCube, Mat>> {
    match r {
        None => cube_table(&w.geom, |q| Ok(*reducing_matrix(w, p, q, Side::Direct)?.matrix.inverse()?.mat())),
        Some(r) => {
            let field = w.power_field(r / p);
            cube_table(&w.geom, |q| {
                let s = reducing_surrogate(&field, &w.geom, q, p / r)?;
                Ok(*frac_power(&SpdMatrix::new(s.matrix)?, -1.0 / r)?.mat())
            })
        }
    }
}

/// The measured side: the largest trial ratio for `kind`.
pub fn empirical_quantity(
    w: &MatrixWeight,
    t: &KernelOperator,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<f64> {
    params.check(kind)?;
    if t.geom != w.geom {
        return Err(LabError::InvalidInput("operator and weight live on different grids".into()));
    }
    let geom = w.geom;
    let h = geom.cell_measure();
    let p = params.p;
    let (alpha, exponent) = match kind {
        TheoremKind::EndpointRough => (1.0, 1.0),
        TheoremKind::EndpointHormander => {
            let r = params.r_value()?;
            (1.0 / r, r)
        }
        _ => (1.0 / p, p),
    };
    let plus = w.power_field(alpha);
    let minus = w.power_field(-alpha);
    let cf = match kind {
        TheoremKind::CfCzo | TheoremKind::CfRough => Some((cf_matrices(w, p, None)?, 1.0)),
        TheoremKind::CfHormander => {
            let r = params.r_value()?;
            Some((cf_matrices(w, p, Some(r))?, r))
        }
        _ => None,
    };
    let mut best = 0.0f64;
    for f in vector_trials(&geom, w.n, params.trials, params.seed) {
        let image = weighted_image(t, &plus, &minus, &f)?;
        let (top, bottom) = match kind {
            TheoremKind::EndpointRough | TheoremKind::EndpointHormander => {
                (weak_quasi_norm(&image, h, exponent), f.lp_norm(exponent))
            }
            _ => match &cf {
                Some((table, r_avg)) => {
                    let m = grand_maximal(&f, w, |q| Ok(table[q]), p, *r_avg, WeightSign::Minus)?;
                    (lp_norm(&image, h, p), lp_norm(&m.values, h, p))
                }
                None => (lp_norm(&image, h, p), f.lp_norm(p)),
            },
        };
        if bottom > 0.0 {
            best = best.max(top / bottom);
        }
    }
    Ok(best)
}

/// Ratio of the identity weight with the same operator, dimension and trials.
pub fn calibration_ratio(t: &KernelOperator, n: usize, kind: TheoremKind, params: &TheoremParams) -> Result<f64> {
    let id = MatrixWeight::identity(t.geom, n);
    let (_, c) = bound_constants(&id, kind, params)?;
    Ok(empirical_quantity(&id, t, kind, params)? / c)
}

/// Full certificate against a precomputed calibration ratio.
pub fn verify_calibrated(
    w: &MatrixWeight,
    kernel: &KernelSpec,
    kind: TheoremKind,
    params: &TheoremParams,
    calibration: f64,
) -> Result<CertificateReport> {
    params.check(kind)?;
    let t = KernelOperator::new(w.geom, kernel.clone())?;
    let (constants, value) = bound_constants(w, kind, params)?;
    let ek = kind.exponent_kind();
    let r_for_exponents = match kind {
        TheoremKind::HormAp | TheoremKind::CfHormander => params.r,
        _ => None,
    };
    let (a, b) = exponent_constants(w, params.p, ek, r_for_exponents, params.dirs(w.n))?;
    let exponents = exponents_from_constants(w.geom.d, params.p, ek, a, b, params.q, r_for_exponents)?;
    let empirical = empirical_quantity(w, &t, kind, params)?;
    let ratio = empirical / value;
    let pass_bound = params.pass_multiplier * calibration;
    let saturated = constants.values().chain([&value]).any(|c| !c.is_finite() || *c > SATURATION);
    let status = if saturated || !ratio.is_finite() {
        Status::Inconclusive
    } else if ratio <= pass_bound {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(CertificateReport {
        theorem: kind,
        kernel: kernel.clone(),
        weight: w.meta.spec.clone(),
        weight_seed: w.meta.seed,
        d: w.geom.d,
        depth: w.geom.depth,
        n: w.n,
        params: params.clone(),
        exponents,
        constants,
        constant_expression: value,
        empirical,
        ratio,
        calibration_ratio: calibration,
        pass_bound,
        status,
        thresholds: format!(
            "tau = 2^(d+11) = {}; pass bound = {} x identity calibration",
            tau(w.geom.d),
            params.pass_multiplier
        ),
    })
}

fn verify(
    w: &MatrixWeight,
    kernel: &KernelSpec,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<CertificateReport> {
    params.check(kind)?;
    let t = KernelOperator::new(w.geom, kernel.clone())?;
    let cal = calibration_ratio(&t, w.n, kind, params)?;
    verify_calibrated(w, kernel, kind, params, cal)
}

/// `rough-ap`, `horm-ap`, `a1` or `aq`.
pub fn verify_strong(
    w: &MatrixWeight,
    kernel: &KernelSpec,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<CertificateReport> {
    if !matches!(kind, TheoremKind::RoughAp | TheoremKind::HormAp | TheoremKind::A1 | TheoremKind::Aq) {
        return Err(LabError::InvalidInput(format!("{} is not a strong-type theorem", kind.id())));
    }
    verify(w, kernel, kind, params)
}

/// `cf-czo`, `cf-rough` or `cf-hormander`.
pub fn verify_cf(
    w: &MatrixWeight,
    kernel: &KernelSpec,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<CertificateReport> {
    if !matches!(kind, TheoremKind::CfCzo | TheoremKind::CfRough | TheoremKind::CfHormander) {
        return Err(LabError::InvalidInput(format!("{} is not a Coifman-Fefferman theorem", kind.id())));
    }
    verify(w, kernel, kind, params)
}

/// `endpoint-rough` or `endpoint-hormander`.
pub fn verify_endpoint(
    w: &MatrixWeight,
    kernel: &KernelSpec,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<CertificateReport> {
    if !matches!(kind, TheoremKind::EndpointRough | TheoremKind::EndpointHormander) {
        return Err(LabError::InvalidInput(format!("{} is not an endpoint theorem", kind.id())));
    }
    verify(w, kernel, kind, params)
}

pub fn verify_theorem(
    w: &MatrixWeight,
    kernel: &KernelSpec,
    kind: TheoremKind,
    params: &TheoremParams,
) -> Result<CertificateReport> {
    verify(w, kernel, kind, params)
}

/// Geometric grid of `count` levels between the smallest and largest
/// non-zero magnitudes.
pub fn lambda_grid(values: &[f64], count: usize) -> Vec<f64> {
    let pos: Vec<f64> = values.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    if pos.is_empty() || count == 0 {
        return Vec::new();
    }
    let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pos.iter().copied().fold(0.0, f64::max);
    if count == 1 || lo == hi {
        return vec![lo];
    }
    (0..count).map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64)).collect()
}

/// `lambda |{|v| > lambda}|^{1/q}` at each level.
pub fn level_set_curve(values: &[f64], cell_measure: f64, q: f64, lambdas: &[f64]) -> Vec<f64> {
    lambdas
        .iter()
        .map(|&l| {
            let count = values.iter().filter(|v| v.abs() > l).count();
            l * (count as f64 * cell_measure).powf(1.0 / q)
        })
        .collect()
}

/// Level-set curve of the endpoint quantity for one input.
pub fn endpoint_sweep(
    w: &MatrixWeight,
    t: &KernelOperator,
    f: &GridFunction,
    r: Option<f64>,
    count: usize,
) -> Result<Vec<(f64, f64)>> {
    let alpha = r.map_or(1.0, |r| 1.0 / r);
    let q = r.unwrap_or(1.0);
    let image = weighted_image(t, &w.power_field(alpha), &w.power_field(-alpha), f)?;
    let lambdas = lambda_grid(&image, count);
    let norm = f.lp_norm(q);
    let curve = level_set_curve(&image, w.geom.cell_measure(), q, &lambdas);
    Ok(lambdas.into_iter().zip(curve).map(|(l, v)| (l, if norm > 0.0 { v / norm } else { 0.0 })).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CpqReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub worst_cube: DyadicCube,
    pub bound: f64,
    /// `exact-1d` or `radial-surrogate`.
    pub denominator: String,
}

/// `(1/|Q|) ∫ M(chi_Q)^q` on the line: a cell sum over `[-R, 1+R)` with the
/// closed-form tail beyond, using `M chi_Q(t) = min(1, l/(|t - c| + l/2))`.
pub fn cpq_denominator_1d(geom: &GridGeometry, cube: &DyadicCube, q: f64, radius: f64, with_tail: bool) -> f64 {
    let h = geom.cell_size();
    let l = cube.side_cells(geom) as f64 * h;
    let c = (cube.coords[0] as f64 + 0.5) * l;
    let m = |t: f64| (l / ((t - c).abs() + l / 2.0)).min(1.0);
    let cells = ((1.0 + 2.0 * radius) / h).round() as usize;
    let body: f64 = (0..cells).map(|k| m(-radius + (k as f64 + 0.5) * h).powf(q)).sum::<f64>() * h;
    let tail = if with_tail {
        let right = 1.0 + radius - c + l / 2.0;
        let left = c + radius + l / 2.0;
        l.powf(q) * (right.powf(1.0 - q) + left.powf(1.0 - q)) / (q - 1.0)
    } else {
        0.0
    };
    (body + tail) / l
}

/// The planar surrogate `M chi_Q <= min(1, 2^d (l/|x - c|)^d)`, integrated in
/// closed form: `pi 2^d q/(q-1)` after dividing by `|Q|`.
pub fn cpq_denominator_radial(d: usize, q: f64) -> f64 {
    std::f64::consts::PI * (1u32 << d) as f64 * q / (q - 1.0)
}

pub fn cpq_check(w: &MatrixWeight, p: f64, q: f64, gamma: f64, bound: f64) -> Result<CpqReport> {
    if !(p > 1.0) {
        return domain("p must exceed 1");
    }
    if !(q > 1.0) {
        return domain("q <= 1: the tail of M(chi_Q)^q diverges");
    }
    if !(q > p) {
        return domain("C_{p,q} needs q > p");
    }
    if !(gamma > 1.0) {
        return domain("gamma must exceed 1");
    }
    let geom = &w.geom;
    let field = w.power_field(1.0 / p);
    let mut worst = (0.0f64, DyadicCube::root());
    for l in 0..=geom.depth {
        for cube in geom.cubes_at(l) {
            let red = reducing_matrix(w, p, &cube, Side::Direct)?.matrix.inverse()?;
            let cells = cube.cell_box(geom).cells(geom);
            let avg = cells.iter().map(|&c| red.mat().mul(&field[c]).op_norm_unchecked().powf(gamma * p)).sum::<f64>()
                / cells.len() as f64;
            let num = avg.powf(1.0 / gamma);
            let den = if geom.d == 1 {
                cpq_denominator_1d(geom, &cube, q, CPQ_RADIUS, true)
            } else {
                cpq_denominator_radial(geom.d, q)
            };
            let ratio = num / den;
            if ratio > worst.0 {
                worst = (ratio, cube);
            }
        }
    }
    Ok(CpqReport {
        holds: worst.0 <= bound,
        worst_ratio: worst.0,
        worst_cube: worst.1,
        bound,
        denominator: if geom.d == 1 { "exact-1d".into() } else { "radial-surrogate".into() },
    })
}

/// Rational grid for the parameter lemmas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaGrid {
    /// Values `1 + k/denominator` for `k = 1..=steps`.
    pub steps: i64,
    pub denominator: i64,
    pub taus: Vec<i64>,
    /// Used for both `kappa` and `delta`.
    pub scales: Vec<i64>,
}

impl Default for LemmaGrid {
    fn default() -> Self {
        LemmaGrid { steps: 64, denominator: 8, taus: vec![3, 4, 8], scales: vec![1, 2, 4, 16] }
    }
}

impl LemmaGrid {
    fn values(&self) -> Vec<BigRational> {
        (1..=self.steps).map(|k| one() + rat(k, self.denominator)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub id: String,
    pub statement: String,
    pub checked: usize,
    pub violations: usize,
    pub skipped: usize,
    pub first_violation: Option<String>,
    /// Largest `lhs/rhs` seen for inequalities, 0 for identities.
    pub worst_ratio: f64,
}

impl ClaimReport {
    fn new(id: &str, statement: &str) -> ClaimReport {
        ClaimReport {
            id: id.into(),
            statement: statement.into(),
            checked: 0,
            violations: 0,
            skipped: 0,
            first_violation: None,
            worst_ratio: 0.0,
        }
    }

    fn record(&mut self, ok: bool, ratio: f64, point: impl FnOnce() -> String) {
        self.checked += 1;
        self.worst_ratio = self.worst_ratio.max(ratio);
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(point());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub grid: LemmaGrid,
    pub claims: Vec<ClaimReport>,
    pub points: usize,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.violations == 0)
    }
}

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn one() -> BigRational {
    BigRational::one()
}

/// `x' = x/(x - 1)`.
pub fn conj(x: &BigRational) -> BigRational {
    x / (x - one())
}

fn ratio_f64(a: &BigRational, b: &BigRational) -> f64 {
    (a / b).to_f64().unwrap_or(f64::INFINITY)
}

/// Exact verification of the two parameter lemmas; claim (iii)'s power
/// inequality is irrational and checked in floating point.
pub fn param_lemma_checks(grid: &LemmaGrid) -> LemmaReport {
    let vals = grid.values();
    let mut c1a = ClaimReport::new("i-closed-form", "(rho'/(rho beta)')' = (rho beta - 1)/(beta - 1)");
    let mut c1b = ClaimReport::new("i-bound", "(rho'/(rho beta)')' <= rho beta'");
    let mut c2 = ClaimReport::new("ii-identity", "1/(rho beta)' = 1/beta' + 1/(rho' beta)");
    let mut c3a = ClaimReport::new("iii-conjugate", "beta = 1 + 1/(tau kappa) => beta' = tau kappa + 1");
    let mut c3b =
        ClaimReport::new("iii-bound", "[(rho'/(rho beta)')']^(1/(gamma beta)') <= 2 e rho tau kappa^(1/gamma')");
    let mut c4a = ClaimReport::new("iv-premise", "(p beta - 1) - s (p - 1) beta = 1/((p' + 1) tau delta)");
    let mut c4b = ClaimReport::new("iv-chain", "(p'/(s (p beta)'))' = (p beta - 1)(p' + 1) tau delta");
    let mut c4c = ClaimReport::new("iv-bound", "(p'/(s (p beta)'))' <= 2 p tau delta");

    for rho in &vals {
        for beta in &vals {
            let lhs = conj(&(conj(rho) / conj(&(rho * beta))));
            let closed = (rho * beta - one()) / (beta - one());
            c1a.record(lhs == closed, 0.0, || format!("rho={rho}, beta={beta}"));
            let rhs = rho * conj(beta);
            c1b.record(lhs <= rhs, ratio_f64(&lhs, &rhs), || format!("rho={rho}, beta={beta}"));
            let a = one() / conj(&(rho * beta));
            let b = one() / conj(beta) + one() / (conj(rho) * beta);
            c2.record(a == b, 0.0, || format!("rho={rho}, beta={beta}"));
        }
    }

    for &t in &grid.taus {
        for &k in &grid.scales {
            let tk = BigRational::from_integer(BigInt::from(t * k));
            let beta = one() + one() / &tk;
            c3a.record(conj(&beta) == &tk + one(), 0.0, || format!("tau={t}, kappa={k}"));
            let bf = beta.to_f64().unwrap();
            for rho in &vals {
                let base = conj(&(conj(rho) / conj(&(rho * &beta)))).to_f64().unwrap();
                let rf = rho.to_f64().unwrap();
                for gamma in &vals {
                    let gf = gamma.to_f64().unwrap();
                    let lhs = base.powf(1.0 / conjugate(gf * bf));
                    let rhs = 2.0 * std::f64::consts::E * rf * t as f64 * (k as f64).powf(1.0 / conjugate(gf));
                    c3b.record(lhs <= rhs * (1.0 + SIDE_TOL), lhs / rhs, || {
                        format!("rho={rho}, gamma={gamma}, tau={t}, kappa={k}")
                    });
                }
            }
        }
    }

    for p in &vals {
        let pp = conj(p);
        for &t in &grid.taus {
            for &d in &grid.scales {
                let td = BigRational::from_integer(BigInt::from(t * d));
                let beta = one() + one() / ((&pp + one()) / rat(2, 1) * &td);
                let s = (one() + one() / &td) / &beta;
                let pb = p * &beta;
                // hypotheses: s, beta > 1 and p' > s (p beta)'
                if !(s > one() && beta > one() && pp > &s * conj(&pb)) {
                    c4a.skipped += 1;
                    c4b.skipped += 1;
                    c4c.skipped += 1;
                    continue;
                }
                let point = || format!("p={p}, tau={t}, delta={d}");
                let premise = (&pb - one()) - &s * (p - one()) * &beta;
                c4a.record(premise == one() / ((&pp + one()) * &td), 0.0, point);
                let value = conj(&(&pp / (&s * conj(&pb))));
                c4b.record(value == (&pb - one()) * (&pp + one()) * &td, 0.0, point);
                let bound = rat(2, 1) * p * &td;
                c4c.record(value <= bound, ratio_f64(&value, &bound), point);
            }
        }
    }

    let claims = vec![c1a, c1b, c2, c3a, c3b, c4a, c4b, c4c];
    let points = claims.iter().map(|c| c.checked).sum();
    LemmaReport { grid: grid.clone(), claims, points }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyApReport {
    /// `∑ upper bracket of ⟨⟨W^{-1/p}h⟩⟩_r ⟨⟨W^{1/p}g⟩⟩_s |Q|`.
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs / lhs`; infinite when the left side vanishes.
    pub slack: f64,
    pub eta: f64,
    pub sup_uv: f64,
    pub maximal_h: f64,
    pub maximal_g: f64,
    pub holds: bool,
}

/// The sparse Hölder step for a certified family of dyadic cubes.
#[allow(clippy::too_many_arguments)]
pub fn keyap_check(
    w: &MatrixWeight,
    p: f64,
    r: f64,
    s: f64,
    family: &SparseFamily,
    h: &GridFunction,
    g: &GridFunction,
    u: &dyn Fn(&DyadicCube) -> Result<Mat>,
    v: &dyn Fn(&DyadicCube) -> Result<Mat>,
) -> Result<KeyApReport> {
    if !(p > 1.0 && r >= 1.0 && s >= 1.0) {
        return domain("need p > 1 and r, s >= 1");
    }
    if family.cubes.iter().any(|m| m.tripled) {
        return Err(LabError::InvalidInput("keyap_check needs dyadic (untripled) cubes".into()));
    }
    if family.disjoint_assignment.is_none() || !(family.eta_claimed > 0.0) {
        return Err(LabError::InvalidInput("family is not certified sparse".into()));
    }
    let geom = w.geom;
    let hw = GridFunction::from_fn(geom, w.n, |c| w.power_field(-1.0 / p)[c].mul_vec(h.at(c)));
    let gw = GridFunction::from_fn(geom, w.n, |c| w.power_field(1.0 / p)[c].mul_vec(g.at(c)));
    let mut lhs = 0.0;
    for m in &family.cubes {
        let q = m.cube();
        let a = ConvexBodyAverage::new(&hw, &q, r)?;
        let b = ConvexBodyAverage::new(&gw, &q, s)?;
        lhs += body_product_bracket(&a, &b)?.upper * q.measure(geom.d);
    }
    let ut = cube_table(&geom, |q| u(q))?;
    let vt = cube_table(&geom, |q| v(q))?;
    let mut sup_uv = 0.0f64;
    for (q, um) in &ut {
        sup_uv = sup_uv.max(um.mul(&vt[q]).op_norm()?);
    }
    let mh = grand_maximal(h, w, |q| Ok(vt[q]), p, r, WeightSign::Minus)?;
    let mg = grand_maximal(g, w, |q| Ok(ut[q]), p, s, WeightSign::Plus)?;
    let hm = geom.cell_measure();
    let maximal_h = lp_norm(&mh.values, hm, p);
    let maximal_g = lp_norm(&mg.values, hm, conjugate(p));
    let rhs = sup_uv * maximal_h * maximal_g / family.eta_claimed;
    Ok(KeyApReport {
        lhs,
        rhs,
        slack: if lhs > 0.0 { rhs / lhs } else { f64::INFINITY },
        eta: family.eta_claimed,
        sup_uv,
        maximal_h,
        maximal_g,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applicability {
    Applicable,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApFromRhReport {
    pub status: Applicability,
    /// Measured reverse Hölder factors of the two hypotheses.
    pub rh_dual: f64,
    pub rh_direct: f64,
    /// `|V_Q U_Q|_op / |W_{q,Q} W'_{q,Q}|_op`.
    pub ratio: f64,
    /// Largest `|V U e| / |W W' e|` over the probes.
    pub probe_ratio: f64,
    /// `n rh_dual rh_direct`, the bound from composing both hypotheses.
    pub bound: f64,
    pub holds: bool,
}

fn rh_factor(bumped: &AverageNorm, base: &AverageNorm, dirs: &[Vec<f64>]) -> f64 {
    dirs.iter().map(|e| bumped.eval(e) / base.eval(e)).fold(1.0, f64::max)
}

/// Reduction of the bumped reducing matrices `V_Q` (power `q'r` of
/// `W^{-1/q}`) and `U_Q` (power `qs` of `W^{1/q}`) to `W_{q,Q} W'_{q,Q}`.
pub fn apfromrh_check(w: &MatrixWeight, q: f64, r: f64, s: f64, cube: &DyadicCube) -> Result<ApFromRhReport> {
    if !(q > 1.0 && r > 1.0 && s > 1.0) {
        return domain("q, r and s must exceed 1");
    }
    let geom = &w.geom;
    let n = w.n;
    let qq = conjugate(q);
    let cells = cube.cell_box(geom).cells(geom);
    let minus = w.power_field(-1.0 / q);
    let plus = w.power_field(1.0 / q);
    let pick = |f: &[Mat]| -> Vec<Mat> { cells.iter().map(|&c| f[c]).collect() };
    let (mm, mp) = (pick(&minus), pick(&plus));
    let v_norm = AverageNorm::from_matrices(&mm, qq * r)?;
    let dual_norm = AverageNorm::from_matrices(&mm, qq)?;
    let u_norm = AverageNorm::from_matrices(&mp, q * s)?;
    let direct_norm = AverageNorm::from_matrices(&mp, q)?;
    let v = reducing_surrogate(&minus, geom, cube, qq * r)?.matrix;
    let u = reducing_surrogate(&plus, geom, cube, q * s)?.matrix;
    let wd = reducing_surrogate(&plus, geom, cube, q)?.matrix;
    let wdual = reducing_surrogate(&minus, geom, cube, qq)?.matrix;
    let probes = probe_directions(n, 64 * n);
    // the chain evaluates the hypotheses at U e and W' e
    let mut dual_dirs = probes.clone();
    dual_dirs.extend(probes.iter().map(|e| u.mul_vec(e)));
    let mut direct_dirs = probes.clone();
    direct_dirs.extend(probes.iter().map(|e| wdual.mul_vec(e)));
    let rh_dual = rh_factor(&v_norm, &dual_norm, &dual_dirs);
    let rh_direct = rh_factor(&u_norm, &direct_norm, &direct_dirs);
    let vu = v.mul(&u);
    let ww = wd.mul(&wdual);
    let ratio = vu.op_norm()? / ww.op_norm()?;
    let probe_ratio = probes.iter().map(|e| norm2(&vu.mul_vec(e)) / norm2(&ww.mul_vec(e))).fold(0.0, f64::max);
    let bound = n as f64 * rh_dual * rh_direct;
    let limit = 2.0 * n as f64;
    let status =
        if rh_dual <= limit && rh_direct <= limit { Applicability::Applicable } else { Applicability::NotApplicable };
    Ok(ApFromRhReport {
        status,
        rh_dual,
        rh_direct,
        ratio,
        probe_ratio,
        bound,
        holds: status == Applicability::NotApplicable || ratio <= bound * (1.0 + 1e-6),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixLemmaReport {
    pub pairs: usize,
    pub max_condition: f64,
    pub alphas: Vec<f64>,
    pub bownik_checks: usize,
    pub bownik_violations: usize,
    /// Largest `|A^a B^a| / (n |AB|^a)`.
    pub bownik_worst: f64,
    pub holder_checks: usize,
    pub holder_violations: usize,
    /// Largest `|A^a e| / |A e|^a`.
    pub holder_worst: f64,
}

impl MatrixLemmaReport {
    pub fn passed(&self) -> bool {
        self.bownik_violations == 0 && self.holder_violations == 0
    }
}

/// Random SPD pairs of size `1..=4` with condition number up to `max_cond`,
/// every `alpha` in `{0.1, ..., 0.9}`.
pub fn matrix_lemma_sweep(pairs: usize, max_cond: f64, seed: u64) -> Result<MatrixLemmaReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut rep = MatrixLemmaReport {
        pairs,
        max_condition: max_cond,
        alphas: alphas.clone(),
        bownik_checks: 0,
        bownik_violations: 0,
        bownik_worst: 0.0,
        holder_checks: 0,
        holder_violations: 0,
        holder_worst: 0.0,
    };
    for _ in 0..pairs {
        let n = rng.gen_range(1..=4);
        let a = crate::spd::random_spd(&mut rng, n, max_cond);
        let b = crate::spd::random_spd(&mut rng, n, max_cond);
        let v: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let e: Vec<f64> = v.iter().map(|x| x / norm2(&v)).collect();
        for &al in &alphas {
            let (l, r) = crate::spd::bownik_bound(&a, &b, al)?;
            rep.bownik_checks += 1;
            rep.bownik_worst = rep.bownik_worst.max(l / r);
            if l > r * (1.0 + 1e-10) {
                rep.bownik_violations += 1;
            }
            for m in [&a, &b] {
                let (l, r) = crate::spd::holder_mccarthy_check(m, al, &e)?;
                rep.holder_checks += 1;
                rep.holder_worst = rep.holder_worst.max(l / r);
                if l > r * (1.0 + 1e-10) {
                    rep.holder_violations += 1;
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhEntry {
    pub weight: Option<WeightSpec>,
    pub seed: u64,
    pub d: usize,
    pub depth: usize,
    pub n: usize,
    pub p: f64,
    /// Largest scalar ratio over the directional weights `|W^{1/p} e|^p`,
    /// each at its own exponent.
    pub scalar_ratio: f64,
    pub matrix_ainfty: f64,
    pub matrix_exponent: f64,
    /// Largest `matrix_rh_check` over the test matrices.
    pub matrix_ratio: f64,
    pub holds: bool,
}

/// Reverse Hölder at the exponent `1 + 1/(2^{d+11} [w]_{A_inf})`: scalar
/// ratios must stay below 2, matrix ratios below `2n`.
pub fn rh_entry(w: &MatrixWeight, p: f64, n_dirs: usize) -> Result<RhEntry> {
    use crate::grid::ScalarGridFunction;
    use crate::scalar::{fujii_ainfty, reverse_holder_ratio};
    let field = w.power_field(1.0 / p);
    let mut scalar_ratio = 0.0f64;
    for e in probe_directions(w.n, n_dirs) {
        let vals = ScalarGridFunction::from_fn(w.geom, |c| norm2(&field[c].mul_vec(&e)).powf(p));
        let a = fujii_ainfty(&vals)?;
        scalar_ratio = scalar_ratio.max(reverse_holder_ratio(&vals, rh_exponent(w.geom.d, a))?);
    }
    let ainf = ainfty_sc(w, p, n_dirs)?.value;
    let r = crate::weights::matrix_rh_exponent(w.geom.d, ainf);
    let mut tests = vec![SpdMatrix::identity(w.n)];
    tests.push(reducing_matrix(w, p, &DyadicCube::root(), Side::Direct)?.matrix.inverse()?);
    let mut matrix_ratio = 0.0f64;
    for a in &tests {
        matrix_ratio = matrix_ratio.max(crate::weights::matrix_rh_check(w, p, a, r)?);
    }
    Ok(RhEntry {
        weight: w.meta.spec.clone(),
        seed: w.meta.seed,
        d: w.geom.d,
        depth: w.geom.depth,
        n: w.n,
        p,
        scalar_ratio,
        matrix_ainfty: ainf,
        matrix_exponent: r,
        matrix_ratio,
        holds: scalar_ratio <= 2.0 && matrix_ratio <= 2.0 * w.n as f64,
    })
}
