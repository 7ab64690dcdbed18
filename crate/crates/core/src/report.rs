//! Experiment configuration, orchestration and the on-disk artifacts:
//! `report.json`, `summary.csv`, `trace.jsonl` and `plotdata/*.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{GridFunction, GridGeometry, ScalarGridFunction};
use crate::io::{load_gfn, load_mwt};
use crate::operators::{bilinear_norm_estimate, weak_norm_estimate, KernelOperator, KernelSpec};
use crate::scalar::{fujii_ainfty, scalar_a1, scalar_ap};
use crate::sparse::{
    build_global_sparse, corpus_instance, domination_ratio, sparse_certify, tripled_eta, Domination, SparseCertificate,
    SparseParams, ThresholdMode, TraceRecord,
};
use crate::verify::{
    calibration_ratio, endpoint_sweep, matrix_lemma_sweep, param_lemma_checks, rh_entry, tau, vector_trials,
    verify_calibrated, CertificateReport, LemmaGrid, LemmaReport, MatrixLemmaReport, RhEntry, Status, TheoremKind,
    TheoremParams,
};
use crate::weights::{ainfty_sc, generate_weight, matrix_a1, matrix_ap, weight_corpus, MatrixWeight, WeightSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub const SCHEMA: &str = "mwlab-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub depth: usize,
}

/// Either a generated weight or a `.mwt` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<WeightSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseConfig {
    /// Ids of seeded corpus instances (each carries its own grid).
    #[serde(default)]
    pub corpus: Vec<usize>,
    /// `.gfn` inputs, used with the configured operator and grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<PathBuf>,
    #[serde(default)]
    pub params: SparseParams,
    #[serde(default)]
    pub dominate: bool,
    /// Also measure the domination ratio one level finer.
    #[serde(default)]
    pub refine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    #[serde(default)]
    pub grid: LemmaGrid,
    #[serde(default = "default_pairs")]
    pub matrix_pairs: usize,
    #[serde(default = "default_cond")]
    pub max_condition: f64,
    /// Run the reverse Hölder suite on the reference weights.
    #[serde(default = "yes")]
    pub reverse_holder: bool,
}

fn default_pairs() -> usize {
    10_000
}

fn default_cond() -> f64 {
    1e6
}

fn yes() -> bool {
    true
}

fn default_p() -> f64 {
    2.0
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

fn default_lambda_points() -> usize {
    24
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            grid: LemmaGrid::default(),
            matrix_pairs: default_pairs(),
            max_condition: default_cond(),
            reverse_holder: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    /// Defaults to the weight's dimension, or 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightConfig>,
    /// Defaults per theorem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<KernelSpec>,
    #[serde(default)]
    pub theorems: Vec<TheoremKind>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_multiplier")]
    pub pass_multiplier: f64,
    #[serde(default = "yes")]
    pub constants: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse: Option<SparseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmaConfig>,
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    /// Output directory; `--out` wins. Never echoed into the report.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

fn config_err(e: impl std::fmt::Display) -> LabError {
    let text = e.to_string();
    LabError::Config(text.strip_prefix("config error: ").map(str::to_string).unwrap_or(text))
}

impl ExperimentConfig {
    /// A `W = I` configuration on the given grid.
    pub fn minimal(d: usize, depth: usize) -> ExperimentConfig {
        serde_json::from_value(serde_json::json!({ "geometry": { "d": d, "L": depth } })).expect("static config")
    }

    pub fn from_json(text: &str, base: &Path) -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(config_err)?;
        cfg.base = base.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ExperimentConfig::from_json(&text, &base)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.geometry.d, self.geometry.depth)
    }

    pub fn n(&self) -> usize {
        self.n.or_else(|| self.weight.as_ref().and_then(|w| w.spec.as_ref()).map(WeightSpec::n)).unwrap_or(1)
    }

    pub fn params(&self) -> TheoremParams {
        TheoremParams {
            p: self.p,
            q: self.q,
            r: self.r,
            trials: self.trials,
            seed: self.seed,
            n_dirs: None,
            pass_multiplier: self.pass_multiplier,
        }
    }

    pub fn kernel_for(&self, kind: TheoremKind) -> KernelSpec {
        self.operator.clone().unwrap_or_else(|| kind.default_kernel(self.geometry.d))
    }

    /// Everything that can be rejected before any computation.
    pub fn validate(&self) -> Result<()> {
        let geom = self.geometry().map_err(config_err)?;
        let n = self.n();
        if n == 0 || n > crate::spd::MAX_DIM {
            return Err(config_err(format!("n = {n} outside [1, {}]", crate::spd::MAX_DIM)));
        }
        if let Some(w) = &self.weight {
            match (&w.spec, &w.file) {
                (Some(spec), None) => {
                    if spec.n() != n {
                        return Err(config_err(format!("weight has n = {} but the config says {n}", spec.n())));
                    }
                }
                (None, Some(file)) => {
                    let path = self.resolve(file);
                    if !path.is_file() {
                        return Err(config_err(format!("weight file {} not found", path.display())));
                    }
                }
                _ => return Err(config_err("weight needs exactly one of `spec` and `file`")),
            }
        }
        let params = self.params();
        for &kind in &self.theorems {
            params.check(kind).map_err(|e| config_err(format!("{}: {e}", kind.id())))?;
            KernelOperator::new(geom, self.kernel_for(kind)).map_err(|e| config_err(format!("{}: {e}", kind.id())))?;
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(config_err("p must exceed 1"));
        }
        if self.trials == 0 || !(self.pass_multiplier > 0.0) {
            return Err(config_err("need trials >= 1 and a positive pass multiplier"));
        }
        if self.lambda_points < 2 {
            return Err(config_err("lambda_points must be at least 2"));
        }
        if let Some(s) = &self.sparse {
            s.params.validate().map_err(config_err)?;
            match (&s.f, &s.g) {
                (Some(f), Some(g)) => {
                    for p in [f, g] {
                        if !self.resolve(p).is_file() {
                            return Err(config_err(format!("input {} not found", self.resolve(p).display())));
                        }
                    }
                    let op = self.operator.clone().ok_or_else(|| config_err("sparse inputs need an operator"))?;
                    KernelOperator::new(geom, op).map_err(config_err)?;
                }
                (None, None) => {}
                _ => return Err(config_err("sparse needs both f and g, or neither")),
            }
        }
        if let Some(l) = &self.lemmas {
            if l.grid.steps < 1 || l.grid.denominator < 1 || l.grid.taus.iter().chain(&l.grid.scales).any(|&v| v < 1) {
                return Err(config_err("lemma grid entries must be positive"));
            }
            if !(l.max_condition >= 1.0) {
                return Err(config_err("max_condition must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn load_weight(&self) -> Result<MatrixWeight> {
        let geom = self.geometry()?;
        let w = match &self.weight {
            None => MatrixWeight::identity(geom, self.n()),
            Some(WeightConfig { spec: Some(spec), seed, .. }) => generate_weight(geom, spec, *seed)?,
            Some(WeightConfig { file: Some(file), .. }) => {
                let w = load_mwt(&self.resolve(file))?;
                if w.geom != geom || w.n != self.n() {
                    return Err(config_err("weight file does not match the configured grid or n"));
                }
                w
            }
            Some(_) => return Err(config_err("weight needs exactly one of `spec` and `file`")),
        };
        Ok(w)
    }
}

/// Which parts of a configuration to execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sections {
    pub constants: bool,
    pub sparse: bool,
    pub dominate: bool,
    pub theorems: bool,
    pub lemmas: bool,
}

impl Sections {
    pub const ALL: Sections = Sections { constants: true, sparse: true, dominate: true, theorems: true, lemmas: true };
    pub const NONE: Sections =
        Sections { constants: false, sparse: false, dominate: false, theorems: false, lemmas: false };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarOracle {
    pub ap: f64,
    pub a1: f64,
    pub ainfty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSection {
    pub weight: Option<WeightSpec>,
    pub weight_seed: u64,
    pub n: usize,
    pub p: f64,
    pub ap: f64,
    pub a1: f64,
    pub ainfty_p: f64,
    pub ainfty_1: f64,
    /// Present when the weight is a scalar multiple of the identity.
    pub scalar_oracle: Option<ScalarOracle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseRun {
    pub label: String,
    pub kernel: String,
    pub d: usize,
    pub depth: usize,
    pub n: usize,
    pub cubes: usize,
    pub partition: usize,
    pub iterations: usize,
    /// `1/(2 3^d)`, as `num/den`.
    pub eta: String,
    pub certificate: SparseCertificate,
    pub omega_ok: bool,
    pub cz_ok: bool,
    pub domination: Option<Domination>,
    pub refined: Option<Domination>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSection {
    pub parameters: LemmaReport,
    pub matrix: MatrixLemmaReport,
    pub reverse_holder: Vec<RhEntry>,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: usize,
    pub failed: Vec<String>,
    pub inconclusive: Vec<String>,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub configs: Vec<ExperimentConfig>,
    pub conventions: BTreeMap<String, String>,
    pub constants: Vec<ConstantsSection>,
    pub theorems: Vec<CertificateReport>,
    pub sparse: Vec<SparseRun>,
    pub lemmas: Option<LemmaSection>,
    pub verdict: Verdict,
}

/// Everything a run produces, before it is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    /// One JSON object per stopping-time pass.
    pub trace: Vec<serde_json::Value>,
    /// File name (under `plotdata/`) to CSV text.
    pub plots: BTreeMap<String, String>,
}

fn conventions(d: usize) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert("tau".into(), format!("2^(d+11) = {}", tau(d)));
    c.insert(
        "pass_bound".into(),
        "pass_multiplier x ratio of the identity weight with the same operator and trials".into(),
    );
    c.insert(
        "saturation".into(),
        format!("constants above {:e} make a certificate inconclusive", crate::verify::SATURATION),
    );
    c
}

pub fn constants_section(w: &MatrixWeight, p: f64) -> Result<ConstantsSection> {
    let dirs = 32 * w.n;
    let scalar = match &w.meta.spec {
        Some(WeightSpec::ScalarEmbedded { .. } | WeightSpec::Identity { .. }) => {
            let s = ScalarGridFunction::from_fn(w.geom, |c| w.cell(c).mat().get(0, 0));
            Some(ScalarOracle { ap: scalar_ap(&s, p)?, a1: scalar_a1(&s)?, ainfty: fujii_ainfty(&s)? })
        }
        _ => None,
    };
    Ok(ConstantsSection {
        weight: w.meta.spec.clone(),
        weight_seed: w.meta.seed,
        n: w.n,
        p,
        ap: matrix_ap(w, p)?.value,
        a1: matrix_a1(w)?,
        ainfty_p: ainfty_sc(w, p, dirs)?.value,
        ainfty_1: ainfty_sc(w, 1.0, dirs)?.value,
        scalar_oracle: scalar,
    })
}

/// Builds, certifies and optionally measures one sparse family.
pub fn sparse_run(
    label: &str,
    t: &KernelOperator,
    f: &GridFunction,
    g: &GridFunction,
    params: &SparseParams,
    dominate: bool,
    refine: bool,
    seed: u64,
) -> Result<(SparseRun, Vec<TraceRecord>)> {
    let geom = t.geom;
    let profile = match params.mode {
        ThresholdMode::Adaptive => None,
        ThresholdMode::OperatorNorms => {
            let mut p = weak_norm_estimate(t, params.q, 8, seed)?;
            p.mt_norm = Some(bilinear_norm_estimate(t, params.r, params.s, 8, seed)?);
            Some(p)
        }
    };
    let mut gs = build_global_sparse(t, f, g, params, profile.as_ref())?;
    let eta = tripled_eta(geom.d);
    let certificate = sparse_certify(&mut gs.family, eta)?;
    let omega_ok = gs.trace.iter().all(|r| r.omega_ok(geom.d));
    let cz_ok = gs.trace.iter().all(|r| r.cz_half_ok());
    let domination = if dominate { Some(domination_ratio(t, f, g, &gs.family, params.r, params.s)?) } else { None };
    let refined = if dominate && refine {
        let tf = KernelOperator::new(geom.refined()?, t.spec.clone())?;
        let (fr, gr) = (f.refined()?, g.refined()?);
        let mut fine = build_global_sparse(&tf, &fr, &gr, params, None)?;
        sparse_certify(&mut fine.family, eta)?;
        Some(domination_ratio(&tf, &fr, &gr, &fine.family, params.r, params.s)?)
    } else {
        None
    };
    let run = SparseRun {
        label: label.to_string(),
        kernel: t.spec.name().to_string(),
        d: geom.d,
        depth: geom.depth,
        n: f.n,
        cubes: gs.family.cubes.len(),
        partition: gs.partition.len(),
        iterations: gs.trace.len(),
        eta: format!("{}/{}", eta.numer(), eta.denom()),
        certificate,
        omega_ok,
        cz_ok,
        domination,
        refined,
        holds: certificate.flow_feasible && omega_ok && cz_ok,
    };
    Ok((run, gs.trace))
}

pub fn lemma_section(cfg: &LemmaConfig, p: f64, seed: u64) -> Result<LemmaSection> {
    let parameters = param_lemma_checks(&cfg.grid);
    let matrix = matrix_lemma_sweep(cfg.matrix_pairs, cfg.max_condition, seed)?;
    let mut rh = Vec::new();
    if cfg.reverse_holder {
        for (d, depth) in [(1, 8), (2, 5)] {
            let geom = GridGeometry::new(d, depth)?;
            for (spec, s) in weight_corpus(d) {
                rh.push(rh_entry(&generate_weight(geom, &spec, s)?, p, 32 * spec.n())?);
            }
        }
    }
    let passed = parameters.passed() && matrix.passed() && rh.iter().all(|e| e.holds);
    Ok(LemmaSection { parameters, matrix, reverse_holder: rh, passed })
}

fn status_label(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Inconclusive => "inconclusive",
    }
}

/// Pass/fail bookkeeping over every gated item of a report.
pub fn verdict(report: &Report) -> Verdict {
    let mut v = Verdict::default();
    for (k, c) in report.theorems.iter().enumerate() {
        let id = format!("theorems/{k}:{}", c.theorem.id());
        if c.status == Status::Inconclusive {
            v.inconclusive.push(id);
        } else if c.passed() {
            v.passed += 1;
        } else {
            v.failed.push(id);
        }
    }
    for (k, s) in report.sparse.iter().enumerate() {
        if s.holds {
            v.passed += 1;
        } else {
            v.failed.push(format!("sparse/{k}:{}", s.label));
        }
    }
    if let Some(l) = &report.lemmas {
        for c in &l.parameters.claims {
            if c.violations == 0 {
                v.passed += 1;
            } else {
                v.failed.push(format!("lemmas/parameters:{}", c.id));
            }
        }
        if l.matrix.passed() {
            v.passed += 1;
        } else {
            v.failed.push("lemmas/matrix".into());
        }
        for (k, e) in l.reverse_holder.iter().enumerate() {
            if e.holds {
                v.passed += 1;
            } else {
                v.failed.push(format!("lemmas/reverse_holder/{k}"));
            }
        }
    }
    v.exit_code = if !v.failed.is_empty() {
        EXIT_FAIL
    } else if !v.inconclusive.is_empty() {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_PASS
    };
    v
}

fn csv_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// Long-format summary: every number carries the JSON pointer it came from.
pub fn summary_csv(report: &Report) -> String {
    let mut out = String::from("section,item,quantity,value,status,pointer\n");
    let mut row = |section: &str, item: &str, quantity: &str, value: f64, status: &str, pointer: String| {
        let _ = writeln!(out, "{section},{item},{quantity},{},{status},{pointer}", csv_f(value));
    };
    for (k, c) in report.constants.iter().enumerate() {
        let base = format!("/constants/{k}");
        let item = c.weight.as_ref().map_or("custom".to_string(), spec_label);
        row("constants", &item, &format!("A_{}", c.p), c.ap, "", format!("{base}/ap"));
        row("constants", &item, "A_1", c.a1, "", format!("{base}/a1"));
        row("constants", &item, &format!("Ainf_{}", c.p), c.ainfty_p, "", format!("{base}/ainfty_p"));
        row("constants", &item, "Ainf_1", c.ainfty_1, "", format!("{base}/ainfty_1"));
        if let Some(s) = &c.scalar_oracle {
            row("constants", &item, "scalar_A_p", s.ap, "", format!("{base}/scalar_oracle/ap"));
            row("constants", &item, "scalar_A_1", s.a1, "", format!("{base}/scalar_oracle/a1"));
            row("constants", &item, "scalar_Ainf", s.ainfty, "", format!("{base}/scalar_oracle/ainfty"));
        }
    }
    for (k, c) in report.theorems.iter().enumerate() {
        let base = format!("/theorems/{k}");
        let st = if c.status == Status::Pass && !c.exponents.hold() { "fail" } else { status_label(c.status) };
        let item = c.theorem.id();
        for (name, v) in &c.constants {
            row("theorem", item, name, *v, "", format!("{base}/constants/{name}"));
        }
        for (name, v) in &c.exponents.values {
            row("theorem", item, name, *v, "", format!("{base}/exponents/values/{name}"));
        }
        for (j, sc) in c.exponents.side_conditions.iter().enumerate() {
            let s = if sc.holds { "pass" } else { "fail" };
            row(
                "theorem",
                item,
                &format!("side[{}]", sc.name.replace(',', ";")),
                sc.lhs,
                s,
                format!("{base}/exponents/side_conditions/{j}/lhs"),
            );
        }
        row("theorem", item, "constant_expression", c.constant_expression, "", format!("{base}/constant_expression"));
        row("theorem", item, "empirical", c.empirical, "", format!("{base}/empirical"));
        row("theorem", item, "calibration_ratio", c.calibration_ratio, "", format!("{base}/calibration_ratio"));
        row("theorem", item, "pass_bound", c.pass_bound, "", format!("{base}/pass_bound"));
        row("theorem", item, "ratio", c.ratio, st, format!("{base}/ratio"));
    }
    for (k, s) in report.sparse.iter().enumerate() {
        let base = format!("/sparse/{k}");
        let st = if s.holds { "pass" } else { "fail" };
        row("sparse", &s.label, "carleson", s.certificate.carleson, st, format!("{base}/certificate/carleson"));
        row("sparse", &s.label, "eta", s.certificate.eta, st, format!("{base}/certificate/eta"));
        if let Some(dm) = &s.domination {
            row("sparse", &s.label, "ratio_upper", dm.ratio_upper, "", format!("{base}/domination/ratio_upper"));
            row("sparse", &s.label, "ratio_lower", dm.ratio_lower, "", format!("{base}/domination/ratio_lower"));
        }
        if let Some(dm) = &s.refined {
            row("sparse", &s.label, "refined_ratio_upper", dm.ratio_upper, "", format!("{base}/refined/ratio_upper"));
        }
    }
    if let Some(l) = &report.lemmas {
        for (j, c) in l.parameters.claims.iter().enumerate() {
            let st = if c.violations == 0 { "pass" } else { "fail" };
            row(
                "lemmas",
                &c.id,
                "violations",
                c.violations as f64,
                st,
                format!("/lemmas/parameters/claims/{j}/violations"),
            );
        }
        let st = if l.matrix.passed() { "pass" } else { "fail" };
        row("lemmas", "bownik", "worst", l.matrix.bownik_worst, st, "/lemmas/matrix/bownik_worst".into());
        row("lemmas", "holder-mccarthy", "worst", l.matrix.holder_worst, st, "/lemmas/matrix/holder_worst".into());
        for (j, e) in l.reverse_holder.iter().enumerate() {
            let st = if e.holds { "pass" } else { "fail" };
            let item = e.weight.as_ref().map_or("custom".to_string(), spec_label);
            row("lemmas", &item, "rh_scalar", e.scalar_ratio, st, format!("/lemmas/reverse_holder/{j}/scalar_ratio"));
            row("lemmas", &item, "rh_matrix", e.matrix_ratio, st, format!("/lemmas/reverse_holder/{j}/matrix_ratio"));
        }
    }
    out
}

/// `kind` plus its numeric parameters, safe inside a CSV cell.
pub fn spec_label(s: &WeightSpec) -> String {
    match s {
        WeightSpec::Identity { n } => format!("identity-n{n}"),
        WeightSpec::ScalarEmbedded { n, a, .. } => format!("scalar-embedded-n{n}-a{a}"),
        WeightSpec::RotatingPower { n, a, .. } => format!("rotating-power-n{n}-a{a}"),
        WeightSpec::RandomLogLipschitz { n, amplitude, modes } => {
            format!("random-log-lipschitz-n{n}-amp{amplitude}-m{modes}")
        }
        WeightSpec::BlockDiagonal { exponents, .. } => {
            format!("block-diagonal-{}", exponents.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("_"))
        }
    }
}

fn load_pair(cfg: &ExperimentConfig, s: &SparseConfig) -> Result<Option<(GridFunction, GridFunction)>> {
    match (&s.f, &s.g) {
        (Some(f), Some(g)) => {
            let (f, g) = (load_gfn(&cfg.resolve(f))?, load_gfn(&cfg.resolve(g))?);
            let geom = cfg.geometry()?;
            if f.geom != geom || g.geom != geom || f.n != g.n {
                return Err(config_err("sparse inputs must match the configured grid and each other"));
            }
            Ok(Some((f, g)))
        }
        _ => Ok(None),
    }
}

/// Executes the selected sections of a validated configuration.
pub fn run(cfg: &ExperimentConfig, sections: Sections) -> Result<Outcome> {
    let geom = cfg.geometry()?;
    let mut report = Report {
        schema: SCHEMA.to_string(),
        configs: vec![cfg.clone()],
        conventions: conventions(geom.d),
        constants: Vec::new(),
        theorems: Vec::new(),
        sparse: Vec::new(),
        lemmas: None,
        verdict: Verdict::default(),
    };
    let mut trace = Vec::new();
    let mut plots = BTreeMap::new();
    let needs_weight = (sections.constants && cfg.constants) || (sections.theorems && !cfg.theorems.is_empty());
    let weight = if needs_weight { Some(cfg.load_weight()?) } else { None };

    if sections.constants && cfg.constants {
        report.constants.push(constants_section(weight.as_ref().expect("loaded"), cfg.p)?);
    }

    if sections.sparse {
        if let Some(s) = &cfg.sparse {
            let dominate = sections.dominate && s.dominate;
            let mut jobs = Vec::new();
            if let Some((f, g)) = load_pair(cfg, s)? {
                let op = KernelOperator::new(geom, cfg.operator.clone().expect("validated"))?;
                jobs.push(("files".to_string(), op, f, g));
            }
            for &k in &s.corpus {
                let inst = corpus_instance(k, cfg.seed)?;
                let op = inst.operator()?;
                jobs.push((format!("corpus-{k}"), op, inst.f, inst.g));
            }
            let mut refinement = String::from("run,L,ratio_upper,ratio_lower\n");
            for (j, (label, op, f, g)) in jobs.iter().enumerate() {
                let (r, tr) = sparse_run(label, op, f, g, &s.params, dominate, s.refine, cfg.seed)?;
                for rec in tr {
                    let mut v = serde_json::to_value(&rec)?;
                    v["run"] = serde_json::Value::from(label.as_str());
                    trace.push(v);
                }
                for (lv, dm) in [(r.depth, r.domination), (r.depth + 1, r.refined)] {
                    if let Some(dm) = dm {
                        let _ = writeln!(refinement, "{j},{lv},{},{}", csv_f(dm.ratio_upper), csv_f(dm.ratio_lower));
                    }
                }
                report.sparse.push(r);
            }
            if dominate {
                plots.insert("refinement.csv".to_string(), refinement);
            }
        }
    }

    if sections.theorems && !cfg.theorems.is_empty() {
        let w = weight.as_ref().expect("loaded");
        let params = cfg.params();
        for &kind in &cfg.theorems {
            let kernel = cfg.kernel_for(kind);
            let t = KernelOperator::new(geom, kernel.clone())?;
            let cal = calibration_ratio(&t, w.n, kind, &params)?;
            let cert = verify_calibrated(w, &kernel, kind, &params, cal)?;
            if matches!(kind, TheoremKind::EndpointRough | TheoremKind::EndpointHormander) {
                let r = if kind == TheoremKind::EndpointHormander { params.r } else { None };
                let mut csv = String::from("trial,lambda,value\n");
                for (k, f) in vector_trials(&geom, w.n, params.trials, params.seed).iter().enumerate() {
                    for (l, v) in endpoint_sweep(w, &t, f, r, cfg.lambda_points)? {
                        let _ = writeln!(csv, "{k},{},{}", csv_f(l), csv_f(v));
                    }
                }
                plots.insert(format!("lambda_{}.csv", kind.id()), csv);
            }
            report.theorems.push(cert);
        }
    }

    if sections.lemmas {
        if let Some(l) = &cfg.lemmas {
            report.lemmas = Some(lemma_section(l, cfg.p, cfg.seed)?);
        }
    }

    report.verdict = verdict(&report);
    Ok(Outcome { report, trace, plots })
}

/// Concatenates prior reports; the verdict is recomputed.
pub fn merge(reports: Vec<Report>) -> Result<Report> {
    let mut it = reports.into_iter();
    let mut out = it.next().ok_or_else(|| config_err("nothing to merge"))?;
    for r in it {
        if r.schema != out.schema {
            return Err(LabError::Format(format!("schema {} does not match {}", r.schema, out.schema)));
        }
        out.configs.extend(r.configs);
        out.constants.extend(r.constants);
        out.theorems.extend(r.theorems);
        out.sparse.extend(r.sparse);
        if out.lemmas.is_none() {
            out.lemmas = r.lemmas;
        }
        for (k, v) in r.conventions {
            out.conventions.entry(k).or_insert(v);
        }
    }
    out.verdict = verdict(&out);
    Ok(out)
}

pub fn report_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes every artifact under `dir`.
pub fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir.join("plotdata"))?;
    std::fs::write(dir.join("report.json"), report_json(&outcome.report)?)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(&outcome.report))?;
    let mut lines = String::new();
    for v in &outcome.trace {
        lines.push_str(&serde_json::to_string(v)?);
        lines.push('\n');
    }
    std::fs::write(dir.join("trace.jsonl"), lines)?;
    for (name, csv) in &outcome.plots {
        std::fs::write(dir.join("plotdata").join(name), csv)?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))
}
