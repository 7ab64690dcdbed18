//! The constructive sparse domination: exceptional sets, the Calderón–Zygmund
//! stopping time, local and global families, and their certification.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::convex::{body_product_bracket, john_normalize_box, ConvexBodyAverage};
use crate::error::{domain, LabError, Result};
use crate::flow::FlowNetwork;
use crate::grid::{box_p_average, CellBox, DyadicCube, GridFunction, GridGeometry, ScalarGridFunction};
use crate::operators::{KernelOperator, KernelSpec, OperatorProfile};
use crate::scalar::cz_decompose;
use crate::sum::tree_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    Adaptive,
    OperatorNorms,
}

/// Exponents of the domination principle: `T` weak type `(q,q)`, bodies in `L^r` and `L^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseParams {
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub mode: ThresholdMode,
}

impl Default for SparseParams {
    fn default() -> Self {
        SparseParams { q: 1.0, r: 1.0, s: 2.0, mode: ThresholdMode::Adaptive }
    }
}

impl SparseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0 && self.q <= self.r && self.s >= 1.0) || !self.r.is_finite() || !self.s.is_finite() {
            return domain("need 1 <= q <= r and s >= 1, all finite");
        }
        Ok(())
    }

    /// `nu` with `1/nu = 1/r + 1/s`.
    pub fn nu(&self) -> f64 {
        self.r * self.s / (self.r + self.s)
    }
}

/// One pass of the stopping time on a cube `Q0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub partition_cube: usize,
    pub depth: usize,
    pub cube: DyadicCube,
    pub mode: ThresholdMode,
    pub a1: f64,
    pub a2: f64,
    /// Doublings applied to the starting thresholds.
    pub doublings: [u32; 2],
    pub rank_f: usize,
    pub rank_g: usize,
    pub q0_cells: usize,
    pub e1_cells: usize,
    pub e2_cells: usize,
    pub omega_cells: usize,
    pub cz_count: usize,
    pub cz_cells: usize,
    /// Every stopping cube has `2^{-(d+1)}|P| < |P ∩ Ω| <= |P|/2` and meets the complement of Ω.
    pub cz_bounds_ok: bool,
    /// Ω is covered by the stopping cubes.
    pub omega_covered: bool,
    /// `sum_{Q0} |<T(f chi_{3Q0}), g>|`.
    pub local_lhs: f64,
}

impl TraceRecord {
    /// `|Ω| <= 2^{-(d+2)} |Q0|`, in whole cells.
    pub fn omega_ok(&self, d: usize) -> bool {
        self.omega_cells << (d + 2) <= self.q0_cells
    }

    /// `sum |P_j| <= |Q0|/2`, in whole cells.
    pub fn cz_half_ok(&self) -> bool {
        2 * self.cz_cells <= self.q0_cells
    }
}

/// Exceptional set of one pass, as cell flags over `Q0` in `cell_box` order.
#[derive(Clone, Debug)]
pub struct ExceptionalSet {
    pub cells: Vec<usize>,
    pub e1: Vec<bool>,
    pub e2: Vec<bool>,
    pub a1: f64,
    pub a2: f64,
    pub doublings: [u32; 2],
}

impl ExceptionalSet {
    pub fn omega(&self) -> Vec<usize> {
        self.cells.iter().enumerate().filter(|&(k, _)| self.e1[k] || self.e2[k]).map(|(_, &c)| c).collect()
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        let e1 = self.e1.iter().filter(|&&b| b).count();
        let e2 = self.e2.iter().filter(|&&b| b).count();
        let om = self.e1.iter().zip(&self.e2).filter(|(a, b)| **a || **b).count();
        (e1, e2, om)
    }
}

/// Per-cell ratios whose super-level sets are `E_1` and `E_2`.
#[derive(Clone, Debug)]
pub struct LevelRatios {
    pub cells: Vec<usize>,
    /// `max_i |T(f~_i chi_{3Q0})| / <f~_i>_{q,3Q0}`.
    pub v1: Vec<f64>,
    /// `max_{i,j} M_{T,Q0}(f~_i, g~_j) / (<f~_i>_{r,3Q0} <g~_j>_{s,3Q0})`.
    pub v2: Vec<f64>,
}

fn abs_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.abs()).collect()
}

/// Ratios for John-normalized `ft`, `gt` (components zero outside `3Q0`).
pub fn level_ratios(
    t: &KernelOperator,
    ft: &GridFunction,
    gt: &GridFunction,
    q0: &DyadicCube,
    params: &SparseParams,
) -> LevelRatios {
    let geom = &t.geom;
    let big = q0.tripled(geom);
    let qbox = q0.cell_box(geom);
    let cells = qbox.cells(geom);
    let slot: BTreeMap<usize, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut v1 = vec![0.0f64; cells.len()];
    let mut v2 = vec![0.0f64; cells.len()];
    let fcomp: Vec<Vec<f64>> = (0..ft.n).map(|i| ft.component(i)).collect();
    let gabs: Vec<Vec<f64>> = (0..gt.n).map(|j| abs_vec(&gt.component(j))).collect();
    let gs: Vec<f64> = gabs.iter().map(|g| box_p_average(geom, g, &big, params.s)).collect();
    let mut full = vec![vec![0.0f64; geom.cells()]; ft.n];
    let mut fr = vec![0.0f64; ft.n];
    for (i, f) in fcomp.iter().enumerate() {
        let fq = box_p_average(geom, f, &big, params.q);
        fr[i] = box_p_average(geom, f, &big, params.r);
        let tf = t.apply_box(f, &big, &qbox);
        for (k, &c) in cells.iter().enumerate() {
            full[i][c] = tf[k];
            if fq > 0.0 {
                v1[k] = v1[k].max(tf[k].abs() / fq);
            }
        }
    }
    // M_{T,Q0}: sup over dyadic Q with x in Q and Q inside Q0
    for level in q0.level as usize..=geom.depth {
        let shift = level as u32 - q0.level;
        let per = 1u32 << shift;
        let rows = if geom.d == 1 { 1 } else { per };
        for b in 0..rows {
            for a in 0..per {
                let q = DyadicCube {
                    level: level as u32,
                    coords: [(q0.coords[0] << shift) + a, (q0.coords[1] << shift) + b],
                };
                let qb = q.cell_box(geom);
                let qcells = qb.cells(geom);
                let h = qcells.len() as f64;
                let excl = q.tripled(geom);
                for (i, f) in fcomp.iter().enumerate() {
                    if fr[i] == 0.0 {
                        continue;
                    }
                    let tq = t.apply_excluding(f, &big, &excl, &qb, Some(&full[i]));
                    if tq.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for (j, g) in gabs.iter().enumerate() {
                        if gs[j] == 0.0 {
                            continue;
                        }
                        let avg = tree_sum(qcells.len(), &|k| tq[k].abs() * g[qcells[k]]) / h;
                        let ratio = avg / (fr[i] * gs[j]);
                        for &c in &qcells {
                            let k = slot[&c];
                            v2[k] = v2[k].max(ratio);
                        }
                    }
                }
            }
        }
    }
    LevelRatios { cells, v1, v2 }
}

/// Smallest `start * 2^k` (k >= 0) leaving at most `allowed` values above it.
fn doubled_threshold(values: &[f64], allowed: usize, start: f64) -> Result<(f64, u32)> {
    if values.iter().any(|v| v.is_nan()) || !(start > 0.0) {
        return Err(LabError::Numeric("non-finite exceptional-set ratio".into()));
    }
    let mut a = start;
    let mut k = 0u32;
    while values.iter().filter(|&&v| v > a).count() > allowed {
        a *= 2.0;
        k += 1;
        if !a.is_finite() {
            return Err(LabError::Numeric("threshold overflow".into()));
        }
    }
    Ok((a, k))
}

/// `E_1` and `E_2` on `Q0` for fixed thresholds.
pub fn exceptional_set(
    t: &KernelOperator,
    ft: &GridFunction,
    gt: &GridFunction,
    q0: &DyadicCube,
    a1: f64,
    a2: f64,
    params: &SparseParams,
) -> ExceptionalSet {
    let lr = level_ratios(t, ft, gt, q0, params);
    ExceptionalSet {
        e1: lr.v1.iter().map(|&v| v > a1).collect(),
        e2: lr.v2.iter().map(|&v| v > a2).collect(),
        cells: lr.cells,
        a1,
        a2,
        doublings: [0, 0],
    }
}

/// Starting thresholds in operator-norm mode, from an operator profile.
pub fn norm_thresholds(profile: &OperatorProfile, d: usize, n: usize, params: &SparseParams) -> Result<(f64, f64)> {
    let mt = profile
        .mt_norm
        .ok_or_else(|| LabError::Config("operator-norm thresholds need the bilinear maximal norm".into()))?;
    let factor = |e: f64| 3f64.powf(d as f64 / e) * 2f64.powf((d as f64 + 3.0) / e) * (n as f64).powf(1.0 / e);
    let a1 = profile.weak_norm * factor(params.q);
    let a2 = mt * factor(params.nu());
    // a vanishing empirical norm still needs a positive starting point
    Ok((if a1 > 0.0 { a1 } else { 1.0 }, if a2 > 0.0 { a2 } else { 1.0 }))
}

/// `∫_{Q0} |<T(f chi_{3Q0}), g>|`.
fn local_pairing(t: &KernelOperator, f: &GridFunction, g: &GridFunction, q0: &DyadicCube) -> f64 {
    let geom = &t.geom;
    let (big, qbox) = (q0.tripled(geom), q0.cell_box(geom));
    let cells = qbox.cells(geom);
    let tf: Vec<Vec<f64>> = (0..f.n).map(|i| t.apply_box(&f.component(i), &big, &qbox)).collect();
    tree_sum(cells.len(), &|k| (0..f.n).map(|i| tf[i][k] * g.at(cells[k])[i]).sum::<f64>().abs()) * geom.cell_measure()
}

/// Result of the stopping time started on one cube.
#[derive(Clone, Debug)]
pub struct LocalSparse {
    pub root: DyadicCube,
    pub cubes: Vec<DyadicCube>,
    pub trace: Vec<TraceRecord>,
}

/// Runs the stopping time from `q0`, recursing into the Calderón–Zygmund
/// cubes of each exceptional set. Cubes on which `f` vanishes on the triple
/// (or `g` does) carry no mass and are dropped.
pub fn build_local_sparse(
    t: &KernelOperator,
    f: &GridFunction,
    g: &GridFunction,
    q0: &DyadicCube,
    params: &SparseParams,
    profile: Option<&OperatorProfile>,
) -> Result<LocalSparse> {
    let mut out = LocalSparse { root: *q0, cubes: Vec::new(), trace: Vec::new() };
    local_into(t, f, g, q0, params, profile, 0, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn local_into(
    t: &KernelOperator,
    f: &GridFunction,
    g: &GridFunction,
    q0: &DyadicCube,
    params: &SparseParams,
    profile: Option<&OperatorProfile>,
    part: usize,
    out: &mut LocalSparse,
) -> Result<()> {
    params.validate()?;
    let geom = t.geom;
    if f.geom != geom || g.geom != geom || f.n != g.n {
        return Err(LabError::InvalidInput("f, g and T must share geometry and dimension".into()));
    }
    if !q0.valid_in(&geom) {
        return Err(LabError::InvalidInput("cube outside geometry".into()));
    }
    let d = geom.d;
    let height = (-(d as f64 + 1.0)).exp2();
    let start = match params.mode {
        ThresholdMode::Adaptive => (1.0, 1.0),
        ThresholdMode::OperatorNorms => {
            let p =
                profile.ok_or_else(|| LabError::Config("operator-norm thresholds need an operator profile".into()))?;
            norm_thresholds(p, d, f.n, params)?
        }
    };
    let mut stack = vec![(*q0, q0.level as usize)];
    while let Some((q, depth)) = stack.pop() {
        if depth > geom.depth {
            return Err(LabError::ResolutionExhausted(geom.depth));
        }
        let big = q.tripled(&geom);
        let fn_ = john_normalize_box(f, &big, params.r)?;
        let gn = john_normalize_box(g, &big, params.s)?;
        if fn_.surrogate.rank == 0 || gn.surrogate.rank == 0 {
            continue;
        }
        let lr = level_ratios(t, &fn_.components, &gn.components, &q, params);
        let q0_cells = lr.cells.len();
        let allowed = q0_cells >> (d + 3);
        let (a1, k1) = doubled_threshold(&lr.v1, allowed, start.0)?;
        let (a2, k2) = doubled_threshold(&lr.v2, allowed, start.1)?;
        let e1: Vec<bool> = lr.v1.iter().map(|&v| v > a1).collect();
        let e2: Vec<bool> = lr.v2.iter().map(|&v| v > a2).collect();
        let mut phi = ScalarGridFunction::constant(geom, 0.0);
        let mut omega_cells = 0;
        for (k, &c) in lr.cells.iter().enumerate() {
            if e1[k] || e2[k] {
                phi.values[c] = 1.0;
                omega_cells += 1;
            }
        }
        let cz = cz_decompose(&phi, &q, height)?;
        let mut cz_cells = 0;
        let mut cz_bounds_ok = true;
        let mut covered = 0;
        for p in &cz {
            let cells = p.cell_box(&geom).cells(&geom);
            let hit = cells.iter().filter(|&&c| phi.values[c] == 1.0).count();
            cz_cells += cells.len();
            covered += hit;
            cz_bounds_ok &= (hit << (d + 1)) > cells.len() && 2 * hit <= cells.len() && hit < cells.len();
        }
        out.cubes.push(q);
        out.trace.push(TraceRecord {
            iteration: out.trace.len(),
            partition_cube: part,
            depth: depth - out.root.level as usize,
            cube: q,
            mode: params.mode,
            a1,
            a2,
            doublings: [k1, k2],
            rank_f: fn_.surrogate.rank,
            rank_g: gn.surrogate.rank,
            q0_cells,
            e1_cells: e1.iter().filter(|&&b| b).count(),
            e2_cells: e2.iter().filter(|&&b| b).count(),
            omega_cells,
            cz_count: cz.len(),
            cz_cells,
            cz_bounds_ok,
            omega_covered: covered == omega_cells,
            local_lhs: local_pairing(t, f, g, &q),
        });
        for p in cz.into_iter().rev() {
            stack.push((p, p.level as usize));
        }
    }
    Ok(())
}

/// Partition cubes: the central cube (deepest dyadic cube of level at most
/// one holding the support of `f`) followed by its clipped ring of neighbours.
pub fn partition_cubes(f: &GridFunction) -> Vec<DyadicCube> {
    let geom = f.geom;
    let Some(supp) = f.support_box() else {
        return Vec::new();
    };
    if geom.depth == 0 {
        return vec![DyadicCube::root()];
    }
    let corner = DyadicCube::of_cell(&geom, geom.index(supp.lo), 1);
    if !corner.cell_box(&geom).contains_box(&supp) {
        return vec![DyadicCube::root()];
    }
    let mut cubes = vec![corner];
    cubes.extend(geom.cubes_at(1).into_iter().filter(|q| *q != corner));
    cubes
}

/// A family member: a dyadic cube, possibly replaced by its clipped triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FamilyMember {
    pub level: u32,
    pub coords: [u32; 2],
    pub tripled: bool,
}

impl FamilyMember {
    pub fn new(q: DyadicCube, tripled: bool) -> FamilyMember {
        FamilyMember { level: q.level, coords: q.coords, tripled }
    }

    pub fn cube(&self) -> DyadicCube {
        DyadicCube { level: self.level, coords: self.coords }
    }

    pub fn region(&self, geom: &GridGeometry) -> CellBox {
        if self.tripled {
            self.cube().tripled(geom)
        } else {
            self.cube().cell_box(geom)
        }
    }
}

/// Assignment of cell fractions to one member.
pub type CellShares = Vec<(usize, f64)>;

#[derive(Clone, Debug, Serialize)]
pub struct SparseFamily {
    #[serde(skip)]
    pub geom: GridGeometry,
    pub cubes: Vec<FamilyMember>,
    pub eta_claimed: f64,
    pub carleson_constant: f64,
    #[serde(skip)]
    pub disjoint_assignment: Option<Vec<CellShares>>,
}

impl SparseFamily {
    pub fn new(geom: GridGeometry, cubes: Vec<FamilyMember>) -> SparseFamily {
        SparseFamily { geom, cubes, eta_claimed: 0.0, carleson_constant: 0.0, disjoint_assignment: None }
    }

    pub fn regions(&self) -> Vec<CellBox> {
        self.cubes.iter().map(|m| m.region(&self.geom)).collect()
    }

    /// The serialized form: a list of `{level, coords, tripled}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.cubes).expect("members serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseCertificate {
    /// `max_R sum_{P ⊆ R} |P| / |R|`, as an exact ratio of cell counts.
    pub carleson: f64,
    pub carleson_ratio: (u64, u64),
    pub eta: f64,
    pub flow_feasible: bool,
    pub demand: u64,
    pub flow: u64,
}

/// Exact Carleson packing of a family of cell boxes (duplicates count).
pub fn carleson_packing(regions: &[CellBox]) -> (u64, u64) {
    let mut best = (0u64, 1u64);
    for r in regions {
        let inside: u64 = regions.iter().filter(|p| r.contains_box(p)).map(|p| p.count() as u64).sum();
        let den = r.count() as u64;
        if (inside as u128) * (best.1 as u128) > (best.0 as u128) * (den as u128) {
            best = (inside, den);
        }
    }
    best
}

/// Carleson constant and exact η-sparseness via max-flow: each member asks
/// for `η|R|` of measure inside `R`, each cell supplies its own measure.
/// With `η = a/b` every cell is split into `b` units, so the integral flow
/// decides fractional feasibility exactly. A feasible flow is stored as the
/// family's disjoint assignment.
pub fn sparse_certify(family: &mut SparseFamily, eta: Rational64) -> Result<SparseCertificate> {
    if *eta.numer() < 0 || *eta.denom() <= 0 {
        return domain("eta must be non-negative");
    }
    let geom = family.geom;
    let regions = family.regions();
    let (num, den) = carleson_packing(&regions);
    let carleson = if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let (a, b) = (*eta.numer(), *eta.denom());
    let m = regions.len();
    let mut node_of_cell: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &regions {
        for c in r.cells(&geom) {
            let next = m + 1 + node_of_cell.len();
            node_of_cell.entry(c).or_insert(next);
        }
    }
    let sink = m + 1 + node_of_cell.len();
    let mut net = FlowNetwork::new(sink + 1);
    let mut demand = 0i64;
    let mut member_edges = Vec::with_capacity(m);
    for (k, r) in regions.iter().enumerate() {
        let want = a * r.count() as i64;
        demand += want;
        net.add_edge(0, k + 1, want);
        let edges: Vec<(usize, usize)> =
            r.cells(&geom).into_iter().map(|c| (c, net.add_edge(k + 1, node_of_cell[&c], b))).collect();
        member_edges.push(edges);
    }
    for &node in node_of_cell.values() {
        net.add_edge(node, sink, b);
    }
    let flow = net.max_flow(0, sink);
    let feasible = flow == demand;
    family.eta_claimed = eta.to_f64().unwrap_or(0.0);
    family.carleson_constant = carleson;
    family.disjoint_assignment = feasible.then(|| {
        member_edges
            .iter()
            .map(|edges| {
                edges
                    .iter()
                    .filter_map(|&(c, e)| {
                        let x = net.flow_on(e);
                        (x > 0).then(|| (c, x as f64 / b as f64))
                    })
                    .collect()
            })
            .collect()
    });
    Ok(SparseCertificate {
        carleson,
        carleson_ratio: (num, den),
        eta: family.eta_claimed,
        flow_feasible: feasible,
        demand: demand as u64,
        flow: flow as u64,
    })
}

/// Checks a stored assignment against the η-sparse definition.
pub fn assignment_valid(family: &SparseFamily, eta: f64) -> bool {
    let Some(asg) = &family.disjoint_assignment else {
        return false;
    };
    let geom = family.geom;
    let mut used = vec![0.0f64; geom.cells()];
    for (member, shares) in family.cubes.iter().zip(asg) {
        let r = member.region(&geom);
        let mut total = 0.0;
        for &(c, x) in shares {
            if !r.contains_cell(&geom, c) {
                return false;
            }
            used[c] += x;
            total += x;
        }
        if total < eta * r.count() as f64 - 1e-9 {
            return false;
        }
    }
    used.iter().all(|&u| u <= 1.0 + 1e-9)
}

#[derive(Clone, Debug)]
pub struct GlobalSparse {
    /// Tripled family `{3Q : Q in the union of the local families}`.
    pub family: SparseFamily,
    /// The same cubes before tripling.
    pub untripled: SparseFamily,
    pub partition: Vec<DyadicCube>,
    pub trace: Vec<TraceRecord>,
}

/// Local constructions on every partition cube, then tripling.
pub fn build_global_sparse(
    t: &KernelOperator,
    f: &GridFunction,
    g: &GridFunction,
    params: &SparseParams,
    profile: Option<&OperatorProfile>,
) -> Result<GlobalSparse> {
    let geom = t.geom;
    let partition = partition_cubes(f);
    let mut cubes = Vec::new();
    let mut trace: Vec<TraceRecord> = Vec::new();
    for (j, r) in partition.iter().enumerate() {
        let mut local = LocalSparse { root: *r, cubes: Vec::new(), trace: Vec::new() };
        local_into(t, f, g, r, params, profile, j, &mut local)?;
        cubes.extend(local.cubes);
        for mut rec in local.trace {
            rec.iteration = trace.len();
            trace.push(rec);
        }
    }
    let untripled = SparseFamily::new(geom, cubes.iter().map(|&q| FamilyMember::new(q, false)).collect());
    let family = SparseFamily::new(geom, cubes.iter().map(|&q| FamilyMember::new(q, true)).collect());
    Ok(GlobalSparse { family, untripled, partition, trace })
}

/// The guaranteed sparseness of a tripled family, `1/(2 3^d)`.
pub fn tripled_eta(d: usize) -> Rational64 {
    Rational64::new(1, 2 * 3i64.pow(d as u32))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub lhs: f64,
    pub rhs_lower: f64,
    pub rhs_upper: f64,
    /// `lhs / rhs_lower`, an upper estimate of the sharp constant.
    pub ratio_lower: f64,
    /// `lhs / rhs_upper`, the constant certified against the upper bracket.
    pub ratio_upper: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

/// `∑ |<Tf, g>|` against `∑_{Q} ⟨⟨f⟩⟩_{r,Q} ⟨⟨g⟩⟩_{s,Q} |Q|` bracketed by the body product.
pub fn domination_ratio(
    t: &KernelOperator,
    f: &GridFunction,
    g: &GridFunction,
    family: &SparseFamily,
    r: f64,
    s: f64,
) -> Result<Domination> {
    let geom = t.geom;
    if f.geom != geom || g.geom != geom || f.n != g.n {
        return Err(LabError::InvalidInput("f, g and T must share geometry and dimension".into()));
    }
    let tf = t.apply(f)?;
    let cells = geom.cells();
    let lhs = tree_sum(cells, &|c| {
        let (a, b) = (tf.at(c), g.at(c));
        (0..f.n).map(|i| a[i] * b[i]).sum::<f64>().abs()
    }) * geom.cell_measure();
    let mut cache: BTreeMap<CellBox, (f64, f64)> = BTreeMap::new();
    let mut lo = Vec::with_capacity(family.cubes.len());
    let mut hi = Vec::with_capacity(family.cubes.len());
    for m in &family.cubes {
        let region = m.region(&geom);
        let (l, u) = match cache.get(&region) {
            Some(&v) => v,
            None => {
                let a = ConvexBodyAverage::on_box(f, &region, r)?;
                let b = ConvexBodyAverage::on_box(g, &region, s)?;
                let br = body_product_bracket(&a, &b)?;
                let meas = region.measure(&geom);
                let v = (br.lower * meas, br.upper * meas);
                cache.insert(region, v);
                v
            }
        };
        lo.push(l);
        hi.push(u);
    }
    let rhs_lower = tree_sum(lo.len(), &|k| lo[k]);
    let rhs_upper = tree_sum(hi.len(), &|k| hi[k]);
    Ok(Domination { lhs, rhs_lower, rhs_upper, ratio_lower: ratio(lhs, rhs_lower), ratio_upper: ratio(lhs, rhs_upper) })
}

/// A seeded `(T, f, g)` instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub id: usize,
    pub kernel: KernelSpec,
    pub f: GridFunction,
    pub g: GridFunction,
}

impl Instance {
    pub fn operator(&self) -> Result<KernelOperator> {
        KernelOperator::new(self.f.geom, self.kernel.clone())
    }

    /// The same instance on a grid one level finer.
    pub fn refined(&self) -> Result<Instance> {
        Ok(Instance { id: self.id, kernel: self.kernel.clone(), f: self.f.refined()?, g: self.g.refined()? })
    }
}

/// Instance `k` of the seeded corpus: the first 30 live on `d = 1, L = 10`
/// with `n` cycling through 1..=3, the rest on `d = 2, L = 6` with `n = 2`.
/// Components are smooth random fields so that refinement resolves them.
/// Odd-numbered instances confine `f` to one half-grid cube under a
/// `sin^2` taper; every fifth has a rank-one `f`.
pub fn corpus_instance(k: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let (d, depth, n) = if k < 30 { (1, 10, 1 + k % 3) } else { (2, 6, 2) };
    corpus_instance_with(k, d, depth, n, &mut rng)
}

/// Number of Fourier modes per random field.
pub const FIELD_MODES: usize = 8;

/// Largest frequency per axis: 16 on the line, 4 in the plane.
fn max_frequency(d: usize) -> i32 {
    if d == 1 {
        16
    } else {
        4
    }
}

/// `sum_m a_m cos(2 pi <k_m, x> + phi_m)` with `a_m ~ N(0,1)/sqrt|k_m|`.
fn random_field(d: usize, rng: &mut ChaCha8Rng) -> impl Fn([f64; 2]) -> f64 {
    let modes: Vec<([f64; 2], f64, f64)> = (0..FIELD_MODES)
        .map(|_| {
            let m = max_frequency(d);
            let kx = rng.gen_range(1..=m) as f64;
            let ky = if d == 2 { rng.gen_range(-m..=m) as f64 } else { 0.0 };
            let a: f64 = rng.sample(StandardNormal);
            (([kx, ky]), a / (kx * kx + ky * ky).sqrt().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    move |x: [f64; 2]| {
        modes.iter().map(|(k, a, ph)| a * (std::f64::consts::TAU * (k[0] * x[0] + k[1] * x[1]) + ph).cos()).sum()
    }
}

pub fn corpus_instance_with(k: usize, d: usize, depth: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let geom = GridGeometry::new(d, depth)?;
    let kernel = if d == 1 {
        if k % 2 == 0 {
            KernelSpec::Hilbert
        } else {
            KernelSpec::HormanderExample
        }
    } else if k % 2 == 0 {
        KernelSpec::rough_odd(16)
    } else {
        KernelSpec::Rough {
            omega_samples: (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            enforce_mean_zero: true,
        }
    };
    let support = if k % 2 == 1 && depth > 0 {
        let cubes = geom.cubes_at(1);
        Some(cubes[rng.gen_range(0..cubes.len())])
    } else {
        None
    };
    let rank_one = k % 5 == 4;
    let fields: Vec<_> = (0..if rank_one { 1 } else { n }).map(|_| random_field(d, rng)).collect();
    let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let taper = |x: [f64; 2]| -> f64 {
        let Some(q) = support else { return 1.0 };
        let side = 0.5;
        (0..d)
            .map(|a| {
                let t = (x[a] - q.coords[a] as f64 * side) / side;
                if (0.0..1.0).contains(&t) {
                    (std::f64::consts::PI * t).sin().powi(2)
                } else {
                    0.0
                }
            })
            .product()
    };
    let f = GridFunction::from_fn(geom, n, |c| {
        let x = geom.center(c);
        let w = taper(x);
        if rank_one {
            let s = fields[0](x) * w;
            dir.iter().map(|v| s * v).collect()
        } else {
            fields.iter().map(|fl| fl(x) * w).collect()
        }
    });
    let gfields: Vec<_> = (0..n).map(|_| random_field(d, rng)).collect();
    let g = GridFunction::from_fn(geom, n, |c| gfields.iter().map(|fl| fl(geom.center(c))).collect());
    Ok(Instance { id: k, kernel, f, g })
}
