//! Dyadic geometry over [0,1)^d, grid functions and cube bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::sum::tree_sum;

pub const MAX_CELLS_LOG2: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGeometry {
    pub d: usize,
    #[serde(rename = "L")]
    pub depth: usize,
}

impl GridGeometry {
    pub fn new(d: usize, depth: usize) -> Result<GridGeometry> {
        if d != 1 && d != 2 {
            return Err(LabError::InvalidInput(format!("dimension {d} not in {{1,2}}")));
        }
        if depth < 1 || d * depth > MAX_CELLS_LOG2 {
            return Err(LabError::InvalidInput(format!("depth {depth} outside [1, {}]", MAX_CELLS_LOG2 / d)));
        }
        Ok(GridGeometry { d, depth })
    }

    /// Cells per side.
    #[inline]
    pub fn side(&self) -> usize {
        1 << self.depth
    }

    #[inline]
    pub fn cells(&self) -> usize {
        1 << (self.d * self.depth)
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    #[inline]
    pub fn cell_measure(&self) -> f64 {
        (-((self.d * self.depth) as f64)).exp2()
    }

    #[inline]
    pub fn index(&self, c: [usize; 2]) -> usize {
        c[0] + self.side() * c[1]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            [idx & (self.side() - 1), idx >> self.depth]
        }
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let c = self.coords(idx);
        let h = self.cell_size();
        let y = if self.d == 1 { 0.0 } else { (c[1] as f64 + 0.5) * h };
        [(c[0] as f64 + 0.5) * h, y]
    }

    pub fn domain_box(&self) -> CellBox {
        CellBox { lo: [0, 0], hi: [self.side(), if self.d == 1 { 1 } else { self.side() }] }
    }

    pub fn refined(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.d, self.depth + 1)
    }

    /// All dyadic cubes of one level, in index order.
    pub fn cubes_at(&self, level: usize) -> Vec<DyadicCube> {
        let per = 1u32 << level;
        let rows = if self.d == 1 { 1 } else { per };
        let mut out = Vec::with_capacity((per * rows) as usize);
        for c1 in 0..rows {
            for c0 in 0..per {
                out.push(DyadicCube { level: level as u32, coords: [c0, c1] });
            }
        }
        out
    }
}

/// A dyadic cube: `level` and integer corner coordinates at that level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub coords: [u32; 2],
}

impl DyadicCube {
    pub fn root() -> DyadicCube {
        DyadicCube { level: 0, coords: [0, 0] }
    }

    pub fn measure(&self, d: usize) -> f64 {
        (-((d as u32 * self.level) as f64)).exp2()
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube { level: self.level - 1, coords: [self.coords[0] / 2, self.coords[1] / 2] })
    }

    pub fn children(&self, d: usize) -> Vec<DyadicCube> {
        let l = self.level + 1;
        let [a, b] = self.coords;
        if d == 1 {
            vec![DyadicCube { level: l, coords: [2 * a, 0] }, DyadicCube { level: l, coords: [2 * a + 1, 0] }]
        } else {
            vec![
                DyadicCube { level: l, coords: [2 * a, 2 * b] },
                DyadicCube { level: l, coords: [2 * a + 1, 2 * b] },
                DyadicCube { level: l, coords: [2 * a, 2 * b + 1] },
                DyadicCube { level: l, coords: [2 * a + 1, 2 * b + 1] },
            ]
        }
    }

    /// Ancestor (or self) at a coarser level.
    pub fn ancestor(&self, level: u32) -> DyadicCube {
        assert!(level <= self.level);
        let s = self.level - level;
        DyadicCube { level, coords: [self.coords[0] >> s, self.coords[1] >> s] }
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }

    /// The cube of a given level containing a cell.
    pub fn of_cell(geom: &GridGeometry, idx: usize, level: u32) -> DyadicCube {
        let c = geom.coords(idx);
        let s = geom.depth as u32 - level;
        DyadicCube { level, coords: [(c[0] >> s) as u32, (c[1] >> s) as u32] }
    }

    pub fn side_cells(&self, geom: &GridGeometry) -> usize {
        1 << (geom.depth - self.level as usize)
    }

    pub fn valid_in(&self, geom: &GridGeometry) -> bool {
        let per = 1u32 << self.level;
        self.level as usize <= geom.depth
            && self.coords[0] < per
            && if geom.d == 1 { self.coords[1] == 0 } else { self.coords[1] < per }
    }

    pub fn cell_box(&self, geom: &GridGeometry) -> CellBox {
        let s = self.side_cells(geom);
        let lo = [self.coords[0] as usize * s, self.coords[1] as usize * s];
        if geom.d == 1 {
            CellBox { lo: [lo[0], 0], hi: [lo[0] + s, 1] }
        } else {
            CellBox { lo, hi: [lo[0] + s, lo[1] + s] }
        }
    }

    /// Concentric triple clipped to the domain.
    pub fn tripled(&self, geom: &GridGeometry) -> CellBox {
        let s = self.side_cells(geom);
        let b = self.cell_box(geom);
        let side = geom.side();
        let mut out = b;
        for ax in 0..geom.d {
            out.lo[ax] = b.lo[ax].saturating_sub(s);
            out.hi[ax] = (b.hi[ax] + s).min(side);
        }
        out
    }
}

/// Half-open box of cells `[lo, hi)`; the second axis is `[0,1)` when d = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl CellBox {
    #[inline]
    pub fn count(&self) -> usize {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn measure(&self, geom: &GridGeometry) -> f64 {
        self.count() as f64 * geom.cell_measure()
    }

    pub fn contains_box(&self, other: &CellBox) -> bool {
        (0..2).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn contains_cell(&self, geom: &GridGeometry, idx: usize) -> bool {
        let c = geom.coords(idx);
        (0..2).all(|a| self.lo[a] <= c[a] && c[a] < self.hi[a])
    }

    pub fn intersect(&self, other: &CellBox) -> Option<CellBox> {
        let mut out = *self;
        for a in 0..2 {
            out.lo[a] = self.lo[a].max(other.lo[a]);
            out.hi[a] = self.hi[a].min(other.hi[a]);
            if out.lo[a] >= out.hi[a] {
                return None;
            }
        }
        Some(out)
    }

    /// Cell indices, second axis outer.
    pub fn cells(&self, geom: &GridGeometry) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        for y in self.lo[1]..self.hi[1] {
            for x in self.lo[0]..self.hi[0] {
                out.push(geom.index([x, y]));
            }
        }
        out
    }
}

/// R^n-valued function, constant on each cell; values stored cell-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub geom: GridGeometry,
    pub n: usize,
    pub data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(geom: GridGeometry, n: usize) -> GridFunction {
        GridFunction { geom, n, data: vec![0.0; geom.cells() * n] }
    }

    pub fn new(geom: GridGeometry, n: usize, data: Vec<f64>) -> Result<GridFunction> {
        if n == 0 || n > crate::spd::MAX_DIM {
            return Err(LabError::InvalidInput(format!("value dimension {n} outside [1,8]")));
        }
        if data.len() != geom.cells() * n {
            return Err(LabError::InvalidInput("payload length does not match geometry".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidInput("non-finite grid value".into()));
        }
        Ok(GridFunction { geom, n, data })
    }

    pub fn from_fn(geom: GridGeometry, n: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> GridFunction {
        let mut data = Vec::with_capacity(geom.cells() * n);
        for c in 0..geom.cells() {
            let v = f(c);
            assert_eq!(v.len(), n);
            data.extend_from_slice(&v);
        }
        GridFunction { geom, n, data }
    }

    #[inline]
    pub fn at(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.n..(cell + 1) * self.n]
    }

    #[inline]
    pub fn at_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.data[cell * self.n..(cell + 1) * self.n]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.geom.cells()).map(|c| self.data[c * self.n + i]).collect()
    }

    pub fn from_components(geom: GridGeometry, comps: &[Vec<f64>]) -> GridFunction {
        let n = comps.len();
        GridFunction::from_fn(geom, n, |c| comps.iter().map(|v| v[c]).collect())
    }

    /// Euclidean norm per cell.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.geom.cells()).map(|c| crate::spd::norm2(self.at(c))).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Zero outside `region`.
    pub fn restricted(&self, region: &CellBox) -> GridFunction {
        let mut out = GridFunction::zeros(self.geom, self.n);
        for c in region.cells(&self.geom) {
            out.at_mut(c).copy_from_slice(self.at(c));
        }
        out
    }

    /// L^p norm over the domain.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mag = self.magnitude();
        lp_norm(&mag, self.geom.cell_measure(), p)
    }

    /// Same function on a grid one level finer.
    pub fn refined(&self) -> Result<GridFunction> {
        let g = self.geom.refined()?;
        Ok(GridFunction::from_fn(g, self.n, |c| {
            let [x, y] = g.coords(c);
            self.at(self.geom.index([x / 2, y / 2])).to_vec()
        }))
    }

    /// Smallest cell box containing the support, if any.
    pub fn support_box(&self) -> Option<CellBox> {
        let mut lo = [usize::MAX; 2];
        let mut hi = [0usize; 2];
        for c in 0..self.geom.cells() {
            if self.at(c).iter().any(|&v| v != 0.0) {
                let xy = self.geom.coords(c);
                for a in 0..2 {
                    lo[a] = lo[a].min(xy[a]);
                    hi[a] = hi[a].max(xy[a] + 1);
                }
            }
        }
        (lo[0] != usize::MAX).then_some(CellBox { lo, hi })
    }
}

/// Scalar grid function; the weight role requires strictly positive values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGridFunction {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
}

impl ScalarGridFunction {
    pub fn new(geom: GridGeometry, values: Vec<f64>) -> Result<ScalarGridFunction> {
        if values.len() != geom.cells() {
            return Err(LabError::InvalidInput("payload length does not match geometry".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidInput("non-finite grid value".into()));
        }
        Ok(ScalarGridFunction { geom, values })
    }

    pub fn constant(geom: GridGeometry, c: f64) -> ScalarGridFunction {
        ScalarGridFunction { geom, values: vec![c; geom.cells()] }
    }

    pub fn from_fn(geom: GridGeometry, f: impl FnMut(usize) -> f64) -> ScalarGridFunction {
        ScalarGridFunction { geom, values: (0..geom.cells()).map(f).collect() }
    }

    pub fn as_weight(&self) -> Result<&ScalarGridFunction> {
        if self.values.iter().any(|&v| v <= 0.0) {
            return domain("weight must be strictly positive");
        }
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarGridFunction {
        ScalarGridFunction { geom: self.geom, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn into_grid_function(self) -> GridFunction {
        GridFunction { geom: self.geom, n: 1, data: self.values }
    }
}

pub fn lp_norm(values: &[f64], cell_measure: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    (tree_sum(values.len(), &|i| values[i].abs().powf(p)) * cell_measure).powf(1.0 / p)
}

/// Normalized L^p average of a scalar array over a cell box.
pub fn box_p_average(geom: &GridGeometry, values: &[f64], b: &CellBox, p: f64) -> f64 {
    let cells = b.cells(geom);
    let s = tree_sum(cells.len(), &|k| values[cells[k]].abs().powf(p));
    (s / cells.len() as f64).powf(1.0 / p)
}

/// Plain average of a scalar array over a cell box.
pub fn box_average(geom: &GridGeometry, values: &[f64], b: &CellBox) -> f64 {
    let cells = b.cells(geom);
    tree_sum(cells.len(), &|k| values[cells[k]]) / cells.len() as f64
}

/// ((1/|Q|) sum |f|^p |cell|)^{1/p} with |f| the Euclidean norm.
pub fn p_average(f: &GridFunction, q: &DyadicCube, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return domain("p must be at least 1");
    }
    if !q.valid_in(&f.geom) {
        return Err(LabError::InvalidInput("cube outside geometry".into()));
    }
    Ok(p_average_box(f, &q.cell_box(&f.geom), p))
}

pub fn p_average_box(f: &GridFunction, b: &CellBox, p: f64) -> f64 {
    let cells = b.cells(&f.geom);
    if p.is_infinite() {
        return cells.iter().fold(0.0f64, |m, &c| m.max(crate::spd::norm2(f.at(c))));
    }
    let s = tree_sum(cells.len(), &|k| crate::spd::norm2(f.at(cells[k])).powf(p));
    (s / cells.len() as f64).powf(1.0 / p)
}

/// Averages of `values` over every dyadic cube, indexed `[level][cube index]`.
pub fn level_averages(geom: &GridGeometry, values: &[f64]) -> Vec<Vec<f64>> {
    (0..=geom.depth)
        .map(|l| geom.cubes_at(l).iter().map(|q| box_average(geom, values, &q.cell_box(geom))).collect())
        .collect()
}

#[inline]
pub fn cube_slot(q: &DyadicCube) -> usize {
    q.coords[0] as usize + ((q.coords[1] as usize) << q.level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_limits() {
        assert!(GridGeometry::new(3, 2).is_err());
        assert!(GridGeometry::new(2, 13).is_err());
        assert!(GridGeometry::new(1, 0).is_err());
        let g = GridGeometry::new(2, 3).unwrap();
        assert_eq!(g.cells(), 64);
        for c in 0..64 {
            assert_eq!(g.index(g.coords(c)), c);
        }
    }

    #[test]
    fn children_partition_parent() {
        for d in 1..=2 {
            let g = GridGeometry::new(d, 4).unwrap();
            let q = DyadicCube { level: 2, coords: [1, if d == 2 { 3 } else { 0 }] };
            let kids = q.children(d);
            let total: f64 = kids.iter().map(|k| k.measure(d)).sum();
            assert_eq!(total, q.measure(d));
            let mut cells: Vec<usize> = kids.iter().flat_map(|k| k.cell_box(&g).cells(&g)).collect();
            cells.sort();
            let mut parent_cells = q.cell_box(&g).cells(&g);
            parent_cells.sort();
            assert_eq!(cells, parent_cells);
            assert!(kids.iter().all(|k| k.parent() == Some(q) && q.contains(k)));
        }
    }

    #[test]
    fn tripled_is_clipped() {
        let g = GridGeometry::new(1, 3).unwrap();
        let q = DyadicCube { level: 1, coords: [0, 0] };
        assert_eq!(q.tripled(&g), CellBox { lo: [0, 0], hi: [8, 1] });
        let q = DyadicCube { level: 3, coords: [3, 0] };
        assert_eq!(q.tripled(&g), CellBox { lo: [2, 0], hi: [5, 1] });
    }

    #[test]
    fn p_average_examples() {
        let g = GridGeometry::new(1, 4).unwrap();
        let f = GridFunction::from_fn(g, 2, |_| vec![3.0, 4.0]);
        for p in [1.0, 2.0, 3.5] {
            assert!((p_average(&f, &DyadicCube { level: 2, coords: [1, 0] }, p).unwrap() - 5.0).abs() < 1e-14);
        }
        let h = GridFunction::from_fn(g, 1, |c| vec![if c < 8 { 1.0 } else { 0.0 }]);
        assert_eq!(p_average(&h, &DyadicCube::root(), 1.0).unwrap(), 0.5);
        assert!(p_average(&h, &DyadicCube::root(), 0.5).is_err());
    }

    #[test]
    fn refinement_preserves_averages() {
        let g = GridGeometry::new(2, 2).unwrap();
        let f = GridFunction::from_fn(g, 1, |c| vec![c as f64]);
        let r = f.refined().unwrap();
        let q = DyadicCube { level: 1, coords: [1, 0] };
        let a = p_average(&f, &q, 2.0).unwrap();
        let b = p_average(&r, &q, 2.0).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
