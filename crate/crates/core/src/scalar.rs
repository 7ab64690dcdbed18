//! Maximal functions, scalar weight constants and the Calderón–Zygmund
//! stopping time on a dyadic grid.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{box_average, cube_slot, level_averages, DyadicCube, GridGeometry, ScalarGridFunction};
use crate::sum::tree_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximalMode {
    Dyadic,
    AllCubes,
}

pub fn maximal_function(w: &ScalarGridFunction, mode: MaximalMode) -> ScalarGridFunction {
    let values = match mode {
        MaximalMode::Dyadic => dyadic_maximal(&w.geom, &w.values),
        MaximalMode::AllCubes => {
            let side = w.geom.side();
            all_cubes_maximal(&w.values, side, w.geom.d)
        }
    };
    ScalarGridFunction { geom: w.geom, values }
}

/// Dyadic maximal function of |values|.
pub fn dyadic_maximal(geom: &GridGeometry, values: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let avgs = level_averages(geom, &abs);
    (0..geom.cells())
        .map(|c| {
            (0..=geom.depth as u32)
                .map(|l| avgs[l as usize][cube_slot(&DyadicCube::of_cell(geom, c, l))])
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Compensated prefix sums; window sums are `(hi[b]-hi[a]) + (lo[b]-lo[a])`.
fn prefix(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut hi = vec![0.0; values.len() + 1];
    let mut lo = vec![0.0; values.len() + 1];
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (i, &v) in values.iter().enumerate() {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
        hi[i + 1] = s;
        lo[i + 1] = c;
    }
    (hi, lo)
}

/// Maximal function over all grid-aligned cubes inside an `m`-cell square
/// (or interval) of nonnegative values laid out row-major.
pub fn all_cubes_maximal(values: &[f64], m: usize, d: usize) -> Vec<f64> {
    if d == 1 {
        all_intervals_1d(values)
    } else {
        all_squares_2d(values, m)
    }
}

fn all_intervals_1d(a: &[f64]) -> Vec<f64> {
    let m = a.len();
    let (hi, lo) = prefix(a);
    let mut out = vec![0.0f64; m];
    let mut suffix = vec![0.0f64; m + 1];
    for s in 0..m {
        // suffix[e] = max over e' >= e of avg(s, e')
        let mut best = f64::NEG_INFINITY;
        for e in (s + 1..=m).rev() {
            let avg = ((hi[e] - hi[s]) + (lo[e] - lo[s])) / (e - s) as f64;
            best = best.max(avg);
            suffix[e] = best;
        }
        for x in s..m {
            out[x] = out[x].max(suffix[x + 1]);
        }
    }
    out
}

/// Max of `b[t]` over `t` in `[x+1-k, x]` clipped to `[0, b.len())`, for `x` in `0..m`.
fn window_max(b: &[f64], k: usize, m: usize, out: &mut [f64]) {
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut next = 0;
    for x in 0..m {
        while next < b.len() && next <= x {
            while let Some(&back) = dq.back() {
                if b[back] <= b[next] {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(next);
            next += 1;
        }
        while let Some(&front) = dq.front() {
            if front + k <= x {
                dq.pop_front();
            } else {
                break;
            }
        }
        out[x] = dq.front().map_or(f64::NEG_INFINITY, |&t| b[t]);
    }
}

fn all_squares_2d(a: &[f64], m: usize) -> Vec<f64> {
    // 2D compensated prefix sums via row prefixes then column accumulation
    let stride = m + 1;
    let mut hi = vec![0.0f64; stride * stride];
    let mut lo = vec![0.0f64; stride * stride];
    for y in 0..m {
        let (rh, rl) = prefix(&a[y * m..(y + 1) * m]);
        for x in 0..=m {
            let (up_h, up_l) = (hi[y * stride + x], lo[y * stride + x]);
            let t = up_h + rh[x];
            let err = if up_h.abs() >= rh[x].abs() { (up_h - t) + rh[x] } else { (rh[x] - t) + up_h };
            hi[(y + 1) * stride + x] = t;
            lo[(y + 1) * stride + x] = up_l + rl[x] + err;
        }
    }
    let rect = |x0: usize, y0: usize, k: usize| -> f64 {
        let (x1, y1) = (x0 + k, y0 + k);
        let h = (hi[y1 * stride + x1] - hi[y0 * stride + x1]) - (hi[y1 * stride + x0] - hi[y0 * stride + x0]);
        let l = (lo[y1 * stride + x1] - lo[y0 * stride + x1]) - (lo[y1 * stride + x0] - lo[y0 * stride + x0]);
        h + l
    };
    let mut out = vec![0.0f64; m * m];
    let mut avg = vec![0.0f64; m * m];
    let mut rowmax = vec![0.0f64; m * m];
    let mut col = vec![0.0f64; m];
    let mut colout = vec![0.0f64; m];
    for k in 1..=m {
        let p = m - k + 1;
        let area = (k * k) as f64;
        for y in 0..p {
            for x in 0..p {
                avg[y * p + x] = rect(x, y, k) / area;
            }
        }
        // max along x for every window-row y, then along y
        for y in 0..p {
            window_max(&avg[y * p..y * p + p], k, m, &mut rowmax[y * m..y * m + m]);
        }
        for x in 0..m {
            for y in 0..p {
                col[y] = rowmax[y * m + x];
            }
            window_max(&col[..p], k, m, &mut colout);
            for y in 0..m {
                let v = colout[y];
                if v > out[y * m + x] {
                    out[y * m + x] = v;
                }
            }
        }
    }
    out
}

/// Values of a dyadic cube laid out as a local `side^d` array.
pub fn extract_cube(geom: &GridGeometry, values: &[f64], q: &DyadicCube) -> Vec<f64> {
    q.cell_box(geom).cells(geom).iter().map(|&c| values[c]).collect()
}

/// Fujii constant sup_Q (1/w(Q)) sum_Q M(chi_Q w), all-cubes maximal function.
pub fn fujii_ainfty(w: &ScalarGridFunction) -> Result<f64> {
    fujii_ainfty_mode(w, MaximalMode::AllCubes)
}

pub fn fujii_ainfty_mode(w: &ScalarGridFunction, mode: MaximalMode) -> Result<f64> {
    w.as_weight()?;
    let geom = &w.geom;
    let norm = normalized(&w.values);
    let mut best = 1.0f64;
    for l in 0..=geom.depth {
        for q in geom.cubes_at(l) {
            let local = extract_cube(geom, &norm, &q);
            let side = q.side_cells(geom);
            let m = match mode {
                MaximalMode::AllCubes => all_cubes_maximal(&local, side, geom.d),
                MaximalMode::Dyadic => {
                    let sub = GridGeometry { d: geom.d, depth: geom.depth - l };
                    dyadic_maximal(&sub, &local)
                }
            };
            let ratio = tree_sum(m.len(), &|i| m[i]) / tree_sum(local.len(), &|i| local[i]);
            best = best.max(ratio);
        }
    }
    Ok(best)
}

/// Scale by the maximum so that constant weights become exactly one.
fn normalized(values: &[f64]) -> Vec<f64> {
    let m = values.iter().fold(0.0f64, |a, &v| a.max(v));
    values.iter().map(|&v| v / m).collect()
}

/// sup_Q <w>_Q <w^{-1/(p-1)}>_Q^{p-1}.
pub fn scalar_ap(w: &ScalarGridFunction, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return domain("p must exceed 1");
    }
    w.as_weight()?;
    let norm = normalized(&w.values);
    let dual: Vec<f64> = norm.iter().map(|&v| v.powf(-1.0 / (p - 1.0))).collect();
    let a = level_averages(&w.geom, &norm);
    let b = level_averages(&w.geom, &dual);
    let mut best = 1.0f64;
    for (la, lb) in a.iter().zip(&b) {
        for (x, y) in la.iter().zip(lb) {
            best = best.max(x * y.powf(p - 1.0));
        }
    }
    Ok(best)
}

/// sup_Q <w>_Q / min_Q w.
pub fn scalar_a1(w: &ScalarGridFunction) -> Result<f64> {
    w.as_weight()?;
    let geom = &w.geom;
    let norm = normalized(&w.values);
    let mut best = 1.0f64;
    for l in 0..=geom.depth {
        for q in geom.cubes_at(l) {
            let b = q.cell_box(geom);
            let mn = b.cells(geom).iter().fold(f64::INFINITY, |m, &c| m.min(norm[c]));
            best = best.max(box_average(geom, &norm, &b) / mn);
        }
    }
    Ok(best)
}

/// sup_Q <w^r>_Q^{1/r} / <w>_Q.
pub fn reverse_holder_ratio(w: &ScalarGridFunction, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return domain("r must exceed 1");
    }
    w.as_weight()?;
    let norm = normalized(&w.values);
    let pow: Vec<f64> = norm.iter().map(|&v| v.powf(r)).collect();
    let a = level_averages(&w.geom, &norm);
    let b = level_averages(&w.geom, &pow);
    let mut best = 1.0f64;
    for (la, lb) in a.iter().zip(&b) {
        for (x, y) in la.iter().zip(lb) {
            best = best.max(y.powf(1.0 / r) / x);
        }
    }
    Ok(best)
}

/// The reverse Hölder exponent 1 + 1/(2^{d+11} c).
pub fn rh_exponent(d: usize, ainfty: f64) -> f64 {
    1.0 + 1.0 / ((d as f64 + 11.0).exp2() * ainfty)
}

/// Maximal dyadic subcubes of `q0` on which the average of `phi` exceeds `height`.
pub fn cz_decompose(phi: &ScalarGridFunction, q0: &DyadicCube, height: f64) -> Result<Vec<DyadicCube>> {
    if !(height > 0.0 && height < 1.0) {
        return domain("height must lie in (0,1)");
    }
    let geom = &phi.geom;
    let avg = |q: &DyadicCube| box_average(geom, &phi.values, &q.cell_box(geom));
    if avg(q0) > height {
        return Ok(vec![*q0]);
    }
    let mut out = Vec::new();
    let mut stack = vec![*q0];
    while let Some(q) = stack.pop() {
        if q.level as usize == geom.depth {
            continue;
        }
        // reverse so that output is in natural child order
        for child in q.children(geom.d).into_iter().rev() {
            if avg(&child) > height {
                out.push(child);
            } else {
                stack.push(child);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_all_cubes(values: &[f64], m: usize, d: usize) -> Vec<f64> {
        let mut out = vec![0.0f64; values.len()];
        if d == 1 {
            for s in 0..m {
                for e in s + 1..=m {
                    let avg: f64 = values[s..e].iter().sum::<f64>() / (e - s) as f64;
                    for o in &mut out[s..e] {
                        *o = o.max(avg);
                    }
                }
            }
        } else {
            for k in 1..=m {
                for y0 in 0..=m - k {
                    for x0 in 0..=m - k {
                        let mut s = 0.0;
                        for y in y0..y0 + k {
                            for x in x0..x0 + k {
                                s += values[y * m + x];
                            }
                        }
                        let avg = s / (k * k) as f64;
                        for y in y0..y0 + k {
                            for x in x0..x0 + k {
                                out[y * m + x] = out[y * m + x].max(avg);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn brute_fujii(w: &ScalarGridFunction) -> f64 {
        let g = &w.geom;
        let mut best = 0.0f64;
        for l in 0..=g.depth {
            for q in g.cubes_at(l) {
                let local = extract_cube(g, &w.values, &q);
                let m = brute_all_cubes(&local, q.side_cells(g), g.d);
                best = best.max(m.iter().sum::<f64>() / local.iter().sum::<f64>());
            }
        }
        best
    }

    #[test]
    fn all_cubes_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, m) in [(1usize, 37usize), (2, 9), (2, 16)] {
            let len = if d == 1 { m } else { m * m };
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..4.0)).collect();
            let fast = all_cubes_maximal(&v, m, d);
            let slow = brute_all_cubes(&v, m, d);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn maximal_of_constant_is_constant() {
        for d in 1..=2 {
            let g = GridGeometry::new(d, 4).unwrap();
            let w = ScalarGridFunction::constant(g, 1.0);
            for mode in [MaximalMode::Dyadic, MaximalMode::AllCubes] {
                assert!(maximal_function(&w, mode).values.iter().all(|&v| v == 1.0));
            }
        }
    }

    #[test]
    fn dyadic_maximal_of_delta_cell() {
        let g = GridGeometry::new(2, 4).unwrap();
        let hot = g.index([5, 9]);
        let w = ScalarGridFunction::from_fn(g, |c| if c == hot { 1.0 } else { 0.0 });
        let m = maximal_function(&w, MaximalMode::Dyadic);
        for c in 0..g.cells() {
            let deepest = (0..=g.depth as u32)
                .rev()
                .find(|&l| DyadicCube::of_cell(&g, c, l) == DyadicCube::of_cell(&g, hot, l))
                .unwrap();
            // average of a delta cell over a level-l cube is 4^{l-L}
            assert_eq!(m.values[c], (2.0 * (deepest as f64 - g.depth as f64)).exp2());
        }
    }

    #[test]
    fn dyadic_below_all_cubes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=2 {
            let g = GridGeometry::new(d, if d == 1 { 7 } else { 4 }).unwrap();
            let w = ScalarGridFunction::from_fn(g, |_| rng.gen_range(0.1..3.0));
            let a = maximal_function(&w, MaximalMode::Dyadic);
            let b = maximal_function(&w, MaximalMode::AllCubes);
            for ((x, y), v) in a.values.iter().zip(&b.values).zip(&w.values) {
                assert!(x <= &(y * (1.0 + 1e-14)) && v <= &(x * (1.0 + 1e-14)));
            }
        }
    }

    #[test]
    fn fujii_examples() {
        let g = GridGeometry::new(1, 5).unwrap();
        assert_eq!(fujii_ainfty(&ScalarGridFunction::constant(g, 3.7)).unwrap(), 1.0);
        for k in [2.0, 10.0, 300.0] {
            let w = ScalarGridFunction::from_fn(g, |c| if c < 16 { 1.0 } else { k });
            let fast = fujii_ainfty(&w).unwrap();
            let slow = brute_fujii(&w);
            assert!((fast - slow).abs() < 1e-12 * slow);
        }
        let g2 = GridGeometry::new(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = ScalarGridFunction::from_fn(g2, |_| rng.gen_range(0.2..5.0));
        let fast = fujii_ainfty(&w).unwrap();
        assert!((fast - brute_fujii(&w)).abs() < 1e-12 * fast);
    }

    #[test]
    fn scalar_ap_two_valued_closed_form() {
        // on a two-valued dyadic weight the sup is attained on the root
        let g = GridGeometry::new(1, 4).unwrap();
        for (k, p) in [(4.0, 2.0), (9.0, 3.0), (0.25, 1.5)] {
            let w = ScalarGridFunction::from_fn(g, |c| if c < 8 { 1.0 } else { k });
            let root = 0.5 * (1.0 + k) * (0.5 * (1.0 + f64::powf(k, -1.0 / (p - 1.0)))).powf(p - 1.0);
            assert!((scalar_ap(&w, p).unwrap() - root).abs() < 1e-12 * root);
        }
        assert_eq!(scalar_ap(&ScalarGridFunction::constant(g, 2.0), 2.0).unwrap(), 1.0);
        assert!(scalar_ap(&ScalarGridFunction::constant(g, 2.0), 1.0).is_err());
    }

    #[test]
    fn reverse_holder_examples() {
        let g = GridGeometry::new(1, 6).unwrap();
        assert_eq!(reverse_holder_ratio(&ScalarGridFunction::constant(g, 5.0), 1.5).unwrap(), 1.0);
        let w = ScalarGridFunction::from_fn(g, |c| ((c as f64 + 0.5) / 64.0).powf(-0.5));
        let a = fujii_ainfty(&w).unwrap();
        let r = rh_exponent(1, a);
        assert!(reverse_holder_ratio(&w, r).unwrap() <= 2.0);
        let mut last = 1.0;
        for r in [1.01, 1.1, 1.5, 2.0, 3.0] {
            let v = reverse_holder_ratio(&w, r).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert!(reverse_holder_ratio(&w, 1.0).is_err());
    }

    #[test]
    fn cz_examples() {
        let g = GridGeometry::new(2, 4).unwrap();
        let zero = ScalarGridFunction::constant(g, 0.0);
        assert!(cz_decompose(&zero, &DyadicCube::root(), 0.125).unwrap().is_empty());
        assert!(cz_decompose(&zero, &DyadicCube::root(), 1.0).is_err());
        let full = ScalarGridFunction::constant(g, 1.0);
        assert_eq!(cz_decompose(&full, &DyadicCube::root(), 0.5).unwrap(), vec![DyadicCube::root()]);
    }
}
