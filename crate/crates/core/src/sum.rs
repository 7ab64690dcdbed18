//! Pairwise summation. Every reduction in the crate goes through here so that
//! results do not depend on evaluation order.

const BLOCK: usize = 16;

/// Pairwise sum of `term(i)` for `i` in `0..n`.
pub fn tree_sum(n: usize, term: &impl Fn(usize) -> f64) -> f64 {
    tree_range(0, n, term)
}

fn tree_range(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= BLOCK {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += term(i);
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        tree_range(lo, mid, term) + tree_range(mid, hi, term)
    }
}

pub fn pairwise(xs: &[f64]) -> f64 {
    tree_sum(xs.len(), &|i| xs[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&xs), 499500.0);
        assert_eq!(pairwise(&[]), 0.0);
    }

    #[test]
    fn beats_naive_on_ill_conditioned_sum() {
        let xs = vec![0.1; 1 << 20];
        let exact = 0.1 * (1u64 << 20) as f64;
        let naive: f64 = xs.iter().sum();
        assert!((pairwise(&xs) - exact).abs() <= (naive - exact).abs());
    }
}
