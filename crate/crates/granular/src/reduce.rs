//! Reductions whose rounding does not depend on the number of threads.

const LEAF: usize = 512;
const PAR_MIN: usize = 1 << 15;

/// `sum_{i < n} f(i)` over a fixed binary tree with sequential leaves of even size.
pub fn tree_sum<F: Fn(usize) -> f64 + Sync>(n: usize, f: &F) -> f64 {
    range_sum(0, n, f)
}

fn range_sum<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
    let len = hi - lo;
    if len <= LEAF {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        return s;
    }
    let mid = lo + (len / 2).div_ceil(LEAF) * LEAF;
    if len >= PAR_MIN {
        let (a, b) = rayon::join(|| range_sum(lo, mid, f), || range_sum(mid, hi, f));
        a + b
    } else {
        range_sum(lo, mid, f) + range_sum(mid, hi, f)
    }
}

/// Componentwise [`tree_sum`] of a 3-vector valued function.
pub fn tree_sum3<F: Fn(usize) -> [f64; 3] + Sync>(n: usize, f: &F) -> [f64; 3] {
    [tree_sum(n, &|i| f(i)[0]), tree_sum(n, &|i| f(i)[1]), tree_sum(n, &|i| f(i)[2])]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e3 + 1e-7 * i as f64;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| tree_sum(200_000, &f));
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| tree_sum(200_000, &f));
        assert_eq!(one.to_bits(), four.to_bits());
        let naive: f64 = (0..200_000).map(f).sum();
        assert!((one - naive).abs() < 1e-6);
    }

    #[test]
    fn antithetic_pairs_cancel_exactly() {
        let x: Vec<f64> = (0..10_001).map(|i| if i == 10_000 { 0.0 } else { let g = ((i / 2) as f64 * 1.7).cos() * 3.1; if i % 2 == 0 { g } else { -g } }).collect();
        assert_eq!(tree_sum(x.len(), &|i| x[i]), 0.0);
    }
}
