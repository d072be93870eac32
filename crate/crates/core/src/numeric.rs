//! Summation helpers.
//!
//! Metric totals run over up to `10^5` requests, so plain left-to-right
//! accumulation is replaced by two schemes:
//!
//! * [`CompensatedSum`], a running Neumaier sum for streaming totals;
//! * [`pairwise_sum`], a fixed-shape pairwise reduction over an index range.
//!   The tree depends only on the length, so the result is identical whether
//!   the halves run on one thread or many. Every operation in the tree is a
//!   rounded addition, which keeps the sum monotone in each term: raising
//!   one term never lowers the total. The equilibrium solver relies on that.

use rayon::join;

/// Running sum with Neumaier compensation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let total = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - total) + value;
        } else {
            self.compensation += (value - total) + self.sum;
        }
        self.sum = total;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

const LEAF: usize = 256;
const PARALLEL_CUTOFF: usize = 8192;

/// Sums `term(k)` for `k` in `0..len` with a fixed pairwise tree.
pub fn pairwise_sum<F>(len: usize, term: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    pairwise_range(0, len, term)
}

fn pairwise_range<F>(start: usize, end: usize, term: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let len = end - start;
    if len <= LEAF {
        let mut acc = 0.0;
        for k in start..end {
            acc += term(k);
        }
        return acc;
    }
    let mid = start + len / 2;
    let (left, right) = if len >= PARALLEL_CUTOFF {
        join(|| pairwise_range(start, mid, term), || pairwise_range(mid, end, term))
    } else {
        (pairwise_range(start, mid, term), pairwise_range(mid, end, term))
    };
    left + right
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn pairwise_matches_exact_integer_sum() {
        let n = 100_003;
        let s = pairwise_sum(n, &|k| k as f64);
        assert_eq!(s, (n as f64 - 1.0) * n as f64 / 2.0);
        assert_eq!(pairwise_sum(0, &|_| 1.0), 0.0);
    }

    #[test]
    fn pairwise_is_deterministic_and_monotone() {
        let terms: Vec<f64> = (0..50_000).map(|k| ((k * 7919) % 1013) as f64 * 0.1).collect();
        let base = pairwise_sum(terms.len(), &|k| terms[k]);
        assert_eq!(base, pairwise_sum(terms.len(), &|k| terms[k]));
        let bumped = pairwise_sum(terms.len(), &|k| if k == 777 { terms[k] + 1e-9 } else { terms[k] });
        assert!(bumped >= base);
    }
}
