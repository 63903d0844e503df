//! Exhaustive subset search with deterministic parallel reduction.

use itertools::Itertools;
use rayon::prelude::*;

const CHUNK: usize = 4096;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Scans the size-`size` subsets of `0..n` in lexicographic order and returns
/// the first one satisfying `hit`, together with the number of subsets examined
/// (up to and including the hit). Chunks are evaluated in parallel but the
/// result is the same as a sequential scan.
pub fn first_subset<F>(n: usize, size: usize, hit: F) -> (Option<Vec<usize>>, u128)
where
    F: Fn(&[usize]) -> bool + Sync,
{
    let mut examined = 0u128;
    let mut combos = (0..n).combinations(size);
    loop {
        let chunk: Vec<Vec<usize>> = combos.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            return (None, examined);
        }
        if let Some(pos) = chunk.par_iter().position_first(|s| hit(s)) {
            examined += pos as u128 + 1;
            return (Some(chunk[pos].clone()), examined);
        }
        examined += chunk.len() as u128;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(27, 5), 80730);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn first_subset_is_lexicographic() {
        let (hit, seen) = first_subset(6, 2, |s| s.contains(&3));
        assert_eq!(hit, Some(vec![0, 3]));
        assert_eq!(seen, 3);
        let (hit, seen) = first_subset(5, 3, |_| false);
        assert_eq!(hit, None);
        assert_eq!(seen, 10);
        let (hit, _) = first_subset(4, 0, |s| s.is_empty());
        assert_eq!(hit, Some(vec![]));
    }
}
