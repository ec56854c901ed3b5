//! Permutation test of equal mean productivity across size groups.
//!
//! The statistic is the between-group dispersion Σ n_g (mean_g − mean)².
//! Permutations reshuffle the pooled values across groups of fixed size.
//! They run in fixed-size batches, each drawing from its own ChaCha stream
//! of the seed, so the p-value does not depend on the thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::numeric::{self, CompensatedSum};

use super::StatsError;

pub const MIN_PERMUTATIONS: usize = 999;
const BATCH: usize = 256;

/// Σ n_g (mean_g − grand mean)² over consecutive chunks of `values`.
fn dispersion_chunks(values: &[f64], sizes: &[usize], grand_mean: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut start = 0;
    for &len in sizes {
        let chunk = &values[start..start + len];
        start += len;
        if len == 0 {
            continue;
        }
        let m = numeric::compensated_sum(chunk.iter().copied()) / len as f64;
        acc.add(len as f64 * (m - grand_mean) * (m - grand_mean));
    }
    acc.value()
}

/// Between-group dispersion of the given groups.
pub fn between_group_dispersion(groups: &[Vec<f64>]) -> f64 {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = numeric::mean(&pooled).unwrap_or(0.0);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    dispersion_chunks(&pooled, &sizes, grand)
}

fn at_least(stat: f64, observed: f64) -> bool {
    stat >= observed - 1e-10 * observed.abs().max(f64::MIN_POSITIVE)
}

/// p-value `(1 + #{permuted ≥ observed}) / (1 + n_permutations)`.
///
/// Fewer than two non-empty groups, or all values equal, give p = 1.
pub fn npc_test(groups: &[Vec<f64>], n_permutations: usize, seed: u64) -> Result<f64, StatsError> {
    if n_permutations < MIN_PERMUTATIONS {
        return Err(StatsError::TooFewPermutations(n_permutations));
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Ok(1.0);
    }
    // canonical pooled order makes the test blind to group relabeling
    let pooled = numeric::sorted(&groups.iter().flatten().copied().collect::<Vec<_>>());
    if pooled.first() == pooled.last() {
        return Ok(1.0);
    }
    let grand = numeric::mean(&pooled).expect("non-empty");
    let observed = between_group_dispersion(groups);

    let n_batches = n_permutations.div_ceil(BATCH);
    let hits: usize = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(n_permutations - b * BATCH);
            let mut work = pooled.clone();
            let mut hits = 0;
            for _ in 0..count {
                work.copy_from_slice(&pooled);
                work.shuffle(&mut rng);
                if at_least(dispersion_chunks(&work, &sizes, grand), observed) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok((1 + hits) as f64 / (1 + n_permutations) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_group_is_p_one() {
        assert_eq!(npc_test(&[vec![3.0; 6]], 999, 1).unwrap(), 1.0);
    }

    #[test]
    fn identical_values_are_p_one() {
        let g = vec![vec![2.0; 3]; 4];
        assert_eq!(npc_test(&g, 999, 1).unwrap(), 1.0);
    }

    #[test]
    fn rejects_small_permutation_counts() {
        assert!(matches!(
            npc_test(&[vec![1.0], vec![2.0]], 100, 1),
            Err(StatsError::TooFewPermutations(100))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let g = vec![
            vec![1.0, 2.0, 3.5],
            vec![2.0, 2.5, 4.0],
            vec![0.5, 3.0, 1.0],
            vec![5.0, 4.5, 3.0],
        ];
        let a = npc_test(&g, 1999, 42).unwrap();
        let b = npc_test(&g, 1999, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn well_separated_groups() {
        // four groups of five; the last sits far above the rest
        let g: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                (0..5)
                    .map(|i| if k == 3 { 10.0 } else { 0.0 } + 0.001 * i as f64 + 0.0001 * k as f64)
                    .collect()
            })
            .collect();
        let p = npc_test(&g, 9999, 3).unwrap();
        assert!(p <= 0.01, "p = {p}");
    }

    #[test]
    fn dispersion_matches_definition() {
        let g = vec![vec![1.0, 3.0], vec![5.0, 7.0, 9.0]];
        // means 2 and 7, grand 5: 2*9 + 3*4 = 30
        assert!((between_group_dispersion(&g) - 30.0).abs() < 1e-12);
    }
}
