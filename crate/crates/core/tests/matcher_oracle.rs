//! Greedy matcher vs the exact brute-force oracle.

use matchx_core::matcher::{brute_force_match, greedy_match, DistanceMatrix, Metric};
use matchx_core::matrix::Matrix;
use proptest::prelude::*;

fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
        proptest::collection::vec(0.0f64..1.0, n * m).prop_map(move |v| (n, m, v))
    })
}

fn to_dm(n: usize, m: usize, entries: &[f64]) -> DistanceMatrix {
    let rows: Vec<Vec<f64>> = entries.chunks(m).take(n).map(|c| c.to_vec()).collect();
    DistanceMatrix::from_matrix(Matrix::from_rows(rows).unwrap(), Metric::Euclidean).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_never_beats_the_oracle((n, m, entries) in matrix_strategy()) {
        let d = to_dm(n, m, &entries);
        for k in 1..=n.min(m) {
            let g = greedy_match(&d, k).unwrap();
            let b = brute_force_match(&d, k).unwrap();
            prop_assert!(
                g.total_distance >= b.total_distance - 1e-12,
                "greedy {} < oracle {} at k = {k}", g.total_distance, b.total_distance
            );
        }
    }

    #[test]
    fn margins_always_hold((n, m, entries) in matrix_strategy()) {
        let d = to_dm(n, m, &entries);
        let k = n.min(m);
        for c in [greedy_match(&d, k).unwrap(), brute_force_match(&d, k).unwrap()] {
            let rows: std::collections::HashSet<_> = c.pairs.iter().map(|p| p.0).collect();
            let cols: std::collections::HashSet<_> = c.pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(rows.len(), k);
            prop_assert_eq!(cols.len(), k);
            let sum: f64 = c.pairs.iter().map(|&(i, j)| d.values.get(i, j)).sum();
            prop_assert!((sum - c.total_distance).abs() < 1e-12);
        }
    }
}

/// A planted zero permutation is recovered exactly with total zero.
#[test]
fn greedy_recovers_unique_zero_permutations() {
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
    for _ in 0..50 {
        let n = rng.gen_range(2..=6);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if perm[i] == j {
                            0.0
                        } else {
                            rng.gen_range(1.0..2.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let d = DistanceMatrix::from_matrix(Matrix::from_rows(rows).unwrap(), Metric::Euclidean)
            .unwrap();
        let g = greedy_match(&d, n).unwrap();
        assert!(g.total_distance.abs() < 1e-12);
        for &(i, j) in &g.pairs {
            assert_eq!(perm[i], j);
        }
        let b = brute_force_match(&d, n).unwrap();
        assert!((g.total_distance - b.total_distance).abs() < 1e-12);
    }
}
