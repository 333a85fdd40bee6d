//! Node-correspondence matching: pairwise distance matrices, the greedy
//! K-round matcher, and an exact brute-force oracle used to test it.
//!
//! A correspondence is a partial injection between the node sets of two
//! graphs; its cost is the sum of the matched entries of the distance
//! matrix. The greedy matcher repeatedly commits the globally smallest
//! remaining entry, which is fast (K rounds) but not optimal; the oracle
//! enumerates every size-K injection so tests can quantify the gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{euclidean, hamming, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Hamming,
}

impl Metric {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Hamming => hamming(a, b),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "hamming" => Ok(Metric::Hamming),
            other => Err(Error::ParseError(format!("unknown metric {other:?}"))),
        }
    }
}

/// All pairwise distances between the rows of two embedding matrices.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub values: Matrix,
    pub metric: Metric,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix; entries must be finite and non-negative.
    pub fn from_matrix(values: Matrix, metric: Metric) -> Result<Self> {
        if values.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::ShapeError(
                "distance matrix entries must be finite and non-negative".into(),
            ));
        }
        Ok(DistanceMatrix { values, metric })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }
}

/// An ordered list of matched `(i, j)` pairs with all `i` distinct and all
/// `j` distinct, plus the summed distance. Greedy output keeps selection
/// order; the oracle keeps row-ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
    pub total_distance: f64,
}

/// Distance between every row of `a` and every row of `b`.
pub fn pairwise_distances(a: &Matrix, b: &Matrix, metric: Metric) -> Result<DistanceMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::ShapeError(format!(
            "feature widths differ: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut values = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            values.set(i, j, metric.eval(a.row(i), b.row(j)));
        }
    }
    Ok(DistanceMatrix { values, metric })
}

fn check_budget(d: &DistanceMatrix, k: usize) -> Result<()> {
    let cap = d.rows().min(d.cols());
    if k == 0 || k > cap {
        return Err(Error::BudgetError(format!(
            "K = {k} must be in [1, {cap}] for a {}x{} matrix",
            d.rows(),
            d.cols()
        )));
    }
    Ok(())
}

/// K rounds of globally-minimal selection: each round commits the smallest
/// remaining entry `(i, j)` (ties broken by smallest `(i, j)`), then retires
/// row `i` and column `j`.
pub fn greedy_match(d: &DistanceMatrix, k: usize) -> Result<Correspondence> {
    check_budget(d, k)?;
    let (n, m) = (d.rows(), d.cols());
    let mut row_free = vec![true; n];
    let mut col_free = vec![true; m];
    let mut pairs = Vec::with_capacity(k);
    let mut total = 0.0;
    for _ in 0..k {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| row_free[i]) {
            for j in (0..m).filter(|&j| col_free[j]) {
                let v = d.values.get(i, j);
                // Row-major scan: strict < keeps the lexicographically
                // smallest (i, j) among ties.
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((i, j, v));
                }
            }
        }
        let (i, j, v) = best.expect("k <= min(n, m) guarantees a free cell");
        row_free[i] = false;
        col_free[j] = false;
        pairs.push((i, j));
        total += v;
    }
    Ok(Correspondence {
        pairs,
        total_distance: total,
    })
}

/// Upper bound on the assignments the oracle may enumerate.
const ORACLE_CAP: u128 = 10_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul(n - i) / (i + 1);
    }
    out
}

fn factorial(k: u128) -> u128 {
    (1..=k).fold(1u128, |acc, i| acc.saturating_mul(i))
}

/// Exact minimum-cost size-K partial injection, found by full enumeration.
/// Ties resolve to the lexicographically smallest row-ascending pair list.
pub fn brute_force_match(d: &DistanceMatrix, k: usize) -> Result<Correspondence> {
    check_budget(d, k)?;
    let (n, m) = (d.rows() as u128, d.cols() as u128);
    let count = binomial(n, k as u128)
        .saturating_mul(binomial(m, k as u128))
        .saturating_mul(factorial(k as u128));
    if count > ORACLE_CAP {
        return Err(Error::OracleTooLarge(count, ORACLE_CAP));
    }

    struct Search<'a> {
        d: &'a DistanceMatrix,
        k: usize,
        col_used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best_total: f64,
        best_pairs: Vec<(usize, usize)>,
    }

    impl Search<'_> {
        // Rows are taken in ascending order and columns tried in ascending
        // order, so candidates appear in lexicographic pair-list order and
        // the first strict improvement is the lex-smallest optimum.
        fn recurse(&mut self, next_row: usize, running: f64) {
            if running >= self.best_total {
                return; // entries are non-negative; this branch cannot win
            }
            if self.current.len() == self.k {
                self.best_total = running;
                self.best_pairs = self.current.clone();
                return;
            }
            let remaining = self.k - self.current.len();
            let rows = self.d.rows();
            for i in next_row..rows {
                if rows - i < remaining {
                    break;
                }
                for j in 0..self.d.cols() {
                    if self.col_used[j] {
                        continue;
                    }
                    self.col_used[j] = true;
                    self.current.push((i, j));
                    self.recurse(i + 1, running + self.d.values.get(i, j));
                    self.current.pop();
                    self.col_used[j] = false;
                }
            }
        }
    }

    let mut search = Search {
        d,
        k,
        col_used: vec![false; d.cols()],
        current: Vec::with_capacity(k),
        best_total: f64::INFINITY,
        best_pairs: Vec::new(),
    };
    search.recurse(0, 0.0);

    let total = search
        .best_pairs
        .iter()
        .map(|&(i, j)| d.values.get(i, j))
        .sum();
    Ok(Correspondence {
        pairs: search.best_pairs,
        total_distance: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn dm(rows: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix::from_matrix(Matrix::from_rows(rows).unwrap(), Metric::Euclidean).unwrap()
    }

    #[test]
    fn pairwise_zero_diagonal_and_known_values() {
        let a = Matrix::from_rows(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = pairwise_distances(&a, &a, Metric::Euclidean).unwrap();
        assert_eq!(d.values.get(0, 0), 0.0);
        assert_eq!(d.values.get(1, 1), 0.0);
        assert_eq!(d.values.get(0, 1), 5.0);
        assert_eq!(d.values.get(1, 0), 5.0);

        let b = Matrix::from_rows(vec![vec![1.0, 0.0, 1.0]]).unwrap();
        let c = Matrix::from_rows(vec![vec![1.0, 1.0, 1.0]]).unwrap();
        let h = pairwise_distances(&b, &c, Metric::Hamming).unwrap();
        assert_eq!(h.values.get(0, 0), 1.0);
    }

    #[test]
    fn pairwise_rejects_width_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 4);
        assert!(matches!(
            pairwise_distances(&a, &b, Metric::Euclidean),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn greedy_zero_diagonal() {
        let c = greedy_match(&dm(vec![vec![0.0, 7.0], vec![7.0, 0.0]]), 2).unwrap();
        assert_eq!(c.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(c.total_distance, 0.0);
    }

    #[test]
    fn greedy_happens_to_be_optimal() {
        // Brute force over both 2x2 permutations gives min(1+0, 2+3) = 1.
        let d = dm(vec![vec![1.0, 2.0], vec![3.0, 0.0]]);
        let g = greedy_match(&d, 2).unwrap();
        assert_eq!(g.pairs, vec![(1, 1), (0, 0)]);
        assert_eq!(g.total_distance, 1.0);
        let b = brute_force_match(&d, 2).unwrap();
        assert_eq!(b.total_distance, 1.0);
    }

    #[test]
    fn greedy_documented_suboptimality() {
        // Greedy grabs the 0 at (0,0) and is stuck with 10; the optimum
        // pairs (0,1) with (1,0) for 3.
        let d = dm(vec![vec![0.0, 1.0], vec![2.0, 10.0]]);
        let g = greedy_match(&d, 2).unwrap();
        assert_eq!(g.total_distance, 10.0);
        let b = brute_force_match(&d, 2).unwrap();
        assert_eq!(b.total_distance, 3.0);
        assert_eq!(b.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn greedy_budget_errors() {
        let d = dm(vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert!(matches!(greedy_match(&d, 0), Err(Error::BudgetError(_))));
        assert!(matches!(greedy_match(&d, 3), Err(Error::BudgetError(_))));
    }

    #[test]
    fn greedy_tie_breaks_lexicographically() {
        let d = dm(vec![vec![5.0, 5.0], vec![5.0, 5.0]]);
        let c = greedy_match(&d, 2).unwrap();
        assert_eq!(c.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn greedy_performs_exactly_k_rounds() {
        let d = dm(vec![
            vec![0.3, 0.1, 0.9],
            vec![0.2, 0.8, 0.4],
            vec![0.6, 0.5, 0.7],
        ]);
        for k in 1..=3 {
            assert_eq!(greedy_match(&d, k).unwrap().pairs.len(), k);
        }
    }

    #[test]
    fn brute_force_k1_is_global_min() {
        let d = dm(vec![vec![0.9, 0.4], vec![0.2, 0.8]]);
        let c = brute_force_match(&d, 1).unwrap();
        assert_eq!(c.pairs, vec![(1, 0)]);
        assert_eq!(c.total_distance, 0.2);
    }

    #[test]
    fn brute_force_value_invariant_under_row_permutation() {
        let d = dm(vec![vec![0.0, 1.0], vec![2.0, 10.0]]);
        let p = dm(vec![vec![2.0, 10.0], vec![0.0, 1.0]]);
        assert_eq!(
            brute_force_match(&d, 2).unwrap().total_distance,
            brute_force_match(&p, 2).unwrap().total_distance,
        );
    }

    #[test]
    fn brute_force_rejects_oversized_instances() {
        let d = DistanceMatrix::from_matrix(Matrix::zeros(30, 30), Metric::Euclidean).unwrap();
        assert!(matches!(
            brute_force_match(&d, 15),
            Err(Error::OracleTooLarge(_, _))
        ));
    }

    #[test]
    fn total_matches_pair_sum() {
        let d = dm(vec![
            vec![0.3, 0.1, 0.9],
            vec![0.2, 0.8, 0.4],
            vec![0.6, 0.5, 0.7],
        ]);
        for k in 1..=3 {
            for c in [
                greedy_match(&d, k).unwrap(),
                brute_force_match(&d, k).unwrap(),
            ] {
                let sum: f64 = c.pairs.iter().map(|&(i, j)| d.values.get(i, j)).sum();
                assert!((sum - c.total_distance).abs() < 1e-12);
                let rows: std::collections::HashSet<_> = c.pairs.iter().map(|p| p.0).collect();
                let cols: std::collections::HashSet<_> = c.pairs.iter().map(|p| p.1).collect();
                assert_eq!(rows.len(), k);
                assert_eq!(cols.len(), k);
            }
        }
    }
}
