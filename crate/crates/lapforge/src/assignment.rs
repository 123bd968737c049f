//! Problem-instance types, permutation validation, total cost, the
//! assignment-precision metric, and greedy discretization of soft scores.

use crate::error::{LapError, Result};

/// Square cost table `C`, row-major; every entry finite.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(LapError::Config("cost matrix size must be at least 1".into()));
        }
        if values.len() != n * n {
            return Err(LapError::SizeMismatch { left: values.len(), right: n * n });
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LapError::NonFinite { row: k / n, col: k % n });
            }
        }
        Ok(Self { n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Multiplies every entry by `factor` (> 0). Positive scaling preserves
    /// the optimal assignment set.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor <= 0.0 || !factor.is_finite() {
            return Err(LapError::Config(format!("scale factor must be positive and finite, got {factor}")));
        }
        CostMatrix::new(self.n, self.values.iter().map(|v| v * factor).collect())
    }
}

/// A permutation matrix, stored as the assigned job index per agent.
/// Valid by construction: `job_of` is always a bijection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentMatrix {
    job_of: Vec<usize>,
}

impl AssignmentMatrix {
    pub fn from_permutation(job_of: Vec<usize>) -> Result<Self> {
        let n = job_of.len();
        if n == 0 {
            return Err(LapError::NotAPermutation("empty assignment".into()));
        }
        let mut seen = vec![false; n];
        for (agent, &job) in job_of.iter().enumerate() {
            if job >= n {
                return Err(LapError::NotAPermutation(format!(
                    "agent {agent} assigned out-of-range job {job}"
                )));
            }
            if seen[job] {
                return Err(LapError::NotAPermutation(format!("job {job} assigned twice")));
            }
            seen[job] = true;
        }
        Ok(Self { job_of })
    }

    pub fn identity(n: usize) -> Self {
        Self { job_of: (0..n).collect() }
    }

    pub fn size(&self) -> usize {
        self.job_of.len()
    }

    #[inline]
    pub fn job_of(&self, agent: usize) -> usize {
        self.job_of[agent]
    }

    pub fn jobs(&self) -> &[usize] {
        &self.job_of
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.job_of[i] == j {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n * n];
        for (i, &j) in self.job_of.iter().enumerate() {
            out[i * n + j] = 1.0;
        }
        out
    }
}

/// Soft assignment scores in [0, 1]; produced by the learnable solver
/// (zeros at pruned positions) or by doubly-stochastic normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(LapError::SizeMismatch { left: values.len(), right: n * n });
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LapError::NonFinite { row: k / n, col: k % n });
            }
            if *v < 0.0 || *v > 1.0 {
                return Err(LapError::Numeric(format!(
                    "score {} at ({}, {}) outside [0, 1]",
                    v,
                    k / n,
                    k % n
                )));
            }
        }
        Ok(Self { n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// True iff `entries` (row-major n×n) is exactly a permutation matrix:
/// binary entries, unit row sums, unit column sums.
pub fn validate_permutation(n: usize, entries: &[f64]) -> bool {
    if entries.len() != n * n {
        return false;
    }
    let mut row_counts = vec![0usize; n];
    let mut col_counts = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            let v = entries[i * n + j];
            if v == 1.0 {
                row_counts[i] += 1;
                col_counts[j] += 1;
            } else if v != 0.0 {
                return false;
            }
        }
    }
    row_counts.iter().all(|&c| c == 1) && col_counts.iter().all(|&c| c == 1)
}

/// Total assignment cost Σ C_ij·X_ij.
pub fn total_cost(c: &CostMatrix, x: &AssignmentMatrix) -> Result<f64> {
    if c.size() != x.size() {
        return Err(LapError::SizeMismatch { left: c.size(), right: x.size() });
    }
    Ok((0..c.size()).map(|i| c.get(i, x.job_of(i))).sum())
}

/// Fraction of agents assigned identically in `y` and `ygt`
/// (tr(YᵀYgt)/n; the denominator tr(YgtᵀYgt) equals n).
pub fn precision(y: &AssignmentMatrix, ygt: &AssignmentMatrix) -> Result<f64> {
    if y.size() != ygt.size() {
        return Err(LapError::SizeMismatch { left: y.size(), right: ygt.size() });
    }
    let matches = y
        .jobs()
        .iter()
        .zip(ygt.jobs())
        .filter(|(a, b)| a == b)
        .count();
    Ok(matches as f64 / y.size() as f64)
}

/// Converts soft scores to a permutation by repeatedly taking the largest
/// remaining entry and eliminating its row and column. Ties break toward
/// the smaller row index, then the smaller column index.
pub fn greedy_discretize(s: &ScoreMatrix) -> AssignmentMatrix {
    let n = s.size();
    // Visiting cells in (value desc, row asc, col asc) order and taking each
    // cell whose row and column are both free is equivalent to iterated
    // global-max selection with the same tie-break.
    let mut order: Vec<u32> = (0..(n * n) as u32).collect();
    let values = s.values();
    order.sort_unstable_by(|&a, &b| {
        values[b as usize]
            .total_cmp(&values[a as usize])
            .then(a.cmp(&b))
    });
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut job_of = vec![usize::MAX; n];
    let mut placed = 0;
    for cell in order {
        let (i, j) = ((cell as usize) / n, (cell as usize) % n);
        if row_used[i] || col_used[j] {
            continue;
        }
        row_used[i] = true;
        col_used[j] = true;
        job_of[i] = j;
        placed += 1;
        if placed == n {
            break;
        }
    }
    AssignmentMatrix { job_of }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(n: usize, v: &[f64]) -> CostMatrix {
        CostMatrix::new(n, v.to_vec()).unwrap()
    }

    #[test]
    fn total_cost_zero_matrix() {
        let c = cm(3, &[0.0; 9]);
        let x = AssignmentMatrix::from_permutation(vec![2, 0, 1]).unwrap();
        assert_eq!(total_cost(&c, &x).unwrap(), 0.0);
    }

    #[test]
    fn total_cost_diagonal_free() {
        // Zero diagonal, unit off-diagonal: identity costs nothing.
        let mut v = vec![1.0; 9];
        for i in 0..3 {
            v[i * 3 + i] = 0.0;
        }
        let c = cm(3, &v);
        assert_eq!(total_cost(&c, &AssignmentMatrix::identity(3)).unwrap(), 0.0);
    }

    #[test]
    fn total_cost_size_mismatch() {
        let c = cm(2, &[0.0; 4]);
        let x = AssignmentMatrix::identity(3);
        assert!(matches!(total_cost(&c, &x), Err(LapError::SizeMismatch { .. })));
    }

    #[test]
    fn cost_matrix_rejects_non_finite() {
        assert!(matches!(
            CostMatrix::new(2, vec![0.0, 1.0, f64::NAN, 2.0]),
            Err(LapError::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn precision_identity_and_half() {
        let a = AssignmentMatrix::from_permutation(vec![1, 0, 3, 2]).unwrap();
        assert_eq!(precision(&a, &a).unwrap(), 1.0);
        // Agrees on agents 0 and 1 only.
        let b = AssignmentMatrix::from_permutation(vec![1, 0, 2, 3]).unwrap();
        assert_eq!(precision(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn precision_is_symmetric() {
        let a = AssignmentMatrix::from_permutation(vec![2, 1, 0]).unwrap();
        let b = AssignmentMatrix::from_permutation(vec![0, 1, 2]).unwrap();
        assert_eq!(precision(&a, &b).unwrap(), precision(&b, &a).unwrap());
    }

    #[test]
    fn validate_permutation_cases() {
        let id = AssignmentMatrix::identity(3).to_dense();
        assert!(validate_permutation(3, &id));
        // Duplicated column assignment.
        assert!(!validate_permutation(2, &[1.0, 0.0, 1.0, 0.0]));
        // Doubly stochastic but non-binary.
        assert!(!validate_permutation(2, &[0.5, 0.5, 0.5, 0.5]));
    }

    #[test]
    fn from_permutation_rejects_duplicates() {
        assert!(AssignmentMatrix::from_permutation(vec![0, 0]).is_err());
        assert!(AssignmentMatrix::from_permutation(vec![0, 2]).is_err());
    }

    #[test]
    fn greedy_basic() {
        let s = ScoreMatrix::new(2, vec![0.9, 0.1, 0.8, 0.2]).unwrap();
        assert_eq!(greedy_discretize(&s).jobs(), &[0, 1]);
    }

    #[test]
    fn greedy_fixes_permutation_matrices() {
        let p = AssignmentMatrix::from_permutation(vec![1, 2, 0]).unwrap();
        let s = ScoreMatrix::new(3, p.to_dense()).unwrap();
        assert_eq!(greedy_discretize(&s), p);
    }

    #[test]
    fn greedy_tie_break_is_row_then_col() {
        let s = ScoreMatrix::new(3, vec![0.5; 9]).unwrap();
        assert_eq!(greedy_discretize(&s).jobs(), &[0, 1, 2]);
    }

    #[test]
    fn score_matrix_rejects_out_of_range() {
        assert!(ScoreMatrix::new(1, vec![1.5]).is_err());
        assert!(ScoreMatrix::new(1, vec![-0.1]).is_err());
        assert!(ScoreMatrix::new(1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn scaled_preserves_shape_and_scales_entries() {
        let c = cm(2, &[0.25, 0.5, 0.75, 1.0]);
        let s = c.scaled(4.0).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(c.scaled(0.0).is_err());
        assert!(c.scaled(-1.0).is_err());
    }
}
