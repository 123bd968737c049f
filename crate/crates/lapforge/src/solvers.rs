//! Exact assignment solvers (shortest-augmenting-path Hungarian and an
//! exhaustive oracle) plus the doubly-stochastic normalization baseline.

use crate::assignment::{AssignmentMatrix, CostMatrix, ScoreMatrix};
use crate::error::{LapError, Result};

/// Largest size `brute_force` will exhaust (9! = 362,880 permutations).
pub const BRUTE_FORCE_LIMIT: usize = 9;

/// Enumerates all n! permutations in lexicographic order and returns the
/// first minimizer encountered (strict improvement keeps the
/// lexicographically smallest optimum on ties).
pub fn brute_force(c: &CostMatrix) -> Result<AssignmentMatrix> {
    let n = c.size();
    if n > BRUTE_FORCE_LIMIT {
        return Err(LapError::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut best_cost = f64::INFINITY;
    let mut best = vec![0usize; n];
    let mut current = vec![0usize; n];
    let mut used = vec![false; n];
    fn descend(
        c: &CostMatrix,
        row: usize,
        acc: f64,
        current: &mut [usize],
        used: &mut [bool],
        best_cost: &mut f64,
        best: &mut [usize],
    ) {
        let n = c.size();
        if row == n {
            if acc < *best_cost {
                *best_cost = acc;
                best.copy_from_slice(current);
            }
            return;
        }
        for job in 0..n {
            if used[job] {
                continue;
            }
            used[job] = true;
            current[row] = job;
            descend(c, row + 1, acc + c.get(row, job), current, used, best_cost, best);
            used[job] = false;
        }
    }
    descend(c, 0, 0.0, &mut current, &mut used, &mut best_cost, &mut best);
    AssignmentMatrix::from_permutation(best)
}

/// O(n³) Hungarian solver via shortest augmenting paths with dual
/// potentials (Jonker–Volgenant style).
pub fn hungarian(c: &CostMatrix) -> AssignmentMatrix {
    let n = c.size();
    // 1-based internally; index 0 is the virtual root of each augmentation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1]; // row matched to each column
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        // Unwind the alternating path.
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut job_of = vec![0usize; n];
    for j in 1..=n {
        job_of[row_of[j] - 1] = j - 1;
    }
    AssignmentMatrix::from_permutation(job_of).expect("augmenting paths yield a bijection")
}

/// Settings for [`sinkhorn`]: `temperature` is the additive smoothing scale
/// of the profit kernel, `tolerance` bounds the worst marginal deviation at
/// convergence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornConfig {
    pub temperature: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { temperature: 0.1, max_iterations: 100, tolerance: 1e-6 }
    }
}

impl SinkhornConfig {
    fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(LapError::Config(format!(
                "sinkhorn temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        if self.tolerance <= 0.0 || !self.tolerance.is_finite() {
            return Err(LapError::Config(format!(
                "sinkhorn tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(LapError::Config("sinkhorn max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Alternates row and column normalization of a kernel matrix in place
/// until every row sum is within `tolerance` of 1 (column sums are exact
/// right after a column step) or `max_iterations` is reached.
pub(crate) fn balance(k: &mut [f64], n: usize, max_iterations: usize, tolerance: f64) -> Result<()> {
    for _ in 0..max_iterations {
        for i in 0..n {
            let row = &mut k[i * n..(i + 1) * n];
            let sum: f64 = row.iter().sum();
            if !sum.is_finite() || sum <= 0.0 {
                return Err(LapError::Degenerate(format!("row {i} sum {sum} during normalization")));
            }
            for x in row {
                *x /= sum;
            }
        }
        for j in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                sum += k[i * n + j];
            }
            if !sum.is_finite() || sum <= 0.0 {
                return Err(LapError::Degenerate(format!("column {j} sum {sum} during normalization")));
            }
            for i in 0..n {
                k[i * n + j] /= sum;
            }
        }
        let mut deviation = 0.0f64;
        for i in 0..n {
            let sum: f64 = k[i * n..(i + 1) * n].iter().sum();
            deviation = deviation.max((sum - 1.0).abs());
        }
        if deviation < tolerance {
            break;
        }
    }
    Ok(())
}

/// Doubly-stochastic assignment baseline: builds the profit kernel
/// P_ij = (C_max − C_ij) + temperature·(C_max − C_min), then balances rows
/// and columns. Larger scores mean more attractive assignments; the output
/// is invariant to positive scaling of `C`. A constant matrix short-circuits
/// to the uniform 1/n matrix.
pub fn sinkhorn(c: &CostMatrix, cfg: &SinkhornConfig) -> Result<ScoreMatrix> {
    cfg.validate()?;
    let n = c.size();
    let (mut cmax, mut cmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for &x in c.values() {
        cmax = cmax.max(x);
        cmin = cmin.min(x);
    }
    if cmax == cmin {
        return ScoreMatrix::new(n, vec![1.0 / n as f64; n * n]);
    }
    let smoothing = cfg.temperature * (cmax - cmin);
    let mut k: Vec<f64> = c.values().iter().map(|&x| (cmax - x) + smoothing).collect();
    balance(&mut k, n, cfg.max_iterations, cfg.tolerance)?;
    ScoreMatrix::new(n, k)
}
