//! Property tests for the toolkit's core invariants: discretization always
//! yields feasible assignments, the exact solvers agree with exhaustion,
//! optimality is a true lower bound, the doubly-stochastic baseline respects
//! its algebraic symmetries, pruning retains a predictable edge budget, and
//! early training makes monotone progress.

use lapforge::datagen::{self, generate, DatasetSpec};
use lapforge::graph::build_graph;
use lapforge::model::ModelConfig;
use lapforge::solvers::{brute_force, hungarian, sinkhorn, SinkhornConfig};
use lapforge::trainer::{train, TrainConfig};
use lapforge::{
    greedy_discretize, precision, total_cost, validate_permutation, AssignmentMatrix, CostMatrix,
    ScoreMatrix,
};
use proptest::prelude::*;

/// Scores in [0, 1] with deliberate mass on exact ties.
fn score_entry() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => 0.0f64..1.0,
        1 => Just(0.5f64),
        1 => Just(0.0f64),
        1 => Just(1.0f64),
    ]
}

/// (n, row-major values) for a random score matrix.
fn score_case(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(score_entry(), n * n)))
}

/// (n, row-major values) for a random cost matrix; `quantized` collapses the
/// values onto a coarse grid so optima are frequently non-unique.
fn cost_case(min_n: usize, max_n: usize, quantized: bool) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (min_n..=max_n).prop_flat_map(move |n| {
        let entry = if quantized {
            (0u8..=3).prop_map(|q| f64::from(q) * 0.25).boxed()
        } else {
            (0.0f64..1.0).boxed()
        };
        (Just(n), prop::collection::vec(entry, n * n))
    })
}

/// A uniformly random permutation of 0..n driven by proptest indices
/// (Fisher–Yates, one draw per position).
fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(any::<prop::sample::Index>(), n).prop_map(move |picks| {
        let mut jobs: Vec<usize> = (0..n).collect();
        for (i, pick) in picks.iter().enumerate().rev() {
            jobs.swap(i, pick.index(i + 1));
        }
        jobs
    })
}

proptest! {
    /// Whatever the scores — ties, zeros, saturated entries — greedy
    /// discretization must return a feasible assignment.
    #[test]
    fn greedy_always_emits_a_valid_permutation((n, values) in score_case(10)) {
        let scores = ScoreMatrix::new(n, values).unwrap();
        let assignment = greedy_discretize(&scores);
        prop_assert!(validate_permutation(n, &assignment.to_dense()));
    }

    /// precision(X, X) = 1 and precision is symmetric in its arguments.
    #[test]
    fn precision_is_reflexive_and_symmetric(
        jobs_a in (2usize..=9).prop_flat_map(permutation),
        seed in any::<u64>(),
    ) {
        let n = jobs_a.len();
        let a = AssignmentMatrix::from_permutation(jobs_a).unwrap();
        // Derive a second permutation of the same size from the seed.
        let jobs_b: Vec<usize> = {
            let mut jobs: Vec<usize> = (0..n).collect();
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                jobs.swap(i, (state >> 33) as usize % (i + 1));
            }
            jobs
        };
        let b = AssignmentMatrix::from_permutation(jobs_b).unwrap();
        prop_assert_eq!(precision(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(
            precision(&a, &b).unwrap().to_bits(),
            precision(&b, &a).unwrap().to_bits()
        );
    }

    /// The exact solver's cost is a lower bound over every feasible
    /// assignment, and it agrees with exhaustive search to the bit even on
    /// tie-riddled inputs.
    #[test]
    fn exact_cost_is_a_lower_bound_and_matches_exhaustion(
        (n, values) in cost_case(2, 7, false),
        pick in any::<prop::sample::Index>(),
    ) {
        let c = CostMatrix::new(n, values).unwrap();
        let fast = hungarian(&c);
        let exhaustive = brute_force(&c).unwrap();
        let best = total_cost(&c, &fast).unwrap();
        prop_assert_eq!(best, total_cost(&c, &exhaustive).unwrap());

        // A random competitor permutation can never undercut the optimum.
        let mut jobs: Vec<usize> = (0..n).collect();
        let mut state = pick.index(usize::MAX) as u64;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            jobs.swap(i, (state >> 33) as usize % (i + 1));
        }
        let competitor = AssignmentMatrix::from_permutation(jobs).unwrap();
        prop_assert!(total_cost(&c, &competitor).unwrap() >= best - 1e-12);
    }

    /// Degenerate costs (many exact ties) must not break the agreement.
    #[test]
    fn exact_solvers_agree_on_quantized_costs((n, values) in cost_case(2, 6, true)) {
        let c = CostMatrix::new(n, values).unwrap();
        let fast = total_cost(&c, &hungarian(&c)).unwrap();
        let exhaustive = total_cost(&c, &brute_force(&c).unwrap()).unwrap();
        prop_assert_eq!(fast, exhaustive);
    }

    /// Per-agent pruning keeps exactly n·min(t, n) edges.
    #[test]
    fn pruning_retains_exactly_n_times_min_t_n_edges(
        (n, values) in cost_case(1, 14, false),
        t in 1usize..=18,
    ) {
        let c = CostMatrix::new(n, values).unwrap();
        let graph = build_graph(&c, t).unwrap();
        prop_assert_eq!(graph.edge_count(), n * t.min(n));
    }

    /// Scaling every cost by the same positive factor must not change the
    /// doubly-stochastic baseline's output: the profit kernel is positively
    /// homogeneous and normalization cancels the common factor.
    #[test]
    fn sinkhorn_is_invariant_to_positive_scaling(
        (n, values) in cost_case(2, 8, false),
        factor in 0.1f64..10.0,
    ) {
        let c = CostMatrix::new(n, values).unwrap();
        let scaled = c.scaled(factor).unwrap();
        let cfg = SinkhornConfig::default();
        let plain = sinkhorn(&c, &cfg).unwrap();
        let rescaled = sinkhorn(&scaled, &cfg).unwrap();
        for (a, b) in plain.values().iter().zip(rescaled.values()) {
            prop_assert!((a - b).abs() < 1e-9, "entries {a} vs {b} diverged");
        }
    }
}

/// Early training makes progress: over the first five epochs the mean
/// combined loss may rise at most once, and that rise stays under 5%.
#[test]
fn early_training_loss_is_nearly_non_increasing() {
    let spec = DatasetSpec {
        sizes: vec![5, 10, 15],
        samples_per_size: 20,
        seed: 4242,
        ..DatasetSpec::default()
    };
    let data = generate(&spec).unwrap();
    let (train_set, eval_set) = datagen::split(&data, 0.3, 4242).unwrap();
    let cfg = TrainConfig { epochs: 5, seed: 4242, ..TrainConfig::default() };
    let outcome = train(&train_set, &eval_set, &ModelConfig::default(), &cfg).unwrap();

    let combined: Vec<f64> = outcome
        .history
        .iter()
        .map(|e| e.mean_bce + e.alpha * e.mean_constraint)
        .collect();
    assert_eq!(combined.len(), 5);
    let mut rises = 0;
    for pair in combined.windows(2) {
        if pair[1] > pair[0] {
            rises += 1;
            let growth = (pair[1] - pair[0]) / pair[0];
            assert!(
                growth <= 0.05,
                "epoch loss rose {:.1}% ({} -> {}), over the 5% allowance",
                growth * 100.0,
                pair[0],
                pair[1],
            );
        }
    }
    assert!(rises <= 1, "loss rose {rises} times in 5 epochs: {combined:?}");
}
