//! Evaluation and benchmarking harness: per-size precision and wall-time
//! tables, runtime profiles, architecture/loss ablation comparisons, and
//! out-of-distribution generalization studies.
//!
//! Precision work parallelizes across records with ordered sequential
//! aggregation (results are independent of thread count); anything timed
//! runs on the calling thread only.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::assignment::{
    greedy_discretize, precision, total_cost, AssignmentMatrix, CostMatrix,
};
use crate::datagen::{generate, scale_values, Dataset, DatasetSpec};
use crate::error::{LapError, Result};
use crate::loss::LossConfig;
use crate::model::{predict, ModelConfig, ModelParameters};
use crate::solvers::{hungarian, sinkhorn, SinkhornConfig};
use crate::stream::derive_rng;
use crate::trainer::{train, TrainConfig};

/// Timing semantics stamped into every rendered report.
pub const TIMING_FOOTER: &str = "Wall time is measured end to end around each solve call; for the \
learned solver that spans graph construction, encoding, message passing, decoding, and greedy \
discretization. Per-instance times are medians of 3 repeats.";

/// A solver under benchmark.
pub enum Method<'a> {
    /// The learned solver with frozen parameters.
    Glan(&'a ModelParameters),
    Sinkhorn(SinkhornConfig),
    Hungarian,
    /// Uniformly random permutations (reference floor).
    Random { seed: u64 },
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Glan(_) => "glan",
            Method::Sinkhorn(_) => "sinkhorn",
            Method::Hungarian => "hungarian",
            Method::Random { .. } => "random",
        }
    }
}

/// Solve one instance with the given method. `index` keys the derived stream
/// of the random baseline so records stay independent; deterministic methods
/// ignore it.
pub fn solve_record(method: &Method, cost: &CostMatrix, index: usize) -> Result<AssignmentMatrix> {
    match method {
        Method::Glan(params) => {
            let prediction = predict(cost, params)?;
            Ok(greedy_discretize(&prediction.score))
        }
        Method::Sinkhorn(cfg) => Ok(greedy_discretize(&sinkhorn(cost, cfg)?)),
        Method::Hungarian => Ok(hungarian(cost)),
        Method::Random { seed } => {
            let mut rng = derive_rng(*seed, &["bench", "random", &index.to_string()]);
            let mut jobs: Vec<usize> = (0..cost.size()).collect();
            for i in (1..jobs.len()).rev() {
                let j = rng.gen_range(0..=i);
                jobs.swap(i, j);
            }
            AssignmentMatrix::from_permutation(jobs)
        }
    }
}

/// One (size, method) aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub method: String,
    pub samples: usize,
    pub mean_precision: f64,
    pub mean_time_ms: f64,
}

/// Evaluate a method over a dataset: per record, time the solve (median of 3
/// repeats) and score the result against the stored optimum; aggregate means
/// per size. An exact solver that lands on an alternate optimum under cost
/// ties is credited with full precision, since any cost-equal assignment is
/// a correct answer for it.
pub fn evaluate_method(method: &Method, dataset: &Dataset) -> Result<Vec<BenchRow>> {
    if dataset.is_empty() {
        return Err(LapError::Degenerate("cannot benchmark an empty dataset".into()));
    }
    struct Acc {
        precision_sum: f64,
        time_sum_ms: f64,
        count: usize,
    }
    let mut per_size: BTreeMap<usize, Acc> = BTreeMap::new();
    for (index, record) in dataset.records.iter().enumerate() {
        let mut assignment = solve_record(method, &record.cost, index)?;
        let mut times_ms = [0.0f64; 3];
        for slot in &mut times_ms {
            let started = Instant::now();
            assignment = solve_record(method, &record.cost, index)?;
            *slot = started.elapsed().as_secs_f64() * 1e3;
        }
        times_ms.sort_by(f64::total_cmp);

        let mut score = precision(&assignment, &record.optimal)?;
        if matches!(method, Method::Hungarian) && score < 1.0 {
            let found = total_cost(&record.cost, &assignment)?;
            let best = total_cost(&record.cost, &record.optimal)?;
            if (found - best).abs() <= 1e-12 * best.abs().max(1.0) {
                score = 1.0;
            }
        }
        let acc = per_size.entry(record.cost.size()).or_insert(Acc {
            precision_sum: 0.0,
            time_sum_ms: 0.0,
            count: 0,
        });
        acc.precision_sum += score;
        acc.time_sum_ms += times_ms[1];
        acc.count += 1;
    }
    Ok(per_size
        .into_iter()
        .map(|(size, acc)| BenchRow {
            size,
            method: method.name().to_string(),
            samples: acc.count,
            mean_precision: acc.precision_sum / acc.count as f64,
            mean_time_ms: acc.time_sum_ms / acc.count as f64,
        })
        .collect())
}

/// Mean precision across all records of a [`evaluate_method`] row set.
pub fn overall_precision(rows: &[BenchRow]) -> f64 {
    let total: usize = rows.iter().map(|r| r.samples).sum();
    let weighted: f64 = rows
        .iter()
        .map(|r| r.mean_precision * r.samples as f64)
        .sum();
    weighted / total as f64
}

/// Per-size precision of the learned solver over a dataset, plus the overall
/// record mean. Parallel per record; ordered sequential reduction.
pub fn per_size_precision(
    params: &ModelParameters,
    dataset: &Dataset,
) -> Result<(BTreeMap<usize, f64>, f64)> {
    if dataset.is_empty() {
        return Err(LapError::Degenerate("cannot evaluate on an empty dataset".into()));
    }
    let scored: Vec<(usize, f64)> = dataset
        .records
        .par_iter()
        .map(|record| {
            let prediction = predict(&record.cost, params)?;
            let assignment = greedy_discretize(&prediction.score);
            Ok((record.cost.size(), precision(&assignment, &record.optimal)?))
        })
        .collect::<Result<_>>()?;
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut total = 0.0;
    for &(size, p) in &scored {
        let entry = sums.entry(size).or_insert((0.0, 0));
        entry.0 += p;
        entry.1 += 1;
        total += p;
    }
    let per_size = sums
        .into_iter()
        .map(|(size, (sum, count))| (size, sum / count as f64))
        .collect();
    Ok((per_size, total / scored.len() as f64))
}

/// One (size, method) timing aggregate from [`runtime_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub size: usize,
    pub method: String,
    pub samples: usize,
    pub median_ms: f64,
}

/// Minimum instance count per size in a runtime profile.
pub const PROFILE_MIN_INSTANCES: usize = 20;

/// Median end-to-end solve time per size over freshly generated uniform
/// instances. Requests below [`PROFILE_MIN_INSTANCES`] instances are raised
/// to it; timing runs strictly on the calling thread.
pub fn runtime_profile(
    method: &Method,
    sizes: &[usize],
    instances_per_size: usize,
    seed: u64,
) -> Result<Vec<ProfileRow>> {
    if sizes.is_empty() {
        return Err(LapError::Config("runtime profile needs at least one size".into()));
    }
    let instances = instances_per_size.max(PROFILE_MIN_INSTANCES);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut durations = Vec::with_capacity(instances);
        for k in 0..instances {
            let mut rng = derive_rng(seed, &["profile", &size.to_string(), &k.to_string()]);
            let values: Vec<f64> = (0..size * size).map(|_| rng.gen::<f64>()).collect();
            let cost = CostMatrix::new(size, values)?;
            let started = Instant::now();
            let _ = solve_record(method, &cost, k)?;
            durations.push(started.elapsed().as_secs_f64() * 1e3);
        }
        durations.sort_by(f64::total_cmp);
        rows.push(ProfileRow {
            size,
            method: method.name().to_string(),
            samples: instances,
            median_ms: durations[instances / 2],
        });
    }
    Ok(rows)
}

/// One trained variant in an ablation comparison.
#[derive(Debug, Clone)]
pub struct AblationRow {
    /// "architecture" (attention/aggregation gates) or "loss" (penalties).
    pub family: &'static str,
    pub variant: &'static str,
    pub mean_precision: f64,
    pub per_size: BTreeMap<usize, f64>,
}

/// Train and compare the downgraded variants: the architecture family drops
/// channel attention and/or aggregation weights; the loss family drops the
/// sum and/or norm constraint penalties. Every variant trains with the same
/// seeds and schedule; the fully equipped model is trained once and reported
/// in both families.
pub fn ablation_suite(
    train_set: &Dataset,
    eval_set: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    let base_model = ModelConfig {
        ablate_channel_attention: false,
        ablate_aggregation_weights: false,
        ..*model_cfg
    };
    let base_train = TrainConfig {
        loss: LossConfig { use_l1: true, use_l2: true, ..train_cfg.loss },
        ..*train_cfg
    };
    let evaluate = |model_cfg: &ModelConfig, train_cfg: &TrainConfig| -> Result<_> {
        let outcome = train(train_set, eval_set, model_cfg, train_cfg)?;
        per_size_precision(&outcome.checkpoint.params, eval_set)
    };

    let (full_sizes, full_mean) = evaluate(&base_model, &base_train)?;
    let mut rows = Vec::with_capacity(8);
    let full_row = |family| AblationRow {
        family,
        variant: "full",
        mean_precision: full_mean,
        per_size: full_sizes.clone(),
    };

    rows.push(full_row("architecture"));
    let architecture_variants: [(&'static str, bool, bool); 3] = [
        ("no_attention", true, false),
        ("no_weights", false, true),
        ("no_attention_weights", true, true),
    ];
    for (variant, drop_attention, drop_weights) in architecture_variants {
        let cfg = ModelConfig {
            ablate_channel_attention: drop_attention,
            ablate_aggregation_weights: drop_weights,
            ..base_model
        };
        let (per_size, mean) = evaluate(&cfg, &base_train)?;
        rows.push(AblationRow {
            family: "architecture",
            variant,
            mean_precision: mean,
            per_size,
        });
    }

    rows.push(full_row("loss"));
    let loss_variants: [(&'static str, bool, bool); 3] = [
        ("no_l1", false, true),
        ("no_l2", true, false),
        ("no_l1_l2", false, false),
    ];
    for (variant, use_l1, use_l2) in loss_variants {
        let cfg = TrainConfig {
            loss: LossConfig { use_l1, use_l2, ..base_train.loss },
            ..base_train
        };
        let (per_size, mean) = evaluate(&base_model, &cfg)?;
        rows.push(AblationRow {
            family: "loss",
            variant,
            mean_precision: mean,
            per_size,
        });
    }
    Ok(rows)
}

/// Out-of-distribution study of a trained model: larger problem sizes,
/// value-scaled costs on the *same* base instances, and both at once.
#[derive(Debug, Clone)]
pub struct GeneralizationReport {
    /// The base evaluation set the checkpoint was validated on.
    pub in_distribution: Vec<BenchRow>,
    /// Fresh instances at larger sizes.
    pub larger_sizes: Vec<BenchRow>,
    /// The base instances with per-matrix cost scaling.
    pub scaled_values: Vec<BenchRow>,
    /// Larger instances with cost scaling.
    pub larger_scaled: Vec<BenchRow>,
}

/// Scale range used by the generalization study and by scaled dataset
/// generation.
pub const SCALE_RANGE: (f64, f64) = (1.0, 10.0);

pub fn generalization_suite(
    params: &ModelParameters,
    base_eval: &Dataset,
    larger_sizes: &[usize],
    samples_per_size: usize,
    seed: u64,
) -> Result<GeneralizationReport> {
    let method = Method::Glan(params);
    let in_distribution = evaluate_method(&method, base_eval)?;

    let larger = generate(&DatasetSpec {
        sizes: larger_sizes.to_vec(),
        samples_per_size,
        value_upper_bound: base_eval.spec.value_upper_bound,
        value_scale: None,
        seed,
    })?;
    let larger_sizes_rows = evaluate_method(&method, &larger)?;

    let scaled = scale_values(base_eval, SCALE_RANGE, seed)?;
    let scaled_rows = evaluate_method(&method, &scaled)?;

    let larger_scaled = scale_values(&larger, SCALE_RANGE, seed)?;
    let larger_scaled_rows = evaluate_method(&method, &larger_scaled)?;

    Ok(GeneralizationReport {
        in_distribution,
        larger_sizes: larger_sizes_rows,
        scaled_values: scaled_rows,
        larger_scaled: larger_scaled_rows,
    })
}

/// A rendered benchmark: rows plus the provenance needed to reproduce them.
#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Path or short description of the dataset.
    pub dataset_label: String,
    /// Content hash of the dataset (see `datagen::dataset_hash`).
    pub dataset_hash: String,
    /// Echo of the configuration that produced the rows.
    pub config_echo: String,
    pub environment: String,
    pub rows: Vec<BenchRow>,
}

/// Build/runtime description stamped into reports.
pub fn environment_echo() -> String {
    format!(
        "lapforge {} | {} {} | threads {} | {} build",
        env!("CARGO_PKG_VERSION"),
        std::env::consts::OS,
        std::env::consts::ARCH,
        rayon::current_num_threads(),
        if cfg!(debug_assertions) { "debug" } else { "optimized" },
    )
}

impl BenchReport {
    /// Machine-readable form: provenance as `#`-prefixed key/value lines,
    /// then a tab-separated table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dataset\t{}", self.dataset_label);
        let _ = writeln!(out, "# dataset_sha256\t{}", self.dataset_hash);
        let _ = writeln!(out, "# config\t{}", self.config_echo);
        let _ = writeln!(out, "# environment\t{}", self.environment);
        let _ = writeln!(out, "# timing\t{TIMING_FOOTER}");
        out.push_str("size\tmethod\tsamples\tmean_precision\tmean_time_ms\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.16e}\t{:.16e}",
                row.size, row.method, row.samples, row.mean_precision, row.mean_time_ms
            );
        }
        out
    }

    /// Human-readable aligned table with the same provenance.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset:     {}", self.dataset_label);
        let _ = writeln!(out, "sha256:      {}", self.dataset_hash);
        let _ = writeln!(out, "config:      {}", self.config_echo);
        let _ = writeln!(out, "environment: {}", self.environment);
        out.push('\n');
        out.push_str(&render_rows(&self.rows));
        out.push('\n');
        let _ = writeln!(out, "{TIMING_FOOTER}");
        out
    }
}

/// Render rows as an aligned text table (no provenance or footer).
pub fn render_rows(rows: &[BenchRow]) -> String {
    let header = ["size", "method", "samples", "precision", "time_ms"];
    let mut cells: Vec<[String; 5]> = vec![header.map(str::to_string)];
    for row in rows {
        cells.push([
            row.size.to_string(),
            row.method.clone(),
            row.samples.to_string(),
            format!("{:.4}", row.mean_precision),
            format!("{:.3}", row.mean_time_ms),
        ]);
    }
    render_aligned(&cells)
}

/// Right-aligned column rendering with a rule under the first (header) row.
pub fn render_aligned<const COLS: usize>(cells: &[[String; COLS]]) -> String {
    let mut out = String::new();
    let widths: Vec<usize> = (0..COLS)
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for (index, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, width)| format!("{cell:>width$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  "));
        if index == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::dataset_hash;
    use crate::datagen::SampleRecord;

    fn uniform_dataset(sizes: Vec<usize>, per_size: usize, seed: u64) -> Dataset {
        generate(&DatasetSpec {
            sizes,
            samples_per_size: per_size,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            latent_dim: 4,
            hidden_width: 8,
            conv_iterations: 2,
            ..Default::default()
        }
    }

    #[test]
    fn exact_solver_scores_perfectly() {
        let data = uniform_dataset(vec![4, 9], 6, 3);
        let rows = evaluate_method(&Method::Hungarian, &data).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.mean_precision, 1.0);
            assert_eq!(row.samples, 6);
            assert!(row.mean_time_ms >= 0.0);
        }
        assert_eq!(overall_precision(&rows), 1.0);
    }

    #[test]
    fn exact_solver_keeps_credit_on_cost_ties() {
        // All-equal costs: every permutation is optimal, so whatever the
        // solver returns must count as exact even if it differs from the
        // stored optimum.
        let cost = CostMatrix::new(3, vec![1.0; 9]).unwrap();
        let stored = AssignmentMatrix::from_permutation(vec![2, 0, 1]).unwrap();
        let data = Dataset {
            spec: DatasetSpec::default(),
            records: vec![SampleRecord { cost, optimal: stored }],
        };
        let rows = evaluate_method(&Method::Hungarian, &data).unwrap();
        assert_eq!(rows[0].mean_precision, 1.0);
    }

    #[test]
    fn random_baseline_matches_reciprocal_size() {
        let data = uniform_dataset(vec![10], 200, 17);
        let rows = evaluate_method(&Method::Random { seed: 23 }, &data).unwrap();
        // Fixed points of a uniform random permutation have mean 1 and
        // variance 1, so the mean precision over R records has standard
        // deviation 1/(n sqrt(R)).
        let sigma = 1.0 / (10.0 * (200.0f64).sqrt());
        assert!(
            (rows[0].mean_precision - 0.1).abs() <= 3.0 * sigma,
            "random precision {} strays from 0.1",
            rows[0].mean_precision
        );
    }

    #[test]
    fn doubly_stochastic_baseline_lands_in_its_known_band() {
        let data = uniform_dataset(vec![10], 60, 29);
        let rows = evaluate_method(&Method::Sinkhorn(SinkhornConfig::default()), &data).unwrap();
        assert!(
            rows[0].mean_precision > 0.45 && rows[0].mean_precision < 0.80,
            "sinkhorn precision {} far from its calibration",
            rows[0].mean_precision
        );
    }

    #[test]
    fn learned_solver_rows_have_sane_shape() {
        let params = ModelParameters::init(&tiny_model(), 31).unwrap();
        let data = uniform_dataset(vec![5, 8], 4, 37);
        let rows = evaluate_method(&Method::Glan(&params), &data).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].size, 5);
        assert_eq!(rows[1].size, 8);
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.mean_precision));
            assert_eq!(row.method, "glan");
        }
    }

    #[test]
    fn per_size_precision_matches_trainer_mean() {
        let params = ModelParameters::init(&tiny_model(), 41).unwrap();
        let data = uniform_dataset(vec![4, 6], 5, 43);
        let (per_size, mean) = per_size_precision(&params, &data).unwrap();
        assert_eq!(per_size.len(), 2);
        let trainer_mean = crate::trainer::mean_precision(&params, &data).unwrap();
        assert!((mean - trainer_mean).abs() < 1e-15);
    }

    #[test]
    fn runtime_profile_reports_requested_sizes_with_minimum_samples() {
        let rows = runtime_profile(&Method::Hungarian, &[6, 12], 5, 47).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.samples, PROFILE_MIN_INSTANCES);
            assert!(row.median_ms >= 0.0);
        }
        assert!(runtime_profile(&Method::Hungarian, &[], 20, 1).is_err());
    }

    #[test]
    fn repeated_profiles_are_stable() {
        let params = ModelParameters::init(&tiny_model(), 53).unwrap();
        let method = Method::Glan(&params);
        let a = runtime_profile(&method, &[20], 20, 59).unwrap();
        let b = runtime_profile(&method, &[20], 20, 59).unwrap();
        let (fast, slow) = if a[0].median_ms < b[0].median_ms {
            (a[0].median_ms, b[0].median_ms)
        } else {
            (b[0].median_ms, a[0].median_ms)
        };
        assert!(
            slow <= fast * 1.5,
            "medians {fast:.3} ms and {slow:.3} ms differ by more than 50%"
        );
    }

    #[test]
    fn ablation_suite_produces_both_families() {
        let data = uniform_dataset(vec![4], 6, 61);
        let cfg = TrainConfig { epochs: 1, seed: 67, ..Default::default() };
        let rows = ablation_suite(&data, &data, &tiny_model(), &cfg).unwrap();
        assert_eq!(rows.len(), 8);
        let architecture: Vec<_> = rows.iter().filter(|r| r.family == "architecture").collect();
        let loss: Vec<_> = rows.iter().filter(|r| r.family == "loss").collect();
        assert_eq!(architecture.len(), 4);
        assert_eq!(loss.len(), 4);
        assert_eq!(architecture[0].variant, "full");
        assert_eq!(loss[0].variant, "full");
        // The shared full model is trained once, so both rows agree exactly.
        assert_eq!(architecture[0].mean_precision, loss[0].mean_precision);
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.mean_precision));
            assert_eq!(row.per_size.len(), 1);
        }
    }

    #[test]
    fn generalization_suite_covers_all_four_conditions() {
        let params = ModelParameters::init(&tiny_model(), 71).unwrap();
        let base = uniform_dataset(vec![4, 5], 3, 73);
        let report = generalization_suite(&params, &base, &[7], 3, 79).unwrap();
        assert_eq!(report.in_distribution.len(), 2);
        assert_eq!(report.larger_sizes.len(), 1);
        assert_eq!(report.larger_sizes[0].size, 7);
        assert_eq!(report.scaled_values.len(), 2);
        assert_eq!(report.larger_scaled.len(), 1);
        // Scaling preserves the instance set, so sample counts match.
        for (a, b) in report.in_distribution.iter().zip(&report.scaled_values) {
            assert_eq!(a.size, b.size);
            assert_eq!(a.samples, b.samples);
        }
    }

    #[test]
    fn reports_render_with_provenance_and_timing_semantics() {
        let data = uniform_dataset(vec![3], 4, 83);
        let rows = evaluate_method(&Method::Hungarian, &data).unwrap();
        let report = BenchReport {
            dataset_label: "unit.lap".into(),
            dataset_hash: dataset_hash(&data),
            config_echo: "defaults".into(),
            environment: environment_echo(),
            rows,
        };
        let tsv = report.to_tsv();
        assert!(tsv.contains("# dataset_sha256\t"));
        assert!(tsv.contains("size\tmethod\tsamples\tmean_precision\tmean_time_ms"));
        assert!(tsv.contains("end to end"));
        let table = report.to_table();
        assert!(table.contains("sha256:"));
        assert!(table.contains("hungarian"));
        assert!(table.contains("end to end"));
        assert!(table.contains(&report.dataset_hash));
    }
}
