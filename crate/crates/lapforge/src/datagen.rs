//! Synthetic dataset generation, stratified splitting, and serialization.
//!
//! Datasets are lists of (cost matrix, optimal assignment) records. Costs are
//! i.i.d. uniform draws; optima come from the exact Hungarian solver. Every
//! record is produced from its own derived RNG stream, so generation is
//! reproducible bit-for-bit under a fixed seed and safe to parallelize.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::assignment::{total_cost, AssignmentMatrix, CostMatrix};
use crate::error::{LapError, Result};
use crate::solvers::{brute_force, hungarian};
use crate::stream::derive_rng;

/// Largest size for which generation double-checks the Hungarian optimum
/// against exhaustive enumeration.
const EXHAUSTIVE_CHECK_MAX: usize = 7;

const FORMAT_TAG: &str = "lapforge-dataset";
const FORMAT_VERSION: &str = "v1";

/// Recipe for a synthetic dataset: problem sizes, instances per size, the
/// upper bound of the uniform value distribution, an optional per-matrix
/// scale range, and the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub sizes: Vec<usize>,
    pub samples_per_size: usize,
    /// Costs are drawn uniformly from (0, value_upper_bound).
    pub value_upper_bound: f64,
    /// When set, each matrix is additionally multiplied by one factor drawn
    /// uniformly from this (low, high) range.
    pub value_scale: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            sizes: (1..=15).map(|k| k * 10).collect(),
            samples_per_size: 100,
            value_upper_bound: 1.0,
            value_scale: None,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(LapError::Config(
                "dataset sizes must be nonempty and positive".into(),
            ));
        }
        if self.samples_per_size == 0 {
            return Err(LapError::Config("samples_per_size must be at least 1".into()));
        }
        if !(self.value_upper_bound.is_finite() && self.value_upper_bound > 0.0) {
            return Err(LapError::Config(
                "value_upper_bound must be finite and positive".into(),
            ));
        }
        if let Some((lo, hi)) = self.value_scale {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
                return Err(LapError::Config(
                    "value_scale range must be finite, positive, and ordered".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One labelled instance: a cost matrix and its optimal assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub cost: CostMatrix,
    pub optimal: AssignmentMatrix,
}

/// A labelled dataset plus the recipe that produced it. After operations
/// that change record counts (splitting), the embedded spec remains the
/// *generation* recipe; the record list is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records per problem size, in ascending size order.
    pub fn size_histogram(&self) -> BTreeMap<usize, usize> {
        let mut histogram = BTreeMap::new();
        for record in &self.records {
            *histogram.entry(record.cost.size()).or_insert(0) += 1;
        }
        histogram
    }
}

fn generate_record(seed: u64, size: usize, index: usize, upper: f64) -> Result<SampleRecord> {
    let mut rng = derive_rng(
        seed,
        &["datagen", "record", &size.to_string(), &index.to_string()],
    );
    let values: Vec<f64> = (0..size * size).map(|_| rng.gen::<f64>() * upper).collect();
    let cost = CostMatrix::new(size, values)?;
    let optimal = hungarian(&cost);
    if size <= EXHAUSTIVE_CHECK_MAX {
        let exhaustive = brute_force(&cost)?;
        let fast = total_cost(&cost, &optimal)?;
        let exact = total_cost(&cost, &exhaustive)?;
        if fast != exact {
            return Err(LapError::Numeric(format!(
                "assignment solver mismatch at n={size}: {fast} vs exhaustive {exact}"
            )));
        }
    }
    Ok(SampleRecord { cost, optimal })
}

/// Generate the dataset described by `spec`. Records are ordered by size (in
/// the listed order) and then by in-size index; each record draws from its
/// own derived stream, so the result is independent of thread count.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let coordinates: Vec<(usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&size| (0..spec.samples_per_size).map(move |index| (size, index)))
        .collect();
    let records: Vec<SampleRecord> = coordinates
        .par_iter()
        .map(|&(size, index)| generate_record(spec.seed, size, index, spec.value_upper_bound))
        .collect::<Result<_>>()?;
    let base = Dataset {
        spec: DatasetSpec {
            value_scale: None,
            ..spec.clone()
        },
        records,
    };
    match spec.value_scale {
        Some(range) => scale_values(&base, range, spec.seed),
        None => Ok(base),
    }
}

/// Multiply each record's cost matrix by one factor drawn uniformly from
/// `range`, leaving the optimal assignment untouched (positive scaling
/// preserves the argmin). Used to isolate the value-scale variable: the
/// scaled dataset contains the *same* underlying instances.
pub fn scale_values(base: &Dataset, range: (f64, f64), seed: u64) -> Result<Dataset> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
        return Err(LapError::Config(
            "value_scale range must be finite, positive, and ordered".into(),
        ));
    }
    let mut records = Vec::with_capacity(base.records.len());
    for (index, record) in base.records.iter().enumerate() {
        let mut rng = derive_rng(seed, &["datagen", "scale", &index.to_string()]);
        let factor = lo + rng.gen::<f64>() * (hi - lo);
        records.push(SampleRecord {
            cost: record.cost.scaled(factor)?,
            optimal: record.optimal.clone(),
        });
    }
    Ok(Dataset {
        spec: DatasetSpec {
            value_scale: Some(range),
            ..base.spec.clone()
        },
        records,
    })
}

/// Split into (train, eval) stratified by problem size: within each size
/// group, `floor(group_len * eval_fraction)` shuffled records go to eval and
/// the remainder to train.
pub fn split(dataset: &Dataset, eval_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(eval_fraction.is_finite() && 0.0 < eval_fraction && eval_fraction < 1.0) {
        return Err(LapError::Degenerate(format!(
            "eval fraction must lie strictly between 0 and 1, got {eval_fraction}"
        )));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (index, record) in dataset.records.iter().enumerate() {
        groups.entry(record.cost.size()).or_default().push(index);
    }
    let mut train_indices = Vec::new();
    let mut eval_indices = Vec::new();
    for (size, mut indices) in groups {
        let mut rng = derive_rng(seed, &["split", &size.to_string()]);
        // Fisher-Yates shuffle.
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let eval_count = (indices.len() as f64 * eval_fraction).floor() as usize;
        eval_indices.extend_from_slice(&indices[..eval_count]);
        train_indices.extend_from_slice(&indices[eval_count..]);
    }
    let pick = |indices: &[usize]| Dataset {
        spec: dataset.spec.clone(),
        records: indices.iter().map(|&i| dataset.records[i].clone()).collect(),
    };
    Ok((pick(&train_indices), pick(&eval_indices)))
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize to the line-delimited text format: one header line echoing the
/// format version and generation spec, then one record per line holding the
/// size, the row-major cost values (17 significant digits), and the optimal
/// permutation as job indices.
pub fn to_text(dataset: &Dataset) -> String {
    let spec = &dataset.spec;
    let sizes = spec
        .sizes
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let scale = match spec.value_scale {
        Some((lo, hi)) => format!("{}..{}", format_float(lo), format_float(hi)),
        None => "none".to_string(),
    };
    let mut out = format!(
        "{FORMAT_TAG} {FORMAT_VERSION} seed={} per_size={} u={} scale={} sizes={}\n",
        spec.seed,
        spec.samples_per_size,
        format_float(spec.value_upper_bound),
        scale,
        sizes,
    );
    for record in &dataset.records {
        let n = record.cost.size();
        let mut line = n.to_string();
        for value in record.cost.values() {
            let _ = write!(line, " {}", format_float(*value));
        }
        for job in record.optimal.jobs() {
            let _ = write!(line, " {job}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn malformed(detail: impl Into<String>) -> LapError {
    LapError::Format(detail.into())
}

fn parse_header(line: &str) -> Result<DatasetSpec> {
    let mut tokens = line.split_whitespace();
    let tag = tokens.next().ok_or_else(|| malformed("empty header line"))?;
    if tag != FORMAT_TAG {
        return Err(malformed(format!("unrecognized file tag {tag:?}")));
    }
    let version = tokens
        .next()
        .ok_or_else(|| malformed("header missing format version"))?;
    if version != FORMAT_VERSION {
        return Err(LapError::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let mut spec = DatasetSpec {
        sizes: Vec::new(),
        samples_per_size: 0,
        value_upper_bound: f64::NAN,
        value_scale: None,
        seed: 0,
    };
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| malformed(format!("header field {token:?} is not key=value")))?;
        match key {
            "seed" => {
                spec.seed = value
                    .parse()
                    .map_err(|_| malformed(format!("bad seed {value:?}")))?;
            }
            "per_size" => {
                spec.samples_per_size = value
                    .parse()
                    .map_err(|_| malformed(format!("bad per_size {value:?}")))?;
            }
            "u" => {
                spec.value_upper_bound = value
                    .parse()
                    .map_err(|_| malformed(format!("bad value bound {value:?}")))?;
            }
            "scale" => {
                spec.value_scale = if value == "none" {
                    None
                } else {
                    let (lo, hi) = value
                        .split_once("..")
                        .ok_or_else(|| malformed(format!("bad scale range {value:?}")))?;
                    Some((
                        lo.parse()
                            .map_err(|_| malformed(format!("bad scale low {lo:?}")))?,
                        hi.parse()
                            .map_err(|_| malformed(format!("bad scale high {hi:?}")))?,
                    ))
                };
            }
            "sizes" => {
                spec.sizes = value
                    .split(',')
                    .map(|n| {
                        n.parse()
                            .map_err(|_| malformed(format!("bad size entry {n:?}")))
                    })
                    .collect::<Result<_>>()?;
            }
            other => return Err(malformed(format!("unknown header field {other:?}"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_record(line_number: usize, line: &str) -> Result<SampleRecord> {
    let mut tokens = line.split_whitespace();
    let n: usize = tokens
        .next()
        .ok_or_else(|| malformed(format!("line {line_number}: empty record")))?
        .parse()
        .map_err(|_| malformed(format!("line {line_number}: bad record size")))?;
    let mut values = Vec::with_capacity(n * n);
    for k in 0..n * n {
        let token = tokens.next().ok_or_else(|| {
            malformed(format!(
                "line {line_number}: truncated record (got {k} of {} cost values)",
                n * n
            ))
        })?;
        let value: f64 = token
            .parse()
            .map_err(|_| malformed(format!("line {line_number}: bad cost value {token:?}")))?;
        values.push(value);
    }
    let mut jobs = Vec::with_capacity(n);
    for k in 0..n {
        let token = tokens.next().ok_or_else(|| {
            malformed(format!(
                "line {line_number}: truncated record (got {k} of {n} job indices)"
            ))
        })?;
        let job: usize = token
            .parse()
            .map_err(|_| malformed(format!("line {line_number}: bad job index {token:?}")))?;
        jobs.push(job);
    }
    if let Some(extra) = tokens.next() {
        return Err(malformed(format!(
            "line {line_number}: trailing token {extra:?} after record"
        )));
    }
    Ok(SampleRecord {
        cost: CostMatrix::new(n, values)?,
        optimal: AssignmentMatrix::from_permutation(jobs)?,
    })
}

/// Parse a dataset from its text form, validating the header, every cost
/// value, and every stored permutation.
pub fn from_text(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed("empty dataset file"))?;
    let spec = parse_header(header)?;
    let mut records = Vec::new();
    for (offset, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(offset + 2, line)?);
    }
    Ok(Dataset { spec, records })
}

pub fn save(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(dataset))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text)
}

/// Content hash of the dataset's canonical text form (hex SHA-256). Reports
/// cite this as the dataset identity.
pub fn dataset_hash(dataset: &Dataset) -> String {
    let digest = Sha256::digest(to_text(dataset).as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn format_bound(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Conventional file name `syndata_u{U}_{min}_{max}.lap` for a spec; a scale
/// range widens the value tag (for example `u1-10`).
pub fn suggested_filename(spec: &DatasetSpec) -> String {
    let min = spec.sizes.iter().min().copied().unwrap_or(0);
    let max = spec.sizes.iter().max().copied().unwrap_or(0);
    let value_tag = match spec.value_scale {
        Some((lo, hi)) => format!(
            "{}-{}",
            format_bound(spec.value_upper_bound * lo),
            format_bound(spec.value_upper_bound * hi)
        ),
        None => format_bound(spec.value_upper_bound),
    };
    format!("syndata_u{value_tag}_{min}_{max}.lap")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::validate_permutation;

    fn small_spec() -> DatasetSpec {
        DatasetSpec {
            sizes: vec![3, 5],
            samples_per_size: 4,
            value_upper_bound: 1.0,
            value_scale: None,
            seed: 11,
        }
    }

    #[test]
    fn generation_matches_requested_shape() {
        let spec = DatasetSpec {
            sizes: vec![3],
            samples_per_size: 2,
            ..Default::default()
        };
        let dataset = generate(&spec).unwrap();
        assert_eq!(dataset.len(), 2);
        for record in &dataset.records {
            assert_eq!(record.cost.size(), 3);
            assert!(validate_permutation(3, &record.optimal.to_dense()));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(to_text(&a), to_text(&b));
        let c = generate(&DatasetSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(to_text(&a), to_text(&c));
    }

    #[test]
    fn stored_optimum_matches_exhaustive_search() {
        let spec = DatasetSpec {
            sizes: vec![2, 4, 6, 7],
            samples_per_size: 5,
            seed: 3,
            ..Default::default()
        };
        let dataset = generate(&spec).unwrap();
        for record in &dataset.records {
            let exhaustive = brute_force(&record.cost).unwrap();
            let stored = total_cost(&record.cost, &record.optimal).unwrap();
            let best = total_cost(&record.cost, &exhaustive).unwrap();
            assert_eq!(stored, best);
        }
    }

    #[test]
    fn entries_match_uniform_distribution_mean() {
        let spec = DatasetSpec {
            sizes: vec![30],
            samples_per_size: 20,
            seed: 5,
            ..Default::default()
        };
        let dataset = generate(&spec).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for record in &dataset.records {
            sum += record.cost.values().iter().sum::<f64>();
            count += record.cost.values().len();
        }
        let mean = sum / count as f64;
        let sigma = (1.0 / 12.0_f64 / count as f64).sqrt();
        assert!(
            (mean - 0.5).abs() <= 3.0 * sigma,
            "mean {mean} outside 3-sigma band around 0.5"
        );
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let spec = DatasetSpec {
            sizes: vec![3, 4],
            samples_per_size: 10,
            seed: 9,
            ..Default::default()
        };
        let dataset = generate(&spec).unwrap();
        let (train, eval) = split(&dataset, 0.3, 21).unwrap();
        assert_eq!(train.size_histogram()[&3], 7);
        assert_eq!(train.size_histogram()[&4], 7);
        assert_eq!(eval.size_histogram()[&3], 3);
        assert_eq!(eval.size_histogram()[&4], 3);
        // Every original record appears exactly once across the two halves.
        let mut seen: Vec<String> = train
            .records
            .iter()
            .chain(eval.records.iter())
            .map(|r| format!("{:?}", r.cost.values()))
            .collect();
        seen.sort();
        let mut original: Vec<String> = dataset
            .records
            .iter()
            .map(|r| format!("{:?}", r.cost.values()))
            .collect();
        original.sort();
        assert_eq!(seen, original);
    }

    #[test]
    fn split_floors_fractional_eval_counts() {
        let spec = DatasetSpec {
            sizes: vec![3],
            samples_per_size: 7,
            seed: 2,
            ..Default::default()
        };
        let dataset = generate(&spec).unwrap();
        let (train, eval) = split(&dataset, 0.3, 1).unwrap();
        assert_eq!(eval.len(), 2); // floor(7 * 0.3)
        assert_eq!(train.len(), 5);
    }

    #[test]
    fn split_is_seed_deterministic_and_rejects_degenerate_fractions() {
        let dataset = generate(&small_spec()).unwrap();
        let (t1, e1) = split(&dataset, 0.3, 4).unwrap();
        let (t2, e2) = split(&dataset, 0.3, 4).unwrap();
        assert_eq!(to_text(&t1), to_text(&t2));
        assert_eq!(to_text(&e1), to_text(&e2));
        assert!(matches!(split(&dataset, 0.0, 4), Err(LapError::Degenerate(_))));
        assert!(matches!(split(&dataset, 1.0, 4), Err(LapError::Degenerate(_))));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let spec = DatasetSpec {
            value_scale: Some((1.0, 10.0)),
            ..small_spec()
        };
        let dataset = generate(&spec).unwrap();
        let text = to_text(&dataset);
        let reloaded = from_text(&text).unwrap();
        assert_eq!(dataset, reloaded);
        assert_eq!(text, to_text(&reloaded));
        assert_eq!(dataset.size_histogram(), reloaded.size_histogram());
    }

    #[test]
    fn file_round_trip_preserves_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(suggested_filename(&small_spec()));
        let dataset = generate(&small_spec()).unwrap();
        save(&dataset, &path).unwrap();
        let reloaded = load(&path).unwrap();
        assert_eq!(dataset_hash(&dataset), dataset_hash(&reloaded));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dataset = generate(&small_spec()).unwrap();
        let text = to_text(&dataset);
        let cut = &text[..text.len() - 20];
        assert!(matches!(from_text(cut), Err(LapError::Format(_))));
    }

    #[test]
    fn version_and_tag_mismatches_are_rejected() {
        let dataset = generate(&small_spec()).unwrap();
        let text = to_text(&dataset);
        let future = text.replacen("lapforge-dataset v1", "lapforge-dataset v9", 1);
        assert!(matches!(from_text(&future), Err(LapError::Version { .. })));
        let alien = text.replacen("lapforge-dataset", "other-format", 1);
        assert!(matches!(from_text(&alien), Err(LapError::Format(_))));
    }

    #[test]
    fn corrupt_permutation_is_rejected() {
        let dataset = generate(&DatasetSpec {
            sizes: vec![3],
            samples_per_size: 1,
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        let text = to_text(&dataset);
        // The record line ends with the three job indices; duplicate a job.
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let record = lines.last_mut().unwrap();
        let fields: Vec<&str> = record.rsplitn(4, ' ').collect();
        *record = format!("{} {} {} {}", fields[3], fields[2], fields[2], fields[0]);
        let corrupted = lines.join("\n");
        assert!(from_text(&corrupted).is_err());
    }

    #[test]
    fn scaling_preserves_instances_and_optima() {
        let base = generate(&small_spec()).unwrap();
        let scaled = scale_values(&base, (1.0, 10.0), base.spec.seed).unwrap();
        assert_eq!(base.len(), scaled.len());
        for (before, after) in base.records.iter().zip(&scaled.records) {
            let factor = after.cost.get(0, 0) / before.cost.get(0, 0);
            assert!((1.0..=10.0).contains(&factor), "factor {factor} out of range");
            for (&a, &b) in before.cost.values().iter().zip(after.cost.values()) {
                assert!((b - a * factor).abs() <= 1e-12 * factor.abs());
            }
            assert_eq!(before.optimal.jobs(), after.optimal.jobs());
            // The stored optimum is still optimal for the scaled costs.
            let exhaustive = brute_force(&after.cost).unwrap();
            assert_eq!(
                total_cost(&after.cost, &after.optimal).unwrap(),
                total_cost(&after.cost, &exhaustive).unwrap()
            );
        }
    }

    #[test]
    fn generating_with_scale_equals_scaling_the_base() {
        let unscaled = small_spec();
        let scaled_spec = DatasetSpec {
            value_scale: Some((1.0, 10.0)),
            ..unscaled.clone()
        };
        let direct = generate(&scaled_spec).unwrap();
        let transformed = scale_values(&generate(&unscaled).unwrap(), (1.0, 10.0), unscaled.seed)
            .unwrap();
        assert_eq!(to_text(&direct), to_text(&transformed));
    }

    #[test]
    fn suggested_filenames_follow_the_convention() {
        assert_eq!(
            suggested_filename(&DatasetSpec::default()),
            "syndata_u1_10_150.lap"
        );
        assert_eq!(
            suggested_filename(&DatasetSpec {
                value_scale: Some((1.0, 10.0)),
                ..Default::default()
            }),
            "syndata_u1-10_10_150.lap"
        );
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad_sizes = DatasetSpec {
            sizes: vec![],
            ..Default::default()
        };
        assert!(matches!(generate(&bad_sizes), Err(LapError::Config(_))));
        let bad_scale = DatasetSpec {
            value_scale: Some((0.0, 10.0)),
            ..Default::default()
        };
        assert!(matches!(generate(&bad_scale), Err(LapError::Config(_))));
    }
}
