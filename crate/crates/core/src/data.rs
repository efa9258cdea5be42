//! Seeded generators for the projection benchmark and the synthetic
//! regression experiment, plus CSV ingestion and export.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` so that runs
//! replicate across platforms.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{check_len, Result, SgfsError};
use crate::model::{GroupPartition, ProblemInstance, SparsityBudget};

/// Base of the logarithm in the group radius `s2 = 5·log(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// Projection benchmark instance: `v` uniform on `[-50, 50]`, ten equal
/// groups, `s2 = 5·log(p)` and `s1 = (√10/2)·s2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjBenchSpec {
    pub p: usize,
    pub group_count: usize,
    pub half_width: f64,
    pub log_base: LogBase,
    pub seed: u64,
}

impl ProjBenchSpec {
    pub fn new(p: usize, seed: u64) -> Self {
        Self {
            p,
            group_count: 10,
            half_width: 50.0,
            log_base: LogBase::Natural,
            seed,
        }
    }

    pub fn radii(&self) -> (f64, f64) {
        let s2 = 5.0 * self.log_base.log(self.p as f64);
        (10f64.sqrt() / 2.0 * s2, s2)
    }
}

pub fn gen_projection_instance(spec: &ProjBenchSpec) -> Result<(Vec<f64>, SparsityBudget, GroupPartition)> {
    if spec.p < 2 || spec.group_count == 0 || !spec.p.is_multiple_of(spec.group_count) {
        return Err(SgfsError::InvalidParameter {
            name: "p",
            reason: format!("p = {} must be at least 2 and divisible by {}", spec.p, spec.group_count),
        });
    }
    let partition = GroupPartition::contiguous(spec.p, spec.group_count)?;
    let (s1, s2) = spec.radii();
    let budget = SparsityBudget::radius(s1, s2)?;
    let dist = Uniform::new_inclusive(-spec.half_width, spec.half_width).map_err(|e| SgfsError::InvalidParameter {
        name: "half_width",
        reason: e.to_string(),
    })?;
    let rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = dist.sample_iter(rng).take(spec.p).collect();
    Ok((v, budget, partition))
}

/// Synthetic regression setup: a Gaussian design, a sparse truth living in
/// a few groups, Gaussian noise, and an even train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub group_count: usize,
    pub active_groups: usize,
    /// Each active group gets a uniform number of nonzeros in `1..=max`.
    pub max_nonzeros_per_group: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            n: 60,
            p: 100,
            group_count: 10,
            active_groups: 4,
            max_nonzeros_per_group: 5,
            noise_sd: 0.5,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(SgfsError::InvalidParameter { name, reason });
        if self.n < 2 {
            return bad("n", format!("need at least 2 rows to split, got {}", self.n));
        }
        if self.group_count == 0 || !self.p.is_multiple_of(self.group_count) {
            return bad("p", format!("p = {} is not divisible into {} groups", self.p, self.group_count));
        }
        if self.active_groups > self.group_count {
            return bad(
                "active_groups",
                format!("{} active groups out of {}", self.active_groups, self.group_count),
            );
        }
        let size = self.p / self.group_count;
        if self.max_nonzeros_per_group == 0 || self.max_nonzeros_per_group > size {
            return bad(
                "max_nonzeros_per_group",
                format!("{} does not fit groups of size {size}", self.max_nonzeros_per_group),
            );
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd", format!("{}", self.noise_sd));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: ProblemInstance,
    pub test: ProblemInstance,
    pub truth: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(train: ProblemInstance, test: ProblemInstance, truth: Option<Vec<f64>>) -> Result<Self> {
        if train.partition != test.partition {
            return Err(SgfsError::InvalidPartition("train and test partitions differ".into()));
        }
        if let Some(t) = &truth {
            check_len(train.p(), t.len(), "dataset truth")?;
        }
        Ok(Self { train, test, truth })
    }
}

/// Draw order: the design row by row, then the active groups, then per
/// active group its nonzero count, positions and values, then the noise.
/// The first `n/2` rows form the training half.
pub fn gen_synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (n, p) = (spec.n, spec.p);

    let mut entries = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        entries.push(std_normal.sample(&mut rng));
    }
    let a = DMatrix::from_row_slice(n, p, &entries);

    let partition = GroupPartition::contiguous(p, spec.group_count)?;
    let size = p / spec.group_count;
    let mut truth = vec![0.0; p];
    let mut active = sample(&mut rng, spec.group_count, spec.active_groups).into_vec();
    active.sort_unstable();
    for g in active {
        let t = rng.random_range(1..=spec.max_nonzeros_per_group);
        let members = partition.group(g);
        for k in sample(&mut rng, size, t) {
            truth[members[k]] = std_normal.sample(&mut rng);
        }
    }

    let mut y = &a * DVector::from_column_slice(&truth);
    if spec.noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sd).expect("validated sd");
        for yi in y.iter_mut() {
            *yi += noise.sample(&mut rng);
        }
    }

    let full = ProblemInstance::new(a, y, partition)?;
    let half = n / 2;
    let train_rows: Vec<usize> = (0..half).collect();
    let test_rows: Vec<usize> = (half..n).collect();
    Dataset::new(full.select_rows(&train_rows), full.select_rows(&test_rows), Some(truth))
}

fn parse_err(path: &Path, reason: impl Into<String>) -> SgfsError {
    SgfsError::Parse {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(path: &Path, field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, format!("line {line}: `{}` is not a number", field.trim())))
}

/// Reads a dense matrix, one sample per row.
pub fn read_matrix_csv(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1 + usize::from(has_header);
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_err(
                    path,
                    format!("ragged rows: line {line} has {} fields, expected {c}", record.len()),
                ));
            }
            Some(_) => {}
        }
        for field in record.iter() {
            entries.push(parse_f64(path, field, line)?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, "no rows"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &entries))
}

/// Reads one value per line; blank lines are skipped.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_f64(path, &line, i + 1)?);
    }
    Ok(out)
}

/// Reads 0-based group ids, one per feature, separated by newlines or commas.
pub fn read_groups(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| parse_err(path, format!("`{s}` is not a non-negative group id")))
        })
        .collect()
}

/// Loads a regression instance from a matrix file, a response file and a
/// group-label file.
pub fn load_csv_dataset(matrix_path: &Path, response_path: &Path, groups_path: &Path) -> Result<ProblemInstance> {
    load_csv_dataset_with_header(matrix_path, response_path, groups_path, false)
}

pub fn load_csv_dataset_with_header(
    matrix_path: &Path,
    response_path: &Path,
    groups_path: &Path,
    matrix_header: bool,
) -> Result<ProblemInstance> {
    let a = read_matrix_csv(matrix_path, matrix_header)?;
    let y = read_vector_csv(response_path)?;
    let labels = read_groups(groups_path)?;
    if y.len() != a.nrows() {
        return Err(parse_err(
            response_path,
            format!("{} responses for {} matrix rows", y.len(), a.nrows()),
        ));
    }
    if labels.len() != a.ncols() {
        return Err(parse_err(
            groups_path,
            format!("{} group ids for {} features", labels.len(), a.ncols()),
        ));
    }
    let partition = GroupPartition::from_labels(&labels)?;
    ProblemInstance::new(a, DVector::from_vec(y), partition)
}

// `{}` on f64 prints the shortest string that parses back to the same value.
pub fn write_matrix_csv(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{x}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_groups(path: &Path, partition: &GroupPartition) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for g in partition.labels() {
        writeln!(w, "{g}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an instance as `matrix.csv`, `response.csv` and `groups.csv`
/// under `dir`, the layout [`load_csv_dataset`] reads back.
pub fn write_instance(dir: &Path, inst: &ProblemInstance) -> Result<()> {
    write_matrix_csv(&dir.join("matrix.csv"), &inst.a)?;
    write_vector_csv(&dir.join("response.csv"), inst.y.as_slice())?;
    write_groups(&dir.join("groups.csv"), &inst.partition)
}

pub fn read_instance(dir: &Path) -> Result<ProblemInstance> {
    load_csv_dataset(
        &dir.join("matrix.csv"),
        &dir.join("response.csv"),
        &dir.join("groups.csv"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn projection_radii_for_p_100() {
        let (_, budget, part) = gen_projection_instance(&ProjBenchSpec::new(100, 7)).unwrap();
        assert_relative_eq!(budget.s2, 23.025850929940457, epsilon = 1e-12);
        assert_relative_eq!(budget.s1, 10f64.sqrt() / 2.0 * 100f64.ln() * 5.0, epsilon = 1e-12);
        assert_relative_eq!(budget.s1, 36.40707, epsilon = 1e-5);
        assert_eq!(part.num_groups(), 10);
        assert_eq!(part.group(3), &[30, 31, 32, 33, 34, 35, 36, 37, 38, 39]);
    }

    #[test]
    fn log_ten_radius() {
        let spec = ProjBenchSpec {
            log_base: LogBase::Ten,
            ..ProjBenchSpec::new(1000, 0)
        };
        assert_relative_eq!(spec.radii().1, 15.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_generator_is_seeded() {
        let a = gen_projection_instance(&ProjBenchSpec::new(1000, 3)).unwrap().0;
        let b = gen_projection_instance(&ProjBenchSpec::new(1000, 3)).unwrap().0;
        let c = gen_projection_instance(&ProjBenchSpec::new(1000, 4)).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| (-50.0..=50.0).contains(v)));
    }

    #[test]
    fn projection_values_have_uniform_mean_magnitude() {
        let v = gen_projection_instance(&ProjBenchSpec::new(100_000, 11)).unwrap().0;
        let mean = v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
        assert!((mean - 25.0).abs() < 0.05 * 25.0, "mean |v| = {mean}");
    }

    #[test]
    fn projection_rejects_indivisible_p() {
        assert!(gen_projection_instance(&ProjBenchSpec::new(105, 0)).is_err());
    }

    #[test]
    fn synthetic_shapes_and_truth() {
        for seed in 0..20 {
            let d = gen_synthetic_dataset(&SyntheticSpec::new(seed)).unwrap();
            assert_eq!(d.train.a.shape(), (30, 100));
            assert_eq!(d.test.a.shape(), (30, 100));
            let truth = d.truth.unwrap();
            let nnz = truth.iter().filter(|v| **v != 0.0).count();
            assert!((4..=20).contains(&nnz), "nnz = {nnz}");
            let groups = d
                .train
                .partition
                .block_norms(&truth)
                .iter()
                .filter(|n| **n > 0.0)
                .count();
            assert_eq!(groups, 4);
        }
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = gen_synthetic_dataset(&SyntheticSpec::new(5)).unwrap();
        let b = gen_synthetic_dataset(&SyntheticSpec::new(5)).unwrap();
        assert_eq!(a.train.a, b.train.a);
        assert_eq!(a.test.y, b.test.y);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn synthetic_noise_level() {
        let mut sum = 0.0;
        let mut count = 0;
        for seed in 0..100 {
            let d = gen_synthetic_dataset(&SyntheticSpec::new(seed)).unwrap();
            let x0 = DVector::from_vec(d.truth.unwrap());
            for inst in [&d.train, &d.test] {
                let r = &inst.y - &inst.a * &x0;
                sum += r.norm_squared();
                count += r.len();
            }
        }
        let var = sum / count as f64;
        assert!((var - 0.25).abs() < 0.2 * 0.25, "noise variance {var}");
    }

    #[test]
    fn loads_small_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        let r = dir.path().join("r.csv");
        let g = dir.path().join("g.csv");
        std::fs::write(&m, "1,2\n3,4\n5,6\n").unwrap();
        std::fs::write(&r, "1\n2\n3\n").unwrap();
        std::fs::write(&g, "0,0").unwrap();
        let inst = load_csv_dataset(&m, &r, &g).unwrap();
        assert_eq!(inst.partition.num_groups(), 1);
        assert_eq!(inst.a[(2, 1)], 6.0);

        std::fs::write(&g, "0,2").unwrap();
        assert!(matches!(
            load_csv_dataset(&m, &r, &g),
            Err(SgfsError::NonContiguousGroups(_))
        ));
    }

    #[test]
    fn header_is_tolerated_and_ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(read_matrix_csv(&m, true).unwrap().shape(), (2, 2));
        assert!(read_matrix_csv(&m, false).is_err());
        std::fs::write(&m, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&m, false).is_err());
    }

    #[test]
    fn mismatched_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        let r = dir.path().join("r.csv");
        let g = dir.path().join("g.csv");
        std::fs::write(&m, "1,2\n3,4\n").unwrap();
        std::fs::write(&r, "1\n2\n3\n").unwrap();
        std::fs::write(&g, "0\n0\n").unwrap();
        assert!(load_csv_dataset(&m, &r, &g).is_err());
        std::fs::write(&r, "1\n2\n").unwrap();
        std::fs::write(&g, "0\n0\n1\n").unwrap();
        assert!(load_csv_dataset(&m, &r, &g).is_err());
    }

    #[test]
    fn synthetic_round_trip_is_exact() {
        let d = gen_synthetic_dataset(&SyntheticSpec::new(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_instance(dir.path(), &d.train).unwrap();
        let back = read_instance(dir.path()).unwrap();
        assert_eq!(back.partition, d.train.partition);
        assert!((&back.a - &d.train.a).amax() <= 1e-12);
        assert!((&back.y - &d.train.y).amax() <= 1e-12);
    }
}
