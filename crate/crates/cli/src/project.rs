use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use sgfs_core::baselines::{admm_project, dykstra_project, StopRule};
use sgfs_core::data::{gen_projection_instance, read_groups, read_vector_csv, write_vector_csv, ProjBenchSpec};
use sgfs_core::projection::constraint_norms;
use sgfs_core::{sglp, GroupPartition, SolverConfig};

use crate::report::{render_table, Report, Row};
use crate::LogBaseArg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjMethod {
    Sglp,
    Admm,
    Dykstra,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    /// Vector to project, one value per line.
    #[arg(long, conflicts_with = "p")]
    input: Option<PathBuf>,
    /// Generate a benchmark vector of this length instead of reading one.
    #[arg(long)]
    p: Option<usize>,
    /// Group id per coordinate (0-based, newline or comma separated).
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Equal contiguous groups when no groups file is given.
    #[arg(long, default_value_t = 10)]
    group_count: usize,
    /// L1 radius; defaults to the benchmark rule with --p.
    #[arg(long)]
    s1: Option<f64>,
    /// Group-norm radius; defaults to the benchmark rule with --p.
    #[arg(long)]
    s2: Option<f64>,
    #[arg(long, value_enum, default_value_t = ProjMethod::Sglp)]
    method: ProjMethod,
    /// Logarithm in the benchmark rule s2 = 5 log p.
    #[arg(long, value_enum, default_value_t = LogBaseArg::Natural)]
    log_base: LogBaseArg,
    #[arg(long, env = "SGFS_SEED", default_value_t = 0)]
    seed: u64,
    /// Stagnation tolerance for ADMM and Dykstra.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = StopRule::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Where to write the projected vector.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON-lines report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn run(args: ProjectArgs) -> Result<Vec<String>> {
    let (v, partition, s1, s2) = match (&args.input, args.p) {
        (Some(path), None) => {
            let v = read_vector_csv(path)?;
            let partition = match &args.groups {
                Some(g) => GroupPartition::from_labels(&read_groups(g)?)?,
                None => GroupPartition::contiguous(v.len(), args.group_count)?,
            };
            let (Some(s1), Some(s2)) = (args.s1, args.s2) else {
                bail!("--s1 and --s2 are required with --input");
            };
            (v, partition, s1, s2)
        }
        (None, Some(p)) => {
            let spec = ProjBenchSpec {
                group_count: args.group_count,
                log_base: args.log_base.into(),
                ..ProjBenchSpec::new(p, args.seed)
            };
            let (v, budget, partition) = gen_projection_instance(&spec)?;
            (v, partition, args.s1.unwrap_or(budget.s1), args.s2.unwrap_or(budget.s2))
        }
        _ => bail!("give exactly one of --input or --p"),
    };
    if !(s1 > 0.0 && s2 > 0.0) {
        bail!("radii must be positive, got s1 = {s1}, s2 = {s2}");
    }

    let stop = StopRule::stagnation(args.tol).with_max_iter(args.max_iter);
    let start = Instant::now();
    let (x, converged) = match args.method {
        ProjMethod::Sglp => (sglp(&v, s1, s2, &partition, &SolverConfig::default())?.x, true),
        ProjMethod::Admm => {
            let (x, state) = admm_project(&v, s1, s2, &partition, &stop)?;
            (x, state.converged)
        }
        ProjMethod::Dykstra => {
            let (x, state) = dykstra_project(&v, s1, s2, &partition, &stop)?;
            (x, state.converged)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let objective = 0.5 * x.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let (l1, gn) = constraint_norms(&x, &partition)?;

    if let Some(path) = &args.output {
        write_vector_csv(path, &x).with_context(|| format!("writing {}", path.display()))?;
    }

    let method = format!("{:?}", args.method).to_lowercase();
    let mut row = Row::new(&method, v.len(), 0, args.seed);
    row.time_seconds = elapsed;
    row.objective = Some(objective);
    row.converged = converged;
    print!(
        "{}",
        render_table(
            &["method", "p", "time (s)", "objective", "‖x‖₁", "‖x‖_G", "converged"].map(String::from),
            &[vec![
                method.clone(),
                v.len().to_string(),
                format!("{elapsed:.6}"),
                format!("{objective:.10e}"),
                format!("{l1:.6} / {s1:.6}"),
                format!("{gn:.6} / {s2:.6}"),
                converged.to_string(),
            ]],
        )
    );

    let seed = args.seed;
    let path = args.report.clone();
    let mut report = Report::new("project", seed, args);
    report.rows.push(row);
    if let Some(path) = path {
        report.save(&path)?;
    }
    Ok(report
        .failures()
        .iter()
        .map(|r| format!("{} p={} did not converge", r.method, r.p))
        .collect())
}
