use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use sgfs_core::data::{load_csv_dataset_with_header, write_vector_csv, Dataset};
use sgfs_core::eval::{
    classify_accuracy, cross_validate, selection_counts, write_score_table, CvMetric, CvPlan, Folds, Method, S1Grid,
};
use sgfs_core::solvers::{agm_solve, dc_solve};
use sgfs_core::{objective, SolverConfig, SparsityBudget, TruncationParam};

use crate::report::{render_table, Report, Row};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// DC programming on the truncated-L1 model; budgets are counts.
    Dc,
    /// Constrained sparse group lasso; budgets are norm radii.
    Sgl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Prediction,
    Accuracy,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Design matrix CSV, one sample per row.
    #[arg(long)]
    matrix: PathBuf,
    /// Response, one value per line.
    #[arg(long)]
    response: PathBuf,
    /// Group id per feature (0-based).
    #[arg(long)]
    groups: PathBuf,
    /// The matrix file starts with a header line.
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum, default_value_t = SolveMethod::Dc)]
    method: SolveMethod,
    /// Feature budget (count for dc, L1 radius for sgl). Required without --cv.
    #[arg(long)]
    s1: Option<f64>,
    /// Group budget (count for dc, group-norm radius for sgl). Required without --cv.
    #[arg(long)]
    s2: Option<f64>,
    /// Truncation level; also the selection threshold for reported counts.
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// Tune (s1, s2) by cross-validation over the grids.
    #[arg(long)]
    cv: bool,
    /// `loo` or a fold count.
    #[arg(long, default_value = "5", value_parser = crate::parse_folds)]
    #[serde(skip)]
    folds: Folds,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 6.0, 8.0])]
    s2_grid: Vec<f64>,
    /// s1 candidates as multiples of each s2.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 6.0, 8.0], conflicts_with = "s1_grid")]
    s1_multiples: Vec<f64>,
    /// Absolute s1 candidates.
    #[arg(long, value_delimiter = ',')]
    s1_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = MetricArg::Prediction)]
    metric: MetricArg,
    /// Write the cross-validation score table here.
    #[arg(long)]
    score_table: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Relative objective-change tolerance of the inner accelerated gradient solver.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, env = "SGFS_SEED", default_value_t = 0)]
    seed: u64,
}

pub fn run(args: SolveArgs) -> Result<Vec<String>> {
    let inst = load_csv_dataset_with_header(&args.matrix, &args.response, &args.groups, args.header)?;
    let tau = TruncationParam::new(args.tau)?;
    let cfg = SolverConfig {
        rng_seed: args.seed,
        agm_rel_tol: args.tol,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let method = match args.method {
        SolveMethod::Dc => Method::Dc,
        SolveMethod::Sgl => Method::ConstrainedSgl,
    };
    let start = Instant::now();

    let budget = if args.cv {
        let plan = CvPlan {
            folds: args.folds,
            s2_grid: args.s2_grid.clone(),
            s1_grid: match &args.s1_grid {
                Some(g) => S1Grid::Absolute(g.clone()),
                None => S1Grid::MultipleOfS2(args.s1_multiples.clone()),
            },
            metric: match args.metric {
                MetricArg::Prediction => CvMetric::PredictionError,
                MetricArg::Accuracy => CvMetric::Accuracy,
            },
        };
        let dataset = Dataset::new(inst.clone(), inst.clone(), None)?;
        let cv = cross_validate(&dataset, &plan, method, tau, &cfg)?;
        if let Some(path) = &args.score_table {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_score_table(BufWriter::new(file), &cv.table)?;
        }
        println!(
            "cross-validation picked s1 = {}, s2 = {} (mean score {:.6})",
            cv.best.s1, cv.best.s2, cv.best_score
        );
        cv.best
    } else {
        let (Some(s1), Some(s2)) = (args.s1, args.s2) else {
            bail!("--s1 and --s2 are required unless --cv is given");
        };
        match method {
            Method::Dc => {
                if s1.fract() != 0.0 || s2.fract() != 0.0 || s1 < 1.0 || s2 < 1.0 {
                    bail!("dc budgets are whole counts, got s1 = {s1}, s2 = {s2}");
                }
                SparsityBudget::count_relaxed(s1 as usize, s2 as usize, &inst.partition)?
            }
            Method::ConstrainedSgl => SparsityBudget::radius(s1, s2)?,
        }
    };

    let (x, converged, trace) = match method {
        Method::Dc => {
            let (x, trace) = dc_solve(&inst, &budget, tau, &cfg, None)?;
            (x, trace.converged, trace.objectives)
        }
        Method::ConstrainedSgl => {
            let (x, state) = agm_solve(&inst, &budget, None, &cfg, None)?;
            (x, state.converged, vec![state.objective])
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let f = objective(&inst, &x)?;
    let (n_features, n_groups) = selection_counts(&x, &inst.partition, tau)?;
    let accuracy = classify_accuracy(&x, &inst).ok();

    if let Some(path) = &args.output {
        write_vector_csv(path, &x).with_context(|| format!("writing {}", path.display()))?;
    }

    let name = format!("{:?}", args.method).to_lowercase();
    println!(
        "objective trace: {}",
        trace.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(" ")
    );
    let mut header = ["method", "s1", "s2", "objective", "# Feature", "# Group", "time (s)", "converged"]
        .map(String::from)
        .to_vec();
    let mut cells = vec![
        name.clone(),
        budget.s1.to_string(),
        budget.s2.to_string(),
        format!("{f:.6e}"),
        n_features.to_string(),
        n_groups.to_string(),
        format!("{elapsed:.3}"),
        converged.to_string(),
    ];
    if let Some(acc) = accuracy {
        header.push("train accuracy".into());
        cells.push(format!("{:.4}", acc));
    }
    print!("{}", render_table(&header, &[cells]));

    let mut row = Row::new(&name, inst.p(), 0, args.seed);
    row.time_seconds = elapsed;
    row.objective = Some(f);
    row.converged = converged;
    let failures = if converged {
        Vec::new()
    } else {
        vec![format!("{name} did not converge")]
    };
    if let Some(path) = args.report.clone() {
        #[derive(Serialize)]
        struct Echo<'a> {
            args: &'a SolveArgs,
            budget_s1: f64,
            budget_s2: f64,
            n_features: usize,
            n_groups: usize,
            trace: &'a [f64],
        }
        let echo = Echo {
            args: &args,
            budget_s1: budget.s1,
            budget_s2: budget.s2,
            n_features,
            n_groups,
            trace: &trace,
        };
        let mut report = Report::new("solve", args.seed, echo);
        report.rows.push(row);
        report.save(&path)?;
    }
    Ok(failures)
}
