use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use sgfs_core::baselines::{admm_project, dykstra_project, StopRule};
use sgfs_core::data::{gen_projection_instance, ProjBenchSpec};
use sgfs_core::eval::{Folds, Replication, S1Grid, SyntheticExperiment};
use sgfs_core::{sglp, SolverConfig, TruncationParam};

use crate::report::{mean_sd, render_table, Report, Row};
use crate::LogBaseArg;

const PROJ_METHODS: [&str; 3] = ["dykstra", "admm", "sglp"];

#[derive(Debug, Args, Serialize)]
pub struct BenchProjArgs {
    /// Problem sizes, each divisible by the group count.
    #[arg(long, value_delimiter = ',', default_values_t = [1_000usize, 10_000, 100_000])]
    p_list: Vec<usize>,
    /// Replications per size.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Base seed; replication r of every size uses seed + r.
    #[arg(long, env = "SGFS_SEED", default_value_t = 0)]
    seed: u64,
    /// Baselines stop once their objective is within this gap of sglp's.
    #[arg(long, default_value_t = 1e-3)]
    gap: f64,
    #[arg(long, default_value_t = StopRule::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = LogBaseArg::Natural)]
    log_base: LogBaseArg,
    /// JSON-lines report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    (2.0 * half_sq_dist(a, b)).sqrt()
}

/// sglp first for the reference objective, then both baselines under the
/// target-objective stopping rule.
fn proj_replication(args: &BenchProjArgs, p: usize, rep: usize) -> Vec<Row> {
    let seed = args.seed.wrapping_add(rep as u64);
    let spec = ProjBenchSpec {
        log_base: args.log_base.into(),
        ..ProjBenchSpec::new(p, seed)
    };
    let (v, budget, partition) = match gen_projection_instance(&spec) {
        Ok(inst) => inst,
        Err(e) => {
            return PROJ_METHODS
                .iter()
                .map(|m| Row::new(m, p, rep, seed).failed(&e))
                .collect()
        }
    };
    let (s1, s2) = (budget.s1, budget.s2);

    let mut sglp_row = Row::new("sglp", p, rep, seed);
    let start = Instant::now();
    let reference = match sglp(&v, s1, s2, &partition, &SolverConfig::default()) {
        Ok(out) => out.x,
        Err(e) => {
            return PROJ_METHODS
                .iter()
                .map(|m| Row::new(m, p, rep, seed).failed(&e))
                .collect()
        }
    };
    sglp_row.time_seconds = start.elapsed().as_secs_f64();
    let f_star = half_sq_dist(&reference, &v);
    sglp_row.objective = Some(f_star);
    sglp_row.distance_to_reference = Some(0.0);
    sglp_row.converged = true;

    let stop = StopRule::target(f_star, args.gap).with_max_iter(args.max_iter);
    let mut rows = Vec::with_capacity(3);
    for method in ["dykstra", "admm"] {
        let mut row = Row::new(method, p, rep, seed);
        let start = Instant::now();
        let result = if method == "admm" {
            admm_project(&v, s1, s2, &partition, &stop).map(|(x, s)| (x, s.converged))
        } else {
            dykstra_project(&v, s1, s2, &partition, &stop).map(|(x, s)| (x, s.converged))
        };
        row.time_seconds = start.elapsed().as_secs_f64();
        match result {
            Ok((x, converged)) => {
                row.objective = Some(half_sq_dist(&x, &v));
                row.distance_to_reference = Some(dist(&x, &reference));
                row.converged = converged;
            }
            Err(e) => row = row.failed(e),
        }
        rows.push(row);
    }
    rows.push(sglp_row);
    rows
}

pub fn run_proj(args: BenchProjArgs) -> Result<Vec<String>> {
    let mut rows = Vec::new();
    for &p in &args.p_list {
        // Discarded warm-up so first-touch costs do not land in replication 0.
        let _ = proj_replication(&args, p, 0);
        for rep in 0..args.reps {
            rows.extend(proj_replication(&args, p, rep));
        }
    }

    let mut header = vec!["method".to_string()];
    header.extend(args.p_list.iter().map(|p| format!("p = {p}")));
    let summarize = |pick: &dyn Fn(&Row) -> Option<f64>, fmt: &dyn Fn(f64, f64) -> String| -> Vec<Vec<String>> {
        PROJ_METHODS
            .iter()
            .map(|m| {
                let mut line = vec![m.to_string()];
                for &p in &args.p_list {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.method == *m && r.p == p && r.error.is_none())
                        .filter_map(pick)
                        .collect();
                    let (mean, sd) = mean_sd(&vals);
                    line.push(fmt(mean, sd));
                }
                line
            })
            .collect()
    };
    println!("Running time in seconds, mean ± sd over {} replications", args.reps);
    print!(
        "{}",
        render_table(&header, &summarize(&|r| Some(r.time_seconds), &|m, s| format!("{m:.4} ± {s:.4}")))
    );
    println!();
    println!("Distance to the sglp solution, mean over {} replications", args.reps);
    print!(
        "{}",
        render_table(&header, &summarize(&|r| r.distance_to_reference, &|m, _| format!("{m:.2e}")))
    );
    let log = match args.log_base {
        LogBaseArg::Natural => "natural",
        LogBaseArg::Ten => "base-10",
    };
    println!("\ns2 = 5 log(p) with the {log} logarithm; s1 = (√10/2)·s2");

    let seed = args.seed;
    let path = args.report.clone();
    let mut report = Report::new("bench-proj", seed, args);
    report.rows = rows;
    if let Some(path) = path {
        report.save(&path)?;
    }
    Ok(report
        .failures()
        .iter()
        .map(|r| {
            format!(
                "{} p={} rep={} seed={}: {}",
                r.method,
                r.p,
                r.rep,
                r.seed,
                r.error.as_deref().unwrap_or("did not converge")
            )
        })
        .collect())
}

#[derive(Debug, Args, Serialize)]
pub struct BenchSynthArgs {
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Base seed; replication r uses seed + r.
    #[arg(long, env = "SGFS_SEED", default_value_t = 0)]
    seed: u64,
    /// Truncation levels tried by DC's cross-validation; the pick is also
    /// the selection threshold for both methods.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.03, 0.1, 0.3])]
    tau_grid: Vec<f64>,
    /// `loo` or a fold count.
    #[arg(long, default_value = "loo", value_parser = crate::parse_folds)]
    #[serde(skip)]
    folds: Folds,
    /// DC group-count grid.
    #[arg(long, value_delimiter = ',')]
    dc_s2_grid: Option<Vec<f64>>,
    /// DC feature counts as multiples of s2.
    #[arg(long, value_delimiter = ',')]
    dc_s1_multiples: Option<Vec<f64>>,
    /// Convex baseline group-norm radii.
    #[arg(long, value_delimiter = ',')]
    sgl_s2_grid: Option<Vec<f64>>,
    /// Convex baseline L1 radii as multiples of s2.
    #[arg(long, value_delimiter = ',')]
    sgl_s1_multiples: Option<Vec<f64>>,
    /// Run replications concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn run_synth(args: BenchSynthArgs) -> Result<Vec<String>> {
    let mut exp = SyntheticExperiment::standard();
    exp.tau_grid = args
        .tau_grid
        .iter()
        .map(|&t| TruncationParam::new(t))
        .collect::<Result<_, _>>()?;
    exp.dc_plan.folds = args.folds;
    exp.sgl_plan.folds = args.folds;
    if let Some(g) = &args.dc_s2_grid {
        exp.dc_plan.s2_grid = g.clone();
    }
    if let Some(m) = &args.dc_s1_multiples {
        exp.dc_plan.s1_grid = S1Grid::MultipleOfS2(m.clone());
    }
    if let Some(g) = &args.sgl_s2_grid {
        exp.sgl_plan.s2_grid = g.clone();
    }
    if let Some(m) = &args.sgl_s1_multiples {
        exp.sgl_plan.s1_grid = S1Grid::MultipleOfS2(m.clone());
    }

    let one = |rep: usize| -> (usize, u64, Result<Replication, String>, f64) {
        let seed = args.seed.wrapping_add(rep as u64);
        let start = Instant::now();
        let out = exp.replicate(seed).map_err(|e| e.to_string());
        (rep, seed, out, start.elapsed().as_secs_f64())
    };
    let results: Vec<_> = if args.parallel {
        (0..args.reps).into_par_iter().map(one).collect()
    } else {
        (0..args.reps).map(one).collect()
    };

    let mut rows = Vec::new();
    for (rep, seed, out, secs) in &results {
        match out {
            Ok(r) => {
                for (name, m) in [("dc", &r.dc), ("sgl", &r.sgl)] {
                    let mut row = Row::new(name, exp.spec.p, *rep, *seed);
                    row.time_seconds = *secs;
                    row.objective = Some(m.cv_score);
                    row.metrics = Some(m.metrics.clone());
                    row.converged = true;
                    rows.push(row);
                }
            }
            Err(e) => {
                for name in ["dc", "sgl"] {
                    rows.push(Row::new(name, exp.spec.p, *rep, *seed).failed(e));
                }
            }
        }
    }

    let ok = results.iter().filter(|r| r.2.is_ok()).count();
    let mut picks: Vec<(f64, usize)> = args.tau_grid.iter().map(|&t| (t, 0)).collect();
    for r in results.iter().filter_map(|r| r.2.as_ref().ok()) {
        if let Some(slot) = picks.iter_mut().find(|(t, _)| *t == r.tau.get()) {
            slot.1 += 1;
        }
    }
    let header = ["Methods", "Esti.", "Pred.", "Prec.", "Rec."].map(String::from);
    let table: Vec<Vec<String>> = [("sgl", "constrained sgl"), ("dc", "dc")]
        .iter()
        .map(|(key, label)| {
            let ms: Vec<_> = rows
                .iter()
                .filter(|r| r.method == *key)
                .filter_map(|r| r.metrics.as_ref())
                .collect();
            let col = |f: &dyn Fn(&sgfs_core::eval::SelectionMetrics) -> f64| {
                mean_sd(&ms.iter().map(|m| f(m)).collect::<Vec<_>>()).0
            };
            vec![
                label.to_string(),
                format!("{:.4}", col(&|m| m.estimation_error)),
                format!("{:.2}", col(&|m| m.prediction_error)),
                format!("{:.4}", col(&|m| m.group_precision)),
                format!("{:.4}", col(&|m| m.group_recall)),
            ]
        })
        .collect();
    println!("Synthetic comparison, means over {ok} of {} replications", args.reps);
    print!("{}", render_table(&header, &table));
    let picks: Vec<String> = picks.iter().map(|(t, c)| format!("{t}: {c}")).collect();
    println!("τ picked by cross-validation: {}", picks.join(", "));
    if ok < args.reps {
        println!("{} replication(s) failed and are excluded", args.reps - ok);
    }

    let seed = args.seed;
    let path = args.report.clone();
    let mut report = Report::new("bench-synth", seed, args);
    report.rows = rows;
    if let Some(path) = path {
        report.save(&path)?;
    }
    Ok(report
        .failures()
        .iter()
        .filter(|r| r.method == "dc")
        .map(|r| {
            format!(
                "replication {} seed={}: {}",
                r.rep,
                r.seed,
                r.error.as_deref().unwrap_or("failed")
            )
        })
        .collect())
}
