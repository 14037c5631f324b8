//! Subcommand implementations.

use std::path::{Path, PathBuf};

use cone_refine::embedding::{Classification, Embedding};
use cone_refine::linalg::norm2;
use cone_refine::problems::{generate, kkt_residuals, perturb, ConeProgram, ResidualSummary};
use cone_refine::refine::refine;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::files::{
    in_file, read_json, read_problem, write_json, ProblemFile, ReportJson, SolutionFile,
    SolutionInput,
};
use crate::{CheckArgs, CliError, ExperimentArgs, GenerateArgs, Outcome, PerturbArgs, RefineArgs};

/// Environment variable capping the number of experiment worker threads.
pub const THREADS_ENV: &str = "CONE_REFINE_THREADS";

/// CSV header written by `experiment`.
pub const CSV_HEADER: &str = "seed,kind,m,n,resid_before,resid_after,factor,time_ms";

fn default_witness_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.witness.json"))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Outcome, CliError> {
    let g = generate(args.seed, &args.profile, args.kind);
    let witness = args
        .witness
        .clone()
        .unwrap_or_else(|| default_witness_path(&args.out));
    write_json(&args.out, &ProblemFile::from_program(&g.program))?;
    write_json(&witness, &SolutionFile::from_classification(&g.witness))?;
    println!(
        "seed {}: {} instance, m = {}, n = {}",
        g.seed,
        g.kind.as_str(),
        g.program.m(),
        g.program.n()
    );
    println!("problem: {}", args.out.display());
    println!("witness: {}", witness.display());
    Ok(Outcome::Pass)
}

/// Residuals of a solution file against a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub classification: Classification,
    /// `None` when the point does not determine a solution or certificate.
    pub residuals: Option<ResidualSummary>,
    /// `||N(z)||` of the embedded point.
    pub normalized_residual: f64,
    /// Both certificates hold (recovered from a point only).
    pub degenerate: bool,
    pub passes: bool,
}

pub fn check_solution(
    program: &ConeProgram,
    solution: &SolutionFile,
    tol: f64,
) -> Result<CheckReport, CliError> {
    let emb = Embedding::new(program)?;
    let (classification, residuals, z, degenerate) = match solution.input(program)? {
        SolutionInput::Explicit(cls) => {
            let res = kkt_residuals(program, &cls)?;
            let z = emb.embed_solution(&cls)?;
            (cls, Some(res), z, false)
        }
        SolutionInput::Point(z) => {
            let rec = emb.recover(&z, tol)?;
            (rec.classification, rec.residuals, z, rec.degenerate)
        }
    };
    let normalized_residual = norm2(&emb.normalized_residual(&z)?);
    let passes = residuals.as_ref().is_some_and(|r| r.passes(tol));
    Ok(CheckReport {
        classification,
        residuals,
        normalized_residual,
        degenerate,
        passes,
    })
}

pub fn cmd_check(args: &CheckArgs) -> Result<Outcome, CliError> {
    let program = read_problem(&args.problem)?;
    let solution: SolutionFile = read_json(&args.solution)?;
    let r = check_solution(&program, &solution, args.tol).map_err(in_file(&args.solution))?;
    println!("kind: {}", r.classification.label());
    if r.degenerate {
        println!("note: both infeasibility certificates hold");
    }
    if let Some(res) = &r.residuals {
        for c in &res.conditions {
            println!(
                "  {}: 2-norm {:e}, max {:e}, normalized {:e}",
                c.name, c.two_norm, c.max_abs, c.normalized
            );
        }
        println!("max normalized residual: {:e}", res.max_normalized());
    }
    println!("||N(z)||: {:e}", r.normalized_residual);
    println!(
        "check: {} (tol {:e})",
        if r.passes { "PASS" } else { "FAIL" },
        args.tol
    );
    Ok(if r.passes {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

pub fn cmd_perturb(args: &PerturbArgs) -> Result<Outcome, CliError> {
    let program = read_problem(&args.problem)?;
    let solution: SolutionFile = read_json(&args.solution)?;
    let emb = Embedding::new(&program)?;
    let z = solution.point(&emb).map_err(in_file(&args.solution))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let noisy = perturb(&z, args.noise, &mut rng);
    if noisy[noisy.len() - 1] == 0.0 {
        return Err(CliError::Invalid(
            "perturbed point has zero homogenizing coordinate".into(),
        ));
    }
    write_json(&args.out, &SolutionFile::from_point(noisy))?;
    println!("wrote {}", args.out.display());
    Ok(Outcome::Pass)
}

pub fn cmd_refine(args: &RefineArgs) -> Result<Outcome, CliError> {
    let program = read_problem(&args.problem)?;
    let solution: SolutionFile = read_json(&args.solution)?;
    let emb = Embedding::new(&program)?;
    let z0 = solution.point(&emb).map_err(in_file(&args.solution))?;
    let (z, report) = refine(&emb, &z0, &args.flags.config())?;
    let rec = emb.recover(&z, args.tol)?;
    let mut out = SolutionFile::from_classification(&rec.classification);
    out.z = Some(z);
    out.report = Some(ReportJson::from(&report));
    write_json(&args.out, &out)?;
    println!("initial ||N(z)||: {:e}", report.initial_residual);
    println!("final ||N(z)||: {:e}", report.final_residual);
    println!("refinement factor: {}", report.refinement_factor);
    if report.short_circuited {
        println!("note: residual already below the short-circuit threshold");
    }
    if let Some(k) = report.steps.iter().position(|s| s.failed) {
        println!("note: line search failed at step {}", k + 1);
    }
    println!(
        "recovered: {}{}",
        rec.classification.label(),
        if rec.certified { " (certified)" } else { "" }
    );
    println!("wrote {}", args.out.display());
    Ok(Outcome::Pass)
}

/// One CSV row of `experiment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub resid_before: f64,
    pub resid_after: f64,
    pub factor: f64,
    pub time_ms: f64,
}

/// Thread pool honoring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
            CliError::Invalid(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))
}

/// Generates, perturbs and refines one instance. The noise uses the
/// ChaCha8 stream 1 of the instance seed, so it is independent of the
/// generator's draws (stream 0).
pub fn experiment_row(seed: u64, args: &ExperimentArgs) -> Result<ExperimentRow, CliError> {
    let g = generate(seed, &args.profile, args.kind);
    let emb = Embedding::new(&g.program)?;
    let z = emb.embed_solution(&g.witness)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let z0 = perturb(&z, args.noise, &mut rng);
    let (_, report) = refine(&emb, &z0, &args.flags.config())?;
    Ok(ExperimentRow {
        seed,
        kind: g.kind.as_str().to_string(),
        m: g.program.m(),
        n: g.program.n(),
        resid_before: report.initial_residual,
        resid_after: report.final_residual,
        factor: report.refinement_factor,
        time_ms: report.wall_time.as_secs_f64() * 1e3,
    })
}

/// Rows for seeds `seed..seed + count`, computed in parallel and returned
/// in seed order.
pub fn experiment_rows(args: &ExperimentArgs) -> Result<Vec<ExperimentRow>, CliError> {
    let end = args
        .seed
        .checked_add(args.count)
        .ok_or_else(|| CliError::Invalid("seed + count overflows".into()))?;
    let pool = thread_pool()?;
    pool.install(|| {
        (args.seed..end)
            .into_par_iter()
            .map(|s| experiment_row(s, args))
            .collect()
    })
}

/// Geometric mean of the finite factors.
pub fn geometric_mean(factors: impl IntoIterator<Item = f64>) -> f64 {
    let logs: Vec<f64> = factors
        .into_iter()
        .filter(|f| f.is_finite())
        .map(f64::ln)
        .collect();
    (logs.iter().sum::<f64>() / logs.len().max(1) as f64).exp()
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<Outcome, CliError> {
    let rows = experiment_rows(args)?;
    let mut w = csv::Writer::from_path(&args.csv)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: args.csv.display().to_string(),
        source,
    })?;
    let gm = geometric_mean(rows.iter().map(|r| r.factor));
    let exact = rows.iter().filter(|r| r.factor.is_infinite()).count();
    let tenfold = rows.iter().filter(|r| r.factor >= 10.0).count();
    println!("instances: {}", rows.len());
    println!("geometric-mean refinement factor: {gm:.4}");
    println!("factor >= 10: {tenfold}/{}", rows.len());
    if exact > 0 {
        println!("exact zero residual (excluded from the mean): {exact}");
    }
    println!("wrote {}", args.csv.display());
    Ok(Outcome::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_path_sits_next_to_the_problem() {
        assert_eq!(
            default_witness_path(Path::new("out/p.json")),
            PathBuf::from("out/p.witness.json")
        );
        assert_eq!(
            default_witness_path(Path::new("prob")),
            PathBuf::from("prob.witness.json")
        );
    }

    #[test]
    fn geometric_mean_skips_infinite_factors() {
        assert!((geometric_mean([10.0, 1000.0, f64::INFINITY]) - 100.0).abs() < 1e-9);
        assert_eq!(geometric_mean([]), 1.0);
    }
}
