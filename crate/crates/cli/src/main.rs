//! `ssbt`: solve built-in or file-defined problems and run sampled certifications.
//!
//! Exit codes: `solve` returns 0 on convergence and 2 when the budget runs out;
//! `verify` returns 0 iff the verdict is pass and 2 otherwise; any error is 1.

mod config;
mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semismooth::bundle::SolveStatus;
use semismooth::problems::{self, LowerLevelSolver, Problem, ProblemFile};
use semismooth::verify::{
    clarke_containment, scd_ss_ratio, singleton_fraction, ss_ratio, ClarkeOptions, RatioOptions, SingletonOptions,
};

use config::{parse_box, parse_seed, parse_vector, resolve, ConfigFile, SolveOverrides};
use report::{
    ListEntry, PointClarke, PointRatio, SolveOutput, VerifyDetail, VerifyOutput, SCHEMA_VERSION,
};

const SINGLETON_THRESHOLD: f64 = 0.999;

#[derive(Parser)]
#[command(name = "ssbt", version, about = "Semismooth bundle toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a problem with the proximal bundle solver.
    Solve(SolveArgs),
    /// Run a sampled certification.
    Verify(VerifyArgs),
    /// Print the registered problems.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Registered problem name.
    #[arg(long, conflicts_with = "problem_file", required_unless_present = "problem_file")]
    problem: Option<String>,
    /// JSON problem file.
    #[arg(long)]
    problem_file: Option<PathBuf>,
    /// Lower-level solver for the bilevel problems.
    #[arg(long, value_enum, default_value_t = LowerLevel::Analytic)]
    lower_level: LowerLevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum LowerLevel {
    Analytic,
    Numeric,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Start point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    max_oracle_calls: Option<usize>,
    /// TOML or JSON options file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the wall time out of the report.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Ss,
    Clarke,
    Singleton,
    Scdss,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: Check,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Base point; the certified points of the problem when absent.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Sampling box for `singleton`: `lo,hi` or per-coordinate pairs.
    #[arg(long = "box", allow_hyphen_values = true)]
    sample_box: Option<String>,
    /// Sample count: box samples, gradient samples or samples per shell.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_problem(args: &ProblemArgs) -> Result<Problem> {
    let solver = match args.lower_level {
        LowerLevel::Analytic => LowerLevelSolver::Analytic,
        LowerLevel::Numeric => LowerLevelSolver::Numeric,
    };
    match (&args.problem, &args.problem_file) {
        (Some(name), None) => Ok(problems::by_name_with(name, solver)?),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: ProblemFile =
                serde_json::from_str(&text).with_context(|| format!("parsing problem file {}", path.display()))?;
            Ok(file.into_problem()?)
        }
        _ => bail!("exactly one of --problem and --problem-file is required"),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => print_stdout(&(text + "\n"))?,
    }
    Ok(())
}

/// A closed pipe (e.g. `| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let problem = load_problem(&args.problem)?;
    let file = args.config.as_deref().map(ConfigFile::load).transpose()?;
    let flags = SolveOverrides {
        tol: args.tol,
        max_iterations: args.max_iterations,
        max_oracle_calls: args.max_oracle_calls,
        seed: args.seed.as_deref().map(parse_seed).transpose()?,
    };
    let (opts, seed) = resolve(file.as_ref(), &flags);
    let obj = problem.objective()?;
    let x0 = match &args.x0 {
        Some(text) => parse_vector(text)?,
        None => obj.x0.clone(),
    };
    let start = Instant::now();
    let r = problem.solve(Some(&x0), &opts)?;
    let elapsed = start.elapsed().as_secs_f64();
    let status = r.status;
    let out = SolveOutput {
        schema_version: SCHEMA_VERSION,
        problem: problem.name.clone(),
        options: opts,
        seed,
        x0,
        status: r.status,
        iterations: r.iterations,
        oracle_calls: r.oracle_calls,
        serious_steps: r.serious_steps,
        trace: r.trace,
        x: r.x,
        theta: r.theta,
        stationarity: r.stationarity,
        wall_time_seconds: (!args.no_timing).then_some(elapsed),
    };
    emit(&out, args.out.as_deref())?;
    Ok(match status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::BudgetExhausted => ExitCode::from(2),
    })
}

fn base_points(problem: &Problem, point: Option<&str>) -> Result<Vec<Vec<f64>>> {
    match point {
        Some(text) => Ok(vec![parse_vector(text)?]),
        None if problem.certified_points.is_empty() => bail!("problem '{}' has no certified points; pass --point", problem.name),
        None => Ok(problem.certified_points.clone()),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let problem = load_problem(&args.problem)?;
    let seed = match &args.seed {
        Some(s) => parse_seed(s)?,
        None => semismooth::sampling::DEFAULT_SEED,
    };
    let detail = match args.check {
        Check::Ss => {
            let mut opts = RatioOptions {
                seed,
                ..RatioOptions::default()
            };
            if let Some(n) = args.n {
                opts.samples_per_shell = n;
            }
            let mut points = Vec::new();
            for x in base_points(&problem, args.point.as_deref())? {
                let profile = ss_ratio(&problem.function, &problem.derivative, &x, &opts)?;
                points.push(PointRatio { point: x, profile });
            }
            VerifyDetail::Ss { points }
        }
        Check::Clarke => {
            let f = problem.scalar_function()?;
            let mut opts = ClarkeOptions {
                seed,
                ..ClarkeOptions::default()
            };
            if let Some(n) = args.n {
                opts.n_dirs = n;
            }
            let mut points = Vec::new();
            for x in base_points(&problem, args.point.as_deref())? {
                let report = clarke_containment(&f, &problem.derivative, &x, &opts)?;
                points.push(PointClarke { point: x, report });
            }
            VerifyDetail::Clarke { points }
        }
        Check::Singleton => {
            let (lo, hi) = match &args.sample_box {
                Some(text) => parse_box(text, problem.dim)?,
                None => problem.verify_box.clone(),
            };
            let n_samples = args.n.unwrap_or(10_000);
            let opts = SingletonOptions {
                seed,
                ..SingletonOptions::default()
            };
            let fraction = singleton_fraction(&problem.derivative, &lo, &hi, n_samples, &opts)?;
            VerifyDetail::Singleton {
                lo,
                hi,
                n_samples,
                fraction,
                threshold: SINGLETON_THRESHOLD,
            }
        }
        Check::Scdss => {
            let Some(scd) = &problem.scd else {
                bail!("problem '{}' has no SCD mapping", problem.name);
            };
            let (n, m) = (scd.mapping.n(), scd.mapping.m());
            let mut opts = RatioOptions {
                seed,
                ..RatioOptions::default()
            };
            if let Some(k) = args.n {
                opts.samples_per_shell = k;
            }
            let zbars: Vec<Vec<f64>> = match &args.point {
                None => scd.certified_graph_points.clone(),
                Some(text) => {
                    let p = parse_vector(text)?;
                    if p.len() == n {
                        // (x̄, σ(x̄), 0)
                        let mut z = p.clone();
                        z.extend((scd.selection)(&p));
                        z.extend(vec![0.0; m]);
                        vec![z]
                    } else if p.len() == n + 2 * m {
                        vec![p]
                    } else {
                        bail!("--point needs {n} or {} entries, got {}", n + 2 * m, p.len());
                    }
                }
            };
            let mut points = Vec::new();
            for z in zbars {
                let profile = scd_ss_ratio(&scd.mapping, &z, scd.graph_sampler.as_ref(), &opts)?;
                points.push(PointRatio { point: z, profile });
            }
            VerifyDetail::Scdss { points }
        }
    };
    let pass = match &detail {
        VerifyDetail::Ss { points } | VerifyDetail::Scdss { points } => points.iter().all(|p| p.profile.pass),
        VerifyDetail::Clarke { points } => points.iter().all(|p| p.report.contained),
        VerifyDetail::Singleton { fraction, threshold, .. } => fraction >= threshold,
    };
    let out = VerifyOutput {
        schema_version: SCHEMA_VERSION,
        problem: problem.name.clone(),
        seed,
        pass,
        detail,
    };
    emit(&out, args.out.as_deref())?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_list(json: bool) -> Result<ExitCode> {
    let entries: Vec<ListEntry> = problems::registry()
        .into_iter()
        .map(|p| ListEntry {
            has_objective: p.objective.is_some(),
            has_scd: p.scd.is_some(),
            name: p.name,
            dim: p.dim,
            description: p.description,
        })
        .collect();
    let text = if json {
        serde_json::to_string_pretty(&entries)? + "\n"
    } else {
        entries
            .iter()
            .map(|e| format!("{:<20} {:>3}  {}\n", e.name, e.dim, e.description))
            .collect()
    };
    print_stdout(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // usage errors exit with 1 so that 2 keeps its documented meaning
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::List { json } => cmd_list(*json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
