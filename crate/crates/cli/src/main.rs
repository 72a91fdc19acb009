//! `toprank`: simulate data, evaluate and fit scorers, run the studies.
//!
//! Exit codes: 0 success, 1 an acceptance band failed, 2 bad input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use toprank::erm::ErmProblem;
use toprank::experiments::{
    config, decomposition_study, identity_suite, rate_study, DecompConfig, DecompStudyResult, IdentitiesConfig,
    IdentityReport, RateConfig, RateStudyResult, Study,
};
use toprank::oracle::ModelSpec;
use toprank::rankcrit::{even_grid, full_report, roc_points, write_roc_csv};
use toprank::{Dataset, RankStats, ScoringModel, SeedSpec, SyntheticModel, TopRate};

#[derive(Parser)]
#[command(
    name = "toprank",
    version,
    about = "Local bipartite ranking criteria, oracles and ERM"
)]
struct Cli {
    /// Worker threads for replication parallelism (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labelled sample from a synthetic model.
    Simulate {
        /// TOML file with a [model] section.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every empirical criterion of one scorer, as JSON.
    Eval {
        data: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        /// Rate of best instances, or `global`.
        #[arg(long)]
        u0: TopRate<f64>,
        /// Omit the rank statistics (allows tied scores).
        #[arg(long)]
        no_rank_stats: bool,
    },
    /// Empirical risk minimization over a scoring family.
    Erm {
        data: PathBuf,
        /// Problem description (JSON or TOML).
        #[arg(long)]
        problem: PathBuf,
        /// Overrides the problem seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical ROC points on an even grid of rates.
    Roc {
        data: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        /// Number of rates `u = i / (k + 1)`.
        #[arg(long, default_value_t = 99, value_parser = clap::value_parser!(u64).range(1..))]
        grid: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Excess-risk rate study.
    Rates(StudyArgs),
    /// Scaling study of the quantile plug-in remainder.
    Decomp(StudyArgs),
    /// Population, exact and concentration identity checks.
    Identities(StudyArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Scoring {
    /// Use a precomputed score column of the CSV.
    #[arg(long)]
    score: Option<String>,
    /// Score with a model given as JSON.
    #[arg(long)]
    scorer: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    config: PathBuf,
    /// Directory for the CSV and JSON results.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    model: ModelSpec,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Done,
    BandFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::BandFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate { config, n, seed, out } => simulate(&config, n as usize, seed, out.as_deref()),
        Command::Eval {
            data,
            scoring,
            u0,
            no_rank_stats,
        } => eval(&data, &scoring, &u0, no_rank_stats),
        Command::Erm {
            data,
            problem,
            seed,
            out,
        } => erm(&data, &problem, seed, out.as_deref()),
        Command::Roc {
            data,
            scoring,
            grid,
            out,
        } => roc(&data, &scoring, grid as usize, out.as_deref()),
        Command::Rates(args) => {
            let mut cfg: RateConfig = config::load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.grid.seed = s;
            }
            let result = rate_study(&cfg)?;
            print_rates(&result);
            finish_study(&result, &args)
        }
        Command::Decomp(args) => {
            let mut cfg: DecompConfig = config::load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.grid.seed = s;
            }
            let result = decomposition_study(&cfg)?;
            print_decomp(&result);
            finish_study(&result, &args)
        }
        Command::Identities(args) => {
            let mut cfg: IdentitiesConfig = config::load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.suite.seed = s;
            }
            let result = identity_suite(&cfg)?;
            print_identities(&result);
            finish_study(&result, &args)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn simulate(config_path: &Path, n: usize, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let file: ModelFile = config::load(config_path)?;
    let model = SyntheticModel::from_spec(file.model)?;
    let data = model.sample(n, &mut SeedSpec::new(seed).child_stream(0))?;
    data.write_csv(output(out)?)?;
    let c = data.counts();
    let line = format!(
        "n = {}, n+ = {}, n- = {}, p_hat = {:.6}",
        c.total(),
        c.pos,
        c.neg,
        c.pos as f64 / c.total() as f64
    );
    // keep stdout clean when it carries the CSV
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(Outcome::Done)
}

fn scores_of(data: &Dataset, scoring: &Scoring) -> Result<Vec<f64>> {
    match (&scoring.score, &scoring.scorer) {
        (Some(col), _) => Ok(data.column(col)?),
        (None, Some(path)) => {
            let model: ScoringModel = serde_json::from_str(&read_text(path)?)
                .with_context(|| format!("{} is not a scoring model", path.display()))?;
            let features: Vec<String> = data.names().to_vec();
            if model.dim() != data.dim() {
                bail!(
                    "scorer expects {} feature(s) but the data has {} column(s): {}",
                    model.dim(),
                    data.dim(),
                    features.join(", ")
                );
            }
            Ok(model.score_dataset(data)?)
        }
        (None, None) => Err(anyhow!("give --score or --scorer")),
    }
}

fn eval(data_path: &Path, scoring: &Scoring, u0: &TopRate<f64>, no_rank_stats: bool) -> Result<Outcome> {
    let data = Dataset::read_csv(data_path)?;
    let scores = scores_of(&data, scoring)?;
    let stats = if no_rank_stats {
        RankStats::Skip
    } else {
        RankStats::Required
    };
    let report = full_report(&scores, data.labels(), u0, stats)?;
    println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    Ok(Outcome::Done)
}

fn erm(data_path: &Path, problem_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let data = Dataset::read_csv(data_path)?;
    let text = read_text(problem_path)?;
    let mut problem: ErmProblem = if problem_path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        config::from_toml(&text)?
    };
    if let Some(s) = seed {
        problem.seed = s;
    }
    let result = problem.solve(&data)?;
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    Ok(Outcome::Done)
}

fn roc(data_path: &Path, scoring: &Scoring, k: usize, out: Option<&Path>) -> Result<Outcome> {
    let data = Dataset::read_csv(data_path)?;
    let scores = scores_of(&data, scoring)?;
    let points = roc_points(&scores, data.labels(), &even_grid::<f64>(k)?)?;
    let c = data.counts();
    write_roc_csv(&points, c.pos as f64 / c.total() as f64, output(out)?)?;
    Ok(Outcome::Done)
}

fn finish_study<S: Study>(result: &S, args: &StudyArgs) -> Result<Outcome> {
    let stem = args
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "study".into());
    result.write_files(&args.out_dir, &stem)?;
    println!(
        "results: {}",
        args.out_dir.join(format!("{stem}.{{csv,json}}")).display()
    );
    for w in result.warnings() {
        eprintln!("warning: {w}");
    }
    for c in result.checks() {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failures = result.failures();
    if failures.is_empty() {
        Ok(Outcome::Done)
    } else {
        let names: Vec<&str> = failures.iter().map(|c| c.name.as_str()).collect();
        eprintln!("failed: {}", names.join(", "));
        Ok(Outcome::BandFailed)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
}

fn print_rates(r: &RateStudyResult) {
    println!("{:>8} {:>12} {:>10} {:>8}", "n", "mean_excess", "se", "clipped");
    for p in &r.per_n {
        println!("{:>8} {:>12.4e} {:>10} {:>8}", p.n, p.mean_excess, opt(p.se), p.clipped);
    }
    match &r.slope {
        Some(f) => println!("slope {:.4} (se {})", f.slope, opt(f.slope_se)),
        None => println!("slope undefined"),
    }
}

fn print_decomp(r: &DecompStudyResult) {
    println!("sigma^2 = {:.6} (direct {:.6})", r.sigma_sq, r.sigma_sq_direct);
    println!(
        "{:>8} {:>14} {:>12} {:>12}",
        "n", "median|lambda|", "n*var(Z)", "mean Z"
    );
    for p in &r.per_n {
        println!(
            "{:>8} {:>14.4e} {:>12} {:>12.3e}",
            p.n,
            p.median_abs_lambda,
            p.n_var_z.map_or_else(|| "-".into(), |v| format!("{v:.5}")),
            p.mean_z
        );
    }
    match &r.lambda_slope {
        Some(f) => println!("remainder slope {:.4} (se {})", f.slope, opt(f.slope_se)),
        None => println!("remainder slope undefined"),
    }
}

fn print_identities(r: &IdentityReport) {
    println!(
        "{:<28} {:>12} {:>7} {:>12} {:>9}",
        "identity", "kind", "cases", "max|resid|", "failures"
    );
    for s in &r.summary {
        println!(
            "{:<28} {:>12} {:>7} {:>12.3e} {:>9}",
            s.identity,
            format!("{:?}", s.kind).to_lowercase(),
            s.count,
            s.max_abs_residual,
            s.failures
        );
    }
}
