use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use narrative_eval::harness::{
    compare_models, emit_report, json, render_ranking, report_from_raw, run_evaluation, EvalError,
    EvalOptions, EvaluationManifest, MetricReport, RawFixture, ReportFormat,
};
use narrative_eval::scoring::{check_desiderata, Candidate, CheckMethod};

#[derive(Parser)]
#[command(name = "narrative-eval", version)]
#[command(about = "Score character consistency of generated story frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one model from a manifest (or from raw dataset metrics)
    Eval {
        /// Manifest JSON; optional when --from-raw is given
        manifest: Option<PathBuf>,

        /// Write the JSON report here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,

        /// Also write a CSV report
        #[arg(long)]
        csv: Option<PathBuf>,

        /// Exclude and flag pairs with empty contours instead of failing
        #[arg(long)]
        skip_empty: bool,

        /// Diagonal load for near-singular covariances
        #[arg(long)]
        epsilon: Option<f64>,

        /// Divide surface distances by the mask diagonal
        #[arg(long)]
        normalize_distances: bool,

        /// Worker threads for per-pair metrics
        #[arg(long)]
        threads: Option<usize>,

        /// JSON config file with the same option names; flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,

        /// Score raw dataset metrics (cn, sr, la, bdp, mc, ads) from a JSON file
        #[arg(long)]
        from_raw: Option<PathBuf>,
    },
    /// Check the candidate transformation functions against the desiderata
    CheckFunctions {
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Rank models by overall score from report files
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,

        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Eval {
            manifest,
            out,
            csv,
            skip_empty,
            epsilon,
            normalize_distances,
            threads,
            config,
            from_raw,
        } => {
            let flags = FlagOverrides {
                skip_empty,
                epsilon,
                normalize_distances,
                threads,
            };
            eval(
                manifest.as_deref(),
                from_raw.as_deref(),
                config.as_deref(),
                flags,
                out.as_deref(),
                csv.as_deref(),
            )
        }
        Command::CheckFunctions { json } => check_functions(json),
        Command::Compare { reports, json } => compare(&reports, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

struct FlagOverrides {
    skip_empty: bool,
    epsilon: Option<f64>,
    normalize_distances: bool,
    threads: Option<usize>,
}

fn load_options(config: Option<&Path>, flags: FlagOverrides) -> Result<EvalOptions, EvalError> {
    let mut options = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| EvalError::File {
                path: path.to_path_buf(),
                source,
            })?;
            EvalOptions::from_json(&text)?
        }
        None => EvalOptions::default(),
    };
    options.skip_empty |= flags.skip_empty;
    options.normalize_distances |= flags.normalize_distances;
    if let Some(eps) = flags.epsilon {
        options.epsilon = eps;
    }
    if flags.threads.is_some() {
        options.threads = flags.threads;
    }
    Ok(options)
}

fn eval(
    manifest: Option<&Path>,
    from_raw: Option<&Path>,
    config: Option<&Path>,
    flags: FlagOverrides,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), EvalError> {
    let options = load_options(config, flags)?;
    let report = match (from_raw, manifest) {
        (Some(raw_path), manifest) => {
            let fixture = RawFixture::load(raw_path)?;
            let name = match (&fixture.model_name, manifest) {
                (Some(name), _) => name.clone(),
                (None, Some(path)) => EvaluationManifest::load(path)?.model_name,
                (None, None) => "raw".to_string(),
            };
            report_from_raw(&name, &fixture.metrics, &options, Some(raw_path))?
        }
        (None, Some(path)) => {
            let manifest = EvaluationManifest::load(path)?;
            run_evaluation(&manifest, &options)?
        }
        (None, None) => {
            return Err(EvalError::Options(
                "eval needs a manifest path or --from-raw".into(),
            ))
        }
    };
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    emit_report(&report, ReportFormat::Json, out)?;
    if let Some(path) = csv {
        emit_report(&report, ReportFormat::Csv, Some(path))?;
    }
    Ok(())
}

fn check_functions(as_json: bool) -> Result<(), EvalError> {
    let reports: Vec<_> = Candidate::ALL
        .iter()
        .map(|&c| check_desiderata(c))
        .collect();
    if as_json {
        println!(
            "{}",
            json::to_string_pretty(&reports).expect("serializable")
        );
        return Ok(());
    }
    println!(
        "{:<4} {:<13} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5}  {:>12}  verdict",
        "f", "expression", "i", "ii", "iii", "iv", "v*", "vi*", "max/min |f'|"
    );
    for r in &reports {
        let marks: Vec<&str> = r
            .criteria
            .iter()
            .map(|c| if c.passed { "pass" } else { "FAIL" })
            .collect();
        println!(
            "{:<4} {:<13} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5}  {:>12.4}  {}",
            r.candidate.to_string(),
            r.candidate.expression(),
            marks[0],
            marks[1],
            marks[2],
            marks[3],
            marks[4],
            marks[5],
            r.derivative_ratio,
            if r.all_passed() {
                "all criteria met"
            } else {
                "rejected"
            }
        );
    }
    let analytic: Vec<&str> = reports[0]
        .criteria
        .iter()
        .filter(|c| c.method == CheckMethod::Analytic)
        .map(|c| c.id)
        .collect();
    println!(
        "* criteria {} certified analytically; others sampled on [0, 400] at step 0.5",
        analytic.join(", ")
    );
    Ok(())
}

fn compare(paths: &[PathBuf], as_json: bool) -> Result<(), EvalError> {
    let reports = paths
        .iter()
        .map(|p| MetricReport::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = compare_models(&reports)?;
    if as_json {
        println!("{}", json::to_string_pretty(&rows).expect("serializable"));
    } else {
        print!("{}", render_ranking(&rows));
    }
    Ok(())
}
