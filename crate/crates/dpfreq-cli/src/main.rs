//! `dpfreq`: calibration queries, single protocol runs, weight assignment,
//! JSON-configured experiment sweeps emitting CSV, and ingestion of raw
//! check-in and income exports into the canonical dataset format.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpfreq::data::{ingest_checkins_text, ingest_income_text, synth_uniform, CheckinBinning, Dataset};
use dpfreq::experiment::{run_to_csv, ExperimentConfig};
use dpfreq::mech::calibrate::{
    calibrate_p_thm1, check_thm2, max_feasible_z, min_beta_thm1, min_delta_thm1,
};
use dpfreq::mech::{MechanismParams, Reporting};
use dpfreq::sim::{
    run_dpds_with, run_tss_prime_with, run_tss_with, OpCounters, SimOptions, Transcript,
};
use dpfreq::weights::{
    closed_form_weights, expected_squared_error, optimize_weights, relative_report_variance,
    unweighted,
};
use dpfreq::Error;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dpfreq",
    version,
    about = "Sampling-based differentially private frequency estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print participation probability, failure probability, and feasibility.
    Calibrate(CalibrateArgs),
    /// Run one protocol once and print the estimate and transcript summary.
    Simulate(SimulateArgs),
    /// Print the weight assignment for per-group budgets and sizes.
    Weights(WeightsArgs),
    /// Run a JSON-configured experiment sweep and emit CSV.
    Experiment(ExperimentArgs),
    /// Convert raw data exports to the canonical dataset format.
    #[command(subcommand)]
    Ingest(IngestCommand),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Baseline calibration: p = 1 - e^(-epsilon).
    #[arg(long)]
    thm1: bool,
    /// Tighter calibration with slack z: p = 1 - e^(-z-epsilon).
    #[arg(long, conflicts_with = "thm1")]
    thm2: bool,
    #[arg(long)]
    epsilon: f64,
    /// Population size, for failure-probability bounds.
    #[arg(long)]
    n: Option<u64>,
    /// Item-domain size.
    #[arg(long)]
    items: Option<usize>,
    /// Assumed minimum per-item frequency.
    #[arg(long)]
    beta: Option<f64>,
    /// Target failure probability.
    #[arg(long)]
    delta: Option<f64>,
    /// Slack for the tighter calibration; omitted means the largest feasible.
    #[arg(long)]
    z: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Protocol to run.
    #[arg(long, value_parser = ["dpds", "tss", "tss-prime"])]
    protocol: String,
    /// Canonical dataset file; omitted runs on synthetic uniform data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Synthetic population size when no dataset is given.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Synthetic item-domain size when no dataset is given.
    #[arg(long, default_value_t = 10)]
    items: usize,
    /// Participation probability; mutually exclusive with --epsilon.
    #[arg(long, conflicts_with = "epsilon")]
    p: Option<f64>,
    /// Budget from which p = 1 - e^(-epsilon) is derived.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report-set fraction for the two-stage protocols.
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    /// Adaptive preference for the true item.
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Reporting rule for the two-stage protocols.
    #[arg(long, default_value = "uniform", value_parser = ["uniform", "adaptive"])]
    chi: String,
    /// Collusion bound for the padded protocol.
    #[arg(long, default_value_t = 0)]
    phi: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Record every message and write the transcript log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    /// Comma-separated per-group budgets.
    #[arg(long = "eps", value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    /// Comma-separated group sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<u64>,
    /// vwa: inverse-variance closed form; owa: optimizer; uwa: uniform.
    #[arg(long, default_value = "vwa", value_parser = ["vwa", "owa", "uwa"])]
    method: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Whitespace-delimited check-ins: user id, [timestamp,] latitude,
    /// longitude[, place id]. Each user gets their most-visited grid cell.
    Checkins(CheckinsArgs),
    /// Delimited rows with a numeric income field, binned into intervals.
    Income(IncomeArgs),
}

#[derive(Args)]
struct CheckinsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    lat_min: f64,
    #[arg(long, default_value_t = 45.0)]
    lat_max: f64,
    #[arg(long, default_value_t = -100.0)]
    lon_min: f64,
    #[arg(long, default_value_t = -80.0)]
    lon_max: f64,
    /// Cell edge length in degrees.
    #[arg(long, default_value_t = 5.0)]
    cell: f64,
}

#[derive(Args)]
struct IncomeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Interval width: item = floor(income / width) + 1.
    #[arg(long, default_value_t = 100.0)]
    width: f64,
    /// 0-based field index holding the income.
    #[arg(long, default_value_t = 0)]
    column: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Calibrate(args) => calibrate(args),
        Command::Simulate(args) => simulate(args),
        Command::Weights(args) => weights(args),
        Command::Experiment(args) => experiment(args),
        Command::Ingest(IngestCommand::Checkins(args)) => ingest_checkins(args),
        Command::Ingest(IngestCommand::Income(args)) => ingest_income(args),
    }
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    if args.thm2 {
        return calibrate_tight(args);
    }
    let p = calibrate_p_thm1(args.epsilon)?;
    println!("p={p:.6}");
    if let (Some(n), Some(items)) = (args.n, args.items) {
        let Some(beta) = args.beta else {
            bail!("--beta is required to bound the failure probability");
        };
        match min_delta_thm1(n, items, args.epsilon, beta) {
            Ok(floor) => {
                println!("delta-floor={}", sci(floor));
                match args.delta {
                    Some(target) if target < floor => {
                        println!("feasible=false (target {target} below the floor)")
                    }
                    Some(_) | None => println!("feasible=true"),
                }
                if let Some(delta) = args.delta {
                    let beta_min = min_beta_thm1(n, items, args.epsilon, delta)?;
                    println!("beta-min={beta_min:.6}");
                }
            }
            Err(Error::Infeasible(why)) => println!("feasible=false ({why})"),
            Err(other) => return Err(other.into()),
        }
    }
    Ok(())
}

fn calibrate_tight(args: CalibrateArgs) -> Result<()> {
    let (Some(n), Some(items), Some(beta), Some(delta)) =
        (args.n, args.items, args.beta, args.delta)
    else {
        bail!("--thm2 needs --n, --items, --beta, and --delta");
    };
    let z = match args.z {
        Some(z) => z,
        None => {
            let z = max_feasible_z(n, items, args.epsilon, delta, beta)?;
            println!("z-max={z:.6}");
            z
        }
    };
    let check = check_thm2(n, items, args.epsilon, delta, beta, z)?;
    println!("z={z:.6}");
    println!("beta-min={:.6}", check.beta_min);
    match (check.feasible, check.p, check.reason) {
        (true, Some(p), _) => {
            println!("feasible=true");
            println!("p={p:.6}");
        }
        (_, _, reason) => println!(
            "feasible=false ({})",
            reason.unwrap_or_else(|| "bounds violated".into())
        ),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let dataset = match &args.dataset {
        Some(path) => Dataset::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => synth_uniform(args.n, args.items, args.seed)?,
    };
    let records = dataset.encode()?;
    let p = match (args.p, args.epsilon) {
        (Some(p), _) => p,
        (None, Some(eps)) => calibrate_p_thm1(eps)?,
        (None, None) => bail!("need --p or --epsilon"),
    };
    let options = SimOptions {
        record_messages: args.log.is_some(),
        field: None,
    };
    let chi = match args.chi.as_str() {
        "adaptive" => Reporting::Adaptive,
        _ => Reporting::Uniform,
    };
    let mut params = MechanismParams::two_stage(p, args.alpha, chi, args.gamma);
    params.phi = args.phi;

    println!(
        "protocol={} users={} items={} p={p:.6} seed={}",
        args.protocol,
        dataset.n_users(),
        dataset.n_items(),
        args.seed
    );
    let transcript = match args.protocol.as_str() {
        "dpds" => {
            let run = run_dpds_with(&records, p, args.seed, &options)?;
            print_estimate(run.estimate.normalized());
            run.transcript
        }
        tag => {
            let run = if tag == "tss-prime" {
                run_tss_prime_with(&records, &params, args.seed, &options)?
            } else {
                run_tss_with(&records, &params, args.seed, &options)?
            };
            print_estimate(run.estimate.normalized());
            let reporters: Vec<String> = run
                .election
                .items()
                .iter()
                .map(|e| format!("{}:{}x{}", e.item, e.reporters, e.elected.len()))
                .collect();
            println!("elections(item:reporters x elected)={}", reporters.join(" "));
            run.transcript
        }
    };
    print_summary(&transcript);
    if let Some(path) = &args.log {
        fs::write(path, transcript.export_log()?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("log={}", path.display());
    }
    Ok(())
}

fn print_estimate(values: &[f64]) {
    let joined: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    println!("estimate={}", joined.join(" "));
}

fn print_summary(transcript: &Transcript) {
    let mut total = OpCounters::default();
    for counters in transcript.counters().values() {
        total += *counters;
    }
    println!(
        "traffic: residues={} items={} ids={} bits={}",
        total.residue_sent, total.item_sent, total.id_sent, total.bit_sent
    );
    println!(
        "work: field-adds={} field-draws={} participation-draws={}",
        total.field_add, total.field_draw, total.bernoulli_draw
    );
    if transcript.recorded() {
        println!("messages={}", transcript.messages().len());
    }
}

fn weights(args: WeightsArgs) -> Result<()> {
    if args.eps.len() != args.sizes.len() {
        bail!(
            "got {} budgets and {} sizes",
            args.eps.len(),
            args.sizes.len()
        );
    }
    let variances: Vec<f64> = args
        .eps
        .iter()
        .map(|&e| relative_report_variance(e).map_err(Into::into))
        .collect::<Result<_>>()?;
    let assignment = match args.method.as_str() {
        "owa" => optimize_weights(&args.sizes, &variances, 1e-6)?,
        "uwa" => unweighted(args.eps.len())?,
        _ => closed_form_weights(&variances)?,
    };
    for (g, w) in assignment.weights().iter().enumerate() {
        println!(
            "group {}: epsilon={} n={} weight={w:.4}",
            g + 1,
            args.eps[g],
            args.sizes[g]
        );
    }
    let error = expected_squared_error(assignment.weights(), &args.sizes, &variances);
    println!("expected-squared-error={}", sci(error));
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config = ExperimentConfig::from_json(&text)?;
    let csv = run_to_csv(&config)?;
    match &args.out {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn ingest_checkins(args: CheckinsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let binning = CheckinBinning {
        lat_min: args.lat_min,
        lat_max: args.lat_max,
        lon_min: args.lon_min,
        lon_max: args.lon_max,
        cell_degrees: args.cell,
    };
    let (dataset, report) = ingest_checkins_text(&text, &binning)?;
    dataset.save(&args.output)?;
    eprintln!(
        "rows={} skipped={} users={} cells={}",
        report.rows_read,
        report.rows_skipped,
        report.users,
        dataset.n_items()
    );
    Ok(())
}

fn ingest_income(args: IncomeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let (dataset, report) = ingest_income_text(&text, args.width, args.column)?;
    dataset.save(&args.output)?;
    eprintln!(
        "rows={} skipped={} users={} intervals={}",
        report.rows_read,
        report.rows_skipped,
        report.users,
        dataset.n_items()
    );
    Ok(())
}

/// Scientific notation for small magnitudes, plain otherwise; mirrors the
/// CSV convention.
fn sci(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}
