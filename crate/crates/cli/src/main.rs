//! `rankshift`: rank a pool of classifiers from their softmax outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rankshift::study::{self, Metric, OutputFormat, Pool, SensitivityRequest};
use rankshift::synth::{self, SynthConfig, SynthReference};
use rankshift::{Error, ErrorKind, Measure, Result};

#[derive(Parser)]
#[command(name = "rankshift", version, about = "Rank classifier OOD generalization from softmax outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every model with the chosen measures and rank them.
    Rank(RankArgs),
    /// Correlate measure scores with ground-truth generalization.
    Correlate(CorrelateArgs),
    /// Repeat a correlation study on random subsets of the test samples.
    Sensitivity(SensitivityArgs),
    /// Generate a synthetic pool of prediction matrices.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `all` or a comma separated list of measure names.
    #[arg(long, default_value = "all")]
    measures: String,
    /// Report scores on the probit scale.
    #[arg(long)]
    probit: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "all")]
    measures: String,
    #[arg(long, default_value = "accuracy")]
    metric: String,
    /// Probit-transform scores and ground truth before Pearson and the fit.
    #[arg(long)]
    probit: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    measure: String,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.3,1.0")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "accuracy")]
    metric: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    /// The generating class distribution.
    Distribution,
    /// Predictions of the most accurate model.
    Best,
    None,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    models: usize,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// `lo,hi`
    #[arg(long, value_parser = parse_range)]
    acc_range: Option<(f64, f64)>,
    /// `lo,hi`
    #[arg(long, value_parser = parse_range)]
    temp_range: Option<(f64, f64)>,
    #[arg(long)]
    bias: Option<f64>,
    /// Samples in the in-distribution split; 0 disables it.
    #[arg(long)]
    id_samples: Option<usize>,
    #[arg(long, value_enum, default_value = "distribution")]
    reference: ReferenceArg,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Other => 1,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Rank(a) => {
            let format: OutputFormat = a.format.parse()?;
            let pool = Pool::from_manifest_path(&a.manifest)?;
            let measures = select_measures(&pool, &a.measures)?;
            let reports = study::rank(&pool, &measures, a.probit)?;
            write_out(&a.out, &study::render_reports(&reports, format)?)
        }
        Command::Correlate(a) => {
            let format: OutputFormat = a.format.parse()?;
            let metric: Metric = a.metric.parse()?;
            let pool = Pool::from_manifest_path(&a.manifest)?;
            let measures = select_measures(&pool, &a.measures)?;
            let reports = study::correlate(&pool, &measures, metric, a.probit)?;
            write_out(&a.out, &study::render_reports(&reports, format)?)
        }
        Command::Sensitivity(a) => {
            let format: OutputFormat = a.format.parse()?;
            let req = SensitivityRequest {
                measure: a.measure.parse()?,
                fractions: a.fractions,
                runs: a.runs,
                seed: a.seed,
                metric: a.metric.parse()?,
            };
            let pool = Pool::from_manifest_path(&a.manifest)?;
            let table = study::sensitivity(&pool, &req)?;
            write_out(&a.out, &study::render_sensitivity(&table, format)?)
        }
        Command::Synth(a) => {
            let mut cfg = SynthConfig::new(a.models, a.classes, a.samples, a.seed);
            if let Some(r) = a.acc_range {
                cfg.accuracy_range = r;
            }
            if let Some(r) = a.temp_range {
                cfg.temperature_range = r;
            }
            if let Some(b) = a.bias {
                cfg.bias_strength = b;
            }
            if let Some(n) = a.id_samples {
                cfg.id_samples = n;
            }
            let reference = match a.reference {
                ReferenceArg::Distribution => SynthReference::ClassDistribution,
                ReferenceArg::Best => SynthReference::BestModel,
                ReferenceArg::None => SynthReference::None,
            };
            let pool = synth::generate_pool(&cfg)?;
            synth::write_pool(&pool, &a.out_dir, reference)?;
            println!("{}", a.out_dir.join(synth::MANIFEST_FILE).display());
            Ok(())
        }
    }
}

/// `all` means every measure the manifest has side inputs for; an explicit
/// list must be fully supported.
fn select_measures(pool: &Pool, list: &str) -> Result<Vec<Measure>> {
    let measures = Measure::parse_list(list)?;
    if list.trim() == "all" {
        return Ok(measures
            .into_iter()
            .filter(|&m| pool.check_side_inputs(&[m]).is_ok())
            .collect());
    }
    pool.check_side_inputs(&measures)?;
    Ok(measures)
}

fn write_out(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    fs::write(path, body).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}
