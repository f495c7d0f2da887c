//! The `mvrank` command line.
//!
//! Every command is a pure function of its input files, flags and seed.
//! Randomness is drawn from child streams of the seed: stream 0 feeds the
//! Monte-Carlo volume points, stream 1 the bootstrap replicates.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::arank::{fit_arank, score_batch, ARankConfig, ARankModel};
use crate::bootstrap::{band_grid, bootstrap_band, BootstrapConfig};
use crate::data::{bounding_box, Dataset};
use crate::error::{Error, Result};
use crate::io::{dataset_to_csv, read_dataset};
use crate::kde::default_bandwidth;
use crate::mvcurve::{
    discretize, empirical_mv_curve, mixture_reference_curve, mv_star_gaussian_diag, ScoreSample,
};
use crate::rng::RandomSource;
use crate::scoring::{simulate_mixture, GaussianParams, MixtureParams, Scorer};
use crate::volume::{VolumeEstimator, DEFAULT_MC_SAMPLES};

const MC_STREAM: u64 = 0;
const BOOTSTRAP_STREAM: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "mvrank", version, about = "Mass-Volume curves and A-Rank anomaly scoring")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,

    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
    #[arg(long, global = true, default_value_t = 5)]
    pub depth: u32,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, global = true, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Kernel bandwidth; defaults to sd(scores)·(ln n / n)^{1/5}.
    #[arg(long, global = true)]
    pub bandwidth: Option<f64>,
    #[arg(long, global = true, default_value_t = 512)]
    pub grid: usize,
    /// Bootstrap replicates; defaults to the sample size.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub rademacher_c: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub padding: f64,
    /// Scorer as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    pub scorer: Option<String>,
    #[arg(long, global = true)]
    pub naive: bool,
    /// Reject points outside the histogram box instead of clamping them.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            depth: 5,
            epsilon: 0.05,
            eta: 0.1,
            delta: 0.05,
            tau: None,
            bandwidth: None,
            grid: 512,
            reps: None,
            rademacher_c: 0.0,
            padding: 0.05,
            scorer: None,
            naive: false,
            strict: false,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(name = "gaussian-1d")]
    Gaussian1d,
    #[value(name = "gaussian-diag")]
    GaussianDiag,
    Mixture,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample from a Gaussian mixture.
    Simulate {
        #[arg(long)]
        n: usize,
        /// Mixture as inline JSON or a JSON file; defaults to the planar benchmark.
        #[arg(long)]
        mixture: Option<String>,
    },
    /// Empirical MV curve of a scorer on a dataset.
    Mvcurve { data: PathBuf },
    /// Smoothed-bootstrap confidence band around the empirical MV curve.
    Band {
        data: PathBuf,
        /// Where to write the JSON summary; stderr when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Fit an A-Rank model.
    ArankFit { data: PathBuf },
    /// Score points with a fitted A-Rank model.
    ArankScore {
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Optimal MV curve of a known law on the grid `g/G`.
    Oracle {
        #[arg(long, value_enum)]
        family: Family,
        /// Comma-separated per-axis variances (gaussian families).
        #[arg(long, value_delimiter = ',')]
        diag_cov: Option<Vec<f64>>,
        #[arg(long)]
        mixture: Option<String>,
        /// Reference sample size for the mixture family.
        #[arg(long, default_value_t = 50_000)]
        n_ref: usize,
    },
}

fn json_arg(value: &str) -> Result<String> {
    if value.trim_start().starts_with('{') {
        Ok(value.to_string())
    } else {
        Ok(fs::read_to_string(value)?)
    }
}

fn load_scorer(config: &RunConfig) -> Result<Scorer> {
    let arg = config
        .scorer
        .as_deref()
        .ok_or_else(|| Error::param("--scorer is required"))?;
    Scorer::from_json(&json_arg(arg)?)
}

fn load_mixture(arg: Option<&str>) -> Result<MixtureParams> {
    match arg {
        None => Ok(MixtureParams::benchmark_2d()),
        Some(s) => {
            let m: MixtureParams = serde_json::from_str(&json_arg(s)?)?;
            m.validate()?;
            Ok(m)
        }
    }
}

fn load_data(path: &Path) -> Result<Dataset> {
    read_dataset(fs::File::open(path)?)
}

fn estimator_for(config: &RunConfig, data: &Dataset) -> Result<VolumeEstimator> {
    let bbox = bounding_box(data, config.padding)?;
    let mut rng = RandomSource::new(config.seed).split(MC_STREAM);
    VolumeEstimator::new(bbox, config.mc_samples, &mut rng)
}

pub fn cmd_simulate(config: &RunConfig, mixture: &MixtureParams, n: usize) -> Result<String> {
    let data = simulate_mixture(mixture, n, &mut RandomSource::new(config.seed))?;
    Ok(dataset_to_csv(&data))
}

pub fn cmd_mvcurve(config: &RunConfig, data: &Dataset, scorer: &Scorer) -> Result<String> {
    let est = estimator_for(config, data)?;
    let sample = ScoreSample::from_scorer(scorer, data)?;
    Ok(empirical_mv_curve(&sample, scorer, &est)?.to_csv_string())
}

#[derive(Debug, Serialize)]
pub struct BandSummary {
    pub nu_eta: f64,
    pub radius: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub reps: usize,
    pub seed: u64,
    pub bandwidth: f64,
    pub naive: bool,
}

/// Band CSV and JSON summary.
pub fn cmd_band(config: &RunConfig, data: &Dataset, scorer: &Scorer) -> Result<(String, String)> {
    let est = estimator_for(config, data)?;
    let sample = ScoreSample::from_scorer(scorer, data)?;
    let bandwidth = match config.bandwidth {
        Some(h) => h,
        None => {
            let sd = sample.std_dev();
            default_bandwidth(sample.len(), if sd > 0.0 { sd } else { 1.0 })?
        }
    };
    let bc = BootstrapConfig {
        bandwidth,
        epsilon: config.epsilon,
        eta: config.eta,
        reps: config.reps.unwrap_or(sample.len()),
        grid: config.grid,
        naive: config.naive,
    };
    let rng = RandomSource::new(config.seed).split(BOOTSTRAP_STREAM);
    let band = bootstrap_band(&sample, scorer, &est, &bc, &rng)?;
    let csv = band.to_csv_string(&band_grid(bc.epsilon, bc.grid))?;
    let summary = BandSummary {
        nu_eta: band.nu_eta,
        radius: band.radius,
        epsilon: band.epsilon,
        eta: band.eta,
        reps: band.replications,
        seed: config.seed,
        bandwidth,
        naive: band.naive,
    };
    Ok((csv, serde_json::to_string_pretty(&summary)? + "\n"))
}

pub fn cmd_arank_fit(config: &RunConfig, data: &Dataset) -> Result<String> {
    let ac = ARankConfig {
        depth: config.depth,
        epsilon: config.epsilon,
        phi: None,
        delta: config.delta,
        rademacher_c: config.rademacher_c,
        tau: config.tau,
        bbox: None,
        padding: config.padding,
        strict: config.strict,
    };
    Ok(fit_arank(data, &ac)?.to_json() + "\n")
}

pub fn cmd_arank_score(model: &ARankModel, data: &Dataset) -> Result<String> {
    let mut out = String::from("score,density_cdf\n");
    for (s, f) in score_batch(model, data)? {
        out.push_str(&format!("{s},{f}\n"));
    }
    Ok(out)
}

pub fn cmd_oracle(
    config: &RunConfig,
    family: Family,
    diag_cov: Option<&[f64]>,
    mixture: Option<&MixtureParams>,
    n_ref: usize,
) -> Result<String> {
    let curve = match family {
        Family::Gaussian1d | Family::GaussianDiag => {
            let cov = diag_cov.map(<[f64]>::to_vec).unwrap_or_else(|| match family {
                Family::Gaussian1d => vec![1.0],
                _ => vec![1.0, 1.0],
            });
            if family == Family::Gaussian1d && cov.len() != 1 {
                return Err(Error::param("gaussian-1d takes a single variance"));
            }
            let params = GaussianParams::diagonal(vec![0.0; cov.len()], cov)?;
            discretize(|a| mv_star_gaussian_diag(a, &params), config.grid)?
        }
        Family::Mixture => {
            let m = mixture.cloned().unwrap_or_else(MixtureParams::benchmark_2d);
            let mut rng = RandomSource::new(config.seed);
            let reference = simulate_mixture(&m, n_ref, &mut rng.split(2))?;
            let est = estimator_for(config, &reference)?;
            let raw = mixture_reference_curve(&m, n_ref, &est, &mut rng)?;
            discretize(|a| raw.eval(a), config.grid)?
        }
    };
    Ok(curve.to_csv_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let config = &cli.config;
    let out = config.out.as_deref();
    match &cli.command {
        Command::Simulate { n, mixture } => {
            let m = load_mixture(mixture.as_deref())?;
            emit(out, &cmd_simulate(config, &m, *n)?)
        }
        Command::Mvcurve { data } => emit(out, &cmd_mvcurve(config, &load_data(data)?, &load_scorer(config)?)?),
        Command::Band { data, summary } => {
            let (csv, json) = cmd_band(config, &load_data(data)?, &load_scorer(config)?)?;
            emit(out, &csv)?;
            match summary {
                Some(p) => fs::write(p, json)?,
                None => eprint!("{json}"),
            }
            Ok(())
        }
        Command::ArankFit { data } => emit(out, &cmd_arank_fit(config, &load_data(data)?)?),
        Command::ArankScore { data, model } => {
            let model = ARankModel::from_json(&fs::read_to_string(model)?)?;
            emit(out, &cmd_arank_score(&model, &load_data(data)?)?)
        }
        Command::Oracle {
            family,
            diag_cov,
            mixture,
            n_ref,
        } => {
            let m = match family {
                Family::Mixture => Some(load_mixture(mixture.as_deref())?),
                _ => None,
            };
            emit(out, &cmd_oracle(config, *family, diag_cov.as_deref(), m.as_ref(), *n_ref)?)
        }
    }
}

/// Parses arguments, runs the command and maps errors to exit codes
/// (2 usage, 3 data, 4 numerical).
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
