use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsbm_core::{ModelParams, Preset, QuadConfig};

use crate::Failure;

#[derive(Parser)]
#[command(
    name = "rsbm",
    version,
    about = "Refracted skew Brownian motion: densities, sampling and tail risk"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Transition density from x0 on a grid of y.
    Density(GridCmd),
    /// Distribution function from x0 on a grid of z.
    Cdf(GridCmd),
    /// Fit the truncated-normal mixture to the CDF from the skew level.
    Fit(FitCmd),
    /// Draw from a fitted mixture.
    Sample(SampleCmd),
    /// Terminal values of the skew random walk.
    Simulate(SimulateCmd),
    /// VaR and CVaR from a fitted mixture, the tabulated CDF and Monte Carlo.
    Risk(RiskCmd),
    /// Run the numerical checks for one parameter set.
    Validate(ValidateCmd),
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Named parameter set, or custom.
    #[arg(long, default_value = "custom")]
    pub model: String,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_minus: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_plus: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub skew_level: Option<f64>,
    /// Time horizon.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Start point; defaults to the skew level.
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
}

#[derive(Args, Clone)]
pub struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Args, Clone)]
pub struct QuadArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub abs_tol: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args)]
pub struct GridCmd {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Evaluation grid in absolute coordinates (default -20..20, 401 points).
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fit grid as offsets from the skew level (default -20..20, 2500 points).
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Seeds the perturbed starting points of the optimizer.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleCmd {
    #[arg(long)]
    pub fit_file: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of paths.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Lattice steps per path.
    #[arg(long, default_value_t = 4000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct RiskCmd {
    #[arg(long)]
    pub fit_file: PathBuf,
    /// CDF grid as offsets from the skew level (default -20..20, 2500 points).
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Monte-Carlo sample size.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Confidence levels, evenly spaced from alpha + 0.01 to 0.995.
    #[arg(long, default_value_t = 100)]
    pub levels: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct ValidateCmd {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Sample size of the goodness-of-fit check.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A fully resolved and range-checked model.
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub name: &'static str,
    pub params: ModelParams,
    pub t: f64,
    pub x0: f64,
}

fn finite(v: f64, flag: &str) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::input(format!("--{flag} must be finite, got {v}")))
    }
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let (name, base) = match self.model.as_str() {
            "custom" => ("custom", None),
            s => match Preset::from_name(s) {
                Some(p) => (p.name(), Some(p)),
                None => {
                    return Err(Failure::input(format!(
                        "unknown model {s:?}; expected model1, model2, model3, model4 or custom"
                    )))
                }
            },
        };
        let pick = |v: Option<f64>, preset: Option<f64>, flag: &str| -> Result<f64, Failure> {
            match v.or(preset) {
                Some(v) => finite(v, flag),
                None => Err(Failure::input(format!("--model custom needs --{flag}"))),
            }
        };
        let bp = base.map(|p| p.params());
        let mu_minus = pick(self.mu_minus, bp.map(|p| p.mu_minus), "mu-minus")?;
        let mu_plus = pick(self.mu_plus, bp.map(|p| p.mu_plus), "mu-plus")?;
        let beta = pick(self.beta, bp.map(|p| p.beta), "beta")?;
        let t = pick(self.t, base.map(|p| p.horizon()), "t")?;
        let skew_level = finite(self.skew_level.unwrap_or(0.0), "skew-level")?;
        let x0 = finite(self.x0.unwrap_or(skew_level), "x0")?;
        let params =
            ModelParams::new(mu_minus, mu_plus, beta, skew_level).map_err(Failure::from)?;
        if t <= 0.0 {
            return Err(Failure::input(format!("--t must be positive, got {t}")));
        }
        Ok(Resolved {
            name,
            params,
            t,
            x0,
        })
    }
}

impl GridArgs {
    pub fn resolve(&self, default_points: usize) -> Result<Vec<f64>, Failure> {
        let lo = finite(self.grid_min.unwrap_or(-20.0), "grid-min")?;
        let hi = finite(self.grid_max.unwrap_or(20.0), "grid-max")?;
        let n = self.grid_points.unwrap_or(default_points);
        if n < 2 {
            return Err(Failure::input(format!(
                "--grid-points must be at least 2, got {n}"
            )));
        }
        if lo >= hi {
            return Err(Failure::input(format!(
                "--grid-min {lo} must be below --grid-max {hi}"
            )));
        }
        Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect())
    }

    pub fn is_default(&self) -> bool {
        self.grid_min.is_none() && self.grid_max.is_none() && self.grid_points.is_none()
    }
}

impl QuadArgs {
    pub fn resolve(&self) -> Result<QuadConfig, Failure> {
        let d = QuadConfig::default();
        let q = QuadConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            ..d
        };
        q.validate().map_err(|e| Failure::input(e.to_string()))?;
        Ok(q)
    }
}
