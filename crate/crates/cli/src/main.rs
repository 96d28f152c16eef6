mod args;
mod validate;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;
use rsbm_core::density::{cdf, transition_density};
use rsbm_core::risk::{confidence_grid, risk_reports, RiskReport};
use rsbm_core::sampler::{
    cdf_table, fit_tna, sample_tna_many, simulate_paths, CdfTable, FitConfig, PathSimConfig, TnaFit,
};
use rsbm_core::Error;
use serde::Serialize;

use args::{Cli, Command, FitCmd, Format, GridCmd, OutputArgs, RiskCmd, SampleCmd, SimulateCmd};

/// Offset from the skew level used when a density grid point lands on it.
const SKEW_EPS: f64 = 1e-8;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Fit { .. }) { 3 } else { 2 };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

fn io_failure(path: Option<&Path>, e: io::Error) -> Failure {
    match path {
        Some(p) => Failure::input(format!("{}: {e}", p.display())),
        None => Failure::input(e.to_string()),
    }
}

/// Full round-trip formatting.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_out(path: Option<&Path>, body: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| io_failure(Some(p), e)),
        None => io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| io_failure(None, e)),
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn read_fit(path: &Path) -> Result<TnaFit, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(Some(path), e))?;
    let fit: TnaFit = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: not a fit file: {e}", path.display())))?;
    fit.mixture.validate()?;
    fit.model.params.validate()?;
    Ok(fit)
}

#[derive(Serialize)]
struct Point {
    y: f64,
    value: f64,
}

fn write_points(out: &OutputArgs, pts: &[Point]) -> Result<(), Failure> {
    let body = match out.format {
        Format::Json => json(pts),
        Format::Csv => {
            let mut s = String::from("y,value\n");
            for p in pts {
                s += &format!("{},{}\n", num(p.y), num(p.value));
            }
            s
        }
    };
    write_out(out.out.as_deref(), &body)
}

fn write_column(out: &OutputArgs, xs: &[f64]) -> Result<(), Failure> {
    let body = match out.format {
        Format::Json => json(xs),
        Format::Csv => xs.iter().map(|x| num(*x) + "\n").collect(),
    };
    write_out(out.out.as_deref(), &body)
}

fn cmd_density(c: &GridCmd, cumulative: bool) -> Result<(), Failure> {
    let m = c.model.resolve()?;
    let grid = c.grid.resolve(401)?;
    let quad = c.quad.resolve()?;
    let a = m.params.skew_level;
    let values = grid
        .par_iter()
        .map(|&y| {
            if cumulative {
                cdf(m.t, m.x0, y, &m.params, &quad)
            } else {
                // the density is two-valued at the skew level; report the upper side
                let y = if y == a { a + SKEW_EPS } else { y };
                transition_density(m.t, m.x0, y, &m.params, &quad)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pts: Vec<Point> = grid
        .iter()
        .zip(values)
        .map(|(y, value)| Point { y: *y, value })
        .collect();
    write_points(&c.output, &pts)
}

fn cmd_fit(c: &FitCmd) -> Result<(), Failure> {
    let m = c.model.resolve()?;
    let quad = c.quad.resolve()?;
    let mut cfg = FitConfig {
        seed: c.seed,
        ..FitConfig::default()
    };
    if !c.grid.is_default() {
        cfg.grid = c.grid.resolve(2500)?;
    }
    match fit_tna(&m.params, m.t, &cfg, &quad) {
        Ok(fit) => write_out(c.out.as_deref(), &json(&fit)),
        Err(Error::Fit { best, objective }) => {
            write_out(c.out.as_deref(), &json(&*best))?;
            Err(Failure {
                code: 3,
                msg: format!(
                    "mixture fit did not converge; best candidate written (objective {objective})"
                ),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sample(c: &SampleCmd) -> Result<(), Failure> {
    let fit = read_fit(&c.fit_file)?;
    let xs = fit.sample_many(c.n, c.seed)?;
    write_column(&c.output, &xs)
}

fn cmd_simulate(c: &SimulateCmd) -> Result<(), Failure> {
    let m = c.model.resolve()?;
    if c.n == 0 {
        return write_column(&c.output, &[]);
    }
    let sim = PathSimConfig::new(c.steps, c.n, c.seed);
    let xs = simulate_paths(&m.params, m.x0, m.t, &sim)?;
    write_column(&c.output, &xs)
}

fn cmd_risk(c: &RiskCmd) -> Result<(), Failure> {
    let fit = read_fit(&c.fit_file)?;
    let quad = c.quad.resolve()?;
    let params = fit.model.params;
    let a = params.skew_level;
    let rel = c.grid.resolve(2500)?;
    let grid: Vec<f64> = rel.iter().map(|x| x + a).collect();
    // every column is measured from the skew level, the mixture's own frame
    let table = cdf_table(&params, fit.model.t, &grid, &quad)?;
    let xs = table.xs.iter().map(|x| x - a).collect();
    let table = CdfTable::new(xs, table.fs, 0.0)?;
    let samples = sample_tna_many(&fit.mixture, c.n, c.seed)?;
    let levels = confidence_grid(fit.mixture.alpha, c.levels);
    let rows = risk_reports(&fit.mixture, &table, &samples, &levels)?;
    let body = match c.output.format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut s = format!("{}\n", RiskReport::CSV_HEADER);
            for r in &rows {
                let cells = [
                    r.confidence,
                    r.var_formula,
                    r.cvar_formula,
                    r.var_interp,
                    r.var_mc,
                    r.cvar_mc,
                ];
                s += &cells.map(num).join(",");
                s.push('\n');
            }
            s
        }
    };
    write_out(c.output.out.as_deref(), &body)
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("RSBM_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Failure::input(format!(
            "RSBM_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match &cli.command {
        Command::Density(c) => cmd_density(c, false),
        Command::Cdf(c) => cmd_density(c, true),
        Command::Fit(c) => cmd_fit(c),
        Command::Sample(c) => cmd_sample(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Risk(c) => cmd_risk(c),
        Command::Validate(c) => validate::cmd_validate(c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rsbm: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
