//! Command-line driver: single runs, refinement studies, oracle checks and
//! weight dumps.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;

use crate::adi_solver::{run, RunResult};
use crate::error::{Error, Result};
use crate::frac_weights::{starting_weights_delta, starting_weights_frac, starting_weights_perturb, WeightSequence};
use crate::validation_oracle::verify_all;

pub use config::{CustomProblem, FieldSpec, RunConfig, SpatialSpec, StudyConfig, StudyParam, TermSpec};
pub use report::{fmt15, observed_rate, uniform_grid, write_surface, write_trajectory, RateRow, RateTable};

/// Side length of the snapshot grid.
pub const SNAPSHOT_GRID: usize = 101;

#[derive(Debug, Parser)]
#[command(name = "fracadi", version, about = "ADI Legendre-Galerkin solver for multi-term time-fractional equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March one configuration to the final time.
    Run(CommonArgs),
    /// Refine τ or N over a list of levels and tabulate observed orders.
    Study(StudyArgs),
    /// Run the built-in oracle checks.
    Verify,
    /// Print Grünwald and starting weights.
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long = "N")]
    pub degree: Option<usize>,
    #[arg(long = "M")]
    pub steps: Option<usize>,
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    #[arg(long = "m")]
    pub m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    #[arg(long = "bootstrap-ratio")]
    pub bootstrap_ratio: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "study-param", value_enum)]
    pub study_param: Option<StudyParam>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub order: f64,
    /// Largest weight index.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Exponents for starting weights.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Row `k` of the starting weights.
    #[arg(long, default_value_t = 1)]
    pub row: usize,
}

impl CommonArgs {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            c.problem = p.clone();
            c.custom = None;
        }
        if let Some(v) = self.degree {
            c.degree = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = self.t_final {
            c.t_final = v;
        }
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(s) = &self.sigma {
            c.sigma = Some(s.clone());
            if self.m.is_none() {
                c.m = s.len();
            }
        }
        if let Some(v) = self.bootstrap_ratio {
            c.bootstrap_ratio = v;
        }
        if let Some(o) = &self.output {
            c.output_dir = Some(o.clone());
        }
        Ok(c)
    }
}

impl StudyArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = self.common.resolve()?;
        match (self.study_param, &self.levels, &mut c.study) {
            (Some(param), Some(levels), _) => {
                c.study = Some(StudyConfig {
                    param,
                    levels: levels.clone(),
                })
            }
            (p, l, Some(s)) => {
                if let Some(p) = p {
                    s.param = p;
                }
                if let Some(l) = l {
                    s.levels = l.clone();
                }
            }
            (p, l, None) => {
                c.study = Some(StudyConfig {
                    param: p.unwrap_or(StudyParam::Tau),
                    levels: l.clone().ok_or_else(|| Error::invalid("levels", "a study needs --levels or a [study] section"))?,
                })
            }
        }
        Ok(c)
    }
}

/// Outcome of [`run_single`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub result: RunResult,
    pub elapsed: Duration,
    /// `key=value` diagnostics, also written to `diagnostics.txt`.
    pub diagnostics: Vec<(String, String)>,
}

fn diagnostics_record(config: &RunConfig, result: &RunResult) -> Vec<(String, String)> {
    let opt = |v: Option<f64>| v.map(fmt15).unwrap_or_else(|| "none".into());
    let last = result.diagnostics.last().expect("at least the initial level");
    vec![
        ("problem".into(), config.problem.clone()),
        ("N".into(), config.degree.to_string()),
        ("M".into(), config.steps.to_string()),
        ("T".into(), fmt15(config.t_final)),
        ("m".into(), config.m.to_string()),
        (
            "sigma".into(),
            config
                .exponents()
                .map(|e| e.as_slice().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
                .unwrap_or_default(),
        ),
        ("bootstrap_ratio".into(), config.bootstrap_ratio.to_string()),
        ("final_l2_error".into(), opt(result.final_error())),
        ("max_l2_error".into(), opt(result.max_error())),
        ("final_l2_norm".into(), fmt15(last.l2_norm)),
        ("stability_bound".into(), fmt15(last.stability_bound)),
        ("stability_holds".into(), result.stability_holds().to_string()),
    ]
}

/// Runs one configuration; with an output directory, writes `solution.dat`
/// (101×101 `x y u` lines), `trajectory.csv` and `diagnostics.txt`.
pub fn run_single(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let problem = config.problem_spec()?;
    let start = Instant::now();
    let result = run(&problem, &config.run_options()?)?;
    let elapsed = start.elapsed();
    let diagnostics = diagnostics_record(config, &result);
    if let Some(dir) = &config.output_dir {
        write_run_files(dir, &result, &diagnostics)?;
    }
    Ok(RunReport {
        result,
        elapsed,
        diagnostics,
    })
}

fn write_run_files(dir: &Path, result: &RunResult, diagnostics: &[(String, String)]) -> Result<()> {
    write_surface(result, SNAPSHOT_GRID, report::create_file(dir, "solution.dat")?)?;
    write_trajectory(result, report::create_file(dir, "trajectory.csv")?)?;
    report::write_key_values(diagnostics, report::create_file(dir, "diagnostics.txt")?)
}

/// Runs every level of the configured study concurrently and tabulates errors
/// and rates. With an output directory, writes `study.csv` and `convergence.dat`.
pub fn run_study(config: &RunConfig) -> Result<RateTable> {
    config.validate()?;
    let study = config
        .study
        .as_ref()
        .ok_or_else(|| Error::invalid("study", "no refinement schedule given"))?;
    let problem = config.problem_spec()?;
    if problem.exact.is_none() {
        return Err(Error::invalid("problem", "a study needs a problem with an exact solution"));
    }
    let levels: Vec<RunConfig> = study.levels.iter().map(|&l| config.at_level(study.param, l)).collect();
    for l in &levels {
        l.validate()?;
    }
    let errors = levels
        .par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let r = run(&problem, &c.run_options()?)?;
            info!("level N={} M={} done", c.degree, c.steps);
            Ok((r.final_error().unwrap_or(f64::NAN), r.max_error().unwrap_or(f64::NAN)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (name, params): (&str, Vec<f64>) = match study.param {
        StudyParam::Tau => ("one_over_tau", levels.iter().map(|c| c.steps as f64 / c.t_final).collect()),
        StudyParam::Degree => ("N", levels.iter().map(|c| c.degree as f64).collect()),
    };
    let (e, me): (Vec<f64>, Vec<f64>) = errors.into_iter().unzip();
    let table = RateTable::from_errors(name, &params, &e, &me)?;
    if let Some(dir) = &config.output_dir {
        table.write_csv(report::create_file(dir, "study.csv")?)?;
        table.write_plot_data(report::create_file(dir, "convergence.dat")?)?;
    }
    Ok(table)
}

/// `name,index,value` rows of the Grünwald and (with `sigma`) starting weights.
pub fn weights_table(args: &WeightsArgs) -> Result<Vec<(String, usize, f64)>> {
    let w = WeightSequence::new(args.order, args.count)?;
    let mut rows: Vec<(String, usize, f64)> = Vec::new();
    rows.extend(w.raw().iter().enumerate().map(|(j, &v)| ("binomial".to_string(), j, v)));
    rows.extend(w.weights().iter().enumerate().map(|(j, &v)| ("shifted".to_string(), j, v)));
    if let Some(sigma) = &args.sigma {
        let tau = 1.0;
        let families = [
            ("start_frac", starting_weights_frac(args.order, sigma, args.row, tau)?),
            ("start_delta", starting_weights_delta(sigma, args.row, tau)?),
            ("start_perturb", starting_weights_perturb(sigma, args.row, tau)?),
        ];
        for (name, ws) in families {
            rows.extend(ws.into_iter().enumerate().map(|(j, v)| (name.to_string(), j + 1, v)));
        }
    }
    Ok(rows)
}

/// Executes a parsed command line, printing to stdout.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let report = run_single(&config)?;
            for (k, v) in &report.diagnostics {
                println!("{k}={v}");
            }
            println!("elapsed_seconds={:.3}", report.elapsed.as_secs_f64());
        }
        Command::Study(args) => {
            let config = args.resolve()?;
            let table = run_study(&config)?;
            table.write_csv(std::io::stdout().lock())?;
        }
        Command::Verify => {
            let checks = verify_all()?;
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed() { "PASS" } else { "FAIL" };
                println!("{status} {} value={:.3e} tolerance={:.1e}", c.name, c.value, c.tolerance);
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                return Err(Error::NonConvergence(format!("{failed} oracle checks failed")));
            }
        }
        Command::Weights(args) => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(["family", "index", "value"])?;
            for (name, j, v) in weights_table(&args)? {
                w.write_record([name, j.to_string(), fmt15(v)])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
