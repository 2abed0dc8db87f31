use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use masga::checks::oracle_checks;
use masga::compare::{compare_levels, write_compare};
use masga::config::ExperimentConfig;
use masga::dataset::{gen_synthetic, write_dataset, SyntheticKind, SyntheticSpec};
use masga::experiment::{geometry, run_experiment, start_point};
use masga::model::{build_model, load_data};
use masga::output::{read_levels, ReportFile};
use masga::{Error, Result};
use masga_core::adaptive::{check_complexity_condition, fit_rates, LevelShape};
use masga_core::estimators::LevelSampler;

#[derive(Parser)]
#[command(name = "masga", version, about = "Multi-index antithetic SGLD estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Full,
    Sub,
    Disc,
}

impl From<Shape> for LevelShape {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Full => LevelShape::Full,
            Shape::Sub => LevelShape::SubsamplingOnly,
            Shape::Disc => LevelShape::DiscretisationOnly,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write levels.csv, convergence.csv and report.json.
    ///
    /// Exits 0 when every tolerance converged and 2 when the level cap was hit.
    Run {
        /// key = value config file.
        config: Option<PathBuf>,
        /// Start from a named preset instead of a file.
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated tolerances, overriding the config.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0: one per core).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fit rates from a levels.csv and check the complexity condition.
    Rates { levels: PathBuf },
    /// Generate a synthetic dataset as CSV.
    GenData {
        #[arg(long, default_value = "logistic")]
        kind: String,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the closed-form oracles against enumeration.
    Oracle,
    /// Paired-seed variance table of antithetic against plain differences.
    Compare {
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long, default_value_t = 1000)]
        paths: u64,
        #[arg(long, value_enum, default_value = "full")]
        shape: Shape,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "compare.csv")]
        out: PathBuf,
    },
}

fn load_config(path: Option<PathBuf>, preset: Option<String>) -> Result<ExperimentConfig> {
    match (path, preset) {
        (Some(p), _) => ExperimentConfig::load(&p),
        (None, Some(name)) => ExperimentConfig::preset(&name).ok_or_else(|| {
            Error::Invalid(format!("unknown preset {name:?}; known: {}", ExperimentConfig::PRESETS.join(", ")))
        }),
        (None, None) => Err(Error::Invalid("give a config file or --preset".into())),
    }
}

fn pair(v: [f64; 2]) -> String {
    let f = |x: f64| if x.is_finite() { format!("{x:.3}") } else { "-".into() };
    format!("({}, {})", f(v[0]), f(v[1]))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, preset, eps, seed, out, threads } => {
            let mut cfg = load_config(config, preset)?;
            if let Some(e) = eps {
                cfg.epsilons = e;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            cfg.validate()?;
            let outcome = run_experiment(&cfg, &out)?;
            for row in outcome.convergence_rows() {
                println!(
                    "eps {:<8} estimate {:.8e}  cost {:.4e}  cost*eps^2 {:.4e}  L {}",
                    row.eps, row.estimate, row.total_cost, row.cost_times_eps2, row.levels
                );
            }
            let report = ReportFile::read(&out.join("report.json"))?;
            print!("{}", report.summary());
            Ok(outcome.exit_code())
        }
        Command::Rates { levels } => {
            let rows = read_levels(&levels)?;
            let shape = if rows.iter().all(|r| r.ell2 == 0) {
                LevelShape::SubsamplingOnly
            } else if rows.iter().all(|r| r.ell1 == 0) {
                LevelShape::DiscretisationOnly
            } else {
                LevelShape::Full
            };
            let stats: Vec<_> = rows.iter().map(|r| r.to_stats()).collect();
            let rates = fit_rates(&stats, shape)?;
            println!("alpha_hat = {}", pair(rates.alpha));
            println!("beta_hat = {}", pair(rates.beta));
            println!("gamma = {}", pair(rates.gamma));
            let ok = check_complexity_condition(&rates.alpha, &rates.beta, &rates.gamma);
            println!("complexity condition max_k (gamma_k - beta_k) / alpha_k < 0: {ok}");
            Ok(0)
        }
        Command::GenData { kind, m, d, seed, out } => {
            let kind: SyntheticKind = kind.parse()?;
            let data = gen_synthetic(&SyntheticSpec { kind, m, d, seed })?;
            write_dataset(&out, &data)?;
            println!("wrote {} rows x {} features to {}", data.len(), data.feature_dim(), out.display());
            Ok(0)
        }
        Command::Oracle => {
            let checks = oracle_checks();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
        }
        Command::Compare { config, preset, levels, paths, shape, seed, out } => {
            let mut cfg = load_config(config, preset)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let model = build_model(&cfg, load_data(&cfg)?)?;
            let x0 = start_point(&cfg, &model)?;
            let sampler = LevelSampler::new(&model, geometry(&cfg)?, cfg.f, cfg.master_seed, x0)?;
            let rows = masga::exec::with_threads(cfg.threads, || compare_levels(&sampler, shape.into(), levels, paths))?;
            write_compare(&out, &rows)?;
            println!("{:>5} {:>5} {:>12} {:>12} {:>12}", "ell1", "ell2", "var_ant", "var_plain", "var_level");
            for r in &rows {
                println!(
                    "{:>5} {:>5} {:>12.4e} {:>12.4e} {:>12.4e}",
                    r.ell1, r.ell2, r.var_antithetic, r.var_plain, r.var_level
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
