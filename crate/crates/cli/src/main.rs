use clap::{Parser, Subcommand, ValueEnum};
use sik_core::harness::{
    emit_results, run_certify, run_constants, run_criterion, run_mse_study, run_reconstruction, sci, write_certify_csv,
    write_criterion_csv, write_json, write_reconstruction, ExperimentConfig,
};
use sik_core::SikError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "sik",
    version,
    about = "Sparse inverse problems over measures: design, certificates, reconstruction, Monte-Carlo MSE"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte-Carlo sampling (overrides the config's `threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tabular output format; JSON files are always written.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form design criterion for every (sensor set, β0, p).
    Criterion { config: PathBuf },
    /// Pre-certificate θ-admissibility for every sensor set.
    Certify { config: PathBuf },
    /// Single reconstruction with PDAP and Gauss-Newton.
    Reconstruct {
        config: PathBuf,
        /// Noise seed; exact data when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Sensor set name (default: first in the config).
        #[arg(long)]
        set: Option<String>,
        /// β0 (default: first in the config).
        #[arg(long)]
        beta0: Option<f64>,
        /// Total precision p (default: first in the config).
        #[arg(long)]
        p: Option<f64>,
    },
    /// Monte-Carlo mean squared HK error study.
    Mse { config: PathBuf },
    /// Explicit theory constants.
    Constants { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn load(path: &Path, cli: &Cli) -> Result<(ExperimentConfig, PathBuf), SikError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(SikError::Config("--threads must be at least 1".into()));
        }
        cfg.threads = Some(t);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<(), SikError> {
    match &cli.command {
        Command::Criterion { config } => {
            let (cfg, out) = load(config, cli)?;
            let recs = run_criterion(&cfg)?;
            write_json(&out.join("criterion.json"), &recs)?;
            if cli.format == Format::Csv {
                write_criterion_csv(&recs, &out.join("criterion.csv"))?;
            }
            for r in &recs {
                let d = &r.report;
                println!(
                    "{} beta0={} p={} expected_mse={} singular={}",
                    r.sensor_set,
                    d.beta0,
                    sci(d.p),
                    sci(d.expected_mse),
                    d.singular
                );
            }
        }
        Command::Certify { config } => {
            let (cfg, out) = load(config, cli)?;
            let recs = run_certify(&cfg)?;
            write_json(&out.join("certify.json"), &recs)?;
            if cli.format == Format::Csv {
                write_certify_csv(&recs, &out.join("certify.csv"))?;
            }
            for r in &recs {
                match r.report.theta_star {
                    Some(t) => println!("{} admissible theta={}", r.sensor_set, sci(t)),
                    None => println!("{} not admissible: {}", r.sensor_set, r.report.failure.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Reconstruct {
            config,
            seed,
            set,
            beta0,
            p,
        } => {
            let (cfg, out) = load(config, cli)?;
            let set = set.clone().unwrap_or_else(|| cfg.sensor_sets[0].name.clone());
            let beta0 = beta0.unwrap_or(cfg.beta0[0]);
            let p = p.unwrap_or(cfg.p[0]);
            let bundle = run_reconstruction(&cfg, &set, beta0, p, *seed)?;
            let dir = out.join(format!("reconstruct_{set}"));
            write_reconstruction(&bundle, &dir)?;
            for (name, mu) in [("pdap", &bundle.mu_bar), ("gauss_newton", &bundle.mu_hat)] {
                if let Some(mu) = mu {
                    println!("{name}: {} atoms", mu.len());
                }
            }
            for e in &bundle.errors {
                eprintln!("warning: {e}");
            }
            println!("wrote {}", dir.display());
        }
        Command::Mse { config } => {
            let (cfg, out) = load(config, cli)?;
            let recs = run_mse_study(&cfg)?;
            let (csv, json) = emit_results(&recs, &out, "mse")?;
            if cli.format == Format::Json {
                std::fs::remove_file(&csv)?;
            }
            for r in &recs {
                println!(
                    "{} beta0={} p={} {}: mean_hk2={} stderr={} expected_mse={} failed={} excluded={}",
                    r.sensor_set,
                    r.beta0,
                    sci(r.p),
                    r.estimator,
                    sci(r.mean_hk2),
                    sci(r.stderr),
                    sci(r.expected_mse),
                    r.failed,
                    r.excluded
                );
            }
            println!("wrote {}", json.display());
        }
        Command::Constants { config } => {
            let (cfg, out) = load(config, cli)?;
            let recs = run_constants(&cfg)?;
            write_json(&out.join("constants.json"), &recs)?;
            for r in &recs {
                match &r.constants {
                    Some(c) => println!(
                        "{} beta0={} p={} p_bar={} bad_event_bound={}",
                        r.sensor_set,
                        r.beta0,
                        sci(r.p),
                        sci(c.p_bar),
                        sci(c.bad_event_bound)
                    ),
                    None => println!(
                        "{} beta0={} p={} unavailable: {}",
                        r.sensor_set,
                        r.beta0,
                        sci(r.p),
                        r.error.as_deref().unwrap_or("")
                    ),
                }
            }
        }
    }
    Ok(())
}
