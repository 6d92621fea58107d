mod config;

use clap::{Parser, Subcommand};
use config::{Algorithm, EvalConfig, RunConfig};
use dagforecast_core::artifacts::{self, ArtifactError};
use dagforecast_core::data::{load_csv, split_blocks, standardize, synth_generate, write_csv, LoadDataset};
use dagforecast_core::genotype::{cnn_mlp_seed, Genotype};
use dagforecast_core::search::{random_search_run, ssea_run, SearchError};
use dagforecast_core::trainer::evaluate_candidate;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dagforecast",
    version,
    about = "Evolve DAG forecasting networks for day-ahead load"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search and write its artifacts to the configured output directory.
    Search { config: PathBuf },
    /// Retrain a stored genotype and report validation and test metrics.
    Evaluate {
        genotype: PathBuf,
        dataset: PathBuf,
        config: PathBuf,
    },
    /// Generate a synthetic load dataset as CSV.
    Synth { config: PathBuf, out: PathBuf },
    /// Write plot-ready files for a finished run under <run-dir>/export.
    Export { run_dir: PathBuf },
}

/// Exit status 2 for bad input, 1 for failures while running.
enum Failure {
    Input(String),
    Runtime(String),
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Config(_) => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn prepare(d: LoadDataset, split: [f64; 3]) -> Result<LoadDataset, Failure> {
    let d = split_blocks(d, (split[0], split[1], split[2])).map_err(|e| Failure::Input(format!("split: {e}")))?;
    Ok(standardize(&d).map_err(|e| Failure::Input(e.to_string()))?.0)
}

fn load_dataset(path: &Path) -> Result<LoadDataset, Failure> {
    load_csv(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn search(path: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::load(path).map_err(Failure::Input)?;
    let raw = match (&cfg.dataset.csv, &cfg.dataset.synth) {
        (Some(csv), _) => load_dataset(csv)?,
        (None, Some(s)) => synth_generate(s).map_err(|e| Failure::Input(format!("dataset.synth: {e}")))?,
        (None, None) => unreachable!("validated"),
    };
    let data = prepare(raw, cfg.dataset.split)?;
    let mut search = cfg.search.clone();
    if cfg.inject_seed {
        search.seed_individuals.push(cnn_mlp_seed(data.h, data.f));
    }
    eprintln!(
        "{}: K={} B={} workers={} on T={} H={} F={}",
        cfg.algorithm.name(),
        search.k,
        search.b,
        search.workers,
        data.t,
        data.h,
        data.f
    );
    let result = match cfg.algorithm {
        Algorithm::Ssea => ssea_run(&search, &data, &cfg.train)?,
        Algorithm::Rs => random_search_run(&search, &data, &cfg.train)?,
    };
    let report = artifacts::summarize_run(&result, &data, &cfg.train, cfg.algorithm.name()).map_err(runtime)?;
    artifacts::write_run(&cfg.output_dir, &report).map_err(runtime)?;
    let m = &report.metrics;
    println!(
        "best #{}: valid MAPE {:.3}% | test MAPE {:.3}% | test RMSE {:.1} MW | baseline test MAPE {:.3}%",
        m.best_id, m.valid_mape_pct, m.test_mape_pct, m.test_rmse, m.baseline_test_mape_pct
    );
    println!(
        "{} features selected; artifacts in {}",
        m.n_selected,
        cfg.output_dir.display()
    );
    Ok(())
}

fn evaluate(genotype: &Path, dataset: &Path, config: &Path) -> Result<(), Failure> {
    let cfg = EvalConfig::load(config).map_err(Failure::Input)?;
    let text = std::fs::read_to_string(genotype).map_err(|e| Failure::Input(format!("{}: {e}", genotype.display())))?;
    let g = Genotype::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", genotype.display())))?;
    let data = prepare(load_dataset(dataset)?, cfg.split())?;
    if g.h != data.h {
        return Err(Failure::Input(format!(
            "genotype forecasts H={} but the dataset has H={}",
            g.h, data.h
        )));
    }
    let valid = evaluate_candidate(&g, &data, &cfg.train);
    if let Some(reason) = &valid.failure {
        return Err(Failure::Runtime(format!("training failed: {reason}")));
    }
    let test = artifacts::test_report(&g, &data, &cfg.train).map_err(runtime)?;
    println!(
        "valid MAPE {:.3}% | test MAPE {:.3}% | test MSE {:.1} | test RMSE {:.1} MW | {} features",
        100.0 * valid.fitness,
        100.0 * test.mape,
        test.mse,
        test.rmse,
        valid.selected.len()
    );
    Ok(())
}

fn synth(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = config::load_synth(config).map_err(Failure::Input)?;
    let d = synth_generate(&cfg).map_err(|e| Failure::Input(e.to_string()))?;
    write_csv(&d, out).map_err(runtime)?;
    println!(
        "wrote {} days x {} instants x {} features to {}",
        d.t,
        d.h,
        d.f,
        out.display()
    );
    Ok(())
}

fn export(dir: &Path) -> Result<(), Failure> {
    let ex = artifacts::export_run(dir).map_err(|e| match e {
        ArtifactError::Missing { .. } | ArtifactError::Malformed { .. } => Failure::Input(e.to_string()),
        other => runtime(other),
    })?;
    for p in &ex.paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Search { config } => search(config),
        Command::Evaluate {
            genotype,
            dataset,
            config,
        } => evaluate(genotype, dataset, config),
        Command::Synth { config, out } => synth(config, out),
        Command::Export { run_dir } => export(run_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
