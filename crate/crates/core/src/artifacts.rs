//! Run-directory files: writing a finished search, reading it back, and the
//! plot-ready exports derived from it.

use crate::data::{mean_daily_profile, DataError, LoadDataset};
use crate::genotype::{Genotype, GenotypeError};
use crate::search::{SearchLog, SearchResult};
use crate::trainer::{compute_metrics, train_candidate, MetricsError, TrainConfig, TrainError, EVALUATION_CSV_HEADER};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const BEST_GENOTYPE: &str = "best_genotype.json";
pub const CONVERGENCE: &str = "convergence.csv";
pub const SELECTED_FEATURES: &str = "selected_features.csv";
pub const TEST_FORECAST: &str = "test_forecast.csv";
pub const METRICS: &str = "metrics.json";
pub const EVALUATIONS: &str = "evaluations.csv";

/// Files `export` needs.
pub const REQUIRED: [&str; 5] = [BEST_GENOTYPE, CONVERGENCE, SELECTED_FEATURES, TEST_FORECAST, METRICS];

pub const EXPORT_DIR: &str = "export";
pub const EXPORT_CONVERGENCE: &str = "best_so_far.csv";
pub const EXPORT_LAST_WEEK: &str = "last_week_forecast.csv";
pub const EXPORT_FEATURES: &str = "feature_selection.csv";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("run directory {dir} is missing: {}", .missing.join(", "))]
    Missing { dir: PathBuf, missing: Vec<String> },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Genotype(#[from] GenotypeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub date: String,
    pub instant: usize,
    pub actual: f64,
    pub forecast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub index: usize,
    pub name: String,
    pub selected: u8,
    pub mask_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub event: String,
    pub wall_seconds: f64,
    pub candidate_id: u64,
    pub fitness: f64,
    pub best_so_far: f64,
}

/// MAPE values are percentages, RMSE in target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algorithm: String,
    pub best_id: u64,
    pub valid_mape_pct: f64,
    pub test_mape_pct: f64,
    pub test_rmse: f64,
    pub test_mse: f64,
    pub baseline_test_mape_pct: f64,
    pub baseline_test_rmse: f64,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub stopped_by_time: bool,
    pub n_selected: usize,
}

/// Everything a run directory holds, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub genotype: Genotype,
    pub log: SearchLog,
    pub features: Vec<FeatureRow>,
    pub forecast: Vec<ForecastRow>,
    pub metrics: RunMetrics,
    pub evaluations: Vec<String>,
}

/// Test-block scores of a genotype retrained with `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub forecast: Vec<ForecastRow>,
    pub features: Vec<FeatureRow>,
    pub mape: f64,
    pub mse: f64,
    pub rmse: f64,
}

/// Retrains `g` and forecasts the test block.
pub fn test_report(g: &Genotype, data: &LoadDataset, train: &TrainConfig) -> Result<TestReport, ArtifactError> {
    let mut model = train_candidate(g, data, train)?;
    let test = data.split()?.test.clone();
    let pred = model.predict(&data.x_days(test.clone()))?;
    let truth = data.y_days(test.clone());
    let m = compute_metrics(truth.data(), pred.data())?;
    let mut forecast = Vec::with_capacity(truth.len());
    for (k, day) in test.enumerate() {
        for i in 0..data.h {
            let at = k * data.h + i;
            forecast.push(ForecastRow {
                date: data.dates[day].clone(),
                instant: i,
                actual: truth.data()[at],
                forecast: pred.data()[at],
            });
        }
    }
    let features = (0..data.f)
        .map(|j| FeatureRow {
            index: j,
            name: data.feature_names[j].clone(),
            selected: u8::from(model.mask.p[j]),
            mask_weight: model.mask.w_raw[j],
        })
        .collect();
    Ok(TestReport {
        forecast,
        features,
        mape: m.mape,
        mse: m.mse,
        rmse: m.rmse,
    })
}

/// Mean-daily-profile forecast scored on the test block.
pub fn baseline_test_metrics(data: &LoadDataset) -> Result<crate::trainer::Metrics, ArtifactError> {
    let profile = mean_daily_profile(data)?;
    let truth = data.y_days(data.split()?.test.clone());
    let pred: Vec<f64> = (0..truth.len()).map(|i| profile[i % data.h]).collect();
    Ok(compute_metrics(truth.data(), &pred)?)
}

/// Builds the report for a finished search by retraining its best genotype.
pub fn summarize_run(
    result: &SearchResult,
    data: &LoadDataset,
    train: &TrainConfig,
    algorithm: &str,
) -> Result<RunReport, ArtifactError> {
    let best = &result.best;
    let test = test_report(&best.genotype, data, train)?;
    let base = baseline_test_metrics(data)?;
    let metrics = RunMetrics {
        algorithm: algorithm.to_string(),
        best_id: best.id,
        valid_mape_pct: 100.0 * best.fitness,
        test_mape_pct: 100.0 * test.mape,
        test_rmse: test.rmse,
        test_mse: test.mse,
        baseline_test_mape_pct: 100.0 * base.mape,
        baseline_test_rmse: base.rmse,
        evaluations: result.evaluated.len(),
        failed_evaluations: result.evaluated.iter().filter(|i| !i.fitness.is_finite()).count(),
        stopped_by_time: result.stopped_by_time,
        n_selected: test.features.iter().filter(|f| f.selected == 1).count(),
    };
    Ok(RunReport {
        genotype: best.genotype.clone(),
        log: result.log.clone(),
        features: test.features,
        forecast: test.forecast,
        metrics,
        evaluations: result.evaluated.iter().map(|i| i.evaluation.csv_line(i.id)).collect(),
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>();
    rows.map_err(|e| ArtifactError::Malformed {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn write_run(dir: &Path, report: &RunReport) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(BEST_GENOTYPE), report.genotype.to_json() + "\n")?;
    fs::write(dir.join(CONVERGENCE), report.log.to_csv())?;
    write_rows(&dir.join(SELECTED_FEATURES), &report.features)?;
    write_rows(&dir.join(TEST_FORECAST), &report.forecast)?;
    fs::write(dir.join(METRICS), serde_json::to_string_pretty(&report.metrics)? + "\n")?;
    let mut ev = String::from(EVALUATION_CSV_HEADER);
    ev.push('\n');
    for line in &report.evaluations {
        ev.push_str(line);
        ev.push('\n');
    }
    fs::write(dir.join(EVALUATIONS), ev)?;
    Ok(())
}

fn check_complete(dir: &Path) -> Result<(), ArtifactError> {
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ArtifactError::Missing {
            dir: dir.to_path_buf(),
            missing,
        })
    }
}

/// The parts of a run directory the exports use.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRun {
    pub genotype: Genotype,
    pub convergence: Vec<ConvergenceRow>,
    pub features: Vec<FeatureRow>,
    pub forecast: Vec<ForecastRow>,
    pub metrics: RunMetrics,
}

pub fn read_run(dir: &Path) -> Result<StoredRun, ArtifactError> {
    check_complete(dir)?;
    let gpath = dir.join(BEST_GENOTYPE);
    let genotype = Genotype::from_json(&fs::read_to_string(&gpath)?).map_err(|e| ArtifactError::Malformed {
        path: gpath,
        msg: e.to_string(),
    })?;
    Ok(StoredRun {
        genotype,
        convergence: read_rows(&dir.join(CONVERGENCE))?,
        features: read_rows(&dir.join(SELECTED_FEATURES))?,
        forecast: read_rows(&dir.join(TEST_FORECAST))?,
        metrics: serde_json::from_str(&fs::read_to_string(dir.join(METRICS))?)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSoFarRow {
    pub wall_seconds: f64,
    pub candidate_id: u64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureIndicatorRow {
    pub feature: String,
    pub selected: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exported {
    pub best_so_far: Vec<BestSoFarRow>,
    pub last_week: Vec<ForecastRow>,
    pub features: Vec<FeatureIndicatorRow>,
    pub paths: [PathBuf; 3],
}

/// Writes the three plot-ready files under `dir/export/`.
pub fn export_run(dir: &Path) -> Result<Exported, ArtifactError> {
    let run = read_run(dir)?;
    let best_so_far: Vec<BestSoFarRow> = run
        .convergence
        .iter()
        .filter(|r| r.event == "init" || r.event == "evaluated")
        .map(|r| BestSoFarRow {
            wall_seconds: r.wall_seconds,
            candidate_id: r.candidate_id,
            best_so_far: r.best_so_far,
        })
        .collect();
    let h = run.forecast.iter().map(|r| r.instant + 1).max().unwrap_or(0);
    let keep = (7 * h).min(run.forecast.len());
    let last_week = run.forecast[run.forecast.len() - keep..].to_vec();
    let features: Vec<FeatureIndicatorRow> = run
        .features
        .iter()
        .map(|f| FeatureIndicatorRow {
            feature: f.name.clone(),
            selected: f.selected,
        })
        .collect();
    let out = dir.join(EXPORT_DIR);
    fs::create_dir_all(&out)?;
    let paths = [
        out.join(EXPORT_CONVERGENCE),
        out.join(EXPORT_LAST_WEEK),
        out.join(EXPORT_FEATURES),
    ];
    write_rows(&paths[0], &best_so_far)?;
    write_rows(&paths[1], &last_week)?;
    write_rows(&paths[2], &features)?;
    Ok(Exported {
        best_so_far,
        last_week,
        features,
        paths,
    })
}
