//! Day-major forecasting datasets: CSV I/O, contiguous splits,
//! train-only standardization and a synthetic load generator.

use crate::tensor::Tensor;
use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

pub const STD_FLOOR: f64 = 1e-8;
/// Prefix marking ground-truth informative features in synthetic data.
pub const INFORMATIVE_PREFIX: &str = "inf_";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

/// `x` is `(T, H, F)` and `y` is `(T, H)`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadDataset {
    pub t: usize,
    pub h: usize,
    pub f: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub dates: Vec<String>,
    pub split: Option<Split>,
}

impl LoadDataset {
    /// Checks extents and strict positivity of the load.
    pub fn new(
        h: usize,
        feature_names: Vec<String>,
        dates: Vec<String>,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self, DataError> {
        let (t, f) = (dates.len(), feature_names.len());
        if h == 0 || f == 0 || t == 0 {
            return Err(DataError::Contract(format!(
                "dataset needs T, H, F >= 1 (got T={t}, H={h}, F={f})"
            )));
        }
        if x.len() != t * h * f || y.len() != t * h {
            return Err(DataError::Contract(format!(
                "array sizes {} / {} do not match T={t}, H={h}, F={f}",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(DataError::Contract(format!(
                "load must be positive and finite (day {}, instant {})",
                i / h,
                i % h
            )));
        }
        Ok(LoadDataset {
            t,
            h,
            f,
            x,
            y,
            feature_names,
            dates,
            split: None,
        })
    }

    pub fn split(&self) -> Result<&Split, DataError> {
        self.split
            .as_ref()
            .ok_or_else(|| DataError::Contract("dataset has no train/valid/test split".into()))
    }

    /// Features of days in `days` as `(n, H, F)`.
    pub fn x_days(&self, days: Range<usize>) -> Tensor {
        let s = self.h * self.f;
        Tensor::new(
            vec![days.len(), self.h, self.f],
            self.x[days.start * s..days.end * s].to_vec(),
        )
        .expect("day range within dataset")
    }

    /// Load of days in `days` as `(n, H)`.
    pub fn y_days(&self, days: Range<usize>) -> Tensor {
        Tensor::new(
            vec![days.len(), self.h],
            self.y[days.start * self.h..days.end * self.h].to_vec(),
        )
        .expect("day range within dataset")
    }

    pub fn feature(&self, day: usize, instant: usize, feature: usize) -> f64 {
        self.x[(day * self.h + instant) * self.f + feature]
    }

    /// Indices of features whose name marks them informative.
    pub fn informative_features(&self) -> Vec<usize> {
        (0..self.f)
            .filter(|&j| self.feature_names[j].starts_with(INFORMATIVE_PREFIX))
            .collect()
    }
}

/// Contiguous `[0, t1)`, `[t1, t2)`, `[t2, T)` with `t1 = floor(train T)` and
/// `t2 = t1 + floor(valid T)`.
pub fn split_blocks(mut d: LoadDataset, fractions: (f64, f64, f64)) -> Result<LoadDataset, DataError> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(DataError::Contract(format!(
            "split fractions ({a}, {b}, {c}) must be positive and sum to 1"
        )));
    }
    let t = d.t;
    let t1 = (a * t as f64).floor() as usize;
    let t2 = t1 + (b * t as f64).floor() as usize;
    if t1 == 0 || t2 == t1 || t2 >= t {
        return Err(DataError::Contract(format!(
            "split ({a}, {b}, {c}) of {t} days leaves an empty block"
        )));
    }
    d.split = Some(Split {
        train: 0..t1,
        valid: t1..t2,
        test: t2..t,
    });
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-feature z-scoring with statistics from the train block only.
pub fn standardize(d: &LoadDataset) -> Result<(LoadDataset, FeatureStats), DataError> {
    let split = d.split()?;
    let (h, f) = (d.h, d.f);
    let n = (split.train.len() * h) as f64;
    let rows = || (split.train.start * h..split.train.end * h).map(|r| &d.x[r * f..(r + 1) * f]);
    let mut mean = vec![0.0; f];
    for row in rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; f];
    for row in rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    let mut out = d.clone();
    for (i, v) in out.x.iter_mut().enumerate() {
        let j = i % f;
        *v = (*v - mean[j]) / std[j];
    }
    Ok((out, FeatureStats { mean, std }))
}

/// Mean load profile of the train block, repeated for every day: the naive
/// reference forecast.
pub fn mean_daily_profile(d: &LoadDataset) -> Result<Vec<f64>, DataError> {
    let split = d.split()?;
    let mut profile = vec![0.0; d.h];
    for day in split.train.clone() {
        for (p, y) in profile.iter_mut().zip(&d.y[day * d.h..(day + 1) * d.h]) {
            *p += y;
        }
    }
    let n = split.train.len() as f64;
    profile.iter_mut().for_each(|p| *p /= n);
    Ok(profile)
}

pub fn write_csv(d: &LoadDataset, path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date".to_string(), "instant".into(), "load".into()];
    header.extend(d.feature_names.iter().cloned());
    w.write_record(&header)?;
    for day in 0..d.t {
        for i in 0..d.h {
            let mut rec = vec![d.dates[day].clone(), i.to_string(), d.y[day * d.h + i].to_string()];
            rec.extend((0..d.f).map(|j| d.feature(day, i, j).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the long-format CSV: `date,instant,load,<features...>`, one row per
/// (day, instant), instants `0..H` in order for every date.
pub fn load_csv(path: &Path) -> Result<LoadDataset, DataError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() < 4 || header[0] != "date" || header[1] != "instant" || header[2] != "load" {
        return Err(DataError::Parse {
            line: 1,
            msg: "header must be date,instant,load,<feature-1>,...".into(),
        });
    }
    let mut dates: Vec<String> = Vec::new();
    let mut instants: Vec<usize> = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let err = |msg: String| DataError::Parse { line, msg };
        if rec.len() != header.len() {
            return Err(err(format!("expected {} columns, found {}", header.len(), rec.len())));
        }
        let num = |c: usize| -> Result<f64, DataError> {
            rec[c]
                .trim()
                .parse::<f64>()
                .map_err(|_| err(format!("column {} is not a number: {:?}", header[c], &rec[c])))
        };
        let instant: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| err(format!("instant is not an integer: {:?}", &rec[1])))?;
        let load = num(2)?;
        if !(load > 0.0 && load.is_finite()) {
            return Err(err(format!("load must be positive, found {load}")));
        }
        let date = rec[0].trim().to_string();
        if dates.last() != Some(&date) {
            dates.push(date);
            instants.push(0);
        }
        let expected = *instants.last().unwrap();
        if instant != expected {
            return Err(err(format!("expected instant {expected}, found {instant}")));
        }
        *instants.last_mut().unwrap() += 1;
        y.push(load);
        for c in 3..header.len() {
            x.push(num(c)?);
        }
    }
    let h = *instants.first().ok_or(DataError::Parse {
        line: 2,
        msg: "no data rows".into(),
    })?;
    if let Some(day) = instants.iter().position(|&n| n != h) {
        return Err(DataError::Parse {
            line: 2 + h * day,
            msg: format!("day {} has {} instants, expected {h}", dates[day], instants[day]),
        });
    }
    LoadDataset::new(h, header[3..].to_vec(), dates, x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub t: usize,
    pub h: usize,
    pub informative: usize,
    pub noise: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            t: 730,
            h: 24,
            informative: 5,
            noise: 15,
            noise_level: 0.02,
            seed: 0,
        }
    }
}

const BASE_LOAD: f64 = 50_000.0;
const HEATING_THRESHOLD: f64 = 15.0;
const HOLIDAYS: [(u32, u32); 7] = [(1, 1), (5, 1), (7, 14), (8, 15), (11, 1), (11, 11), (12, 25)];

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date")
}

/// Synthetic load with weather/calendar drivers. Informative features come
/// first and carry the `inf_` prefix: temperature, two exponential smoothings
/// of it, day of week, holiday flag, then extra smooth drivers when more than
/// five are requested. Noise features are independent standard normals.
pub fn synth_generate(cfg: &SynthConfig) -> Result<LoadDataset, DataError> {
    if cfg.informative == 0 || !(cfg.noise_level >= 0.0) || cfg.t == 0 || cfg.h == 0 {
        return Err(DataError::Contract(
            "synth needs t, h, informative >= 1 and noise_level >= 0".into(),
        ));
    }
    let (t, h) = (cfg.t, cfg.h);
    let steps = t * h;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gauss = move || -> f64 { rng.sample(StandardNormal) };

    let dates: Vec<NaiveDate> = (0..t as u64).map(|d| start_date() + Days::new(d)).collect();
    let mut temp = Vec::with_capacity(steps);
    let mut ar = 0.0;
    for date in &dates {
        for i in 0..h {
            let doy = date.ordinal0() as f64;
            let frac = i as f64 / h as f64;
            ar = 0.97 * ar + 0.6 * gauss();
            let annual = 12.0 - 9.0 * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos();
            let daily = 4.0 * (2.0 * std::f64::consts::PI * (frac - 0.375)).sin();
            temp.push(annual + daily + ar);
        }
    }
    let smooth = |a: f64| {
        let mut s = temp[0];
        temp.iter()
            .map(|&v| {
                s = a * s + (1.0 - a) * v;
                s
            })
            .collect::<Vec<f64>>()
    };
    let s90 = smooth(0.90);
    let s99 = smooth(0.99);
    let weekday: Vec<f64> = dates
        .iter()
        .map(|d| d.weekday().num_days_from_monday() as f64)
        .collect();
    let holiday: Vec<f64> = dates
        .iter()
        .map(|d| f64::from(u8::from(HOLIDAYS.contains(&(d.month(), d.day())))))
        .collect();
    let n_extra = cfg.informative.saturating_sub(5);
    let extras: Vec<Vec<f64>> = (0..n_extra)
        .map(|_| {
            let mut v = 0.0;
            (0..steps)
                .map(|_| {
                    v = 0.98 * v + 0.2 * gauss();
                    v
                })
                .collect()
        })
        .collect();

    let mut names: Vec<String> = [
        "temperature",
        "temp_smooth_0.90",
        "temp_smooth_0.99",
        "day_of_week",
        "holiday",
    ]
    .iter()
    .take(cfg.informative)
    .map(|n| format!("{INFORMATIVE_PREFIX}{n}"))
    .collect();
    names.extend((0..n_extra).map(|k| format!("{INFORMATIVE_PREFIX}driver_{k:02}")));
    names.extend((0..cfg.noise).map(|k| format!("noise_{k:02}")));
    let f = names.len();
    let k = cfg.informative;

    let mut x = Vec::with_capacity(steps * f);
    let mut y = Vec::with_capacity(steps);
    for day in 0..t {
        let wd = weekday[day];
        for i in 0..h {
            let s = day * h + i;
            let frac = i as f64 / h as f64;
            let informative = [temp[s], s90[s], s99[s], wd, holiday[day]];
            x.extend(informative.iter().take(k));
            x.extend(extras.iter().map(|e| e[s]));
            for _ in 0..cfg.noise {
                x.push(gauss());
            }
            let profile = 1.0
                + 0.18 * (2.0 * std::f64::consts::PI * (frac - 0.3)).sin()
                + 0.07 * (4.0 * std::f64::consts::PI * (frac - 0.1)).sin();
            let heat = |v: f64| (HEATING_THRESHOLD - v).max(0.0);
            let mut factor = 1.0 + 0.02 * heat(temp[s]);
            if k > 1 {
                factor += 0.015 * heat(s90[s]);
            }
            if k > 2 {
                factor += 0.015 * heat(s99[s]);
            }
            if k > 3 && wd >= 5.0 {
                factor *= if wd == 5.0 { 0.88 } else { 0.80 };
            }
            if k > 4 && holiday[day] > 0.0 {
                factor *= 0.82;
            }
            for e in &extras {
                factor += 0.05 * e[s];
            }
            let noisy = BASE_LOAD * profile * factor * (1.0 + cfg.noise_level * gauss());
            y.push(noisy.max(BASE_LOAD * 1e-3));
        }
    }
    let dates = dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect();
    LoadDataset::new(h, names, dates, x, y)
}
