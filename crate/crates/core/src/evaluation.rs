//! Accuracy metrics and the epoch-wise HiSA vs. DLPM comparison.
//!
//! Accuracy is defined as `100 - MAPE` over the test split.

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{make_windows, FeatureMode};
use crate::lstm::{predict, train, Checkpoint};
use crate::market_data::{BarSeries, Tweet};
use crate::pipeline::{daily_sentiment, prepare_dataset, ExperimentConfig};
use crate::sentiment::{DailySentiment, Lexicon};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {actual} actual vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("actual value at index {0} is zero")]
    ZeroActual(usize),
    #[error("epoch size list is empty")]
    NoEpochSizes,
}

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<(), EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_lengths(actual, predicted)?;
    if let Some(i) = actual.iter().position(|&a| a == 0.0) {
        return Err(EvalError::ZeroActual(i));
    }
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs() / a.abs())
        .sum();
    Ok(100.0 * sum / actual.len() as f64)
}

pub fn accuracy(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    Ok(100.0 - mape(actual, predicted)?)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_lengths(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Test-split metrics and series for one model at one epoch count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub model: FeatureMode,
    pub epochs: usize,
    pub accuracy_pct: f64,
    pub mape_pct: f64,
    pub rmse: f64,
    pub final_train_loss: f64,
    pub dates: Vec<NaiveDate>,
    pub real: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl VariantRecord {
    pub fn from_series(
        model: FeatureMode,
        epochs: usize,
        final_train_loss: f64,
        dates: Vec<NaiveDate>,
        real: Vec<f64>,
        predicted: Vec<f64>,
    ) -> Result<Self, EvalError> {
        let mape_pct = mape(&real, &predicted)?;
        Ok(VariantRecord {
            model,
            epochs,
            accuracy_pct: 100.0 - mape_pct,
            mape_pct,
            rmse: rmse(&real, &predicted)?,
            final_train_loss,
            dates,
            real,
            predicted,
        })
    }

    /// Plot data: one `date,real,predicted` row per test day.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "real", "predicted"])?;
        for ((d, r), p) in self.dates.iter().zip(&self.real).zip(&self.predicted) {
            w.write_record([d.to_string(), r.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAverage {
    pub model: FeatureMode,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epoch_sizes: Vec<usize>,
    pub config: ExperimentConfig,
    /// Ordered by epoch size, then DLPM before HiSA.
    pub records: Vec<VariantRecord>,
    pub averages: Vec<VariantAverage>,
}

/// Comparison order within each epoch size.
pub const MODELS: [FeatureMode; 2] = [FeatureMode::Dlpm, FeatureMode::Hisa];

impl EvalReport {
    /// Assembles a report, computing each model's arithmetic-mean accuracy
    /// over its records.
    pub fn new(epoch_sizes: Vec<usize>, config: ExperimentConfig, records: Vec<VariantRecord>) -> Self {
        let averages = MODELS
            .iter()
            .filter_map(|&model| {
                let accs: Vec<f64> = records
                    .iter()
                    .filter(|r| r.model == model)
                    .map(|r| r.accuracy_pct)
                    .collect();
                (!accs.is_empty()).then(|| VariantAverage {
                    model,
                    accuracy_pct: accs.iter().sum::<f64>() / accs.len() as f64,
                })
            })
            .collect();
        EvalReport {
            epoch_sizes,
            config,
            records,
            averages,
        }
    }

    pub fn average(&self, model: FeatureMode) -> Option<f64> {
        self.averages
            .iter()
            .find(|a| a.model == model)
            .map(|a| a.accuracy_pct)
    }

    pub fn to_json_string(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Accuracy table: one row per epoch size and model, then one average
    /// row per model.
    pub fn render_table(&self) -> String {
        let mut rows: Vec<[String; 3]> = self
            .records
            .iter()
            .map(|r| {
                [
                    r.epochs.to_string(),
                    r.model.model_name().to_string(),
                    format!("{:.2}%", r.accuracy_pct),
                ]
            })
            .collect();
        rows.extend(self.averages.iter().map(|a| {
            [
                "Average".to_string(),
                a.model.model_name().to_string(),
                format!("{:.2}%", a.accuracy_pct),
            ]
        }));
        let header = ["Epoch size", "Model", "Accuracy"];
        let widths: Vec<usize> = (0..3)
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: [&str; 3]| {
            format!(
                "{:<w0$}  {:<w1$}  {:>w2$}\n",
                cells[0],
                cells[1],
                cells[2],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2]
            )
        };
        let mut out = line(header);
        out.push_str(&line([
            &"-".repeat(widths[0]),
            &"-".repeat(widths[1]),
            &"-".repeat(widths[2]),
        ]));
        for r in &rows {
            out.push_str(&line([&r[0], &r[1], &r[2]]));
        }
        out
    }
}

/// A finished comparison: the report plus every trained checkpoint, in
/// record order.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: EvalReport,
    pub checkpoints: Vec<Checkpoint>,
}

/// Trains both models at every epoch size on shared splits and scores them
/// on the test windows. Runs are independent and execute in parallel; each
/// run is itself deterministic, so the result depends only on the inputs.
pub fn compare_with_sentiment(
    series: &BarSeries,
    sentiment: &[DailySentiment],
    epoch_sizes: &[usize],
    config: &ExperimentConfig,
) -> crate::Result<Comparison> {
    if epoch_sizes.is_empty() {
        return Err(EvalError::NoEpochSizes.into());
    }
    let prepared = MODELS
        .iter()
        .map(|&mode| {
            let dataset = prepare_dataset(series, sentiment, mode, config)?;
            let (train_w, test_w) = make_windows(&dataset, config.lookback)?;
            let real: Vec<f64> = test_w.end_rows.iter().map(|&r| dataset.targets[r]).collect();
            Ok((mode, train_w, test_w, real))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = epoch_sizes
        .iter()
        .flat_map(|&e| (0..prepared.len()).map(move |m| (e, m)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(epochs, m)| {
            let (mode, train_w, test_w, real) = &prepared[m];
            let cfg = config.train_config(epochs);
            let ckpt = train(train_w, &cfg)?;
            let predicted = predict(&ckpt, test_w)?;
            let record = VariantRecord::from_series(
                *mode,
                epochs,
                *ckpt.loss_history.last().expect("epochs > 0"),
                test_w.label_dates.clone(),
                real.clone(),
                predicted,
            )?;
            Ok((record, ckpt))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let (records, checkpoints) = results.into_iter().unzip();
    Ok(Comparison {
        report: EvalReport::new(epoch_sizes.to_vec(), config.clone(), records),
        checkpoints,
    })
}

/// Full comparison from raw inputs: tweets are aligned to the bar calendar,
/// scored with `lexicon`, aggregated per day, then fused.
pub fn run_comparison(
    series: &BarSeries,
    tweets: &[Tweet],
    lexicon: &Lexicon,
    epoch_sizes: &[usize],
    config: &ExperimentConfig,
) -> crate::Result<Comparison> {
    let (days, _) = daily_sentiment(series, tweets, lexicon)?;
    compare_with_sentiment(series, &days, epoch_sizes, config)
}
