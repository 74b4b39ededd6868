//! Glue between the stages: sentiment per trading day, dataset preparation
//! and shared experiment hyperparameters.

use serde::{Deserialize, Serialize};

use crate::features::{fuse, impute_mean_fields, train_end_date, FeatureMode, FusedDataset};
use crate::lstm::{OptimizerKind, TrainConfig};
use crate::market_data::{align_to_trading_days, BarSeries, PriceField, Tweet};
use crate::sentiment::{aggregate_daily, score_buckets, DailySentiment, Lexicon};

/// Hyperparameters shared by every model in an experiment. Only the epoch
/// count and feature mode vary between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lookback: usize,
    pub split_fraction: f64,
    pub target_field: PriceField,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            lookback: 30,
            split_fraction: crate::features::DEFAULT_SPLIT_FRACTION,
            target_field: PriceField::Close,
            hidden_size: t.hidden_size,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            grad_clip_norm: t.grad_clip_norm,
            optimizer: t.optimizer,
            seed: t.seed,
        }
    }
}

impl ExperimentConfig {
    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            grad_clip_norm: self.grad_clip_norm,
            optimizer: self.optimizer,
            hidden_size: self.hidden_size,
        }
    }
}

/// Daily class percentages for every bar date, plus the number of tweets
/// dated after the last bar.
pub fn daily_sentiment(
    series: &BarSeries,
    tweets: &[Tweet],
    lexicon: &Lexicon,
) -> crate::Result<(Vec<DailySentiment>, usize)> {
    let alignment = align_to_trading_days(tweets, &series.dates())?;
    let scored = score_buckets(&alignment.buckets, lexicon);
    Ok((aggregate_daily(&scored), alignment.dropped))
}

/// Imputes the fields `mode` and the target need (training-range means),
/// then fuses and splits.
pub fn prepare_dataset(
    series: &BarSeries,
    sentiment: &[DailySentiment],
    mode: FeatureMode,
    config: &ExperimentConfig,
) -> crate::Result<FusedDataset> {
    let mut fields = mode.price_fields().to_vec();
    if !fields.contains(&config.target_field) {
        fields.push(config.target_field);
    }
    let train_end = train_end_date(series, config.split_fraction)?;
    let imputed = impute_mean_fields(series, train_end, &fields)?;
    Ok(fuse(
        &imputed,
        sentiment,
        mode,
        config.target_field,
        config.split_fraction,
    )?)
}
