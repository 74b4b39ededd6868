//! Mean imputation, train-only min-max scaling, fusion of price and
//! sentiment columns, and lookback windowing into supervised sequences.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{BarSeries, PriceField};
use crate::sentiment::DailySentiment;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("field `{0}` has no present values in the training range")]
    AllMissingColumn(PriceField),
    #[error("column `{0}` is constant over the training rows")]
    DegenerateRange(String),
    #[error("training row range is empty")]
    EmptyTrainRows,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no daily sentiment record for trading date {0}")]
    MissingSentimentDate(NaiveDate),
    #[error("bar dated {date} has no `{field}` value (impute first)")]
    MissingValue { date: NaiveDate, field: PriceField },
    #[error("too few rows: have {rows}, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    InvalidSplit(f64),
    #[error("lookback must be positive")]
    ZeroLookback,
    #[error("unsupported dataset version {0}")]
    UnsupportedVersion(u32),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// Which input columns a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Open price plus daily positive and negative tweet percentages.
    Hisa,
    /// Historical prices only: open, high, low, close.
    Dlpm,
}

impl FeatureMode {
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureMode::Hisa => &["open", "pos_pct", "neg_pct"],
            FeatureMode::Dlpm => &["open", "high", "low", "close"],
        }
    }

    pub fn width(self) -> usize {
        self.feature_names().len()
    }

    /// Price fields read from the bars in this mode.
    pub fn price_fields(self) -> &'static [PriceField] {
        match self {
            FeatureMode::Hisa => &[PriceField::Open],
            FeatureMode::Dlpm => &[
                PriceField::Open,
                PriceField::High,
                PriceField::Low,
                PriceField::Close,
            ],
        }
    }

    /// Display name used in comparison tables.
    pub fn model_name(self) -> &'static str {
        match self {
            FeatureMode::Hisa => "HiSA-SMFM",
            FeatureMode::Dlpm => "DLPM",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Hisa => "hisa",
            FeatureMode::Dlpm => "dlpm",
        })
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hisa" => Ok(FeatureMode::Hisa),
            "dlpm" => Ok(FeatureMode::Dlpm),
            _ => Err(format!("unknown feature mode `{s}` (expected hisa or dlpm)")),
        }
    }
}

/// Replaces every missing value of every bar field with that field's mean
/// over bars dated on or before `train_end`.
pub fn impute_mean(series: &BarSeries, train_end: NaiveDate) -> Result<BarSeries> {
    impute_mean_fields(series, train_end, &PriceField::ALL)
}

/// [`impute_mean`] restricted to `fields`. A field with no missing values is
/// left alone even if it has no training values.
pub fn impute_mean_fields(
    series: &BarSeries,
    train_end: NaiveDate,
    fields: &[PriceField],
) -> Result<BarSeries> {
    let mut means = HashMap::new();
    for &field in fields {
        if series.bars().iter().all(|b| b.field(field).is_some()) {
            continue;
        }
        let (sum, n) = series
            .bars()
            .iter()
            .filter(|b| b.date <= train_end)
            .filter_map(|b| b.field(field))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            return Err(FeatureError::AllMissingColumn(field));
        }
        means.insert(field, sum / n as f64);
    }
    Ok(series.map_bars(|bar| {
        for (&field, &mean) in &means {
            bar.field_mut(field).get_or_insert(mean);
        }
    }))
}

/// Per-column min-max extrema fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn scale(&self, col: usize, x: f64) -> f64 {
        (x - self.min[col]) / (self.max[col] - self.min[col])
    }

    pub fn unscale(&self, col: usize, x: f64) -> f64 {
        x * (self.max[col] - self.min[col]) + self.min[col]
    }

    /// Identity scaling (min 0, max 1) for every named column.
    pub fn identity(names: &[&str]) -> Self {
        ScalerParams {
            names: names.iter().map(|s| s.to_string()).collect(),
            min: vec![0.0; names.len()],
            max: vec![1.0; names.len()],
        }
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.width() {
            return Err(FeatureError::ShapeMismatch(format!(
                "matrix has {cols} columns, scaler has {}",
                self.width()
            )));
        }
        Ok(())
    }
}

/// Fits column extrema over `train_rows` only; other rows never influence
/// the result.
pub fn fit_scaler(
    features: ArrayView2<f64>,
    train_rows: Range<usize>,
    names: &[String],
) -> Result<ScalerParams> {
    if names.len() != features.ncols() {
        return Err(FeatureError::ShapeMismatch(format!(
            "{} names for {} columns",
            names.len(),
            features.ncols()
        )));
    }
    if train_rows.is_empty() || train_rows.end > features.nrows() {
        return Err(FeatureError::EmptyTrainRows);
    }
    let train = features.slice(s![train_rows, ..]);
    let mut min = Vec::with_capacity(names.len());
    let mut max = Vec::with_capacity(names.len());
    for (col, name) in train.axis_iter(Axis(1)).zip(names) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
        if !(hi > lo) {
            return Err(FeatureError::DegenerateRange(name.clone()));
        }
        min.push(lo);
        max.push(hi);
    }
    Ok(ScalerParams {
        names: names.to_vec(),
        min,
        max,
    })
}

/// `(x - min) / (max - min)` per column. Values outside the fitted range are
/// not clipped.
pub fn transform(features: ArrayView2<f64>, scaler: &ScalerParams) -> Result<Array2<f64>> {
    scaler.check_width(features.ncols())?;
    let mut out = features.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| scaler.scale(j, x));
    }
    Ok(out)
}

pub fn inverse_transform(features: ArrayView2<f64>, scaler: &ScalerParams) -> Result<Array2<f64>> {
    scaler.check_width(features.ncols())?;
    let mut out = features.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| scaler.unscale(j, x));
    }
    Ok(out)
}

/// Unscaled per-day feature rows and next-day targets, before any split.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedRows {
    pub dates: Vec<NaiveDate>,
    /// Date of the bar each target is read from (the following trading day).
    pub target_dates: Vec<NaiveDate>,
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub feature_mode: FeatureMode,
    pub target_field: PriceField,
}

/// Builds row `t` from the bar at `t` (plus that date's sentiment in hisa
/// mode) with target equal to `target_field` of bar `t + 1`. The final bar
/// only contributes a target.
pub fn fuse_rows(
    series: &BarSeries,
    sentiment: &[DailySentiment],
    mode: FeatureMode,
    target_field: PriceField,
) -> Result<FusedRows> {
    let bars = series.bars();
    if bars.len() < 3 {
        return Err(FeatureError::TooFewRows {
            rows: bars.len().saturating_sub(1),
            needed: 2,
        });
    }
    let by_date: HashMap<NaiveDate, &DailySentiment> =
        sentiment.iter().map(|d| (d.date, d)).collect();
    let rows = bars.len() - 1;
    let width = mode.width();
    let mut features = Array2::zeros((rows, width));
    let mut targets = Array1::zeros(rows);
    let value = |idx: usize, field: PriceField| {
        bars[idx].field(field).ok_or(FeatureError::MissingValue {
            date: bars[idx].date,
            field,
        })
    };
    for t in 0..rows {
        let mut row = features.row_mut(t);
        match mode {
            FeatureMode::Hisa => {
                let day = by_date
                    .get(&bars[t].date)
                    .ok_or(FeatureError::MissingSentimentDate(bars[t].date))?;
                row[0] = value(t, PriceField::Open)?;
                row[1] = day.pos_pct;
                row[2] = day.neg_pct;
            }
            FeatureMode::Dlpm => {
                for (j, &field) in mode.price_fields().iter().enumerate() {
                    row[j] = value(t, field)?;
                }
            }
        }
        targets[t] = value(t + 1, target_field)?;
    }
    Ok(FusedRows {
        dates: bars[..rows].iter().map(|b| b.date).collect(),
        target_dates: bars[1..].iter().map(|b| b.date).collect(),
        features,
        targets,
        feature_mode: mode,
        target_field,
    })
}

/// Number of leading training rows for `rows` rows.
pub fn split_index_for(rows: usize, split_fraction: f64) -> Result<usize> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(FeatureError::InvalidSplit(split_fraction));
    }
    Ok((split_fraction * rows as f64).floor() as usize)
}

/// Last bar date belonging to the training rows of a series, used as the
/// imputation cutoff.
pub fn train_end_date(series: &BarSeries, split_fraction: f64) -> Result<NaiveDate> {
    let rows = series.len().saturating_sub(1);
    let split = split_index_for(rows, split_fraction)?;
    if split == 0 {
        return Err(FeatureError::TooFewRows { rows, needed: 2 });
    }
    Ok(series.bars()[split - 1].date)
}

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.75;

/// Fused, split and scaler-annotated dataset. Features and targets are kept
/// in currency units; scaling happens when windows are cut.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDataset {
    pub dates: Vec<NaiveDate>,
    pub target_dates: Vec<NaiveDate>,
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub feature_mode: FeatureMode,
    pub target_field: PriceField,
    /// Feature columns followed by the target column.
    pub scaler: ScalerParams,
    pub split_index: usize,
}

impl FusedDataset {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.scaler.names[..self.features.ncols()]
    }

    pub fn target_column(&self) -> usize {
        self.features.ncols()
    }

    /// Swaps in a scaler fitted elsewhere, e.g. one stored in a checkpoint.
    pub fn with_scaler(mut self, scaler: ScalerParams) -> Result<Self> {
        if scaler.names != self.scaler.names {
            return Err(FeatureError::ShapeMismatch(format!(
                "scaler columns {:?} do not match dataset columns {:?}",
                scaler.names, self.scaler.names
            )));
        }
        self.scaler = scaler;
        Ok(self)
    }

    pub fn to_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &DatasetFile::from(self))?;
        Ok(())
    }

    pub fn from_json<R: Read>(input: R) -> Result<Self> {
        let file: DatasetFile = serde_json::from_reader(input)?;
        file.into_dataset()
    }
}

fn target_column_name(field: PriceField) -> String {
    format!("target_{field}")
}

pub fn fuse(
    series: &BarSeries,
    sentiment: &[DailySentiment],
    mode: FeatureMode,
    target_field: PriceField,
    split_fraction: f64,
) -> Result<FusedDataset> {
    let rows = fuse_rows(series, sentiment, mode, target_field)?;
    let n = rows.dates.len();
    let split_index = split_index_for(n, split_fraction)?;
    if split_index == 0 || split_index >= n {
        return Err(FeatureError::TooFewRows { rows: n, needed: 2 });
    }
    let mut joined = Array2::zeros((n, mode.width() + 1));
    joined.slice_mut(s![.., ..mode.width()]).assign(&rows.features);
    joined.column_mut(mode.width()).assign(&rows.targets);
    let mut names: Vec<String> = mode.feature_names().iter().map(|s| s.to_string()).collect();
    names.push(target_column_name(target_field));
    let scaler = fit_scaler(joined.view(), 0..split_index, &names)?;
    Ok(FusedDataset {
        dates: rows.dates,
        target_dates: rows.target_dates,
        features: rows.features,
        targets: rows.targets,
        feature_mode: mode,
        target_field,
        scaler,
        split_index,
    })
}

/// Scaled lookback sequences with their scaled labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// samples × lookback × features
    pub sequences: Array3<f64>,
    pub labels: Array1<f64>,
    pub lookback: usize,
    /// Dataset row each window ends on; its label is that row's target.
    pub end_rows: Vec<usize>,
    /// Dates of the bars the labels were read from.
    pub label_dates: Vec<NaiveDate>,
    pub feature_mode: Option<FeatureMode>,
    pub scaler: ScalerParams,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.sequences.dim().2
    }

    pub fn sequence(&self, i: usize) -> ArrayView2<'_, f64> {
        self.sequences.index_axis(Axis(0), i)
    }

    /// Index of the target column in `scaler`.
    pub fn target_column(&self) -> usize {
        self.feature_count()
    }
}

/// Cuts windows of `lookback` consecutive rows. Training windows end on rows
/// `lookback..split_index`, test windows on `split_index..rows`; test windows
/// may read trailing training rows as history.
pub fn make_windows(
    dataset: &FusedDataset,
    lookback: usize,
) -> Result<(WindowedDataset, WindowedDataset)> {
    if lookback == 0 {
        return Err(FeatureError::ZeroLookback);
    }
    let rows = dataset.rows();
    if rows < lookback + 2 || dataset.split_index <= lookback || dataset.split_index >= rows {
        return Err(FeatureError::TooFewRows {
            rows,
            needed: lookback + 2,
        });
    }
    let scaled = transform(
        dataset.features.view(),
        &ScalerParams {
            names: dataset.feature_names().to_vec(),
            min: dataset.scaler.min[..dataset.target_column()].to_vec(),
            max: dataset.scaler.max[..dataset.target_column()].to_vec(),
        },
    )?;
    let cut = |ends: Range<usize>| {
        let width = scaled.ncols();
        let mut sequences = Array3::zeros((ends.len(), lookback, width));
        let mut labels = Array1::zeros(ends.len());
        for (i, end) in ends.clone().enumerate() {
            sequences
                .index_axis_mut(Axis(0), i)
                .assign(&scaled.slice(s![end + 1 - lookback..=end, ..]));
            labels[i] = dataset
                .scaler
                .scale(dataset.target_column(), dataset.targets[end]);
        }
        WindowedDataset {
            sequences,
            labels,
            lookback,
            end_rows: ends.clone().collect(),
            label_dates: ends.map(|e| dataset.target_dates[e]).collect(),
            feature_mode: Some(dataset.feature_mode),
            scaler: dataset.scaler.clone(),
        }
    };
    Ok((cut(lookback..dataset.split_index), cut(dataset.split_index..rows)))
}

const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedColumn {
    name: String,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    version: u32,
    feature_mode: FeatureMode,
    target_field: PriceField,
    split_index: usize,
    dates: Vec<NaiveDate>,
    target_dates: Vec<NaiveDate>,
    features: Vec<NamedColumn>,
    targets: Vec<f64>,
    scaler: ScalerParams,
}

impl From<&FusedDataset> for DatasetFile {
    fn from(d: &FusedDataset) -> Self {
        DatasetFile {
            version: DATASET_VERSION,
            feature_mode: d.feature_mode,
            target_field: d.target_field,
            split_index: d.split_index,
            dates: d.dates.clone(),
            target_dates: d.target_dates.clone(),
            features: d
                .feature_names()
                .iter()
                .zip(d.features.axis_iter(Axis(1)))
                .map(|(name, col)| NamedColumn {
                    name: name.clone(),
                    values: col.to_vec(),
                })
                .collect(),
            targets: d.targets.to_vec(),
            scaler: d.scaler.clone(),
        }
    }
}

impl DatasetFile {
    fn into_dataset(self) -> Result<FusedDataset> {
        if self.version != DATASET_VERSION {
            return Err(FeatureError::UnsupportedVersion(self.version));
        }
        let rows = self.dates.len();
        let width = self.features.len();
        let consistent = self.target_dates.len() == rows
            && self.targets.len() == rows
            && self.features.iter().all(|c| c.values.len() == rows)
            && width == self.feature_mode.width()
            && self.scaler.width() == width + 1
            && self.split_index <= rows;
        if !consistent {
            return Err(FeatureError::ShapeMismatch("dataset file arrays disagree".into()));
        }
        let mut features = Array2::zeros((rows, width));
        for (j, col) in self.features.iter().enumerate() {
            features.column_mut(j).assign(&Array1::from(col.values.clone()));
        }
        Ok(FusedDataset {
            dates: self.dates,
            target_dates: self.target_dates,
            features,
            targets: Array1::from(self.targets),
            feature_mode: self.feature_mode,
            target_field: self.target_field,
            scaler: self.scaler,
            split_index: self.split_index,
        })
    }
}
