use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use hisa_core::evaluation::{accuracy, compare_with_sentiment, mape, rmse, VariantRecord};
use hisa_core::features::{make_windows, FeatureMode};
use hisa_core::lstm::{self, Checkpoint};
use hisa_core::market_data::{
    parse_ohlcv_csv, parse_tweets_jsonl, write_ohlcv_csv, write_tweets_jsonl, BarSeries, TweetCorpus,
};
use hisa_core::pipeline::{daily_sentiment, prepare_dataset};
use hisa_core::sentiment::{load_lexicon, read_daily_csv, write_daily_csv, DailySentiment, Lexicon};

use crate::config::RunConfig;
use crate::CliError;

fn core<E: Into<hisa_core::Error>>(e: E) -> CliError {
    CliError::from(e.into())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    create(path)?;
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_resolved_config(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    write_text(
        &cfg.output_dir().join(format!("{command}.config.toml")),
        &cfg.to_toml(),
    )
}

fn load_series(cfg: &RunConfig) -> Result<BarSeries, CliError> {
    let path = cfg.require(&cfg.paths.historical, "historical")?;
    parse_ohlcv_csv(open(path)?, &cfg.schema, &cfg.symbol)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// A corpus file with no content at all is an empty corpus rather than an
/// error, so quiet periods can still be scored.
fn load_tweets(cfg: &RunConfig) -> Result<TweetCorpus, CliError> {
    let path = cfg.require(&cfg.paths.tweets, "tweets")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Ok(TweetCorpus::default());
    }
    parse_tweets_jsonl(text.as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_lexicon_file(cfg: &RunConfig) -> Result<Lexicon, CliError> {
    let path = cfg.require(&cfg.paths.lexicon, "lexicon")?;
    load_lexicon(open(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Daily sentiment from `paths.sentiment` if set, otherwise scored from the
/// tweet corpus and lexicon.
fn load_daily(cfg: &RunConfig, series: &BarSeries) -> Result<Vec<DailySentiment>, CliError> {
    if let Some(path) = &cfg.paths.sentiment {
        return read_daily_csv(open(path)?)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())));
    }
    let corpus = load_tweets(cfg)?;
    let lexicon = load_lexicon_file(cfg)?;
    let (days, _) = daily_sentiment(series, &corpus.tweets, &lexicon)?;
    Ok(days)
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let series = load_series(cfg)?;
    let out = cfg.output_dir();
    write_ohlcv_csv(&series, create(&out.join("bars.csv"))?).map_err(core)?;
    let first = series.bars().first().expect("non-empty").date;
    let last = series.bars().last().expect("non-empty").date;
    println!("bars: {} ({first} .. {last})", series.len());
    if cfg.paths.tweets.is_some() {
        let corpus = load_tweets(cfg)?;
        write_tweets_jsonl(&corpus.tweets, create(&out.join("tweets.jsonl"))?).map_err(core)?;
        println!("tweets: {}", corpus.tweets.len());
        println!("skipped: {}", corpus.skipped);
    }
    write_resolved_config(cfg, "ingest")
}

pub fn sentiment(cfg: &RunConfig) -> Result<(), CliError> {
    let series = load_series(cfg)?;
    let corpus = load_tweets(cfg)?;
    let lexicon = load_lexicon_file(cfg)?;
    let (days, dropped) = daily_sentiment(&series, &corpus.tweets, &lexicon)?;
    let path = cfg.output_dir().join("sentiment.csv");
    write_daily_csv(&days, create(&path)?).map_err(core)?;
    println!("trading days: {}", days.len());
    println!("tweets: {} (skipped {}, after last bar {dropped})", corpus.tweets.len(), corpus.skipped);
    println!("wrote {}", path.display());
    write_resolved_config(cfg, "sentiment")
}

fn mode_or_default(cfg: &RunConfig) -> FeatureMode {
    cfg.feature_mode.unwrap_or(FeatureMode::Hisa)
}

fn sentiment_for(cfg: &RunConfig, mode: FeatureMode, series: &BarSeries) -> Result<Vec<DailySentiment>, CliError> {
    match mode {
        FeatureMode::Hisa => load_daily(cfg, series),
        FeatureMode::Dlpm => Ok(Vec::new()),
    }
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let mode = mode_or_default(cfg);
    let series = load_series(cfg)?;
    let days = sentiment_for(cfg, mode, &series)?;
    let dataset = prepare_dataset(&series, &days, mode, &cfg.experiment)?;
    let (train_w, _) = make_windows(&dataset, cfg.experiment.lookback).map_err(core)?;
    let ckpt = lstm::train(&train_w, &cfg.experiment.train_config(cfg.epochs)).map_err(core)?;

    let out = cfg.output_dir();
    dataset.to_json(create(&out.join("dataset.json"))?).map_err(core)?;
    let path = out.join("checkpoint.json");
    ckpt.to_json(create(&path)?).map_err(core)?;
    println!(
        "trained {mode} model: {} windows, {} epochs, final loss {:.6e}",
        train_w.len(),
        cfg.epochs,
        ckpt.loss_history.last().expect("epochs > 0")
    );
    println!("wrote {}", path.display());
    write_resolved_config(cfg, "train")
}

pub fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    let ckpt_path = cfg.require(&cfg.paths.checkpoint, "checkpoint")?;
    let ckpt = Checkpoint::from_json(open(ckpt_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", ckpt_path.display())))?;
    let mode = cfg
        .feature_mode
        .or(ckpt.feature_mode)
        .ok_or_else(|| CliError::input("feature mode unknown: pass --mode"))?;
    let series = load_series(cfg)?;
    let days = sentiment_for(cfg, mode, &series)?;
    let dataset = prepare_dataset(&series, &days, mode, &cfg.experiment)?
        .with_scaler(ckpt.scaler.clone())
        .map_err(core)?;
    let (_, test_w) = make_windows(&dataset, ckpt.lookback).map_err(core)?;
    let predicted = lstm::predict(&ckpt, &test_w).map_err(core)?;
    let real: Vec<f64> = test_w.end_rows.iter().map(|&r| dataset.targets[r]).collect();

    let record = VariantRecord {
        model: mode,
        epochs: ckpt.config.epochs,
        accuracy_pct: accuracy(&real, &predicted).map_err(core)?,
        mape_pct: mape(&real, &predicted).map_err(core)?,
        rmse: rmse(&real, &predicted).map_err(core)?,
        final_train_loss: *ckpt.loss_history.last().unwrap_or(&f64::NAN),
        dates: test_w.label_dates.clone(),
        real,
        predicted,
    };
    let path = cfg.output_dir().join("predictions.csv");
    record
        .write_plot_csv(create(&path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    println!(
        "{} test days: accuracy {:.2}%, MAPE {:.2}%, RMSE {:.4}",
        record.real.len(),
        record.accuracy_pct,
        record.mape_pct,
        record.rmse
    );
    println!("wrote {}", path.display());
    write_resolved_config(cfg, "predict")
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let series = load_series(cfg)?;
    let days = load_daily(cfg, &series)?;
    let cmp = compare_with_sentiment(&series, &days, &cfg.epoch_sizes, &cfg.experiment)?;

    let out = cfg.output_dir();
    let json = cmp.report.to_json_string().map_err(|e| CliError::input(e.to_string()))?;
    write_text(&out.join("report.json"), &json)?;
    for (record, ckpt) in cmp.report.records.iter().zip(&cmp.checkpoints) {
        let stem = format!("{}_e{}", record.model, record.epochs);
        let plot = out.join("plots").join(format!("{stem}.csv"));
        record
            .write_plot_csv(create(&plot)?)
            .map_err(|e| CliError::input(format!("{}: {e}", plot.display())))?;
        ckpt.to_json(create(&out.join("checkpoints").join(format!("{stem}.json")))?)
            .map_err(core)?;
    }
    let table = cmp.report.render_table();
    write_text(&out.join("table.txt"), &table)?;
    print!("{table}");
    write_resolved_config(cfg, "compare")
}
