//! Historical OHLCV bars and tweet corpora: parsing, validation and
//! calendar alignment of tweets onto trading days.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("input contains no usable records")]
    EmptyInput,
    #[error("mapped column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("line {line}: unparseable date `{value}`")]
    InvalidDate { line: u64, value: String },
    #[error("bar dated {date}: {reason}")]
    InvalidBar { date: NaiveDate, reason: String },
    #[error("bars are not strictly ascending by date at {0}")]
    NotAscending(NaiveDate),
    #[error("trading calendar is empty")]
    EmptyTradingCalendar,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MarketDataError>;

/// Numeric fields of a daily bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceField {
    Open,
    High,
    Low,
    Close,
    AdjClose,
    Volume,
}

impl PriceField {
    pub const ALL: [PriceField; 6] = [
        PriceField::Open,
        PriceField::High,
        PriceField::Low,
        PriceField::Close,
        PriceField::AdjClose,
        PriceField::Volume,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriceField::Open => "open",
            PriceField::High => "high",
            PriceField::Low => "low",
            PriceField::Close => "close",
            PriceField::AdjClose => "adj_close",
            PriceField::Volume => "volume",
        }
    }
}

impl fmt::Display for PriceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PriceField {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PriceField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown price field `{s}`"))
    }
}

/// One trading day. Any numeric field may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: Option<f64>,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub close: Option<f64>,
    pub adj_close: Option<f64>,
    pub volume: Option<f64>,
}

impl OhlcvBar {
    pub fn field(&self, field: PriceField) -> Option<f64> {
        match field {
            PriceField::Open => self.open,
            PriceField::High => self.high,
            PriceField::Low => self.low,
            PriceField::Close => self.close,
            PriceField::AdjClose => self.adj_close,
            PriceField::Volume => self.volume,
        }
    }

    pub fn field_mut(&mut self, field: PriceField) -> &mut Option<f64> {
        match field {
            PriceField::Open => &mut self.open,
            PriceField::High => &mut self.high,
            PriceField::Low => &mut self.low,
            PriceField::Close => &mut self.close,
            PriceField::AdjClose => &mut self.adj_close,
            PriceField::Volume => &mut self.volume,
        }
    }

    /// Checks the price-ordering and volume invariants.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| MarketDataError::InvalidBar {
            date: self.date,
            reason,
        };
        if let (Some(o), Some(h), Some(l), Some(c)) = (self.open, self.high, self.low, self.close) {
            if l > o.min(c) {
                return Err(invalid(format!("low {l} above min(open, close)")));
            }
            if h < o.max(c) {
                return Err(invalid(format!("high {h} below max(open, close)")));
            }
        }
        if let Some(v) = self.volume {
            if v < 0.0 {
                return Err(invalid(format!("negative volume {v}")));
            }
        }
        Ok(())
    }
}

/// Bars of a single symbol, strictly ascending by date.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    symbol: String,
    bars: Vec<OhlcvBar>,
}

impl BarSeries {
    pub fn new(symbol: impl Into<String>, bars: Vec<OhlcvBar>) -> Result<Self> {
        for pair in bars.windows(2) {
            if pair[0].date == pair[1].date {
                return Err(MarketDataError::DuplicateDate(pair[1].date));
            }
            if pair[0].date > pair[1].date {
                return Err(MarketDataError::NotAscending(pair[1].date));
            }
        }
        Ok(BarSeries {
            symbol: symbol.into(),
            bars,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn bars(&self) -> &[OhlcvBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    /// Same dates, with each bar rewritten by `f`. Dates must not change.
    pub(crate) fn map_bars(&self, mut f: impl FnMut(&mut OhlcvBar)) -> BarSeries {
        let bars = self
            .bars
            .iter()
            .map(|b| {
                let mut b = b.clone();
                f(&mut b);
                b
            })
            .collect();
        BarSeries {
            symbol: self.symbol.clone(),
            bars,
        }
    }
}

/// Maps each bar field to a CSV header name. `adj_close` and `volume` may be
/// left unmapped, in which case those fields parse as missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaMap {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub adj_close: Option<String>,
    pub volume: Option<String>,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap::canonical()
    }
}

impl SchemaMap {
    /// The header written by [`write_ohlcv_csv`].
    pub fn canonical() -> Self {
        SchemaMap {
            date: "date".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            adj_close: Some("adj_close".into()),
            volume: Some("volume".into()),
        }
    }

    /// Column names of the NSE historical equity export.
    pub fn nse_equity() -> Self {
        SchemaMap {
            date: "Date".into(),
            open: "Open Price".into(),
            high: "High Price".into(),
            low: "Low Price".into(),
            close: "Close Price".into(),
            adj_close: None,
            volume: Some("Total Traded Quantity".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DateFormat {
    Iso,
    DayFirst,
}

impl DateFormat {
    fn pattern(self) -> &'static str {
        match self {
            DateFormat::Iso => "%Y-%m-%d",
            DateFormat::DayFirst => "%d-%m-%Y",
        }
    }

    fn detect(value: &str) -> Option<DateFormat> {
        [DateFormat::Iso, DateFormat::DayFirst]
            .into_iter()
            .find(|f| NaiveDate::parse_from_str(value, f.pattern()).is_ok())
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    let cleaned: String = cell.trim().chars().filter(|&c| c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses an OHLCV CSV export. Unparseable numeric cells become missing
/// values; the date format (ISO-8601 or DD-MM-YYYY) is detected once from
/// the first data row and then applied to the whole file.
pub fn parse_ohlcv_csv<R: Read>(input: R, schema: &SchemaMap, symbol: &str) -> Result<BarSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MarketDataError::MissingColumn(name.to_string()))
    };
    let optional = |name: &Option<String>| name.as_deref().map(column).transpose();

    let date_col = column(&schema.date)?;
    let open_col = column(&schema.open)?;
    let high_col = column(&schema.high)?;
    let low_col = column(&schema.low)?;
    let close_col = column(&schema.close)?;
    let adj_col = optional(&schema.adj_close)?;
    let volume_col = optional(&schema.volume)?;

    let mut format = None;
    let mut bars = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_date = record.get(date_col).unwrap_or("");
        let fmt = match format {
            Some(f) => f,
            None => {
                let f = DateFormat::detect(raw_date).ok_or_else(|| MarketDataError::InvalidDate {
                    line,
                    value: raw_date.to_string(),
                })?;
                format = Some(f);
                f
            }
        };
        let date = NaiveDate::parse_from_str(raw_date, fmt.pattern()).map_err(|_| {
            MarketDataError::InvalidDate {
                line,
                value: raw_date.to_string(),
            }
        })?;
        let cell = |col: usize| record.get(col).and_then(parse_number);
        let bar = OhlcvBar {
            date,
            open: cell(open_col),
            high: cell(high_col),
            low: cell(low_col),
            close: cell(close_col),
            adj_close: adj_col.and_then(cell),
            volume: volume_col.and_then(cell),
        };
        bar.validate()?;
        bars.push(bar);
    }
    if bars.is_empty() {
        return Err(MarketDataError::EmptyInput);
    }
    bars.sort_by_key(|b| b.date);
    BarSeries::new(symbol, bars)
}

/// Writes bars with the [`SchemaMap::canonical`] header, ISO dates and
/// empty cells for missing values.
pub fn write_ohlcv_csv<W: Write>(series: &BarSeries, output: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["date", "open", "high", "low", "close", "adj_close", "volume"])?;
    for bar in series.bars() {
        let mut row = vec![bar.date.format("%Y-%m-%d").to_string()];
        row.extend(
            PriceField::ALL
                .iter()
                .map(|&f| bar.field(f).map(|v| v.to_string()).unwrap_or_default()),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub text: String,
}

impl Tweet {
    /// Calendar date in the timestamp's own UTC offset.
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TweetCorpus {
    pub tweets: Vec<Tweet>,
    pub skipped: usize,
}

#[derive(Deserialize)]
struct RawTweet {
    timestamp: String,
    text: String,
    id: serde_json::Value,
}

fn tweet_from_line(line: &str) -> Option<Tweet> {
    let raw: RawTweet = serde_json::from_str(line).ok()?;
    let id = match raw.id {
        serde_json::Value::String(s) => s,
        serde_json::Value::Number(n) => n.to_string(),
        _ => return None,
    };
    if raw.text.trim().is_empty() {
        return None;
    }
    let timestamp = DateTime::parse_from_rfc3339(raw.timestamp.trim()).ok()?;
    Some(Tweet {
        id,
        timestamp,
        text: raw.text,
    })
}

/// Reads a JSONL tweet corpus. Malformed lines are skipped and counted;
/// blank lines are ignored.
pub fn parse_tweets_jsonl<R: Read>(input: R) -> Result<TweetCorpus> {
    let mut corpus = TweetCorpus::default();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match tweet_from_line(&line) {
            Some(t) => corpus.tweets.push(t),
            None => corpus.skipped += 1,
        }
    }
    if corpus.tweets.is_empty() {
        return Err(MarketDataError::EmptyInput);
    }
    Ok(corpus)
}

pub fn write_tweets_jsonl<W: Write>(tweets: &[Tweet], mut output: W) -> Result<()> {
    for t in tweets {
        let obj = serde_json::json!({
            "timestamp": t.timestamp.to_rfc3339(),
            "text": t.text,
            "id": t.id,
        });
        writeln!(output, "{obj}")?;
    }
    Ok(())
}

/// Source of tweets. File replay is the only built-in implementation; a
/// live API client can implement the same trait.
pub trait TweetSource {
    fn fetch(&self) -> Result<TweetCorpus>;
}

#[derive(Debug, Clone)]
pub struct JsonlTweetFile {
    pub path: PathBuf,
}

impl TweetSource for JsonlTweetFile {
    fn fetch(&self) -> Result<TweetCorpus> {
        parse_tweets_jsonl(File::open(&self.path)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    /// One entry per trading date, possibly empty.
    pub buckets: BTreeMap<NaiveDate, Vec<Tweet>>,
    /// Tweets dated after the final trading date.
    pub dropped: usize,
}

impl Alignment {
    pub fn assigned(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }
}

/// Assigns each tweet to the first trading date on or after its own date,
/// so weekend and holiday chatter lands on the next session.
pub fn align_to_trading_days(tweets: &[Tweet], trading_dates: &[NaiveDate]) -> Result<Alignment> {
    if trading_dates.is_empty() {
        return Err(MarketDataError::EmptyTradingCalendar);
    }
    if let Some(pair) = trading_dates.windows(2).find(|p| p[0] >= p[1]) {
        return Err(MarketDataError::NotAscending(pair[1]));
    }
    let mut alignment = Alignment {
        buckets: trading_dates.iter().map(|&d| (d, Vec::new())).collect(),
        dropped: 0,
    };
    for tweet in tweets {
        let day = tweet.date();
        let idx = trading_dates.partition_point(|&d| d < day);
        match trading_dates.get(idx) {
            Some(d) => alignment.buckets.get_mut(d).expect("key exists").push(tweet.clone()),
            None => alignment.dropped += 1,
        }
    }
    Ok(alignment)
}
