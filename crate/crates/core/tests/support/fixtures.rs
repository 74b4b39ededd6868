//! Synthetic datasets with known structure.

use std::fmt::Write as _;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use hisa_core::features::{ScalerParams, WindowedDataset};
use hisa_core::market_data::{BarSeries, OhlcvBar};
use hisa_core::sentiment::DailySentiment;
use ndarray::{Array1, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SINE_LOOKBACK: usize = 6;

/// 20 windows over `0.6 + 0.3 sin(0.5 t)`, each labelled with the next
/// value. Scaler is the identity, so predictions are in label units.
pub fn sine_windows() -> WindowedDataset {
    let n = 20;
    let wave = |t: usize| 0.6 + 0.3 * (0.5 * t as f64).sin();
    let sequences = Array3::from_shape_fn((n, SINE_LOOKBACK, 1), |(k, t, _)| wave(k + t));
    let labels = Array1::from_shape_fn(n, |k| wave(k + SINE_LOOKBACK));
    WindowedDataset {
        sequences,
        labels,
        lookback: SINE_LOOKBACK,
        end_rows: (0..n).collect(),
        label_dates: Vec::new(),
        feature_mode: None,
        scaler: ScalerParams::identity(&["wave", "target"]),
    }
}

/// Consecutive weekdays starting on Monday 2021-01-04.
pub fn trading_days(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Price effect per percentage point of (positive − negative) sentiment.
pub const SENTIMENT_COUPLING: f64 = 0.15;

/// A market where the next day's close is a mean-reverting base level plus
/// `SENTIMENT_COUPLING * (pos − neg)` of the current day, plus noise.
/// Sentiment is drawn independently each day, so price history alone cannot
/// anticipate it.
pub fn sentiment_coupled_market(seed: u64, days: usize) -> (BarSeries, Vec<DailySentiment>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates = trading_days(days);
    let mut sentiment = Vec::with_capacity(days);
    for &date in &dates {
        let pos: f64 = rng.gen_range(0.0..50.0);
        let neg: f64 = rng.gen_range(0.0..50.0);
        let count = rng.gen_range(5..40);
        sentiment.push(DailySentiment {
            date,
            pos_pct: pos,
            neg_pct: neg,
            neu_pct: 100.0 - pos - neg,
            tweet_count: count,
        });
    }
    let mut bars = Vec::with_capacity(days);
    let mut base = 100.0;
    let mut close: f64 = 100.0;
    for (t, &date) in dates.iter().enumerate() {
        let open = if t == 0 { 100.0 } else { close + 0.3 * gaussian(&mut rng) };
        if t > 0 {
            base = 100.0 + 0.9 * (base - 100.0) + 0.8 * gaussian(&mut rng);
            let s = &sentiment[t - 1];
            close = base + SENTIMENT_COUPLING * (s.pos_pct - s.neg_pct) + 0.4 * gaussian(&mut rng);
        }
        let high = open.max(close) + rng.gen_range(0.0..1.0);
        let low = open.min(close) - rng.gen_range(0.0..1.0);
        bars.push(OhlcvBar {
            date,
            open: Some(open),
            high: Some(high),
            low: Some(low),
            close: Some(close),
            adj_close: Some(close),
            volume: Some(rng.gen_range(1e5..1e6f64).round()),
        });
    }
    (BarSeries::new("SYN", bars).unwrap(), sentiment)
}

/// Lexicon TSV used by the tweet fixtures.
pub const FIXTURE_LEXICON: &str = "term\tpolarity\tintensity\tflag
good\t0.7\t1.0\tterm
great\t0.8\t1.0\tterm
bad\t-0.7\t1.0\tterm
awful\t-0.9\t1.0\tterm
very\t0\t1.3\tterm
not\t0\t1.0\tnegator
";

/// Renders the market as CSV in the canonical schema plus a JSONL tweet
/// corpus whose per-day class mix reproduces the sentiment percentages
/// (to the nearest tweet). Includes weekend tweets and one malformed line.
pub fn market_files(seed: u64, days: usize) -> (String, String) {
    let (series, sentiment) = sentiment_coupled_market(seed, days);
    let mut csv = Vec::new();
    hisa_core::market_data::write_ohlcv_csv(&series, &mut csv).unwrap();
    let mut jsonl = String::new();
    let mut id = 0;
    for day in &sentiment {
        let n = 20usize;
        let pos = (day.pos_pct / 100.0 * n as f64).round() as usize;
        let neg = (day.neg_pct / 100.0 * n as f64).round() as usize;
        for k in 0..n {
            let text = if k < pos {
                "Acme looks very good today #AcmeCorp"
            } else if k < pos + neg {
                "awful session, not great @trader http://t.co/x"
            } else {
                "market opens at nine"
            };
            id += 1;
            writeln!(
                jsonl,
                r#"{{"timestamp":"{}T{:02}:15:00+05:30","text":"{}","id":"{}"}}"#,
                day.date,
                9 + k % 6,
                text,
                id
            )
            .unwrap();
        }
    }
    jsonl.push_str("{not json\n");
    jsonl.push_str(r#"{"timestamp":"2021-01-09T10:00:00+05:30","text":"weekend good news","id":"w1"}"#);
    jsonl.push('\n');
    (String::from_utf8(csv).unwrap(), jsonl)
}
