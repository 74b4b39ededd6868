//! Lexicon-based polarity scoring of tweet text and per-day aggregation of
//! positive/negative/neutral class percentages.
//!
//! Scoring rule: tokens are scanned left to right. A negator arms a flag for
//! the next matched term. An entry with intensity other than 1 scores
//! nothing itself and multiplies the next matched term by its intensity
//! (intensifiers compound). Every other lexicon hit emits a clause score
//! `clip(polarity * multiplier)`, negated and halved if the negation flag
//! is armed; both modifiers reset after each clause. Unknown tokens leave
//! pending modifiers untouched. Text polarity is the mean of the clause
//! scores clipped to [-1, 1], or 0 when nothing matched.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("line {line}: duplicate lexicon term `{term}`")]
    DuplicateTerm { line: usize, term: String },
    #[error("line {line}: polarity {polarity} outside [-1, 1]")]
    PolarityOutOfRange { line: usize, polarity: f64 },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("daily sentiment csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SentimentError>;

/// Multiplicative damping applied to a negated clause.
pub const NEGATION_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub term: String,
    pub polarity: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, LexiconEntry>,
    negators: HashSet<String>,
}

impl Lexicon {
    /// Builds a lexicon from already-validated parts. Panics on the same
    /// conditions [`load_lexicon`] reports as errors.
    pub fn new(entries: Vec<LexiconEntry>, negators: Vec<String>) -> Self {
        let mut lex = Lexicon::default();
        for e in entries {
            assert!((-1.0..=1.0).contains(&e.polarity), "polarity out of range");
            assert!(e.intensity > 0.0, "intensity must be positive");
            assert!(
                lex.entries.insert(e.term.clone(), e).is_none(),
                "duplicate term"
            );
        }
        for n in negators {
            assert!(!lex.entries.contains_key(&n), "negator shadows a term");
            lex.negators.insert(n);
        }
        lex
    }

    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.get(term)
    }

    pub fn is_negator(&self, term: &str) -> bool {
        self.negators.contains(term)
    }

    pub fn term_count(&self) -> usize {
        self.entries.len()
    }

    pub fn negator_count(&self) -> usize {
        self.negators.len()
    }
}

/// Loads a tab-separated lexicon with columns `term polarity intensity flag`
/// and an optional fifth `subjectivity` column, which is accepted but not
/// used. `flag` is `term` or `negator`. Blank lines, `#` comments and a
/// leading `term` header row are skipped.
pub fn load_lexicon<R: Read>(input: R) -> Result<Lexicon> {
    let mut lex = Lexicon::default();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if idx == 0 && cols[0].eq_ignore_ascii_case("term") {
            continue;
        }
        let malformed = |reason: &str| SentimentError::MalformedRow {
            line: lineno,
            reason: reason.to_string(),
        };
        if !(4..=5).contains(&cols.len()) {
            return Err(malformed("expected 4 or 5 tab-separated columns"));
        }
        let term = cols[0].to_lowercase();
        if term.is_empty() || term.chars().any(char::is_whitespace) {
            return Err(malformed("term must be a single non-empty token"));
        }
        let polarity: f64 = cols[1].parse().map_err(|_| malformed("polarity is not a number"))?;
        if !(-1.0..=1.0).contains(&polarity) {
            return Err(SentimentError::PolarityOutOfRange {
                line: lineno,
                polarity,
            });
        }
        let intensity: f64 = cols[2].parse().map_err(|_| malformed("intensity is not a number"))?;
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(malformed("intensity must be a positive finite number"));
        }
        if let Some(subj) = cols.get(4) {
            subj.parse::<f64>()
                .map_err(|_| malformed("subjectivity is not a number"))?;
        }
        if lex.entries.contains_key(&term) || lex.negators.contains(&term) {
            return Err(SentimentError::DuplicateTerm { line: lineno, term });
        }
        match cols[3] {
            "term" => {
                lex.entries.insert(
                    term.clone(),
                    LexiconEntry {
                        term,
                        polarity,
                        intensity,
                    },
                );
            }
            "negator" => {
                lex.negators.insert(term);
            }
            _ => return Err(malformed("flag must be `term` or `negator`")),
        }
    }
    Ok(lex)
}

/// Lowercased alphanumeric tokens. URLs and @-mentions are removed whole;
/// hashtags keep their body.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
        {
            continue;
        }
        if lower.starts_with('@') {
            continue;
        }
        let body = lower.trim_start_matches('#');
        tokens.extend(
            body.split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .map(str::to_string),
        );
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentScore {
    pub polarity: f64,
    pub label: SentimentLabel,
}

impl SentimentScore {
    pub fn from_polarity(polarity: f64) -> Self {
        let polarity = polarity.clamp(-1.0, 1.0);
        let label = if polarity > 0.0 {
            SentimentLabel::Positive
        } else if polarity < 0.0 {
            SentimentLabel::Negative
        } else {
            SentimentLabel::Neutral
        };
        // collapse -0.0
        let polarity = if polarity == 0.0 { 0.0 } else { polarity };
        SentimentScore { polarity, label }
    }
}

pub fn score_text<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> SentimentScore {
    let mut negate = false;
    let mut multiplier = 1.0_f64;
    let mut sum = 0.0_f64;
    let mut clauses = 0usize;
    for token in tokens {
        let token = token.as_ref();
        if lexicon.is_negator(token) {
            negate = true;
            continue;
        }
        let Some(entry) = lexicon.get(token) else {
            continue;
        };
        if entry.intensity != 1.0 {
            multiplier *= entry.intensity;
            continue;
        }
        let mut clause = (entry.polarity * multiplier).clamp(-1.0, 1.0);
        if negate {
            clause = -clause * NEGATION_SCALE;
        }
        sum += clause;
        clauses += 1;
        negate = false;
        multiplier = 1.0;
    }
    if clauses == 0 {
        return SentimentScore::from_polarity(0.0);
    }
    SentimentScore::from_polarity(sum / clauses as f64)
}

/// Class percentages of one trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub date: NaiveDate,
    pub pos_pct: f64,
    pub neg_pct: f64,
    pub neu_pct: f64,
    pub tweet_count: u64,
}

impl DailySentiment {
    /// A day without tweets counts as fully neutral.
    pub fn empty(date: NaiveDate) -> Self {
        DailySentiment {
            date,
            pos_pct: 0.0,
            neg_pct: 0.0,
            neu_pct: 100.0,
            tweet_count: 0,
        }
    }
}

pub fn aggregate_daily(scored: &BTreeMap<NaiveDate, Vec<SentimentScore>>) -> Vec<DailySentiment> {
    scored
        .iter()
        .map(|(&date, scores)| {
            if scores.is_empty() {
                return DailySentiment::empty(date);
            }
            let count = |label| scores.iter().filter(|s| s.label == label).count();
            let n = scores.len() as f64;
            DailySentiment {
                date,
                pos_pct: 100.0 * count(SentimentLabel::Positive) as f64 / n,
                neg_pct: 100.0 * count(SentimentLabel::Negative) as f64 / n,
                neu_pct: 100.0 * count(SentimentLabel::Neutral) as f64 / n,
                tweet_count: scores.len() as u64,
            }
        })
        .collect()
}

/// Tokenizes and scores every tweet in each bucket.
pub fn score_buckets(
    buckets: &BTreeMap<NaiveDate, Vec<crate::market_data::Tweet>>,
    lexicon: &Lexicon,
) -> BTreeMap<NaiveDate, Vec<SentimentScore>> {
    buckets
        .iter()
        .map(|(&date, tweets)| {
            let scores = tweets
                .iter()
                .map(|t| score_text(&tokenize(&t.text), lexicon))
                .collect();
            (date, scores)
        })
        .collect()
}

pub fn write_daily_csv<W: Write>(days: &[DailySentiment], output: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    for day in days {
        w.serialize(day)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_daily_csv<R: Read>(input: R) -> Result<Vec<DailySentiment>> {
    let mut r = csv::Reader::from_reader(input);
    let days = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(days)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Lexicon {
        let tsv = "term\tpolarity\tintensity\tflag
good\t0.7\t1.0\tterm
bad\t-0.7\t1.0\tterm
very\t0\t1.3\tterm
not\t0\t1.0\tnegator
";
        load_lexicon(tsv.as_bytes()).unwrap()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Great results!"), ["great", "results"]);
        assert_eq!(tokenize("#AcmeCorp up @user http://x.co"), ["acmecorp", "up"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("ÉTÉ déjà-vu"), ["été", "déjà", "vu"]);
    }

    #[test]
    fn single_negated_and_intensified_terms() {
        let lex = lexicon();
        let s = score_text(&["good"], &lex);
        assert_eq!(s.polarity, 0.7);
        assert_eq!(s.label, SentimentLabel::Positive);

        let s = score_text(&["not", "good"], &lex);
        assert_eq!(s.polarity, -0.35);
        assert_eq!(s.label, SentimentLabel::Negative);

        let s = score_text(&["very", "good"], &lex);
        assert!((s.polarity - 0.91).abs() < 1e-12);
        assert_eq!(s.polarity, 0.7 * 1.3);
        assert_eq!(s.label, SentimentLabel::Positive);
    }

    #[test]
    fn modifiers_and_clipping() {
        let lex = Lexicon::new(
            vec![
                LexiconEntry { term: "great".into(), polarity: 0.9, intensity: 1.0 },
                LexiconEntry { term: "extremely".into(), polarity: 0.0, intensity: 2.0 },
            ],
            vec!["never".into()],
        );
        // clipped to 1 before negation
        assert_eq!(score_text(&["never", "extremely", "great"], &lex).polarity, -0.5);
        // unmatched tokens carry modifiers across
        assert_eq!(score_text(&["never", "ever", "great"], &lex).polarity, -0.45);
        // dangling modifiers score nothing
        let s = score_text(&["great", "never"], &lex);
        assert_eq!(s.polarity, 0.9);
        let s = score_text(&["extremely", "never"], &lex);
        assert_eq!(s.label, SentimentLabel::Neutral);
        assert_eq!(score_text::<&str>(&[], &lex).polarity, 0.0);
    }

    #[test]
    fn opposing_clauses_cancel_to_neutral() {
        let lex = lexicon();
        let s = score_text(&["good", "bad"], &lex);
        assert_eq!(s.polarity, 0.0);
        assert_eq!(s.label, SentimentLabel::Neutral);
        assert!(s.polarity.is_sign_positive());
    }

    #[test]
    fn lexicon_loading() {
        let lex = lexicon();
        assert_eq!(lex.term_count(), 3);
        assert_eq!(lex.negator_count(), 1);

        let two = "good\t0.7\t1.0\tterm\nnot\t0\t1.0\tnegator\n";
        let lex = load_lexicon(two.as_bytes()).unwrap();
        assert_eq!((lex.term_count(), lex.negator_count()), (1, 1));

        let bad = "bad\t-1.5\t1.0\tterm\n";
        assert!(matches!(
            load_lexicon(bad.as_bytes()),
            Err(SentimentError::PolarityOutOfRange { line: 1, .. })
        ));

        let dup = "good\t0.7\t1.0\tterm\nGood\t0.5\t1.0\tterm\n";
        assert!(matches!(
            load_lexicon(dup.as_bytes()),
            Err(SentimentError::DuplicateTerm { line: 2, .. })
        ));

        for row in ["good 0.7 1.0 term\n", "good\tx\t1\tterm\n", "good\t0.1\t0\tterm\n", "good\t0.1\t1\tadverb\n"] {
            assert!(
                matches!(load_lexicon(row.as_bytes()), Err(SentimentError::MalformedRow { .. })),
                "{row:?}"
            );
        }

        let with_subjectivity = "good\t0.7\t1.0\tterm\t0.6\n";
        assert_eq!(load_lexicon(with_subjectivity.as_bytes()).unwrap().term_count(), 1);
    }

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn daily_aggregation() {
        let mut m = BTreeMap::new();
        m.insert(
            d("2020-01-02"),
            [0.5, -0.2, 0.0].map(SentimentScore::from_polarity).to_vec(),
        );
        m.insert(d("2020-01-03"), vec![SentimentScore::from_polarity(0.1); 4]);
        m.insert(d("2020-01-01"), vec![]);
        let days = aggregate_daily(&m);
        assert_eq!(days.len(), 3);
        assert_eq!(days[0], DailySentiment::empty(d("2020-01-01")));
        let third = 100.0 / 3.0;
        assert_eq!((days[1].pos_pct, days[1].neg_pct, days[1].neu_pct), (third, third, third));
        assert_eq!(days[1].tweet_count, 3);
        assert_eq!((days[2].pos_pct, days[2].neg_pct, days[2].neu_pct), (100.0, 0.0, 0.0));
        assert_eq!(days[2].tweet_count, 4);
    }

    #[test]
    fn daily_csv_round_trip() {
        let days = vec![
            DailySentiment::empty(d("2020-01-01")),
            DailySentiment { date: d("2020-01-02"), pos_pct: 100.0 / 3.0, neg_pct: 200.0 / 3.0, neu_pct: 0.0, tweet_count: 3 },
        ];
        let mut buf = Vec::new();
        write_daily_csv(&days, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,pos_pct,neg_pct,neu_pct,tweet_count\n"));
        assert_eq!(read_daily_csv(buf.as_slice()).unwrap(), days);
    }
}
