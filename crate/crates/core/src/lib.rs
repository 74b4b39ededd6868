//! Stock price forecasting from fused historical prices and tweet
//! sentiment.
//!
//! The crate follows the data through five stages: [`market_data`] parses
//! OHLCV bars and tweets, [`sentiment`] scores tweets against a lexicon and
//! reduces them to daily class percentages, [`features`] imputes, fuses,
//! scales and windows the inputs, [`lstm`] trains a single-layer LSTM
//! regressor, and [`evaluation`] compares the sentiment-fused model against
//! a price-only baseline.

pub mod evaluation;
pub mod features;
pub mod lstm;
pub mod market_data;
pub mod pipeline;
pub mod sentiment;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    MarketData(#[from] market_data::MarketDataError),
    #[error(transparent)]
    Sentiment(#[from] sentiment::SentimentError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Lstm(#[from] lstm::LstmError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
}

impl Error {
    /// True for failures of the numerics (divergence, non-finite values)
    /// rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Lstm(lstm::LstmError::NonFiniteLoss { .. })
                | Error::Lstm(lstm::LstmError::NonFiniteActivation { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
