// Shared by several test targets; not every target uses every helper.
#![allow(dead_code, clippy::needless_range_loop, clippy::manual_clamp)]

pub mod fixtures;
pub mod lstm_oracle;
pub mod sentiment_oracle;
