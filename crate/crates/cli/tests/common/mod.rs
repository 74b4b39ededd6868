// Shared by the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

#[path = "../../../core/tests/support/mod.rs"]
pub mod support;

pub struct Workdir {
    pub dir: tempfile::TempDir,
}

impl Workdir {
    /// Writes bars, tweets, lexicon and a small, fast `run.toml`.
    pub fn new(seed: u64, days: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let (csv, jsonl) = support::fixtures::market_files(seed, days);
        std::fs::write(dir.path().join("bars.csv"), csv).unwrap();
        std::fs::write(dir.path().join("tweets.jsonl"), jsonl).unwrap();
        std::fs::write(dir.path().join("lexicon.tsv"), support::fixtures::FIXTURE_LEXICON).unwrap();
        std::fs::write(
            dir.path().join("run.toml"),
            format!(
                r#"symbol = "SYN"
epoch_sizes = [5, 10, 15]
epochs = 5

[paths]
historical = "bars.csv"
tweets = "tweets.jsonl"
lexicon = "lexicon.tsv"
output_dir = "out"

[experiment]
lookback = 10
hidden_size = 16
learning_rate = 0.01
batch_size = 8
seed = {seed}
"#
            ),
        )
        .unwrap();
        Workdir { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn read(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    pub fn write(&self, rel: &str, contents: &str) {
        std::fs::write(self.path(rel), contents).unwrap();
    }

    pub fn hisa(&self, args: &[&str]) -> Output {
        hisa(self.dir.path(), &[&["--config", "run.toml"], args].concat())
    }
}

pub fn hisa(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hisa"))
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
pub fn assert_exit(o: &Output, code: i32) {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(o),
        stderr(o)
    );
}
