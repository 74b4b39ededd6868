use std::path::{Path, PathBuf};

use hisa_core::features::FeatureMode;
use hisa_core::market_data::SchemaMap;
use hisa_core::pipeline::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub historical: Option<PathBuf>,
    pub tweets: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Precomputed daily sentiment CSV; used instead of tweets + lexicon.
    pub sentiment: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub symbol: String,
    pub feature_mode: Option<FeatureMode>,
    /// Epoch count for `train`.
    pub epochs: usize,
    /// Epoch counts for `compare`.
    pub epoch_sizes: Vec<usize>,
    pub paths: Paths,
    pub schema: SchemaMap,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            symbol: "SYMBOL".into(),
            feature_mode: None,
            epochs: 10,
            epoch_sizes: vec![5, 10, 15],
            paths: Paths::default(),
            schema: SchemaMap::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config. Relative paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.paths.all_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.experiment;
        let bad = |m: String| Err(CliError::input(format!("invalid config: {m}")));
        if e.lookback == 0 {
            return bad("lookback must be positive".into());
        }
        if !(e.split_fraction > 0.0 && e.split_fraction < 1.0) {
            return bad(format!("split_fraction {} must lie in (0, 1)", e.split_fraction));
        }
        if self.epochs == 0 || self.epoch_sizes.contains(&0) {
            return bad("epoch counts must be positive".into());
        }
        e.train_config(self.epochs)
            .validate()
            .map_err(|err| CliError::input(err.to_string()))?;
        let inputs = [
            &self.paths.historical,
            &self.paths.tweets,
            &self.paths.lexicon,
            &self.paths.sentiment,
            &self.paths.checkpoint,
        ];
        for p in inputs.into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::input(format!("{}: file not found", p.display())));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
        path.as_deref()
            .ok_or_else(|| CliError::input(format!("no {what} path given (config `paths.{what}` or --{what})")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

impl Paths {
    fn all_mut(&mut self) -> [&mut Option<PathBuf>; 6] {
        [
            &mut self.historical,
            &mut self.tweets,
            &mut self.lexicon,
            &mut self.sentiment,
            &mut self.checkpoint,
            &mut self.output_dir,
        ]
    }
}
