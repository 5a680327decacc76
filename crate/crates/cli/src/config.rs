//! Flat `key = value` configuration with the standard defaults: 45°x45°
//! cells with 50% overlap, thresholds {45, 25, 10}, K = 3, loss weights
//! {5, 1, 5, 3}, score threshold 0.5.

use std::path::Path;

use adyolo_core::geometry::GridSpec;
use adyolo_core::loss::LossWeights;
use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub cell_width_deg: f64,
    pub cell_height_deg: f64,
    pub overlap_fraction: f64,
    /// Prediction slots per grid cell (K).
    pub preds_per_cell: usize,
    /// Number of event classes (C).
    pub num_classes: usize,
    /// Responsibility thresholds in degrees.
    pub thresholds_deg: Vec<f64>,
    pub w_doa: f64,
    pub w_pos: f64,
    pub w_neg: f64,
    pub w_class: f64,
    /// Unify threshold for decoding.
    pub upsilon_deg: f64,
    pub score_threshold: f64,
    /// Label frames per second; fixes the one-second metric segments.
    pub labels_per_second: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cell_width_deg: 45.0,
            cell_height_deg: 45.0,
            overlap_fraction: 0.5,
            preds_per_cell: 3,
            num_classes: 5,
            thresholds_deg: vec![45.0, 25.0, 10.0],
            w_doa: 5.0,
            w_pos: 1.0,
            w_neg: 5.0,
            w_class: 3.0,
            upsilon_deg: 15.0,
            score_threshold: 0.5,
            labels_per_second: 10,
            seed: 0,
        }
    }
}

impl Config {
    /// Reads a config file on top of the defaults. Lines are `key = value`;
    /// `#` starts a comment; unknown keys are rejected with their line
    /// number.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config = Self::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value", path.display(), idx + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            config
                .apply(key, value)
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn float(value: &str) -> Result<f64> {
            value
                .parse()
                .with_context(|| format!("invalid number `{value}`"))
        }
        fn int(value: &str) -> Result<usize> {
            value
                .parse()
                .with_context(|| format!("invalid integer `{value}`"))
        }
        match key {
            "cell_width" => self.cell_width_deg = float(value)?,
            "cell_height" => self.cell_height_deg = float(value)?,
            "overlap" => self.overlap_fraction = float(value)?,
            "k" => self.preds_per_cell = int(value)?,
            "classes" => self.num_classes = int(value)?,
            "thresholds" => {
                self.thresholds_deg = value
                    .split(',')
                    .map(|t| float(t.trim()))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "w_doa" => self.w_doa = float(value)?,
            "w_pos" => self.w_pos = float(value)?,
            "w_neg" => self.w_neg = float(value)?,
            "w_class" => self.w_class = float(value)?,
            "upsilon" => self.upsilon_deg = float(value)?,
            "score_threshold" => self.score_threshold = float(value)?,
            "labels_per_second" => self.labels_per_second = int(value)?,
            "seed" => self.seed = value.parse().context("invalid seed")?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.cell_width_deg, self.cell_height_deg, self.overlap_fraction)
            .map_err(|e| anyhow::anyhow!("invalid grid configuration: {e}"))
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            doa: self.w_doa,
            pos: self.w_pos,
            neg: self.w_neg,
            class: self.w_class,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_the_standard_setup() {
        let config = Config::default();
        assert_eq!(config.grid().unwrap().num_cells(), 32);
        assert_eq!(config.thresholds_deg, vec![45.0, 25.0, 10.0]);
        assert_eq!(config.preds_per_cell, 3);
        let w = config.weights();
        assert_eq!((w.doa, w.pos, w.neg, w.class), (5.0, 1.0, 5.0, 3.0));
        assert_eq!(config.score_threshold, 0.5);
    }

    #[test]
    fn file_overrides_and_unknown_keys() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nupsilon = 30\nthresholds = 40, 20\nk=2").unwrap();
        file.flush().unwrap();
        let config = Config::from_file(file.path()).unwrap();
        assert_eq!(config.upsilon_deg, 30.0);
        assert_eq!(config.thresholds_deg, vec![40.0, 20.0]);
        assert_eq!(config.preds_per_cell, 2);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "nonsense = 1").unwrap();
        bad.flush().unwrap();
        let err = format!("{:#}", Config::from_file(bad.path()).unwrap_err());
        assert!(err.contains(":1"), "{err}");
        assert!(err.contains("nonsense"), "{err}");
    }
}
