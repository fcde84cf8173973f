//! Run configuration: defaults, the `WDIOPH_PRECISION` environment variable,
//! a `key = value` file, then command-line flags, in increasing priority.

use std::path::PathBuf;

use serde::Serialize;

use crate::approx::EstimatorConfig;
use crate::dynamics::FlowConfig;
use crate::error::{Error, Result};
use crate::target::DEFAULT_PRECISION;

pub const PRECISION_ENV: &str = "WDIOPH_PRECISION";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    JsonDoc,
    CsvColumnar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Inline(String),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub precision_bits: u32,
    pub q_max: u64,
    pub t_max: f64,
    pub t_step: f64,
    /// tail window fraction; unset keeps 1/2 for exponent windows and 1/4 for rate traces
    pub tail_fraction: Option<f64>,
    pub weights: Option<WeightSource>,
    pub seed: u64,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision_bits: DEFAULT_PRECISION,
            q_max: 100_000,
            t_max: 12.0,
            t_step: 0.25,
            tail_fraction: None,
            weights: None,
            seed: 0,
            format: OutputFormat::JsonDoc,
        }
    }
}

fn bad(line: usize, column: usize, key: &str, v: &str) -> Error {
    Error::parse(line, column, format!("invalid value {v:?} for {key}"))
}

impl RunConfig {
    /// Defaults with the environment precision applied.
    pub fn from_env() -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Ok(v) = std::env::var(PRECISION_ENV) {
            cfg.precision_bits = v
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("{PRECISION_ENV}={v:?} is not a bit count")))?;
        }
        Ok(cfg)
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            if body.trim().is_empty() {
                continue;
            }
            let Some(eq) = body.find('=') else {
                let col = body.len() - body.trim_start().len() + 1;
                return Err(Error::parse(line, col, "expected key = value"));
            };
            let key = body[..eq].trim();
            let val = body[eq + 1..].trim();
            let vcol = eq + 2 + (body[eq + 1..].len() - body[eq + 1..].trim_start().len());
            match key {
                "precision_bits" => self.precision_bits = val.parse().map_err(|_| bad(line, vcol, key, val))?,
                "q_max" => self.q_max = val.parse().map_err(|_| bad(line, vcol, key, val))?,
                "t_max" => self.t_max = val.parse().map_err(|_| bad(line, vcol, key, val))?,
                "t_step" => self.t_step = val.parse().map_err(|_| bad(line, vcol, key, val))?,
                "tail_fraction" => {
                    self.tail_fraction = Some(val.parse().map_err(|_| bad(line, vcol, key, val))?)
                }
                "weights" => self.weights = Some(WeightSource::Inline(val.to_string())),
                "weights_file" => self.weights = Some(WeightSource::File(PathBuf::from(val))),
                "seed" => self.seed = val.parse().map_err(|_| bad(line, vcol, key, val))?,
                "format" => {
                    self.format = match val {
                        "json-doc" | "json" => OutputFormat::JsonDoc,
                        "csv-columnar" | "csv" => OutputFormat::CsvColumnar,
                        _ => return Err(bad(line, vcol, key, val)),
                    }
                }
                _ => {
                    let col = body.len() - body.trim_start().len() + 1;
                    return Err(Error::parse(line, col, format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(64..=1 << 16).contains(&self.precision_bits) {
            return Err(Error::Domain(format!(
                "precision {} bits outside [64, 65536]",
                self.precision_bits
            )));
        }
        if self.q_max == 0 {
            return Err(Error::Domain("Q_max must be positive".into()));
        }
        if let Some(f) = self.tail_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Domain(format!("tail fraction {f} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn estimator(&self) -> EstimatorConfig {
        let mut c = EstimatorConfig::default();
        if let Some(f) = self.tail_fraction {
            c.window_fraction = f;
        }
        c
    }

    pub fn flow(&self) -> FlowConfig {
        let mut c = FlowConfig {
            t_step: self.t_step,
            ..FlowConfig::default()
        };
        if let Some(f) = self.tail_fraction {
            c.tail_fraction = f;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_file("# run\nq_max = 1000\nt_max=8.5\nformat = csv\nweights = grid(1/4)\n").unwrap();
        assert_eq!(c.q_max, 1000);
        assert_eq!(c.t_max, 8.5);
        assert_eq!(c.format, OutputFormat::CsvColumnar);
        assert_eq!(c.weights, Some(WeightSource::Inline("grid(1/4)".into())));
    }

    #[test]
    fn file_errors_have_positions() {
        let mut c = RunConfig::default();
        match c.apply_file("q_max = 10\n  t_max = soon\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 11)),
            other => panic!("{other:?}"),
        }
        match c.apply_file("colour = red\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 1)),
            other => panic!("{other:?}"),
        }
    }
}
