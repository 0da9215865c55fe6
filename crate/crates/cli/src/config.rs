//! Analysis configuration: the flag set of `identify`/`oir`, also loadable
//! from a TOML file that overrides flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Model-order request: a fixed order or an MSPE scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSpec {
    Fixed(usize),
    Auto(AutoTag),
}

/// The literal string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

impl std::str::FromStr for OrderSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(OrderSpec::Auto(AutoTag::Auto))
        } else {
            s.parse::<usize>()
                .map(OrderSpec::Fixed)
                .map_err(|_| format!("order must be a positive integer or \"auto\", got {s:?}"))
        }
    }
}

impl Default for OrderSpec {
    fn default() -> Self {
        OrderSpec::Auto(AutoTag::Auto)
    }
}

/// Parameters of the identification and OIR pipeline. Defaults mirror the
/// epoch-analysis choices: `(1-c) = 0.975`, `q = 30`, 513 grid frequencies,
/// standardization on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Model order, or `"auto"` for the MSPE scan.
    pub order: OrderSpec,
    /// Largest order tried by the MSPE scan.
    pub pmax: usize,
    /// Adaptation factor `c` (forgetting factor is `1 - c`).
    pub c: f64,
    /// Restricted-model order.
    pub q: usize,
    /// Covariance depth; `0` means `max(q, p)`.
    pub max_lag: usize,
    /// Frequency-grid points on `[0, pi]`.
    pub n_freq: usize,
    /// Multiplet orders to enumerate (e.g. `[3, 4]`).
    pub orders: Vec<usize>,
    /// Explicit multiplets (1-based channel indices), in addition to
    /// `orders`.
    pub multiplets: Vec<Vec<usize>>,
    /// Per-channel standardization before identification.
    pub standardize: bool,
    /// Seed of the coefficient initialization.
    pub seed: u64,
    /// Ridge constant; `0` means the automatic data-scaled value.
    pub delta: f64,
    /// Half-width of the uniform coefficient initialization.
    pub init_scale: f64,
    /// Sampling frequency override for inputs that do not carry one (CSV
    /// epoch directories); `0` keeps the container value.
    pub fs: f64,
    /// Stimulus-onset offset subtracted from the output time axis (s).
    pub onset_s: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            order: OrderSpec::default(),
            pmax: 20,
            c: 0.025,
            q: 30,
            max_lag: 0,
            n_freq: 513,
            orders: vec![3],
            multiplets: Vec::new(),
            standardize: true,
            seed: 0,
            delta: 0.0,
            init_scale: 1.0,
            fs: 0.0,
            onset_s: 0.0,
        }
    }
}

impl AnalysisConfig {
    /// Loads a TOML config file; its set fields override the given base
    /// (flag-derived) configuration.
    pub fn load_over(path: &Path, base: &AnalysisConfig) -> CliResult<AnalysisConfig> {
        let text = std::fs::read_to_string(path)?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        // start from the base serialized as TOML, overlay the file's keys
        let mut merged = toml::Table::try_from(base.clone())
            .map_err(|e| CliError::io(format!("config serialization failed: {e}")))?;
        for (k, v) in table {
            merged.insert(k, v);
        }
        merged
            .try_into()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Resolved covariance depth for a given model order.
    pub fn resolved_max_lag(&self, p: usize) -> usize {
        if self.max_lag == 0 {
            self.q.max(p)
        } else {
            self.max_lag
        }
    }

    /// The RLS configuration for a fixed order.
    pub fn rls_config(&self, p: usize) -> tvoir_core::RlsConfig {
        tvoir_core::RlsConfig {
            p,
            c: self.c,
            init_scale: self.init_scale,
            delta: (self.delta > 0.0).then_some(self.delta),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_epoch_analysis_choices() {
        let cfg = AnalysisConfig::default();
        assert_eq!(cfg.c, 0.025);
        assert_eq!(cfg.q, 30);
        assert_eq!(cfg.n_freq, 513);
        assert!(cfg.standardize);
    }

    #[test]
    fn file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "c = 0.1\norder = 4\norders = [3, 4]\n").unwrap();
        let base = AnalysisConfig {
            c: 0.5,
            seed: 9,
            ..AnalysisConfig::default()
        };
        let merged = AnalysisConfig::load_over(&path, &base).unwrap();
        assert_eq!(merged.c, 0.1);
        assert_eq!(merged.order, OrderSpec::Fixed(4));
        assert_eq!(merged.orders, vec![3, 4]);
        // untouched fields keep the flag values
        assert_eq!(merged.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "typo_key = 1\n").unwrap();
        assert!(AnalysisConfig::load_over(&path, &AnalysisConfig::default()).is_err());
    }

    #[test]
    fn order_spec_parses() {
        assert_eq!("auto".parse::<OrderSpec>().unwrap(), OrderSpec::default());
        assert_eq!("3".parse::<OrderSpec>().unwrap(), OrderSpec::Fixed(3));
        assert!("x".parse::<OrderSpec>().is_err());
    }
}
