//! Run configuration: a flat TOML file, then `KDVFLEX_*` environment
//! variables, then command-line flags, each layer overriding the previous.
//!
//! Every key of [`RunConfig`] can appear in the file. An environment variable
//! `KDVFLEX_LAMBDA_MAX=64` sets `lambda_max = 64`; its value is read as a TOML
//! value and falls back to a bare string. Unknown keys are rejected in both
//! layers.

use kdv_flex::scheme::SchemeParams;
use kdv_flex::verify::{BesovPair, CertParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ENV_PREFIX: &str = "KDVFLEX_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {source}")]
    Toml { origin: String, source: toml::de::Error },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("bad range {0:?}: expected `a..b` or a comma-separated list")]
    Range(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub q_max: usize,
    pub s: u32,
    pub c0: u32,
    pub sigma_num: i64,
    pub sigma_den: i64,
    pub sigma_exponent: u32,
    pub decay_factor: f64,
    pub lambda_min: u64,
    pub lambda_max: u64,
    pub amplitude: f64,
    pub base_freq: i64,
    pub base_constant: f64,
    pub amp_tail_tol: f64,
    pub residual_tol: f64,
    pub mean_tol: f64,
    /// `[[alpha, p], ...]` for item 3.
    pub item3_pairs: Vec<[f64; 2]>,
    pub item3_constant: f64,
    pub c_lower: f64,
    pub c1: f64,
    pub c2: f64,
    pub kappa: f64,
    /// λ grid of the scaling sweep.
    pub lambdas: Vec<i64>,
    /// ε of the scaling sweep.
    pub epsilon: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub test_freqs: Vec<i64>,
    /// Weak residuals pass when |LHS − RHS| < weak_tol · scale.
    pub weak_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SchemeParams::default();
        let c = p.cert;
        RunConfig {
            q_max: 2,
            s: p.s,
            c0: p.c0,
            sigma_num: p.sigma_num,
            sigma_den: p.sigma_den,
            sigma_exponent: p.sigma_exponent,
            decay_factor: p.decay_factor,
            lambda_min: p.lambda_min,
            lambda_max: p.lambda_max,
            amplitude: p.amplitude,
            base_freq: p.base_freq,
            base_constant: p.base_constant,
            amp_tail_tol: p.amp_tail_tol,
            residual_tol: c.residual_tol,
            mean_tol: c.mean_tol,
            item3_pairs: c.item3_pairs.iter().map(|b| [b.alpha, b.p]).collect(),
            item3_constant: c.item3_constant,
            c_lower: c.c_lower,
            c1: c.c1,
            c2: c.c2,
            kappa: c.kappa,
            lambdas: (7..=12).map(|m| 1 << m).collect(),
            epsilon: 0.5,
            seed: 7,
            out: PathBuf::from("out"),
            test_freqs: (1..=8).collect(),
            weak_tol: 1e-9,
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid by `file` (if any) and then by `env` pairs whose key
    /// starts with [`ENV_PREFIX`].
    pub fn load<I>(file: Option<&Path>, env: I) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|source| ConfigError::Toml { origin: path.display().to_string(), source })?
            }
            None => toml::Table::new(),
        };
        for (key, raw) in env {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            table.insert(name.to_ascii_lowercase(), env_value(&raw));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|source| ConfigError::Toml { origin: "configuration".into(), source })?;
        cfg.params()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<SchemeParams, ConfigError> {
        let p = SchemeParams {
            s: self.s,
            c0: self.c0,
            sigma_num: self.sigma_num,
            sigma_den: self.sigma_den,
            sigma_exponent: self.sigma_exponent,
            decay_factor: self.decay_factor,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            amplitude: self.amplitude,
            base_freq: self.base_freq,
            base_constant: self.base_constant,
            amp_tail_tol: self.amp_tail_tol,
            cert: CertParams {
                residual_tol: self.residual_tol,
                mean_tol: self.mean_tol,
                item3_pairs: self.item3_pairs.iter().map(|&[alpha, p]| BesovPair { alpha, p }).collect(),
                item3_constant: self.item3_constant,
                c_lower: self.c_lower,
                c1: self.c1,
                c2: self.c2,
                kappa: self.kappa,
            },
        };
        p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(p)
    }
}

fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// `a..b` as the doubling sequence a, 2a, ..., b; or a comma-separated list.
pub fn parse_dyadic_range(text: &str) -> Result<Vec<i64>, ConfigError> {
    let bad = || ConfigError::Range(text.to_string());
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a < 1 || b < a {
            return Err(bad());
        }
        return Ok(std::iter::successors(Some(a), |x| x.checked_mul(2)).take_while(|x| *x <= b).collect());
    }
    parse_list(text)
}

/// `a..b` as the integers a..=b; or a comma-separated list.
pub fn parse_int_range(text: &str) -> Result<Vec<i64>, ConfigError> {
    let bad = || ConfigError::Range(text.to_string());
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    parse_list(text)
}

fn parse_list(text: &str) -> Result<Vec<i64>, ConfigError> {
    text.split(',').map(|t| t.trim().parse().map_err(|_| ConfigError::Range(text.to_string()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_match_library() {
        let cfg = RunConfig::load(None, env(&[])).unwrap();
        assert_eq!(cfg.params().unwrap(), SchemeParams::default());
    }

    #[test]
    fn file_then_env_layering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "lambda_max = 128\namplitude = 0.02\nitem3_pairs = [[-0.5, 2.0]]\n").unwrap();
        let cfg = RunConfig::load(Some(&path), env(&[("KDVFLEX_LAMBDA_MAX", "64"), ("PATH", "/bin")])).unwrap();
        assert_eq!((cfg.lambda_max, cfg.amplitude), (64, 0.02));
        assert_eq!(cfg.item3_pairs, vec![[-0.5, 2.0]]);
        let cfg = RunConfig::load(None, env(&[("KDVFLEX_OUT", "some/dir")])).unwrap();
        assert_eq!(cfg.out, PathBuf::from("some/dir"));
    }

    #[test]
    fn unknown_and_invalid_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "lamda_max = 128\n").unwrap();
        assert!(matches!(RunConfig::load(Some(&path), env(&[])), Err(ConfigError::Toml { .. })));
        assert!(matches!(RunConfig::load(None, env(&[("KDVFLEX_BOGUS", "1")])), Err(ConfigError::Toml { .. })));
        assert!(matches!(RunConfig::load(None, env(&[("KDVFLEX_SIGMA_DEN", "0")])), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_dyadic_range("128..4096").unwrap(), vec![128, 256, 512, 1024, 2048, 4096]);
        assert_eq!(parse_dyadic_range("64, 256").unwrap(), vec![64, 256]);
        assert_eq!(parse_int_range("1..8").unwrap(), (1..=8).collect::<Vec<_>>());
        assert!(parse_dyadic_range("0..8").is_err());
        assert!(parse_int_range("3..x").is_err());
    }
}
