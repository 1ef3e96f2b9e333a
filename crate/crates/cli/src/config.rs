//! Scenario files: a flat TOML key tree mirroring [`Scenario`], plus the
//! replication count, master seed and a name used for output files.

use std::path::Path;

use meanresp::diagnostics::{CenterKind, PosteriorKind, PriorConfig, Scenario};
use meanresp::dgp::TruthSpec;
use meanresp::pilot::PilotSpec;
use meanresp::sampler::{DpConfig, SamplerConfig};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Output files are named after this.
    pub name: String,
    pub reps: usize,
    pub master_seed: u64,
    pub n: usize,
    pub pilot_reuse: bool,
    pub ci_level: f64,
    pub center: CenterKind,
    pub posterior: PosteriorKind,
    pub truth: TruthSpec,
    pub prior: PriorConfig,
    pub pilot: PilotSpec,
    pub dp: DpConfig,
    pub sampler: SamplerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_scenario("smooth-default", &Scenario::smooth(1000), 200, 1)
    }
}

impl ScenarioConfig {
    pub fn from_scenario(name: &str, sc: &Scenario, reps: usize, master_seed: u64) -> Self {
        Self {
            name: name.to_string(),
            reps,
            master_seed,
            n: sc.n,
            pilot_reuse: sc.pilot_reuse,
            ci_level: sc.ci_level,
            center: sc.center,
            posterior: sc.posterior,
            truth: sc.truth.clone(),
            prior: sc.prior.clone(),
            pilot: sc.pilot.clone(),
            dp: sc.dp.clone(),
            sampler: sc.sampler.clone(),
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            n: self.n,
            truth: self.truth.clone(),
            prior: self.prior.clone(),
            pilot: self.pilot.clone(),
            pilot_reuse: self.pilot_reuse,
            dp: self.dp.clone(),
            sampler: self.sampler.clone(),
            center: self.center,
            ci_level: self.ci_level,
            posterior: self.posterior,
        }
    }

    /// Field-level validation; errors carry the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(CliError::Invalid(format!(
                "name: {:?} must be non-empty and filename-safe",
                self.name
            )));
        }
        if self.reps == 0 {
            return Err(CliError::Invalid("reps: must be >= 1".into()));
        }
        self.scenario()
            .validate()
            .map_err(|e| CliError::Invalid(format!("scenario: {e}")))?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; `serialize(parse(x))` is a fixed point.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        // normalization is idempotent
        assert_eq!(text, back.to_toml().unwrap());
    }

    #[test]
    fn sparse_config_fills_defaults() {
        let text = r#"
            name = "tiny"
            reps = 3
            n = 120

            [prior]
            kind = "series"
            betabar = 1.5
        "#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.n, 120);
        assert_eq!(
            cfg.prior,
            PriorConfig::Series {
                betabar: 1.5,
                scale_exp: 0.0
            }
        );
        assert_eq!(cfg.sampler.draws, 2000, "sampler defaults apply");
        cfg.validate().unwrap();
    }

    #[test]
    fn propensity_dependent_prior_parses() {
        let text = r#"
            name = "dep"
            [prior]
            kind = "propensity-dependent"
            betabar = 2.0
            sigma_lambda = 0.7
        "#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        match cfg.prior {
            PriorConfig::PropensityDependent { sigma_lambda, .. } => {
                assert_eq!(sigma_lambda, 0.7)
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn validation_reports_field_errors() {
        let mut cfg = ScenarioConfig::default();
        cfg.reps = 0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("reps"), "{err}");
        let mut cfg = ScenarioConfig::default();
        cfg.name = "bad name with spaces".into();
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.ci_level = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            name = "x"
            repz = 3
        "#;
        assert!(ScenarioConfig::from_toml(text).is_err());
    }
}
