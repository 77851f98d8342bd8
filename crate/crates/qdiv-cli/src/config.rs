use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qdiv::splitting::SolverConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "QDIV_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Overrides keyed `suite` or `suite.check`.
    pub tolerances: BTreeMap<String, f64>,
    pub solver: SolverConfig,
    /// Worker threads; the rayon default when absent.
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("{}: {}: {}", path.display(), e.path(), e.inner()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (k, &v) in &self.tolerances {
            if !(v >= f64::EPSILON) {
                bail!("tolerances.{k}: {v} is below machine epsilon");
            }
        }
        if self.threads == Some(0) {
            bail!("threads: must be at least 1");
        }
        Ok(())
    }

    /// Most specific override for `check` in `suite`, else `default`.
    pub fn tolerance(&self, suite: &str, check: &str, default: f64) -> f64 {
        self.tolerances
            .get(&format!("{suite}.{check}"))
            .or_else(|| self.tolerances.get(suite))
            .copied()
            .unwrap_or(default)
    }

    pub fn output_path(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_configs_fill_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "tolerances": {"dpi": 1e-6}, "solver": {"max_iterations": 10}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.solver.max_iterations, 10);
        assert_eq!(c.solver.relaxation, SolverConfig::default().relaxation);
        assert_eq!(c.tolerance("dpi", "relative_entropy", 1e-7), 1e-6);
        assert_eq!(c.tolerance("eat", "bound", 1e-7), 1e-7);
    }

    #[test]
    fn tiny_tolerances_are_rejected() {
        let c: RunConfig = serde_json::from_str(r#"{"tolerances": {"dpi": 1e-20}}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
