//! Run configuration shared by all subcommands, loaded from TOML or JSON.
//! Command-line flags override the file.

use std::path::Path;

use scenetok::codec::Scheme;
use scenetok::metrics::MetricConfig;
use scenetok::preprocess::PreprocessConfig;
use scenetok::quantize::QuantizationGrid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Kind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub resolution: u32,
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub metrics: MetricConfig,
    pub preprocess: PreprocessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: Scheme::Compact,
            resolution: 512,
            seed: 0,
            jobs: 0,
            metrics: MetricConfig::default(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let cfg: RunConfig = match ext {
            "toml" => {
                toml::from_str(&text).map_err(|e| CliError::new(Kind::Parse, e.to_string()))?
            }
            "json" => serde_json::from_str(&text)?,
            other => {
                return Err(CliError::validation(format!(
                    "config must be .toml or .json, got {other:?}"
                )))
            }
        };
        cfg.validate().map_err(|e| e.context(path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        QuantizationGrid::new(self.resolution)?;
        self.metrics.validate()?;
        self.preprocess.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> QuantizationGrid {
        QuantizationGrid::new(self.resolution).expect("validated resolution")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("run.toml");
        std::fs::write(
            &t,
            "scheme = \"block-patch\"\nresolution = 128\n[metrics]\nfscore_threshold = 0.01\n[preprocess]\nface_targets = [500, 800]\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&t).unwrap();
        assert_eq!(cfg.scheme, Scheme::BlockPatch);
        assert_eq!(cfg.metrics.samples_per_mesh, 10_000);
        assert_eq!(cfg.preprocess.face_targets, vec![500, 800]);

        let j = dir.path().join("run.json");
        std::fs::write(&j, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(RunConfig::load(&j).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("bad.toml");
        std::fs::write(&t, "resolution = 100\n").unwrap();
        assert_eq!(RunConfig::load(&t).unwrap_err().kind, Kind::Validation);
        std::fs::write(&t, "resolutoin = 128\n").unwrap();
        assert_eq!(RunConfig::load(&t).unwrap_err().kind, Kind::Parse);
    }
}
