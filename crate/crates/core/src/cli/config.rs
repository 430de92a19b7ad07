use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::ToyConfig;
use crate::error::{invalid, Error, Result};
use crate::network::PoseNetConfig;
use crate::signals::ChirpSpec;
use crate::vision::CameraSpec;
use crate::voxel::{GridSpec, MAX_VOXELS};

/// Frequency-division settings; each speaker gets an equal slice of the chirp band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdmSettings {
    pub guard_hz: f64,
}

impl Default for FdmSettings {
    fn default() -> Self {
        Self { guard_hz: 250.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvSettings {
    /// Absolute Wiener regularizer; relative default when absent.
    pub epsilon: Option<f64>,
    /// Retained kernel taps; derived from the room or grid when absent.
    pub output_taps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub toy: ToyConfig,
    pub network: PoseNetConfig,
    pub epochs: usize,
    pub train_samples: usize,
    pub test_samples: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            toy: ToyConfig::default(),
            network: PoseNetConfig {
                stages: 2,
                stem_widths: vec![4, 4, 4],
                stage_widths: vec![8, 8],
                learning_rate: 0.3,
                ..PoseNetConfig::default()
            },
            epochs: 10,
            train_samples: 200,
            test_samples: 50,
        }
    }
}

/// One JSON file drives every subcommand. Relative paths resolve against
/// the directory holding the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: Option<PathBuf>,
    pub grid: GridSpec,
    pub chirp: ChirpSpec,
    pub fdm: FdmSettings,
    pub deconv: DeconvSettings,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Speaker/microphone index pairs to use; every combination when absent.
    pub pairs: Option<Vec<[usize; 2]>>,
    pub camera: Option<CameraSpec>,
    pub heatmap_sigma_px: f64,
    pub training: TrainingSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: None,
            grid: GridSpec {
                origin: [0.0; 3],
                cell_m: 0.05,
                dims: [70, 70, 50],
            },
            chirp: ChirpSpec::ultrasonic(),
            fdm: FdmSettings::default(),
            deconv: DeconvSettings::default(),
            snr_db: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
            pairs: None,
            camera: None,
            heatmap_sigma_px: 2.0,
            training: TrainingSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates `path`, resolving relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.scene = cfg.scene.map(|s| base.join(s));
        cfg.out_dir = base.join(&cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config JSON line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn validate(&self) -> Result<()> {
        let voxels = self.grid.dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
        if voxels.is_none_or(|v| v > MAX_VOXELS) {
            return Err(Error::Config(format!("grid {:?} exceeds the {MAX_VOXELS}-voxel budget", self.grid.dims)));
        }
        self.grid.to_grid()?;
        if let Some(scene) = &self.scene {
            if !scene.is_file() {
                return Err(Error::Config(format!("scene file {} does not exist", scene.display())));
            }
        }
        if !(self.heatmap_sigma_px > 0.0) {
            return Err(invalid(format!("heatmap_sigma_px must be positive, got {}", self.heatmap_sigma_px)));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(invalid("snr_db must be finite"));
            }
        }
        self.training.network.validate()?;
        Ok(())
    }

    pub fn scene_path(&self) -> Result<&Path> {
        self.scene
            .as_deref()
            .ok_or_else(|| Error::Config("this command needs a \"scene\" entry in the config".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg = ExperimentConfig::parse("{}").unwrap();
        assert_eq!(cfg.grid.dims, [70, 70, 50]);
        assert_eq!(cfg.training.network.stages, 2);
        let err = ExperimentConfig::parse("{\n  \"sede\": 1\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn grid_budget() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.dims = [1 << 10, 1 << 10, 1 << 10];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_scene_file() {
        let cfg = ExperimentConfig {
            scene: Some(PathBuf::from("/definitely/not/here.json")),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("does not exist"));
    }
}
