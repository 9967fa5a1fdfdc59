use std::path::{Path, PathBuf};

use lwir_hfe::eval::{FlowParams, DEFAULT_PITCH_MM};
use lwir_hfe::optics::{FocalPlane, LensSpec, SamplingGrid};
use lwir_hfe::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Directory searched for `config.toml` / `config.json` when no `--config`
/// is given.
pub const CONFIG_DIR_ENV: &str = "LWIR_HFE_CONFIG_DIR";
pub const SNAPSHOT_FILE: &str = "resolved_config.json";

/// Everything a run can be configured with. Missing fields take their
/// defaults; unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds dataset noise and training. Overrides `train.seed`.
    pub seed: u64,
    pub lens: LensSpec,
    pub pupil: SamplingGrid,
    pub focal_plane: FocalPlane,
    /// Equally weighted wavelengths across the lens band for the
    /// polychromatic PSF.
    pub spectral_samples: usize,
    pub noise_sigma: f64,
    pub split_ratio: f64,
    pub train: TrainConfig,
    pub flow: FlowParams,
    pub pixel_pitch_mm: f64,
    pub embedder_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            lens: LensSpec::default(),
            pupil: SamplingGrid::default(),
            focal_plane: FocalPlane::default(),
            spectral_samples: 7,
            noise_sigma: 0.01,
            split_ratio: 0.9,
            train: TrainConfig::default(),
            flow: FlowParams::default(),
            pixel_pitch_mm: DEFAULT_PITCH_MM,
            embedder_seed: 0,
        }
    }
}

impl RunConfig {
    /// Reads a `.json` or `.toml` file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("invalid config {}: {e}", path.display()));
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| bad(&e)),
            Some("toml") => toml::from_str(&text).map_err(|e| bad(&e)),
            _ => Err(CliError::Usage(format!(
                "config {} must end in .json or .toml",
                path.display()
            ))),
        }
    }

    /// `explicit` if given, else the first of `config.toml`, `config.json`
    /// in the directory named by the environment variable, else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<(Self, Option<PathBuf>), CliError> {
        if let Some(p) = explicit {
            return Ok((Self::from_file(p)?, Some(p.to_path_buf())));
        }
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let dir = PathBuf::from(dir);
            for name in ["config.toml", "config.json"] {
                let p = dir.join(name);
                if p.is_file() {
                    return Ok((Self::from_file(&p)?, Some(p)));
                }
            }
        }
        Ok((Self::default(), None))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if let Err(e) = self.lens.validate() {
            return usage(e.to_string());
        }
        if self.spectral_samples == 0 {
            return usage("spectral_samples must be at least 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return usage(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return usage(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio));
        }
        if !(self.pixel_pitch_mm > 0.0 && self.pixel_pitch_mm.is_finite()) {
            return usage(format!("pixel_pitch_mm must be > 0, got {}", self.pixel_pitch_mm));
        }
        let t = &self.train;
        if t.batch_size == 0 || t.epochs == 0 {
            return usage("train.batch_size and train.epochs must be at least 1".into());
        }
        if t.crop_size == 0 || t.crop_size > lwir_hfe::imagecore::TRAINING_SIZE || !t.crop_size.is_multiple_of(4) {
            return usage(format!(
                "train.crop_size must be a multiple of 4 in 4..={}, got {}",
                lwir_hfe::imagecore::TRAINING_SIZE,
                t.crop_size
            ));
        }
        if !t.hf_discriminator && t.weights.hf_adversarial != 0.0 {
            return usage("train.weights.hf_adversarial must be 0 without the high-frequency discriminator".into());
        }
        Ok(())
    }
}

/// What a run was asked to do and the configuration it resolved to.
#[derive(Serialize)]
pub struct Snapshot<'a, A: Serialize> {
    pub command: &'a str,
    pub config_file: Option<&'a Path>,
    pub args: &'a A,
    pub config: &'a RunConfig,
}

impl<A: Serialize> Snapshot<'_, A> {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(lwir_hfe::Error::from)?;
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    }
}

/// Where the snapshot goes for an output path: inside it when it is a
/// directory, otherwise `<stem>.config.json` beside it.
pub fn snapshot_path(output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        output.join(SNAPSHOT_FILE)
    } else {
        let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
        output.with_file_name(format!("{stem}.config.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_in_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 4\n[train]\nepochs = 2\n[lens]\nfocal_length_m = 0.008\n").unwrap();
        let c = RunConfig::from_file(&p).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.lens.focal_length_m, 0.008);
        assert_eq!(c.lens.diameter_m, LensSpec::default().diameter_m);

        let j = dir.path().join("c.json");
        std::fs::write(&j, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(RunConfig::from_file(&j).unwrap(), c);
    }

    #[test]
    fn unknown_fields_and_extensions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"sed": 1}"#).unwrap();
        assert!(matches!(RunConfig::from_file(&p), Err(CliError::Usage(_))));
        let y = dir.path().join("c.yaml");
        std::fs::write(&y, "seed: 1").unwrap();
        assert!(RunConfig::from_file(&y).is_err());
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let mut c = RunConfig::default();
        c.train.crop_size = 90;
        assert!(c.validate().is_err());
    }

    #[test]
    fn snapshot_locations() {
        assert_eq!(snapshot_path(Path::new("out"), true), Path::new("out").join(SNAPSHOT_FILE));
        assert_eq!(snapshot_path(Path::new("r/report.json"), false), Path::new("r/report.config.json"));
    }
}
