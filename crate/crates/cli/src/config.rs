//! TOML run configuration. Every section has defaults, so an empty file (or
//! no file) is a valid configuration; unknown keys are rejected.

use std::path::{Path, PathBuf};

use entk_core::data::MAX_ATOMS;
use entk_core::{ArchitectureSpec, EntkError, NonlinKind, Padding, Result, Support};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Not part of the configuration hash.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Not part of the configuration hash.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub gram: GramConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub featurize: FeaturizeConfig,
}

/// A named preset or an explicit layer list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchSource {
    Preset(String),
    Spec(ArchitectureSpec),
}

pub const PRESETS: [&str; 6] = ["classifier_gcnn", "classifier_cnn", "mc_gcnn_relu", "mc_gcnn_erf", "molecule_so3", "molecule_mlp"];

impl ArchSource {
    /// `branches` sizes the molecule presets; `bandlimit` is the SO(3) band.
    pub fn resolve(&self, branches: usize, bandlimit: usize) -> Result<ArchitectureSpec> {
        let spec = match self {
            ArchSource::Spec(s) => s.clone(),
            ArchSource::Preset(name) => match name.as_str() {
                "classifier_gcnn" => ArchitectureSpec::classifier_gcnn(4),
                "classifier_cnn" => ArchitectureSpec::classifier_cnn(),
                "mc_gcnn_relu" => ArchitectureSpec::mc_gcnn(NonlinKind::Relu),
                "mc_gcnn_erf" => ArchitectureSpec::mc_gcnn(NonlinKind::Erf),
                "molecule_so3" => ArchitectureSpec::molecule_so3(bandlimit, branches),
                "molecule_mlp" => ArchitectureSpec::molecule_mlp(branches),
                other => return Err(EntkError::Argument(format!("unknown architecture preset '{other}' (known: {})", PRESETS.join(", ")))),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GramConfig {
    /// Image tensor (`[n,c,h,w]`, `[n,h,w]`, or CSV rows of square images) or
    /// an `.xyz` file of molecules.
    pub inputs: Option<PathBuf>,
    pub arch: ArchSource,
    /// Sampling band for molecule inputs.
    pub grid_band: usize,
    /// SO(3) band limit for the molecule presets.
    pub bandlimit: usize,
    /// `entk` or `csv`.
    pub format: String,
}

impl Default for GramConfig {
    fn default() -> Self {
        GramConfig { inputs: None, arch: ArchSource::Preset("classifier_gcnn".into()), grid_band: 6, bandlimit: 3, format: "entk".into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// Synthetic rotated textures, 9 classes.
    Rotclass,
    /// Synthetic small molecules.
    Molecules,
    /// Image and label tensors from disk.
    Images,
    /// Molecules from an `.xyz` file.
    Xyz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedArch {
    pub name: String,
    pub arch: ArchSource,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub dataset: Dataset,
    /// Image side of the synthetic image task.
    pub h: usize,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub xyz: Option<PathBuf>,
    /// Size of the training pool for data read from disk; the rest is test.
    pub n_train: Option<usize>,
    pub n_classes: Option<usize>,
    pub train_sizes: Vec<usize>,
    pub ridge: Option<f64>,
    /// Image kernels; defaults to the classifier GCNN and CNN.
    pub kernels: Vec<NamedArch>,
    pub grid_band: usize,
    pub bandlimit: usize,
    /// Also compare predictions on rotated test inputs.
    pub invariance: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            dataset: Dataset::Rotclass,
            h: 4,
            images: None,
            labels: None,
            xyz: None,
            n_train: None,
            n_classes: None,
            train_sizes: vec![20, 50, 100, 200],
            ridge: None,
            kernels: Vec::new(),
            grid_band: 6,
            bandlimit: 3,
            invariance: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub arch: ArchSource,
    pub h: usize,
    pub n_inputs: usize,
    pub widths: Vec<usize>,
    pub samples: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { arch: ArchSource::Preset("mc_gcnn_relu".into()), h: 8, n_inputs: 3, widths: vec![8, 16, 32, 64], samples: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub grids: Vec<usize>,
    pub depths: Vec<usize>,
    pub nonlins: Vec<NonlinKind>,
    pub support: Support,
    pub padding: Padding,
    pub trials: usize,
    pub thm5_grid: usize,
    pub thm5_depth: usize,
    pub thm4_h: usize,
    pub thm4_depth: usize,
    pub thm4_train: usize,
    pub thm4_noise: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grids: vec![3, 4],
            depths: vec![1, 2, 3, 4],
            nonlins: vec![NonlinKind::Relu, NonlinKind::Erf],
            support: Support::Square(3),
            padding: Padding::Circular,
            trials: 2,
            thm5_grid: 3,
            thm5_depth: 2,
            thm4_h: 4,
            thm4_depth: 2,
            thm4_train: 6,
            thm4_noise: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizeConfig {
    pub xyz: Option<PathBuf>,
    pub grid_band: usize,
    /// Format of the energies; the rank-4 features are always ENTK1.
    pub format: String,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig { xyz: None, grid_band: 6, format: "entk".into() }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| EntkError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| EntkError::Parse { line: 0, msg: format!("{}: {e}", path.display()) })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EntkError::Argument(m));
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        for f in [&self.gram.format, &self.featurize.format] {
            if f != "entk" && f != "csv" {
                return bad(format!("format '{f}' is neither entk nor csv"));
            }
        }
        let p = &self.predict;
        if p.train_sizes.is_empty() || p.train_sizes.contains(&0) {
            return bad("train_sizes must be non-empty and positive".into());
        }
        if p.ridge.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return bad("ridge must be finite and non-negative".into());
        }
        let m = &self.mc;
        if m.widths.is_empty() || m.widths.contains(&0) || m.samples < 2 || m.n_inputs == 0 || m.h < 3 {
            return bad("mc needs positive widths, at least 2 samples, inputs, and h >= 3".into());
        }
        let v = &self.verify;
        if v.trials == 0 || v.depths.contains(&0) || v.thm4_train == 0 {
            return bad("verify needs positive trials, depths and training size".into());
        }
        if self.gram.bandlimit == 0 || self.gram.grid_band < self.gram.bandlimit || p.bandlimit == 0 || p.grid_band < p.bandlimit {
            return bad("grid_band must be at least the positive bandlimit".into());
        }
        if !(1..=64).contains(&self.featurize.grid_band) {
            return bad("featurize grid_band must lie in 1..=64".into());
        }
        if let ArchSource::Preset(_) = &self.gram.arch {
            self.gram.arch.resolve(MAX_ATOMS, self.gram.bandlimit)?;
        }
        Ok(())
    }

    /// SHA-256 of the configuration as canonical JSON, without the output
    /// directory and thread count.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        c.validate().unwrap();
        assert_eq!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[mc]\nwidth = [8]").is_err());
    }

    #[test]
    fn hash_ignores_threads_and_output() {
        let a: RunConfig = toml::from_str("seed = 3\nthreads = 8\noutput_dir = 'x'").unwrap();
        let b: RunConfig = toml::from_str("seed = 3").unwrap();
        let c: RunConfig = toml::from_str("seed = 4").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn inline_architectures_parse() {
        let c: RunConfig = toml::from_str(
            r#"
            [gram]
            arch = { group = { type = "planar", n_rot = 4, padding = "circular" }, layers = [
                { kind = "lifting", support = { square = 3 } }, { kind = "gpool" } ] }
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert!(matches!(c.gram.arch, ArchSource::Spec(_)));
        let bad: RunConfig = toml::from_str("[gram]\narch = 'resnet'").unwrap();
        assert!(bad.validate().is_err());
    }
}
