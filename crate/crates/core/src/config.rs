//! Experiment configuration: one TOML file with a section per stage.
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augmentor::AugmentConfig;
use crate::csgan::GanConfig;
use crate::data::DatasetConfig;
use crate::error::{config, CsdaError, Result};
use crate::regressor::{Method, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Train / validation / test fractions of subjects.
    pub fractions: [f64; 3],
    /// Fold used by the single-split commands.
    pub fold: usize,
    /// Number of folds run by cross-validation, starting at fold 0.
    pub folds: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fractions: [0.6, 0.2, 0.2],
            fold: 0,
            folds: 5,
            methods: vec![Method::Baseline, Method::ClassicDa, Method::CdaNoGan, Method::Cda(0.5)],
            seed: 0,
        }
    }
}

impl EvalConfig {
    /// Number of subject groups implied by the test fraction.
    pub fn groups(&self) -> usize {
        (1.0 / self.fractions[2]).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return config("eval.methods must list at least one method");
        }
        if self.folds == 0 || self.folds > self.groups() || self.fold >= self.groups() {
            return config(format!(
                "eval.folds = {} and eval.fold = {} must fit the {} subject groups",
                self.folds,
                self.fold,
                self.groups()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub workdir: PathBuf,
}

/// Every section is optional in the file; commands demand the ones they use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetConfig>,
    pub gan: Option<GanConfig>,
    pub augment: Option<AugmentConfig>,
    pub regressor: Option<TrainConfig>,
    pub eval: Option<EvalConfig>,
    pub paths: Option<PathsConfig>,
}

fn missing(section: &str) -> CsdaError {
    CsdaError::Config(format!("the [{section}] section is required for this command"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CsdaError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CsdaError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Replace every stage seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Some(d) = self.dataset.as_mut() {
            d.seed = seed;
        }
        if let Some(g) = self.gan.as_mut() {
            g.seed = seed;
        }
        if let Some(a) = self.augment.as_mut() {
            a.seed = seed;
        }
        if let Some(r) = self.regressor.as_mut() {
            r.seed = seed;
        }
        if let Some(e) = self.eval.as_mut() {
            e.seed = seed;
        }
        self
    }

    pub fn dataset(&self) -> Result<&DatasetConfig> {
        self.dataset.as_ref().ok_or_else(|| missing("dataset"))
    }

    pub fn gan(&self) -> Result<&GanConfig> {
        let g = self.gan.as_ref().ok_or_else(|| missing("gan"))?;
        g.validate()?;
        Ok(g)
    }

    pub fn augment(&self) -> Result<&AugmentConfig> {
        self.augment.as_ref().ok_or_else(|| missing("augment"))
    }

    pub fn regressor(&self) -> Result<&TrainConfig> {
        let r = self.regressor.as_ref().ok_or_else(|| missing("regressor"))?;
        r.validate()?;
        Ok(r)
    }

    pub fn eval(&self) -> Result<&EvalConfig> {
        let e = self.eval.as_ref().ok_or_else(|| missing("eval"))?;
        e.validate()?;
        Ok(e)
    }

    /// The workdir from the file, unless overridden.
    pub fn workdir(&self, override_dir: Option<&Path>) -> Result<PathBuf> {
        match (override_dir, &self.paths) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(p)) => Ok(p.workdir.clone()),
            (None, None) => Err(CsdaError::Config("no workdir: pass --workdir or set [paths] workdir".into())),
        }
    }
}
