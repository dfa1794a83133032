//! Pipeline configuration, read from JSON. Every field has a default, so a
//! config file only needs the paths it uses. Relative paths resolve
//! against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::linker::LinkerConfig;
use crate::scorer::ScorerConfig;
use crate::semantic::{DiscriminationMode, NamingPriorConfig};
use crate::video::FusionConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub local_vocabulary: Option<PathBuf>,
    pub global_vocabulary: Option<PathBuf>,
    pub actions: Option<PathBuf>,
    /// Directory of per-video detection files.
    pub detections: Option<PathBuf>,
    /// Language tag to vector file.
    pub embeddings: BTreeMap<String, PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub depths: Option<PathBuf>,
    pub spatial_priors: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub global_scores: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Optional `{video_id: action}` map; otherwise labels come from the
    /// ground-truth tubes.
    pub labels: Option<PathBuf>,
    /// Where stage artifacts are written and read.
    pub work_dir: Option<PathBuf>,
}

/// Which weight multiplies local object evidence in the box score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalWeighting {
    /// The configured similarity alone.
    #[default]
    Similarity,
    /// Similarity plus discrimination, times the naming weight.
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: InputPaths,
    pub languages: Vec<String>,
    pub discrimination: DiscriminationMode,
    pub use_naming_prior: bool,
    pub naming: NamingPriorConfig,
    pub local_weighting: LocalWeighting,
    pub scorer: ScorerConfig,
    pub linker: LinkerConfig,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: InputPaths::default(),
            languages: vec!["english".into(), "dutch".into()],
            discrimination: DiscriminationMode::Off,
            use_naming_prior: false,
            naming: NamingPriorConfig::default(),
            local_weighting: LocalWeighting::Similarity,
            scorer: ScorerConfig::default(),
            linker: LinkerConfig::default(),
            fusion: FusionConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg: Self = crate::io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.local_vocabulary,
            &mut p.global_vocabulary,
            &mut p.actions,
            &mut p.detections,
            &mut p.lexicon,
            &mut p.depths,
            &mut p.spatial_priors,
            &mut p.annotations,
            &mut p.global_scores,
            &mut p.ground_truth,
            &mut p.labels,
            &mut p.work_dir,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, slot);
        }
        for v in p.embeddings.values_mut() {
            resolve(base, v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::Config("languages must not be empty".into()));
        }
        self.scorer.validate()?;
        self.linker.validate()?;
        self.fusion.validate()?;
        self.eval.validate()?;
        if self.use_naming_prior {
            self.naming.validate()?;
        }
        Ok(())
    }

    pub fn work_dir(&self) -> PathBuf {
        self.paths.work_dir.clone().unwrap_or_else(|| PathBuf::from("work"))
    }

    /// The path behind a required input, or a config error naming the key.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("paths.{key} is not set")))
    }
}
