//! Stage orchestration. Each stage either reads its upstream artifacts from
//! the work directory ([`Mode::Staged`]) or recomputes them in memory
//! ([`Mode::EndToEnd`]); both routes produce identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{LocalWeighting, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{
    self, evaluate_localization, frame_ap, FrameGroundTruth, FramePrediction, LocalizationReport,
    RankedDetectionList, RankedTube,
};
use crate::io;
use crate::linker::{extract_tubes, ActionTube};
use crate::model::{GroundTruthTube, VideoDetections, Vocabulary, VocabularyKind};
use crate::scorer::{score_video, score_video_query, RetrievalQuery, ScoredFrame};
use crate::semantic::{
    ActionObjectWeights, DiscriminationMode, EmbeddingTable, MultilingualLexicon, ObjectDepthTable, ObjectWeighter,
    RankedObject, SemanticSpace,
};
use crate::spatial::{build_prior_table, SpatialDistribution, SpatialPriorTable};
use crate::video::{argmax, class_scores, fuse_tube, video_score};

pub const SPATIAL_PRIORS_FILE: &str = "spatial_priors.json";
pub const RANKINGS_FILE: &str = "object_rankings.json";
pub const SCORED_BOXES_FILE: &str = "scored_boxes.json";
pub const TUBES_FILE: &str = "tubes.json";
pub const LOCALIZATION_FILE: &str = "localization.json";
pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const RETRIEVAL_FILE: &str = "retrieval.json";
pub const LOCALIZATION_REPORT_FILE: &str = "localization_report.json";
pub const CLASSIFICATION_REPORT_FILE: &str = "classification_report.json";

const FRAME_AP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Staged,
    EndToEnd,
}

// ---------------------------------------------------------------- artifacts

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedWeight {
    pub object: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRanking {
    pub action: String,
    pub local: Vec<NamedWeight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<Vec<NamedWeight>>,
}

/// Selected local and global objects per action, in action-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRankings {
    pub actions: Vec<ActionRanking>,
}

fn named(list: &[RankedObject], vocab: &Vocabulary) -> Vec<NamedWeight> {
    list.iter()
        .map(|r| NamedWeight {
            object: vocab.name(r.object_id).to_string(),
            weight: r.weight,
        })
        .collect()
}

fn resolve_named(list: &[NamedWeight], vocab: &Vocabulary, location: &str) -> Result<Vec<RankedObject>> {
    list.iter()
        .map(|n| {
            Ok(RankedObject {
                object_id: vocab.id(&n.object).ok_or_else(|| Error::UnknownClass {
                    location: location.to_string(),
                    kind: vocab.kind().label(),
                    name: n.object.clone(),
                })?,
                weight: n.weight,
            })
        })
        .collect()
}

fn check_action_order<'a>(names: impl ExactSizeIterator<Item = &'a str>, actions: &Vocabulary, location: &str) -> Result<()> {
    let found: Vec<&str> = names.collect();
    if found.len() != actions.len() || found.iter().zip(actions.names()).any(|(a, b)| *a != b) {
        return Err(Error::Schema {
            location: location.to_string(),
            message: "actions differ from the action vocabulary; rerun the producing stage".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredVideo {
    pub video_id: String,
    pub action: String,
    pub frames: Vec<ScoredFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTubes {
    pub video_id: String,
    pub action: String,
    pub tubes: Vec<ActionTube>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedTube {
    pub video_id: String,
    pub order: usize,
    pub tube_score: f64,
    pub video_score: f64,
    pub score: f64,
    pub tube: ActionTube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLocalization {
    pub action: String,
    pub detections: Vec<LocalizedTube>,
}

/// Fused tube rankings, one list per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub actions: Vec<ActionLocalization>,
}

impl Localization {
    pub fn ranked_lists(&self) -> Vec<RankedDetectionList> {
        self.actions
            .iter()
            .map(|a| {
                RankedDetectionList::new(
                    a.detections
                        .iter()
                        .map(|d| RankedTube {
                            video_id: d.video_id.clone(),
                            score: d.score,
                            order: d.order,
                            tube: d.tube.clone(),
                        })
                        .collect(),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoPrediction {
    pub video_id: String,
    pub scores: Vec<f64>,
    pub predicted: String,
}

/// Per-video, per-action classification scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub actions: Vec<String>,
    pub videos: Vec<VideoPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub size: usize,
    pub runs: usize,
    pub seed: u64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub num_videos: usize,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<SubsetResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEvaluation {
    #[serde(flatten)]
    pub tubes: LocalizationReport,
    pub frame_threshold: f64,
    pub frame_map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedQuery {
    pub object: String,
    pub relation: SpatialDistribution,
    pub size_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedTube {
    pub video_id: String,
    pub order: usize,
    pub score: f64,
    pub tube: ActionTube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub query: NamedQuery,
    pub tubes: Vec<RetrievedTube>,
}

// ---------------------------------------------------------------- runner

pub struct Vocabularies {
    pub local: Vocabulary,
    pub global: Option<Vocabulary>,
    pub actions: Vocabulary,
}

pub struct Runner {
    pub config: PipelineConfig,
    pub mode: Mode,
    pub vocab: Vocabularies,
}

impl Runner {
    pub fn new(config: PipelineConfig, mode: Mode) -> Result<Self> {
        config.validate()?;
        let p = &config.paths;
        let local = io::load_vocabulary(config.require(&p.local_vocabulary, "local_vocabulary")?, VocabularyKind::LocalObject)?;
        let actions = io::load_vocabulary(config.require(&p.actions, "actions")?, VocabularyKind::Action)?;
        let global = p
            .global_vocabulary
            .as_deref()
            .map(|path| io::load_vocabulary(path, VocabularyKind::GlobalObject))
            .transpose()?;
        Ok(Self {
            config,
            mode,
            vocab: Vocabularies { local, global, actions },
        })
    }

    pub fn artifact_path(&self, name: &str) -> PathBuf {
        self.config.work_dir().join(name)
    }

    fn read_artifact<T: DeserializeOwned>(&self, name: &str, producer: &'static str) -> Result<T> {
        let path = self.artifact_path(name);
        if !path.exists() {
            return Err(Error::MissingArtifact { path, producer });
        }
        io::read_json(&path)
    }

    pub fn write_artifact<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.artifact_path(name);
        io::write_json(&path, value)?;
        Ok(path)
    }

    pub fn videos(&self) -> Result<Vec<VideoDetections>> {
        let dir = self.config.require(&self.config.paths.detections, "detections")?;
        io::load_detections_dir(dir, &self.vocab.local)
    }

    fn ground_truth(&self) -> Result<Vec<GroundTruthTube>> {
        io::load_ground_truth(
            self.config.require(&self.config.paths.ground_truth, "ground_truth")?,
            &self.vocab.actions,
        )
    }

    fn global_vocab(&self) -> Result<&Vocabulary> {
        self.vocab
            .global
            .as_ref()
            .ok_or_else(|| Error::Config("paths.global_vocabulary is not set".into()))
    }

    // ------------------------------------------------------------ spatial priors

    pub fn build_spatial_priors(&self) -> Result<SpatialPriorTable> {
        let path = self.config.require(&self.config.paths.annotations, "annotations")?;
        let corpus = io::load_annotations(path, &self.vocab.local)?;
        Ok(build_prior_table(&corpus))
    }

    /// The prior table used for scoring: an explicit file, the staged
    /// artifact, or one built from the annotation corpus. `None` when
    /// spatial relations are off or no source is configured.
    pub fn spatial_priors(&self) -> Result<Option<SpatialPriorTable>> {
        if !self.config.scorer.use_spatial_relations {
            return Ok(None);
        }
        let paths = &self.config.paths;
        if let Some(p) = &paths.spatial_priors {
            return io::load_spatial_priors(p, &self.vocab.local).map(Some);
        }
        if paths.annotations.is_none() {
            log::warn!(
                "no spatial priors or annotations configured; every object uses the fallback match {}",
                self.config.scorer.spatial_fallback
            );
            return Ok(None);
        }
        match self.mode {
            Mode::EndToEnd => self.build_spatial_priors().map(Some),
            Mode::Staged => {
                let path = self.artifact_path(SPATIAL_PRIORS_FILE);
                if !path.exists() {
                    return Err(Error::MissingArtifact {
                        path,
                        producer: "build-spatial-priors",
                    });
                }
                io::load_spatial_priors(&path, &self.vocab.local).map(Some)
            }
        }
    }

    // ------------------------------------------------------------ semantics

    fn semantic_space(&self) -> Result<SemanticSpace> {
        let cfg = &self.config;
        let tables = load_language_tables(cfg)?;
        let person = self.vocab.local.person_id();
        let mut terms: Vec<&str> = self
            .vocab
            .local
            .names()
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != person)
            .map(|(_, n)| n.as_str())
            .collect();
        if cfg.fusion.use_global {
            terms.extend(self.global_vocab()?.names().iter().map(String::as_str));
        }
        terms.extend(self.vocab.actions.names().iter().map(String::as_str));
        let lexicon = match &cfg.paths.lexicon {
            Some(p) => io::load_lexicon(p)?,
            None => identity_lexicon(&cfg.languages, &terms),
        };
        SemanticSpace::multilingual(&lexicon, &tables, &cfg.languages, terms)
    }

    fn depths(&self) -> Result<Option<ObjectDepthTable>> {
        if !self.config.use_naming_prior {
            return Ok(None);
        }
        io::load_depths(self.config.require(&self.config.paths.depths, "depths")?).map(Some)
    }

    pub fn compute_rankings(&self) -> Result<ObjectRankings> {
        let cfg = &self.config;
        let space = self.semantic_space()?;
        let depths = self.depths()?;
        let naming = depths.as_ref().map(|d| (cfg.naming, d));
        let combined_local = cfg.local_weighting == LocalWeighting::Combined;
        let local = ObjectWeighter {
            similarity: &space,
            discrimination: if combined_local { cfg.discrimination } else { DiscriminationMode::Off },
            naming: if combined_local { naming } else { None },
            objects: &self.vocab.local,
            actions: &self.vocab.actions,
            excluded: self.vocab.local.person_id().into_iter().collect(),
        }
        .rank(cfg.scorer.local_k)?;
        let global = if cfg.fusion.use_global {
            let vocab = self.global_vocab()?;
            let ranked = ObjectWeighter {
                similarity: &space,
                discrimination: cfg.discrimination,
                naming,
                objects: vocab,
                actions: &self.vocab.actions,
                excluded: vec![],
            }
            .rank(cfg.fusion.global_k)?;
            Some((vocab, ranked))
        } else {
            None
        };
        Ok(ObjectRankings {
            actions: self
                .vocab
                .actions
                .names()
                .iter()
                .enumerate()
                .map(|(a, name)| ActionRanking {
                    action: name.clone(),
                    local: named(local.for_action(a), &self.vocab.local),
                    global: global.as_ref().map(|(v, w)| named(w.for_action(a), v)),
                })
                .collect(),
        })
    }

    pub fn rankings(&self) -> Result<ObjectRankings> {
        match self.mode {
            Mode::EndToEnd => self.compute_rankings(),
            Mode::Staged => {
                let r: ObjectRankings = self.read_artifact(RANKINGS_FILE, "rank-objects")?;
                let location = self.artifact_path(RANKINGS_FILE).display().to_string();
                check_action_order(r.actions.iter().map(|a| a.action.as_str()), &self.vocab.actions, &location)?;
                Ok(r)
            }
        }
    }

    fn local_weights(&self, rankings: &ObjectRankings) -> Result<ActionObjectWeights> {
        let location = self.artifact_path(RANKINGS_FILE).display().to_string();
        Ok(ActionObjectWeights {
            per_action: rankings
                .actions
                .iter()
                .map(|a| resolve_named(&a.local, &self.vocab.local, &location))
                .collect::<Result<_>>()?,
        })
    }

    fn global_weights(&self, rankings: &ObjectRankings) -> Result<ActionObjectWeights> {
        let location = self.artifact_path(RANKINGS_FILE).display().to_string();
        let vocab = self.global_vocab()?;
        Ok(ActionObjectWeights {
            per_action: rankings
                .actions
                .iter()
                .map(|a| {
                    let list = a.global.as_ref().ok_or_else(|| Error::Schema {
                        location: location.clone(),
                        message: format!("no global objects for `{}`; rerun rank-objects with global scoring on", a.action),
                    })?;
                    resolve_named(list, vocab, &location)
                })
                .collect::<Result<_>>()?,
        })
    }

    // ------------------------------------------------------------ local path

    pub fn compute_scored(&self) -> Result<Vec<ScoredVideo>> {
        let rankings = self.rankings()?;
        let weights = self.local_weights(&rankings)?;
        let priors = self.spatial_priors()?;
        let videos = self.videos()?;
        let per_video: Vec<Vec<ScoredVideo>> = videos
            .par_iter()
            .map(|v| {
                self.vocab
                    .actions
                    .names()
                    .iter()
                    .enumerate()
                    .map(|(a, name)| {
                        Ok(ScoredVideo {
                            video_id: v.video_id.clone(),
                            action: name.clone(),
                            frames: score_video(v, weights.for_action(a), priors.as_ref(), &self.config.scorer)?,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(per_video.into_iter().flatten().collect())
    }

    pub fn scored(&self) -> Result<Vec<ScoredVideo>> {
        match self.mode {
            Mode::EndToEnd => self.compute_scored(),
            Mode::Staged => self.read_artifact(SCORED_BOXES_FILE, "score-boxes"),
        }
    }

    pub fn compute_tubes(&self) -> Result<Vec<VideoTubes>> {
        let scored = self.scored()?;
        scored
            .par_iter()
            .map(|s| {
                let action_id = self.action_id(&s.action, SCORED_BOXES_FILE)?;
                Ok(VideoTubes {
                    video_id: s.video_id.clone(),
                    action: s.action.clone(),
                    tubes: extract_tubes(&s.video_id, Some(action_id), &s.frames, &self.config.linker)?,
                })
            })
            .collect()
    }

    pub fn tubes(&self) -> Result<Vec<VideoTubes>> {
        match self.mode {
            Mode::EndToEnd => self.compute_tubes(),
            Mode::Staged => self.read_artifact(TUBES_FILE, "link-tubes"),
        }
    }

    fn action_id(&self, name: &str, file: &str) -> Result<usize> {
        self.vocab.actions.id(name).ok_or_else(|| Error::UnknownClass {
            location: self.artifact_path(file).display().to_string(),
            kind: "action",
            name: name.to_string(),
        })
    }

    // ------------------------------------------------------------ global path

    /// Video score of every action for every video with global scores.
    pub fn video_scores(&self, rankings: &ObjectRankings) -> Result<BTreeMap<String, Vec<f64>>> {
        let vocab = self.global_vocab()?;
        let weights = self.global_weights(rankings)?;
        let path = self.config.require(&self.config.paths.global_scores, "global_scores")?;
        let scores = io::load_global_scores(path, vocab)?;
        scores
            .into_iter()
            .map(|(vid, s)| {
                let per_action = (0..self.vocab.actions.len())
                    .map(|a| video_score(&s, weights.for_action(a), vocab.len()))
                    .collect::<Result<Vec<_>>>()?;
                Ok((vid, per_action))
            })
            .collect()
    }

    fn video_scores_if_global(&self) -> Result<Option<BTreeMap<String, Vec<f64>>>> {
        if self.config.fusion.use_global {
            let rankings = self.rankings()?;
            self.video_scores(&rankings).map(Some)
        } else {
            Ok(None)
        }
    }

    // ------------------------------------------------------------ fusion

    pub fn compute_localization(&self) -> Result<Localization> {
        if !self.config.fusion.use_local {
            return Err(Error::LocalPriorsRequired);
        }
        let tubes = self.tubes()?;
        let vscores = self.video_scores_if_global()?;
        let mut per_action: Vec<Vec<LocalizedTube>> = vec![Vec::new(); self.vocab.actions.len()];
        for vt in &tubes {
            let a = self.action_id(&vt.action, TUBES_FILE)?;
            let vs = match &vscores {
                Some(m) => lookup_video(m, &vt.video_id)?[a],
                None => 0.0,
            };
            for (order, t) in vt.tubes.iter().enumerate() {
                per_action[a].push(LocalizedTube {
                    video_id: vt.video_id.clone(),
                    order,
                    tube_score: t.tube_score,
                    video_score: vs,
                    score: fuse_tube(t.tube_score, vs, &self.config.fusion)?,
                    tube: t.clone(),
                });
            }
        }
        Ok(Localization {
            actions: per_action
                .into_iter()
                .zip(self.vocab.actions.names())
                .map(|(mut detections, name)| {
                    detections.sort_by(|a, b| {
                        b.score
                            .total_cmp(&a.score)
                            .then_with(|| a.video_id.cmp(&b.video_id))
                            .then(a.order.cmp(&b.order))
                    });
                    ActionLocalization {
                        action: name.clone(),
                        detections,
                    }
                })
                .collect(),
        })
    }

    pub fn localization(&self) -> Result<Localization> {
        match self.mode {
            Mode::EndToEnd => self.compute_localization(),
            Mode::Staged => self.read_artifact(LOCALIZATION_FILE, "localize"),
        }
    }

    pub fn compute_classification(&self) -> Result<Classification> {
        let fusion = &self.config.fusion;
        let n_actions = self.vocab.actions.len();
        let vscores = self.video_scores_if_global()?;
        let mut best: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        if fusion.use_local {
            for v in self.videos()? {
                best.insert(v.video_id, vec![None; n_actions]);
            }
            for vt in self.tubes()? {
                let a = self.action_id(&vt.action, TUBES_FILE)?;
                let slot = best.get_mut(&vt.video_id).ok_or_else(|| Error::Schema {
                    location: self.artifact_path(TUBES_FILE).display().to_string(),
                    message: format!("tubes for unknown video `{}`; rerun link-tubes", vt.video_id),
                })?;
                for t in &vt.tubes {
                    slot[a] = Some(slot[a].map_or(t.tube_score, |b: f64| b.max(t.tube_score)));
                }
            }
        } else if let Some(m) = &vscores {
            for vid in m.keys() {
                best.insert(vid.clone(), vec![None; n_actions]);
            }
        }
        let videos = best
            .into_iter()
            .map(|(video_id, tubes)| {
                let vs = match &vscores {
                    Some(m) => lookup_video(m, &video_id)?.clone(),
                    None => vec![0.0; n_actions],
                };
                let scores = class_scores(&tubes, &vs, fusion)?;
                let predicted = argmax(&scores).ok_or_else(|| Error::Config("no actions".into()))?;
                Ok(VideoPrediction {
                    video_id,
                    scores,
                    predicted: self.vocab.actions.name(predicted).to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Classification {
            actions: self.vocab.actions.names().to_vec(),
            videos,
        })
    }

    pub fn classification(&self) -> Result<Classification> {
        match self.mode {
            Mode::EndToEnd => self.compute_classification(),
            Mode::Staged => {
                let c: Classification = self.read_artifact(CLASSIFICATION_FILE, "classify")?;
                let location = self.artifact_path(CLASSIFICATION_FILE).display().to_string();
                check_action_order(c.actions.iter().map(String::as_str), &self.vocab.actions, &location)?;
                Ok(c)
            }
        }
    }

    // ------------------------------------------------------------ retrieval

    pub fn resolve_query(&self, q: &NamedQuery) -> Result<RetrievalQuery> {
        let object_id = self.vocab.local.id(&q.object).ok_or_else(|| Error::UnknownClass {
            location: "query".into(),
            kind: "local object",
            name: q.object.clone(),
        })?;
        if let Some(s) = q.size_ratio {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Range {
                    location: "query".into(),
                    what: "size_ratio",
                    value: s,
                });
            }
        }
        Ok(RetrievalQuery {
            object_id,
            relation: q.relation,
            size_ratio: q.size_ratio,
        })
    }

    /// Tubes of all videos ranked by tube score against the query.
    pub fn retrieve(&self, q: &NamedQuery) -> Result<Retrieval> {
        let query = self.resolve_query(q)?;
        let videos = self.videos()?;
        let per_video: Vec<Vec<RetrievedTube>> = videos
            .par_iter()
            .map(|v| {
                let frames = score_video_query(v, &query, &self.config.scorer)?;
                Ok(extract_tubes(&v.video_id, None, &frames, &self.config.linker)?
                    .into_iter()
                    .enumerate()
                    .map(|(order, tube)| RetrievedTube {
                        video_id: v.video_id.clone(),
                        order,
                        score: tube.tube_score,
                        tube,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut tubes: Vec<RetrievedTube> = per_video.into_iter().flatten().collect();
        tubes.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.video_id.cmp(&b.video_id))
                .then(a.order.cmp(&b.order))
        });
        Ok(Retrieval { query: q.clone(), tubes })
    }

    // ------------------------------------------------------------ evaluation

    pub fn evaluate_localization(&self) -> Result<LocalizationEvaluation> {
        let loc = self.localization()?;
        let location = self.artifact_path(LOCALIZATION_FILE).display().to_string();
        check_action_order(loc.actions.iter().map(|a| a.action.as_str()), &self.vocab.actions, &location)?;
        let gts = self.ground_truth()?;
        let tubes = evaluate_localization(
            &loc.ranked_lists(),
            &gts,
            self.vocab.actions.names(),
            &self.config.eval.overlap_thresholds,
        );
        let preds: Vec<FramePrediction> = loc
            .actions
            .iter()
            .enumerate()
            .flat_map(|(a, al)| {
                al.detections.iter().flat_map(move |d| {
                    d.tube.elements.iter().map(move |e| FramePrediction {
                        video_id: d.video_id.clone(),
                        frame_index: e.frame_index,
                        action_id: a,
                        bbox: e.bbox,
                        score: d.score,
                    })
                })
            })
            .collect();
        let frame_gts: Vec<FrameGroundTruth> = gts
            .iter()
            .flat_map(|g| {
                g.boxes.iter().map(move |(f, b)| FrameGroundTruth {
                    video_id: g.video_id.clone(),
                    frame_index: *f,
                    action_id: g.action_id,
                    bbox: *b,
                })
            })
            .collect();
        let frame_aps: Vec<Option<f64>> = (0..self.vocab.actions.len())
            .map(|a| frame_ap(&preds, &frame_gts, a, FRAME_AP_THRESHOLD))
            .collect();
        Ok(LocalizationEvaluation {
            tubes,
            frame_threshold: FRAME_AP_THRESHOLD,
            frame_map: eval::mean_of_present(&frame_aps),
        })
    }

    /// Video labels from the labels file, or else from ground-truth tubes.
    pub fn labels(&self) -> Result<BTreeMap<String, usize>> {
        if let Some(p) = &self.config.paths.labels {
            return io::load_labels(p, &self.vocab.actions);
        }
        let path = self.config.require(&self.config.paths.ground_truth, "ground_truth")?;
        let mut labels = BTreeMap::new();
        for g in self.ground_truth()? {
            if let Some(prev) = labels.insert(g.video_id.clone(), g.action_id) {
                if prev != g.action_id {
                    return Err(Error::Schema {
                        location: path.display().to_string(),
                        message: format!("video `{}` has tubes of two actions; supply paths.labels", g.video_id),
                    });
                }
            }
        }
        Ok(labels)
    }

    pub fn evaluate_classification(&self, subset_size: Option<usize>) -> Result<ClassificationReport> {
        let cls = self.classification()?;
        let labels = self.labels()?;
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        let mut preds = Vec::new();
        for v in &cls.videos {
            match labels.get(&v.video_id) {
                Some(&l) => {
                    preds.push(self.action_id(&v.predicted, CLASSIFICATION_FILE)?);
                    scores.push(v.scores.clone());
                    truth.push(l);
                }
                None => log::warn!("video `{}` has no label; skipped", v.video_id),
            }
        }
        let subset = subset_size
            .map(|n| {
                let e = &self.config.eval;
                let (mean, std) = eval::subset_eval(self.vocab.actions.len(), n, e.subset_runs, e.rng_seed, |s| {
                    Ok(eval::subset_accuracy(&scores, &truth, s))
                })?;
                Ok::<_, Error>(SubsetResult {
                    size: n,
                    runs: e.subset_runs,
                    seed: e.rng_seed,
                    mean_accuracy: mean,
                    std_accuracy: std,
                })
            })
            .transpose()?;
        Ok(ClassificationReport {
            num_videos: truth.len(),
            accuracy: eval::accuracy(&preds, &truth),
            subset,
        })
    }

    // ------------------------------------------------------------ stages

    /// Computes one stage and writes its artifact; returns the path.
    pub fn run(&self, stage: Stage) -> Result<PathBuf> {
        match stage {
            Stage::BuildSpatialPriors => {
                let table = self.build_spatial_priors()?;
                let path = self.artifact_path(SPATIAL_PRIORS_FILE);
                io::write_spatial_priors(&path, &table, &self.vocab.local)?;
                Ok(path)
            }
            Stage::RankObjects => self.write_artifact(RANKINGS_FILE, &self.compute_rankings()?),
            Stage::ScoreBoxes => self.write_artifact(SCORED_BOXES_FILE, &self.compute_scored()?),
            Stage::LinkTubes => self.write_artifact(TUBES_FILE, &self.compute_tubes()?),
            Stage::Localize => self.write_artifact(LOCALIZATION_FILE, &self.compute_localization()?),
            Stage::Classify => self.write_artifact(CLASSIFICATION_FILE, &self.compute_classification()?),
            Stage::EvaluateLocalization => {
                self.write_artifact(LOCALIZATION_REPORT_FILE, &self.evaluate_localization()?)
            }
        }
    }
}

/// Stages whose output depends only on the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    BuildSpatialPriors,
    RankObjects,
    ScoreBoxes,
    LinkTubes,
    Localize,
    Classify,
    EvaluateLocalization,
}

fn lookup_video<'a>(m: &'a BTreeMap<String, Vec<f64>>, video_id: &str) -> Result<&'a Vec<f64>> {
    m.get(video_id)
        .ok_or_else(|| Error::Config(format!("global scores lack video `{video_id}`")))
}

fn identity_lexicon(languages: &[String], terms: &[&str]) -> MultilingualLexicon {
    let mut lex = MultilingualLexicon::new();
    for l in languages {
        for t in terms {
            lex.insert(l, t, t);
        }
    }
    lex
}

/// Embedding tables for every configured language.
pub fn load_language_tables(config: &PipelineConfig) -> Result<HashMap<String, EmbeddingTable>> {
    config
        .languages
        .iter()
        .map(|l| {
            let p = config
                .paths
                .embeddings
                .get(l)
                .ok_or_else(|| Error::Config(format!("paths.embeddings has no file for `{l}`")))?;
            Ok((l.clone(), io::load_embeddings(p, l)?))
        })
        .collect()
}
