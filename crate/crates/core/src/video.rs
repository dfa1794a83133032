//! Video-level scoring from global object probabilities and its fusion
//! with tube scores for localization and classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantic::RankedObject;

/// Per-video probabilities over the global object vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalObjectScores {
    pub video_id: String,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub use_local: bool,
    pub use_global: bool,
    pub global_k: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            use_local: true,
            use_global: true,
            global_k: 100,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.use_local && !self.use_global {
            return Err(Error::Config("at least one of use_local/use_global must be set".into()));
        }
        if self.global_k == 0 {
            return Err(Error::Config("global_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sum over the selected objects of weight times probability.
pub fn video_score(scores: &GlobalObjectScores, weights: &[RankedObject], vocabulary_len: usize) -> Result<f64> {
    if scores.probabilities.len() != vocabulary_len {
        return Err(Error::VocabularyMismatch {
            expected: vocabulary_len,
            found: scores.probabilities.len(),
        });
    }
    weights
        .iter()
        .map(|w| {
            scores
                .probabilities
                .get(w.object_id)
                .map(|p| w.weight * p)
                .ok_or(Error::VocabularyMismatch {
                    expected: vocabulary_len,
                    found: w.object_id + 1,
                })
        })
        .sum()
}

/// Localization score of a tube: tube score plus (optionally) video score.
pub fn fuse_tube(tube_score: f64, video_score: f64, config: &FusionConfig) -> Result<f64> {
    if !config.use_local {
        return Err(Error::LocalPriorsRequired);
    }
    Ok(if config.use_global {
        tube_score + video_score
    } else {
        tube_score
    })
}

/// Per-action classification scores: best tube score (0 when the action
/// has no tube or local priors are off) plus video score (when on).
pub fn class_scores(best_tube: &[Option<f64>], video_scores: &[f64], config: &FusionConfig) -> Result<Vec<f64>> {
    if config.use_global && video_scores.len() != best_tube.len() {
        return Err(Error::VocabularyMismatch {
            expected: best_tube.len(),
            found: video_scores.len(),
        });
    }
    Ok((0..best_tube.len())
        .map(|a| {
            let local = if config.use_local { best_tube[a].unwrap_or(0.0) } else { 0.0 };
            let global = if config.use_global { video_scores[a] } else { 0.0 };
            local + global
        })
        .collect())
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn classify(best_tube: &[Option<f64>], video_scores: &[f64], config: &FusionConfig) -> Result<usize> {
    let scores = class_scores(best_tube, video_scores, config)?;
    argmax(&scores).ok_or_else(|| Error::Config("no actions to classify".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ro(object_id: usize, weight: f64) -> RankedObject {
        RankedObject { object_id, weight }
    }

    fn scores(p: Vec<f64>) -> GlobalObjectScores {
        GlobalObjectScores {
            video_id: "v".into(),
            probabilities: p,
        }
    }

    #[test]
    fn video_score_examples() {
        let v = scores(vec![0.0, 0.0, 1.0]);
        assert_eq!(video_score(&v, &[ro(0, 0.9), ro(1, 0.3)], 3).unwrap(), 0.0);
        let v = scores(vec![0.4, 0.6]);
        assert!((video_score(&v, &[ro(0, 0.5)], 2).unwrap() - 0.2).abs() < 1e-15);
        let v = scores(vec![0.1, 0.5, 0.4]);
        assert!((video_score(&v, &[ro(0, 0.9), ro(1, 0.6)], 3).unwrap() - 0.39).abs() < 1e-12);
        assert!(matches!(video_score(&v, &[ro(0, 0.9)], 4), Err(Error::VocabularyMismatch { .. })));
        assert!(video_score(&v, &[ro(5, 0.9)], 3).is_err());
    }

    #[test]
    fn fusion_examples() {
        let cfg = FusionConfig::default();
        assert_eq!(fuse_tube(0.5, 0.0, &cfg).unwrap(), 0.5);
        assert!((fuse_tube(0.5, 0.39, &cfg).unwrap() - 0.89).abs() < 1e-15);
        let local_only = FusionConfig { use_global: false, ..cfg };
        assert_eq!(fuse_tube(0.5, 0.39, &local_only).unwrap(), 0.5);
        let global_only = FusionConfig { use_local: false, ..cfg };
        assert!(matches!(fuse_tube(0.5, 0.39, &global_only), Err(Error::LocalPriorsRequired)));
        assert!(FusionConfig { use_local: false, use_global: false, global_k: 3 }.validate().is_err());
    }

    #[test]
    fn classify_examples() {
        let cfg = FusionConfig::default();
        assert_eq!(classify(&[Some(0.3)], &[0.1], &cfg).unwrap(), 0);
        let global_only = FusionConfig { use_local: false, ..cfg };
        assert_eq!(classify(&[Some(5.0), None], &[0.2, 0.7], &global_only).unwrap(), 1);
        // An action without tubes still competes on video evidence.
        assert_eq!(classify(&[Some(0.1), None], &[0.0, 0.5], &cfg).unwrap(), 1);
        assert_eq!(classify(&[Some(1.0), Some(1.0)], &[0.0, 0.0], &cfg).unwrap(), 0);
        let local_only = FusionConfig { use_global: false, ..cfg };
        assert_eq!(classify(&[Some(1.0), Some(2.0)], &[], &local_only).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn classify_ignores_per_video_offset(
            tubes in proptest::collection::vec(proptest::option::of(0.0..3.0f64), 1..8),
            shift in -5.0..5.0f64,
            seed in proptest::collection::vec(0.0..1.0f64, 8),
        ) {
            let cfg = FusionConfig::default();
            let video: Vec<f64> = seed[..tubes.len()].to_vec();
            let base = class_scores(&tubes, &video, &cfg).unwrap();
            let shifted: Vec<f64> = base.iter().map(|s| s + shift).collect();
            // Shifting can only merge near-ties; compare against argmax of the shifted vector.
            let a = argmax(&base).unwrap();
            let b = argmax(&shifted).unwrap();
            prop_assert!(a == b || (shifted[a] - shifted[b]).abs() < 1e-12);
        }

        #[test]
        fn video_score_is_linear(
            p in proptest::collection::vec(0.0..1.0f64, 6),
            q in proptest::collection::vec(0.0..1.0f64, 6),
            w in proptest::collection::vec(-1.0..1.0f64, 3),
        ) {
            let weights = [ro(0, w[0]), ro(3, w[1]), ro(5, w[2])];
            let sum: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
            let lhs = video_score(&scores(sum), &weights, 6).unwrap();
            let rhs = video_score(&scores(p), &weights, 6).unwrap() + video_score(&scores(q), &weights, 6).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
