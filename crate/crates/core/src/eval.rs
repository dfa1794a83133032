//! Localization and classification metrics.
//!
//! AP is the non-interpolated mean of precision at each true positive,
//! divided by the number of ground-truth instances. AUC is the area under
//! the TPR/FPR curve traced by walking the ranked list, with FPR
//! normalized by the total number of false positives.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::linker::ActionTube;
use crate::model::GroundTruthTube;

/// Anything with a box in some frames of one video.
pub trait FrameTrack {
    fn video_id(&self) -> &str;
    fn frame_indices(&self) -> Vec<u32>;
    fn box_at(&self, frame_index: u32) -> Option<BoundingBox>;
}

impl FrameTrack for ActionTube {
    fn video_id(&self) -> &str {
        &self.video_id
    }

    fn frame_indices(&self) -> Vec<u32> {
        self.elements.iter().map(|e| e.frame_index).collect()
    }

    fn box_at(&self, frame_index: u32) -> Option<BoundingBox> {
        ActionTube::box_at(self, frame_index).copied()
    }
}

impl FrameTrack for GroundTruthTube {
    fn video_id(&self) -> &str {
        &self.video_id
    }

    fn frame_indices(&self) -> Vec<u32> {
        self.boxes.keys().copied().collect()
    }

    fn box_at(&self, frame_index: u32) -> Option<BoundingBox> {
        self.boxes.get(&frame_index).copied()
    }
}

/// Mean per-frame iou over the union of both tracks' frames; frames where
/// only one track is present count as 0.
pub fn st_iou<A: FrameTrack + ?Sized, B: FrameTrack + ?Sized>(a: &A, b: &B) -> Result<f64> {
    if a.video_id() != b.video_id() {
        return Err(Error::DifferentVideos(a.video_id().into(), b.video_id().into()));
    }
    let union: BTreeSet<u32> = a.frame_indices().into_iter().chain(b.frame_indices()).collect();
    if union.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = union
        .iter()
        .map(|&f| match (a.box_at(f), b.box_at(f)) {
            (Some(x), Some(y)) => iou(&x, &y),
            _ => 0.0,
        })
        .sum();
    Ok(total / union.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTube {
    pub video_id: String,
    pub score: f64,
    /// Extraction order within the video, used as the last tie-breaker.
    pub order: usize,
    pub tube: ActionTube,
}

/// Tubes of one action sorted by descending score, then video id, then
/// extraction order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedDetectionList {
    pub entries: Vec<RankedTube>,
}

impl RankedDetectionList {
    pub fn new(mut entries: Vec<RankedTube>) -> Self {
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.video_id.cmp(&b.video_id))
                .then(a.order.cmp(&b.order))
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Walks the ranking and labels each tube true (TP) or false (FP). A TP
/// needs a positive video and an unclaimed ground truth there whose
/// st-iou, maximal among the unclaimed ones, reaches `tau`.
pub fn match_tubes(ranked: &RankedDetectionList, ground_truth: &[GroundTruthTube], tau: f64) -> Vec<bool> {
    let mut claimed = vec![false; ground_truth.len()];
    ranked
        .entries
        .iter()
        .map(|entry| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in ground_truth.iter().enumerate() {
                if claimed[g] || gt.video_id != entry.video_id {
                    continue;
                }
                let ov = st_iou(&entry.tube, gt).unwrap_or(0.0);
                if best.is_none_or(|(_, b)| ov > b) {
                    best = Some((g, ov));
                }
            }
            match best {
                Some((g, ov)) if ov >= tau => {
                    claimed[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// Non-interpolated AP; `None` when there is no ground truth.
pub fn average_precision(labels: &[bool], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (k, &is_tp) in labels.iter().enumerate() {
        if is_tp {
            tp += 1;
            sum += tp as f64 / (k + 1) as f64;
        }
    }
    Some(sum / num_gt as f64)
}

/// Area under the TPR/FPR curve of the ranked labels (trapezoidal rule).
/// Without false positives the curve collapses onto the final TPR.
pub fn roc_auc(labels: &[bool], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let total_fp = labels.iter().filter(|l| !**l).count();
    if total_fp == 0 {
        let tp = labels.iter().filter(|l| **l).count();
        return Some(tp as f64 / num_gt as f64);
    }
    // Each FP is a horizontal step whose trapezoid heights both equal the
    // current TPR; summing integer TP counts keeps the area exact.
    let mut tp = 0usize;
    let mut area = 0usize;
    for &is_tp in labels {
        if is_tp {
            tp += 1;
        } else {
            area += tp;
        }
    }
    Some(area as f64 / (num_gt as f64 * total_fp as f64))
}

/// Unweighted mean over the actions that have ground truth.
pub fn mean_of_present(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub overlap_thresholds: Vec<f64>,
    pub subset_runs: usize,
    pub rng_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            overlap_thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            subset_runs: 5,
            rng_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.overlap_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("overlap threshold {t} outside (0, 1]")));
        }
        if self.subset_runs == 0 {
            return Err(Error::Config("subset_runs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMetrics {
    pub action: String,
    pub num_gt: usize,
    pub ap: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub map: Option<f64>,
    pub auc: Option<f64>,
    pub per_action: Vec<ActionMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub thresholds: Vec<ThresholdMetrics>,
}

/// AP and AUC per action and threshold. `ranked[a]` holds the ranking of
/// action `a`; ground truth is filtered per action.
pub fn evaluate_localization(
    ranked: &[RankedDetectionList],
    ground_truth: &[GroundTruthTube],
    action_names: &[String],
    thresholds: &[f64],
) -> LocalizationReport {
    let per_action_gt: Vec<Vec<GroundTruthTube>> = (0..ranked.len())
        .map(|a| ground_truth.iter().filter(|g| g.action_id == a).cloned().collect())
        .collect();
    let thresholds = thresholds
        .iter()
        .map(|&tau| {
            let per_action: Vec<ActionMetrics> = ranked
                .par_iter()
                .enumerate()
                .map(|(a, list)| {
                    let gts = &per_action_gt[a];
                    let labels = match_tubes(list, gts, tau);
                    ActionMetrics {
                        action: action_names.get(a).cloned().unwrap_or_else(|| a.to_string()),
                        num_gt: gts.len(),
                        ap: average_precision(&labels, gts.len()),
                        auc: roc_auc(&labels, gts.len()),
                    }
                })
                .collect();
            let aps: Vec<Option<f64>> = per_action.iter().map(|m| m.ap).collect();
            let aucs: Vec<Option<f64>> = per_action.iter().map(|m| m.auc).collect();
            ThresholdMetrics {
                threshold: tau,
                map: mean_of_present(&aps),
                auc: mean_of_present(&aucs),
                per_action,
            }
        })
        .collect();
    LocalizationReport { thresholds }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub video_id: String,
    pub frame_index: u32,
    pub action_id: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameGroundTruth {
    pub video_id: String,
    pub frame_index: u32,
    pub action_id: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// Keyframe AP for one action: same claim rule as tubes, plain box iou.
pub fn frame_ap(
    predictions: &[FramePrediction],
    ground_truth: &[FrameGroundTruth],
    action_id: usize,
    tau: f64,
) -> Option<f64> {
    let mut preds: Vec<&FramePrediction> = predictions.iter().filter(|p| p.action_id == action_id).collect();
    preds.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.video_id.cmp(&b.video_id))
            .then(a.frame_index.cmp(&b.frame_index))
    });
    let gts: Vec<&FrameGroundTruth> = ground_truth.iter().filter(|g| g.action_id == action_id).collect();
    let mut claimed = vec![false; gts.len()];
    let labels: Vec<bool> = preds
        .iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if claimed[g] || gt.video_id != p.video_id || gt.frame_index != p.frame_index {
                    continue;
                }
                let ov = iou(&p.bbox, &gt.bbox);
                if best.is_none_or(|(_, b)| ov > b) {
                    best = Some((g, ov));
                }
            }
            match best {
                Some((g, ov)) if ov >= tau => {
                    claimed[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect();
    average_precision(&labels, gts.len())
}

/// Fraction of predictions equal to their label.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

/// Draws `n` of `num_actions` action ids without replacement for run `run`.
/// Each run has its own ChaCha stream, so draws do not depend on
/// evaluation order.
pub fn sample_actions(num_actions: usize, n: usize, seed: u64, run: usize) -> Result<Vec<usize>> {
    if n > num_actions || n == 0 {
        return Err(Error::SubsetTooLarge { n, len: num_actions });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    let mut picked = rand::seq::index::sample(&mut rng, num_actions, n).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Mean and population standard deviation of `evaluate` over `runs`
/// random action subsets of size `n`.
pub fn subset_eval<F>(num_actions: usize, n: usize, runs: usize, seed: u64, evaluate: F) -> Result<(f64, f64)>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if runs == 0 {
        return Err(Error::Config("subset evaluation needs at least one run".into()));
    }
    let values = (0..runs)
        .into_par_iter()
        .map(|r| evaluate(&sample_actions(num_actions, n, seed, r)?))
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / runs as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / runs as f64;
    Ok((mean, var.sqrt()))
}

/// Accuracy of argmax classification restricted to `subset`: only videos
/// labelled with a subset action count, and predictions range over the
/// subset. `scores[v][a]` is the score of action `a` for video `v`.
pub fn subset_accuracy(scores: &[Vec<f64>], labels: &[usize], subset: &[usize]) -> f64 {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for (row, &label) in scores.iter().zip(labels) {
        if !subset.contains(&label) {
            continue;
        }
        let mut best = subset[0];
        for &a in subset {
            if row[a] > row[best] {
                best = a;
            }
        }
        preds.push(best);
        truth.push(label);
    }
    accuracy(&preds, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::TubeElement;
    use std::collections::BTreeMap;

    fn b(x: f64) -> BoundingBox {
        BoundingBox::new(x, 0.0, x + 10.0, 10.0)
    }

    fn tube(video: &str, frames: std::ops::RangeInclusive<u32>, x: f64) -> ActionTube {
        let elements = frames
            .map(|f| TubeElement {
                frame_index: f,
                box_index: 0,
                bbox: b(x),
                score: 1.0,
            })
            .collect();
        ActionTube::new(video, Some(0), elements).unwrap()
    }

    fn gt(video: &str, action: usize, frames: std::ops::RangeInclusive<u32>, x: f64) -> GroundTruthTube {
        GroundTruthTube {
            video_id: video.into(),
            action_id: action,
            boxes: frames.map(|f| (f, b(x))).collect::<BTreeMap<_, _>>(),
        }
    }

    fn ranked(tubes: Vec<(ActionTube, f64)>) -> RankedDetectionList {
        RankedDetectionList::new(
            tubes
                .into_iter()
                .enumerate()
                .map(|(i, (t, s))| RankedTube {
                    video_id: t.video_id.clone(),
                    score: s,
                    order: i,
                    tube: t,
                })
                .collect(),
        )
    }

    #[test]
    fn st_iou_examples() {
        assert_eq!(st_iou(&tube("v", 0..=4, 0.0), &gt("v", 0, 0..=4, 0.0)).unwrap(), 1.0);
        assert_eq!(st_iou(&tube("v", 0..=4, 0.0), &gt("v", 0, 5..=8, 0.0)).unwrap(), 0.0);
        // Frames 1-4 vs 3-6 with iou 0.5 where both exist: shift of 10/3 px.
        let shift = 10.0 / 3.0;
        let per_frame = iou(&b(0.0), &b(shift));
        assert!((per_frame - 0.5).abs() < 1e-12);
        let v = st_iou(&tube("v", 1..=4, 0.0), &gt("v", 0, 3..=6, shift)).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-9);
        assert!(matches!(
            st_iou(&tube("v", 1..=4, 0.0), &gt("w", 0, 3..=6, 0.0)),
            Err(Error::DifferentVideos(_, _))
        ));
        // Symmetric.
        let t = tube("v", 1..=4, 0.0);
        let g = gt("v", 0, 3..=6, shift);
        assert_eq!(st_iou(&t, &g).unwrap(), st_iou(&g, &t).unwrap());
    }

    #[test]
    fn matching_claim_rule_and_positive_video() {
        let g = vec![gt("v", 0, 0..=4, 0.0)];
        assert_eq!(match_tubes(&ranked(vec![(tube("v", 0..=4, 0.0), 1.0)]), &g, 0.5), vec![true]);
        let double = ranked(vec![(tube("v", 0..=4, 0.0), 2.0), (tube("v", 0..=4, 1.0), 1.0)]);
        assert_eq!(match_tubes(&double, &g, 0.5), vec![true, false]);
        // Geometry matches, but the video holds no instance of this action.
        let other = vec![gt("w", 0, 0..=4, 0.0)];
        assert_eq!(match_tubes(&ranked(vec![(tube("v", 0..=4, 0.0), 1.0)]), &other, 0.1), vec![false]);
    }

    #[test]
    fn ranking_order() {
        let r = ranked(vec![
            (tube("b", 0..=1, 0.0), 1.0),
            (tube("a", 0..=1, 0.0), 1.0),
            (tube("c", 0..=1, 0.0), 3.0),
        ]);
        let ids: Vec<&str> = r.entries.iter().map(|e| e.video_id.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true], 1), Some(1.0));
        let ap = average_precision(&[true, false, true], 2).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((ap - 0.83333).abs() < 1e-5);
        assert_eq!(average_precision(&[false, false], 3), Some(0.0));
        assert_eq!(average_precision(&[true], 0), None);
    }

    /// Builds the ROC polyline explicitly and integrates it with the
    /// trapezoidal rule.
    fn roc_oracle(labels: &[bool], num_gt: usize) -> f64 {
        let fp_total = labels.iter().filter(|l| !**l).count() as f64;
        let mut pts = vec![(0.0, 0.0)];
        let (mut tp, mut fp) = (0.0, 0.0);
        for &l in labels {
            if l {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            pts.push((fp / fp_total, tp / num_gt as f64));
        }
        pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[true, true, false, false], 2), Some(1.0));
        assert_eq!(roc_auc(&[false, true], 1), Some(roc_oracle(&[false, true], 1)));
        assert_eq!(roc_auc(&[false, true], 1), Some(0.0));
        let l = [true, false, true, false, false, true, false];
        assert!((roc_auc(&l, 4).unwrap() - roc_oracle(&l, 4)).abs() < 1e-12);
        assert_eq!(roc_auc(&[true], 2), Some(0.5));
        assert_eq!(roc_auc(&[], 0), None);
    }

    #[test]
    fn mean_skips_absent() {
        assert_eq!(mean_of_present(&[Some(0.5)]), Some(0.5));
        assert_eq!(mean_of_present(&[Some(0.5), None, Some(1.0)]), Some(0.75));
        assert_eq!(mean_of_present(&[None]), None);
    }

    #[test]
    fn frame_ap_mirrors_tube_ap() {
        let p = |v: &str, s: f64, x: f64| FramePrediction {
            video_id: v.into(),
            frame_index: 7,
            action_id: 0,
            bbox: b(x),
            score: s,
        };
        let g = |v: &str| FrameGroundTruth {
            video_id: v.into(),
            frame_index: 7,
            action_id: 0,
            bbox: b(0.0),
        };
        assert_eq!(frame_ap(&[p("v", 1.0, 0.0)], &[g("v")], 0, 0.5), Some(1.0));
        let ap = frame_ap(
            &[p("v", 0.9, 0.0), p("w", 0.8, 50.0), p("w", 0.7, 0.0)],
            &[g("v"), g("w")],
            0,
            0.5,
        )
        .unwrap();
        assert!((ap - 0.83333).abs() < 1e-5);
        assert_eq!(frame_ap(&[p("v", 0.9, 50.0)], &[g("v")], 0, 0.5), Some(0.0));
        assert_eq!(frame_ap(&[p("v", 0.9, 0.0)], &[], 0, 0.5), None);
    }

    #[test]
    fn accuracy_and_subsets() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(accuracy(&[1, 0], &[1, 2]), 0.5);
        assert!(sample_actions(3, 4, 0, 0).is_err());
        let s = sample_actions(10, 4, 9, 2).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s, sample_actions(10, 4, 9, 2).unwrap());

        let scores = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.1, 0.7], vec![0.3, 0.6, 0.1]];
        let labels = vec![0, 2, 0];
        let eval = |sub: &[usize]| Ok(subset_accuracy(&scores, &labels, sub));
        let (mean, std) = subset_eval(3, 3, 5, 1, eval).unwrap();
        assert!((mean - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(std, 0.0);
        let a = subset_eval(3, 2, 5, 42, eval).unwrap();
        let b = subset_eval(3, 2, 5, 42, eval).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_eq!(subset_accuracy(&scores, &labels, &[0, 1]), 0.5);
    }

    #[test]
    fn perfect_localization_report() {
        let g = vec![gt("v", 0, 0..=4, 0.0), gt("w", 1, 0..=4, 0.0)];
        let lists = vec![
            ranked(vec![(tube("v", 0..=4, 0.0), 2.0), (tube("w", 0..=4, 0.0), 1.0)]),
            ranked(vec![(tube("w", 0..=4, 0.0), 2.0)]),
            ranked(vec![(tube("w", 0..=4, 0.0), 2.0)]),
        ];
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let r = evaluate_localization(&lists, &g, &names, &[0.5]);
        assert_eq!(r.thresholds[0].map, Some(1.0));
        assert_eq!(r.thresholds[0].auc, Some(1.0));
        assert_eq!(r.thresholds[0].per_action[2].ap, None);
    }

    #[test]
    fn auc_can_rise_when_a_trailing_tp_is_demoted() {
        // FPR is normalized by the total FP count, so AUC is not monotone
        // in the overlap threshold even though AP is.
        let low = [false, false, false, true, true, true];
        let high = [false, false, false, true, true, false];
        assert_eq!(roc_auc(&low, 6), Some(0.0));
        assert!((roc_auc(&high, 6).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(average_precision(&high, 6) < average_precision(&low, 6));
    }

    #[test]
    fn map_non_increasing_in_threshold() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let videos = ["a", "b", "c"];
            let mut gts = Vec::new();
            for v in videos {
                for _ in 0..rng.random_range(0..3) {
                    let s = rng.random_range(0..5);
                    gts.push(gt(v, 0, s..=s + rng.random_range(0..6), rng.random_range(0.0..20.0)));
                }
            }
            let tubes: Vec<(ActionTube, f64)> = (0..rng.random_range(1..8))
                .map(|_| {
                    let v = videos[rng.random_range(0..3)];
                    let s = rng.random_range(0..5);
                    (
                        tube(v, s..=s + rng.random_range(0..6), rng.random_range(0.0..20.0)),
                        rng.random_range(0.0..1.0),
                    )
                })
                .collect();
            let list = vec![ranked(tubes)];
            let r = evaluate_localization(&list, &gts, &["x".into()], &EvalConfig::default().overlap_thresholds);
            for w in r.thresholds.windows(2) {
                if let (Some(a), Some(b)) = (w[0].map, w[1].map) {
                    assert!(b <= a + 1e-12, "{a} -> {b}");
                }
            }
        }
    }
}
