//! Linking scored person boxes into action tubes.
//!
//! A link joins boxes in consecutive sampled frames and is admissible when
//! their iou exceeds `min_link_iou` and their summed box scores reach
//! `min_link_score`. The best tube maximizes the summed link scores over
//! all admissible paths starting and ending anywhere; ties prefer longer
//! paths, then (for single boxes) the higher box score, then the earlier
//! start frame, then the lexicographically smallest box positions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::scorer::{ScoredBox, ScoredFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    pub min_link_iou: f64,
    pub min_link_score: f64,
    pub tubes_per_video: usize,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self {
            min_link_iou: 0.1,
            min_link_score: 1.0,
            tubes_per_video: 3,
        }
    }
}

impl LinkerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_link_iou) {
            return Err(Error::Config("min_link_iou must lie in [0, 1]".into()));
        }
        if self.tubes_per_video == 0 {
            return Err(Error::Config("tubes_per_video must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeElement {
    pub frame_index: u32,
    pub box_index: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTube {
    pub video_id: String,
    /// `None` for retrieval tubes.
    pub action_id: Option<usize>,
    pub elements: Vec<TubeElement>,
    pub tube_score: f64,
}

impl ActionTube {
    pub fn new(video_id: impl Into<String>, action_id: Option<usize>, elements: Vec<TubeElement>) -> Result<Self> {
        let tube_score = tube_score(&elements)?;
        Ok(Self {
            video_id: video_id.into(),
            action_id,
            elements,
            tube_score,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn box_at(&self, frame_index: u32) -> Option<&BoundingBox> {
        self.elements
            .binary_search_by_key(&frame_index, |e| e.frame_index)
            .ok()
            .map(|i| &self.elements[i].bbox)
    }
}

/// Mean box score of the tube.
pub fn tube_score(elements: &[TubeElement]) -> Result<f64> {
    if elements.is_empty() {
        return Err(Error::EmptyTube);
    }
    Ok(elements.iter().map(|e| e.score).sum::<f64>() / elements.len() as f64)
}

/// `s(b1) + s(b2) + iou(b1, b2)` for boxes in consecutive frames.
pub fn link_score(b1: &ScoredBox, b2: &ScoredBox) -> Result<f64> {
    if b1.frame_index.checked_add(1) != Some(b2.frame_index) {
        return Err(Error::NonConsecutiveFrames(b1.frame_index, b2.frame_index));
    }
    Ok(unchecked_link(b1, b2))
}

fn unchecked_link(b1: &ScoredBox, b2: &ScoredBox) -> f64 {
    b1.score + b2.score + iou(&b1.detection.bbox, &b2.detection.bbox)
}

pub fn admissible(b1: &ScoredBox, b2: &ScoredBox, config: &LinkerConfig) -> bool {
    iou(&b1.detection.bbox, &b2.detection.bbox) > config.min_link_iou
        && b1.score + b2.score >= config.min_link_score
}

/// A path through the frame list: one `(frame position, box position)`
/// per frame, consecutive, with its summed link score.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedPath {
    pub nodes: Vec<(usize, usize)>,
    pub total: f64,
}

#[derive(Clone, Copy)]
struct State {
    total: f64,
    len: usize,
    start: usize,
    prev: Option<usize>,
}

fn frames_adjacent(frames: &[ScoredFrame], t: usize) -> bool {
    t > 0 && frames[t - 1].frame_index.checked_add(1) == Some(frames[t].frame_index)
}

fn trace(states: &[Vec<Option<State>>], t: usize, j: usize) -> Vec<usize> {
    let mut out = vec![j];
    let (mut t, mut j) = (t, j);
    while let Some(p) = states[t][j].and_then(|s| s.prev) {
        t -= 1;
        j = p;
        out.push(j);
    }
    out.reverse();
    out
}

/// Orders candidate paths; `Greater` means `a` is preferred.
fn prefer(
    states: &[Vec<Option<State>>],
    frames: &[ScoredFrame],
    a: (State, usize, usize),
    b: (State, usize, usize),
) -> Ordering {
    let (sa, ta, ja) = a;
    let (sb, tb, jb) = b;
    sa.total
        .total_cmp(&sb.total)
        .then(sa.len.cmp(&sb.len))
        .then_with(|| {
            if sa.len == 1 && sb.len == 1 {
                frames[ta].boxes[ja].score.total_cmp(&frames[tb].boxes[jb].score)
            } else {
                Ordering::Equal
            }
        })
        .then(sb.start.cmp(&sa.start))
        .then_with(|| {
            let (pa, pb) = (trace_with(states, ta, ja, sa), trace_with(states, tb, jb, sb));
            pb.cmp(&pa)
        })
}

fn trace_with(states: &[Vec<Option<State>>], t: usize, j: usize, s: State) -> Vec<usize> {
    match s.prev {
        None => vec![j],
        Some(p) => {
            let mut v = trace(states, t - 1, p);
            v.push(j);
            v
        }
    }
}

fn best_path_masked(
    frames: &[ScoredFrame],
    active: &[Vec<bool>],
    config: &LinkerConfig,
) -> Option<LinkedPath> {
    let mut states: Vec<Vec<Option<State>>> = frames.iter().map(|f| vec![None; f.boxes.len()]).collect();
    let mut best: Option<(State, usize, usize)> = None;

    for t in 0..frames.len() {
        let linkable = frames_adjacent(frames, t);
        for j in 0..frames[t].boxes.len() {
            if !active[t][j] {
                continue;
            }
            let cur = &frames[t].boxes[j];
            let mut chosen = State {
                total: 0.0,
                len: 1,
                start: t,
                prev: None,
            };
            if linkable {
                for i in 0..frames[t - 1].boxes.len() {
                    let Some(ps) = states[t - 1][i] else { continue };
                    let prev = &frames[t - 1].boxes[i];
                    if !admissible(prev, cur, config) {
                        continue;
                    }
                    let cand = State {
                        total: ps.total + unchecked_link(prev, cur),
                        len: ps.len + 1,
                        start: ps.start,
                        prev: Some(i),
                    };
                    if prefer(&states, frames, (cand, t, j), (chosen, t, j)) == Ordering::Greater {
                        chosen = cand;
                    }
                }
            }
            states[t][j] = Some(chosen);
            let better = match best {
                None => true,
                Some(b) => prefer(&states, frames, (chosen, t, j), b) == Ordering::Greater,
            };
            if better {
                best = Some((chosen, t, j));
            }
        }
    }

    best.map(|(s, t, j)| {
        let boxes = trace(&states, t, j);
        let first = t + 1 - boxes.len();
        LinkedPath {
            nodes: boxes.into_iter().enumerate().map(|(k, b)| (first + k, b)).collect(),
            total: s.total,
        }
    })
}

/// The single best admissible path over all boxes.
pub fn best_path(frames: &[ScoredFrame], config: &LinkerConfig) -> Result<LinkedPath> {
    let active: Vec<Vec<bool>> = frames.iter().map(|f| vec![true; f.boxes.len()]).collect();
    best_path_masked(frames, &active, config).ok_or(Error::NoBoxes)
}

fn to_tube(
    video_id: &str,
    action_id: Option<usize>,
    frames: &[ScoredFrame],
    path: &LinkedPath,
) -> Result<ActionTube> {
    let elements = path
        .nodes
        .iter()
        .map(|&(t, j)| {
            let b = &frames[t].boxes[j];
            TubeElement {
                frame_index: b.frame_index,
                box_index: b.box_index,
                bbox: b.detection.bbox,
                score: b.score,
            }
        })
        .collect();
    ActionTube::new(video_id, action_id, elements)
}

/// Repeatedly extracts the best path and removes its boxes, up to
/// `tubes_per_video` tubes or until no boxes remain.
pub fn extract_tubes(
    video_id: &str,
    action_id: Option<usize>,
    frames: &[ScoredFrame],
    config: &LinkerConfig,
) -> Result<Vec<ActionTube>> {
    let mut active: Vec<Vec<bool>> = frames.iter().map(|f| vec![true; f.boxes.len()]).collect();
    let mut tubes = Vec::new();
    while tubes.len() < config.tubes_per_video {
        let Some(path) = best_path_masked(frames, &active, config) else {
            break;
        };
        for &(t, j) in &path.nodes {
            active[t][j] = false;
        }
        tubes.push(to_tube(video_id, action_id, frames, &path)?);
    }
    Ok(tubes)
}
