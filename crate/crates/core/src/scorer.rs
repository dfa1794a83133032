//! Per-frame scoring of person boxes for an action (person, nearby
//! object and spatial relation evidence) and for retrieval queries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{edge_gap, BoundingBox};
use crate::model::{Detection, FrameDetections, VideoDetections};
use crate::semantic::RankedObject;
use crate::spatial::{query_match, spatial_match, SpatialDistribution, SpatialPriorTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    /// Maximum edge gap in pixels for an object to count as near a person.
    pub neighborhood_px: f64,
    /// Local objects selected per action.
    pub local_k: usize,
    /// Off reproduces the person-only ablation.
    pub use_objects: bool,
    /// Off sets the spatial match to 1 (objects without prepositions).
    pub use_spatial_relations: bool,
    /// Spatial match used for objects absent from the prior table.
    pub spatial_fallback: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            neighborhood_px: 25.0,
            local_k: 5,
            use_objects: true,
            use_spatial_relations: true,
            spatial_fallback: 1.0,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood_px.is_nan() || self.neighborhood_px < 0.0 {
            return Err(Error::Config("neighborhood_px must be nonnegative".into()));
        }
        if self.local_k == 0 {
            return Err(Error::Config("local_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.spatial_fallback) {
            return Err(Error::Config("spatial_fallback must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub frame_index: u32,
    /// Position of the person detection within its frame.
    pub box_index: usize,
    pub detection: Detection,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFrame {
    pub frame_index: u32,
    pub boxes: Vec<ScoredBox>,
}

/// Object detections of class `object_id` within `radius` pixels of `b`.
pub fn neighborhood<'a>(
    frame: &'a FrameDetections,
    b: &BoundingBox,
    object_id: usize,
    radius: f64,
) -> Vec<&'a Detection> {
    frame
        .objects
        .iter()
        .filter(|d| d.class_id == object_id && edge_gap(&d.bbox, b) <= radius)
        .collect()
}

/// Score of one person box for an action whose local objects (with their
/// semantic weights) are `selected`.
pub fn score_box(
    person: &Detection,
    box_index: usize,
    frame: &FrameDetections,
    selected: &[RankedObject],
    priors: Option<&SpatialPriorTable>,
    config: &ScorerConfig,
) -> Result<ScoredBox> {
    let mut score = person.score;
    if config.use_objects {
        for obj in selected {
            let mut best: Option<f64> = None;
            for d in neighborhood(frame, &person.bbox, obj.object_id, config.neighborhood_px) {
                let phi = if !config.use_spatial_relations {
                    1.0
                } else {
                    match priors {
                        Some(table) if table.get(obj.object_id).is_some() => {
                            spatial_match(&person.bbox, &d.bbox, obj.object_id, table)?
                        }
                        _ => config.spatial_fallback,
                    }
                };
                let v = d.score * phi;
                best = Some(best.map_or(v, |b| b.max(v)));
            }
            if let Some(b) = best {
                score += obj.weight * b;
            }
        }
    }
    Ok(ScoredBox {
        frame_index: frame.frame_index,
        box_index,
        detection: *person,
        score,
    })
}

/// A user query: an object class, a desired preposition distribution and
/// optionally a desired object/person area ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub object_id: usize,
    pub relation: SpatialDistribution,
    pub size_ratio: Option<f64>,
}

/// `max(0, 1 - |area(object)/area(person) - s|)`.
pub fn size_term(person: &BoundingBox, object: &BoundingBox, s: f64) -> Result<f64> {
    person.require_positive_area()?;
    let ratio = object.area() / person.area();
    Ok((1.0 - (ratio - s).abs()).max(0.0))
}

pub fn score_box_query(
    person: &Detection,
    box_index: usize,
    frame: &FrameDetections,
    query: &RetrievalQuery,
    config: &ScorerConfig,
) -> Result<ScoredBox> {
    if let Some(s) = query.size_ratio {
        if s.is_nan() || s < 0.0 {
            return Err(Error::Config(format!("size ratio {s} must be nonnegative")));
        }
        person.bbox.require_positive_area()?;
    }
    let mut best: Option<f64> = None;
    for d in neighborhood(frame, &person.bbox, query.object_id, config.neighborhood_px) {
        let phi = query_match(&person.bbox, &d.bbox, &query.relation)?;
        let size = match query.size_ratio {
            Some(s) => size_term(&person.bbox, &d.bbox, s)?,
            None => 1.0,
        };
        let v = d.score * phi * size;
        best = Some(best.map_or(v, |b| b.max(v)));
    }
    Ok(ScoredBox {
        frame_index: frame.frame_index,
        box_index,
        detection: *person,
        score: person.score + best.unwrap_or(0.0),
    })
}

/// Scores every person box of every frame for one action.
pub fn score_video(
    video: &VideoDetections,
    selected: &[RankedObject],
    priors: Option<&SpatialPriorTable>,
    config: &ScorerConfig,
) -> Result<Vec<ScoredFrame>> {
    video
        .frames
        .par_iter()
        .map(|frame| {
            let boxes = frame
                .persons
                .iter()
                .enumerate()
                .map(|(i, p)| score_box(p, i, frame, selected, priors, config))
                .collect::<Result<_>>()?;
            Ok(ScoredFrame {
                frame_index: frame.frame_index,
                boxes,
            })
        })
        .collect()
}

/// Scores every person box of every frame against a retrieval query.
pub fn score_video_query(
    video: &VideoDetections,
    query: &RetrievalQuery,
    config: &ScorerConfig,
) -> Result<Vec<ScoredFrame>> {
    video
        .frames
        .par_iter()
        .map(|frame| {
            let boxes = frame
                .persons
                .iter()
                .enumerate()
                .map(|(i, p)| score_box_query(p, i, frame, query, config))
                .collect::<Result<_>>()?;
            Ok(ScoredFrame {
                frame_index: frame.frame_index,
                boxes,
            })
        })
        .collect()
}
