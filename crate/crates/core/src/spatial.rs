//! Spatial preposition priors: 3x3 quantization of an object box around a
//! person box, prior tables aggregated from annotated images, and the
//! Jensen-Shannon match between observed and expected relations.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const GRID_CELLS: usize = 9;

const SUM_TOLERANCE: f64 = 1e-6;

/// Cells of the preposition grid, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preposition {
    AboveLeft,
    Above,
    AboveRight,
    Left,
    On,
    Right,
    BelowLeft,
    Below,
    BelowRight,
}

impl Preposition {
    pub const ALL: [Preposition; GRID_CELLS] = [
        Preposition::AboveLeft,
        Preposition::Above,
        Preposition::AboveRight,
        Preposition::Left,
        Preposition::On,
        Preposition::Right,
        Preposition::BelowLeft,
        Preposition::Below,
        Preposition::BelowRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Preposition::AboveLeft => "above-left",
            Preposition::Above => "above",
            Preposition::AboveRight => "above-right",
            Preposition::Left => "left",
            Preposition::On => "on",
            Preposition::Right => "right",
            Preposition::BelowLeft => "below-left",
            Preposition::Below => "below",
            Preposition::BelowRight => "below-right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        Self::ALL.into_iter().find(|p| p.name() == norm)
    }
}

impl fmt::Display for Preposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nine nonnegative weights over [`Preposition::ALL`] summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpatialDistribution([f64; GRID_CELLS]);

impl TryFrom<Vec<f64>> for SpatialDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; GRID_CELLS] = v.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidDistribution(format!("expected {GRID_CELLS} weights, got {}", v.len()))
        })?;
        Self::new(arr)
    }
}

impl From<SpatialDistribution> for Vec<f64> {
    fn from(d: SpatialDistribution) -> Self {
        d.0.to_vec()
    }
}

impl SpatialDistribution {
    pub fn new(weights: [f64; GRID_CELLS]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {w} is not a nonnegative number")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Ok(Self(weights))
    }

    /// Normalizes nonnegative masses to a distribution.
    pub fn from_masses(masses: [f64; GRID_CELLS]) -> Result<Self> {
        let sum: f64 = masses.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::InvalidDistribution(format!("masses sum to {sum}")));
        }
        Self::new(masses.map(|m| m / sum))
    }

    pub fn one_hot(cell: Preposition) -> Self {
        let mut w = [0.0; GRID_CELLS];
        w[cell.index()] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64; GRID_CELLS] {
        &self.0
    }

    pub fn weight(&self, cell: Preposition) -> f64 {
        self.0[cell.index()]
    }
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

fn band(v: f64, lo: f64, hi: f64) -> usize {
    if v < lo {
        0
    } else if v > hi {
        2
    } else {
        1
    }
}

/// Distribution of `object`'s area over the 3x3 grid whose center cell is
/// exactly `person`. Zero-area objects land one-hot on the cell holding
/// their center.
pub fn quantize_relation(person: &BoundingBox, object: &BoundingBox) -> Result<SpatialDistribution> {
    person.require_positive_area()?;
    let area = object.area();
    if area.is_nan() || area <= 0.0 {
        let (cx, cy) = object.center();
        let cell = band(cy, person.y1, person.y2) * 3 + band(cx, person.x1, person.x2);
        return Ok(SpatialDistribution::one_hot(Preposition::ALL[cell]));
    }
    let cols = [
        overlap(f64::NEG_INFINITY, person.x1, object.x1, object.x2),
        overlap(person.x1, person.x2, object.x1, object.x2),
        overlap(person.x2, f64::INFINITY, object.x1, object.x2),
    ];
    let rows = [
        overlap(f64::NEG_INFINITY, person.y1, object.y1, object.y2),
        overlap(person.y1, person.y2, object.y1, object.y2),
        overlap(person.y2, f64::INFINITY, object.y1, object.y2),
    ];
    let mut masses = [0.0; GRID_CELLS];
    for (r, h) in rows.iter().enumerate() {
        for (c, w) in cols.iter().enumerate() {
            masses[r * 3 + c] = h * w;
        }
    }
    SpatialDistribution::from_masses(masses)
}

/// Jensen-Shannon divergence in bits, in [0, 1].
pub fn jsd2(p: &SpatialDistribution, q: &SpatialDistribution) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.0.iter().zip(q.0.iter()) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += a * (a / m).log2();
        }
        if b > 0.0 {
            total += b * (b / m).log2();
        }
    }
    (0.5 * total).clamp(0.0, 1.0)
}

/// An aggregated person-object relation for one object class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialPrior {
    pub weights: SpatialDistribution,
    pub pairs: u64,
}

/// Expected person-object relations keyed by local object id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpatialPriorTable {
    entries: BTreeMap<usize, SpatialPrior>,
}

impl SpatialPriorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, object_id: usize, prior: SpatialPrior) -> Result<()> {
        if prior.pairs == 0 {
            return Err(Error::InvalidDistribution(format!(
                "prior for object #{object_id} aggregates zero pairs"
            )));
        }
        self.entries.insert(object_id, prior);
        Ok(())
    }

    pub fn get(&self, object_id: usize) -> Option<&SpatialPrior> {
        self.entries.get(&object_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &SpatialPrior)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One annotated image: person boxes and labelled object boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationImage {
    pub image_id: String,
    pub person_boxes: Vec<BoundingBox>,
    pub object_boxes: Vec<(usize, BoundingBox)>,
}

/// Averages the relation of every co-occurring person-object pair per
/// object class. Pairs are summed in a canonical order, so the table does
/// not depend on corpus order.
pub fn build_prior_table(corpus: &[AnnotationImage]) -> SpatialPriorTable {
    let mut pairs: Vec<(usize, [f64; GRID_CELLS])> = corpus
        .par_iter()
        .flat_map_iter(|img| {
            let mut out = Vec::new();
            for person in &img.person_boxes {
                if person.area() <= 0.0 {
                    log::warn!("image {}: skipping degenerate person box", img.image_id);
                    continue;
                }
                for (id, obj) in &img.object_boxes {
                    if let Ok(d) = quantize_relation(person, obj) {
                        out.push((*id, d.0));
                    }
                }
            }
            out
        })
        .collect();

    pairs.par_sort_unstable_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            a.1.iter()
                .zip(b.1.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let mut table = SpatialPriorTable::new();
    for group in pairs.chunk_by(|a, b| a.0 == b.0) {
        let id = group[0].0;
        let mut sum = [0.0; GRID_CELLS];
        for (_, d) in group {
            for (s, v) in sum.iter_mut().zip(d) {
                *s += v;
            }
        }
        let n = group.len() as f64;
        let mean = sum.map(|s| s / n);
        let weights = SpatialDistribution::from_masses(mean).expect("mean of distributions");
        table.entries.insert(
            id,
            SpatialPrior {
                weights,
                pairs: group.len() as u64,
            },
        );
    }
    if table.is_empty() {
        log::warn!("annotation corpus has no person-object co-occurrences");
    }
    table
}

/// One minus the divergence between the observed relation and the prior
/// of `object_id`.
pub fn spatial_match(
    person: &BoundingBox,
    object: &BoundingBox,
    object_id: usize,
    table: &SpatialPriorTable,
) -> Result<f64> {
    let prior = table
        .get(object_id)
        .ok_or_else(|| Error::MissingPrior(format!("#{object_id}")))?;
    query_match(person, object, &prior.weights)
}

/// One minus the divergence between the observed relation and a
/// user-specified relation.
pub fn query_match(
    person: &BoundingBox,
    object: &BoundingBox,
    relation: &SpatialDistribution,
) -> Result<f64> {
    let observed = quantize_relation(person, object)?;
    Ok(1.0 - jsd2(&observed, relation))
}
