//! Detections, vocabularies and ground truth shared by every stage.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const PERSON: &str = "person";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: usize,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

impl Detection {
    pub fn new(class_id: usize, score: f64, bbox: BoundingBox) -> Self {
        Self {
            class_id,
            score,
            bbox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u32,
    pub persons: Vec<Detection>,
    pub objects: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoDetections {
    pub video_id: String,
    pub sampled_fps: f64,
    pub frames: Vec<FrameDetections>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabularyKind {
    LocalObject,
    GlobalObject,
    Action,
}

impl VocabularyKind {
    pub fn label(self) -> &'static str {
        match self {
            VocabularyKind::LocalObject => "local object",
            VocabularyKind::GlobalObject => "global object",
            VocabularyKind::Action => "action",
        }
    }
}

/// An ordered list of canonical terms; a term's position is its id.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    kind: VocabularyKind,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(kind: VocabularyKind, names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.trim().is_empty() {
                return Err(Error::Config(format!("{} vocabulary has an empty term", kind.label())));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!(
                    "{} vocabulary lists `{n}` twice",
                    kind.label()
                )));
            }
        }
        if kind == VocabularyKind::LocalObject && !index.contains_key(PERSON) {
            return Err(Error::Config("local object vocabulary must contain `person`".into()));
        }
        Ok(Self { kind, names, index })
    }

    pub fn kind(&self) -> VocabularyKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn person_id(&self) -> Option<usize> {
        self.id(PERSON)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTube {
    pub video_id: String,
    pub action_id: usize,
    pub boxes: BTreeMap<u32, BoundingBox>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_ids_follow_order() {
        let v = Vocabulary::new(VocabularyKind::LocalObject, ["person", "horse", "kite"]).unwrap();
        assert_eq!(v.id("horse"), Some(1));
        assert_eq!(v.name(2), "kite");
        assert_eq!(v.person_id(), Some(0));
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_missing_person() {
        assert!(Vocabulary::new(VocabularyKind::Action, ["a", "a"]).is_err());
        assert!(Vocabulary::new(VocabularyKind::LocalObject, ["horse"]).is_err());
        assert!(Vocabulary::new(VocabularyKind::GlobalObject, ["horse"]).is_ok());
    }
}
