//! On-disk formats: loaders validate every record eagerly and report the
//! file and line or record path of the first violation.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::model::{Detection, FrameDetections, GroundTruthTube, VideoDetections, Vocabulary, VocabularyKind};
use crate::semantic::{EmbeddingTable, MultilingualLexicon, ObjectDepthTable};
use crate::spatial::{AnnotationImage, SpatialPrior, SpatialPriorTable};
use crate::video::GlobalObjectScores;

const PROBABILITY_SUM_TOLERANCE: f64 = 1e-3;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn loc(path: &Path, detail: impl std::fmt::Display) -> String {
    format!("{}: {detail}", path.display())
}

fn line_loc(path: &Path, line: usize) -> String {
    format!("{}:{line}", path.display())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.flush().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn check_finite(values: &[f64], location: impl FnOnce() -> String) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { location: location() })
    }
}

fn check_box(raw: [f64; 4], location: impl Fn() -> String) -> Result<BoundingBox> {
    check_finite(&raw, &location)?;
    let b = BoundingBox::from(raw);
    if !b.is_valid() {
        return Err(Error::Schema {
            location: location(),
            message: format!("box {raw:?} has x1 > x2 or y1 > y2"),
        });
    }
    Ok(b)
}

fn check_score(score: f64, location: impl Fn() -> String) -> Result<f64> {
    check_finite(&[score], &location)?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Range {
            location: location(),
            what: "score",
            value: score,
        });
    }
    Ok(score)
}

// ---------------------------------------------------------------- vocabularies

/// One term per line; blank lines and `#` comments are skipped.
pub fn parse_vocabulary(text: &str, kind: VocabularyKind) -> Result<Vocabulary> {
    Vocabulary::new(
        kind,
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string),
    )
}

pub fn load_vocabulary(path: &Path, kind: VocabularyKind) -> Result<Vocabulary> {
    parse_vocabulary(&read_to_string(path)?, kind).map_err(|e| match e {
        Error::Config(m) => Error::Schema {
            location: path.display().to_string(),
            message: m,
        },
        other => other,
    })
}

pub fn write_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut s = vocab.names().join("\n");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

// ---------------------------------------------------------------- detections

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDetection {
    pub class: String,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFrame {
    pub frame_index: u32,
    pub detections: Vec<RawDetection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVideo {
    pub video_id: String,
    pub sampled_fps: f64,
    pub frames: Vec<RawFrame>,
}

/// Resolves class names and splits persons from objects.
pub fn validate_video(raw: RawVideo, local: &Vocabulary, path: &Path) -> Result<VideoDetections> {
    let person_id = local.person_id().expect("local vocabulary holds person");
    if !(raw.sampled_fps.is_finite() && raw.sampled_fps > 0.0) {
        return Err(Error::Range {
            location: loc(path, "sampled_fps"),
            what: "sampled_fps",
            value: raw.sampled_fps,
        });
    }
    let mut frames = Vec::with_capacity(raw.frames.len());
    let mut last: Option<u32> = None;
    for (fi, f) in raw.frames.into_iter().enumerate() {
        if last.is_some_and(|l| f.frame_index <= l) {
            return Err(Error::Schema {
                location: loc(path, format!("frames[{fi}]")),
                message: format!("frame_index {} does not increase", f.frame_index),
            });
        }
        last = Some(f.frame_index);
        let mut frame = FrameDetections {
            frame_index: f.frame_index,
            ..Default::default()
        };
        for (di, d) in f.detections.into_iter().enumerate() {
            let at = || loc(path, format!("frames[{fi}].detections[{di}]"));
            let class_id = local.id(&d.class).ok_or_else(|| Error::UnknownClass {
                location: at(),
                kind: "local object",
                name: d.class.clone(),
            })?;
            let score = check_score(d.score, at)?;
            let bbox = check_box(d.bbox, at)?;
            let det = Detection::new(class_id, score, bbox);
            if class_id == person_id {
                if bbox.area() <= 0.0 {
                    return Err(Error::Schema {
                        location: at(),
                        message: "person box has zero area".into(),
                    });
                }
                frame.persons.push(det);
            } else {
                frame.objects.push(det);
            }
        }
        frames.push(frame);
    }
    Ok(VideoDetections {
        video_id: raw.video_id,
        sampled_fps: raw.sampled_fps,
        frames,
    })
}

pub fn parse_video_detections(text: &str, local: &Vocabulary, path: &Path) -> Result<VideoDetections> {
    let raw: RawVideo = serde_json::from_str(text).map_err(|e| Error::Schema {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    validate_video(raw, local, path)
}

pub fn load_video_detections(path: &Path, local: &Vocabulary) -> Result<VideoDetections> {
    parse_video_detections(&read_to_string(path)?, local, path)
}

/// Every `*.json` file in `dir`, sorted by video id.
pub fn load_detections_dir(dir: &Path, local: &Vocabulary) -> Result<Vec<VideoDetections>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut videos = paths
        .iter()
        .map(|p| load_video_detections(p, local))
        .collect::<Result<Vec<_>>>()?;
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    if let Some(w) = videos.windows(2).find(|w| w[0].video_id == w[1].video_id) {
        return Err(Error::Schema {
            location: dir.display().to_string(),
            message: format!("video `{}` appears in two files", w[0].video_id),
        });
    }
    Ok(videos)
}

pub fn video_to_raw(video: &VideoDetections, local: &Vocabulary) -> RawVideo {
    let person_id = local.person_id().expect("local vocabulary holds person");
    RawVideo {
        video_id: video.video_id.clone(),
        sampled_fps: video.sampled_fps,
        frames: video
            .frames
            .iter()
            .map(|f| RawFrame {
                frame_index: f.frame_index,
                detections: f
                    .persons
                    .iter()
                    .map(|d| (person_id, d))
                    .chain(f.objects.iter().map(|d| (d.class_id, d)))
                    .map(|(c, d)| RawDetection {
                        class: local.name(c).to_string(),
                        score: d.score,
                        bbox: d.bbox.to_array(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn write_video_detections(path: &Path, video: &VideoDetections, local: &Vocabulary) -> Result<()> {
    write_json(path, &video_to_raw(video, local))
}

// ---------------------------------------------------------------- embeddings

/// Header `<count> <dim>`, then `term v1 ... vdim` per line.
pub fn parse_embeddings(text: &str, language: &str, path: &Path) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        location: path.display().to_string(),
        message: "empty embedding file".into(),
    })?;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
    let (count, dim) = match (parse_usize(parts.next()), parse_usize(parts.next()), parts.next()) {
        (Some(c), Some(d), None) if d > 0 => (c, d),
        _ => {
            return Err(Error::Schema {
                location: line_loc(path, 1),
                message: format!("expected header `<count> <dim>`, got `{header}`"),
            })
        }
    };
    let mut table = EmbeddingTable::new(language, dim);
    let mut rows = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        let mut tokens = line.split_whitespace();
        let term = tokens.next().expect("nonblank line");
        let values = tokens
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Schema {
                    location: line_loc(path, lineno),
                    message: format!("`{t}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                location: line_loc(path, lineno),
                term: term.to_string(),
                expected: dim,
                found: values.len(),
            });
        }
        check_finite(&values, || line_loc(path, lineno))?;
        rows += 1;
        if table.get(term).is_some() {
            log::warn!("{}: duplicate term `{term}` ignored", line_loc(path, lineno));
            continue;
        }
        table.insert(term, values)?;
    }
    if rows != count {
        return Err(Error::Schema {
            location: path.display().to_string(),
            message: format!("header announces {count} vectors, file has {rows}"),
        });
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path, language: &str) -> Result<EmbeddingTable> {
    parse_embeddings(&read_to_string(path)?, language, path)
}

pub fn write_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut terms: Vec<&str> = table.terms().collect();
    terms.sort_unstable();
    let mut out = format!("{} {}\n", terms.len(), table.dim());
    for t in terms {
        out.push_str(t);
        for v in table.get(t).expect("listed term") {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

// ---------------------------------------------------------------- lexicon

fn is_review_column(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "needs_review" | "needs-review")
}

/// Header row `term<TAB>lang1<TAB>lang2...`; one canonical term per row.
pub fn parse_lexicon(text: &str, path: &Path) -> Result<MultilingualLexicon> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        location: path.display().to_string(),
        message: "empty lexicon".into(),
    })?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    if columns.len() < 2 {
        return Err(Error::Schema {
            location: line_loc(path, 1),
            message: "lexicon header needs a term column and at least one language".into(),
        });
    }
    let mut lex = MultilingualLexicon::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(Error::Schema {
                location: line_loc(path, i + 1),
                message: format!("{} columns, header has {}", cells.len(), columns.len()),
            });
        }
        let term = cells[0];
        for (lang, phrase) in columns.iter().zip(&cells).skip(1) {
            if is_review_column(lang) || phrase.is_empty() {
                continue;
            }
            lex.insert(lang, term, phrase);
        }
    }
    Ok(lex)
}

pub fn load_lexicon(path: &Path) -> Result<MultilingualLexicon> {
    parse_lexicon(&read_to_string(path)?, path)
}

/// Writes rows for `terms` in the given language order.
pub fn write_lexicon(path: &Path, lexicon: &MultilingualLexicon, languages: &[String], terms: &[String]) -> Result<()> {
    let mut out = String::from("term");
    for l in languages {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    for t in terms {
        out.push_str(t);
        for l in languages {
            out.push('\t');
            out.push_str(lexicon.translate(l, t).unwrap_or(""));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

// ---------------------------------------------------------------- depth table

/// `term<TAB>depth` per line.
pub fn parse_depths(text: &str, path: &Path) -> Result<ObjectDepthTable> {
    let mut table = ObjectDepthTable::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (term, depth) = line.rsplit_once('\t').ok_or_else(|| Error::Schema {
            location: line_loc(path, i + 1),
            message: "expected `term<TAB>depth`".into(),
        })?;
        let depth: i64 = depth.trim().parse().map_err(|_| Error::Schema {
            location: line_loc(path, i + 1),
            message: format!("depth `{}` is not an integer", depth.trim()),
        })?;
        table.insert(term.trim(), depth);
    }
    Ok(table)
}

pub fn load_depths(path: &Path) -> Result<ObjectDepthTable> {
    parse_depths(&read_to_string(path)?, path)
}

// ---------------------------------------------------------------- spatial priors

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPrior {
    weights: Vec<f64>,
    pairs: u64,
}

pub fn load_spatial_priors(path: &Path, local: &Vocabulary) -> Result<SpatialPriorTable> {
    let raw: BTreeMap<String, RawPrior> = read_json(path)?;
    let mut table = SpatialPriorTable::new();
    for (name, p) in raw {
        let at = || loc(path, &name);
        let id = local.id(&name).ok_or_else(|| Error::UnknownClass {
            location: at(),
            kind: "local object",
            name: name.clone(),
        })?;
        check_finite(&p.weights, at)?;
        let weights = p.weights.try_into().map_err(|e: Error| Error::Schema {
            location: at(),
            message: e.to_string(),
        })?;
        table
            .insert(id, SpatialPrior { weights, pairs: p.pairs })
            .map_err(|e| Error::Schema {
                location: at(),
                message: e.to_string(),
            })?;
    }
    Ok(table)
}

pub fn write_spatial_priors(path: &Path, table: &SpatialPriorTable, local: &Vocabulary) -> Result<()> {
    let out: BTreeMap<&str, &SpatialPrior> = table.iter().map(|(id, p)| (local.name(id), p)).collect();
    write_json(path, &out)
}

// ---------------------------------------------------------------- annotations

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawAnnotationObject {
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawAnnotationImage {
    pub image_id: String,
    pub persons: Vec<[f64; 4]>,
    pub objects: Vec<RawAnnotationObject>,
}

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Reads either the native list of annotated images or a COCO instances
/// file (boxes `[x, y, w, h]`; categories outside `local` are skipped).
pub fn load_annotations(path: &Path, local: &Vocabulary) -> Result<Vec<AnnotationImage>> {
    let value: serde_json::Value = read_json(path)?;
    let person_id = local.person_id().expect("local vocabulary holds person");
    if value.get("annotations").is_some() {
        let coco: CocoFile = serde_json::from_value(value).map_err(|e| Error::Schema {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        let cats: HashMap<u64, Option<usize>> = coco
            .categories
            .iter()
            .map(|c| (c.id, local.id(&c.name)))
            .collect();
        let mut images: BTreeMap<u64, AnnotationImage> = coco
            .images
            .iter()
            .map(|im| {
                (
                    im.id,
                    AnnotationImage {
                        image_id: im.id.to_string(),
                        person_boxes: vec![],
                        object_boxes: vec![],
                    },
                )
            })
            .collect();
        let mut skipped = 0usize;
        for (i, a) in coco.annotations.iter().enumerate() {
            let at = || loc(path, format!("annotations[{i}]"));
            let [x, y, w, h] = a.bbox;
            let b = check_box([x, y, x + w, y + h], at)?;
            let Some(Some(class)) = cats.get(&a.category_id).copied() else {
                skipped += 1;
                continue;
            };
            let Some(img) = images.get_mut(&a.image_id) else {
                return Err(Error::Schema {
                    location: at(),
                    message: format!("unknown image id {}", a.image_id),
                });
            };
            if class == person_id {
                img.person_boxes.push(b);
            } else {
                img.object_boxes.push((class, b));
            }
        }
        if skipped > 0 {
            log::info!("{}: skipped {skipped} annotations outside the local vocabulary", path.display());
        }
        return Ok(images.into_values().collect());
    }

    let raw: Vec<RawAnnotationImage> = serde_json::from_value(value).map_err(|e| Error::Schema {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    raw.into_iter()
        .enumerate()
        .map(|(i, im)| {
            let persons = im
                .persons
                .iter()
                .enumerate()
                .map(|(j, b)| check_box(*b, || loc(path, format!("[{i}].persons[{j}]"))))
                .collect::<Result<_>>()?;
            let objects = im
                .objects
                .iter()
                .enumerate()
                .map(|(j, o)| {
                    let at = || loc(path, format!("[{i}].objects[{j}]"));
                    let id = local.id(&o.class).ok_or_else(|| Error::UnknownClass {
                        location: at(),
                        kind: "local object",
                        name: o.class.clone(),
                    })?;
                    Ok((id, check_box(o.bbox, at)?))
                })
                .collect::<Result<_>>()?;
            Ok(AnnotationImage {
                image_id: im.image_id,
                person_boxes: persons,
                object_boxes: objects,
            })
        })
        .collect()
}

pub fn write_annotations(path: &Path, images: &[AnnotationImage], local: &Vocabulary) -> Result<()> {
    let raw: Vec<RawAnnotationImage> = images
        .iter()
        .map(|im| RawAnnotationImage {
            image_id: im.image_id.clone(),
            persons: im.person_boxes.iter().map(BoundingBox::to_array).collect(),
            objects: im
                .object_boxes
                .iter()
                .map(|(c, b)| RawAnnotationObject {
                    class: local.name(*c).to_string(),
                    bbox: b.to_array(),
                })
                .collect(),
        })
        .collect();
    write_json(path, &raw)
}

// ---------------------------------------------------------------- global scores

pub fn load_global_scores(path: &Path, global: &Vocabulary) -> Result<BTreeMap<String, GlobalObjectScores>> {
    let raw: BTreeMap<String, Vec<f64>> = read_json(path)?;
    raw.into_iter()
        .map(|(video_id, probabilities)| {
            let at = || loc(path, &video_id);
            if probabilities.len() != global.len() {
                return Err(Error::DimensionMismatch {
                    location: at(),
                    term: video_id.clone(),
                    expected: global.len(),
                    found: probabilities.len(),
                });
            }
            check_finite(&probabilities, at)?;
            if let Some(p) = probabilities.iter().find(|p| **p < 0.0) {
                return Err(Error::Range {
                    location: at(),
                    what: "probability",
                    value: *p,
                });
            }
            let sum: f64 = probabilities.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                return Err(Error::Range {
                    location: at(),
                    what: "probability sum",
                    value: sum,
                });
            }
            Ok((
                video_id.clone(),
                GlobalObjectScores {
                    video_id,
                    probabilities,
                },
            ))
        })
        .collect()
}

pub fn write_global_scores(path: &Path, scores: &BTreeMap<String, GlobalObjectScores>) -> Result<()> {
    let raw: BTreeMap<&str, &[f64]> = scores
        .iter()
        .map(|(k, v)| (k.as_str(), v.probabilities.as_slice()))
        .collect();
    write_json(path, &raw)
}

// ---------------------------------------------------------------- ground truth

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGroundTruth {
    pub video_id: String,
    pub action: String,
    pub boxes: BTreeMap<u32, [f64; 4]>,
}

pub fn load_ground_truth(path: &Path, actions: &Vocabulary) -> Result<Vec<GroundTruthTube>> {
    let raw: Vec<RawGroundTruth> = read_json(path)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, g)| {
            let at = || loc(path, format!("[{i}]"));
            let action_id = actions.id(&g.action).ok_or_else(|| Error::UnknownClass {
                location: at(),
                kind: "action",
                name: g.action.clone(),
            })?;
            if g.boxes.is_empty() {
                return Err(Error::Schema {
                    location: at(),
                    message: "ground-truth tube has no frames".into(),
                });
            }
            let boxes = g
                .boxes
                .into_iter()
                .map(|(f, b)| Ok((f, check_box(b, || loc(path, format!("[{i}].boxes.{f}")))?)))
                .collect::<Result<_>>()?;
            Ok(GroundTruthTube {
                video_id: g.video_id,
                action_id,
                boxes,
            })
        })
        .collect()
}

pub fn write_ground_truth(path: &Path, gts: &[GroundTruthTube], actions: &Vocabulary) -> Result<()> {
    let raw: Vec<RawGroundTruth> = gts
        .iter()
        .map(|g| RawGroundTruth {
            video_id: g.video_id.clone(),
            action: actions.name(g.action_id).to_string(),
            boxes: g.boxes.iter().map(|(f, b)| (*f, b.to_array())).collect(),
        })
        .collect();
    write_json(path, &raw)
}

/// Video labels `{video_id: action}`.
pub fn load_labels(path: &Path, actions: &Vocabulary) -> Result<BTreeMap<String, usize>> {
    let raw: BTreeMap<String, String> = read_json(path)?;
    raw.into_iter()
        .map(|(v, a)| {
            let id = actions.id(&a).ok_or_else(|| Error::UnknownClass {
                location: loc(path, &v),
                kind: "action",
                name: a.clone(),
            })?;
            Ok((v, id))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local() -> Vocabulary {
        Vocabulary::new(VocabularyKind::LocalObject, ["person", "horse", "kite"]).unwrap()
    }

    fn p() -> &'static Path {
        Path::new("mem.json")
    }

    #[test]
    fn detections_split_persons() {
        let text = r#"{"video_id":"v1","sampled_fps":2.0,"frames":[
            {"frame_index":0,"detections":[
                {"class":"person","score":0.9,"box":[0,0,10,20]},
                {"class":"horse","score":0.5,"box":[5,15,30,40]}]},
            {"frame_index":1,"detections":[]}]}"#;
        let v = parse_video_detections(text, &local(), p()).unwrap();
        assert_eq!(v.frames.len(), 2);
        assert_eq!(v.frames[0].persons.len(), 1);
        assert_eq!(v.frames[0].objects[0].class_id, 1);
        assert!(v.frames[1].persons.is_empty());
        let raw = video_to_raw(&v, &local());
        let back = validate_video(raw, &local(), p()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn empty_frames_list_is_valid() {
        let v = parse_video_detections(r#"{"video_id":"v","sampled_fps":2,"frames":[]}"#, &local(), p()).unwrap();
        assert!(v.frames.is_empty());
    }

    #[test]
    fn detection_errors() {
        let bad_score = r#"{"video_id":"v","sampled_fps":2,"frames":[{"frame_index":0,"detections":[
            {"class":"horse","score":1.2,"box":[0,0,1,1]}]}]}"#;
        match parse_video_detections(bad_score, &local(), p()) {
            Err(Error::Range { location, what, value }) => {
                assert_eq!(what, "score");
                assert_eq!(value, 1.2);
                assert!(location.contains("frames[0].detections[0]"));
            }
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"video_id":"v","sampled_fps":2,"frames":[{"frame_index":0,"detections":[
            {"class":"zebra","score":0.2,"box":[0,0,1,1]}]}]}"#;
        assert!(matches!(
            parse_video_detections(unknown, &local(), p()),
            Err(Error::UnknownClass { .. })
        ));
        let order = r#"{"video_id":"v","sampled_fps":2,"frames":[
            {"frame_index":3,"detections":[]},{"frame_index":3,"detections":[]}]}"#;
        assert!(matches!(parse_video_detections(order, &local(), p()), Err(Error::Schema { .. })));
        let flipped = r#"{"video_id":"v","sampled_fps":2,"frames":[{"frame_index":0,"detections":[
            {"class":"kite","score":0.2,"box":[5,0,1,1]}]}]}"#;
        assert!(matches!(parse_video_detections(flipped, &local(), p()), Err(Error::Schema { .. })));
        let flat_person = r#"{"video_id":"v","sampled_fps":2,"frames":[{"frame_index":0,"detections":[
            {"class":"person","score":0.2,"box":[1,0,1,1]}]}]}"#;
        assert!(parse_video_detections(flat_person, &local(), p()).is_err());
        assert!(matches!(
            parse_video_detections("{", &local(), p()),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn embeddings_format() {
        let t = parse_embeddings("2 3\nhorse 1 0 0\nkite 0 1 0.5\n", "english", p()).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("kite").unwrap(), &[0.0, 1.0, 0.5]);
        match parse_embeddings("2 3\nhorse 1 0 0\nkite 0 1\n", "english", p()) {
            Err(Error::DimensionMismatch { term, expected, found, location }) => {
                assert_eq!(term, "kite");
                assert_eq!((expected, found), (3, 2));
                assert!(location.ends_with(":3"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_embeddings("3 3\nhorse 1 0 0\n", "english", p()).is_err());
        assert!(parse_embeddings("x\n", "english", p()).is_err());
        assert!(matches!(
            parse_embeddings("1 2\nhorse 1 NaN\n", "english", p()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn lexicon_format() {
        let text = "term\tenglish\tdutch\tneeds_review\nhorse\thorse\tpaard\t0\nkite flying\tkite flying\tvliegeren\t1\n";
        let lex = parse_lexicon(text, p()).unwrap();
        assert_eq!(lex.translate("dutch", "kite flying").unwrap(), "vliegeren");
        assert_eq!(lex.translate("english", "horse").unwrap(), "horse");
        assert!(lex.translate("needs_review", "horse").is_err());
        assert!(parse_lexicon("term\tenglish\nhorse\n", p()).is_err());
    }

    #[test]
    fn depth_format() {
        let d = parse_depths("horse\t12\nkite\t1\ntall ship\t30\n", p()).unwrap();
        assert_eq!(d.get("horse"), Some(12));
        assert_eq!(d.get("kite"), Some(2));
        assert_eq!(d.get("tall ship"), Some(18));
        assert!(parse_depths("horse 12\n", p()).is_err());
        assert!(parse_depths("horse\ttwelve\n", p()).is_err());
    }

    #[test]
    fn vocabulary_format() {
        let v = parse_vocabulary("# local\nperson\nhorse\n\nkite\n", VocabularyKind::LocalObject).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let local = local();

        let mut table = SpatialPriorTable::new();
        let mut w = [0.0; 9];
        w[1] = 0.25;
        w[4] = 0.75;
        table
            .insert(1, SpatialPrior { weights: crate::spatial::SpatialDistribution::new(w).unwrap(), pairs: 7 })
            .unwrap();
        let path = dir.path().join("priors.json");
        write_spatial_priors(&path, &table, &local).unwrap();
        assert_eq!(load_spatial_priors(&path, &local).unwrap(), table);

        let mut emb = EmbeddingTable::new("english", 2);
        emb.insert("horse", vec![0.1, -1.0 / 3.0]).unwrap();
        emb.insert("kite", vec![1e-300, 7.25]).unwrap();
        let path = dir.path().join("en.vec");
        write_embeddings(&path, &emb).unwrap();
        assert_eq!(load_embeddings(&path, "english").unwrap(), emb);

        let actions = Vocabulary::new(VocabularyKind::Action, ["riding", "flying"]).unwrap();
        let gts = vec![GroundTruthTube {
            video_id: "v".into(),
            action_id: 1,
            boxes: [(3, BoundingBox::new(0.5, 1.0, 2.0, 3.0)), (4, BoundingBox::new(1.0, 1.0, 2.0, 3.0))]
                .into_iter()
                .collect(),
        }];
        let path = dir.path().join("gt.json");
        write_ground_truth(&path, &gts, &actions).unwrap();
        assert_eq!(load_ground_truth(&path, &actions).unwrap(), gts);

        let global = Vocabulary::new(VocabularyKind::GlobalObject, ["a", "b"]).unwrap();
        let scores: BTreeMap<String, GlobalObjectScores> = [(
            "v".to_string(),
            GlobalObjectScores { video_id: "v".into(), probabilities: vec![0.3, 0.7] },
        )]
        .into_iter()
        .collect();
        let path = dir.path().join("global.json");
        write_global_scores(&path, &scores).unwrap();
        assert_eq!(load_global_scores(&path, &global).unwrap(), scores);
        std::fs::write(&path, r#"{"v":[0.3,0.3]}"#).unwrap();
        assert!(matches!(load_global_scores(&path, &global), Err(Error::Range { .. })));
        std::fs::write(&path, r#"{"v":[1.0]}"#).unwrap();
        assert!(matches!(load_global_scores(&path, &global), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn coco_annotations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coco.json");
        std::fs::write(
            &path,
            r#"{"images":[{"id":1},{"id":2}],
               "categories":[{"id":1,"name":"person"},{"id":19,"name":"horse"},{"id":3,"name":"car"}],
               "annotations":[
                 {"image_id":1,"category_id":1,"bbox":[10,10,20,40]},
                 {"image_id":1,"category_id":19,"bbox":[0,40,50,30]},
                 {"image_id":2,"category_id":3,"bbox":[0,0,5,5]}]}"#,
        )
        .unwrap();
        let imgs = load_annotations(&path, &local()).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[0].person_boxes, vec![BoundingBox::new(10.0, 10.0, 30.0, 50.0)]);
        assert_eq!(imgs[0].object_boxes, vec![(1, BoundingBox::new(0.0, 40.0, 50.0, 70.0))]);
        assert!(imgs[1].object_boxes.is_empty());
    }
}
