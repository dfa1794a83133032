//! Synthetic planted corpus used by the acceptance suite and the CLI
//! `gen-fixtures` command.
//!
//! Each video holds a true actor with the action's object in its canonical
//! relation, a more confident distractor person with the same object in a
//! disjoint relation, and clutter away from both. Word vectors share one
//! concept direction per action plus independent noise per language.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::geometry::BoundingBox;
use crate::io;
use crate::model::{Detection, FrameDetections, GroundTruthTube, VideoDetections, Vocabulary, VocabularyKind};
use crate::semantic::{EmbeddingTable, MultilingualLexicon};
use crate::spatial::AnnotationImage;
use crate::video::GlobalObjectScores;

pub const VIDEOS: usize = 20;
pub const FRAMES: u32 = 50;
pub const DIM: usize = 16;
const PERSON_W: f64 = 60.0;
const PERSON_H: f64 = 150.0;
const IMAGES_PER_OBJECT: usize = 25;
const WORD_NOISE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Placement {
    /// Wide object overlapping the lower body.
    Under,
    /// Narrow object above the head, inside the person's columns.
    Overhead,
    /// Tall object touching the right side.
    Beside,
    /// Entirely above, entirely below or entirely left, with a small gap.
    ClearAbove,
    ClearBelow,
    ClearLeft,
}

struct ActionDef {
    name: &'static str,
    dutch: &'static str,
    local: &'static str,
    local_dutch: &'static str,
    true_place: Placement,
    wrong_place: Placement,
    globals: [(&'static str, &'static str, i64); 3],
}

const ACTIONS: [ActionDef; 4] = [
    ActionDef {
        name: "horse riding",
        dutch: "paardrijden",
        local: "horse",
        local_dutch: "paard",
        true_place: Placement::Under,
        wrong_place: Placement::ClearAbove,
        globals: [("horse", "paard", 13), ("saddle", "zadel", 11), ("stable", "stal", 9)],
    },
    ActionDef {
        name: "skateboarding",
        dutch: "skateboarden",
        local: "skateboard",
        local_dutch: "skateboard",
        true_place: Placement::Under,
        wrong_place: Placement::ClearAbove,
        globals: [("skateboard", "skateboard", 12), ("ramp", "helling", 8), ("halfpipe", "halfpipe", 10)],
    },
    ActionDef {
        name: "golf swing",
        dutch: "golfslag",
        local: "golf club",
        local_dutch: "golfclub",
        true_place: Placement::Beside,
        wrong_place: Placement::ClearLeft,
        globals: [("golf club", "golfclub", 12), ("golf ball", "golfbal", 11), ("putting green", "golfbaan", 7)],
    },
    ActionDef {
        name: "kite flying",
        dutch: "vliegeren",
        local: "kite",
        local_dutch: "vlieger",
        true_place: Placement::Overhead,
        wrong_place: Placement::ClearBelow,
        globals: [("kite", "vlieger", 11), ("kite string", "vliegertouw", 12), ("beach", "strand", 8)],
    },
];

const LOCAL_CLUTTER: [(&str, &str); 4] = [("chair", "stoel"), ("cup", "kop"), ("bottle", "fles"), ("bench", "bank")];
const GLOBAL_CLUTTER: [(&str, &str, i64); 4] = [("chair", "stoel", 9), ("table", "tafel", 8), ("dog", "hond", 13), ("car", "auto", 11)];

/// Paths and planted facts of a generated corpus.
#[derive(Debug, Clone)]
pub struct FixtureSummary {
    pub root: PathBuf,
    pub config: PathBuf,
    pub retrieval_config: PathBuf,
    pub labels: BTreeMap<String, usize>,
    pub num_actions: usize,
    /// Person box of the actor with the object above, frame 0.
    pub retrieval_above_actor: BoundingBox,
}

fn person_box(x: f64, y: f64) -> BoundingBox {
    BoundingBox::new(x, y, x + PERSON_W, y + PERSON_H)
}

fn place(p: &BoundingBox, how: Placement, jitter: f64) -> BoundingBox {
    let (w, h) = (p.width(), p.height());
    let cx = (p.x1 + p.x2) / 2.0;
    let s = 1.0 + jitter;
    match how {
        Placement::Under => {
            let (ow, oh) = (1.6 * w * s, 0.6 * h * s);
            let top = p.y2 - 0.3 * h;
            BoundingBox::new(cx - ow / 2.0, top, cx + ow / 2.0, top + oh)
        }
        Placement::Overhead => {
            let (ow, oh) = (0.6 * w * s, 0.3 * h * s);
            let bottom = p.y1 - 20.0;
            BoundingBox::new(cx - ow / 2.0, bottom - oh, cx + ow / 2.0, bottom)
        }
        Placement::Beside => {
            let (ow, oh) = (0.4 * w * s, 0.8 * h * s);
            let top = p.y1 + 0.3 * h;
            BoundingBox::new(p.x2 + 5.0, top, p.x2 + 5.0 + ow, top + oh)
        }
        Placement::ClearAbove => {
            let (ow, oh) = (0.8 * w, 0.3 * h);
            BoundingBox::new(cx - ow / 2.0, p.y1 - 10.0 - oh, cx + ow / 2.0, p.y1 - 10.0)
        }
        Placement::ClearBelow => {
            let (ow, oh) = (0.8 * w, 0.3 * h);
            BoundingBox::new(cx - ow / 2.0, p.y2 + 10.0, cx + ow / 2.0, p.y2 + 10.0 + oh)
        }
        Placement::ClearLeft => {
            let (ow, oh) = (0.4 * w, 0.6 * h);
            BoundingBox::new(p.x1 - 10.0 - ow, p.y1 + 0.2 * h, p.x1 - 10.0, p.y1 + 0.2 * h + oh)
        }
    }
}

fn jitter_box(b: &BoundingBox, rng: &mut ChaCha8Rng) -> BoundingBox {
    let mut d = || rng.random_range(-1.0..=1.0);
    BoundingBox::new(b.x1 + d(), b.y1 + d(), b.x2 + d(), b.y2 + d())
}

pub fn local_vocabulary() -> Vocabulary {
    let names = std::iter::once("person")
        .chain(ACTIONS.iter().map(|a| a.local))
        .chain(LOCAL_CLUTTER.iter().map(|c| c.0));
    Vocabulary::new(VocabularyKind::LocalObject, names).expect("static vocabulary")
}

pub fn global_vocabulary() -> Vocabulary {
    let names = ACTIONS
        .iter()
        .flat_map(|a| a.globals.iter().map(|g| g.0))
        .chain(GLOBAL_CLUTTER.iter().map(|c| c.0));
    Vocabulary::new(VocabularyKind::GlobalObject, names).expect("static vocabulary")
}

pub fn action_vocabulary() -> Vocabulary {
    Vocabulary::new(VocabularyKind::Action, ACTIONS.iter().map(|a| a.name)).expect("static vocabulary")
}

/// Words paired with the index of their concept direction.
type WordList = Vec<(String, usize)>;

struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    fn unit(&mut self, dims: std::ops::Range<usize>) -> Vec<f64> {
        let mut v = [0.0; DIM];
        for i in dims {
            v[i] = self.rng.random_range(-1.0..=1.0);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        v.iter().map(|x| x / n).collect()
    }

    fn noisy(&mut self, concept: &[f64]) -> Vec<f64> {
        concept
            .iter()
            .map(|c| c + self.rng.random_range(-WORD_NOISE..=WORD_NOISE))
            .collect()
    }

    /// Words of every term, each tied to a concept direction.
    fn word_concepts(&mut self) -> (WordList, WordList, Vec<Vec<f64>>) {
        let mut concepts: Vec<Vec<f64>> = (0..ACTIONS.len())
            .map(|k| {
                let mut e = vec![0.0; DIM];
                e[k] = 1.0;
                e
            })
            .collect();
        let mut english = Vec::new();
        let mut dutch = Vec::new();
        let add = |list: &mut Vec<(String, usize)>, phrase: &str, c: usize| {
            for w in phrase.split_whitespace() {
                if !list.iter().any(|(x, _)| x == w) {
                    list.push((w.to_string(), c));
                }
            }
        };
        for (k, a) in ACTIONS.iter().enumerate() {
            add(&mut english, a.name, k);
            add(&mut dutch, a.dutch, k);
            add(&mut english, a.local, k);
            add(&mut dutch, a.local_dutch, k);
            for g in &a.globals {
                add(&mut english, g.0, k);
                add(&mut dutch, g.1, k);
            }
        }
        let clutter: Vec<(&str, &str)> = std::iter::once(("person", "persoon"))
            .chain(LOCAL_CLUTTER)
            .chain(GLOBAL_CLUTTER.iter().map(|c| (c.0, c.1)))
            .collect();
        for (en, nl) in clutter {
            if english.iter().any(|(x, _)| x == en) {
                continue;
            }
            let c = concepts.len();
            concepts.push(self.unit(ACTIONS.len()..DIM));
            add(&mut english, en, c);
            add(&mut dutch, nl, c);
        }
        (english, dutch, concepts)
    }

    fn table(&mut self, language: &str, words: &[(String, usize)], concepts: &[Vec<f64>]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(language, DIM);
        for (w, c) in words {
            let v = self.noisy(&concepts[*c]);
            t.insert(w.as_str(), v).expect("finite vector");
        }
        t
    }

    fn annotations(&mut self, local: &Vocabulary) -> Vec<AnnotationImage> {
        let mut images = Vec::new();
        let clutter_places = [Placement::ClearAbove, Placement::ClearBelow, Placement::ClearLeft, Placement::Beside];
        let objects: Vec<(usize, Placement)> = ACTIONS
            .iter()
            .map(|a| (local.id(a.local).expect("in vocabulary"), a.true_place))
            .chain(LOCAL_CLUTTER.iter().enumerate().map(|(i, c)| {
                (local.id(c.0).expect("in vocabulary"), clutter_places[i % clutter_places.len()])
            }))
            .collect();
        for (id, how) in objects {
            for i in 0..IMAGES_PER_OBJECT {
                let p = person_box(self.rng.random_range(50.0..500.0), self.rng.random_range(80.0..180.0));
                let j = self.rng.random_range(-0.05..=0.05);
                images.push(AnnotationImage {
                    image_id: format!("{}_{i:03}", local.name(id).replace(' ', "_")),
                    person_boxes: vec![p],
                    object_boxes: vec![(id, place(&p, how, j))],
                });
            }
        }
        images
    }

    fn video(&mut self, index: usize, action: usize, local: &Vocabulary) -> (VideoDetections, GroundTruthTube) {
        let def = &ACTIONS[action];
        let obj = local.id(def.local).expect("in vocabulary");
        let video_id = format!("video_{index:02}");
        let actor0 = (self.rng.random_range(80.0..140.0), self.rng.random_range(120.0..160.0));
        let distr0 = (self.rng.random_range(420.0..480.0), self.rng.random_range(120.0..160.0));
        let (va, vd) = (self.rng.random_range(-0.5..0.5), self.rng.random_range(-0.5..0.5));
        let clutter: Vec<usize> = (0..2)
            .map(|_| local.id(LOCAL_CLUTTER[self.rng.random_range(0..LOCAL_CLUTTER.len())].0).expect("in vocabulary"))
            .collect();
        let mut frames = Vec::new();
        let mut gt = BTreeMap::new();
        for t in 0..FRAMES {
            let tf = f64::from(t);
            let actor = person_box(actor0.0 + va * tf, actor0.1);
            let distractor = person_box(distr0.0 + vd * tf, distr0.1);
            gt.insert(t, actor);
            let mut f = FrameDetections {
                frame_index: t,
                ..Default::default()
            };
            let person_id = local.person_id().expect("person");
            f.persons.push(Detection::new(person_id, 0.75 + self.rng.random_range(-0.03..=0.03), jitter_box(&actor, &mut self.rng)));
            f.persons.push(Detection::new(
                person_id,
                0.9 + self.rng.random_range(-0.03..=0.03),
                jitter_box(&distractor, &mut self.rng),
            ));
            let j = self.rng.random_range(-0.05..=0.05);
            f.objects.push(Detection::new(obj, 0.85 + self.rng.random_range(-0.05..=0.05), place(&actor, def.true_place, j)));
            f.objects.push(Detection::new(obj, 0.85 + self.rng.random_range(-0.05..=0.05), place(&distractor, def.wrong_place, 0.0)));
            for &c in &clutter {
                let x = self.rng.random_range(290.0..330.0);
                let y = self.rng.random_range(20.0..300.0);
                f.objects.push(Detection::new(c, self.rng.random_range(0.3..0.9), BoundingBox::new(x, y, x + 30.0, y + 30.0)));
            }
            frames.push(f);
        }
        (
            VideoDetections {
                video_id: video_id.clone(),
                sampled_fps: 2.0,
                frames,
            },
            GroundTruthTube {
                video_id,
                action_id: action,
                boxes: gt,
            },
        )
    }

    fn global_scores(&mut self, video_id: &str, action: usize, global: &Vocabulary) -> GlobalObjectScores {
        let mut p: Vec<f64> = (0..global.len()).map(|_| self.rng.random_range(0.0..1.0)).collect();
        let rest: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x *= 0.5 / rest);
        for (g, share) in ACTIONS[action].globals.iter().zip([0.25, 0.15, 0.1]) {
            p[global.id(g.0).expect("in vocabulary")] += share;
        }
        let sum: f64 = p.iter().sum();
        GlobalObjectScores {
            video_id: video_id.to_string(),
            probabilities: p.iter().map(|x| x / sum).collect(),
        }
    }

    fn retrieval_video(&mut self, local: &Vocabulary) -> (VideoDetections, BoundingBox) {
        let kite = local.id("kite").expect("in vocabulary");
        let person_id = local.person_id().expect("person");
        let frames = (0..10)
            .map(|t| {
                let a = person_box(120.0 + f64::from(t), 140.0);
                let b = person_box(440.0 - f64::from(t), 140.0);
                FrameDetections {
                    frame_index: t,
                    persons: vec![Detection::new(person_id, 0.8, b), Detection::new(person_id, 0.8, a)],
                    objects: vec![
                        Detection::new(kite, 0.9, place(&a, Placement::ClearAbove, 0.0)),
                        Detection::new(kite, 0.9, place(&b, Placement::ClearBelow, 0.0)),
                    ],
                }
            })
            .collect();
        let video = VideoDetections {
            video_id: "two_actors".into(),
            sampled_fps: 2.0,
            frames,
        };
        (video, person_box(120.0, 140.0))
    }
}

/// Writes the full fixture corpus under `dir`.
pub fn generate(dir: &Path, seed: u64) -> Result<FixtureSummary> {
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let local = local_vocabulary();
    let global = global_vocabulary();
    let actions = action_vocabulary();
    io::write_vocabulary(&dir.join("local_objects.txt"), &local)?;
    io::write_vocabulary(&dir.join("global_objects.txt"), &global)?;
    io::write_vocabulary(&dir.join("actions.txt"), &actions)?;

    let (en_words, nl_words, concepts) = g.word_concepts();
    let english = g.table("english", &en_words, &concepts);
    let dutch = g.table("dutch", &nl_words, &concepts);
    io::write_embeddings(&dir.join("embeddings/english.vec"), &english)?;
    io::write_embeddings(&dir.join("embeddings/dutch.vec"), &dutch)?;

    let mut lex = MultilingualLexicon::new();
    let mut terms: Vec<String> = Vec::new();
    let mut add = |en: &str, nl: &str| {
        if !terms.iter().any(|t| t == en) {
            lex.insert("english", en, en);
            lex.insert("dutch", en, nl);
            terms.push(en.to_string());
        }
    };
    for a in &ACTIONS {
        add(a.name, a.dutch);
        add(a.local, a.local_dutch);
        for gl in &a.globals {
            add(gl.0, gl.1);
        }
    }
    add("person", "persoon");
    for (en, nl) in LOCAL_CLUTTER {
        add(en, nl);
    }
    for (en, nl, _) in GLOBAL_CLUTTER {
        add(en, nl);
    }
    io::write_lexicon(&dir.join("lexicon.tsv"), &lex, &["english".into(), "dutch".into()], &terms)?;

    let mut depths = String::new();
    for (name, _, d) in ACTIONS.iter().flat_map(|a| a.globals.iter()).chain(GLOBAL_CLUTTER.iter()) {
        depths.push_str(&format!("{name}\t{d}\n"));
    }
    io::write_atomic(&dir.join("depths.tsv"), depths.as_bytes())?;

    let corpus = g.annotations(&local);
    io::write_annotations(&dir.join("annotations.json"), &corpus, &local)?;

    let mut gts = Vec::new();
    let mut scores = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for i in 0..VIDEOS {
        let action = i % ACTIONS.len();
        let (video, gt) = g.video(i, action, &local);
        io::write_video_detections(&dir.join("detections").join(format!("{}.json", video.video_id)), &video, &local)?;
        scores.insert(video.video_id.clone(), g.global_scores(&video.video_id, action, &global));
        labels.insert(video.video_id.clone(), action);
        gts.push(gt);
    }
    io::write_ground_truth(&dir.join("ground_truth.json"), &gts, &actions)?;
    io::write_global_scores(&dir.join("global_scores.json"), &scores)?;

    let (rvideo, above_actor) = g.retrieval_video(&local);
    io::write_video_detections(&dir.join("retrieval/detections/two_actors.json"), &rvideo, &local)?;

    let mut cfg = PipelineConfig::default();
    let p = &mut cfg.paths;
    p.local_vocabulary = Some("local_objects.txt".into());
    p.global_vocabulary = Some("global_objects.txt".into());
    p.actions = Some("actions.txt".into());
    p.detections = Some("detections".into());
    p.embeddings.insert("english".into(), "embeddings/english.vec".into());
    p.embeddings.insert("dutch".into(), "embeddings/dutch.vec".into());
    p.lexicon = Some("lexicon.tsv".into());
    p.depths = Some("depths.tsv".into());
    p.annotations = Some("annotations.json".into());
    p.global_scores = Some("global_scores.json".into());
    p.ground_truth = Some("ground_truth.json".into());
    p.work_dir = Some("work".into());
    cfg.eval.rng_seed = seed;
    let config = dir.join("config.json");
    io::write_json(&config, &cfg)?;

    let mut rcfg = cfg.clone();
    rcfg.paths.detections = Some("retrieval/detections".into());
    rcfg.paths.work_dir = Some("retrieval/work".into());
    let retrieval_config = dir.join("retrieval_config.json");
    io::write_json(&retrieval_config, &rcfg)?;

    Ok(FixtureSummary {
        root: dir.to_path_buf(),
        config,
        retrieval_config,
        labels,
        num_actions: ACTIONS.len(),
        retrieval_above_actor: above_actor,
    })
}
