use std::collections::BTreeMap;

use objprior::config::PipelineConfig;
use objprior::fixtures;
use objprior::io;
use objprior::pipeline::{
    Classification, Localization, Mode, ObjectRankings, Runner, ScoredVideo, Stage, VideoTubes, CLASSIFICATION_FILE,
    LOCALIZATION_FILE, RANKINGS_FILE, SCORED_BOXES_FILE, TUBES_FILE,
};
use objprior::video::argmax;
use objprior::Error;

fn fixture(seed: u64) -> (tempfile::TempDir, fixtures::FixtureSummary, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures::generate(dir.path(), seed).unwrap();
    let cfg = PipelineConfig::from_file(&fx.config).unwrap();
    (dir, fx, cfg)
}

#[test]
fn fixture_files_pass_every_loader() {
    let (_dir, fx, cfg) = fixture(5);
    let p = &cfg.paths;
    let local = io::load_vocabulary(p.local_vocabulary.as_ref().unwrap(), objprior::model::VocabularyKind::LocalObject).unwrap();
    let global = io::load_vocabulary(p.global_vocabulary.as_ref().unwrap(), objprior::model::VocabularyKind::GlobalObject).unwrap();
    let actions = io::load_vocabulary(p.actions.as_ref().unwrap(), objprior::model::VocabularyKind::Action).unwrap();
    let videos = io::load_detections_dir(p.detections.as_ref().unwrap(), &local).unwrap();
    assert_eq!(videos.len(), fixtures::VIDEOS);
    assert!(videos.iter().all(|v| v.frames.len() == fixtures::FRAMES as usize));
    for (lang, path) in &p.embeddings {
        assert_eq!(io::load_embeddings(path, lang).unwrap().dim(), fixtures::DIM);
    }
    let lex = io::load_lexicon(p.lexicon.as_ref().unwrap()).unwrap();
    assert_eq!(lex.translate("dutch", "kite flying").unwrap(), "vliegeren");
    let depths = io::load_depths(p.depths.as_ref().unwrap()).unwrap();
    assert_eq!(depths.len(), global.len());
    assert!(!io::load_annotations(p.annotations.as_ref().unwrap(), &local).unwrap().is_empty());
    assert_eq!(io::load_global_scores(p.global_scores.as_ref().unwrap(), &global).unwrap().len(), fixtures::VIDEOS);
    let gts = io::load_ground_truth(p.ground_truth.as_ref().unwrap(), &actions).unwrap();
    assert_eq!(gts.len(), fx.labels.len());
    io::load_video_detections(&fx.root.join("retrieval/detections/two_actors.json"), &local).unwrap();
}

#[test]
fn same_seed_same_bytes() {
    let (a, _, _) = fixture(9);
    let (b, _, _) = fixture(9);
    for f in ["global_scores.json", "embeddings/dutch.vec", "detections/video_07.json", "annotations.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn staged_artifacts_round_trip() {
    let (_dir, _fx, cfg) = fixture(3);
    let staged = Runner::new(cfg.clone(), Mode::Staged).unwrap();
    let e2e = Runner::new(cfg, Mode::EndToEnd).unwrap();
    for stage in [Stage::BuildSpatialPriors, Stage::RankObjects, Stage::ScoreBoxes, Stage::LinkTubes, Stage::Localize, Stage::Classify] {
        staged.run(stage).unwrap();
    }
    let read = |name| io::read_to_string(&staged.artifact_path(name)).unwrap();
    assert_eq!(serde_json::from_str::<ObjectRankings>(&read(RANKINGS_FILE)).unwrap(), e2e.compute_rankings().unwrap());
    assert_eq!(serde_json::from_str::<Vec<ScoredVideo>>(&read(SCORED_BOXES_FILE)).unwrap(), e2e.compute_scored().unwrap());
    assert_eq!(serde_json::from_str::<Vec<VideoTubes>>(&read(TUBES_FILE)).unwrap(), e2e.compute_tubes().unwrap());
    assert_eq!(serde_json::from_str::<Localization>(&read(LOCALIZATION_FILE)).unwrap(), e2e.compute_localization().unwrap());
    assert_eq!(serde_json::from_str::<Classification>(&read(CLASSIFICATION_FILE)).unwrap(), e2e.compute_classification().unwrap());
    assert_eq!(staged.spatial_priors().unwrap(), e2e.spatial_priors().unwrap());
}

#[test]
fn missing_artifact_names_its_producer() {
    let (_dir, _fx, cfg) = fixture(3);
    let staged = Runner::new(cfg, Mode::Staged).unwrap();
    match staged.run(Stage::LinkTubes) {
        Err(Error::MissingArtifact { producer, .. }) => assert_eq!(producer, "score-boxes"),
        other => panic!("{other:?}"),
    }
    match staged.run(Stage::RankObjects).and_then(|_| staged.run(Stage::ScoreBoxes)) {
        Err(Error::MissingArtifact { producer, .. }) => assert_eq!(producer, "build-spatial-priors"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn global_only_matches_semantic_classifier() {
    let (_dir, _fx, mut cfg) = fixture(4);
    cfg.fusion.use_local = false;
    let r = Runner::new(cfg, Mode::EndToEnd).unwrap();
    let cls = r.compute_classification().unwrap();
    let vs = r.video_scores(&r.compute_rankings().unwrap()).unwrap();
    assert_eq!(cls.videos.len(), vs.len());
    for v in &cls.videos {
        assert_eq!(v.scores, vs[&v.video_id]);
        assert_eq!(v.predicted, cls.actions[argmax(&vs[&v.video_id]).unwrap()]);
    }
    let report = r.evaluate_classification(None).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert!(matches!(r.compute_localization(), Err(Error::LocalPriorsRequired)));
}

#[test]
fn fused_pipeline_is_perfect_on_fixture() {
    let (_dir, _fx, cfg) = fixture(6);
    let r = Runner::new(cfg, Mode::EndToEnd).unwrap();
    assert_eq!(r.evaluate_classification(Some(2)).unwrap().accuracy, 1.0);
    let report = r.evaluate_localization().unwrap();
    for t in &report.tubes.thresholds {
        assert_eq!(t.map, Some(1.0), "tau {}", t.threshold);
    }
    assert_eq!(report.frame_map, Some(1.0));
}

#[test]
fn prior_toggles_keep_the_planted_answer() {
    let (_dir, _fx, base) = fixture(8);
    type Tweak = Box<dyn Fn(&mut PipelineConfig)>;
    let variants: Vec<Tweak> = vec![
        Box::new(|c| c.languages = vec!["english".into()]),
        Box::new(|c| c.languages = vec!["dutch".into()]),
        Box::new(|c| c.discrimination = objprior::semantic::DiscriminationMode::Action),
        Box::new(|c| c.discrimination = objprior::semantic::DiscriminationMode::Object),
        Box::new(|c| c.use_naming_prior = true),
        Box::new(|c| {
            c.local_weighting = objprior::config::LocalWeighting::Combined;
            c.use_naming_prior = true;
            c.paths.depths = None;
        }),
    ];
    for (i, tweak) in variants.iter().enumerate() {
        let mut cfg = base.clone();
        tweak(&mut cfg);
        match Runner::new(cfg, Mode::EndToEnd).and_then(|r| r.evaluate_classification(None)) {
            Ok(report) => assert_eq!(report.accuracy, 1.0, "variant {i}"),
            Err(Error::Config(msg)) => assert_eq!(i, 5, "{msg}"),
            Err(e) => panic!("variant {i}: {e}"),
        }
    }
}

#[test]
fn empty_video_yields_no_tubes() {
    let (dir, _fx, mut cfg) = fixture(2);
    let dets = dir.path().join("only_empty");
    std::fs::create_dir_all(&dets).unwrap();
    std::fs::write(dets.join("e.json"), r#"{"video_id":"empty","sampled_fps":2,"frames":[]}"#).unwrap();
    cfg.paths.detections = Some(dets);
    cfg.fusion.use_global = false;
    let r = Runner::new(cfg, Mode::EndToEnd).unwrap();
    assert!(r.compute_tubes().unwrap().iter().all(|t| t.tubes.is_empty()));
    let cls = r.compute_classification().unwrap();
    assert_eq!(cls.videos.len(), 1);
    assert!(cls.videos[0].scores.iter().all(|s| *s == 0.0));
    assert_eq!(cls.videos[0].predicted, cls.actions[0]);
}

#[test]
fn labels_file_overrides_ground_truth() {
    let (dir, fx, mut cfg) = fixture(1);
    let path = dir.path().join("labels.json");
    let wrong: BTreeMap<&str, &str> = fx.labels.keys().map(|v| (v.as_str(), "kite flying")).collect();
    std::fs::write(&path, serde_json::to_string(&wrong).unwrap()).unwrap();
    cfg.paths.labels = Some(path);
    let r = Runner::new(cfg, Mode::EndToEnd).unwrap();
    assert_eq!(r.evaluate_classification(None).unwrap().accuracy, 0.25);
}
