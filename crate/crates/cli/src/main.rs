use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use objprior::config::PipelineConfig;
use objprior::pipeline::{Mode, NamedQuery, Runner, Stage, RETRIEVAL_FILE};
use objprior::semantic::DiscriminationMode;
use objprior::spatial::{Preposition, SpatialDistribution};

/// Zero-shot action localization, classification and tube retrieval from
/// object priors.
#[derive(Parser, Debug)]
#[command(name = "objprior", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Pipeline configuration (JSON).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for stage artifacts.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Recompute upstream stages instead of reading their artifacts.
    #[arg(long, global = true)]
    end_to_end: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Comma-separated embedding languages.
    #[arg(long, global = true, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    #[arg(long, global = true, value_parser = parse_discrimination)]
    discrimination: Option<DiscriminationMode>,
    /// Enable the Beta naming prior on object depth.
    #[arg(long, global = true)]
    naming_prior: bool,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    local_k: Option<usize>,
    #[arg(long, global = true)]
    global_k: Option<usize>,
    #[arg(long, global = true)]
    neighborhood: Option<f64>,
    #[arg(long, global = true)]
    tubes_per_video: Option<usize>,
    /// Person detections only.
    #[arg(long, global = true)]
    no_objects: bool,
    /// Ignore spatial relations (every match counts as 1).
    #[arg(long, global = true)]
    no_spatial: bool,
    /// Drop the local (box) evidence.
    #[arg(long, global = true)]
    no_local: bool,
    /// Drop the global (video) evidence.
    #[arg(long, global = true)]
    no_global: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Aggregate person-object relations from the annotation corpus.
    BuildSpatialPriors,
    /// Select local and global objects per action.
    RankObjects,
    /// Score every person box for every action.
    ScoreBoxes,
    /// Link scored boxes into tubes.
    LinkTubes,
    /// Rank tubes per action by fused score.
    Localize,
    /// Score every action for every video.
    Classify,
    /// Rank tubes against an object/relation/size query.
    Retrieve(RetrieveArgs),
    /// AP and AUC of the localization ranking against ground truth.
    EvaluateLocalization,
    /// Accuracy of the classification, optionally over random action subsets.
    EvaluateClassification {
        /// Actions per random subset.
        #[arg(long)]
        subset_size: Option<usize>,
        /// Number of random subsets.
        #[arg(long)]
        subset_runs: Option<usize>,
    },
    /// Write the synthetic planted corpus.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    /// Local object class.
    #[arg(long)]
    object: String,
    /// One preposition cell (e.g. `above`, `below-left`).
    #[arg(long, conflicts_with = "relation_weights")]
    relation: Option<String>,
    /// Nine comma-separated cell weights, row by row from above-left.
    #[arg(long, value_delimiter = ',')]
    relation_weights: Option<Vec<f64>>,
    /// Desired object/person area ratio.
    #[arg(long)]
    size_ratio: Option<f64>,
    /// Output file (default: retrieval.json in the work directory).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_discrimination(s: &str) -> Result<DiscriminationMode, String> {
    match s {
        "off" => Ok(DiscriminationMode::Off),
        "action" => Ok(DiscriminationMode::Action),
        "object" => Ok(DiscriminationMode::Object),
        _ => Err(format!("expected off, action or object, got `{s}`")),
    }
}

fn build_config(g: &GlobalOpts) -> anyhow::Result<PipelineConfig> {
    let Some(path) = &g.config else {
        return Err(objprior::Error::Config("--config is required for this command".into()).into());
    };
    let mut cfg = PipelineConfig::from_file(path)?;
    let o = &g.overrides;
    if let Some(l) = &o.languages {
        cfg.languages = l.clone();
    }
    if let Some(d) = o.discrimination {
        cfg.discrimination = d;
    }
    if o.naming_prior {
        cfg.use_naming_prior = true;
    }
    if let Some(a) = o.alpha {
        cfg.naming.alpha = a;
    }
    if let Some(b) = o.beta {
        cfg.naming.beta = b;
    }
    if let Some(k) = o.local_k {
        cfg.scorer.local_k = k;
    }
    if let Some(k) = o.global_k {
        cfg.fusion.global_k = k;
    }
    if let Some(n) = o.neighborhood {
        cfg.scorer.neighborhood_px = n;
    }
    if let Some(t) = o.tubes_per_video {
        cfg.linker.tubes_per_video = t;
    }
    if o.no_objects {
        cfg.scorer.use_objects = false;
    }
    if o.no_spatial {
        cfg.scorer.use_spatial_relations = false;
    }
    if o.no_local {
        cfg.fusion.use_local = false;
    }
    if o.no_global {
        cfg.fusion.use_global = false;
    }
    if let Some(s) = g.seed {
        cfg.eval.rng_seed = s;
    }
    if let Some(w) = &g.work_dir {
        cfg.paths.work_dir = Some(w.clone());
    }
    Ok(cfg)
}

fn query(args: &RetrieveArgs) -> anyhow::Result<NamedQuery> {
    let relation = match (&args.relation, &args.relation_weights) {
        (Some(r), None) => {
            let cell = Preposition::parse(r)
                .ok_or_else(|| objprior::Error::Config(format!("unknown preposition `{r}`")))?;
            SpatialDistribution::one_hot(cell)
        }
        (None, Some(w)) => {
            let arr: [f64; 9] = w
                .as_slice()
                .try_into()
                .map_err(|_| objprior::Error::Config(format!("--relation-weights needs 9 values, got {}", w.len())))?;
            SpatialDistribution::new(arr)?
        }
        _ => bail!(objprior::Error::Config("give --relation or --relation-weights".into())),
    };
    Ok(NamedQuery {
        object: args.object.clone(),
        relation,
        size_ratio: args.size_ratio,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if let Command::GenFixtures { out } = &cli.command {
        let summary = objprior::fixtures::generate(out, cli.global.seed.unwrap_or(0))?;
        println!("{}", summary.config.display());
        return Ok(());
    }
    let mut cfg = build_config(&cli.global)?;
    let mode = if cli.global.end_to_end { Mode::EndToEnd } else { Mode::Staged };
    if let Command::EvaluateClassification { subset_runs: Some(r), .. } = &cli.command {
        cfg.eval.subset_runs = *r;
    }
    let runner = Runner::new(cfg, mode)?;
    let stage = match &cli.command {
        Command::BuildSpatialPriors => Some(Stage::BuildSpatialPriors),
        Command::RankObjects => Some(Stage::RankObjects),
        Command::ScoreBoxes => Some(Stage::ScoreBoxes),
        Command::LinkTubes => Some(Stage::LinkTubes),
        Command::Localize => Some(Stage::Localize),
        Command::Classify => Some(Stage::Classify),
        _ => None,
    };
    if let Some(stage) = stage {
        println!("{}", runner.run(stage)?.display());
        return Ok(());
    }
    match &cli.command {
        Command::Retrieve(args) => {
            let result = runner.retrieve(&query(args)?)?;
            let path = args.output.clone().unwrap_or_else(|| runner.artifact_path(RETRIEVAL_FILE));
            objprior::io::write_json(&path, &result)?;
            for t in result.tubes.iter().take(5) {
                let first = &t.tube.elements[0];
                println!(
                    "{}\t{:.6}\tframes {}-{}\tfirst box {:?}",
                    t.video_id,
                    t.score,
                    first.frame_index,
                    t.tube.elements.last().map_or(first.frame_index, |e| e.frame_index),
                    first.bbox.to_array()
                );
            }
            println!("{}", path.display());
        }
        Command::EvaluateLocalization => {
            let report = runner.evaluate_localization()?;
            let path = runner.write_artifact(objprior::pipeline::LOCALIZATION_REPORT_FILE, &report)?;
            for t in &report.tubes.thresholds {
                println!("tau {:.2}\tmAP {}\tAUC {}", t.threshold, fmt_opt(t.map), fmt_opt(t.auc));
            }
            println!("frame-mAP@{:.1}\t{}", report.frame_threshold, fmt_opt(report.frame_map));
            println!("{}", path.display());
        }
        Command::EvaluateClassification { subset_size, .. } => {
            let report = runner.evaluate_classification(*subset_size)?;
            let path = runner.write_artifact(objprior::pipeline::CLASSIFICATION_REPORT_FILE, &report)?;
            println!("accuracy {:.4} over {} videos", report.accuracy, report.num_videos);
            if let Some(s) = &report.subset {
                println!(
                    "subset of {}: mean {:.4} std {:.4} over {} runs",
                    s.size, s.mean_accuracy, s.std_accuracy, s.runs
                );
            }
            println!("{}", path.display());
        }
        _ => unreachable!("handled above"),
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let data = e
                .downcast_ref::<objprior::Error>()
                .is_none_or(objprior::Error::is_data_error);
            ExitCode::from(if data { 2 } else { 1 })
        }
    }
}
