use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box {0:?}: positive area required")]
    DegenerateBox([f64; 4]),

    #[error("invalid spatial distribution: {0}")]
    InvalidDistribution(String),

    #[error("no spatial prior for object `{0}`")]
    MissingPrior(String),

    #[error("no word of `{term}` is in the {language} embedding table")]
    OutOfVocabulary { term: String, language: String },

    #[error("cosine similarity of a zero vector")]
    ZeroVector,

    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no {language} translation for `{term}`")]
    MissingTranslation { language: String, term: String },

    #[error("no embedding table for language `{0}`")]
    MissingLanguage(String),

    #[error("discrimination needs at least two {0}")]
    TooFewCandidates(&'static str),

    #[error("beta parameters must be positive, got alpha={alpha} beta={beta}")]
    InvalidBeta { alpha: f64, beta: f64 },

    #[error("no depth for object `{0}`")]
    MissingDepth(String),

    #[error("k={k} out of range for a vocabulary of {len}")]
    KOutOfRange { k: usize, len: usize },

    #[error("frames {0} and {1} are not consecutive")]
    NonConsecutiveFrames(u32, u32),

    #[error("no boxes to link")]
    NoBoxes,

    #[error("empty tube")]
    EmptyTube,

    #[error("score vector has {found} entries, vocabulary has {expected}")]
    VocabularyMismatch { expected: usize, found: usize },

    #[error("tube localization requires local object priors (use_local is off)")]
    LocalPriorsRequired,

    #[error("tubes come from different videos: `{0}` vs `{1}`")]
    DifferentVideos(String, String),

    #[error("cannot sample {n} actions out of {len}")]
    SubsetTooLarge { n: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{location}: {message}")]
    Schema { location: String, message: String },

    #[error("{location}: unknown {kind} `{name}`")]
    UnknownClass {
        location: String,
        kind: &'static str,
        name: String,
    },

    #[error("{location}: `{term}` has {found} components, expected {expected}")]
    DimensionMismatch {
        location: String,
        term: String,
        expected: usize,
        found: usize,
    },

    #[error("{location}: non-finite number")]
    NonFinite { location: String },

    #[error("{location}: {what} {value} out of range")]
    Range {
        location: String,
        what: &'static str,
        value: f64,
    },

    #[error("missing artifact {path:?}; run `{producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("{path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input data rather than bad invocation.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::MissingArtifact { .. })
    }
}
