//! Action-object semantic matching: word-embedding similarity, its
//! multi-lingual average, discrimination adjustments, the naming-depth
//! weight and top-k object selection.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::Vocabulary;

pub const MIN_DEPTH: i64 = 2;
pub const MAX_DEPTH: i64 = 18;
const DEPTH_EPS: f64 = 1e-3;

/// Word vectors for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    language: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(language: impl Into<String>, dim: usize) -> Self {
        Self {
            language: language.into(),
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::LengthMismatch(vector.len(), self.dim));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("{} embedding", self.language),
            });
        }
        self.vectors.insert(term.into(), vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Vector of a term. A term stored verbatim is returned as is; otherwise
    /// the term is split on whitespace and underscores and the in-vocabulary
    /// word vectors are averaged.
    pub fn embed(&self, term: &str) -> Result<Vec<f64>> {
        if let Some(v) = self.get(term) {
            return Ok(v.to_vec());
        }
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for word in term.split(|c: char| c.is_whitespace() || c == '_').filter(|w| !w.is_empty()) {
            if let Some(v) = self.get(word) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                found += 1;
            }
        }
        if found == 0 {
            return Err(Error::OutOfVocabulary {
                term: term.to_string(),
                language: self.language.clone(),
            });
        }
        let n = found as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Ok(sum)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

/// Ψ: cosine between the embedded object and action terms.
pub fn pair_similarity(object: &str, action: &str, table: &EmbeddingTable) -> Result<f64> {
    cosine_sim(&table.embed(object)?, &table.embed(action)?)
}

/// Canonical term to per-language phrase.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultilingualLexicon {
    translations: BTreeMap<String, HashMap<String, String>>,
}

impl MultilingualLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lexicon mapping every term to itself in `language`.
    pub fn identity<'a>(language: &str, terms: impl IntoIterator<Item = &'a str>) -> Self {
        let mut lex = Self::new();
        for t in terms {
            lex.insert(language, t, t);
        }
        lex
    }

    pub fn insert(&mut self, language: &str, term: &str, phrase: &str) {
        self.translations
            .entry(language.to_string())
            .or_default()
            .insert(term.to_string(), phrase.to_string());
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.translations.keys().map(String::as_str)
    }

    pub fn translate(&self, language: &str, term: &str) -> Result<&str> {
        self.translations
            .get(language)
            .and_then(|m| m.get(term))
            .map(String::as_str)
            .ok_or_else(|| Error::MissingTranslation {
                language: language.to_string(),
                term: term.to_string(),
            })
    }
}

/// Ψ_L: mean over `languages` of the cosine between translated terms.
pub fn multilingual_similarity(
    object: &str,
    action: &str,
    lexicon: &MultilingualLexicon,
    tables: &HashMap<String, EmbeddingTable>,
    languages: &[String],
) -> Result<f64> {
    if languages.is_empty() {
        return Err(Error::Config("no languages selected".into()));
    }
    let mut sum = 0.0;
    for lang in languages {
        let table = tables
            .get(lang)
            .ok_or_else(|| Error::MissingLanguage(lang.clone()))?;
        let o = lexicon.translate(lang, object)?;
        let a = lexicon.translate(lang, action)?;
        sum += pair_similarity(o, a, table)?;
    }
    Ok(sum / languages.len() as f64)
}

/// Anything that scores the semantic relatedness of two canonical terms.
pub trait SimilarityProvider: Sync {
    fn similarity(&self, a: &str, b: &str) -> Result<f64>;
}

impl<F> SimilarityProvider for F
where
    F: Fn(&str, &str) -> Result<f64> + Sync,
{
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        self(a, b)
    }
}

struct LanguageVectors {
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

/// Pre-embedded terms for one or more languages. Similarity is the mean
/// cosine over languages, so a single language gives plain Ψ and several
/// give Ψ_L.
pub struct SemanticSpace {
    languages: Vec<String>,
    per_language: Vec<LanguageVectors>,
    index: HashMap<String, usize>,
}

impl SemanticSpace {
    /// Embeds canonical terms directly in one table.
    pub fn monolingual<'a>(
        table: &EmbeddingTable,
        terms: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let terms: Vec<&str> = terms.into_iter().collect();
        let lex = MultilingualLexicon::identity(table.language(), terms.iter().copied());
        let mut tables = HashMap::new();
        tables.insert(table.language().to_string(), table.clone());
        Self::multilingual(&lex, &tables, &[table.language().to_string()], terms)
    }

    /// Translates and embeds terms in every listed language.
    pub fn multilingual<'a>(
        lexicon: &MultilingualLexicon,
        tables: &HashMap<String, EmbeddingTable>,
        languages: &[String],
        terms: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        if languages.is_empty() {
            return Err(Error::Config("no languages selected".into()));
        }
        let mut index = HashMap::new();
        let mut ordered = Vec::new();
        for t in terms {
            if !index.contains_key(t) {
                index.insert(t.to_string(), ordered.len());
                ordered.push(t);
            }
        }
        let per_language = languages
            .iter()
            .map(|lang| {
                let table = tables
                    .get(lang)
                    .ok_or_else(|| Error::MissingLanguage(lang.clone()))?;
                let vectors = ordered
                    .par_iter()
                    .map(|t| table.embed(lexicon.translate(lang, t)?))
                    .collect::<Result<Vec<_>>>()?;
                let norms: Vec<f64> = vectors.iter().map(|v| norm(v)).collect();
                if let Some(i) = norms.iter().position(|n| *n == 0.0) {
                    log::warn!("`{}` embeds to a zero vector in {lang}", ordered[i]);
                }
                Ok(LanguageVectors { vectors, norms })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            languages: languages.to_vec(),
            per_language,
            index,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    fn position(&self, term: &str) -> Result<usize> {
        self.index.get(term).copied().ok_or_else(|| Error::OutOfVocabulary {
            term: term.to_string(),
            language: self.languages.join("+"),
        })
    }
}

impl SimilarityProvider for SemanticSpace {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let (i, j) = (self.position(a)?, self.position(b)?);
        let mut sum = 0.0;
        for lv in &self.per_language {
            let (ni, nj) = (lv.norms[i], lv.norms[j]);
            if ni == 0.0 || nj == 0.0 {
                return Err(Error::ZeroVector);
            }
            sum += cosine_with_norms(&lv.vectors[i], &lv.vectors[j], ni, nj);
        }
        Ok(sum / self.per_language.len() as f64)
    }
}

/// r_a: similarity to `action` minus the best similarity to any other action.
pub fn action_discrimination<P: SimilarityProvider + ?Sized>(
    provider: &P,
    object: &str,
    action: &str,
    all_actions: &[&str],
) -> Result<f64> {
    if all_actions.len() < 2 {
        return Err(Error::TooFewCandidates("actions"));
    }
    let own = provider.similarity(object, action)?;
    let mut best = f64::NEG_INFINITY;
    for c in all_actions.iter().filter(|c| **c != action) {
        best = best.max(provider.similarity(object, c)?);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::TooFewCandidates("actions"));
    }
    Ok(own - best)
}

/// Uniqueness penalty of an object: sum of square-rooted (clamped)
/// similarities to every other object, divided by the full set size.
pub fn object_penalty<P: SimilarityProvider + ?Sized>(
    provider: &P,
    object: &str,
    all_objects: &[&str],
) -> Result<f64> {
    if all_objects.len() < 2 {
        return Err(Error::TooFewCandidates("objects"));
    }
    let mut sum = 0.0;
    for other in all_objects.iter().filter(|o| **o != object) {
        sum += provider.similarity(object, other)?.clamp(0.0, 1.0).sqrt();
    }
    Ok(sum / all_objects.len() as f64)
}

/// r_o: similarity to `action` minus the object's uniqueness penalty.
pub fn object_discrimination<P: SimilarityProvider + ?Sized>(
    provider: &P,
    object: &str,
    action: &str,
    all_objects: &[&str],
) -> Result<f64> {
    let penalty = object_penalty(provider, object, all_objects)?;
    Ok(provider.similarity(object, action)? - penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NamingPriorConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for NamingPriorConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 2.0,
        }
    }
}

impl NamingPriorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidBeta {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }
}

/// Hierarchy depth of object names, keyed by canonical term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectDepthTable {
    depths: HashMap<String, i64>,
}

impl ObjectDepthTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: impl Into<String>, depth: i64) {
        self.depths.insert(term.into(), depth.clamp(MIN_DEPTH, MAX_DEPTH));
    }

    pub fn get(&self, term: &str) -> Option<i64> {
        self.depths.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

/// Depth mapped to [0, 1] over the [2, 18] range, kept off the endpoints.
pub fn normalized_depth(depth: i64) -> f64 {
    let d = (depth.clamp(MIN_DEPTH, MAX_DEPTH) - MIN_DEPTH) as f64 / (MAX_DEPTH - MIN_DEPTH) as f64;
    d.clamp(DEPTH_EPS, 1.0 - DEPTH_EPS)
}

/// Beta density at the normalized depth.
pub fn naming_weight(depth: i64, config: &NamingPriorConfig) -> Result<f64> {
    config.validate()?;
    let d = normalized_depth(depth);
    let (a, b) = (config.alpha, config.beta);
    match (small_integer(a), small_integer(b)) {
        (Some(ia), Some(ib)) => {
            // B(a, b) = (a-1)! (b-1)! / (a+b-1)!, exact for small integers.
            let inv_beta = factorial(ia + ib - 1) / (factorial(ia - 1) * factorial(ib - 1));
            Ok(d.powi(ia as i32 - 1) * (1.0 - d).powi(ib as i32 - 1) * inv_beta)
        }
        _ => {
            let log_density = (a - 1.0) * d.ln() + (b - 1.0) * (1.0 - d).ln() - ln_beta(a, b);
            Ok(log_density.exp())
        }
    }
}

fn small_integer(x: f64) -> Option<u32> {
    (x.fract() == 0.0 && (1.0..=20.0).contains(&x)).then_some(x as u32)
}

fn factorial(n: u32) -> f64 {
    (2..=n).map(f64::from).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminationMode {
    #[default]
    Off,
    Action,
    Object,
}

/// (similarity + discrimination) * naming weight.
pub fn combined_object_weight(similarity: f64, discrimination: f64, naming: f64) -> f64 {
    (similarity + discrimination) * naming
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedObject {
    pub object_id: usize,
    pub weight: f64,
}

/// The `k` largest weights, descending, ties by ascending id.
pub fn select_top_k(weights: &[f64], k: usize) -> Result<Vec<RankedObject>> {
    if k == 0 || k > weights.len() {
        return Err(Error::KOutOfRange {
            k,
            len: weights.len(),
        });
    }
    let mut ranked: Vec<RankedObject> = weights
        .iter()
        .enumerate()
        .map(|(object_id, &weight)| RankedObject { object_id, weight })
        .collect();
    ranked.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.object_id.cmp(&b.object_id))
    });
    ranked.truncate(k);
    Ok(ranked)
}

/// Top-k weighted objects per action; index is the action id.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionObjectWeights {
    pub per_action: Vec<Vec<RankedObject>>,
}

impl ActionObjectWeights {
    pub fn for_action(&self, action_id: usize) -> &[RankedObject] {
        &self.per_action[action_id]
    }
}

/// Computes combined action-object weights over an object vocabulary.
/// `similarity` is whichever provider is configured (Ψ or Ψ_L); it is used
/// uniformly, including inside the discrimination terms.
pub struct ObjectWeighter<'a> {
    pub similarity: &'a dyn SimilarityProvider,
    pub discrimination: DiscriminationMode,
    pub naming: Option<(NamingPriorConfig, &'a ObjectDepthTable)>,
    pub objects: &'a Vocabulary,
    pub actions: &'a Vocabulary,
    /// Object ids excluded from ranking (they get `-inf`).
    pub excluded: Vec<usize>,
}

impl<'a> ObjectWeighter<'a> {
    fn naming_for(&self, object: &str) -> Result<f64> {
        match &self.naming {
            None => Ok(1.0),
            Some((cfg, depths)) => {
                let d = depths
                    .get(object)
                    .ok_or_else(|| Error::MissingDepth(object.to_string()))?;
                naming_weight(d, cfg)
            }
        }
    }

    fn candidate_objects(&self) -> Vec<&str> {
        self.objects
            .names()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.excluded.contains(i))
            .map(|(_, n)| n.as_str())
            .collect()
    }

    /// Weight of a single pair, evaluated term by term.
    pub fn weight(&self, object_id: usize, action_id: usize) -> Result<f64> {
        let object = self.objects.name(object_id);
        let action = self.actions.name(action_id);
        let sim = self.similarity.similarity(object, action)?;
        let delta = match self.discrimination {
            DiscriminationMode::Off => 0.0,
            DiscriminationMode::Action => {
                let all: Vec<&str> = self.actions.names().iter().map(String::as_str).collect();
                action_discrimination(self.similarity, object, action, &all)?
            }
            DiscriminationMode::Object => {
                object_discrimination(self.similarity, object, action, &self.candidate_objects())?
            }
        };
        Ok(combined_object_weight(sim, delta, self.naming_for(object)?))
    }

    /// Full `[action][object]` weight matrix. Shared terms are computed
    /// once; values equal [`Self::weight`] exactly.
    pub fn weight_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let objects: Vec<&str> = self.objects.names().iter().map(String::as_str).collect();
        let candidates = self.candidate_objects();
        let sims: Vec<Vec<f64>> = self
            .actions
            .names()
            .par_iter()
            .map(|a| {
                objects
                    .iter()
                    .enumerate()
                    .map(|(i, o)| {
                        if self.excluded.contains(&i) {
                            Ok(0.0)
                        } else {
                            self.similarity.similarity(o, a)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let naming: Vec<f64> = objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                if self.excluded.contains(&i) {
                    Ok(1.0)
                } else {
                    self.naming_for(o)
                }
            })
            .collect::<Result<_>>()?;

        let n_actions = sims.len();
        let deltas: Vec<Vec<f64>> = match self.discrimination {
            DiscriminationMode::Off => vec![vec![0.0; objects.len()]; n_actions],
            DiscriminationMode::Action => {
                if n_actions < 2 {
                    return Err(Error::TooFewCandidates("actions"));
                }
                (0..n_actions)
                    .map(|a| {
                        (0..objects.len())
                            .map(|g| {
                                let best = (0..n_actions)
                                    .filter(|c| *c != a)
                                    .map(|c| sims[c][g])
                                    .fold(f64::NEG_INFINITY, f64::max);
                                sims[a][g] - best
                            })
                            .collect()
                    })
                    .collect()
            }
            DiscriminationMode::Object => {
                let penalties: Vec<f64> = objects
                    .par_iter()
                    .enumerate()
                    .map(|(i, o)| {
                        if self.excluded.contains(&i) {
                            Ok(0.0)
                        } else {
                            object_penalty(self.similarity, o, &candidates)
                        }
                    })
                    .collect::<Result<_>>()?;
                (0..n_actions)
                    .map(|a| (0..objects.len()).map(|g| sims[a][g] - penalties[g]).collect())
                    .collect()
            }
        };

        Ok((0..n_actions)
            .map(|a| {
                (0..objects.len())
                    .map(|g| {
                        if self.excluded.contains(&g) {
                            f64::NEG_INFINITY
                        } else {
                            combined_object_weight(sims[a][g], deltas[a][g], naming[g])
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Top-k objects per action; `k` is capped at the number of candidates.
    pub fn rank(&self, k: usize) -> Result<ActionObjectWeights> {
        let available = self.objects.len() - self.excluded.len();
        let k_eff = k.min(available);
        if k_eff < k {
            log::warn!("top-{k} requested from {available} candidate objects; using {k_eff}");
        }
        let matrix = self.weight_matrix()?;
        let per_action = matrix
            .iter()
            .map(|w| select_top_k(w, k_eff))
            .collect::<Result<_>>()?;
        Ok(ActionObjectWeights { per_action })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VocabularyKind;

    fn table(lang: &str, rows: &[(&str, [f64; 3])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(lang, 3);
        for (k, v) in rows {
            t.insert(*k, v.to_vec()).unwrap();
        }
        t
    }

    fn english() -> EmbeddingTable {
        table(
            "english",
            &[
                ("horse", [1.0, 0.2, 0.0]),
                ("riding", [0.8, 0.0, 0.3]),
                ("kite", [0.0, 1.0, 0.1]),
                ("flying", [0.1, 0.9, 0.4]),
                ("ball", [0.3, 0.3, 0.9]),
                ("kicking", [0.2, 0.1, 1.0]),
                ("zero", [0.0, 0.0, 0.0]),
            ],
        )
    }

    #[test]
    fn embed_rules() {
        let t = english();
        assert_eq!(t.embed("horse").unwrap(), vec![1.0, 0.2, 0.0]);
        let v = t.embed("horse riding").unwrap();
        for (x, y) in v.iter().zip([0.9, 0.1, 0.15]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(t.embed("horse unicorn").unwrap(), vec![1.0, 0.2, 0.0]);
        assert_eq!(t.embed("golf_ball").unwrap(), vec![0.3, 0.3, 0.9]);
        assert!(matches!(t.embed("unicorn glitter"), Err(Error::OutOfVocabulary { .. })));
    }

    #[test]
    fn embedding_insert_validates() {
        let mut t = EmbeddingTable::new("english", 2);
        assert!(t.insert("a", vec![1.0]).is_err());
        assert!(t.insert("a", vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3, -1.2, 2.0];
        assert!((cosine_sim(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine_sim(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        let t = english();
        assert!(matches!(pair_similarity("zero", "kite", &t), Err(Error::ZeroVector)));
        assert!((pair_similarity("kite", "kite", &t).unwrap() - 1.0).abs() < 1e-15);
    }

    fn two_languages() -> (MultilingualLexicon, HashMap<String, EmbeddingTable>) {
        let mut lex = MultilingualLexicon::identity("english", ["horse", "kite", "horse riding"]);
        lex.insert("dutch", "horse", "paard");
        lex.insert("dutch", "kite", "vlieger");
        lex.insert("dutch", "horse riding", "paardrijden");
        let dutch = table(
            "dutch",
            &[
                ("paard", [1.0, 0.0, 0.0]),
                ("vlieger", [0.0, 1.0, 0.0]),
                ("paardrijden", [0.6, 0.0, 0.8]),
            ],
        );
        let mut tables = HashMap::new();
        tables.insert("english".to_string(), english());
        tables.insert("dutch".to_string(), dutch);
        (lex, tables)
    }

    #[test]
    fn multilingual_mean() {
        let (lex, tables) = two_languages();
        let en = pair_similarity("horse", "horse riding", &tables["english"]).unwrap();
        let one = multilingual_similarity("horse", "horse riding", &lex, &tables, &["english".into()])
            .unwrap();
        assert_eq!(one, en);
        let both = multilingual_similarity(
            "horse",
            "horse riding",
            &lex,
            &tables,
            &["english".into(), "dutch".into()],
        )
        .unwrap();
        assert!((both - (en + 0.6) / 2.0).abs() < 1e-12);

        let err = multilingual_similarity("ball", "horse riding", &lex, &tables, &["dutch".into()]);
        assert!(matches!(err, Err(Error::MissingTranslation { .. })));
        let err = multilingual_similarity("horse", "kite", &lex, &tables, &["french".into()]);
        assert!(matches!(err, Err(Error::MissingLanguage(_))));
    }

    #[test]
    fn space_matches_free_functions() {
        let (lex, tables) = two_languages();
        let langs = vec!["english".to_string(), "dutch".to_string()];
        let space =
            SemanticSpace::multilingual(&lex, &tables, &langs, ["horse", "kite", "horse riding"]).unwrap();
        for (o, a) in [("horse", "horse riding"), ("kite", "horse riding"), ("horse", "kite")] {
            assert_eq!(
                space.similarity(o, a).unwrap(),
                multilingual_similarity(o, a, &lex, &tables, &langs).unwrap()
            );
        }
        let mono = SemanticSpace::monolingual(&tables["english"], ["kite", "horse riding"]).unwrap();
        assert_eq!(
            mono.similarity("kite", "horse riding").unwrap(),
            pair_similarity("kite", "horse riding", &tables["english"]).unwrap()
        );
    }

    fn fixed(values: &'static [(&'static str, &'static str, f64)]) -> impl SimilarityProvider {
        move |a: &str, b: &str| -> Result<f64> {
            values
                .iter()
                .find(|(x, y, _)| (*x == a && *y == b) || (*x == b && *y == a))
                .map(|v| v.2)
                .ok_or(Error::ZeroVector)
        }
    }

    #[test]
    fn action_discrimination_examples() {
        let p = fixed(&[("g", "a", 0.9), ("g", "b", 0.5), ("g", "c", 0.3)]);
        assert!((action_discrimination(&p, "g", "a", &["a", "b", "c"]).unwrap() - 0.4).abs() < 1e-12);
        let eq = fixed(&[("g", "a", 0.5), ("g", "b", 0.5)]);
        assert_eq!(action_discrimination(&eq, "g", "a", &["a", "b"]).unwrap(), 0.0);
        let lo = fixed(&[("g", "a", 0.3), ("g", "b", 0.7)]);
        assert!((action_discrimination(&lo, "g", "a", &["a", "b"]).unwrap() + 0.4).abs() < 1e-12);
        assert!(matches!(
            action_discrimination(&lo, "g", "a", &["a"]),
            Err(Error::TooFewCandidates(_))
        ));
    }

    #[test]
    fn object_discrimination_examples() {
        let p = fixed(&[("g", "a", 0.9), ("g", "h", 0.25), ("g", "i", 0.81)]);
        let v = object_discrimination(&p, "g", "a", &["g", "h", "i"]).unwrap();
        assert!((v - (0.9 - (0.5 + 0.9) / 3.0)).abs() < 1e-12);
        assert!((v - 0.433_333_333_333).abs() < 1e-9);

        let zero = fixed(&[("g", "a", 0.9), ("g", "h", 0.0), ("g", "i", 0.0)]);
        assert_eq!(object_discrimination(&zero, "g", "a", &["g", "h", "i"]).unwrap(), 0.9);
        let neg = fixed(&[("g", "a", 0.9), ("g", "h", -0.64), ("g", "i", 0.0)]);
        assert_eq!(object_discrimination(&neg, "g", "a", &["g", "h", "i"]).unwrap(), 0.9);
        assert!(object_discrimination(&neg, "g", "a", &["g"]).is_err());
    }

    #[test]
    fn naming_weight_examples() {
        let uniform = NamingPriorConfig { alpha: 1.0, beta: 1.0 };
        for depth in 0..25 {
            assert_eq!(naming_weight(depth, &uniform).unwrap(), 1.0);
        }
        let basic = NamingPriorConfig::default();
        assert!((naming_weight(10, &basic).unwrap() - 1.5).abs() < 1e-12);
        let eps = 1e-3;
        let edge = 6.0 * eps * (1.0 - eps);
        assert!((naming_weight(2, &basic).unwrap() - edge).abs() < 1e-12);
        assert!((naming_weight(2, &basic).unwrap() - 0.005994).abs() < 1e-6);
        assert!((naming_weight(18, &basic).unwrap() - edge).abs() < 1e-12);
        assert!(naming_weight(5, &NamingPriorConfig { alpha: 0.0, beta: 1.0 }).is_err());
        assert!(naming_weight(5, &NamingPriorConfig { alpha: 1.0, beta: -2.0 }).is_err());
        // Non-integer parameters go through the log-gamma path.
        let half = NamingPriorConfig { alpha: 2.5, beta: 2.5 };
        let d: f64 = 0.5;
        let expected = d.powf(1.5) * (1.0 - d).powf(1.5) / statrs::function::beta::beta(2.5, 2.5);
        assert!((naming_weight(10, &half).unwrap() - expected).abs() < 1e-12);
        // Generic-focused weighting favours shallow names.
        let generic = NamingPriorConfig { alpha: 1.0, beta: 5.0 };
        assert!(naming_weight(3, &generic).unwrap() > naming_weight(15, &generic).unwrap());
    }

    #[test]
    fn combined_weight_arithmetic() {
        assert!((combined_object_weight(0.7, 0.1, 1.5) - 1.2).abs() < 1e-12);
        assert_eq!(combined_object_weight(0.7, 0.0, 1.0), 0.7);
    }

    #[test]
    fn top_k_examples() {
        let w = [0.9, 0.1, 0.5];
        let ids: Vec<usize> = select_top_k(&w, 2).unwrap().iter().map(|r| r.object_id).collect();
        assert_eq!(ids, vec![0, 2]);
        let ids: Vec<usize> = select_top_k(&w, 3).unwrap().iter().map(|r| r.object_id).collect();
        assert_eq!(ids, vec![0, 2, 1]);
        let tied: Vec<usize> = select_top_k(&[0.3, 0.7, 0.7], 3)
            .unwrap()
            .iter()
            .map(|r| r.object_id)
            .collect();
        assert_eq!(tied, vec![1, 2, 0]);
        assert!(select_top_k(&w, 0).is_err());
        assert!(select_top_k(&w, 4).is_err());
    }

    fn weighter_fixture() -> (Vocabulary, Vocabulary, EmbeddingTable, ObjectDepthTable) {
        let objects = Vocabulary::new(VocabularyKind::GlobalObject, ["horse", "kite", "ball"]).unwrap();
        let actions =
            Vocabulary::new(VocabularyKind::Action, ["horse riding", "kite flying", "kicking"]).unwrap();
        let mut depths = ObjectDepthTable::new();
        depths.insert("horse", 10);
        depths.insert("kite", 4);
        depths.insert("ball", 16);
        (objects, actions, english(), depths)
    }

    #[test]
    fn weighter_matrix_equals_pairwise() {
        let (objects, actions, en, depths) = weighter_fixture();
        let terms = objects.names().iter().chain(actions.names()).map(String::as_str);
        let space = SemanticSpace::monolingual(&en, terms).unwrap();
        for mode in [DiscriminationMode::Off, DiscriminationMode::Action, DiscriminationMode::Object] {
            for naming in [None, Some((NamingPriorConfig::default(), &depths))] {
                let w = ObjectWeighter {
                    similarity: &space,
                    discrimination: mode,
                    naming,
                    objects: &objects,
                    actions: &actions,
                    excluded: vec![],
                };
                let m = w.weight_matrix().unwrap();
                for (a, row) in m.iter().enumerate() {
                    for (g, v) in row.iter().enumerate() {
                        assert_eq!(*v, w.weight(g, a).unwrap(), "{mode:?} a={a} g={g}");
                    }
                }
            }
        }
    }

    #[test]
    fn weighter_all_priors_off_is_plain_similarity() {
        let (objects, actions, en, _) = weighter_fixture();
        let terms = objects.names().iter().chain(actions.names()).map(String::as_str);
        let space = SemanticSpace::monolingual(&en, terms).unwrap();
        let w = ObjectWeighter {
            similarity: &space,
            discrimination: DiscriminationMode::Off,
            naming: None,
            objects: &objects,
            actions: &actions,
            excluded: vec![],
        };
        assert_eq!(
            w.weight(0, 0).unwrap(),
            pair_similarity("horse", "horse riding", &en).unwrap()
        );
        let r = w.rank(1).unwrap();
        assert_eq!(r.for_action(0)[0].object_id, 0);
        assert_eq!(r.for_action(1)[0].object_id, 1);
        assert_eq!(r.for_action(2)[0].object_id, 2);
    }

    #[test]
    fn weighter_missing_depth_errors() {
        let (objects, actions, en, _) = weighter_fixture();
        let terms = objects.names().iter().chain(actions.names()).map(String::as_str);
        let space = SemanticSpace::monolingual(&en, terms).unwrap();
        let empty = ObjectDepthTable::new();
        let w = ObjectWeighter {
            similarity: &space,
            discrimination: DiscriminationMode::Off,
            naming: Some((NamingPriorConfig::default(), &empty)),
            objects: &objects,
            actions: &actions,
            excluded: vec![],
        };
        assert!(matches!(w.weight_matrix(), Err(Error::MissingDepth(_))));
    }
}

