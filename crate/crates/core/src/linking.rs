//! Entity-linking data model and pipeline: lexicon-driven candidate
//! generation, feature assembly, two-stage entity-entity Jaccard features,
//! and the Nil bias knob.
//!
//! The primary data path carries precomputed per-option feature vectors in
//! the corpus files; [`basic_features`] is a self-contained fallback
//! computable from the lexicon alone.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::boosting::{self, BoostConfig, TrainResult};
use crate::error::{Error, Result};
use crate::lattice::{Assignment, MentionLattice, MentionSpan, ScoreTable, NIL_OPTION};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tweet {
    pub id: String,
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconEntry {
    pub entity: String,
    /// Probability of the surface being used as anchor text for the entity.
    pub anchor_prob: f64,
    pub count: u64,
}

/// Maps lowercase surface strings to their candidate entities.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    map: HashMap<String, Vec<LexiconEntry>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, entry: LexiconEntry) -> Result<()> {
        if !(0.0..=1.0).contains(&entry.anchor_prob) {
            return Err(Error::Config(format!(
                "anchor_prob {} for '{surface}' out of [0,1]",
                entry.anchor_prob
            )));
        }
        let entries = self.map.entry(surface.to_lowercase()).or_default();
        if entries.iter().any(|e| e.entity == entry.entity) {
            return Err(Error::Config(format!(
                "duplicate entity '{}' for surface '{surface}'",
                entry.entity
            )));
        }
        entries.push(entry);
        Ok(())
    }

    /// Entries for a surface, matched case-insensitively.
    pub fn lookup(&self, surface: &str) -> Option<&[LexiconEntry]> {
        self.map.get(&surface.to_lowercase()).map(|v| v.as_slice())
    }

    pub fn entry(&self, surface: &str, entity: &str) -> Option<&LexiconEntry> {
        self.lookup(surface)?.iter().find(|e| e.entity == entity)
    }

    pub fn num_surfaces(&self) -> usize {
        self.map.len()
    }
}

/// Entity -> set of page ids that link to it (the Γ sets behind the Jaccard
/// features). Deterministic iteration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinkGraph {
    pages: BTreeMap<String, BTreeSet<String>>,
}

impl LinkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_edge(&mut self, entity: &str, page: &str) {
        self.pages
            .entry(entity.to_string())
            .or_default()
            .insert(page.to_string());
    }

    pub fn pages(&self, entity: &str) -> Option<&BTreeSet<String>> {
        self.pages.get(entity)
    }

    pub fn entities(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.pages.iter()
    }

    pub fn num_entities(&self) -> usize {
        self.pages.len()
    }
}

/// One tweet ready for training or prediction: lattice plus a dense feature
/// vector per (candidate, option) and, at training time, the gold assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkingExample {
    pub tweet: Tweet,
    pub lattice: MentionLattice,
    features: Vec<Vec<Vec<f64>>>,
    feature_dim: usize,
    pub gold: Option<Assignment>,
}

impl LinkingExample {
    /// `features[k][u]` must mirror the lattice's candidate/option layout
    /// (option 0 is Nil) with uniform row length `feature_dim`.
    pub fn new(
        tweet: Tweet,
        lattice: MentionLattice,
        features: Vec<Vec<Vec<f64>>>,
        feature_dim: usize,
        gold: Option<Assignment>,
    ) -> Result<Self> {
        if features.len() != lattice.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} candidates",
                features.len(),
                lattice.len()
            )));
        }
        for (k, rows) in features.iter().enumerate() {
            if rows.len() != lattice.candidate(k).num_options() {
                return Err(Error::Shape(format!(
                    "candidate {k} has {} options but {} feature rows",
                    lattice.candidate(k).num_options(),
                    rows.len()
                )));
            }
            for row in rows {
                if row.len() != feature_dim {
                    return Err(Error::Shape(format!(
                        "feature row of length {} (expected {feature_dim})",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("feature vector".into()));
                }
            }
        }
        if let Some(g) = &gold {
            if !lattice.is_valid(g) {
                return Err(Error::InvalidAssignment("gold assignment"));
            }
        }
        Ok(Self {
            tweet,
            lattice,
            features,
            feature_dim,
            gold,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_candidates(&self) -> usize {
        self.lattice.len()
    }

    pub fn features(&self, k: usize, option: usize) -> &[f64] {
        &self.features[k][option]
    }

    pub fn feature_rows(&self, k: usize) -> &[Vec<f64>] {
        &self.features[k]
    }

    /// Gold links as (span, entity) pairs; `None` for prediction-time
    /// examples.
    pub fn gold_links(&self) -> Option<Vec<(MentionSpan, String)>> {
        self.gold.as_ref().map(|g| g.links(&self.lattice))
    }
}

/// Default n-gram ceiling for candidate generation.
pub const DEFAULT_MAX_NGRAM: usize = 6;

/// Every n-gram (n <= max_ngram) whose lowercase join matches a lexicon
/// surface becomes a candidate carrying that surface's entity list. Output is
/// sorted by (start, end); separate positions of the same n-gram emit
/// separate candidates.
pub fn generate_candidates(
    tweet: &Tweet,
    lexicon: &Lexicon,
    max_ngram: usize,
) -> Vec<(MentionSpan, Vec<String>)> {
    let mut out = Vec::new();
    let len = tweet.tokens.len();
    for start in 0..len {
        for n in 1..=max_ngram.min(len - start) {
            let surface = tweet.tokens[start..start + n].join(" ").to_lowercase();
            if let Some(entries) = lexicon.lookup(&surface) {
                let span = MentionSpan {
                    start,
                    end: start + n,
                };
                out.push((span, entries.iter().map(|e| e.entity.clone()).collect()));
            }
        }
    }
    out.sort_by_key(|(s, _)| (s.start, s.end));
    out
}

/// Number of columns produced by [`basic_features`].
pub const BASIC_FEATURE_DIM: usize = 6;

/// Self-contained fallback feature set for one (span, option) pair:
/// `[anchor_prob, ln(1+count), span token length, capitalization ratio,
/// surface entity count, Nil indicator]`. Entity-specific statistics are zero
/// for the Nil option (`entity = None`).
pub fn basic_features(
    tweet: &Tweet,
    span: MentionSpan,
    entity: Option<&str>,
    lexicon: &Lexicon,
) -> Result<Vec<f64>> {
    if span.end > tweet.tokens.len() {
        return Err(Error::Shape(format!(
            "span ({}, {}) exceeds tweet of {} tokens",
            span.start,
            span.end,
            tweet.tokens.len()
        )));
    }
    let tokens = &tweet.tokens[span.start..span.end];
    let cap_ratio = tokens
        .iter()
        .filter(|t| t.chars().next().is_some_and(|c| c.is_uppercase()))
        .count() as f64
        / tokens.len() as f64;
    let surface = tokens.join(" ").to_lowercase();
    let entries = lexicon.lookup(&surface).unwrap_or(&[]);
    let entity_count = entries.len() as f64;
    let span_len = span.len() as f64;

    match entity {
        None => Ok(vec![0.0, 0.0, span_len, cap_ratio, entity_count, 1.0]),
        Some(e) => {
            let entry = entries.iter().find(|x| x.entity == e).ok_or_else(|| {
                Error::MissingLexiconEntry {
                    surface: surface.clone(),
                    entity: e.to_string(),
                }
            })?;
            Ok(vec![
                entry.anchor_prob,
                (1.0 + entry.count as f64).ln(),
                span_len,
                cap_ratio,
                entity_count,
                0.0,
            ])
        }
    }
}

/// Assemble a prediction-time example from a tweet and a lexicon alone:
/// candidates from n-gram matches, feature rows from [`basic_features`].
pub fn example_from_lexicon(
    tweet: Tweet,
    lexicon: &Lexicon,
    max_ngram: usize,
) -> Result<LinkingExample> {
    let lattice = MentionLattice::build(generate_candidates(&tweet, lexicon, max_ngram))?;
    let mut features = Vec::with_capacity(lattice.len());
    for cand in lattice.candidates() {
        let mut rows = Vec::with_capacity(cand.num_options());
        rows.push(basic_features(&tweet, cand.span(), None, lexicon)?);
        for entity in cand.entities() {
            rows.push(basic_features(&tweet, cand.span(), Some(entity), lexicon)?);
        }
        features.push(rows);
    }
    LinkingExample::new(tweet, lattice, features, BASIC_FEATURE_DIM, None)
}

/// Jaccard overlap between an entity's page set and the union of the page
/// sets of the other first-stage entities. 0 when the union is empty;
/// entities missing from the graph have empty page sets.
pub fn jaccard(entity: &str, first_stage: &BTreeSet<String>, graph: &LinkGraph) -> f64 {
    static EMPTY: BTreeSet<String> = BTreeSet::new();
    let own = graph.pages(entity).unwrap_or(&EMPTY);
    let mut others: BTreeSet<&String> = BTreeSet::new();
    for e in first_stage {
        if e != entity {
            if let Some(pages) = graph.pages(e) {
                others.extend(pages.iter());
            }
        }
    }
    let inter = own.iter().filter(|p| others.contains(p)).count();
    let union = own.len() + others.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Append the two entity-entity columns to every option: `[Jaccard value,
/// max flag]`. The flag is 1 for each entity whose Jaccard value equals the
/// candidate's maximum and that maximum is positive; Nil options get [0, 0].
pub fn entity_entity_features(
    example: &LinkingExample,
    first_stage: &Assignment,
    graph: &LinkGraph,
) -> Result<LinkingExample> {
    if !example.lattice.is_valid(first_stage) {
        return Err(Error::InvalidAssignment("first-stage prediction"));
    }
    let identified: BTreeSet<String> = first_stage
        .links(&example.lattice)
        .into_iter()
        .map(|(_, e)| e)
        .collect();

    let mut features = example.features.clone();
    for (k, rows) in features.iter_mut().enumerate() {
        let cand = example.lattice.candidate(k);
        let jac: Vec<f64> = cand
            .entities()
            .iter()
            .map(|e| jaccard(e, &identified, graph))
            .collect();
        let max_jac = jac.iter().copied().fold(0.0f64, f64::max);
        for (u, row) in rows.iter_mut().enumerate() {
            if u == NIL_OPTION {
                row.extend([0.0, 0.0]);
            } else {
                let j = jac[u - 1];
                let flag = if max_jac > 0.0 && j == max_jac { 1.0 } else { 0.0 };
                row.extend([j, flag]);
            }
        }
    }
    LinkingExample::new(
        example.tweet.clone(),
        example.lattice.clone(),
        features,
        example.feature_dim + 2,
        example.gold.clone(),
    )
}

/// Add the bias term to every Nil score, leaving entity scores untouched.
pub fn apply_nil_bias(scores: &ScoreTable, bias: f64) -> ScoreTable {
    assert!(bias.is_finite(), "nil bias must be finite");
    let mut out = scores.clone();
    for k in 0..out.num_candidates() {
        out.add(k, NIL_OPTION, bias);
    }
    out
}

#[derive(Debug)]
pub struct TwoStageResult {
    pub stage1: TrainResult,
    pub stage2: TrainResult,
}

/// First-stage entity extraction: the Viterbi decode of the stage-1 scores
/// at bias 0. Always Viterbi, whatever the training mode, so the identified
/// set is a valid assignment.
pub fn first_stage_assignment(
    stage1: &crate::boosting::Ensemble,
    example: &LinkingExample,
) -> Result<Assignment> {
    let scores = crate::boosting::score_table(stage1, example)?;
    Ok(crate::lattice::viterbi(&example.lattice, &scores)?.0)
}

/// Two-stage training: fit on base features, decode each training tweet with
/// the stage-1 model (bias 0) to obtain its first-stage entities, append the
/// entity-entity features, and re-train on the augmented corpus.
pub fn two_stage_train(
    corpus: &[LinkingExample],
    config: &BoostConfig,
    graph: &LinkGraph,
) -> Result<TwoStageResult> {
    let stage1 = boosting::train(corpus, config)?;
    let mut augmented = Vec::with_capacity(corpus.len());
    for example in corpus {
        let first = first_stage_assignment(&stage1.ensemble, example)?;
        augmented.push(entity_entity_features(example, &first, graph)?);
    }
    let stage2 = boosting::train(&augmented, config)?;
    Ok(TwoStageResult { stage1, stage2 })
}
