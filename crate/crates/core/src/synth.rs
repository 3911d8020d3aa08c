//! Deterministic synthetic corpora with a planted nonlinear ground truth.
//!
//! Each entity option gets a latent feature vector; its planted score is a
//! nonlinear function of two feature-pair interactions (XOR of thresholds by
//! default), so trees of depth >= 2 can fit it and linear models cannot. Gold
//! assignments are the Viterbi decode of the planted scores, hence always
//! valid. Observed features are the latents plus Gaussian noise.
//!
//! Entities live in communities that share link-graph pages. Every tweet is
//! drawn from one community, and one option per candidate (the tweet's
//! "coherent" entity) receives a planted score bonus that is *not* encoded
//! in the base features. Jaccard features against the tweet's other entities
//! recover that signal, which is what the two-stage pipeline is for.
//!
//! All randomness flows from a single seeded ChaCha stream: the link graph is
//! drawn first, then tweets in order, so equal configs give byte-identical
//! corpora.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{canonical_order, MentionCandidate, MentionLattice, MentionSpan, ScoreTable};
use crate::lattice::viterbi;
use crate::linking::{LinkGraph, LinkingExample, Tweet};

const NUM_COMMUNITIES: usize = 8;
const ENTITIES_PER_COMMUNITY: usize = 6;
const PAGES_PER_COMMUNITY: usize = 24;
const PAGES_PER_ENTITY: usize = 16;
const GLOBAL_PAGES: usize = 40;
const GLOBAL_PAGES_PER_ENTITY: usize = 2;
/// Planted bonus for the tweet-coherent entity; deliberately absent from the
/// base features.
const COHERENCE_BONUS: f64 = 1.2;
/// Latent feature columns: four interaction inputs plus the Nil indicator.
const INFORMATIVE_DIMS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Xor,
    ThresholdProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_tweets: usize,
    pub tokens_per_tweet: usize,
    /// Expected candidates per token; the per-tweet count is binomial.
    pub candidate_density: f64,
    pub max_entities_per_candidate: usize,
    pub feature_dim: usize,
    /// Probability that a candidate overlaps its predecessor.
    pub overlap_rate: f64,
    /// Standard deviation of the Gaussian observation noise.
    pub noise: f64,
    pub nonlinearity: Nonlinearity,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            num_tweets: 715, // 70% train split = 500 tweets
            tokens_per_tweet: 12,
            candidate_density: 0.5,
            max_entities_per_candidate: 3,
            feature_dim: 10,
            overlap_rate: 0.5,
            noise: 0.25,
            nonlinearity: Nonlinearity::Xor,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tweets < 1 || self.tokens_per_tweet < 1 || self.max_entities_per_candidate < 1
        {
            return Err(Error::Config("synth counts must be >= 1".into()));
        }
        if self.feature_dim < INFORMATIVE_DIMS {
            return Err(Error::Config(format!(
                "feature_dim must be >= {INFORMATIVE_DIMS}"
            )));
        }
        for (name, rate) in [
            ("candidate_density", self.candidate_density),
            ("overlap_rate", self.overlap_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("noise must be finite and >= 0".into()));
        }
        // one coherent slot plus confusers drawn from the other communities
        let drawable = 1 + (NUM_COMMUNITIES - 1) * ENTITIES_PER_COMMUNITY;
        if self.max_entities_per_candidate > drawable {
            return Err(Error::Config(format!(
                "max_entities_per_candidate exceeds the {drawable} drawable entities"
            )));
        }
        Ok(())
    }
}

/// One split plus the planted score tables its golds were decoded from.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub examples: Vec<LinkingExample>,
    pub planted: Vec<ScoreTable>,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub train: SynthCorpus,
    pub dev: SynthCorpus,
    pub test: SynthCorpus,
    pub graph: LinkGraph,
}

fn entity_name(community: usize, index: usize) -> String {
    format!("E{community}_{index}")
}

fn build_link_graph(rng: &mut ChaCha8Rng) -> LinkGraph {
    let mut graph = LinkGraph::new();
    for c in 0..NUM_COMMUNITIES {
        for i in 0..ENTITIES_PER_COMMUNITY {
            let entity = entity_name(c, i);
            for p in sample(rng, PAGES_PER_COMMUNITY, PAGES_PER_ENTITY) {
                graph.add_edge(&entity, &format!("P{c}_{p}"));
            }
            for p in sample(rng, GLOBAL_PAGES, GLOBAL_PAGES_PER_ENTITY) {
                graph.add_edge(&entity, &format!("G{p}"));
            }
        }
    }
    graph
}

fn interaction_score(z: &[f64], kind: Nonlinearity) -> f64 {
    let sign = |flag: bool| if flag { 1.0 } else { -1.0 };
    match kind {
        Nonlinearity::Xor => {
            1.6 * sign((z[0] > 0.5) != (z[1] > 0.5)) + 1.2 * sign((z[2] > 0.5) != (z[3] > 0.5))
        }
        Nonlinearity::ThresholdProduct => {
            1.6 * sign(z[0] > 0.5 && z[1] > 0.5) + 1.2 * sign(z[2] > 0.5 && z[3] > 0.5)
        }
    }
}

struct TweetDraw {
    example: LinkingExample,
    planted: ScoreTable,
}

fn draw_tweet(index: usize, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<TweetDraw> {
    let community = rng.random_range(0..NUM_COMMUNITIES);

    // candidate count: binomial over token positions, at least one
    let mut count = 0usize;
    for _ in 0..config.tokens_per_tweet {
        if rng.random_bool(config.candidate_density) {
            count += 1;
        }
    }
    count = count.max(1);

    // span walk: each candidate either overlaps its predecessor or starts at
    // or after its end
    let mut spans: Vec<MentionSpan> = Vec::with_capacity(count);
    for _ in 0..count {
        let len = rng.random_range(1..=2);
        let start = match spans.last() {
            Some(prev) if rng.random_bool(config.overlap_rate) => {
                rng.random_range(prev.start..prev.end)
            }
            Some(prev) => prev.end + rng.random_range(0..=1),
            None => rng.random_range(0..=1),
        };
        spans.push(MentionSpan {
            start,
            end: start + len,
        });
    }
    let token_count = config
        .tokens_per_tweet
        .max(spans.iter().map(|s| s.end).max().unwrap_or(0));

    // options, planted scores, and features per candidate in canonical order
    let order = canonical_order(&spans);
    let normal = Normal::new(0.0, config.noise)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let jitter = |rng: &mut ChaCha8Rng| -> f64 {
        if config.noise == 0.0 {
            0.0
        } else {
            normal.sample(rng)
        }
    };

    let mut candidates = Vec::with_capacity(count);
    let mut planted_rows = Vec::with_capacity(count);
    let mut feature_rows = Vec::with_capacity(count);
    for &si in &order {
        let span = spans[si];
        let num_entities = rng.random_range(1..=config.max_entities_per_candidate);
        let coherent_slot = rng.random_range(0..num_entities);
        let mut entities: Vec<String> = Vec::with_capacity(num_entities);
        while entities.len() < num_entities {
            let name = if entities.len() == coherent_slot {
                entity_name(community, rng.random_range(0..ENTITIES_PER_COMMUNITY))
            } else {
                // confusers come from other communities so the link graph
                // carries disambiguation signal
                let c = (community + rng.random_range(1..NUM_COMMUNITIES)) % NUM_COMMUNITIES;
                entity_name(c, rng.random_range(0..ENTITIES_PER_COMMUNITY))
            };
            if !entities.contains(&name) {
                entities.push(name);
            }
        }

        let mut planted = vec![0.0f64]; // Nil
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(num_entities + 1);
        // Nil latents: zeros with the indicator set
        let mut nil_latent = vec![0.0; config.feature_dim];
        nil_latent[4] = 1.0;
        rows.push(nil_latent);
        for (slot, _entity) in entities.iter().enumerate() {
            let mut latent = vec![0.0; config.feature_dim];
            for v in latent.iter_mut().take(4) {
                *v = rng.random::<f64>();
            }
            for v in latent.iter_mut().skip(INFORMATIVE_DIMS) {
                *v = rng.random::<f64>();
            }
            let mut score = interaction_score(&latent, config.nonlinearity);
            if slot == coherent_slot {
                score += COHERENCE_BONUS;
            }
            planted.push(score);
            rows.push(latent);
        }
        for row in &mut rows {
            for v in row.iter_mut() {
                *v += jitter(rng);
            }
        }
        candidates.push(MentionCandidate::new(span, entities));
        planted_rows.push(planted);
        feature_rows.push(rows);
    }

    let lattice = MentionLattice::from_canonical(candidates);
    let planted = ScoreTable::from_rows(planted_rows)?;
    let (gold, _) = viterbi(&lattice, &planted)?;
    let tweet = Tweet {
        id: format!("synth-{index:05}"),
        tokens: (0..token_count).map(|i| format!("w{i}")).collect(),
    };
    let example = LinkingExample::new(
        tweet,
        lattice,
        feature_rows,
        config.feature_dim,
        Some(gold),
    )?;
    Ok(TweetDraw { example, planted })
}

/// Generate the 70/15/15 train/dev/test splits and the community link graph.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let graph = build_link_graph(&mut rng);

    let mut examples = Vec::with_capacity(config.num_tweets);
    let mut planted = Vec::with_capacity(config.num_tweets);
    for i in 0..config.num_tweets {
        let draw = draw_tweet(i, config, &mut rng)?;
        examples.push(draw.example);
        planted.push(draw.planted);
    }

    let n = config.num_tweets;
    let n_train = n * 70 / 100;
    let n_dev = n * 15 / 100;
    let split = |count: usize, examples: &mut Vec<LinkingExample>, planted: &mut Vec<ScoreTable>| {
        let rest_e = examples.split_off(count.min(examples.len()));
        let rest_p = planted.split_off(count.min(planted.len()));
        SynthCorpus {
            examples: std::mem::replace(examples, rest_e),
            planted: std::mem::replace(planted, rest_p),
        }
    };
    let train = split(n_train, &mut examples, &mut planted);
    let dev = split(n_dev, &mut examples, &mut planted);
    let test = SynthCorpus { examples, planted };

    Ok(SynthOutput {
        train,
        dev,
        test,
        graph,
    })
}
