//! Functional-gradient boosting over factorized structured outputs.
//!
//! Each training round pools one regression target per (example, candidate,
//! option): the negative point-wise gradient of the loss with respect to that
//! option's current score. One tree is fit to the pooled targets and appended
//! to the shared scoring function. The `structured` mode differentiates
//! through exact lattice inference; the `independent` mode is the
//! non-structured baseline that treats every candidate as an isolated
//! multiclass problem, both in its gradients and in its decoding.
//!
//! Score tables are cached per example and updated incrementally with each
//! new tree, so training costs one tree evaluation per option per round.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, Assignment, ScoreTable, NIL_OPTION};
use crate::linking::{apply_nil_bias, LinkingExample};
use crate::math::logsumexp;
use crate::trees::{train_tree, RegressionSample, RegressionTree, TreeConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Log,
    Hinge,
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Log => "log",
            Loss::Hinge => "hinge",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Structured,
    Independent,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Structured => "structured",
            Mode::Independent => "independent",
        })
    }
}

/// Training configuration. `seed` is echoed into the model metadata; the
/// trainer itself is fully deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub num_trees: usize,
    pub shrinkage: f64,
    pub tree: TreeConfig,
    pub loss: Loss,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            num_trees: 300,
            shrinkage: 1.0,
            tree: TreeConfig::default(),
            loss: Loss::Log,
            mode: Mode::Structured,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees < 1 {
            return Err(Error::Config("num_trees must be >= 1".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Config("shrinkage must be in (0, 1]".into()));
        }
        self.tree.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedTree {
    pub eta: f64,
    pub tree: RegressionTree,
}

/// Additive tree ensemble: F(features) = Σ_m eta_m · h_m(features).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    trees: Vec<BoostedTree>,
    feature_dim: usize,
    config: BoostConfig,
}

impl Ensemble {
    pub fn empty(feature_dim: usize, config: BoostConfig) -> Self {
        Self {
            trees: Vec::new(),
            feature_dim,
            config,
        }
    }

    pub fn trees(&self) -> &[BoostedTree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        Ok(self.predict_unchecked(features))
    }

    fn predict_unchecked(&self, features: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| t.eta * t.tree.predict_unchecked(features))
            .sum()
    }
}

/// One pseudo training pair: the option's feature vector and the negative
/// point-wise gradient it should regress to.
#[derive(Clone, Copy, Debug)]
pub struct GradientRecord<'a> {
    pub candidate: usize,
    pub option: usize,
    pub features: &'a [f64],
    pub neg_gradient: f64,
}

/// Evaluate the ensemble on every option of the example. An empty ensemble
/// yields the all-zero table (the F_0 = 0 initialization).
pub fn score_table(ensemble: &Ensemble, example: &LinkingExample) -> Result<ScoreTable> {
    if example.num_candidates() > 0 && example.feature_dim() != ensemble.feature_dim() {
        return Err(Error::Shape(format!(
            "example feature_dim {} does not match ensemble feature_dim {}",
            example.feature_dim(),
            ensemble.feature_dim()
        )));
    }
    let mut table = ScoreTable::zeros(&example.lattice);
    for k in 0..example.num_candidates() {
        for u in 0..example.lattice.candidate(k).num_options() {
            table.add(k, u, ensemble.predict_unchecked(example.features(k, u)));
        }
    }
    Ok(table)
}

fn gold_of(example: &LinkingExample) -> Result<&Assignment> {
    example.gold.as_ref().ok_or(Error::MissingGold)
}

fn gold_score(scores: &ScoreTable, gold: &Assignment) -> f64 {
    gold.choices
        .iter()
        .enumerate()
        .map(|(k, &u)| scores.get(k, u))
        .sum()
}

/// Structured logistic loss: ln Z(x) − S(x, y*). Non-negative because the
/// gold assignment is one of the configurations inside Z.
pub fn log_loss(example: &LinkingExample, scores: &ScoreTable) -> Result<f64> {
    let gold = gold_of(example)?;
    let ln_z = lattice::log_partition(&example.lattice, scores)?;
    Ok(ln_z - gold_score(scores, gold))
}

/// Per-candidate multiclass logistic loss, ignoring the overlap structure.
pub fn independent_log_loss(example: &LinkingExample, scores: &ScoreTable) -> Result<f64> {
    let gold = gold_of(example)?;
    let mut total = 0.0;
    for (k, &u) in gold.choices.iter().enumerate() {
        total += logsumexp(scores.row(k)) - scores.get(k, u);
    }
    Ok(total)
}

/// Negative gradients of the structured logistic loss:
/// −g_ku = 1[y*_k = u] − P(y_k = u | x) with marginals from exact inference.
pub fn pointwise_gradients_log<'a>(
    example: &'a LinkingExample,
    scores: &ScoreTable,
) -> Result<Vec<GradientRecord<'a>>> {
    let gold = gold_of(example)?;
    let inference = lattice::marginals(&example.lattice, scores)?;
    let mut records = Vec::new();
    for k in 0..example.num_candidates() {
        for u in 0..example.lattice.candidate(k).num_options() {
            let indicator = if gold.choices[k] == u { 1.0 } else { 0.0 };
            records.push(GradientRecord {
                candidate: k,
                option: u,
                features: example.features(k, u),
                neg_gradient: indicator - inference.marginals[k][u],
            });
        }
    }
    Ok(records)
}

/// Negative gradients of the per-candidate softmax (the non-structured MART
/// baseline): identical formula, but P is each candidate's own softmax.
pub fn pointwise_gradients_independent<'a>(
    example: &'a LinkingExample,
    scores: &ScoreTable,
) -> Result<Vec<GradientRecord<'a>>> {
    let gold = gold_of(example)?;
    let mut records = Vec::new();
    for k in 0..example.num_candidates() {
        let row = scores.row(k);
        let lse = logsumexp(row);
        for (u, &score) in row.iter().enumerate() {
            let p = (score - lse).exp();
            let indicator = if gold.choices[k] == u { 1.0 } else { 0.0 };
            records.push(GradientRecord {
                candidate: k,
                option: u,
                features: example.features(k, u),
                neg_gradient: indicator - p,
            });
        }
    }
    Ok(records)
}

/// Loss-augmented decode: the valid assignment maximizing S(x, y) plus the
/// Hamming distance to gold (one per differing candidate).
fn augmented_viterbi(
    example: &LinkingExample,
    scores: &ScoreTable,
    gold: &Assignment,
) -> Result<(Assignment, f64)> {
    let mut augmented = scores.clone();
    for (k, &g) in gold.choices.iter().enumerate() {
        for u in 0..example.lattice.candidate(k).num_options() {
            if u != g {
                augmented.add(k, u, 1.0);
            }
        }
    }
    lattice::viterbi(&example.lattice, &augmented)
}

/// Structured hinge value: max(0, S(x, ŷ) + Hamming(ŷ, y*) − S(x, y*)).
pub fn hinge_loss(example: &LinkingExample, scores: &ScoreTable) -> Result<f64> {
    let gold = gold_of(example)?;
    let (_, augmented_best) = augmented_viterbi(example, scores, gold)?;
    Ok((augmented_best - gold_score(scores, gold)).max(0.0))
}

/// Subgradients of the structured hinge loss. All zero when the margin is
/// satisfied; otherwise ±1 on the gold and loss-augmented-argmax options.
pub fn hinge_gradients<'a>(
    example: &'a LinkingExample,
    scores: &ScoreTable,
) -> Result<Vec<GradientRecord<'a>>> {
    let gold = gold_of(example)?;
    let (augmented_argmax, augmented_best) = augmented_viterbi(example, scores, gold)?;
    let violated = augmented_best > gold_score(scores, gold);
    let mut records = Vec::new();
    for k in 0..example.num_candidates() {
        for u in 0..example.lattice.candidate(k).num_options() {
            let neg_gradient = if violated {
                let gold_ind = if gold.choices[k] == u { 1.0 } else { 0.0 };
                let hat_ind = if augmented_argmax.choices[k] == u { 1.0 } else { 0.0 };
                gold_ind - hat_ind
            } else {
                0.0
            };
            records.push(GradientRecord {
                candidate: k,
                option: u,
                features: example.features(k, u),
                neg_gradient,
            });
        }
    }
    Ok(records)
}

/// Per-candidate hinge, for the independent mode: each candidate is its own
/// margin problem against its loss-augmented argmax.
fn hinge_gradients_independent<'a>(
    example: &'a LinkingExample,
    scores: &ScoreTable,
) -> Result<Vec<GradientRecord<'a>>> {
    let gold = gold_of(example)?;
    let mut records = Vec::new();
    for k in 0..example.num_candidates() {
        let row = scores.row(k);
        let g = gold.choices[k];
        let mut hat = 0;
        let mut hat_score = f64::NEG_INFINITY;
        for (u, &score) in row.iter().enumerate() {
            let aug = score + if u == g { 0.0 } else { 1.0 };
            if aug > hat_score {
                hat_score = aug;
                hat = u;
            }
        }
        let violated = hat_score > row[g];
        for u in 0..row.len() {
            let neg_gradient = if violated {
                (if u == g { 1.0 } else { 0.0 }) - (if u == hat { 1.0 } else { 0.0 })
            } else {
                0.0
            };
            records.push(GradientRecord {
                candidate: k,
                option: u,
                features: example.features(k, u),
                neg_gradient,
            });
        }
    }
    Ok(records)
}

fn independent_hinge_loss(example: &LinkingExample, scores: &ScoreTable) -> Result<f64> {
    let gold = gold_of(example)?;
    let mut total = 0.0;
    for k in 0..example.num_candidates() {
        let row = scores.row(k);
        let g = gold.choices[k];
        let best = row
            .iter()
            .enumerate()
            .map(|(u, &s)| s + if u == g { 0.0 } else { 1.0 })
            .fold(f64::NEG_INFINITY, f64::max);
        total += (best - row[g]).max(0.0);
    }
    Ok(total)
}

/// Loss value used for the training log, dispatched on (loss, mode).
pub fn training_loss(
    example: &LinkingExample,
    scores: &ScoreTable,
    loss: Loss,
    mode: Mode,
) -> Result<f64> {
    match (loss, mode) {
        (Loss::Log, Mode::Structured) => log_loss(example, scores),
        (Loss::Log, Mode::Independent) => independent_log_loss(example, scores),
        (Loss::Hinge, Mode::Structured) => hinge_loss(example, scores),
        (Loss::Hinge, Mode::Independent) => independent_hinge_loss(example, scores),
    }
}

/// Gradient records for one example, dispatched on (loss, mode).
pub fn gradients<'a>(
    example: &'a LinkingExample,
    scores: &ScoreTable,
    loss: Loss,
    mode: Mode,
) -> Result<Vec<GradientRecord<'a>>> {
    match (loss, mode) {
        (Loss::Log, Mode::Structured) => pointwise_gradients_log(example, scores),
        (Loss::Log, Mode::Independent) => pointwise_gradients_independent(example, scores),
        (Loss::Hinge, Mode::Structured) => hinge_gradients(example, scores),
        (Loss::Hinge, Mode::Independent) => hinge_gradients_independent(example, scores),
    }
}

/// Decode an assignment from the ensemble's scores after applying the Nil
/// bias: Viterbi for structured models, per-candidate argmax (overlaps
/// allowed) for independent ones.
pub fn decode(ensemble: &Ensemble, example: &LinkingExample, nil_bias: f64) -> Result<Assignment> {
    let scores = score_table(ensemble, example)?;
    let biased = if nil_bias == 0.0 {
        scores
    } else {
        apply_nil_bias(&scores, nil_bias)
    };
    decode_scores(example, &biased, ensemble.mode())
}

/// Mode-aware decoding from an explicit score table.
pub fn decode_scores(
    example: &LinkingExample,
    scores: &ScoreTable,
    mode: Mode,
) -> Result<Assignment> {
    match mode {
        Mode::Structured => Ok(lattice::viterbi(&example.lattice, scores)?.0),
        Mode::Independent => {
            let mut choices = Vec::with_capacity(example.num_candidates());
            for k in 0..example.num_candidates() {
                let row = scores.row(k);
                let mut best = NIL_OPTION;
                for u in 1..row.len() {
                    if row[u] > row[best] {
                        best = u;
                    }
                }
                choices.push(best);
            }
            Ok(Assignment { choices })
        }
    }
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub train_loss: f64,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub ensemble: Ensemble,
    /// Round 0 is the loss of the zero-initialized scoring function.
    pub log: Vec<RoundLog>,
}

/// The boosting loop: for each round, compute every example's gradient
/// records against its cached score table, fit one tree to the pooled
/// records, and add the tree's (shrunken) predictions back into the caches.
pub fn train(corpus: &[LinkingExample], config: &BoostConfig) -> Result<TrainResult> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyData("empty training corpus".into()));
    }
    let mut feature_dim = None;
    for example in corpus {
        if example.gold.is_none() {
            return Err(Error::MissingGold);
        }
        if example.num_candidates() == 0 {
            continue;
        }
        match feature_dim {
            None => feature_dim = Some(example.feature_dim()),
            Some(d) if d != example.feature_dim() => {
                return Err(Error::Shape(format!(
                    "corpus mixes feature dimensions {d} and {}",
                    example.feature_dim()
                )));
            }
            _ => {}
        }
    }
    let feature_dim = feature_dim
        .ok_or_else(|| Error::EmptyData("corpus has no mention candidates".into()))?;

    let mut tables: Vec<ScoreTable> = corpus
        .iter()
        .map(|ex| ScoreTable::zeros(&ex.lattice))
        .collect();
    let mut ensemble = Ensemble::empty(feature_dim, config.clone());
    let mut log = Vec::with_capacity(config.num_trees + 1);
    log.push(RoundLog {
        round: 0,
        train_loss: mean_loss(corpus, &tables, config)?,
        seconds: 0.0,
    });

    for round in 1..=config.num_trees {
        let start = Instant::now();
        let per_example: Vec<Vec<GradientRecord>> = corpus
            .par_iter()
            .zip(tables.par_iter())
            .map(|(ex, table)| gradients(ex, table, config.loss, config.mode))
            .collect::<Result<_>>()?;
        let pool: Vec<RegressionSample> = per_example
            .iter()
            .flatten()
            .map(|r| RegressionSample {
                features: r.features,
                target: r.neg_gradient,
            })
            .collect();
        let tree = train_tree(&pool, &config.tree)?;

        tables
            .par_iter_mut()
            .zip(corpus.par_iter())
            .for_each(|(table, ex)| {
                for k in 0..ex.num_candidates() {
                    for u in 0..ex.lattice.candidate(k).num_options() {
                        let value = tree.predict_unchecked(ex.features(k, u));
                        table.add(k, u, config.shrinkage * value);
                    }
                }
            });
        ensemble.trees.push(BoostedTree {
            eta: config.shrinkage,
            tree,
        });
        log.push(RoundLog {
            round,
            train_loss: mean_loss(corpus, &tables, config)?,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainResult { ensemble, log })
}

/// Mean training loss per example; the reduction is sequential so the value
/// is deterministic.
fn mean_loss(corpus: &[LinkingExample], tables: &[ScoreTable], config: &BoostConfig) -> Result<f64> {
    let losses: Vec<f64> = corpus
        .par_iter()
        .zip(tables.par_iter())
        .map(|(ex, table)| training_loss(ex, table, config.loss, config.mode))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / corpus.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{MentionLattice, MentionSpan};
    use crate::linking::Tweet;

    fn span(s: usize, e: usize) -> MentionSpan {
        MentionSpan::new(s, e).unwrap()
    }

    /// K=1 lattice with {Nil, e}, 1-D features, gold = e.
    fn single_example() -> LinkingExample {
        let lattice =
            MentionLattice::build(vec![(span(0, 1), vec!["e".into()])]).unwrap();
        LinkingExample::new(
            Tweet {
                id: "t".into(),
                tokens: vec!["w".into()],
            },
            lattice,
            vec![vec![vec![0.0], vec![1.0]]],
            1,
            Some(Assignment { choices: vec![1] }),
        )
        .unwrap()
    }

    /// K=2 overlapping lattice with {Nil, e} each.
    fn overlapping_example() -> LinkingExample {
        let lattice = MentionLattice::build(vec![
            (span(0, 2), vec!["e1".into()]),
            (span(1, 3), vec!["e2".into()]),
        ])
        .unwrap();
        LinkingExample::new(
            Tweet {
                id: "t".into(),
                tokens: vec!["a".into(), "b".into(), "c".into()],
            },
            lattice,
            vec![
                vec![vec![0.0], vec![1.0]],
                vec![vec![0.5], vec![1.5]],
            ],
            1,
            Some(Assignment {
                choices: vec![1, 0],
            }),
        )
        .unwrap()
    }

    #[test]
    fn empty_ensemble_scores_zero() {
        let ex = overlapping_example();
        let ens = Ensemble::empty(1, BoostConfig::default());
        let t = score_table(&ens, &ex).unwrap();
        for k in 0..2 {
            for u in 0..2 {
                assert_eq!(t.get(k, u), 0.0);
            }
        }
    }

    #[test]
    fn ensembles_are_linear_in_their_trees() {
        use crate::trees::RegressionTree;
        let ex = single_example();
        let mut ens = Ensemble::empty(1, BoostConfig::default());
        ens.trees.push(BoostedTree {
            eta: 1.0,
            tree: RegressionTree::constant(1.5, 1),
        });
        let t = score_table(&ens, &ex).unwrap();
        assert_eq!(t.get(0, 0), 1.5);
        assert_eq!(t.get(0, 1), 1.5);

        let mut ens2 = Ensemble::empty(1, BoostConfig::default());
        ens2.trees.push(BoostedTree {
            eta: 0.5,
            tree: RegressionTree::constant(2.0, 1),
        });
        ens2.trees.push(BoostedTree {
            eta: 0.5,
            tree: RegressionTree::constant(4.0, 1),
        });
        let t2 = score_table(&ens2, &ex).unwrap();
        assert_eq!(t2.get(0, 1), 0.5 * (2.0 + 4.0));
    }

    #[test]
    fn log_loss_single_candidate() {
        let ex = single_example();
        let scores = ScoreTable::zeros(&ex.lattice);
        let loss = log_loss(&ex, &scores).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_loss_counts_valid_configs_at_zero_scores() {
        let ex = overlapping_example();
        let mut ex = ex;
        ex.gold = Some(Assignment {
            choices: vec![0, 0],
        });
        let scores = ScoreTable::zeros(&ex.lattice);
        // 3 valid configurations
        assert!((log_loss(&ex, &scores).unwrap() - 3.0f64.ln()).abs() < 1e-12);
        // and in general the zero-score loss is the enumerated config count
        let (oracle, _) = crate::lattice::brute_force(&ex.lattice, &scores).unwrap();
        assert!((log_loss(&ex, &scores).unwrap() - oracle.log_partition).abs() < 1e-12);
    }

    #[test]
    fn score_table_rejects_dimension_mismatch() {
        let ex = single_example(); // feature_dim 1
        let ens = Ensemble::empty(3, BoostConfig::default());
        assert!(matches!(
            score_table(&ens, &ex).unwrap_err(),
            Error::Shape(_)
        ));
    }

    #[test]
    fn config_validation_bounds() {
        let bad_trees = BoostConfig {
            num_trees: 0,
            ..BoostConfig::default()
        };
        assert!(matches!(bad_trees.validate(), Err(Error::Config(_))));
        let bad_eta = BoostConfig {
            shrinkage: 0.0,
            ..BoostConfig::default()
        };
        assert!(matches!(bad_eta.validate(), Err(Error::Config(_))));
        let big_eta = BoostConfig {
            shrinkage: 1.5,
            ..BoostConfig::default()
        };
        assert!(matches!(big_eta.validate(), Err(Error::Config(_))));
        assert!(BoostConfig::default().validate().is_ok());
    }

    #[test]
    fn log_loss_vanishes_for_dominant_gold() {
        let ex = single_example();
        let scores = ScoreTable::from_rows(vec![vec![-50.0, 50.0]]).unwrap();
        assert!(log_loss(&ex, &scores).unwrap() < 1e-9);
    }

    #[test]
    fn log_gradients_single_candidate() {
        let ex = single_example();
        let scores = ScoreTable::zeros(&ex.lattice);
        let g = pointwise_gradients_log(&ex, &scores).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0].neg_gradient - (-0.5)).abs() < 1e-12); // Nil
        assert!((g[1].neg_gradient - 0.5).abs() < 1e-12); // gold entity
    }

    #[test]
    fn gradients_vanish_at_the_fixed_point() {
        let ex = single_example();
        let scores = ScoreTable::from_rows(vec![vec![-50.0, 50.0]]).unwrap();
        for r in pointwise_gradients_log(&ex, &scores).unwrap() {
            assert!(r.neg_gradient.abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_sum_to_zero_per_candidate() {
        let ex = overlapping_example();
        let scores =
            ScoreTable::from_rows(vec![vec![0.3, -1.2], vec![0.9, 2.1]]).unwrap();
        for (loss, mode) in [
            (Loss::Log, Mode::Structured),
            (Loss::Log, Mode::Independent),
            (Loss::Hinge, Mode::Structured),
            (Loss::Hinge, Mode::Independent),
        ] {
            let records = gradients(&ex, &scores, loss, mode).unwrap();
            for k in 0..2 {
                let sum: f64 = records
                    .iter()
                    .filter(|r| r.candidate == k)
                    .map(|r| r.neg_gradient)
                    .sum();
                assert!(sum.abs() < 1e-9, "{loss} {mode} candidate {k}: {sum}");
            }
        }
    }

    #[test]
    fn independent_equals_structured_on_single_candidate() {
        let ex = single_example();
        let scores = ScoreTable::from_rows(vec![vec![0.4, -0.3]]).unwrap();
        let a = pointwise_gradients_log(&ex, &scores).unwrap();
        let b = pointwise_gradients_independent(&ex, &scores).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.neg_gradient - y.neg_gradient).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_ignores_overlap_structure() {
        let ex = overlapping_example();
        let scores = ScoreTable::zeros(&ex.lattice);
        let g = pointwise_gradients_independent(&ex, &scores).unwrap();
        // per-candidate softmax gives P(e) = 1/2 (the structured marginal is 1/3)
        let e1 = g.iter().find(|r| r.candidate == 0 && r.option == 1).unwrap();
        assert!((e1.neg_gradient - (1.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn hinge_zero_when_margin_satisfied() {
        let ex = single_example();
        let scores = ScoreTable::from_rows(vec![vec![-10.0, 10.0]]).unwrap();
        for r in hinge_gradients(&ex, &scores).unwrap() {
            assert_eq!(r.neg_gradient, 0.0);
        }
        assert_eq!(hinge_loss(&ex, &scores).unwrap(), 0.0);
    }

    #[test]
    fn hinge_pushes_gold_over_augmented_argmax() {
        // zero scores: augmented viterbi prefers Nil (score 0 + hamming 1)
        let ex = single_example();
        let scores = ScoreTable::zeros(&ex.lattice);
        let g = hinge_gradients(&ex, &scores).unwrap();
        assert_eq!(g[0].neg_gradient, -1.0); // Nil
        assert_eq!(g[1].neg_gradient, 1.0); // gold entity
        assert!((hinge_loss(&ex, &scores).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn train_produces_requested_tree_count() {
        let corpus = vec![single_example(), overlapping_example()];
        let config = BoostConfig {
            num_trees: 1,
            tree: TreeConfig {
                min_leaf: 1,
                max_depth: 2,
            },
            ..BoostConfig::default()
        };
        let result = train(&corpus, &config).unwrap();
        assert_eq!(result.ensemble.num_trees(), 1);
        assert_eq!(result.log.len(), 2); // round 0 + round 1
    }

    #[test]
    fn degenerate_corpus_yields_zero_leaf() {
        // every candidate has only the Nil option and gold is Nil
        let lattice = MentionLattice::build(vec![(span(0, 1), vec![])]).unwrap();
        let ex = LinkingExample::new(
            Tweet {
                id: "t".into(),
                tokens: vec!["w".into()],
            },
            lattice,
            vec![vec![vec![0.7]]],
            1,
            Some(Assignment { choices: vec![0] }),
        )
        .unwrap();
        let config = BoostConfig {
            num_trees: 1,
            tree: TreeConfig {
                min_leaf: 1,
                max_depth: 2,
            },
            ..BoostConfig::default()
        };
        let result = train(&[ex], &config).unwrap();
        let tree = &result.ensemble.trees()[0].tree;
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.predict(&[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn train_rejects_empty_and_ungolded_corpora() {
        assert!(matches!(
            train(&[], &BoostConfig::default()).unwrap_err(),
            Error::EmptyData(_)
        ));
        let mut ex = single_example();
        ex.gold = None;
        assert!(matches!(
            train(&[ex], &BoostConfig::default()).unwrap_err(),
            Error::MissingGold
        ));
    }

    #[test]
    fn decode_modes_differ_on_overlap() {
        let ex = overlapping_example();
        let scores = ScoreTable::from_rows(vec![vec![0.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let structured = decode_scores(&ex, &scores, Mode::Structured).unwrap();
        assert_eq!(structured.choices, vec![1, 0]);
        let independent = decode_scores(&ex, &scores, Mode::Independent).unwrap();
        // per-candidate argmax ignores the overlap and links both
        assert_eq!(independent.choices, vec![1, 1]);
    }
}
