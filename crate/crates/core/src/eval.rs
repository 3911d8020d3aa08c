//! IE- and IR-driven evaluation policies and dev-set Nil-bias tuning.
//!
//! IE evaluation scores end-to-end links with relaxed boundaries: a predicted
//! link is correct when its span overlaps a gold span carrying the same
//! entity. Matching is greedy and one-to-one over predictions sorted by
//! (start, end). IR evaluation scores, per query entity, whether each listed
//! tweet was predicted to mention that entity.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::MentionSpan;
use crate::linking::{LinkGraph, LinkingExample};
use crate::model::TrainedModel;

/// A tweet's predicted (or gold) non-Nil links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkPrediction {
    pub tweet_id: String,
    /// Deterministically ordered set of (span, entity) pairs.
    pub links: BTreeSet<(MentionSpan, String)>,
}

impl LinkPrediction {
    pub fn new(tweet_id: impl Into<String>, links: Vec<(MentionSpan, String)>) -> Self {
        Self {
            tweet_id: tweet_id.into(),
            links: links.into_iter().collect(),
        }
    }

    pub fn entities(&self) -> BTreeSet<&str> {
        self.links.iter().map(|(_, e)| e.as_str()).collect()
    }
}

/// Micro-averaged counts and the derived ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

fn index_by_tweet(predictions: &[LinkPrediction]) -> Result<HashMap<&str, &LinkPrediction>> {
    let mut map = HashMap::new();
    for p in predictions {
        if map.insert(p.tweet_id.as_str(), p).is_some() {
            return Err(Error::Keying(format!(
                "duplicate tweet id '{}' in predictions",
                p.tweet_id
            )));
        }
    }
    Ok(map)
}

/// IE-driven evaluation with the overlap-relaxed boundary rule,
/// micro-aggregated across tweets. Predictions and golds must cover the same
/// tweet ids.
pub fn eval_ie(predictions: &[LinkPrediction], golds: &[LinkPrediction]) -> Result<MetricsReport> {
    let pred_map = index_by_tweet(predictions)?;
    let gold_map = index_by_tweet(golds)?;
    for id in pred_map.keys() {
        if !gold_map.contains_key(id) {
            return Err(Error::Keying(format!("unknown tweet id '{id}' in predictions")));
        }
    }
    for id in gold_map.keys() {
        if !pred_map.contains_key(id) {
            return Err(Error::Keying(format!("no prediction for tweet id '{id}'")));
        }
    }

    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for gold in golds {
        let pred = pred_map[gold.tweet_id.as_str()];
        let gold_links: Vec<&(MentionSpan, String)> = gold.links.iter().collect();
        let mut matched = vec![false; gold_links.len()];
        // predictions iterate in (start, end) order via the BTreeSet
        for (span, entity) in &pred.links {
            let mut found = false;
            for (gi, (gspan, gentity)) in gold_links.iter().enumerate() {
                if !matched[gi] && span.overlaps(gspan) && entity == gentity {
                    matched[gi] = true;
                    found = true;
                    break;
                }
            }
            if found {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        fn_ += matched.iter().filter(|&&m| !m).count();
    }
    Ok(MetricsReport::from_counts(tp, fp, fn_))
}

/// One IR query: the entity searched for and the judged tweets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuerySet {
    pub query: String,
    pub tweets: Vec<(String, bool)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrReport {
    pub micro: MetricsReport,
    pub per_query: Vec<(String, MetricsReport)>,
}

/// IR-driven evaluation: a tweet is predicted relevant to a query iff the
/// query entity appears among its predicted entities. The micro average over
/// all (tweet, query) pairs is the headline number.
pub fn eval_ir(predictions: &[LinkPrediction], queries: &[QuerySet]) -> Result<IrReport> {
    let pred_map = index_by_tweet(predictions)?;
    let mut per_query = Vec::with_capacity(queries.len());
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for q in queries {
        let mut seen = BTreeSet::new();
        let (mut qtp, mut qfp, mut qfn) = (0usize, 0usize, 0usize);
        for (tweet_id, relevant) in &q.tweets {
            if !seen.insert(tweet_id.as_str()) {
                return Err(Error::Keying(format!(
                    "tweet id '{tweet_id}' listed twice for query '{}'",
                    q.query
                )));
            }
            let pred = pred_map.get(tweet_id.as_str()).ok_or_else(|| {
                Error::Keying(format!("no prediction for tweet id '{tweet_id}'"))
            })?;
            let predicted = pred.entities().contains(q.query.as_str());
            match (predicted, *relevant) {
                (true, true) => qtp += 1,
                (true, false) => qfp += 1,
                (false, true) => qfn += 1,
                (false, false) => {}
            }
        }
        tp += qtp;
        fp += qfp;
        fn_ += qfn;
        per_query.push((q.query.clone(), MetricsReport::from_counts(qtp, qfp, qfn)));
    }
    Ok(IrReport {
        micro: MetricsReport::from_counts(tp, fp, fn_),
        per_query,
    })
}

/// Inclusive bias grid `lo, lo + step, ..., hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for BiasGrid {
    fn default() -> Self {
        Self {
            lo: -3.0,
            hi: 3.0,
            step: 0.25,
        }
    }
}

impl BiasGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("bias grid must be finite".into()));
        }
        if self.lo > self.hi {
            return Err(Error::Config("bias grid needs lo <= hi".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::Config("bias grid needs step > 0".into()));
        }
        if (self.hi - self.lo) / self.step > 100_000.0 {
            return Err(Error::Config("bias grid has more than 100000 points".into()));
        }
        let mut points = Vec::new();
        let mut i = 0u32;
        loop {
            let b = self.lo + f64::from(i) * self.step;
            if b > self.hi + 1e-9 {
                break;
            }
            points.push(b.min(self.hi));
            i += 1;
        }
        Ok(points)
    }
}

/// Which F1 the sweep optimizes.
pub enum TunePolicy<'a> {
    Ie,
    Ir(&'a [QuerySet]),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub bias: f64,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub best_bias: f64,
    pub best: MetricsReport,
    pub sweep: Vec<SweepPoint>,
}

/// Sweep the Nil bias over the grid, decode the dev corpus at each point, and
/// return the F1-maximizing bias. Ties prefer the smallest |b|, then the
/// smaller b.
pub fn tune_bias(
    model: &TrainedModel,
    dev: &[LinkingExample],
    graph: Option<&LinkGraph>,
    grid: BiasGrid,
    policy: TunePolicy,
) -> Result<TuneResult> {
    if dev.is_empty() {
        return Err(Error::EmptyData("empty dev corpus".into()));
    }
    let golds: Option<Vec<LinkPrediction>> = match policy {
        TunePolicy::Ie => Some(
            dev.iter()
                .map(|ex| {
                    ex.gold_links()
                        .map(|links| LinkPrediction::new(ex.tweet.id.clone(), links))
                        .ok_or(Error::MissingGold)
                })
                .collect::<Result<_>>()?,
        ),
        TunePolicy::Ir(_) => None,
    };

    let mut sweep = Vec::new();
    let mut best: Option<SweepPoint> = None;
    for bias in grid.points()? {
        let predictions = predict_corpus(model, dev, graph, bias)?;
        let metrics = match &policy {
            TunePolicy::Ie => eval_ie(&predictions, golds.as_ref().unwrap())?,
            TunePolicy::Ir(queries) => eval_ir(&predictions, queries)?.micro,
        };
        let point = SweepPoint { bias, metrics };
        sweep.push(point);
        let better = match &best {
            None => true,
            Some(b) => {
                point.metrics.f1 > b.metrics.f1
                    || (point.metrics.f1 == b.metrics.f1
                        && (point.bias.abs() < b.bias.abs()
                            || (point.bias.abs() == b.bias.abs() && point.bias < b.bias)))
            }
        };
        if better {
            best = Some(point);
        }
    }
    let best = best.expect("grid has at least one point");
    Ok(TuneResult {
        best_bias: best.bias,
        best: best.metrics,
        sweep,
    })
}

/// Decode every example into a link prediction.
pub fn predict_corpus(
    model: &TrainedModel,
    corpus: &[LinkingExample],
    graph: Option<&LinkGraph>,
    nil_bias: f64,
) -> Result<Vec<LinkPrediction>> {
    corpus
        .iter()
        .map(|ex| {
            let assignment = model.predict(ex, graph, nil_bias)?;
            Ok(LinkPrediction::new(
                ex.tweet.id.clone(),
                assignment.links(&ex.lattice),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: usize, e: usize) -> MentionSpan {
        MentionSpan::new(s, e).unwrap()
    }

    fn links(id: &str, items: &[(usize, usize, &str)]) -> LinkPrediction {
        LinkPrediction::new(
            id,
            items
                .iter()
                .map(|&(s, e, ent)| (span(s, e), ent.to_string()))
                .collect(),
        )
    }

    #[test]
    fn exact_match_is_perfect() {
        let gold = vec![links("t1", &[(0, 2, "E1"), (3, 4, "E2")])];
        let report = eval_ie(&gold, &gold).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (2, 0, 0));
        assert_eq!(report.f1, 1.0);
    }

    #[test]
    fn overlap_with_same_entity_counts() {
        let pred = vec![links("t1", &[(0, 2, "E1")])];
        let gold = vec![links("t1", &[(1, 3, "E1")])];
        let report = eval_ie(&pred, &gold).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (1, 0, 0));
    }

    #[test]
    fn entity_mismatch_is_fp_and_fn() {
        let pred = vec![links("t1", &[(0, 2, "E1")])];
        let gold = vec![links("t1", &[(1, 3, "E2")])];
        let report = eval_ie(&pred, &gold).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (0, 1, 1));
    }

    #[test]
    fn matching_is_one_to_one() {
        // two overlapping predictions of the same entity, one gold link
        let pred = vec![links("t1", &[(0, 2, "E1"), (1, 3, "E1")])];
        let gold = vec![links("t1", &[(0, 3, "E1")])];
        let report = eval_ie(&pred, &gold).unwrap();
        assert_eq!((report.tp, report.fp, report.fn_), (1, 1, 0));
        assert!(report.tp <= pred[0].links.len().min(gold[0].links.len()));
    }

    #[test]
    fn keying_errors() {
        let pred = vec![links("t1", &[]), links("t2", &[])];
        let gold = vec![links("t1", &[])];
        assert!(matches!(
            eval_ie(&pred, &gold).unwrap_err(),
            Error::Keying(_)
        ));
        assert!(matches!(
            eval_ie(&gold, &pred).unwrap_err(),
            Error::Keying(_)
        ));
    }

    #[test]
    fn ir_perfect_and_zero_recall() {
        let preds = vec![links("t1", &[(0, 1, "Q")]), links("t2", &[(0, 1, "Q")])];
        let all_relevant = vec![QuerySet {
            query: "Q".into(),
            tweets: vec![("t1".into(), true), ("t2".into(), true)],
        }];
        let report = eval_ir(&preds, &all_relevant).unwrap();
        assert_eq!(report.micro.f1, 1.0);

        let never = vec![links("t1", &[]), links("t2", &[])];
        let report = eval_ir(&never, &all_relevant).unwrap();
        assert_eq!(report.micro.recall, 0.0);
    }

    #[test]
    fn ir_mixed_relevance_precision() {
        // 63 relevant, 37 irrelevant; predictor always claims relevance
        let mut preds = Vec::new();
        let mut tweets = Vec::new();
        for i in 0..100 {
            let id = format!("t{i}");
            preds.push(links(&id, &[(0, 1, "Q")]));
            tweets.push((id, i < 63));
        }
        let queries = vec![QuerySet {
            query: "Q".into(),
            tweets,
        }];
        let report = eval_ir(&preds, &queries).unwrap();
        assert!((report.micro.precision - 0.63).abs() < 1e-12);
        assert_eq!(report.micro.recall, 1.0);
        assert_eq!(report.per_query.len(), 1);
    }

    #[test]
    fn grid_points_inclusive() {
        let grid = BiasGrid::default();
        let points = grid.points().unwrap();
        assert_eq!(points.len(), 25);
        assert_eq!(points[0], -3.0);
        assert_eq!(*points.last().unwrap(), 3.0);

        let single = BiasGrid {
            lo: 0.0,
            hi: 0.0,
            step: 1.0,
        };
        assert_eq!(single.points().unwrap(), vec![0.0]);

        assert!(BiasGrid {
            lo: 1.0,
            hi: 0.0,
            step: 1.0
        }
        .points()
        .is_err());
        assert!(BiasGrid {
            lo: 0.0,
            hi: 1.0,
            step: 0.0
        }
        .points()
        .is_err());
    }

    #[test]
    fn tune_bias_tie_rule_and_empty_dev() {
        use crate::boosting::{BoostConfig, Ensemble};
        use crate::lattice::{Assignment, MentionLattice};
        use crate::linking::{LinkingExample, Tweet};
        use crate::model::TrainedModel;

        // all-Nil golds pin F1 at 0 for every bias (links only ever add false
        // positives), so the tie rule must return b = 0
        let dev: Vec<LinkingExample> = (0..3)
            .map(|i| {
                let lattice = MentionLattice::build(vec![(
                    MentionSpan { start: 0, end: 1 },
                    vec!["e".into()],
                )])
                .unwrap();
                LinkingExample::new(
                    Tweet {
                        id: format!("t{i}"),
                        tokens: vec!["w".into()],
                    },
                    lattice,
                    vec![vec![vec![0.0], vec![1.0]]],
                    1,
                    Some(Assignment { choices: vec![0] }),
                )
                .unwrap()
            })
            .collect();
        let model = TrainedModel::single(Ensemble::empty(1, BoostConfig::default()));
        let result = tune_bias(&model, &dev, None, BiasGrid::default(), TunePolicy::Ie).unwrap();
        assert_eq!(result.best_bias, 0.0);
        assert_eq!(result.sweep.len(), 25);
        assert!(result.sweep.iter().all(|p| p.metrics.f1 == 0.0));
        // the returned metrics equal the sweep's maximum f1
        let max_f1 = result
            .sweep
            .iter()
            .map(|p| p.metrics.f1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(result.best.f1, max_f1);

        assert!(matches!(
            tune_bias(&model, &[], None, BiasGrid::default(), TunePolicy::Ie).unwrap_err(),
            Error::EmptyData(_)
        ));
    }

    #[test]
    fn report_ratios_are_bounded() {
        let r = MetricsReport::from_counts(0, 0, 0);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = MetricsReport::from_counts(3, 1, 2);
        assert!(r.precision <= 1.0 && r.recall <= 1.0);
        assert!(r.f1 <= 2.0 * r.precision.min(r.recall));
    }
}
