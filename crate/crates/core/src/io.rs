//! File formats: corpus JSONL, predictions JSONL, lexicon and link-graph TSV,
//! query TSV, model JSON, and the CSV logs. All files are UTF-8 with LF
//! endings and are written atomically (temp file + rename).
//!
//! Corpus JSONL, one tweet per line:
//!
//! ```json
//! {"id": "t1", "tokens": ["new", "york"],
//!  "candidates": [{"start": 0, "end": 2,
//!    "options": [{"entity": "NIL", "features": [0.0], "gold": false},
//!                {"entity": "E_NY", "features": [1.0], "gold": true}]}]}
//! ```
//!
//! Every candidate carries exactly one `NIL` option. A corpus is golded when
//! every candidate has exactly one `gold: true` option, ungolded when none
//! do; anything in between is rejected. Prediction JSONL is
//! `{"id", "links": [{"start", "end", "entity"}]}`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::boosting::RoundLog;
use crate::error::{Error, Result};
use crate::eval::{LinkPrediction, MetricsReport, QuerySet, SweepPoint};
use crate::lattice::{
    canonical_order, MentionCandidate, MentionLattice, MentionSpan, NIL_LABEL, NIL_OPTION,
};
use crate::linking::{Lexicon, LexiconEntry, LinkGraph, LinkingExample, Tweet};
use crate::model::{self, TrainedModel};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write via a sibling temp file and rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp_name = format!(
        ".{}.tmp.{}.{}",
        name.to_string_lossy(),
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let tmp: PathBuf = match dir {
        Some(d) => d.join(tmp_name),
        None => PathBuf::from(tmp_name),
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Corpus JSONL
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TweetRecord {
    id: String,
    tokens: Vec<String>,
    candidates: Vec<CandidateRecord>,
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    start: usize,
    end: usize,
    options: Vec<OptionRecord>,
}

#[derive(Serialize, Deserialize)]
struct OptionRecord {
    entity: String,
    features: Vec<f64>,
    #[serde(default)]
    gold: bool,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn example_from_record(record: TweetRecord, line: usize) -> Result<LinkingExample> {
    struct Parsed {
        span: MentionSpan,
        entities: Vec<String>,
        rows: Vec<Vec<f64>>,
        gold_option: Option<usize>,
    }

    let mut parsed = Vec::with_capacity(record.candidates.len());
    for cand in record.candidates {
        let span = MentionSpan::new(cand.start, cand.end)
            .map_err(|e| parse_err(line, e.to_string()))?;
        let mut nil: Option<(Vec<f64>, bool)> = None;
        let mut entities = Vec::new();
        let mut entity_rows = Vec::new();
        let mut gold_entity = None;
        for opt in cand.options {
            if opt.entity == NIL_LABEL {
                if nil.is_some() {
                    return Err(parse_err(line, "candidate has two NIL options"));
                }
                nil = Some((opt.features, opt.gold));
            } else {
                if entities.contains(&opt.entity) {
                    return Err(parse_err(
                        line,
                        format!("duplicate entity '{}' in candidate", opt.entity),
                    ));
                }
                if opt.gold {
                    if gold_entity.is_some() {
                        return Err(parse_err(line, "candidate has two gold options"));
                    }
                    gold_entity = Some(entities.len() + 1);
                }
                entities.push(opt.entity);
                entity_rows.push(opt.features);
            }
        }
        let Some((nil_row, nil_gold)) = nil else {
            return Err(parse_err(line, "candidate is missing its NIL option"));
        };
        let gold_option = match (nil_gold, gold_entity) {
            (true, Some(_)) => return Err(parse_err(line, "candidate has two gold options")),
            (true, None) => Some(NIL_OPTION),
            (false, some) => some,
        };
        let mut rows = Vec::with_capacity(entity_rows.len() + 1);
        rows.push(nil_row);
        rows.extend(entity_rows);
        parsed.push(Parsed {
            span,
            entities,
            rows,
            gold_option,
        });
    }

    let golded = parsed.iter().filter(|p| p.gold_option.is_some()).count();
    if golded != 0 && golded != parsed.len() {
        return Err(parse_err(
            line,
            "corpus line mixes golded and ungolded candidates",
        ));
    }
    // candidate-free tweets count as golded with the empty assignment, so
    // they pass through training untouched
    let is_golded = golded > 0 || parsed.is_empty();

    let spans: Vec<MentionSpan> = parsed.iter().map(|p| p.span).collect();
    let order = canonical_order(&spans);
    let mut candidates = Vec::with_capacity(parsed.len());
    let mut features = Vec::with_capacity(parsed.len());
    let mut gold_choices = Vec::with_capacity(parsed.len());
    for &i in &order {
        let p = std::mem::replace(
            &mut parsed[i],
            Parsed {
                span: spans[i],
                entities: Vec::new(),
                rows: Vec::new(),
                gold_option: None,
            },
        );
        candidates.push(MentionCandidate::new(p.span, p.entities));
        features.push(p.rows);
        if let Some(g) = p.gold_option {
            gold_choices.push(g);
        }
    }
    let gold = if is_golded {
        Some(crate::lattice::Assignment {
            choices: gold_choices,
        })
    } else {
        None
    };
    let feature_dim = features
        .first()
        .and_then(|rows| rows.first())
        .map_or(0, |row| row.len());
    let lattice = MentionLattice::from_canonical(candidates);
    LinkingExample::new(
        Tweet {
            id: record.id,
            tokens: record.tokens,
        },
        lattice,
        features,
        feature_dim,
        gold,
    )
    .map_err(|e| parse_err(line, e.to_string()))
}

pub fn read_corpus(path: &Path) -> Result<Vec<LinkingExample>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: TweetRecord = serde_json::from_str(&text)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        out.push(example_from_record(record, line_no)?);
    }
    Ok(out)
}

fn record_from_example(example: &LinkingExample) -> TweetRecord {
    let gold = example.gold.as_ref();
    let candidates = (0..example.num_candidates())
        .map(|k| {
            let cand = example.lattice.candidate(k);
            let options = (0..cand.num_options())
                .map(|u| OptionRecord {
                    entity: cand.entity(u).unwrap_or(NIL_LABEL).to_string(),
                    features: example.features(k, u).to_vec(),
                    gold: gold.is_some_and(|g| g.choices[k] == u),
                })
                .collect();
            CandidateRecord {
                start: cand.span().start,
                end: cand.span().end,
                options,
            }
        })
        .collect();
    TweetRecord {
        id: example.tweet.id.clone(),
        tokens: example.tweet.tokens.clone(),
        candidates,
    }
}

pub fn corpus_to_jsonl(examples: &[LinkingExample]) -> Result<String> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(&record_from_example(ex))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, examples: &[LinkingExample]) -> Result<()> {
    atomic_write(path, corpus_to_jsonl(examples)?.as_bytes())
}

// ---------------------------------------------------------------------------
// Predictions JSONL
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    id: String,
    links: Vec<LinkRecord>,
}

#[derive(Serialize, Deserialize)]
struct LinkRecord {
    start: usize,
    end: usize,
    entity: String,
}

pub fn predictions_to_jsonl(predictions: &[LinkPrediction]) -> Result<String> {
    let mut out = String::new();
    for p in predictions {
        let record = PredictionRecord {
            id: p.tweet_id.clone(),
            links: p
                .links
                .iter()
                .map(|(span, entity)| LinkRecord {
                    start: span.start,
                    end: span.end,
                    entity: entity.clone(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, predictions: &[LinkPrediction]) -> Result<()> {
    atomic_write(path, predictions_to_jsonl(predictions)?.as_bytes())
}

pub fn read_predictions(path: &Path) -> Result<Vec<LinkPrediction>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&text).map_err(|e| parse_err(line_no, e.to_string()))?;
        let mut links = Vec::with_capacity(record.links.len());
        for l in record.links {
            let span =
                MentionSpan::new(l.start, l.end).map_err(|e| parse_err(line_no, e.to_string()))?;
            links.push((span, l.entity));
        }
        out.push(LinkPrediction::new(record.id, links));
    }
    Ok(out)
}

/// Gold links of a corpus as per-tweet link sets, for IE evaluation.
pub fn gold_links(examples: &[LinkingExample]) -> Result<Vec<LinkPrediction>> {
    examples
        .iter()
        .map(|ex| {
            ex.gold_links()
                .map(|links| LinkPrediction::new(ex.tweet.id.clone(), links))
                .ok_or(Error::MissingGold)
        })
        .collect()
}

/// Read gold links from either a predictions-format file or a golded corpus,
/// keyed on which schema the first line carries.
pub fn read_links_or_corpus(path: &Path) -> Result<Vec<LinkPrediction>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let first = reader
        .lines()
        .map_while(|l| l.ok())
        .find(|l| !l.trim().is_empty());
    let Some(first) = first else {
        return Ok(Vec::new());
    };
    let value: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
    if value.get("links").is_some() {
        read_predictions(path)
    } else if value.get("candidates").is_some() {
        gold_links(&read_corpus(path)?)
    } else {
        Err(parse_err(1, "expected a predictions or corpus JSONL file"))
    }
}

// ---------------------------------------------------------------------------
// TSV formats
// ---------------------------------------------------------------------------

/// Lexicon TSV: `surface \t entity \t anchor_prob \t count`.
pub fn read_lexicon(path: &Path) -> Result<Lexicon> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lexicon = Lexicon::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(line_no, "expected 4 tab-separated fields"));
        }
        let anchor_prob: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, "bad anchor_prob"))?;
        let count: u64 = fields[3]
            .parse()
            .map_err(|_| parse_err(line_no, "bad count"))?;
        lexicon
            .insert(
                fields[0],
                LexiconEntry {
                    entity: fields[1].to_string(),
                    anchor_prob,
                    count,
                },
            )
            .map_err(|e| parse_err(line_no, e.to_string()))?;
    }
    Ok(lexicon)
}

/// Link graph TSV: `entity \t page_id`, one edge per line.
pub fn read_link_graph(path: &Path) -> Result<LinkGraph> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut graph = LinkGraph::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let Some((entity, page)) = text.split_once('\t') else {
            return Err(parse_err(line_no, "expected 2 tab-separated fields"));
        };
        graph.add_edge(entity, page);
    }
    Ok(graph)
}

pub fn write_link_graph(path: &Path, graph: &LinkGraph) -> Result<()> {
    let mut out = String::new();
    for (entity, pages) in graph.entities() {
        for page in pages {
            out.push_str(entity);
            out.push('\t');
            out.push_str(page);
            out.push('\n');
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Query TSV: `query_entity \t tweet_id \t relevant(0|1)`; rows for the same
/// query entity are grouped in file order.
pub fn read_queries(path: &Path) -> Result<Vec<QuerySet>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut queries: Vec<QuerySet> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(line_no, "expected 3 tab-separated fields"));
        }
        let relevant = match fields[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line_no, format!("bad relevance flag '{other}'"))),
        };
        match queries.iter_mut().find(|q| q.query == fields[0]) {
            Some(q) => q.tweets.push((fields[1].to_string(), relevant)),
            None => queries.push(QuerySet {
                query: fields[0].to_string(),
                tweets: vec![(fields[1].to_string(), relevant)],
            }),
        }
    }
    Ok(queries)
}

// ---------------------------------------------------------------------------
// Model files and CSV logs
// ---------------------------------------------------------------------------

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    atomic_write(path, model::to_json(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    model::from_json(&fs::read_to_string(path)?)
}

/// Training log CSV: `round,train_loss,seconds`.
pub fn write_training_log(path: &Path, log: &[RoundLog]) -> Result<()> {
    let mut out = String::from("round,train_loss,seconds\n");
    for entry in log {
        out.push_str(&format!(
            "{},{},{:.3}\n",
            entry.round, entry.train_loss, entry.seconds
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Bias sweep CSV: `bias,tp,fp,fn,precision,recall,f1`.
pub fn write_sweep(path: &Path, sweep: &[SweepPoint]) -> Result<()> {
    atomic_write(path, sweep_to_csv(sweep).as_bytes())
}

pub fn sweep_to_csv(sweep: &[SweepPoint]) -> String {
    let mut out = String::from("bias,tp,fp,fn,precision,recall,f1\n");
    for p in sweep {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.bias,
            p.metrics.tp,
            p.metrics.fp,
            p.metrics.fn_,
            p.metrics.precision,
            p.metrics.recall,
            p.metrics.f1
        ));
    }
    out
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    policy: &'a str,
    #[serde(flatten)]
    metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_query: Option<Vec<PerQueryDoc>>,
}

#[derive(Serialize)]
struct PerQueryDoc {
    query: String,
    #[serde(flatten)]
    metrics: MetricsReport,
}

/// Metrics JSON document: `{"policy", "tp", "fp", "fn", "precision",
/// "recall", "f1", "per_query"?}`.
pub fn metrics_json(
    policy: &str,
    metrics: &MetricsReport,
    per_query: Option<&[(String, MetricsReport)]>,
) -> Result<String> {
    let doc = MetricsDoc {
        policy,
        metrics: *metrics,
        per_query: per_query.map(|qs| {
            qs.iter()
                .map(|(query, metrics)| PerQueryDoc {
                    query: query.clone(),
                    metrics: *metrics,
                })
                .collect()
        }),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}
