//! Non-overlapping mention lattices and exact inference over them.
//!
//! A lattice holds a tweet's mention candidates. Every candidate has a Nil
//! option (index 0) plus zero or more entity options. An assignment picks one
//! option per candidate and is *valid* when no two candidates with overlapping
//! token spans both take a non-Nil option. Inference (partition function,
//! per-option marginals, Viterbi decoding) is exact over the set of valid
//! assignments.
//!
//! The dynamic programs factor the Nil scores out of every configuration:
//! with `delta(k, u) = F(k, u) - F(k, Nil)`, the score of a valid assignment
//! is `sum_k F(k, Nil)` plus the deltas of the selected (non-Nil) candidates,
//! and the selected candidates form a non-overlapping interval set. Summing
//! or maximizing over interval sets is then a weighted-interval-scheduling
//! scan, O(K log K + sum_k T_k) per call and nearly linear in the candidate
//! count in practice. All accumulation happens in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{logaddexp, logsumexp};

/// Option index reserved for Nil in every candidate.
pub const NIL_OPTION: usize = 0;

/// Entity label reserved for the Nil option in external formats.
pub const NIL_LABEL: &str = "NIL";

/// Upper bound on the configuration count `brute_force` will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// A token span `[start, end)`; `start < end` always holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::MalformedSpan { start, end });
        }
        Ok(Self { start, end })
    }

    /// True when the two spans share at least one token position.
    pub fn overlaps(&self, other: &MentionSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false // start < end is an invariant
    }
}

/// One mention candidate: a span plus its entity options. The Nil option is
/// implicit at index 0; `entities[i]` is option index `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionCandidate {
    span: MentionSpan,
    entities: Vec<String>,
}

impl MentionCandidate {
    pub fn new(span: MentionSpan, entities: Vec<String>) -> Self {
        // Entries equal to NIL_LABEL denote the implicit Nil option; drop them
        // along with exact duplicates so each option counts once in Z.
        let mut seen = Vec::new();
        for e in entities {
            if e != NIL_LABEL && !seen.contains(&e) {
                seen.push(e);
            }
        }
        Self {
            span,
            entities: seen,
        }
    }

    pub fn span(&self) -> MentionSpan {
        self.span
    }

    /// Entity options, excluding Nil.
    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    /// Total option count including Nil.
    pub fn num_options(&self) -> usize {
        self.entities.len() + 1
    }

    /// Entity label for an option index; `None` is Nil.
    pub fn entity(&self, option: usize) -> Option<&str> {
        if option == NIL_OPTION {
            None
        } else {
            Some(self.entities[option - 1].as_str())
        }
    }
}

/// Stable order of spans by (start, end); ties keep input order.
pub fn canonical_order(spans: &[MentionSpan]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| (spans[i].start, spans[i].end));
    order
}

/// A tweet's mention candidates in canonical order, with the derived overlap
/// structure. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionLattice {
    candidates: Vec<MentionCandidate>,
}

impl MentionLattice {
    /// Build a lattice from raw (span, entity options) pairs. Candidates are
    /// sorted by (start, end) with ties keeping input order; a `NIL_LABEL`
    /// entry anywhere in an option list is folded into the implicit Nil
    /// option at index 0.
    pub fn build(items: Vec<(MentionSpan, Vec<String>)>) -> Result<Self> {
        let spans: Vec<MentionSpan> = items.iter().map(|(s, _)| *s).collect();
        for s in &spans {
            if s.start >= s.end {
                return Err(Error::MalformedSpan {
                    start: s.start,
                    end: s.end,
                });
            }
        }
        let order = canonical_order(&spans);
        let mut items = items;
        let mut candidates = Vec::with_capacity(items.len());
        for &i in &order {
            let (span, entities) = std::mem::replace(&mut items[i], (spans[i], Vec::new()));
            candidates.push(MentionCandidate::new(span, entities));
        }
        Ok(Self { candidates })
    }

    /// Construct from candidates already in canonical order (loader path).
    pub(crate) fn from_canonical(candidates: Vec<MentionCandidate>) -> Self {
        debug_assert!(candidates
            .windows(2)
            .all(|w| (w[0].span.start, w[0].span.end) <= (w[1].span.start, w[1].span.end)));
        Self { candidates }
    }

    /// Candidate count K.
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[MentionCandidate] {
        &self.candidates
    }

    pub fn candidate(&self, k: usize) -> &MentionCandidate {
        &self.candidates[k]
    }

    /// True when candidates `i` and `j` share at least one token position.
    pub fn overlap(&self, i: usize, j: usize) -> bool {
        i != j && self.candidates[i].span.overlaps(&self.candidates[j].span)
    }

    /// Validity: choices in range and no two overlapping candidates both
    /// non-Nil.
    pub fn is_valid(&self, assignment: &Assignment) -> bool {
        if assignment.choices.len() != self.len() {
            return false;
        }
        for (k, &c) in assignment.choices.iter().enumerate() {
            if c >= self.candidates[k].num_options() {
                return false;
            }
        }
        let selected: Vec<usize> = assignment
            .choices
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != NIL_OPTION)
            .map(|(k, _)| k)
            .collect();
        for (a, &i) in selected.iter().enumerate() {
            for &j in &selected[a + 1..] {
                if self.overlap(i, j) {
                    return false;
                }
            }
        }
        true
    }
}

/// One option choice per candidate; `NIL_OPTION` means "not an entity".
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub choices: Vec<usize>,
}

impl Assignment {
    pub fn all_nil(k: usize) -> Self {
        Self {
            choices: vec![NIL_OPTION; k],
        }
    }

    pub fn non_nil_count(&self) -> usize {
        self.choices.iter().filter(|&&c| c != NIL_OPTION).count()
    }

    /// Non-Nil links as (span, entity) pairs resolved against the lattice.
    pub fn links(&self, lattice: &MentionLattice) -> Vec<(MentionSpan, String)> {
        self.choices
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| {
                lattice
                    .candidate(k)
                    .entity(c)
                    .map(|e| (lattice.candidate(k).span(), e.to_string()))
            })
            .collect()
    }
}

/// Per-(candidate, option) scores F(x, y_k = u); the interface between the
/// model and inference. All entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    /// All-zero table shaped like the lattice.
    pub fn zeros(lattice: &MentionLattice) -> Self {
        Self {
            rows: lattice
                .candidates()
                .iter()
                .map(|c| vec![0.0; c.num_options()])
                .collect(),
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in &rows {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("score table".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn num_candidates(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn get(&self, k: usize, option: usize) -> f64 {
        self.rows[k][option]
    }

    pub fn add(&mut self, k: usize, option: usize, delta: f64) {
        debug_assert!(delta.is_finite());
        self.rows[k][option] += delta;
    }

    fn check_shape(&self, lattice: &MentionLattice) -> Result<()> {
        if self.rows.len() != lattice.len() {
            return Err(Error::Shape(format!(
                "score table has {} rows for {} candidates",
                self.rows.len(),
                lattice.len()
            )));
        }
        for (k, row) in self.rows.iter().enumerate() {
            let want = lattice.candidate(k).num_options();
            if row.len() != want {
                return Err(Error::Shape(format!(
                    "candidate {k} has {} options but {} scores",
                    want,
                    row.len()
                )));
            }
        }
        Ok(())
    }
}

/// Exact inference output: ln Z and per-(candidate, option) marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceResult {
    pub log_partition: f64,
    /// `marginals[k][u] = P(y_k = u | x)`; row layout matches the score table.
    pub marginals: Vec<Vec<f64>>,
}

/// Shared precomputation for the interval-set dynamic programs.
struct Factors {
    /// log sum_u exp(F(k,u) - F(k,Nil)) over entity options; -inf when none.
    log_w: Vec<f64>,
    /// sum of Nil scores; common factor of every valid configuration.
    base: f64,
}

impl Factors {
    fn new(lattice: &MentionLattice, scores: &ScoreTable) -> Result<Self> {
        scores.check_shape(lattice)?;
        let mut log_w = Vec::with_capacity(lattice.len());
        let mut base = 0.0;
        for k in 0..lattice.len() {
            let row = scores.row(k);
            let deltas: Vec<f64> = row[1..].iter().map(|&s| s - row[0]).collect();
            base += row[0];
            log_w.push(logsumexp(&deltas));
        }
        Ok(Self { log_w, base })
    }
}

/// Candidates sorted by (end, start, index) plus the sorted end positions,
/// for prefix lookups of "every candidate ending at or before t".
struct EndOrder {
    order: Vec<usize>,
    ends: Vec<usize>,
}

impl EndOrder {
    fn new(lattice: &MentionLattice) -> Self {
        let mut order: Vec<usize> = (0..lattice.len()).collect();
        order.sort_by_key(|&k| {
            let s = lattice.candidate(k).span();
            (s.end, s.start, k)
        });
        let ends = order
            .iter()
            .map(|&k| lattice.candidate(k).span().end)
            .collect();
        Self { order, ends }
    }

    /// Number of candidates whose span ends at or before `t` (they all sit in
    /// a prefix of the end-sorted order).
    fn prefix_ending_by(&self, t: usize) -> usize {
        self.ends.partition_point(|&e| e <= t)
    }
}

/// Forward scan over end-sorted candidates: `lg[i]` is the log-sum over all
/// non-overlapping subsets of the first `i` candidates of the product of
/// their entity weights. `lg[K]` is ln Z minus the Nil base.
fn forward_logsums(lattice: &MentionLattice, factors: &Factors, end_order: &EndOrder) -> Vec<f64> {
    let k = lattice.len();
    let mut lg = Vec::with_capacity(k + 1);
    lg.push(0.0);
    for i in 0..k {
        let cand = end_order.order[i];
        let p = end_order.prefix_ending_by(lattice.candidate(cand).span().start);
        debug_assert!(p <= i);
        let take = factors.log_w[cand] + lg[p];
        lg.push(logaddexp(lg[i], take));
    }
    lg
}

/// First canonical index whose span starts at or after `t`. Canonical order
/// is sorted by start, so everything from that index on is compatible with a
/// candidate ending at `t`.
fn suffix_starting_at(lattice: &MentionLattice, t: usize) -> usize {
    lattice
        .candidates()
        .partition_point(|c| c.span().start < t)
}

/// Backward scan over canonical (start-sorted) candidates: `lh[i]` is the
/// log-sum over non-overlapping subsets of candidates `i..` of the product of
/// their entity weights. `lh[0]` is ln Z minus the Nil base.
fn backward_logsums(lattice: &MentionLattice, factors: &Factors) -> Vec<f64> {
    let k = lattice.len();
    let mut lh = vec![0.0; k + 1];
    for i in (0..k).rev() {
        let q = suffix_starting_at(lattice, lattice.candidate(i).span().end);
        debug_assert!(q > i);
        let take = factors.log_w[i] + lh[q];
        lh[i] = logaddexp(lh[i + 1], take);
    }
    lh
}

/// ln Σ_valid exp(Σ_k F(k, y_k)) via the forward scan.
pub fn log_partition(lattice: &MentionLattice, scores: &ScoreTable) -> Result<f64> {
    let factors = Factors::new(lattice, scores)?;
    let end_order = EndOrder::new(lattice);
    let lg = forward_logsums(lattice, &factors, &end_order);
    Ok(factors.base + lg[lattice.len()])
}

/// ln Z via the backward scan; agrees with [`log_partition`] and exists so
/// the two recursions can cross-check each other.
pub fn log_partition_backward(lattice: &MentionLattice, scores: &ScoreTable) -> Result<f64> {
    let factors = Factors::new(lattice, scores)?;
    let lh = backward_logsums(lattice, &factors);
    Ok(factors.base + lh[0])
}

/// Exact marginals P(y_k = u | x) for every option including Nil, plus ln Z.
///
/// For an entity option the probability mass factorizes into the candidate's
/// own delta, the interval-set sums over candidates ending before its start
/// (forward), and those starting after its end (backward); the Nil marginal
/// is the complement of the candidate's entity mass.
pub fn marginals(lattice: &MentionLattice, scores: &ScoreTable) -> Result<InferenceResult> {
    let factors = Factors::new(lattice, scores)?;
    let end_order = EndOrder::new(lattice);
    let lg = forward_logsums(lattice, &factors, &end_order);
    let lh = backward_logsums(lattice, &factors);
    let log_z_offset = lg[lattice.len()];
    debug_assert!((log_z_offset - lh[0]).abs() <= 1e-9 * (1.0 + log_z_offset.abs()));

    let mut rows = Vec::with_capacity(lattice.len());
    for k in 0..lattice.len() {
        let cand = lattice.candidate(k);
        let lf = lg[end_order.prefix_ending_by(cand.span().start)];
        let lb = lh[suffix_starting_at(lattice, cand.span().end)];
        let row_scores = scores.row(k);
        let mut row = Vec::with_capacity(cand.num_options());
        row.push(0.0); // Nil, filled below
        let mut entity_mass = 0.0;
        for u in 1..cand.num_options() {
            let delta = row_scores[u] - row_scores[NIL_OPTION];
            let p = (delta + lf + lb - log_z_offset).exp().clamp(0.0, 1.0);
            entity_mass += p;
            row.push(p);
        }
        row[NIL_OPTION] = (1.0 - entity_mass).clamp(0.0, 1.0);
        rows.push(row);
    }
    Ok(InferenceResult {
        log_partition: factors.base + log_z_offset,
        marginals: rows,
    })
}

/// Highest-scoring valid assignment and its score.
///
/// Ties are broken deterministically: among maximizing assignments, the one
/// whose option-index vector is lexicographically smallest in canonical
/// candidate order is returned. Because Nil is option 0, this prefers Nil
/// over entities, then lower option indices, resolving candidates earliest
/// first.
pub fn viterbi(lattice: &MentionLattice, scores: &ScoreTable) -> Result<(Assignment, f64)> {
    let factors = Factors::new(lattice, scores)?;
    let k = lattice.len();

    // Best entity delta per candidate, lowest option index among ties.
    let mut best_delta = vec![f64::NEG_INFINITY; k];
    let mut best_option = vec![NIL_OPTION; k];
    for i in 0..k {
        let row = scores.row(i);
        for u in 1..row.len() {
            let d = row[u] - row[NIL_OPTION];
            if d > best_delta[i] {
                best_delta[i] = d;
                best_option[i] = u;
            }
        }
    }

    // Backward max over canonical order; `take[i]` records whether selecting
    // candidate i is strictly better than every completion that skips it.
    let mut value = vec![0.0; k + 1];
    let mut take = vec![false; k];
    let mut next = vec![0usize; k];
    for i in (0..k).rev() {
        let q = suffix_starting_at(lattice, lattice.candidate(i).span().end);
        next[i] = q;
        let take_score = best_delta[i] + value[q];
        if take_score > value[i + 1] {
            value[i] = take_score;
            take[i] = true;
        } else {
            value[i] = value[i + 1];
        }
    }

    // Greedy walk: keeping a candidate at Nil whenever the optimum is still
    // reachable yields the lexicographically smallest argmax.
    let mut assignment = Assignment::all_nil(k);
    let mut i = 0;
    while i < k {
        if take[i] {
            assignment.choices[i] = best_option[i];
            i = next[i];
        } else {
            i += 1;
        }
    }
    debug_assert!(lattice.is_valid(&assignment));
    Ok((assignment, factors.base + value[0]))
}

/// Exhaustive-enumeration oracle: exact ln Z, marginals, and argmax computed
/// by iterating every option tuple and filtering by validity. Independent of
/// the dynamic programs above; refuses state spaces beyond
/// [`BRUTE_FORCE_LIMIT`].
pub fn brute_force(
    lattice: &MentionLattice,
    scores: &ScoreTable,
) -> Result<(InferenceResult, Assignment)> {
    scores.check_shape(lattice)?;
    let k = lattice.len();
    let radices: Vec<usize> = lattice.candidates().iter().map(|c| c.num_options()).collect();
    let states = radices.iter().fold(1u128, |a, &r| a.saturating_mul(r as u128));
    if states > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleTooLarge {
            states,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let overlapping: Vec<Vec<usize>> = (0..k)
        .map(|i| (0..i).filter(|&j| lattice.overlap(i, j)).collect())
        .collect();
    let is_valid = |choices: &[usize]| -> bool {
        for i in 0..k {
            if choices[i] == NIL_OPTION {
                continue;
            }
            if overlapping[i].iter().any(|&j| choices[j] != NIL_OPTION) {
                return false;
            }
        }
        true
    };
    let config_score =
        |choices: &[usize]| -> f64 { (0..k).map(|i| scores.get(i, choices[i])).sum() };

    // Pass 1: max score and lexicographically-first argmax. Enumeration runs
    // in lexicographic order, so keeping strictly-greater scores retains the
    // smallest maximizer, the same tie rule as `viterbi`.
    let mut best_score = f64::NEG_INFINITY;
    let mut best = Assignment::all_nil(k);
    enumerate(&radices, |choices| {
        if is_valid(choices) {
            let s = config_score(choices);
            if s > best_score {
                best_score = s;
                best.choices.copy_from_slice(choices);
            }
        }
    });

    // Pass 2: shifted-exponential sums for ln Z and the per-option masses.
    let mut total = 0.0f64;
    let mut mass: Vec<Vec<f64>> = radices.iter().map(|&r| vec![0.0; r]).collect();
    enumerate(&radices, |choices| {
        if is_valid(choices) {
            let w = (config_score(choices) - best_score).exp();
            total += w;
            for i in 0..k {
                mass[i][choices[i]] += w;
            }
        }
    });

    let marginals = mass
        .into_iter()
        .map(|row| row.into_iter().map(|m| m / total).collect())
        .collect();
    Ok((
        InferenceResult {
            log_partition: best_score + total.ln(),
            marginals,
        },
        best,
    ))
}

/// Visit every option tuple in lexicographic order (last index fastest).
fn enumerate(radices: &[usize], mut visit: impl FnMut(&[usize])) {
    let k = radices.len();
    let mut choices = vec![0usize; k];
    loop {
        visit(&choices);
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            choices[pos] += 1;
            if choices[pos] < radices[pos] {
                break;
            }
            choices[pos] = 0;
            if pos == 0 {
                return;
            }
        }
        if k == 0 {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: usize, e: usize) -> MentionSpan {
        MentionSpan::new(s, e).unwrap()
    }

    fn lattice(items: &[(usize, usize, &[&str])]) -> MentionLattice {
        MentionLattice::build(
            items
                .iter()
                .map(|&(s, e, ents)| (span(s, e), ents.iter().map(|x| x.to_string()).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn build_empty() {
        let l = MentionLattice::build(vec![]).unwrap();
        assert_eq!(l.len(), 0);
    }

    #[test]
    fn build_overlapping_pair() {
        let l = lattice(&[(0, 2, &["e1"]), (1, 3, &["e2"])]);
        assert_eq!(l.len(), 2);
        assert!(l.overlap(0, 1));
    }

    #[test]
    fn build_disjoint_pair() {
        let l = lattice(&[(0, 1, &["e1"]), (2, 3, &["e2"])]);
        assert_eq!(l.len(), 2);
        assert!(!l.overlap(0, 1));
    }

    #[test]
    fn build_rejects_malformed_span() {
        let err = MentionSpan::new(3, 3).unwrap_err();
        assert!(matches!(err, Error::MalformedSpan { .. }));
        let err = MentionLattice::build(vec![(MentionSpan { start: 2, end: 1 }, vec![])])
            .unwrap_err();
        assert!(matches!(err, Error::MalformedSpan { .. }));
    }

    #[test]
    fn build_sorts_and_folds_nil() {
        let l = lattice(&[(2, 3, &["b"]), (0, 1, &["NIL", "a", "a"])]);
        assert_eq!(l.candidate(0).span(), span(0, 1));
        assert_eq!(l.candidate(0).entities(), &["a".to_string()]);
        assert_eq!(l.candidate(0).num_options(), 2);
        assert_eq!(l.candidate(1).entities(), &["b".to_string()]);
    }

    #[test]
    fn log_partition_empty_lattice() {
        let l = MentionLattice::build(vec![]).unwrap();
        let s = ScoreTable::zeros(&l);
        assert_eq!(log_partition(&l, &s).unwrap(), 0.0);
    }

    #[test]
    fn log_partition_single_candidate() {
        let l = lattice(&[(0, 1, &["e"])]);
        let s = ScoreTable::zeros(&l);
        assert!((log_partition(&l, &s).unwrap() - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_partition_overlapping_pair_counts_three_configs() {
        // valid configs: (Nil,Nil), (e,Nil), (Nil,e)
        let l = lattice(&[(0, 2, &["e"]), (1, 3, &["e"])]);
        let s = ScoreTable::zeros(&l);
        assert!((log_partition(&l, &s).unwrap() - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_partition_shape_error() {
        let l = lattice(&[(0, 1, &["e"])]);
        let s = ScoreTable::from_rows(vec![vec![0.0]]).unwrap();
        assert!(matches!(
            log_partition(&l, &s).unwrap_err(),
            Error::Shape(_)
        ));
    }

    #[test]
    fn marginals_single_candidate_symmetric() {
        let l = lattice(&[(0, 1, &["e"])]);
        let s = ScoreTable::zeros(&l);
        let r = marginals(&l, &s).unwrap();
        assert!((r.marginals[0][0] - 0.5).abs() < 1e-12);
        assert!((r.marginals[0][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn marginals_overlapping_pair() {
        let l = lattice(&[(0, 2, &["e"]), (1, 3, &["e"])]);
        let s = ScoreTable::zeros(&l);
        let r = marginals(&l, &s).unwrap();
        for k in 0..2 {
            assert!((r.marginals[k][1] - 1.0 / 3.0).abs() < 1e-12);
            assert!((r.marginals[k][0] - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_disjoint_pair() {
        let l = lattice(&[(0, 1, &["e"]), (2, 3, &["e"])]);
        let s = ScoreTable::zeros(&l);
        let r = marginals(&l, &s).unwrap();
        for k in 0..2 {
            for u in 0..2 {
                assert!((r.marginals[k][u] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn viterbi_single_candidate() {
        let l = lattice(&[(0, 1, &["e"])]);
        let s = ScoreTable::from_rows(vec![vec![0.0, 2.0]]).unwrap();
        let (a, score) = viterbi(&l, &s).unwrap();
        assert_eq!(a.choices, vec![1]);
        assert!((score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn viterbi_overlapping_pair_picks_stronger() {
        let l = lattice(&[(0, 2, &["e1"]), (1, 3, &["e2"])]);
        let s = ScoreTable::from_rows(vec![vec![0.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let (a, score) = viterbi(&l, &s).unwrap();
        assert_eq!(a.choices, vec![1, 0]);
        assert!((score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn viterbi_all_zero_prefers_nil() {
        let l = lattice(&[(0, 2, &["e1"]), (1, 3, &["e2"]), (4, 5, &["e3"])]);
        let s = ScoreTable::zeros(&l);
        let (a, score) = viterbi(&l, &s).unwrap();
        assert_eq!(a, Assignment::all_nil(3));
        assert_eq!(score, 0.0);
    }

    #[test]
    fn brute_force_empty_lattice() {
        let l = MentionLattice::build(vec![]).unwrap();
        let s = ScoreTable::zeros(&l);
        let (r, a) = brute_force(&l, &s).unwrap();
        assert_eq!(r.log_partition, 0.0);
        assert!(a.choices.is_empty());
    }

    #[test]
    fn brute_force_direct_arithmetic() {
        let l = lattice(&[(0, 1, &["e"])]);
        let s = ScoreTable::from_rows(vec![vec![0.0, 3.0f64.ln()]]).unwrap();
        let (r, _) = brute_force(&l, &s).unwrap();
        assert!((r.marginals[0][1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_large_state_space() {
        let items: Vec<(MentionSpan, Vec<String>)> = (0..30)
            .map(|i| {
                (
                    span(2 * i, 2 * i + 1),
                    vec!["a".into(), "b".into(), "c".into()],
                )
            })
            .collect();
        let l = MentionLattice::build(items).unwrap();
        let s = ScoreTable::zeros(&l);
        assert!(matches!(
            brute_force(&l, &s).unwrap_err(),
            Error::OracleTooLarge { .. }
        ));
    }

    #[test]
    fn forward_and_backward_partition_agree() {
        let l = lattice(&[
            (0, 2, &["a", "b"]),
            (1, 4, &["c"]),
            (3, 5, &["d", "e"]),
            (6, 7, &[]),
            (6, 8, &["f"]),
        ]);
        let mut rows = Vec::new();
        let mut x = 0.37;
        for c in l.candidates() {
            let mut row = Vec::new();
            for _ in 0..c.num_options() {
                x = (x * 7.13 + 0.19) % 4.0;
                row.push(x - 2.0);
            }
            rows.push(row);
        }
        let s = ScoreTable::from_rows(rows).unwrap();
        let f = log_partition(&l, &s).unwrap();
        let b = log_partition_backward(&l, &s).unwrap();
        assert!((f - b).abs() < 1e-9);
    }

    #[test]
    fn validity_detects_overlapping_non_nil() {
        let l = lattice(&[(0, 2, &["e1"]), (1, 3, &["e2"])]);
        assert!(l.is_valid(&Assignment {
            choices: vec![1, 0]
        }));
        assert!(!l.is_valid(&Assignment {
            choices: vec![1, 1]
        }));
        assert!(!l.is_valid(&Assignment { choices: vec![1] }));
    }
}
