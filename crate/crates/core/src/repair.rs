//! Speech-repair detection from word strings alone, and non-destructive
//! expansion of N-best lists with the corrected sequences.
//!
//! Detection looks for pairs of words sharing a root (numbers excluded),
//! combines them into pairs of sequences that begin and end with shared
//! roots, scores a left-to-right alignment of the two sequences, and, when
//! material intervenes, decides whether it belongs to the reparandum
//! (forward match) or the repair (backward match).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexicon::Lexicon;

pub const DEFAULT_SPAN_CAP: usize = 8;
pub const DEFAULT_PENALTY: f64 = 10.0;

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairCandidate {
    pub reparandum: Span,
    pub repair: Span,
    pub score: i32,
    pub deleted_words: usize,
    /// How intervening material was resolved, if there was any.
    pub resolution: Option<Direction>,
}

impl RepairCandidate {
    /// Tokens from the start of the reparandum to the end of the repair.
    pub fn extent(&self) -> Span {
        Span::new(self.reparandum.start, self.repair.end)
    }

    pub fn overlaps(&self, other: &RepairCandidate) -> bool {
        let (a, b) = (self.extent(), other.extent());
        a.start < b.end && b.start < a.end
    }

    pub fn apply<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        apply_candidates(words, std::slice::from_ref(self))
    }

    /// Selection order: higher score, fewer deletions, then leftmost.
    fn rank_cmp(&self, other: &RepairCandidate) -> Ordering {
        other
            .score
            .cmp(&self.score)
            .then(self.deleted_words.cmp(&other.deleted_words))
            .then(self.reparandum.start.cmp(&other.reparandum.start))
            .then(self.repair.start.cmp(&other.repair.start))
            .then(self.repair.end.cmp(&other.repair.end))
    }
}

/// Delete the reparanda of non-overlapping candidates.
pub fn apply_candidates<S: AsRef<str>>(words: &[S], candidates: &[RepairCandidate]) -> Vec<String> {
    words
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            !candidates
                .iter()
                .any(|c| c.reparandum.start <= *i && *i < c.reparandum.end)
        })
        .map(|(_, w)| w.as_ref().to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Original,
    Repaired {
        source_rank: usize,
        candidates: Vec<RepairCandidate>,
    },
}

/// One N-best entry. `rank` is 1-based; repaired hypotheses are numbered
/// after the originals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub rank: usize,
    pub words: Vec<String>,
    pub acoustic_score: f64,
    pub origin: Origin,
}

impl Hypothesis {
    pub fn original(rank: usize, words: Vec<String>, acoustic_score: f64) -> Self {
        Hypothesis {
            rank,
            words,
            acoustic_score,
            origin: Origin::Original,
        }
    }

    pub fn is_original(&self) -> bool {
        matches!(self.origin, Origin::Original)
    }

    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

/// Pairs `(i, j)`, `i < j`, of non-number tokens sharing a root.
pub fn find_repeated_root_pairs<S: AsRef<str>>(lexicon: &Lexicon, words: &[S]) -> Vec<(usize, usize)> {
    let words = lowercase(words);
    let roots: Vec<Option<Vec<String>>> = words
        .iter()
        .map(|w| (!lexicon.is_number(w)).then(|| lexicon.roots(w)))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..words.len() {
        let Some(ri) = &roots[i] else { continue };
        for j in i + 1..words.len() {
            let Some(rj) = &roots[j] else { continue };
            if ri.iter().any(|r| rj.contains(r)) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Candidate regions `(seq1, seq2)` built from a start pair and an end pair.
///
/// A single pair gives one-word sequences. Two distinct pairs `(a, c)` and
/// `(b, d)` give `seq1 = [a, b]`, `seq2 = [c, d]` when `a < b < c < d`.
/// Sequences longer than `span_cap` are skipped, as are one-word regions of
/// a common skippable word with material between them.
pub fn build_candidate_regions<S: AsRef<str>>(
    lexicon: &Lexicon,
    pairs: &[(usize, usize)],
    words: &[S],
    span_cap: usize,
) -> Vec<(Span, Span)> {
    let words = lowercase(words);
    let mut out = Vec::new();
    for &(a, c) in pairs {
        for &(b, d) in pairs {
            let region = if (a, c) == (b, d) {
                (Span::new(a, a + 1), Span::new(c, c + 1))
            } else if a < b && b < c && c < d {
                (Span::new(a, b + 1), Span::new(c, d + 1))
            } else {
                continue;
            };
            let (s1, s2) = region;
            if s1.len() > span_cap || s2.len() > span_cap {
                continue;
            }
            if s1.len() == 1
                && s2.len() == 1
                && s1.end < s2.start
                && lexicon.is_common_skippable(&words[s1.start])
                && lexicon.is_common_skippable(&words[s2.start])
            {
                continue;
            }
            out.push(region);
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Result of aligning two sequences: matched index pairs in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub score: i32,
    pub matches: Vec<(usize, usize)>,
}

/// Best monotone alignment: +2 per aligned shared-root pair, -1 per skipped
/// word on either side. Among equal scores, the alignment whose matches are
/// lexicographically leftmost wins.
pub fn align_left_right<S: AsRef<str>, T: AsRef<str>>(lexicon: &Lexicon, seq1: &[S], seq2: &[T]) -> Alignment {
    let (n, m) = (seq1.len(), seq2.len());
    let shared: Vec<Vec<bool>> = seq1
        .iter()
        .map(|a| {
            seq2.iter()
                .map(|b| lexicon.share_root(&a.as_ref().to_lowercase(), &b.as_ref().to_lowercase()))
                .collect()
        })
        .collect();
    // best[i][j]: best score aligning the suffixes seq1[i..], seq2[j..].
    let mut best = vec![vec![0i32; m + 1]; n + 1];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if i == n || j == m {
                best[i][j] = -((n - i) as i32) - ((m - j) as i32);
                continue;
            }
            let mut v = (best[i + 1][j] - 1).max(best[i][j + 1] - 1);
            if shared[i][j] {
                v = v.max(best[i + 1][j + 1] + 2);
            }
            best[i][j] = v;
        }
    }
    // Walk forward taking the lexicographically first match that stays on
    // an optimal path.
    let mut matches = Vec::new();
    let (mut i, mut j) = (0, 0);
    'walk: while i < n && j < m {
        for x in i..n {
            for y in j..m {
                let via = 2 - (x - i) as i32 - (y - j) as i32 + best[x + 1][y + 1];
                if shared[x][y] && via == best[i][j] {
                    matches.push((x, y));
                    i = x + 1;
                    j = y + 1;
                    continue 'walk;
                }
            }
        }
        break;
    }
    Alignment { score: best[0][0], matches }
}

/// Outcome of matching intervening material against its continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterveningMatch {
    pub score: i32,
    /// Continuation words consumed by the best path.
    pub consumed: usize,
}

/// Match `intervening` against `continuation`, both given in the order the
/// match walks them (callers reverse for the backward direction). All
/// intervening material must be consumed; the continuation may be left
/// partly unconsumed. Skipping a word costs 1, except that skipping a
/// repair marker in the forward direction earns 1. Words align at no cost
/// when they share a major category.
pub fn match_intervening<S: AsRef<str>, T: AsRef<str>>(
    lexicon: &Lexicon,
    direction: Direction,
    intervening: &[S],
    continuation: &[T],
) -> InterveningMatch {
    let iv: Vec<String> = lowercase(intervening);
    let ct: Vec<String> = lowercase(continuation);
    let (n, m) = (iv.len(), ct.len());
    let skip_iv: Vec<i32> = iv
        .iter()
        .map(|w| {
            if direction == Direction::Forward && lexicon.is_repair_marker(w) {
                1
            } else {
                -1
            }
        })
        .collect();
    // best[i][j]: best score from state (i, j) to full consumption of iv,
    // with the fewest continuation words consumed on ties.
    let mut best = vec![vec![(0i32, 0usize); m + 1]; n + 1];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if i == n {
                best[i][j] = (0, j);
                continue;
            }
            let mut opts = vec![(best[i + 1][j].0 + skip_iv[i], best[i + 1][j].1)];
            if j < m {
                opts.push((best[i][j + 1].0 - 1, best[i][j + 1].1));
                if lexicon.share_major_cat(&iv[i], &ct[j]) {
                    opts.push(best[i + 1][j + 1]);
                }
            }
            best[i][j] = opts
                .into_iter()
                .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)))
                .expect("at least one option");
        }
    }
    InterveningMatch {
        score: best[0][0].0,
        consumed: best[0][0].1,
    }
}

/// Score a region and resolve its intervening material.
fn score_region(lexicon: &Lexicon, words: &[String], s1: Span, s2: Span) -> RepairCandidate {
    let align = align_left_right(lexicon, &words[s1.start..s1.end], &words[s2.start..s2.end]);
    if s1.end == s2.start {
        return RepairCandidate {
            reparandum: s1,
            repair: s2,
            score: align.score,
            deleted_words: s1.len(),
            resolution: None,
        };
    }
    let iv = &words[s1.end..s2.start];
    let fwd = match_intervening(lexicon, Direction::Forward, iv, &words[s2.end..]);
    let iv_rev: Vec<&String> = iv.iter().rev().collect();
    let before_rev: Vec<&String> = words[..s1.start].iter().rev().collect();
    let bwd = match_intervening(lexicon, Direction::Backward, &iv_rev, &before_rev);
    if fwd.score >= bwd.score {
        RepairCandidate {
            reparandum: Span::new(s1.start, s2.start),
            repair: s2,
            score: align.score + fwd.score,
            deleted_words: s2.start - s1.start,
            resolution: Some(Direction::Forward),
        }
    } else {
        RepairCandidate {
            reparandum: s1,
            repair: Span::new(s1.end, s2.end),
            score: align.score + bwd.score,
            deleted_words: s1.len(),
            resolution: Some(Direction::Backward),
        }
    }
}

/// Every scored region, in selection order.
pub fn score_all_regions<S: AsRef<str>>(lexicon: &Lexicon, words: &[S], span_cap: usize) -> Vec<RepairCandidate> {
    let words = lowercase(words);
    let pairs = find_repeated_root_pairs(lexicon, &words);
    let regions = build_candidate_regions(lexicon, &pairs, &words, span_cap);
    let mut all: Vec<RepairCandidate> = regions
        .into_iter()
        .map(|(s1, s2)| score_region(lexicon, &words, s1, s2))
        .collect();
    all.sort_by(|a, b| a.rank_cmp(b));
    all
}

/// The best candidate, plus the best candidate of every region of the
/// sentence that does not overlap an already accepted one.
pub fn detect_repairs<S: AsRef<str>>(lexicon: &Lexicon, words: &[S], span_cap: usize) -> Vec<RepairCandidate> {
    let mut accepted: Vec<RepairCandidate> = Vec::new();
    for c in score_all_regions(lexicon, words, span_cap) {
        if accepted.iter().all(|a| !a.overlaps(&c)) {
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|c| c.reparandum.start);
    accepted
}

/// Originals unchanged and in order, followed by one repaired hypothesis
/// per original that has detected repairs. Repaired hypotheses score the
/// list minimum minus `penalty`.
pub fn expand_hypotheses(lexicon: &Lexicon, nbest: &[Hypothesis], penalty: f64, span_cap: usize) -> Vec<Hypothesis> {
    let floor = nbest
        .iter()
        .map(|h| h.acoustic_score)
        .fold(f64::INFINITY, f64::min)
        - penalty;
    let mut out: Vec<Hypothesis> = nbest.to_vec();
    let mut next_rank = nbest.iter().map(|h| h.rank).max().unwrap_or(0);
    for h in nbest {
        let cands = detect_repairs(lexicon, &h.words, span_cap);
        if cands.is_empty() {
            continue;
        }
        next_rank += 1;
        out.push(Hypothesis {
            rank: next_rank,
            words: apply_candidates(&h.words, &cands),
            acoustic_score: floor,
            origin: Origin::Repaired {
                source_rank: h.rank,
                candidates: cands,
            },
        });
    }
    out
}

fn lowercase<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    words.iter().map(|w| w.as_ref().to_lowercase()).collect()
}
