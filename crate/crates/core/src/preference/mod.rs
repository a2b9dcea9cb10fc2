//! Preference scoring: each analysis gets a vector of preference-function
//! values, and the chosen analysis maximises the weighted sum.
//!
//! Three kinds of function are registered by name:
//!
//! * `speech`: the hypothesis's acoustic score relative to the best in its
//!   list;
//! * structural: `parsed_specialized` and any structural flag name
//!   (`num_mismatch`, `rule:<id>`);
//! * combining: `rules`, `triples`, `ngram1`..`ngram4`, scored from an
//!   [`ObjectScoreTable`] by sum or average.

pub mod model;
pub mod train;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::grammar::ParseTree;

pub use model::PreferenceModel;
pub use train::{
    phase2_objective, train_object_scores, train_scaling_phase1, train_scaling_phase2, Phase2Config, Phase2Outcome,
    RankedCandidate, TrainingSentence,
};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const SPEECH: &str = "speech";
pub const PARSED_SPECIALIZED: &str = "parsed_specialized";

/// Function names registered by default.
pub const DEFAULT_FUNCTIONS: &[&str] = &[
    SPEECH,
    PARSED_SPECIALIZED,
    crate::analysis::NUM_MISMATCH,
    "rules",
    "triples",
    "ngram1",
    "ngram2",
    "ngram3",
    "ngram4",
];

pub fn is_combining(name: &str) -> bool {
    matches!(name, "rules" | "triples" | "ngram1" | "ngram2" | "ngram3" | "ngram4")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    Sum,
    Average,
}

impl FromStr for CombineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sum" => Ok(CombineMode::Sum),
            "average" => Ok(CombineMode::Average),
            other => Err(format!("unknown combining mode '{other}'")),
        }
    }
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMode::Sum => "sum",
            CombineMode::Average => "average",
        })
    }
}

/// How object scores are estimated from counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableScoring {
    /// Good versus bad occurrences: `log((g + a) / (g + b + 2a))`.
    Discriminative,
    /// Occurrences in good analyses only, relative to the number of good
    /// analyses: `log((g + a) / (n_good + 2a))`. Kept as an ablation.
    FrequencyOnly,
}

impl fmt::Display for TableScoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableScoring::Discriminative => "discriminative",
            TableScoring::FrequencyOnly => "frequency",
        })
    }
}

impl FromStr for TableScoring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "discriminative" => Ok(TableScoring::Discriminative),
            "frequency" => Ok(TableScoring::FrequencyOnly),
            other => Err(format!("unknown table scoring '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObjectCounts {
    pub good: u64,
    pub bad: u64,
}

/// Per-object scores for one combining-function kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectScoreTable {
    pub kind: String,
    pub alpha: f64,
    pub scoring: TableScoring,
    /// Number of good analyses seen in training.
    pub good_total: u64,
    pub counts: BTreeMap<String, ObjectCounts>,
}

impl ObjectScoreTable {
    pub fn new(kind: impl Into<String>, alpha: f64, scoring: TableScoring) -> Self {
        ObjectScoreTable {
            kind: kind.into(),
            alpha,
            scoring,
            good_total: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn score_counts(&self, c: ObjectCounts) -> f64 {
        let a = self.alpha;
        match self.scoring {
            TableScoring::Discriminative => ((c.good as f64 + a) / ((c.good + c.bad) as f64 + 2.0 * a)).ln(),
            TableScoring::FrequencyOnly => ((c.good as f64 + a) / (self.good_total as f64 + 2.0 * a)).ln(),
        }
    }

    pub fn score(&self, object: &str) -> f64 {
        self.score_counts(self.counts.get(object).copied().unwrap_or_default())
    }

    pub fn unseen_score(&self) -> f64 {
        self.score_counts(ObjectCounts::default())
    }
}

/// Sum or mean of per-object scores. An empty multiset scores 0 when
/// summed and the unseen score when averaged.
pub fn combining_score<S: AsRef<str>>(objects: &[S], table: &ObjectScoreTable, mode: CombineMode) -> f64 {
    let sum: f64 = objects.iter().map(|o| table.score(o.as_ref())).sum();
    match mode {
        CombineMode::Sum => sum,
        CombineMode::Average if objects.is_empty() => table.unseen_score(),
        CombineMode::Average => sum / objects.len() as f64,
    }
}

/// Function values for one analysis, in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl PreferenceVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Training provenance kept alongside the weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub phase: u8,
    pub phase1_residual: f64,
    /// Top-1 correct count before phase 2 and after each sweep.
    pub trajectory: Vec<usize>,
    pub sentences: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFactors {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    pub meta: TrainingMeta,
}

impl ScalingFactors {
    pub fn new(names: Vec<String>, weights: Vec<f64>) -> Self {
        assert_eq!(names.len(), weights.len());
        ScalingFactors {
            names,
            weights,
            meta: TrainingMeta::default(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.weights.iter_mut().for_each(|w| *w *= c);
        s
    }
}

/// Weighted sum of a vector under matching function names.
pub fn total_score(v: &PreferenceVector, w: &ScalingFactors) -> Result<f64> {
    if v.names != w.names {
        return Err(Error::Invariant(format!(
            "preference vector functions {:?} do not match weights {:?}",
            v.names, w.names
        )));
    }
    Ok(dot(&v.values, &w.weights))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inputs the speech function needs about the hypothesis behind an
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisContext {
    pub acoustic_score: f64,
    /// Best acoustic score in the utterance's list.
    pub list_best: f64,
    pub original: bool,
    /// Whether the hypothesis got any parse from the specialised grammar.
    pub parsed_specialized: bool,
}

/// Speech function: the hypothesis's acoustic score. Repaired hypotheses
/// carry the reduced score assigned at expansion time.
pub fn speech_function(ctx: &HypothesisContext) -> f64 {
    ctx.acoustic_score
}

/// Speech score relative to the best in its list, so that one weight
/// suits utterances of any length.
pub fn normalized_speech(ctx: &HypothesisContext) -> f64 {
    speech_function(ctx) - ctx.list_best
}

/// Index of the best candidate. Ties go to originals over repaired
/// hypotheses, then the better acoustic score, then input order.
pub fn select_best(candidates: &[RankedCandidate], weights: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let s = dot(&c.values, weights);
        let better = match best {
            None => true,
            Some((j, bs)) => match s.total_cmp(&bs) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => {
                    let o = &candidates[j];
                    (c.original && !o.original)
                        || (c.original == o.original && c.acoustic.total_cmp(&o.acoustic) == Ordering::Greater)
                }
            },
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Word-level Levenshtein distance.
pub fn word_edit_distance<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x.as_ref() != y.as_ref());
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Word yields of every internal node, as a multiset.
pub fn bracket_yields(tree: &ParseTree) -> BTreeMap<String, usize> {
    let words = tree.words();
    let mut out = BTreeMap::new();
    for (s, e, _) in tree.spans() {
        *out.entry(words[s..e].join(" ")).or_insert(0) += 1;
    }
    out
}

/// F1 between two bracket multisets.
pub fn bracket_f1(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    if na + nb == 0 {
        return 1.0;
    }
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let common: usize = keys
        .into_iter()
        .map(|k| a.get(k).copied().unwrap_or(0).min(b.get(k).copied().unwrap_or(0)))
        .sum();
    2.0 * common as f64 / (na + nb) as f64
}

/// Blend of word-sequence similarity and bracketing agreement, in [0, 1].
pub fn similarity_trees(candidate: &ParseTree, reference: &ParseTree, word_weight: f64) -> f64 {
    let (cw, rw) = (candidate.words(), reference.words());
    let longest = cw.len().max(rw.len()).max(1);
    let word_sim = 1.0 - word_edit_distance(&cw, &rw) as f64 / longest as f64;
    let f1 = bracket_f1(&bracket_yields(candidate), &bracket_yields(reference));
    word_weight * word_sim + (1.0 - word_weight) * f1
}

pub fn similarity(candidate: &Analysis, reference: &Analysis, word_weight: f64) -> f64 {
    similarity_trees(&candidate.tree, &reference.tree, word_weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::tests::toy;
    use crate::grammar::TreeSpec;
    use crate::lexicon::tests::domain;
    use proptest::prelude::*;

    fn table(entries: &[(&str, u64, u64)]) -> ObjectScoreTable {
        let mut t = ObjectScoreTable::new("triples", DEFAULT_ALPHA, TableScoring::Discriminative);
        for (o, g, b) in entries {
            t.counts.insert(o.to_string(), ObjectCounts { good: *g, bad: *b });
        }
        t
    }

    #[test]
    fn object_scores_follow_smoothing() {
        let t = table(&[("o", 3, 1), ("bad", 0, 4)]);
        assert!((t.score("o") - (3.5f64 / 5.0).ln()).abs() < 1e-12);
        assert!((t.score("o") + 0.357).abs() < 1e-3);
        assert!((t.score("bad") + 2.303).abs() < 1e-3);
        assert_eq!(t.score("never"), 0.5f64.ln());
    }

    #[test]
    fn combining_modes() {
        let mut t = table(&[]);
        t.counts.insert("a".into(), ObjectCounts { good: 1, bad: 0 });
        let sa = t.score("a");
        assert_eq!(combining_score(&["a"], &t, CombineMode::Sum), sa);
        assert_eq!(combining_score(&["a", "x"], &t, CombineMode::Average), (sa + 0.5f64.ln()) / 2.0);
        assert!((combining_score(&["x"], &t, CombineMode::Sum) + 0.693).abs() < 1e-3);
        assert_eq!(combining_score::<&str>(&[], &t, CombineMode::Sum), 0.0);
        assert_eq!(combining_score::<&str>(&[], &t, CombineMode::Average), 0.5f64.ln());
    }

    #[test]
    fn totals_and_selection() {
        let names = vec!["a".to_string(), "b".to_string()];
        let v = PreferenceVector {
            names: names.clone(),
            values: vec![1.0, 2.0],
        };
        let w = ScalingFactors::new(names.clone(), vec![0.5, 0.25]);
        assert_eq!(total_score(&v, &w).unwrap(), 1.0);
        assert_eq!(total_score(&v, &ScalingFactors::new(names, vec![0.0, 0.0])).unwrap(), 0.0);
        let other = ScalingFactors::new(vec!["a".into()], vec![1.0]);
        assert!(total_score(&v, &other).is_err());

        let c = |v: f64, original: bool, acoustic: f64| RankedCandidate {
            values: vec![v],
            original,
            acoustic,
        };
        assert_eq!(select_best(&[c(3.0, true, -1.0), c(2.0, true, 0.0)], &[1.0]), Some(0));
        assert_eq!(select_best(&[c(1.0, false, -1.0), c(1.0, true, -9.0)], &[1.0]), Some(1));
        assert_eq!(select_best(&[c(1.0, true, -5.0), c(1.0, true, -1.0)], &[1.0]), Some(1));
        assert_eq!(select_best(&[c(1.0, true, -1.0), c(1.0, true, -1.0)], &[1.0]), Some(0));
        assert_eq!(select_best(&[], &[1.0]), None);
    }

    #[test]
    fn speech_values() {
        let ctx = |s: f64, best: f64, original: bool| HypothesisContext {
            acoustic_score: s,
            list_best: best,
            original,
            parsed_specialized: false,
        };
        assert_eq!(speech_function(&ctx(-120.0, -120.0, true)), -120.0);
        assert_eq!(normalized_speech(&ctx(-120.0, -120.0, true)), 0.0);
        assert_eq!(normalized_speech(&ctx(-160.0, -100.0, false)), -60.0);
        assert!(speech_function(&ctx(-100.0, -90.0, true)) > speech_function(&ctx(-110.0, -90.0, true)));
    }

    fn t(s: &str) -> ParseTree {
        TreeSpec::parse(s).unwrap().instantiate(&toy(), &domain()).unwrap()
    }

    #[test]
    fn similarity_extremes() {
        let a = t("(utt_imp (vp_tv verb:show (np_det det:the (nbar_n noun:flights))))");
        assert_eq!(similarity_trees(&a, &a, 0.5), 1.0);
        let b = t("(utt_frag (np_name propername:boston))");
        assert_eq!(similarity_trees(&a, &b, 0.5), 0.0);
    }

    #[test]
    fn similarity_half_brackets() {
        // Same words, different attachment.
        let np = t("(utt_imp (vp_tv verb:show (np_det det:the (nbar_pp (nbar_n noun:flights) (pp_np prep:to (np_name propername:boston))))))");
        let vp = t("(utt_imp (vp_pp (vp_tv verb:show (np_det det:the (nbar_n noun:flights))) (pp_np prep:to (np_name propername:boston))))");
        let (ya, yb) = (bracket_yields(&np), bracket_yields(&vp));
        // Brute-force multiset intersection over expanded lists.
        let expand = |m: &BTreeMap<String, usize>| {
            let mut v: Vec<String> = Vec::new();
            for (k, n) in m {
                v.extend(std::iter::repeat(k.clone()).take(*n));
            }
            v
        };
        let (mut la, lb) = (expand(&ya), expand(&yb));
        let mut common = 0;
        for y in &lb {
            if let Some(p) = la.iter().position(|x| x == y) {
                la.remove(p);
                common += 1;
            }
        }
        let f1 = 2.0 * common as f64 / (expand(&ya).len() + lb.len()) as f64;
        assert!((similarity_trees(&np, &vp, 0.5) - (0.5 + 0.5 * f1)).abs() < 1e-12);
        assert!(f1 > 0.0 && f1 < 1.0);
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant(
            vals in prop::collection::vec((prop::collection::vec(-10.0f64..10.0, 3), any::<bool>(), -50.0f64..0.0), 1..8),
            w in prop::collection::vec(-3.0f64..3.0, 3),
            c in 0.01f64..100.0,
        ) {
            let cands: Vec<RankedCandidate> = vals
                .into_iter()
                .map(|(values, original, acoustic)| RankedCandidate { values, original, acoustic })
                .collect();
            let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
            let a = select_best(&cands, &w);
            let b = select_best(&cands, &scaled);
            // Scaling can perturb the last bit of a sum; only compare when
            // the winning margin is clear.
            let scores: Vec<f64> = cands.iter().map(|k| dot(&k.values, &w)).collect();
            let top = scores[a.unwrap()];
            let clear = scores.iter().enumerate().all(|(i, s)| i == a.unwrap() || (top - s).abs() > 1e-9);
            if clear {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn edit_distance_bounds(a in prop::collection::vec("[abc]", 0..6), b in prop::collection::vec("[abc]", 0..6)) {
            let d = word_edit_distance(&a, &b);
            prop_assert!(d <= a.len().max(b.len()));
            prop_assert!(d >= a.len().abs_diff(b.len()));
            prop_assert_eq!(d == 0, a == b);
            prop_assert_eq!(d, word_edit_distance(&b, &a));
        }
    }
}
