//! Synthetic data: sentences sampled from the general grammar, speech
//! repairs injected into what is "said", and recognizer-style N-best lists
//! with acoustically confusable substitutions, deletions and insertions.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::io::Utterance;
use crate::grammar::feature::{Bindings, FeatureStructure, Value};
use crate::grammar::{is_lexical_category, Constituent, Grammar, Rule, TreeSpec};
use crate::lexicon::{LexEntry, Lexicon, MajorCat};
use crate::repair::Hypothesis;

/// Longest sampled sentence.
pub const MAX_WORDS: usize = 12;
/// Shortest sampled sentence.
pub const MIN_WORDS: usize = 3;
const MAX_DEPTH: usize = 9;

/// Relative rule weights for sampling. Rules not listed weigh 1.
const RULE_WEIGHTS: &[(&str, f64)] = &[
    ("utt_imp", 12.0),
    ("utt_please", 0.05),
    ("utt_decl", 0.8),
    ("utt_q", 3.0),
    ("utt_frag", 0.05),
    ("utt_disc", 0.05),
    ("q_aux", 2.0),
    ("q_modal", 0.1),
    ("q_wh_be", 3.0),
    ("q_wh_subj", 0.2),
    ("q_exist", 2.0),
    ("vp_tv", 6.0),
    ("vp_dtv", 3.0),
    ("vp_intr", 0.05),
    ("vp_inf", 0.7),
    ("vp_pp", 0.05),
    ("np_det", 5.0),
    ("np_bare", 2.5),
    ("np_mass", 0.05),
    ("np_name", 1.5),
    ("np_pron", 1.0),
    ("np_flightno", 0.3),
    ("np_flightcode", 0.05),
    ("nbar_n", 6.0),
    ("nbar_adj", 0.3),
    ("nbar_nn", 0.05),
    ("nbar_pp", 3.0),
    ("numseq_more", 0.3),
    ("pp_np", 6.0),
    ("pp_between", 0.1),
];

/// Weight factor per earlier use of a recursive rule on the current path.
const RECURSION_DECAY: f64 = 0.15;

/// Context adjustments along the current rule path: noun phrases inside
/// prepositional phrases are mostly bare names, subjects mostly pronouns,
/// and objects are usually common nouns carrying a modifying phrase.
fn context_factor(path: &[String], rule: &str) -> f64 {
    let parent = path.last().map(String::as_str).unwrap_or("");
    let np_at = path.iter().rposition(|r| r.starts_with("np_"));
    let np_parent = np_at.and_then(|i| i.checked_sub(1)).map(|i| path[i].as_str()).unwrap_or("");
    match rule {
        "np_name" if parent.starts_with("pp_") => 20.0,
        "np_pron" if parent.starts_with("pp_") => 0.0,
        "np_pron" if matches!(parent, "s_decl" | "q_aux" | "q_modal") => 30.0,
        "np_name" | "np_pron" if parent.starts_with("vp_") || parent.starts_with("q_") => 0.1,
        "nbar_pp" if np_parent.starts_with("pp_") => 0.05,
        "nbar_pp" if !path.iter().any(|r| r == "nbar_pp") => 20.0,
        _ => 1.0,
    }
}

/// Word pairs a recognizer confuses.
const CONFUSIONS: &[(&str, &str)] = &[
    ("flight", "flights"),
    ("fare", "fares"),
    ("meal", "meals"),
    ("time", "times"),
    ("city", "cities"),
    ("seat", "seats"),
    ("ticket", "tickets"),
    ("airline", "airlines"),
    ("is", "are"),
    ("does", "do"),
    ("a", "the"),
    ("this", "these"),
    ("that", "those"),
    ("to", "two"),
    ("for", "four"),
    ("on", "one"),
    ("me", "we"),
    ("and", "in"),
    ("show", "shows"),
    ("list", "lists"),
    ("leave", "leaves"),
    ("arrive", "arrives"),
    ("stop", "stops"),
];

const FILLERS: &[&str] = &["the", "a", "to", "and", "of", "on", "is"];

/// Top-down generator: rules are chosen by weight and feature constraints
/// are unified as the tree grows, so every sampled tree is well formed.
struct Sampler<'a> {
    grammar: &'a Grammar,
    lexicon: &'a Lexicon,
    weights: BTreeMap<&'static str, f64>,
    words_by_cat: BTreeMap<MajorCat, Vec<&'a LexEntry>>,
    fresh: usize,
}

impl<'a> Sampler<'a> {
    fn new(grammar: &'a Grammar, lexicon: &'a Lexicon) -> Self {
        let mut words_by_cat: BTreeMap<MajorCat, Vec<_>> = BTreeMap::new();
        for e in lexicon.all_entries() {
            words_by_cat.entry(e.major_cat).or_default().push(e);
        }
        Sampler {
            grammar,
            lexicon,
            weights: RULE_WEIGHTS.iter().copied().collect(),
            words_by_cat,
            fresh: 0,
        }
    }

    fn leaf(&self, d: &Constituent, fs: &FeatureStructure, env: &mut Bindings, rng: &mut ChaCha8Rng) -> Option<TreeSpec> {
        let cat = MajorCat::ALL.into_iter().find(|c| c.as_str() == d.cat)?;
        let fits: Vec<(&LexEntry, Bindings)> = self
            .words_by_cat
            .get(&cat)?
            .iter()
            // Stricter than parsing: the word must state every feature the
            // position tests, so a pronoun never stands in for a flight noun.
            .filter(|e| {
                d.fs.iter()
                    .all(|(f, v)| !matches!(v, Value::Atom(_)) || e.features.get(f).is_some())
            })
            .filter_map(|e| {
                let mut e2 = env.clone();
                e2.unify_fs(&e.features, fs).map(|_| (*e, e2))
            })
            .collect();
        let (e, e2) = fits.choose(rng)?;
        *env = e2.clone();
        Some(TreeSpec::Leaf {
            cat: d.cat.clone(),
            word: e.surface.clone(),
        })
    }

    fn expand(
        &mut self,
        cat: &str,
        want: &FeatureStructure,
        env: &mut Bindings,
        used: &mut Vec<String>,
        rng: &mut ChaCha8Rng,
    ) -> Option<TreeSpec> {
        if used.len() > MAX_DEPTH {
            return None;
        }
        let rules: Vec<&Rule> = self.grammar.rules_for(cat).collect();
        let mut weights: Vec<f64> = rules
            .iter()
            .map(|r| {
                let base = self.weights.get(r.id.as_str()).copied().unwrap_or(1.0) * context_factor(used, &r.id);
                let recursive = r.daughters.iter().any(|d| d.cat == r.mother.cat);
                let repeats = used.iter().filter(|u| **u == r.id).count();
                if recursive {
                    base * RECURSION_DECAY.powi(repeats as i32)
                } else {
                    base
                }
            })
            .collect();
        // Weighted order without replacement; the first rule that can be
        // completed wins.
        while weights.iter().any(|w| *w > 0.0) {
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen::<f64>() * total;
            let mut pick = weights.iter().rposition(|w| *w > 0.0).expect("positive weight");
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && x < *w {
                    pick = i;
                    break;
                }
                x -= w;
            }
            weights[pick] = 0.0;
            let rule = rules[pick];
            self.fresh += 1;
            let n = self.fresh;
            let mut rename = |v: &str| format!("{v}_{n}");
            let mut e2 = env.clone();
            if e2.unify_fs(&rule.mother.fs.rename_vars(&mut rename), want).is_none() {
                continue;
            }
            used.push(rule.id.clone());
            let mut children = Vec::with_capacity(rule.daughters.len());
            for d in &rule.daughters {
                let dfs = d.fs.rename_vars(&mut rename);
                let child = if is_lexical_category(&d.cat) {
                    self.leaf(d, &dfs, &mut e2, rng)
                } else {
                    self.expand(&d.cat, &dfs, &mut e2, used, rng)
                };
                match child {
                    Some(c) => children.push(c),
                    None => break,
                }
            }
            used.pop();
            if children.len() == rule.daughters.len() {
                *env = e2;
                return Some(TreeSpec::Node {
                    rule: rule.id.clone(),
                    children,
                });
            }
            // Give up on this node rather than search exhaustively.
            return None;
        }
        None
    }

    /// A well-formed tree of [`MIN_WORDS`] to [`MAX_WORDS`] words.
    fn sample(&mut self, rng: &mut ChaCha8Rng) -> TreeSpec {
        loop {
            let start = self.grammar.start().to_string();
            let Some(t) = self.expand(&start, &FeatureStructure::new(), &mut Bindings::new(), &mut Vec::new(), rng)
            else {
                continue;
            };
            let n = t.words().len();
            if (MIN_WORDS..=MAX_WORDS).contains(&n) && t.instantiate(self.grammar, self.lexicon).is_ok() {
                return t;
            }
        }
    }
}

/// `n` trees with distinct word strings, none of whose strings is in
/// `exclude`.
pub fn sample_trees(grammar: &Grammar, lexicon: &Lexicon, seed: u64, n: usize, exclude: &BTreeSet<String>) -> Vec<TreeSpec> {
    let mut sampler = Sampler::new(grammar, lexicon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = exclude.clone();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t = sampler.sample(&mut rng);
        if seen.insert(t.words().join(" ")) {
            out.push(t);
        }
    }
    out
}

fn repeatable(lexicon: &Lexicon, w: &str) -> bool {
    !lexicon.is_number(w) && !lexicon.is_common_skippable(w) && !lexicon.is_repair_marker(w)
}

/// What a speaker might say when producing `words` with one self-repair:
/// a repeated word, a restarted phrase, or a phrase restarted after a wrong
/// word (optionally with "no" or "sorry"). `None` if no position suits.
pub fn inject_repair(words: &[String], lexicon: &Lexicon, rng: &mut ChaCha8Rng) -> Option<Vec<String>> {
    let starts: Vec<usize> = (0..words.len()).filter(|&i| repeatable(lexicon, &words[i])).collect();
    let i = *starts.choose(rng)?;
    let kind = rng.gen_range(0..3);
    let max_len = (words.len() - i).min(3);
    let mut said: Vec<String> = words[..i].to_vec();
    match kind {
        0 => said.push(words[i].clone()),
        1 => {
            let l = rng.gen_range(1..=max_len);
            said.extend_from_slice(&words[i..i + l]);
        }
        _ => {
            if max_len < 2 {
                said.push(words[i].clone());
            } else {
                let l = rng.gen_range(2..=max_len);
                said.extend_from_slice(&words[i..i + l - 1]);
                let last = &words[i + l - 1];
                let alt = lexicon
                    .major_cats(last)
                    .into_iter()
                    .filter(|c| *c != MajorCat::Number)
                    .flat_map(|c| {
                        lexicon
                            .all_entries()
                            .filter(move |e| e.major_cat == c)
                            .map(|e| e.surface.clone())
                    })
                    .filter(|w| w != last && !lexicon.is_repair_marker(w))
                    .collect::<BTreeSet<_>>();
                let alt: Vec<String> = alt.into_iter().collect();
                said.push(alt.choose(rng).cloned().unwrap_or_else(|| last.clone()));
                if rng.gen_bool(0.5) {
                    said.push(if rng.gen_bool(0.5) { "no" } else { "sorry" }.to_string());
                }
            }
        }
    }
    said.extend_from_slice(&words[i..]);
    Some(said)
}

/// Knobs for simulated recognizer output.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub utterances: usize,
    pub nbest: usize,
    /// Fraction of utterances spoken with a self-repair.
    pub repair_rate: f64,
    /// Probability that what was said is missing from the list.
    pub miss_rate: f64,
    pub id_prefix: String,
}

impl CorpusSpec {
    pub fn new(seed: u64, utterances: usize, id_prefix: &str) -> Self {
        CorpusSpec {
            seed,
            utterances,
            nbest: 10,
            repair_rate: 0.12,
            miss_rate: 0.1,
            id_prefix: id_prefix.to_string(),
        }
    }
}

fn corrupt(words: &[String], lexicon: &Lexicon, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut w = words.to_vec();
    let edits = [1, 1, 1, 2, 2, 3][rng.gen_range(0..6)];
    for _ in 0..edits {
        let roll: f64 = rng.gen();
        let confusable: Vec<usize> = (0..w.len())
            .filter(|&i| CONFUSIONS.iter().any(|(a, b)| w[i] == *a || w[i] == *b))
            .collect();
        if roll < 0.45 && !confusable.is_empty() {
            let i = *confusable.choose(rng).expect("non-empty");
            let (a, b) = *CONFUSIONS.iter().find(|(a, b)| w[i] == *a || w[i] == *b).expect("confusable");
            w[i] = if w[i] == a { b } else { a }.to_string();
        } else if roll < 0.65 {
            let i = rng.gen_range(0..w.len());
            let cats = lexicon.major_cats(&w[i]);
            let pool: BTreeSet<&str> = lexicon
                .all_entries()
                .filter(|e| cats.contains(&e.major_cat))
                .map(|e| e.surface.as_str())
                .collect();
            let pool: Vec<&str> = pool.into_iter().collect();
            if let Some(x) = pool.choose(rng) {
                w[i] = x.to_string();
            }
        } else if roll < 0.8 && w.len() > 1 {
            let i = rng.gen_range(0..w.len());
            w.remove(i);
        } else {
            let i = rng.gen_range(0..=w.len());
            w.insert(i, FILLERS.choose(rng).expect("fillers").to_string());
        }
    }
    w
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Add-one bigram model standing in for the recognizer's language model.
#[derive(Debug, Clone, Default)]
pub struct BigramLm {
    unigrams: BTreeMap<String, usize>,
    bigrams: BTreeMap<(String, String), usize>,
    vocabulary: usize,
}

impl BigramLm {
    pub fn train<S: AsRef<[String]>>(sentences: &[S], lexicon: &Lexicon) -> Self {
        let mut lm = BigramLm::default();
        for s in sentences {
            let mut prev = "<s>".to_string();
            for w in s.as_ref().iter().chain(std::iter::once(&"</s>".to_string())) {
                *lm.unigrams.entry(prev.clone()).or_default() += 1;
                *lm.bigrams.entry((prev, w.clone())).or_default() += 1;
                prev = w.clone();
            }
        }
        let surfaces: BTreeSet<&str> = lexicon.all_entries().map(|e| e.surface.as_str()).collect();
        lm.vocabulary = surfaces.len() + 1;
        lm
    }

    /// Natural-log probability of the padded word string.
    pub fn log_prob(&self, words: &[String]) -> f64 {
        let mut prev = "<s>";
        let mut total = 0.0;
        for w in words.iter().map(String::as_str).chain(std::iter::once("</s>")) {
            let c = self.unigrams.get(prev).copied().unwrap_or(0);
            let b = self.bigrams.get(&(prev.to_string(), w.to_string())).copied().unwrap_or(0);
            total += ((b + 1) as f64 / (c + self.vocabulary) as f64).ln();
            prev = w;
        }
        total
    }
}

/// Weight of the language model against acoustic cost.
const LM_WEIGHT: f64 = 1.0;
/// Per-word log-probability offset so that deletions are not free.
const WORD_BONUS: f64 = 4.5;

fn lm_score(lm: &BigramLm, words: &[String]) -> f64 {
    LM_WEIGHT * (lm.log_prob(words) + WORD_BONUS * (words.len() + 1) as f64)
}

/// A ranked list for what was said. Competitors are corruptions of the
/// spoken string; every hypothesis scores acoustic cost per edit plus
/// Gaussian noise plus the language model, and the best `n` are kept. The
/// spoken string is dropped with probability `miss_rate`.
pub fn recognizer_nbest(
    said: &[String],
    lexicon: &Lexicon,
    lm: &BigramLm,
    n: usize,
    miss_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Hypothesis> {
    let noise = Normal::new(0.0, 1.5).expect("valid deviation");
    let base = -8.0 * said.len() as f64;
    let keep = !rng.gen_bool(miss_rate);
    let mut hyps: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    if keep {
        hyps.insert(said.to_vec(), base + lm_score(lm, said) + noise.sample(rng));
    }
    let pool = 3 * n;
    let mut attempts = 0;
    while hyps.len() < pool && attempts < 50 * pool {
        attempts += 1;
        let c = corrupt(said, lexicon, rng);
        if c.as_slice() == said || hyps.contains_key(&c) {
            continue;
        }
        let cost: f64 = rng.gen_range(1.5..8.0);
        let score = base - cost + lm_score(lm, &c) + noise.sample(rng);
        hyps.insert(c, score);
    }
    let mut list: Vec<(Vec<String>, f64)> = hyps.into_iter().map(|(w, s)| (w, round2(s))).collect();
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    list.truncate(n);
    list.into_iter()
        .enumerate()
        .map(|(i, (w, s))| Hypothesis::original(i + 1, w, s))
        .collect()
}

/// Utterances with references, gold trees, spoken words and N-best lists.
pub fn generate_corpus(
    grammar: &Grammar,
    lexicon: &Lexicon,
    lm: &BigramLm,
    spec: &CorpusSpec,
    exclude: &BTreeSet<String>,
) -> Vec<Utterance> {
    let trees = sample_trees(grammar, lexicon, spec.seed, spec.utterances, exclude);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x005e_ed0f_ba5e);
    trees
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let reference = t.words();
            let said = if rng.gen_bool(spec.repair_rate) {
                inject_repair(&reference, lexicon, &mut rng).unwrap_or_else(|| reference.clone())
            } else {
                reference.clone()
            };
            let nbest = recognizer_nbest(&said, lexicon, lm, spec.nbest, spec.miss_rate, &mut rng);
            Utterance {
                id: format!("{}{:04}", spec.id_prefix, k + 1),
                nbest,
                reference: Some(reference),
                gold: Some(t),
                spoken: Some(said),
            }
        })
        .collect()
}

/// Everything the shipped data directory holds.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub treebank: Vec<TreeSpec>,
    pub heldout: Vec<TreeSpec>,
    pub train: Vec<Utterance>,
    pub eval: Vec<Utterance>,
    pub norepair: Vec<Utterance>,
}

/// Sizes and seeds of the shipped data set.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPlan {
    pub seed: u64,
    pub treebank: usize,
    pub heldout: usize,
    pub train: usize,
    pub eval: usize,
    pub norepair: usize,
    /// Sentences the recognizer's language model is trained on.
    pub lm_text: usize,
}

impl Default for DataPlan {
    fn default() -> Self {
        DataPlan {
            seed: 1994,
            treebank: 50,
            heldout: 50,
            train: 300,
            eval: 200,
            norepair: 100,
            lm_text: 2000,
        }
    }
}

pub fn generate_all(grammar: &Grammar, lexicon: &Lexicon, plan: &DataPlan) -> GeneratedData {
    let treebank = sample_trees(grammar, lexicon, plan.seed, plan.treebank, &BTreeSet::new());
    let seen: BTreeSet<String> = treebank.iter().map(|t| t.words().join(" ")).collect();
    let heldout = sample_trees(grammar, lexicon, plan.seed + 1, plan.heldout, &seen);
    let none = BTreeSet::new();
    let text: Vec<Vec<String>> = sample_trees(grammar, lexicon, plan.seed + 5, plan.lm_text, &none)
        .iter()
        .map(TreeSpec::words)
        .collect();
    let lm = BigramLm::train(&text, lexicon);
    let train = generate_corpus(grammar, lexicon, &lm, &CorpusSpec::new(plan.seed + 2, plan.train, "tr"), &none);
    let eval = generate_corpus(grammar, lexicon, &lm, &CorpusSpec::new(plan.seed + 3, plan.eval, "ev"), &none);
    let norepair = generate_corpus(
        grammar,
        lexicon,
        &lm,
        &CorpusSpec {
            repair_rate: 0.0,
            ..CorpusSpec::new(plan.seed + 4, plan.norepair, "nr")
        },
        &none,
    );
    GeneratedData {
        treebank,
        heldout,
        train,
        eval,
        norepair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_chart;
    use crate::grammar::tests::toy;
    use crate::lexicon::tests::domain;

    #[test]
    fn samples_are_grammatical_and_distinct() {
        let (g, l) = (toy(), domain());
        let trees = sample_trees(&g, &l, 7, 30, &BTreeSet::new());
        let strings: BTreeSet<String> = trees.iter().map(|t| t.words().join(" ")).collect();
        assert_eq!(strings.len(), 30);
        for t in &trees {
            let w = t.words();
            assert!((MIN_WORDS..=MAX_WORDS).contains(&w.len()));
            let parses = parse_chart(&g, &l, &w);
            assert!(parses.iter().any(|p| p.to_spec() == *t), "{t}");
        }
        assert_eq!(trees, sample_trees(&g, &l, 7, 30, &BTreeSet::new()));
    }

    #[test]
    fn injected_repairs_repeat_a_content_word() {
        let l = domain();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<String> = "show me the flights to boston".split(' ').map(String::from).collect();
        for _ in 0..50 {
            let s = inject_repair(&w, &l, &mut rng).unwrap();
            assert!(s.len() > w.len());
            assert!(s.ends_with(&w[w.len() - 1..]));
            let repeated = (0..s.len()).any(|i| (i + 1..s.len()).any(|j| s[i] == s[j] && repeatable(&l, &s[i])));
            assert!(repeated, "{s:?}");
        }
        let nums: Vec<String> = vec!["one".into(), "two".into()];
        assert!(inject_repair(&nums, &l, &mut rng).is_none());
    }

    #[test]
    fn bigram_model_prefers_seen_text() {
        let l = domain();
        let seen: Vec<String> = "show me flights".split(' ').map(String::from).collect();
        let other: Vec<String> = "flights me show".split(' ').map(String::from).collect();
        let lm = BigramLm::train(std::slice::from_ref(&seen), &l);
        assert!(lm.log_prob(&seen) > lm.log_prob(&other));
        // Four add-one factors: three seen bigrams and the end marker.
        let v = lm.vocabulary as f64;
        let expected = 4.0 * (2.0 / (1.0 + v)).ln();
        assert!((lm.log_prob(&seen) - expected).abs() < 1e-12);
    }

    #[test]
    fn nbest_lists_are_ranked_and_distinct() {
        let l = domain();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let said: Vec<String> = "list the flights from denver to boston".split(' ').map(String::from).collect();
        let lm = BigramLm::train(std::slice::from_ref(&said), &l);
        let list = recognizer_nbest(&said, &l, &lm, 10, 0.0, &mut rng);
        assert_eq!(list.len(), 10);
        assert!(list.iter().any(|h| h.words == said));
        assert!(list.windows(2).all(|p| p[0].acoustic_score >= p[1].acoustic_score));
        let distinct: BTreeSet<_> = list.iter().map(|h| h.text()).collect();
        assert_eq!(distinct.len(), 10);
        assert!(list.iter().enumerate().all(|(i, h)| h.rank == i + 1));
    }
}
