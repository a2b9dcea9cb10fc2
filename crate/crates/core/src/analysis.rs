//! Feature objects extracted from a general-grammar parse tree: semantic
//! head-relation triples, rule uses, structural flags and word n-grams.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{Grammar, ParseTree, TreeSpec};
use crate::lexicon::Lexicon;

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";
pub const NUM_MISMATCH: &str = "num_mismatch";

/// `(head1, relation, head2)` with class-abstracted heads. The relation is
/// an argument index or a preposition root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head1: String,
    pub rel: String,
    pub head2: String,
}

impl Triple {
    pub fn new(head1: impl Into<String>, rel: impl Into<String>, head2: impl Into<String>) -> Self {
        Triple {
            head1: head1.into(),
            rel: rel.into(),
            head2: head2.into(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.head1, self.rel, self.head2)
    }
}

impl std::str::FromStr for Triple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| format!("bad triple {s:?}"))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
            return Err(format!("bad triple {s:?}"));
        }
        Ok(Triple::new(parts[0], parts[1], parts[2]))
    }
}

/// Class-abstracted head of a constituent.
fn head_of(tree: &ParseTree, grammar: &Grammar, lexicon: &Lexicon) -> String {
    match tree.head_leaf(grammar) {
        ParseTree::Leaf { entry, .. } => lexicon.sem_class(&entry.root),
        ParseTree::Node { .. } => unreachable!("head_leaf returns a leaf"),
    }
}

/// One triple per annotated head-dependent edge: argument slots give the
/// slot number as relation; a dependent whose rule names a relation word
/// (`rel=k`) contributes that word's root.
pub fn extract_triples(tree: &ParseTree, grammar: &Grammar, lexicon: &Lexicon) -> Vec<Triple> {
    let mut out = Vec::new();
    tree.visit(&mut |node| {
        let ParseTree::Node { rule, children, .. } = node else { return };
        let Some(r) = grammar.rule(rule) else { return };
        let head = head_of(node, grammar, lexicon);
        for (i, child) in children.iter().enumerate() {
            if i == r.head {
                continue;
            }
            if let Some(slot) = r.args.get(&i) {
                out.push(Triple::new(head.clone(), slot.to_string(), head_of(child, grammar, lexicon)));
            } else if let Some(k) = child.rule().and_then(|id| grammar.rule(id)).and_then(|cr| cr.rel) {
                let rel = match child.children()[k].head_leaf(grammar) {
                    ParseTree::Leaf { entry, .. } => entry.root.clone(),
                    ParseTree::Node { .. } => unreachable!(),
                };
                out.push(Triple::new(head.clone(), rel, head_of(child, grammar, lexicon)));
            }
        }
    });
    out.sort();
    out
}

/// Counters for constructions that are unlikely to be correct.
/// `num_mismatch` is always computed; `rule_counters` adds a
/// `rule:<id>` flag counting uses of each listed rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlagRegistry {
    pub rule_counters: Vec<String>,
}

impl FlagRegistry {
    pub fn flag_names(&self) -> Vec<String> {
        let mut v = vec![NUM_MISMATCH.to_string()];
        v.extend(self.rule_counters.iter().map(|r| format!("rule:{r}")));
        v
    }
}

/// Structural flag counts for a tree.
pub fn structural_flags(tree: &ParseTree, registry: &FlagRegistry) -> BTreeMap<String, i64> {
    let mut flags = BTreeMap::new();
    flags.insert(NUM_MISMATCH.to_string(), count_num_mismatch(tree));
    if !registry.rule_counters.is_empty() {
        let used = tree.rule_ids();
        for r in &registry.rule_counters {
            let n = used.iter().filter(|u| *u == r).count() as i64;
            flags.insert(format!("rule:{r}"), n);
        }
    }
    flags
}

/// Clauses where a form of "be" and a following noun phrase disagree in
/// number.
fn count_num_mismatch(tree: &ParseTree) -> i64 {
    let mut n = 0;
    tree.visit(&mut |node| {
        let kids = node.children();
        for (i, k) in kids.iter().enumerate() {
            let ParseTree::Leaf { entry, .. } = &**k else { continue };
            if entry.root != "be" {
                continue;
            }
            let Some(vnum) = entry.features.atom("num") else { continue };
            let np = kids[i + 1..].iter().find(|c| !c.is_leaf() && c.cat() == "np");
            if let Some(nnum) = np.and_then(|c| c.fs().atom("num")) {
                if nnum != vnum {
                    n += 1;
                }
            }
        }
    });
    n
}

/// Sliding window of width `n` over the words padded with one
/// [`SENTENCE_START`] and one [`SENTENCE_END`].
pub fn word_ngrams<S: AsRef<str>>(words: &[S], n: usize) -> Vec<Vec<String>> {
    assert!((1..=4).contains(&n), "n-gram order must be 1..=4");
    let mut padded = vec![SENTENCE_START.to_string()];
    padded.extend(words.iter().map(|w| w.as_ref().to_string()));
    padded.push(SENTENCE_END.to_string());
    padded.windows(n).map(|w| w.to_vec()).collect()
}

/// A parse of one hypothesis with everything the preference functions
/// look at.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Position of the hypothesis in the expanded N-best list.
    pub hyp_index: usize,
    pub words: Vec<String>,
    /// General-grammar tree.
    pub tree: ParseTree,
    pub triples: Vec<Triple>,
    pub rules_used: Vec<String>,
    pub structural: BTreeMap<String, i64>,
    /// Whether the parse came from the specialised grammar.
    pub specialized: bool,
}

impl Analysis {
    pub fn new(
        hyp_index: usize,
        tree: ParseTree,
        specialized: bool,
        grammar: &Grammar,
        lexicon: &Lexicon,
        registry: &FlagRegistry,
    ) -> Self {
        let mut rules_used = tree.rule_ids();
        rules_used.sort();
        Analysis {
            hyp_index,
            words: tree.words(),
            triples: extract_triples(&tree, grammar, lexicon),
            structural: structural_flags(&tree, registry),
            rules_used,
            tree,
            specialized,
        }
    }

    /// Objects of one combining-function kind: `rules`, `triples` or
    /// `ngram1`..`ngram4`.
    pub fn objects(&self, kind: &str) -> Option<Vec<String>> {
        match kind {
            "rules" => Some(self.rules_used.clone()),
            "triples" => Some(self.triples.iter().map(|t| t.to_string()).collect()),
            _ => {
                let n: usize = kind.strip_prefix("ngram")?.parse().ok()?;
                if !(1..=4).contains(&n) {
                    return None;
                }
                Some(word_ngrams(&self.words, n).into_iter().map(|g| g.join(" ")).collect())
            }
        }
    }
}

/// Line form of an analysis for the training store:
/// `utt_id<TAB>rank<TAB>tree<TAB>triples<TAB>flags`, triples separated by
/// spaces and flags written `name=count` separated by commas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisRecord {
    pub utt_id: String,
    pub rank: usize,
    pub tree: TreeSpec,
    pub triples: Vec<Triple>,
    pub flags: BTreeMap<String, i64>,
}

impl AnalysisRecord {
    pub fn from_analysis(utt_id: &str, rank: usize, a: &Analysis) -> Self {
        AnalysisRecord {
            utt_id: utt_id.to_string(),
            rank,
            tree: a.tree.to_spec(),
            triples: a.triples.clone(),
            flags: a.structural.clone(),
        }
    }

    pub fn to_line(&self) -> String {
        let triples: Vec<String> = self.triples.iter().map(|t| t.to_string()).collect();
        let flags: Vec<String> = self.flags.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.utt_id,
            self.rank,
            self.tree,
            triples.join(" "),
            flags.join(",")
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let bad = |m: String| Error::format("analysis record", line_no, m);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 tab-separated fields, found {}", f.len())));
        }
        let rank = f[1].parse().map_err(|_| bad(format!("bad rank {:?}", f[1])))?;
        let tree = TreeSpec::parse(f[2]).map_err(bad)?;
        let triples = f[3]
            .split_whitespace()
            .map(|t| t.parse::<Triple>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let mut flags = BTreeMap::new();
        for kv in f[4].split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad flag {kv:?}")))?;
            flags.insert(k.to_string(), v.parse().map_err(|_| bad(format!("bad flag value {v:?}")))?);
        }
        Ok(AnalysisRecord {
            utt_id: f[0].to_string(),
            rank,
            tree,
            triples,
            flags,
        })
    }
}
