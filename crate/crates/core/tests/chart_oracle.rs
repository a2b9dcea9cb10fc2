//! The chart parser against exhaustive top-down enumeration of derivations.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nbest_core::grammar::{parse_chart, Grammar, ParseTree};
use nbest_core::lexicon::Lexicon;
use nbest_core::specialize::load_treebank;

const MAX_TOKENS: usize = 7;

struct Enumerator<'a> {
    grammar: &'a Grammar,
    lexicon: &'a Lexicon,
    words: &'a [String],
    memo: HashMap<(String, usize, usize), Vec<Arc<ParseTree>>>,
    active: BTreeSet<(String, usize, usize)>,
}

impl Enumerator<'_> {
    fn trees(&mut self, cat: &str, i: usize, j: usize) -> Vec<Arc<ParseTree>> {
        let key = (cat.to_string(), i, j);
        if let Some(t) = self.memo.get(&key) {
            return t.clone();
        }
        if !self.active.insert(key.clone()) {
            return Vec::new();
        }
        let mut out: Vec<Arc<ParseTree>> = Vec::new();
        if j == i + 1 {
            for e in self.lexicon.entries(&self.words[i]) {
                if e.major_cat.as_str() == cat {
                    out.push(Arc::new(ParseTree::Leaf {
                        word: self.words[i].clone(),
                        entry: e.clone(),
                    }));
                }
            }
        }
        let rules: Vec<_> = self.grammar.rules_for(cat).cloned().collect();
        for rule in rules {
            let k = rule.daughters.len();
            for bounds in splits(i, j, k) {
                let mut combos: Vec<Vec<Arc<ParseTree>>> = vec![Vec::new()];
                for (d, w) in rule.daughters.iter().zip(bounds.windows(2)) {
                    let options = self.trees(&d.cat, w[0], w[1]);
                    combos = combos
                        .into_iter()
                        .flat_map(|c| {
                            options.iter().map(move |o| {
                                let mut c = c.clone();
                                c.push(o.clone());
                                c
                            })
                        })
                        .collect();
                }
                for children in combos {
                    let fss: Vec<_> = children.iter().map(|c| c.fs()).collect();
                    if let Some(fs) = rule.apply(&fss) {
                        out.push(Arc::new(ParseTree::Node {
                            rule: rule.id.clone(),
                            cat: rule.mother.cat.clone(),
                            fs,
                            children,
                        }));
                    }
                }
            }
        }
        self.active.remove(&key);
        self.memo.insert(key, out.clone());
        out
    }
}

/// Every way of cutting `[i, j)` into `k` non-empty consecutive spans, as
/// `k + 1` boundaries.
fn splits(i: usize, j: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return if i == j { vec![vec![i]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for m in i + 1..=j {
        for mut rest in splits(m, j, k - 1) {
            rest.insert(0, i);
            out.push(rest);
        }
    }
    out
}

fn oracle(grammar: &Grammar, lexicon: &Lexicon, words: &[String]) -> BTreeSet<String> {
    let mut e = Enumerator {
        grammar,
        lexicon,
        words,
        memo: HashMap::new(),
        active: BTreeSet::new(),
    };
    e.trees(grammar.start(), 0, words.len()).iter().map(|t| t.signature()).collect()
}

#[test]
fn chart_finds_exactly_the_enumerated_parses() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let lexicon = Lexicon::load(data.join("lexicon.tsv")).unwrap();
    let grammar = Grammar::load(data.join("grammar.txt")).unwrap();
    let mut sentences: Vec<Vec<String>> = load_treebank(data.join("treebank.txt"))
        .unwrap()
        .iter()
        .map(|t| t.words())
        .collect();
    sentences.extend(
        std::fs::read_to_string(data.join("heldout.txt"))
            .unwrap()
            .lines()
            .map(|l| l.split_whitespace().map(String::from).collect()),
    );
    // Shuffled versions are mostly ungrammatical, exercising the empty case.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shuffled: Vec<Vec<String>> = sentences
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    sentences.extend(shuffled);
    let short: Vec<_> = sentences.iter().filter(|s| !s.is_empty() && s.len() <= MAX_TOKENS).collect();
    assert!(short.len() >= 40, "only {} short sentences", short.len());
    let mut parsed = 0;
    for w in short {
        let chart: BTreeSet<String> = parse_chart(&grammar, &lexicon, w).iter().map(|t| t.signature()).collect();
        assert_eq!(chart, oracle(&grammar, &lexicon, w), "{}", w.join(" "));
        parsed += usize::from(!chart.is_empty());
    }
    assert!(parsed >= 20);
}

#[test]
fn splits_are_exhaustive() {
    assert_eq!(splits(0, 3, 2), vec![vec![0, 1, 3], vec![0, 2, 3]]);
    assert_eq!(splits(0, 4, 3).len(), 3);
    assert!(splits(0, 2, 3).is_empty());
}
