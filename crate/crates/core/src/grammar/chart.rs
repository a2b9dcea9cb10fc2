//! Bottom-up chart parsing over rules of any arity, unifying daughter
//! constraints incrementally as each daughter is matched.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::feature::Bindings;
use super::{Grammar, ParseTree, Rule};
use crate::lexicon::Lexicon;

type Edge = Arc<ParseTree>;

/// Passive edges indexed by start position and category; each entry keeps
/// its end position.
struct Chart {
    by_start: Vec<HashMap<String, Vec<(usize, Edge)>>>,
}

impl Chart {
    fn new(n: usize) -> Self {
        Chart {
            by_start: (0..=n).map(|_| HashMap::new()).collect(),
        }
    }

    fn starting(&self, pos: usize, cat: &str) -> &[(usize, Edge)] {
        self.by_start[pos].get(cat).map(Vec::as_slice).unwrap_or(&[])
    }

    fn add(&mut self, start: usize, end: usize, edge: Edge) -> bool {
        let list = self.by_start[start].entry(edge.cat().to_string()).or_default();
        if list.iter().any(|(e, t)| *e == end && **t == *edge) {
            return false;
        }
        list.push((end, edge));
        true
    }
}

/// All complete parses of `words` rooted at the grammar's start category,
/// sorted and deduplicated by derivation signature. A word with no lexicon
/// entry yields no parses.
pub fn parse_chart<S: AsRef<str>>(grammar: &Grammar, lexicon: &Lexicon, words: &[S]) -> Vec<ParseTree> {
    let n = words.len();
    if n == 0 {
        return Vec::new();
    }
    let mut chart = Chart::new(n);
    for (i, w) in words.iter().enumerate() {
        let w = w.as_ref();
        let entries = lexicon.entries(w);
        if entries.is_empty() {
            return Vec::new();
        }
        for e in entries {
            chart.add(
                i,
                i + 1,
                Arc::new(ParseTree::Leaf {
                    word: w.to_string(),
                    entry: e.clone(),
                }),
            );
        }
    }

    let (unary, nary): (Vec<&Rule>, Vec<&Rule>) = grammar.rules().iter().partition(|r| r.daughters.len() == 1);
    for len in 1..=n {
        for start in 0..=n - len {
            let end = start + len;
            if len > 1 {
                for rule in &nary {
                    if rule.daughters.len() > len {
                        continue;
                    }
                    let mut found = Vec::new();
                    extend(&chart, rule, 0, start, end, Bindings::new(), &mut Vec::new(), &mut found);
                    for e in found {
                        chart.add(start, end, e);
                    }
                }
            }
            unary_closure(&mut chart, &unary, start, end);
        }
    }

    let mut out: BTreeMap<String, ParseTree> = BTreeMap::new();
    for (e, t) in chart.starting(0, grammar.start()) {
        if *e == n {
            out.entry(t.signature()).or_insert_with(|| (**t).clone());
        }
    }
    out.into_values().collect()
}

/// Apply unary rules over one span until nothing new appears. Signatures
/// grow with each application, so a cyclic unary chain is cut off once
/// its trees exceed the span's plausible depth.
fn unary_closure(chart: &mut Chart, unary: &[&Rule], start: usize, end: usize) {
    let depth_cap = unary.len() + 1;
    let mut frontier: Vec<Edge> = chart.by_start[start]
        .values()
        .flatten()
        .filter(|(e, _)| *e == end)
        .map(|(_, t)| t.clone())
        .collect();
    let mut depth = 0;
    while !frontier.is_empty() && depth < depth_cap {
        let mut next = Vec::new();
        for d in &frontier {
            for rule in unary {
                if rule.daughters[0].cat != d.cat() {
                    continue;
                }
                if let Some(fs) = rule.apply(&[d.fs()]) {
                    let t = Arc::new(ParseTree::Node {
                        rule: rule.id.clone(),
                        cat: rule.mother.cat.clone(),
                        fs,
                        children: vec![d.clone()],
                    });
                    if chart.add(start, end, t.clone()) {
                        next.push(t);
                    }
                }
            }
        }
        frontier = next;
        depth += 1;
    }
}

/// Match daughters `k..` of `rule` from `pos`, finishing exactly at `end`.
#[allow(clippy::too_many_arguments)]
fn extend(
    chart: &Chart,
    rule: &Rule,
    k: usize,
    pos: usize,
    end: usize,
    env: Bindings,
    kids: &mut Vec<Edge>,
    out: &mut Vec<Edge>,
) {
    let spec = &rule.daughters[k];
    let last = k + 1 == rule.daughters.len();
    let remaining = rule.daughters.len() - k - 1;
    for (e, t) in chart.starting(pos, &spec.cat) {
        let e = *e;
        // Each later daughter needs at least one word; a single daughter
        // may not cover the whole span (unary rules are closed separately).
        if (last && e != end) || (!last && e + remaining > end) || (k == 0 && last) {
            continue;
        }
        let mut env2 = env.clone();
        if env2.unify_fs(&spec.fs, t.fs()).is_none() {
            continue;
        }
        kids.push(t.clone());
        if last {
            out.push(Arc::new(ParseTree::Node {
                rule: rule.id.clone(),
                cat: rule.mother.cat.clone(),
                fs: env2.apply(&rule.mother.fs).without_vars(),
                children: kids.clone(),
            }));
        } else {
            extend(chart, rule, k + 1, e, end, env2, kids, out);
        }
        kids.pop();
    }
}
