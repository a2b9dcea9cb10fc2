//! Generalised LR parsing: every conflicting action is followed on its own
//! stack, and feature constraints are unified when a rule is reduced.

use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::Arc;

use super::lr::{Action, LrTable, END};
use crate::grammar::{Grammar, ParseTree};
use crate::lexicon::Lexicon;

/// Persistent stack: nodes are shared between the parallel stacks that
/// split off them.
struct Node {
    state: usize,
    value: Option<Arc<ParseTree>>,
    below: Option<Rc<Node>>,
}

/// Upper bound on stack operations per sentence; a guard against grammars
/// with unary cycles.
const STEP_LIMIT: usize = 1_000_000;

/// All parses of `words` under the specialised grammar, sorted and
/// deduplicated by signature. Returns nothing for empty input or a word
/// without lexicon entries.
pub fn parse_lr<S: AsRef<str>>(table: &LrTable, grammar: &Grammar, lexicon: &Lexicon, words: &[S]) -> Vec<ParseTree> {
    if words.is_empty() {
        return Vec::new();
    }
    let mut stacks: Vec<Rc<Node>> = vec![Rc::new(Node {
        state: 0,
        value: None,
        below: None,
    })];
    let mut steps = 0usize;
    for w in words {
        let w = w.as_ref();
        let entries = lexicon.entries(w);
        if entries.is_empty() {
            return Vec::new();
        }
        // Readings grouped by terminal category.
        let mut readings: BTreeMap<&str, Vec<Arc<ParseTree>>> = BTreeMap::new();
        for e in entries {
            readings.entry(e.major_cat.as_str()).or_default().push(Arc::new(ParseTree::Leaf {
                word: w.to_string(),
                entry: e.clone(),
            }));
        }
        let mut next = Vec::new();
        for (cat, leaves) in &readings {
            for (st, target) in reduce_all(table, grammar, &stacks, cat, &mut steps).shifts {
                for leaf in leaves {
                    next.push(Rc::new(Node {
                        state: target,
                        value: Some(leaf.clone()),
                        below: Some(st.clone()),
                    }));
                }
            }
        }
        if next.is_empty() || steps > STEP_LIMIT {
            return Vec::new();
        }
        stacks = next;
    }
    let done = reduce_all(table, grammar, &stacks, END, &mut steps);
    let mut out: BTreeMap<String, ParseTree> = BTreeMap::new();
    for t in done.accepted {
        out.entry(t.signature()).or_insert_with(|| (*t).clone());
    }
    out.into_values().collect()
}

struct Reduced {
    shifts: Vec<(Rc<Node>, usize)>,
    accepted: Vec<Arc<ParseTree>>,
}

/// Perform every reduction available under lookahead `a`, collecting the
/// stacks that can then shift `a` (or accept at end of input).
fn reduce_all(table: &LrTable, grammar: &Grammar, stacks: &[Rc<Node>], a: &str, steps: &mut usize) -> Reduced {
    let mut work: Vec<Rc<Node>> = stacks.to_vec();
    let mut out = Reduced {
        shifts: Vec::new(),
        accepted: Vec::new(),
    };
    while let Some(st) = work.pop() {
        *steps += 1;
        if *steps > STEP_LIMIT {
            break;
        }
        for act in table.actions(st.state, a) {
            match *act {
                Action::Shift(t) => out.shifts.push((st.clone(), t)),
                Action::Accept => {
                    if let Some(v) = &st.value {
                        out.accepted.push(v.clone());
                    }
                }
                Action::Reduce(r) => {
                    let rule = &grammar.rules()[r];
                    let n = rule.daughters.len();
                    let mut kids = Vec::with_capacity(n);
                    let mut cur = st.clone();
                    for _ in 0..n {
                        kids.push(cur.value.clone().expect("reduced symbol has a value"));
                        cur = cur.below.clone().expect("stack deep enough for reduction");
                    }
                    kids.reverse();
                    let fss: Vec<_> = kids.iter().map(|k| k.fs()).collect();
                    let Some(fs) = rule.apply(&fss) else { continue };
                    let Some(g) = table.goto(cur.state, &rule.mother.cat) else { continue };
                    work.push(Rc::new(Node {
                        state: g,
                        value: Some(Arc::new(ParseTree::Node {
                            rule: rule.id.clone(),
                            cat: rule.mother.cat.clone(),
                            fs,
                            children: kids,
                        })),
                        below: Some(cur),
                    }));
                }
            }
        }
    }
    out
}
