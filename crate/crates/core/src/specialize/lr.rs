//! LALR(1) tables over a grammar's context-free backbone. States are built
//! by merging LR(1) item sets with equal cores as they are discovered;
//! conflicting actions are all kept for the generalised parser.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grammar::{is_lexical_category, Grammar};

/// End-of-input terminal.
pub const END: &str = "$";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Shift(usize),
    /// Index into the grammar's rule list.
    Reduce(usize),
    Accept,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LrTable {
    actions: Vec<BTreeMap<String, Vec<Action>>>,
    gotos: Vec<BTreeMap<String, usize>>,
}

/// Production 0 is the augmented start; production `i + 1` is rule `i`.
struct Backbone {
    rhs: Vec<Vec<String>>,
    by_lhs: BTreeMap<String, Vec<usize>>,
    first: BTreeMap<String, BTreeSet<String>>,
}

impl Backbone {
    fn new(grammar: &Grammar) -> Self {
        let mut lhs = vec![String::new()];
        let mut rhs = vec![vec![grammar.start().to_string()]];
        for r in grammar.rules() {
            lhs.push(r.mother.cat.clone());
            rhs.push(r.daughters.iter().map(|d| d.cat.clone()).collect());
        }
        let mut by_lhs: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (p, l) in lhs.iter().enumerate().skip(1) {
            by_lhs.entry(l.clone()).or_default().push(p);
        }
        // No empty productions, so FIRST only looks at leading symbols.
        let mut first: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        loop {
            let mut changed = false;
            for p in 1..lhs.len() {
                let x = &rhs[p][0];
                let add: BTreeSet<String> = if is_lexical_category(x) {
                    [x.clone()].into()
                } else {
                    first.get(x).cloned().unwrap_or_default()
                };
                let set = first.entry(lhs[p].clone()).or_default();
                let before = set.len();
                set.extend(add);
                changed |= set.len() != before;
            }
            if !changed {
                break;
            }
        }
        Backbone { rhs, by_lhs, first }
    }

    fn first_of(&self, sym: &str) -> BTreeSet<String> {
        if is_lexical_category(sym) {
            [sym.to_string()].into()
        } else {
            self.first.get(sym).cloned().unwrap_or_default()
        }
    }

    /// LR(1) closure of a kernel, items keyed by (production, dot).
    fn closure(&self, kernel: &BTreeMap<(usize, usize), BTreeSet<String>>) -> BTreeMap<(usize, usize), BTreeSet<String>> {
        let mut items = kernel.clone();
        let mut queue: VecDeque<(usize, usize)> = items.keys().copied().collect();
        while let Some((p, d)) = queue.pop_front() {
            let Some(b) = self.rhs[p].get(d) else { continue };
            if is_lexical_category(b) {
                continue;
            }
            let la: BTreeSet<String> = match self.rhs[p].get(d + 1) {
                Some(next) => self.first_of(next),
                None => items[&(p, d)].clone(),
            };
            for &q in self.by_lhs.get(b).into_iter().flatten() {
                let set = items.entry((q, 0)).or_default();
                let before = set.len();
                set.extend(la.iter().cloned());
                if set.len() != before {
                    queue.push_back((q, 0));
                }
            }
        }
        items
    }
}

type Kernel = BTreeMap<(usize, usize), BTreeSet<String>>;

/// Build the LALR(1) table for `grammar`'s backbone.
pub fn compile_lr(grammar: &Grammar) -> LrTable {
    let bb = Backbone::new(grammar);
    let mut kernels: Vec<Kernel> = vec![[((0, 0), [END.to_string()].into())].into()];
    let mut by_core: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
    by_core.insert(vec![(0, 0)], 0);
    let mut transitions: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new()];
    let mut queue: VecDeque<usize> = [0].into();
    let mut queued: BTreeSet<usize> = [0].into();

    while let Some(s) = queue.pop_front() {
        queued.remove(&s);
        let items = bb.closure(&kernels[s]);
        let mut next: BTreeMap<String, Kernel> = BTreeMap::new();
        for (&(p, d), la) in &items {
            if let Some(x) = bb.rhs[p].get(d) {
                next.entry(x.clone())
                    .or_default()
                    .entry((p, d + 1))
                    .or_default()
                    .extend(la.iter().cloned());
            }
        }
        for (sym, kernel) in next {
            let core: Vec<(usize, usize)> = kernel.keys().copied().collect();
            let target = match by_core.get(&core) {
                Some(&t) => {
                    let mut changed = false;
                    for (item, la) in kernel {
                        let set = kernels[t].entry(item).or_default();
                        let before = set.len();
                        set.extend(la);
                        changed |= set.len() != before;
                    }
                    if changed && queued.insert(t) {
                        queue.push_back(t);
                    }
                    t
                }
                None => {
                    let t = kernels.len();
                    kernels.push(kernel);
                    transitions.push(BTreeMap::new());
                    by_core.insert(core, t);
                    queued.insert(t);
                    queue.push_back(t);
                    t
                }
            };
            transitions[s].insert(sym, target);
        }
    }

    let mut actions = vec![BTreeMap::<String, Vec<Action>>::new(); kernels.len()];
    let mut gotos = vec![BTreeMap::new(); kernels.len()];
    for s in 0..kernels.len() {
        for (sym, &t) in &transitions[s] {
            if is_lexical_category(sym) {
                actions[s].entry(sym.clone()).or_default().push(Action::Shift(t));
            } else {
                gotos[s].insert(sym.clone(), t);
            }
        }
        for (&(p, d), la) in &bb.closure(&kernels[s]) {
            if d < bb.rhs[p].len() {
                continue;
            }
            for a in la {
                let act = if p == 0 { Action::Accept } else { Action::Reduce(p - 1) };
                actions[s].entry(a.clone()).or_default().push(act);
            }
        }
        for acts in actions[s].values_mut() {
            acts.sort();
            acts.dedup();
        }
    }
    LrTable { actions, gotos }
}

impl LrTable {
    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self, state: usize, terminal: &str) -> &[Action] {
        self.actions[state].get(terminal).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn goto(&self, state: usize, nonterminal: &str) -> Option<usize> {
        self.gotos[state].get(nonterminal).copied()
    }

    /// `(state, terminal)` cells holding more than one action.
    pub fn conflicts(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for (s, row) in self.actions.iter().enumerate() {
            for (t, acts) in row {
                if acts.len() > 1 {
                    out.push((s, t.clone()));
                }
            }
        }
        out
    }

    /// Whether the backbone accepts a sequence of terminal categories,
    /// exploring every conflicting action.
    pub fn accepts<S: AsRef<str>>(&self, grammar: &Grammar, cats: &[S]) -> bool {
        let mut stacks: Vec<Vec<usize>> = vec![vec![0]];
        for i in 0..=cats.len() {
            let a = cats.get(i).map(|c| c.as_ref()).unwrap_or(END);
            let mut shifted = Vec::new();
            let mut work = stacks;
            let mut steps = 0;
            while let Some(st) = work.pop() {
                steps += 1;
                if steps > 100_000 {
                    return false;
                }
                let top = *st.last().expect("non-empty stack");
                for act in self.actions(top, a) {
                    match *act {
                        Action::Accept => return true,
                        Action::Shift(t) => {
                            let mut n = st.clone();
                            n.push(t);
                            shifted.push(n);
                        }
                        Action::Reduce(r) => {
                            let rule = &grammar.rules()[r];
                            let mut n = st.clone();
                            n.truncate(n.len() - rule.daughters.len());
                            let from = *n.last().expect("non-empty stack");
                            if let Some(g) = self.goto(from, &rule.mother.cat) {
                                n.push(g);
                                work.push(n);
                            }
                        }
                    }
                }
            }
            stacks = shifted;
            if stacks.is_empty() {
                return false;
            }
        }
        false
    }

    /// Text form: `action <state> <terminal> <act>...` and
    /// `goto <state> <nonterminal> <state>` lines, where an act is `s<n>`,
    /// `r:<rule id>` or `acc`.
    pub fn to_text(&self, grammar: &Grammar) -> String {
        let mut out = format!("lr-table states={}\n", self.num_states());
        for (s, row) in self.actions.iter().enumerate() {
            for (t, acts) in row {
                let _ = write!(out, "action {s} {t}");
                for a in acts {
                    match a {
                        Action::Shift(n) => {
                            let _ = write!(out, " s{n}");
                        }
                        Action::Reduce(r) => {
                            let _ = write!(out, " r:{}", grammar.rules()[*r].id);
                        }
                        Action::Accept => out.push_str(" acc"),
                    }
                }
                out.push('\n');
            }
            for (nt, g) in &self.gotos[s] {
                let _ = writeln!(out, "goto {s} {nt} {g}");
            }
        }
        out
    }

    pub fn from_text(text: &str, grammar: &Grammar) -> Result<LrTable> {
        let bad = |line: usize, m: &str| Error::format("lr table", line, m);
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let n: usize = header
            .strip_prefix("lr-table states=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(1, "expected 'lr-table states=N'"))?;
        let mut table = LrTable {
            actions: vec![BTreeMap::new(); n],
            gotos: vec![BTreeMap::new(); n],
        };
        for (i, line) in lines {
            let ln = i + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() < 4 {
                return Err(bad(ln, "too few fields"));
            }
            let s: usize = f[1].parse().map_err(|_| bad(ln, "bad state"))?;
            if s >= n {
                return Err(bad(ln, "state out of range"));
            }
            match f[0] {
                "action" => {
                    let mut acts = Vec::new();
                    for a in &f[3..] {
                        let act = if *a == "acc" {
                            Action::Accept
                        } else if let Some(id) = a.strip_prefix("r:") {
                            Action::Reduce(grammar.rule_index(id).ok_or_else(|| bad(ln, "unknown rule"))?)
                        } else if let Some(t) = a.strip_prefix('s') {
                            let t: usize = t.parse().map_err(|_| bad(ln, "bad shift target"))?;
                            if t >= n {
                                return Err(bad(ln, "shift target out of range"));
                            }
                            Action::Shift(t)
                        } else {
                            return Err(bad(ln, "unknown action"));
                        };
                        acts.push(act);
                    }
                    table.actions[s].insert(f[2].to_string(), acts);
                }
                "goto" => {
                    let t: usize = f[3].parse().map_err(|_| bad(ln, "bad goto target"))?;
                    if t >= n {
                        return Err(bad(ln, "goto target out of range"));
                    }
                    table.gotos[s].insert(f[2].to_string(), t);
                }
                _ => return Err(bad(ln, "expected 'action' or 'goto'")),
            }
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backbone(rules: &str) -> Grammar {
        Grammar::parse(&format!("@start s\n@chunk s\n{rules}")).unwrap()
    }

    #[test]
    fn accepts_backbone_language() {
        let g = backbone("r1: s -> np verb np\nr2: np -> det noun\nr3: np -> propername\n");
        let t = compile_lr(&g);
        assert!(t.accepts(&g, &["det", "noun", "verb", "propername"]));
        assert!(t.accepts(&g, &["propername", "verb", "det", "noun"]));
        assert!(!t.accepts(&g, &["verb", "det"]));
        assert!(!t.accepts::<&str>(&g, &[]));
        assert!(t.conflicts().is_empty());
    }

    #[test]
    fn attachment_ambiguity_is_a_conflict() {
        let g = backbone(
            "r1: s -> verb np\nr2: s -> verb np pp\nr3: np -> noun\nr4: np -> noun pp\nr5: pp -> prep np\n",
        );
        let t = compile_lr(&g);
        assert!(!t.conflicts().is_empty());
        assert!(t.accepts(&g, &["verb", "noun", "prep", "noun"]));
    }

    #[test]
    fn text_round_trip() {
        let g = backbone("r1: s -> np verb np\nr2: np -> det noun\nr3: np -> propername\n");
        let t = compile_lr(&g);
        let text = t.to_text(&g);
        assert_eq!(LrTable::from_text(&text, &g).unwrap(), t);
        assert!(LrTable::from_text("lr-table states=1\naction 0 det s9\n", &g).is_err());
    }
}
