//! Grammar specialisation by explanation-based learning: training trees are
//! cut into chunks, each chunk's rules are composed into a single flat rule,
//! and the resulting grammar is compiled into an LR table for fast parsing.
//!
//! Noun phrases with no NP or PP below them get their own backbone
//! category, [`NPNR`], so the specialised grammar distinguishes the
//! non-recursive chunk type.

pub mod glr;
pub mod lr;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use crate::error::{read_file, Error, Result};
use crate::grammar::feature::{canonicalize_vars, Bindings};
use crate::grammar::{is_lexical_category, Constituent, EblInfo, Grammar, ParseTree, Rule, TreeSpec};
use crate::lexicon::Lexicon;

pub use glr::parse_lr;
pub use lr::{compile_lr, Action, LrTable};

/// Backbone category of non-recursive noun-phrase chunks.
pub const NPNR: &str = "npnr";
const NP: &str = "np";
const PP: &str = "pp";

/// One item on a chunk frontier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frontier {
    Word { cat: String, word: String },
    /// A nested chunk, by index into the list returned by [`cut_tree`].
    Stub { cat: String, chunk: usize },
}

#[derive(Debug, Clone)]
pub struct Chunk {
    /// Backbone category: the root's category, or [`NPNR`].
    pub cat: String,
    pub root: Arc<ParseTree>,
    pub frontier: Vec<Frontier>,
}

/// Backbone category a chunk-rooted node is given in the specialised
/// grammar.
pub fn chunk_category(node: &ParseTree) -> String {
    if node.cat() == NP {
        let mut recursive = false;
        for c in node.children() {
            c.visit(&mut |t| recursive |= !t.is_leaf() && (t.cat() == NP || t.cat() == PP));
        }
        if !recursive {
            return NPNR.to_string();
        }
    }
    node.cat().to_string()
}

/// Cut a tree into chunks, root chunk first, nested chunks in preorder.
pub fn cut_tree(tree: &Arc<ParseTree>, chunk_roots: &BTreeSet<String>) -> Result<Vec<Chunk>> {
    if tree.is_leaf() || !chunk_roots.contains(tree.cat()) {
        return Err(Error::Validation(format!(
            "tree root '{}' is not a chunk category",
            tree.cat()
        )));
    }
    let mut chunks = Vec::new();
    cut_into(tree, chunk_roots, &mut chunks);
    Ok(chunks)
}

fn cut_into(root: &Arc<ParseTree>, chunk_roots: &BTreeSet<String>, chunks: &mut Vec<Chunk>) -> usize {
    let slot = chunks.len();
    chunks.push(Chunk {
        cat: chunk_category(root),
        root: root.clone(),
        frontier: Vec::new(),
    });
    let mut frontier = Vec::new();
    for c in root.children() {
        walk_frontier(c, chunk_roots, chunks, &mut frontier);
    }
    chunks[slot].frontier = frontier;
    slot
}

fn walk_frontier(
    node: &Arc<ParseTree>,
    chunk_roots: &BTreeSet<String>,
    chunks: &mut Vec<Chunk>,
    frontier: &mut Vec<Frontier>,
) {
    match &**node {
        ParseTree::Leaf { word, .. } => frontier.push(Frontier::Word {
            cat: node.cat().to_string(),
            word: word.clone(),
        }),
        ParseTree::Node { cat, children, .. } => {
            if chunk_roots.contains(cat) {
                let idx = cut_into(node, chunk_roots, chunks);
                frontier.push(Frontier::Stub {
                    cat: chunks[idx].cat.clone(),
                    chunk: idx,
                });
            } else {
                for c in children {
                    walk_frontier(c, chunk_roots, chunks, frontier);
                }
            }
        }
    }
}

/// Rebuild the bracketed tree from chunks (inverse of [`cut_tree`]),
/// reading words and nested chunks off each frontier.
pub fn glue(chunks: &[Chunk], chunk_roots: &BTreeSet<String>) -> TreeSpec {
    fn go(chunks: &[Chunk], roots: &BTreeSet<String>, idx: usize, node: &ParseTree, pos: &mut usize) -> TreeSpec {
        let ParseTree::Node { rule, children, .. } = node else {
            unreachable!("chunk roots are internal nodes")
        };
        let mut out = Vec::new();
        for c in children {
            let at_frontier = c.is_leaf() || roots.contains(c.cat());
            if !at_frontier {
                out.push(go(chunks, roots, idx, c, pos));
                continue;
            }
            let item = &chunks[idx].frontier[*pos];
            *pos += 1;
            out.push(match item {
                Frontier::Word { cat, word } => TreeSpec::Leaf {
                    cat: cat.clone(),
                    word: word.clone(),
                },
                Frontier::Stub { chunk, .. } => {
                    let mut inner = 0;
                    go(chunks, roots, *chunk, &chunks[*chunk].root, &mut inner)
                }
            });
        }
        TreeSpec::Node {
            rule: rule.clone(),
            children: out,
        }
    }
    let mut pos = 0;
    go(chunks, chunk_roots, 0, &chunks[0].root, &mut pos)
}

/// A collapsed chunk: the flat rule pattern plus the general-rule ids it
/// was composed from, in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecializedRule {
    pub mother: Constituent,
    pub daughters: Vec<Constituent>,
    pub provenance: Vec<String>,
}

impl SpecializedRule {
    /// Identity of the pattern: mother and daughters, variables numbered
    /// canonically.
    pub fn key(&self) -> String {
        let mut s = self.mother.to_string();
        s.push_str(" ->");
        for d in &self.daughters {
            s.push(' ');
            s.push_str(&d.to_string());
        }
        s
    }
}

/// Compose the general rules inside a chunk into one rule by unifying each
/// internal node's rule mother with the daughter slot it fills.
pub fn collapse_chunk(chunk: &Chunk, grammar: &Grammar) -> Result<SpecializedRule> {
    let mut env = Bindings::new();
    let mut counter = 0;
    let mut provenance = Vec::new();
    let mut frontier = Vec::new();
    let root_rule = instance(&chunk.root, grammar, &mut counter)?;
    provenance.push(root_rule.id.clone());
    compose(
        &chunk.root,
        &root_rule,
        grammar,
        &mut env,
        &mut counter,
        &mut provenance,
        &mut frontier,
    )?;
    let mother = env.apply(&root_rule.mother.fs);
    let daughters: Vec<_> = frontier.iter().map(|c: &Constituent| env.apply(&c.fs)).collect();
    let mut all = vec![&mother];
    all.extend(daughters.iter());
    let mut canon = canonicalize_vars(&all).into_iter();
    let mother = Constituent::new(chunk.cat.clone(), canon.next().expect("mother"));
    let daughters = frontier
        .iter()
        .zip(canon)
        .map(|(c, fs)| Constituent::new(c.cat.clone(), fs))
        .collect();
    Ok(SpecializedRule {
        mother,
        daughters,
        provenance,
    })
}

/// The node's rule with variables renamed apart.
fn instance(node: &ParseTree, grammar: &Grammar, counter: &mut usize) -> Result<Rule> {
    let id = node.rule().expect("internal node");
    let rule = grammar
        .rule(id)
        .ok_or_else(|| Error::Validation(format!("tree uses unknown rule '{id}'")))?;
    *counter += 1;
    let k = *counter;
    let mut rename = |v: &str| format!("{v}_{k}");
    let mut r = rule.clone();
    r.mother.fs = r.mother.fs.rename_vars(&mut rename);
    for d in &mut r.daughters {
        d.fs = d.fs.rename_vars(&mut rename);
    }
    Ok(r)
}

fn compose(
    node: &Arc<ParseTree>,
    rule: &Rule,
    grammar: &Grammar,
    env: &mut Bindings,
    counter: &mut usize,
    provenance: &mut Vec<String>,
    frontier: &mut Vec<Constituent>,
) -> Result<()> {
    for (child, slot) in node.children().iter().zip(&rule.daughters) {
        if child.is_leaf() {
            frontier.push(Constituent::new(child.cat(), slot.fs.clone()));
        } else if grammar.chunk_roots().contains(child.cat()) {
            frontier.push(Constituent::new(chunk_category(child), slot.fs.clone()));
        } else {
            let inner = instance(child, grammar, counter)?;
            provenance.push(inner.id.clone());
            if env.unify_fs(&slot.fs, &inner.mother.fs).is_none() {
                return Err(Error::Invariant(format!(
                    "rule '{}' does not compose into '{}'",
                    inner.id, rule.id
                )));
            }
            compose(child, &inner, grammar, env, counter, provenance, frontier)?;
        }
    }
    Ok(())
}

/// Read a treebank: one bracketed tree per line; `#` comments and blank
/// lines are skipped.
pub fn parse_treebank(text: &str) -> Result<Vec<TreeSpec>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(TreeSpec::parse(line).map_err(|m| Error::format("treebank", i + 1, m))?);
    }
    Ok(out)
}

pub fn load_treebank(path: impl AsRef<Path>) -> Result<Vec<TreeSpec>> {
    parse_treebank(&read_file(path.as_ref())?)
}

pub fn treebank_to_string(trees: &[TreeSpec]) -> String {
    trees.iter().map(|t| format!("{t}\n")).collect()
}

/// Instantiate every tree under the general grammar, reporting the first
/// invalid one by 0-based index.
pub fn instantiate_treebank(trees: &[TreeSpec], grammar: &Grammar, lexicon: &Lexicon) -> Result<Vec<ParseTree>> {
    trees
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let tree = t
                .instantiate(grammar, lexicon)
                .map_err(|message| Error::InvalidTree { index, message })?;
            if tree.cat() != grammar.start() {
                return Err(Error::InvalidTree {
                    index,
                    message: format!("root category '{}' is not the start category", tree.cat()),
                });
            }
            Ok(tree)
        })
        .collect()
}

/// Build the specialised grammar from instantiated training trees. Rules
/// seen fewer than `min_count` times are dropped, together with any rule
/// left referring to a category that no longer has rules.
pub fn specialize_grammar(trees: &[ParseTree], grammar: &Grammar, min_count: usize) -> Result<Grammar> {
    if trees.is_empty() {
        return Err(Error::Validation("treebank is empty".into()));
    }
    struct Pattern {
        mother: Constituent,
        daughters: Vec<Constituent>,
        derivations: BTreeMap<Vec<String>, usize>,
    }
    let mut patterns: BTreeMap<String, Pattern> = BTreeMap::new();
    for (index, tree) in trees.iter().enumerate() {
        let tree = Arc::new(tree.clone());
        let chunks = cut_tree(&tree, grammar.chunk_roots()).map_err(|e| Error::InvalidTree {
            index,
            message: e.to_string(),
        })?;
        for chunk in &chunks {
            let sr = collapse_chunk(chunk, grammar)?;
            let p = patterns.entry(sr.key()).or_insert_with(|| Pattern {
                mother: sr.mother.clone(),
                daughters: sr.daughters.clone(),
                derivations: BTreeMap::new(),
            });
            *p.derivations.entry(sr.provenance).or_default() += 1;
        }
    }

    let mut kept: Vec<(String, Pattern)> = patterns
        .into_iter()
        .filter(|(_, p)| p.derivations.values().sum::<usize>() >= min_count.max(1))
        .collect();
    // Drop rules whose daughters can no longer be built.
    loop {
        let defined: BTreeSet<String> = kept.iter().map(|(_, p)| p.mother.cat.clone()).collect();
        let before = kept.len();
        kept.retain(|(_, p)| {
            p.daughters
                .iter()
                .all(|d| is_lexical_category(&d.cat) || defined.contains(&d.cat))
        });
        if kept.len() == before {
            break;
        }
    }
    if !kept.iter().any(|(_, p)| p.mother.cat == grammar.start()) {
        return Err(Error::Validation(format!(
            "no specialised rule for start category '{}' survives the frequency threshold",
            grammar.start()
        )));
    }

    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut rules = Vec::new();
    for (_, p) in kept {
        let n = counters.entry(p.mother.cat.clone()).or_default();
        *n += 1;
        let count = p.derivations.values().sum();
        // Most frequent derivation first, ties by id sequence.
        let mut derivs: Vec<(Vec<String>, usize)> = p.derivations.into_iter().collect();
        derivs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut derivs = derivs.into_iter().map(|(d, _)| d);
        let provenance = derivs.next().expect("at least one derivation");
        rules.push(Rule {
            id: format!("{}_{}", p.mother.cat, n),
            mother: p.mother,
            daughters: p.daughters,
            head: 0,
            args: BTreeMap::new(),
            rel: None,
            ebl: Some(EblInfo {
                provenance,
                alternatives: derivs.collect(),
                count,
            }),
        });
    }
    let chunk_roots: BTreeSet<String> = rules.iter().map(|r| r.mother.cat.clone()).collect();
    Grammar::new(rules, chunk_roots, grammar.start())
}

/// Limit on the expansions returned for one specialised tree.
const MAX_EXPANSIONS: usize = 64;

/// General-grammar derivations a specialised tree stands for: the canonical
/// provenance of every node first, then combinations with alternative
/// derivations.
pub fn expansions(tree: &ParseTree, specialized: &Grammar, general: &Grammar) -> Vec<TreeSpec> {
    match tree {
        ParseTree::Leaf { word, entry } => vec![TreeSpec::Leaf {
            cat: entry.major_cat.as_str().to_string(),
            word: word.clone(),
        }],
        ParseTree::Node { rule, children, .. } => {
            let Some(r) = specialized.rule(rule) else {
                return Vec::new();
            };
            let Some(ebl) = &r.ebl else { return Vec::new() };
            // Expansions of each frontier child, combined left to right.
            let mut combos: Vec<Vec<TreeSpec>> = vec![Vec::new()];
            for c in children {
                let opts = expansions(c, specialized, general);
                let mut next = Vec::new();
                for prefix in &combos {
                    for o in &opts {
                        if next.len() >= MAX_EXPANSIONS {
                            break;
                        }
                        let mut p = prefix.clone();
                        p.push(o.clone());
                        next.push(p);
                    }
                }
                combos = next;
            }
            let mut out = Vec::new();
            for prov in std::iter::once(&ebl.provenance).chain(&ebl.alternatives) {
                for frontier in &combos {
                    if out.len() >= MAX_EXPANSIONS {
                        return out;
                    }
                    if let Some(t) = rebuild(prov, frontier, general) {
                        out.push(t);
                    }
                }
            }
            out
        }
    }
}

/// Lay a preorder rule sequence over frontier subtrees.
fn rebuild(provenance: &[String], frontier: &[TreeSpec], general: &Grammar) -> Option<TreeSpec> {
    fn go(
        prov: &[String],
        pi: &mut usize,
        frontier: &[TreeSpec],
        fi: &mut usize,
        general: &Grammar,
    ) -> Option<TreeSpec> {
        let id = prov.get(*pi)?;
        *pi += 1;
        let rule = general.rule(id)?;
        let mut children = Vec::with_capacity(rule.daughters.len());
        for d in &rule.daughters {
            if is_lexical_category(&d.cat) || general.chunk_roots().contains(&d.cat) {
                children.push(frontier.get(*fi)?.clone());
                *fi += 1;
            } else {
                children.push(go(prov, pi, frontier, fi, general)?);
            }
        }
        Some(TreeSpec::Node {
            rule: id.clone(),
            children,
        })
    }
    let (mut pi, mut fi) = (0, 0);
    let t = go(provenance, &mut pi, frontier, &mut fi, general)?;
    (pi == provenance.len() && fi == frontier.len()).then_some(t)
}

/// The general-grammar tree for a specialised parse: the first expansion
/// that instantiates.
pub fn to_general(tree: &ParseTree, specialized: &Grammar, general: &Grammar, lexicon: &Lexicon) -> Option<ParseTree> {
    expansions(tree, specialized, general)
        .into_iter()
        .find_map(|s| s.instantiate(general, lexicon).ok())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grammar::tests::toy;
    use crate::lexicon::tests::domain;

    pub(crate) fn tree(s: &str) -> Arc<ParseTree> {
        Arc::new(TreeSpec::parse(s).unwrap().instantiate(&toy(), &domain()).unwrap())
    }

    const SHOW_FLIGHTS_TO_BOSTON: &str =
        "(utt_imp (vp_tv verb:show (np_det det:the (nbar_pp (nbar_n noun:flights) (pp_np prep:to (np_name propername:boston))))))";

    #[test]
    fn cutting_and_gluing() {
        let g = toy();
        let t = tree(SHOW_FLIGHTS_TO_BOSTON);
        let chunks = cut_tree(&t, g.chunk_roots()).unwrap();
        let cats: Vec<&str> = chunks.iter().map(|c| c.cat.as_str()).collect();
        assert_eq!(cats, vec!["utt", "np", "pp", "npnr"]);
        assert_eq!(
            chunks[0].frontier,
            vec![
                Frontier::Word {
                    cat: "verb".into(),
                    word: "show".into()
                },
                Frontier::Stub {
                    cat: "np".into(),
                    chunk: 1
                }
            ]
        );
        assert_eq!(glue(&chunks, g.chunk_roots()).to_string(), SHOW_FLIGHTS_TO_BOSTON);

        let single = tree("(utt_frag (np_name propername:boston))");
        let np = Arc::new(single.children()[0].as_ref().clone());
        let chunks = cut_tree(&np, g.chunk_roots()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].cat, NPNR);

        let vp = tree("(utt_imp (vp_intr verb:leave))");
        let inner = vp.children()[0].clone();
        assert!(cut_tree(&inner, g.chunk_roots()).is_err());
    }

    #[test]
    fn collapsing_threads_features() {
        let g = toy();
        let t = tree("(utt_decl (s_decl (np_pron noun:i) (vp_tv verb:need (np_bare (nbar_n noun:flights)))))");
        let chunks = cut_tree(&t, g.chunk_roots()).unwrap();
        let r = collapse_chunk(&chunks[0], &g).unwrap();
        assert_eq!(r.provenance, vec!["utt_decl", "s_decl", "vp_tv"]);
        assert_eq!(
            r.key(),
            "utt -> npnr[agr=V1,case=nom] verb[agr=V1,sub=tv,vform=fin] npnr[case=acc,wh=no]"
        );
        // A one-rule chunk collapses to the rule itself.
        let np = collapse_chunk(&chunks[1], &g).unwrap();
        assert_eq!(np.key(), "npnr[agr=V1,case=V2,num=V3,pron=yes,wh=no] -> noun[agr=V1,case=V2,num=V3,pron=yes]");
        assert_eq!(np.provenance, vec!["np_pron"]);
    }

    #[test]
    fn specialising_counts_and_dedups() {
        let g = toy();
        let t = tree(SHOW_FLIGHTS_TO_BOSTON);
        let once = specialize_grammar(&[(*t).clone()], &g, 1).unwrap();
        assert_eq!(once.rules().len(), 4);
        let twice = specialize_grammar(&[(*t).clone(), (*t).clone()], &g, 1).unwrap();
        assert_eq!(twice.rules().len(), 4);
        for (a, b) in once.rules().iter().zip(twice.rules()) {
            assert_eq!(a.mother, b.mother);
            assert_eq!(a.ebl.as_ref().unwrap().count * 2, b.ebl.as_ref().unwrap().count);
        }
        assert!(specialize_grammar(&[], &g, 1).is_err());
        // The file form round-trips.
        let again = Grammar::parse(&once.to_file_string()).unwrap();
        assert_eq!(again.to_file_string(), once.to_file_string());
    }

    #[test]
    fn expansion_recovers_training_tree() {
        let g = toy();
        let lex = domain();
        let t = tree(SHOW_FLIGHTS_TO_BOSTON);
        let sg = specialize_grammar(&[(*t).clone()], &g, 1).unwrap();
        let words = t.words();
        let parses = parse_lr(&compile_lr(&sg), &sg, &lex, &words);
        assert_eq!(parses.len(), 1);
        let general = to_general(&parses[0], &sg, &g, &lex).unwrap();
        assert_eq!(general.signature(), SHOW_FLIGHTS_TO_BOSTON);
    }

    #[test]
    fn treebank_reports_bad_tree_index() {
        let g = toy();
        let lex = domain();
        let tb = parse_treebank("# comment\n(utt_frag (np_name propername:boston))\n\n(utt_frag (np_name noun:boston))\n").unwrap();
        assert_eq!(tb.len(), 2);
        match instantiate_treebank(&tb, &g, &lex) {
            Err(Error::InvalidTree { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected invalid tree, got {other:?}"),
        }
        assert!(matches!(parse_treebank("(utt_frag"), Err(Error::Format { line: 1, .. })));
    }
}
