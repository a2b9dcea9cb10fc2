use std::fmt;
use std::sync::Arc;

use super::feature::{Bindings, FeatureStructure};
use super::Grammar;
use crate::lexicon::{LexEntry, Lexicon};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseTree {
    Leaf {
        word: String,
        entry: LexEntry,
    },
    Node {
        rule: String,
        cat: String,
        fs: FeatureStructure,
        children: Vec<Arc<ParseTree>>,
    },
}

impl ParseTree {
    pub fn cat(&self) -> &str {
        match self {
            ParseTree::Leaf { entry, .. } => entry.major_cat.as_str(),
            ParseTree::Node { cat, .. } => cat,
        }
    }

    pub fn fs(&self) -> &FeatureStructure {
        match self {
            ParseTree::Leaf { entry, .. } => &entry.features,
            ParseTree::Node { fs, .. } => fs,
        }
    }

    pub fn rule(&self) -> Option<&str> {
        match self {
            ParseTree::Leaf { .. } => None,
            ParseTree::Node { rule, .. } => Some(rule),
        }
    }

    pub fn children(&self) -> &[Arc<ParseTree>] {
        match self {
            ParseTree::Leaf { .. } => &[],
            ParseTree::Node { children, .. } => children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, ParseTree::Leaf { .. })
    }

    /// Leaf words, left to right.
    pub fn words(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words(&self, out: &mut Vec<String>) {
        match self {
            ParseTree::Leaf { word, .. } => out.push(word.clone()),
            ParseTree::Node { children, .. } => children.iter().for_each(|c| c.collect_words(out)),
        }
    }

    /// Rule ids in preorder.
    pub fn rule_ids(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if let Some(r) = t.rule() {
                out.push(r.to_string());
            }
        });
        out
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ParseTree)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// The bracketed derivation `(rule (rule cat:word ...) ...)`. Two trees
    /// with the same signature have the same rules over the same leaves.
    pub fn signature(&self) -> String {
        self.to_spec().to_string()
    }

    pub fn to_spec(&self) -> TreeSpec {
        match self {
            ParseTree::Leaf { word, entry } => TreeSpec::Leaf {
                cat: entry.major_cat.as_str().to_string(),
                word: word.clone(),
            },
            ParseTree::Node { rule, children, .. } => TreeSpec::Node {
                rule: rule.clone(),
                children: children.iter().map(|c| c.to_spec()).collect(),
            },
        }
    }

    /// Word spans `(start, end)` of every internal node, preorder.
    pub fn spans(&self) -> Vec<(usize, usize, &ParseTree)> {
        let mut out = Vec::new();
        self.collect_spans(0, &mut out);
        out
    }

    fn collect_spans<'a>(&'a self, start: usize, out: &mut Vec<(usize, usize, &'a ParseTree)>) -> usize {
        match self {
            ParseTree::Leaf { .. } => start + 1,
            ParseTree::Node { children, .. } => {
                let slot = out.len();
                out.push((start, start, self));
                let mut pos = start;
                for c in children {
                    pos = c.collect_spans(pos, out);
                }
                out[slot].1 = pos;
                pos
            }
        }
    }

    /// The lexical head leaf, following each rule's head daughter.
    pub fn head_leaf<'a>(&'a self, grammar: &Grammar) -> &'a ParseTree {
        let mut t = self;
        loop {
            match t {
                ParseTree::Leaf { .. } => return t,
                ParseTree::Node { rule, children, .. } => {
                    let h = grammar.rule(rule).map(|r| r.head).unwrap_or(0);
                    t = &children[h.min(children.len() - 1)];
                }
            }
        }
    }
}

/// Shape of a derivation without feature structures: what treebank files
/// store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TreeSpec {
    Leaf { cat: String, word: String },
    Node { rule: String, children: Vec<TreeSpec> },
}

impl fmt::Display for TreeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSpec::Leaf { cat, word } => write!(f, "{cat}:{word}"),
            TreeSpec::Node { rule, children } => {
                write!(f, "({rule}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl TreeSpec {
    pub fn parse(text: &str) -> Result<TreeSpec, String> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let t = parse_spec(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err("trailing tokens after tree".into());
        }
        match t {
            TreeSpec::Node { .. } => Ok(t),
            TreeSpec::Leaf { .. } => Err("tree must start with '('".into()),
        }
    }

    pub fn words(&self) -> Vec<String> {
        match self {
            TreeSpec::Leaf { word, .. } => vec![word.clone()],
            TreeSpec::Node { children, .. } => children.iter().flat_map(|c| c.words()).collect(),
        }
    }

    /// Rebuild the feature structures bottom-up under `grammar`. Fails when
    /// a rule is unknown, a daughter category does not match, a word has no
    /// entry of the stated category, or unification fails everywhere.
    pub fn instantiate(&self, grammar: &Grammar, lexicon: &Lexicon) -> Result<ParseTree, String> {
        let mut options = self.instantiations(grammar, lexicon)?;
        if options.is_empty() {
            return Err(format!("feature unification fails for {self}"));
        }
        Ok(options.swap_remove(0))
    }

    fn instantiations(&self, grammar: &Grammar, lexicon: &Lexicon) -> Result<Vec<ParseTree>, String> {
        match self {
            TreeSpec::Leaf { cat, word } => {
                let out: Vec<ParseTree> = lexicon
                    .entries(word)
                    .iter()
                    .filter(|e| e.major_cat.as_str() == cat)
                    .map(|e| ParseTree::Leaf {
                        word: word.clone(),
                        entry: e.clone(),
                    })
                    .collect();
                if out.is_empty() {
                    return Err(format!("no lexicon entry '{word}' with category '{cat}'"));
                }
                Ok(out)
            }
            TreeSpec::Node { rule, children } => {
                let r = grammar.rule(rule).ok_or_else(|| format!("unknown rule '{rule}'"))?;
                if r.daughters.len() != children.len() {
                    return Err(format!(
                        "rule '{rule}' has {} daughters, tree node has {}",
                        r.daughters.len(),
                        children.len()
                    ));
                }
                let mut kids = Vec::with_capacity(children.len());
                for (spec, c) in r.daughters.iter().zip(children) {
                    let opts = c.instantiations(grammar, lexicon)?;
                    let opts: Vec<ParseTree> = opts.into_iter().filter(|t| t.cat() == spec.cat).collect();
                    if opts.is_empty() {
                        return Err(format!("rule '{rule}' expects a '{}' daughter", spec.cat));
                    }
                    kids.push(opts);
                }
                let mut out = Vec::new();
                combine(r, &kids, 0, Bindings::new(), &mut Vec::new(), &mut out);
                Ok(out)
            }
        }
    }
}

fn combine(
    rule: &super::Rule,
    kids: &[Vec<ParseTree>],
    i: usize,
    env: Bindings,
    chosen: &mut Vec<Arc<ParseTree>>,
    out: &mut Vec<ParseTree>,
) {
    if i == kids.len() {
        out.push(ParseTree::Node {
            rule: rule.id.clone(),
            cat: rule.mother.cat.clone(),
            fs: env.apply(&rule.mother.fs).without_vars(),
            children: chosen.clone(),
        });
        return;
    }
    for k in &kids[i] {
        let mut env2 = env.clone();
        if env2.unify_fs(&rule.daughters[i].fs, k.fs()).is_some() {
            chosen.push(Arc::new(k.clone()));
            combine(rule, kids, i + 1, env2, chosen, out);
            chosen.pop();
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_spec(tokens: &[String], pos: &mut usize) -> Result<TreeSpec, String> {
    let tok = tokens.get(*pos).ok_or("unexpected end of tree")?;
    *pos += 1;
    if tok == "(" {
        let rule = tokens.get(*pos).ok_or("missing rule id")?.clone();
        if rule == "(" || rule == ")" {
            return Err("missing rule id".into());
        }
        *pos += 1;
        let mut children = Vec::new();
        loop {
            match tokens.get(*pos).map(String::as_str) {
                Some(")") => {
                    *pos += 1;
                    break;
                }
                Some(_) => children.push(parse_spec(tokens, pos)?),
                None => return Err("unbalanced parentheses".into()),
            }
        }
        if children.is_empty() {
            return Err(format!("node '{rule}' has no children"));
        }
        Ok(TreeSpec::Node { rule, children })
    } else if tok == ")" {
        Err("unexpected ')'".into())
    } else {
        let (cat, word) = tok
            .split_once(':')
            .ok_or_else(|| format!("leaf {tok:?} must be cat:word"))?;
        Ok(TreeSpec::Leaf {
            cat: cat.to_string(),
            word: word.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::tests::toy;
    use crate::lexicon::tests::domain;

    #[test]
    fn spec_parse_and_print() {
        let s = "(utt_imp (vp_tv verb:show (np_bare (nbar_n noun:flights))))";
        let t = TreeSpec::parse(s).unwrap();
        assert_eq!(t.to_string(), s);
        assert_eq!(t.words(), vec!["show", "flights"]);
        assert!(TreeSpec::parse("(a b:c").is_err());
        assert!(TreeSpec::parse("b:c").is_err());
        assert!(TreeSpec::parse("(a)").is_err());
    }

    #[test]
    fn instantiate_checks_features() {
        let g = toy();
        let lex = domain();
        let ok = TreeSpec::parse("(utt_imp (vp_tv verb:show (np_bare (nbar_n noun:flights))))").unwrap();
        let t = ok.instantiate(&g, &lex).unwrap();
        assert_eq!(t.words(), vec!["show", "flights"]);
        assert_eq!(t.signature(), ok.to_string());
        // Bare singular count noun violates np_bare's num=pl.
        let bad = TreeSpec::parse("(utt_imp (vp_tv verb:show (np_bare (nbar_n noun:flight))))").unwrap();
        assert!(bad.instantiate(&g, &lex).is_err());
        let unknown = TreeSpec::parse("(utt_imp (nope verb:show))").unwrap();
        assert!(unknown.instantiate(&g, &lex).is_err());
    }

    #[test]
    fn spans_cover_yield() {
        let g = toy();
        let lex = domain();
        let t = TreeSpec::parse("(utt_imp (vp_tv verb:show (np_det det:the (nbar_n noun:flights))))")
            .unwrap()
            .instantiate(&g, &lex)
            .unwrap();
        let spans: Vec<(usize, usize)> = t.spans().iter().map(|(a, b, _)| (*a, *b)).collect();
        assert_eq!(spans, vec![(0, 3), (0, 3), (1, 3), (2, 3)]);
        let head = t.head_leaf(&g);
        assert_eq!(head.words(), vec!["show"]);
    }
}
