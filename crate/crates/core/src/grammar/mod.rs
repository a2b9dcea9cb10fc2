//! Unification phrase-structure grammars: a context-free backbone over
//! categories, with feature constraints on every constituent.
//!
//! Grammar file format, one rule per line:
//!
//! ```text
//! @start utt
//! @chunk np
//! id: mother[f=v,...] -> d1[...] d2[...] ; head=k ; args={1:2,...} ; rel=k
//! ```
//!
//! Preterminal categories are the lexicon's major categories. Specialised
//! grammars add `; count=n ; prov=[ids]` (and further `; alt=[ids]` for
//! alternative derivations of the same pattern).

pub mod chart;
pub mod feature;
pub mod tree;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use crate::error::{read_file, Error, Result};
use crate::lexicon::MajorCat;
use feature::{Bindings, FeatureStructure};

pub use chart::parse_chart;
pub use tree::{ParseTree, TreeSpec};

/// A category plus its feature constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constituent {
    pub cat: String,
    pub fs: FeatureStructure,
}

impl Constituent {
    pub fn new(cat: impl Into<String>, fs: FeatureStructure) -> Self {
        Constituent { cat: cat.into(), fs }
    }

    pub fn bare(cat: impl Into<String>) -> Self {
        Self::new(cat, FeatureStructure::new())
    }
}

impl fmt::Display for Constituent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cat)?;
        if !self.fs.is_empty() {
            write!(f, "{}", self.fs)?;
        }
        Ok(())
    }
}

/// Bookkeeping carried by rules that were produced by collapsing training
/// derivations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EblInfo {
    /// General-grammar rule ids, in preorder of the collapsed derivation.
    pub provenance: Vec<String>,
    /// Other derivations that collapse to the same pattern.
    pub alternatives: Vec<Vec<String>>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub mother: Constituent,
    pub daughters: Vec<Constituent>,
    pub head: usize,
    /// Daughter position -> argument index, for triple extraction.
    pub args: BTreeMap<usize, u32>,
    /// Daughter whose word names the relation when this constituent
    /// attaches as a modifier (prepositions).
    pub rel: Option<usize>,
    pub ebl: Option<EblInfo>,
}

impl Rule {
    /// Unify daughter feature structures against the rule and return the
    /// grounded mother structure, or `None` on a clash.
    pub fn apply(&self, daughters: &[&FeatureStructure]) -> Option<FeatureStructure> {
        debug_assert_eq!(daughters.len(), self.daughters.len());
        let mut env = Bindings::new();
        for (spec, fs) in self.daughters.iter().zip(daughters) {
            env.unify_fs(&spec.fs, fs)?;
        }
        Some(env.apply(&self.mother.fs).without_vars())
    }

    pub fn backbone(&self) -> String {
        let mut s = format!("{} ->", self.mother.cat);
        for d in &self.daughters {
            s.push(' ');
            s.push_str(&d.cat);
        }
        s
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ->", self.id, self.mother)?;
        for d in &self.daughters {
            write!(f, " {d}")?;
        }
        write!(f, " ; head={}", self.head)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            write!(f, " ; args={{{}}}", args.join(","))?;
        }
        if let Some(r) = self.rel {
            write!(f, " ; rel={r}")?;
        }
        if let Some(ebl) = &self.ebl {
            write!(f, " ; count={} ; prov=[{}]", ebl.count, ebl.provenance.join(","))?;
            for alt in &ebl.alternatives {
                write!(f, " ; alt=[{}]", alt.join(","))?;
            }
        }
        Ok(())
    }
}

pub fn is_lexical_category(cat: &str) -> bool {
    cat.parse::<MajorCat>().is_ok()
}

#[derive(Debug, Clone)]
pub struct Grammar {
    rules: Vec<Rule>,
    index: HashMap<String, usize>,
    by_mother: HashMap<String, Vec<usize>>,
    chunk_roots: BTreeSet<String>,
    start: String,
}

impl Grammar {
    pub fn new(rules: Vec<Rule>, chunk_roots: BTreeSet<String>, start: impl Into<String>) -> Result<Self> {
        let start = start.into();
        let mut index = HashMap::new();
        let mut by_mother: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate rule id '{}'", r.id)));
            }
            if r.daughters.is_empty() {
                return Err(Error::Validation(format!("rule '{}' has no daughters", r.id)));
            }
            if r.head >= r.daughters.len() {
                return Err(Error::Validation(format!("rule '{}': head out of range", r.id)));
            }
            if r.args.keys().any(|&k| k >= r.daughters.len()) || r.rel.is_some_and(|k| k >= r.daughters.len()) {
                return Err(Error::Validation(format!("rule '{}': annotation out of range", r.id)));
            }
            if is_lexical_category(&r.mother.cat) {
                return Err(Error::Validation(format!(
                    "rule '{}' rewrites preterminal category '{}'",
                    r.id, r.mother.cat
                )));
            }
            by_mother.entry(r.mother.cat.clone()).or_default().push(i);
        }
        for r in &rules {
            for d in &r.daughters {
                if !is_lexical_category(&d.cat) && !by_mother.contains_key(&d.cat) {
                    return Err(Error::Validation(format!(
                        "rule '{}' uses category '{}' that no rule defines",
                        r.id, d.cat
                    )));
                }
            }
        }
        if !chunk_roots.contains(&start) {
            return Err(Error::Validation(format!("start category '{start}' is not a chunk root")));
        }
        for c in &chunk_roots {
            if !by_mother.contains_key(c) {
                return Err(Error::Validation(format!("chunk root '{c}' is not a category")));
            }
        }
        Ok(Grammar {
            rules,
            index,
            by_mother,
            chunk_roots,
            start,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_file(path.as_ref())?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        let mut chunk_roots = BTreeSet::new();
        let mut start = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("@chunk") {
                for c in rest.split_whitespace() {
                    chunk_roots.insert(c.to_string());
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix("@start") {
                start = Some(rest.trim().to_string());
                continue;
            }
            rules.push(parse_rule(line).map_err(|m| Error::format("grammar", line_no, m))?);
        }
        let start = start.ok_or_else(|| Error::format("grammar", 0, "missing @start line"))?;
        Grammar::new(rules, chunk_roots, start)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("@start {}\n", self.start);
        for c in &self.chunk_roots {
            out.push_str(&format!("@chunk {c}\n"));
        }
        for r in &self.rules {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.index.get(id).map(|&i| &self.rules[i])
    }

    pub fn rule_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn rules_for(&self, cat: &str) -> impl Iterator<Item = &Rule> {
        self.by_mother
            .get(cat)
            .into_iter()
            .flatten()
            .map(move |&i| &self.rules[i])
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn chunk_roots(&self) -> &BTreeSet<String> {
        &self.chunk_roots
    }

    /// Phrasal categories (those with at least one rule).
    pub fn categories(&self) -> BTreeSet<String> {
        self.by_mother.keys().cloned().collect()
    }
}

/// Parse one rule line (without the trailing newline).
pub fn parse_rule(line: &str) -> Result<Rule, String> {
    let mut parts = line.split(';').map(str::trim);
    let body = parts.next().unwrap_or("");
    let (id, rest) = body.split_once(':').ok_or("expected 'id: mother -> daughters'")?;
    let id = id.trim();
    if id.is_empty() || id.contains(char::is_whitespace) {
        return Err(format!("bad rule id {id:?}"));
    }
    let (lhs, rhs) = rest.split_once("->").ok_or("missing '->'")?;
    let mother = parse_constituents(lhs)?;
    if mother.len() != 1 {
        return Err("rule needs exactly one mother".into());
    }
    let daughters = parse_constituents(rhs)?;
    if daughters.is_empty() {
        return Err("rule needs at least one daughter".into());
    }
    let mut rule = Rule {
        id: id.to_string(),
        mother: mother.into_iter().next().unwrap(),
        daughters,
        head: 0,
        args: BTreeMap::new(),
        rel: None,
        ebl: None,
    };
    let mut count = None;
    let mut prov = None;
    let mut alternatives = Vec::new();
    for ann in parts {
        if ann.is_empty() {
            continue;
        }
        let (key, value) = ann.split_once('=').ok_or_else(|| format!("bad annotation {ann:?}"))?;
        let value = value.trim();
        match key.trim() {
            "head" => rule.head = value.parse().map_err(|_| format!("bad head {value:?}"))?,
            "rel" => rule.rel = Some(value.parse().map_err(|_| format!("bad rel {value:?}"))?),
            "args" => {
                let inner = value
                    .strip_prefix('{')
                    .and_then(|v| v.strip_suffix('}'))
                    .ok_or("args must be {k:v,...}")?;
                for pair in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let (k, v) = pair.split_once(':').ok_or_else(|| format!("bad arg pair {pair:?}"))?;
                    let k: usize = k.trim().parse().map_err(|_| format!("bad arg position {k:?}"))?;
                    let v: u32 = v.trim().parse().map_err(|_| format!("bad arg index {v:?}"))?;
                    rule.args.insert(k, v);
                }
            }
            "count" => count = Some(value.parse::<usize>().map_err(|_| format!("bad count {value:?}"))?),
            "prov" => prov = Some(parse_id_list(value)?),
            "alt" => alternatives.push(parse_id_list(value)?),
            other => return Err(format!("unknown annotation '{other}'")),
        }
    }
    match (count, prov) {
        (None, None) if alternatives.is_empty() => {}
        (Some(count), Some(provenance)) => {
            rule.ebl = Some(EblInfo {
                provenance,
                alternatives,
                count,
            })
        }
        _ => return Err("count and prov must be given together".into()),
    }
    Ok(rule)
}

fn parse_id_list(value: &str) -> Result<Vec<String>, String> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or("id list must be [a,b,...]")?;
    Ok(inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect())
}

fn parse_constituents(text: &str) -> Result<Vec<Constituent>, String> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
            i += 1;
        }
        if start == i {
            return Err(format!("expected category at {:?}", &text[start..]));
        }
        let cat = &text[start..i];
        let mut fs = FeatureStructure::new();
        if i < bytes.len() && bytes[i] == b'[' {
            let fs_start = i;
            let mut depth = 0;
            while i < bytes.len() {
                match bytes[i] {
                    b'[' => depth += 1,
                    b']' => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            if depth != 0 {
                return Err("unbalanced '['".into());
            }
            fs = FeatureStructure::parse(&text[fs_start..i])?;
        }
        out.push(Constituent::new(cat, fs));
    }
    Ok(out)
}
