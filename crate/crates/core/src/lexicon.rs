//! Word-level knowledge: roots, major categories, number words, repair
//! markers, skippable common words and semantic classes.
//!
//! File format (UTF-8, one record per line):
//!
//! ```text
//! # comment
//! @markers no sorry
//! @skippable a and from in of or to
//! surface<TAB>root<TAB>major_cat[<TAB>sem_class[<TAB>features]]
//! ```
//!
//! `sem_class` may be `-` when absent. `features` is the grammar-level
//! feature structure of the entry, written `f=v,g=w`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::grammar::feature::FeatureStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorCat {
    Verb,
    Noun,
    Det,
    Prep,
    ProperName,
    Number,
    Marker,
    Other,
}

impl MajorCat {
    pub const ALL: [MajorCat; 8] = [
        MajorCat::Verb,
        MajorCat::Noun,
        MajorCat::Det,
        MajorCat::Prep,
        MajorCat::ProperName,
        MajorCat::Number,
        MajorCat::Marker,
        MajorCat::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MajorCat::Verb => "verb",
            MajorCat::Noun => "noun",
            MajorCat::Det => "det",
            MajorCat::Prep => "prep",
            MajorCat::ProperName => "propername",
            MajorCat::Number => "number",
            MajorCat::Marker => "marker",
            MajorCat::Other => "other",
        }
    }
}

impl fmt::Display for MajorCat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MajorCat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MajorCat::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown major category '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LexEntry {
    pub surface: String,
    pub root: String,
    pub major_cat: MajorCat,
    pub sem_class: Option<String>,
    pub features: FeatureStructure,
}

pub const DEFAULT_SKIPPABLE: [&str; 7] = ["a", "and", "from", "in", "of", "or", "to"];
pub const DEFAULT_MARKERS: [&str; 2] = ["no", "sorry"];

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<LexEntry>>,
    repair_markers: BTreeSet<String>,
    common_skippable: BTreeSet<String>,
    /// root -> sem_class, collected from entries.
    classes: BTreeMap<String, String>,
    /// root -> categories it is known under, for the suffix fallback.
    root_cats: BTreeMap<String, BTreeSet<MajorCat>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            entries: BTreeMap::new(),
            repair_markers: DEFAULT_MARKERS.iter().map(|s| s.to_string()).collect(),
            common_skippable: DEFAULT_SKIPPABLE.iter().map(|s| s.to_string()).collect(),
            classes: BTreeMap::new(),
            root_cats: BTreeMap::new(),
        }
    }
}

const FALLBACK_SUFFIXES: [&str; 4] = ["es", "s", "ing", "ed"];

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_file(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("@markers") {
                let set: BTreeSet<String> = rest.split_whitespace().map(str::to_lowercase).collect();
                if set.is_empty() {
                    return Err(Error::format("lexicon", line_no, "@markers needs at least one word"));
                }
                lex.repair_markers = set;
                continue;
            }
            if let Some(rest) = line.strip_prefix("@skippable") {
                lex.common_skippable = rest.split_whitespace().map(str::to_lowercase).collect();
                continue;
            }
            if line.starts_with('@') {
                return Err(Error::format("lexicon", line_no, format!("unknown header {line:?}")));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(3..=5).contains(&fields.len()) {
                return Err(Error::format(
                    "lexicon",
                    line_no,
                    format!("expected 3 to 5 tab-separated fields, found {}", fields.len()),
                ));
            }
            let major_cat = fields[2]
                .parse::<MajorCat>()
                .map_err(|e| Error::format("lexicon", line_no, e))?;
            let sem_class = match fields.get(3) {
                None | Some(&"-") | Some(&"") => None,
                Some(c) => Some(c.to_string()),
            };
            let features = match fields.get(4) {
                None | Some(&"") | Some(&"-") => FeatureStructure::new(),
                Some(f) => FeatureStructure::parse(&format!("[{f}]"))
                    .map_err(|e| Error::format("lexicon", line_no, e))?,
            };
            let entry = LexEntry {
                surface: fields[0].to_string(),
                root: fields[1].to_string(),
                major_cat,
                sem_class,
                features,
            };
            lex.add(entry).map_err(|e| Error::format("lexicon", line_no, e))?;
        }
        Ok(lex)
    }

    pub fn add(&mut self, entry: LexEntry) -> Result<(), String> {
        if entry.surface.is_empty() || entry.root.is_empty() {
            return Err("surface and root must be non-empty".into());
        }
        if entry.surface != entry.surface.to_lowercase() || entry.root != entry.root.to_lowercase() {
            return Err(format!("entry '{}' must be lowercase", entry.surface));
        }
        if let Some(class) = &entry.sem_class {
            self.classes.insert(entry.root.clone(), class.clone());
        }
        self.root_cats
            .entry(entry.root.clone())
            .or_default()
            .insert(entry.major_cat);
        let list = self.entries.entry(entry.surface.clone()).or_default();
        if !list.contains(&entry) {
            list.push(entry);
        }
        Ok(())
    }

    pub fn set_repair_markers<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, words: I) {
        self.repair_markers = words.into_iter().map(Into::into).collect();
    }

    pub fn set_common_skippable<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, words: I) {
        self.common_skippable = words.into_iter().map(Into::into).collect();
    }

    /// Entries for a surface form; empty when the word is not listed.
    pub fn entries(&self, word: &str) -> &[LexEntry] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &LexEntry> {
        self.entries.values().flatten()
    }

    pub fn repair_markers(&self) -> &BTreeSet<String> {
        &self.repair_markers
    }

    pub fn common_skippable(&self) -> &BTreeSet<String> {
        &self.common_skippable
    }

    /// All (root, major category) analyses of a token. Unknown words go
    /// through a suffix stripper that only accepts stems known as roots;
    /// otherwise the word is its own root with category `other`.
    pub fn analyze_root(&self, word: &str) -> Vec<(String, MajorCat)> {
        let mut out: Vec<(String, MajorCat)> = Vec::new();
        for e in self.entries(word) {
            let a = (e.root.clone(), e.major_cat);
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if !out.is_empty() {
            return out;
        }
        for suffix in FALLBACK_SUFFIXES {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.is_empty() {
                    continue;
                }
                if let Some(cats) = self.root_cats.get(stem) {
                    return cats.iter().map(|c| (stem.to_string(), *c)).collect();
                }
            }
        }
        vec![(word.to_string(), MajorCat::Other)]
    }

    pub fn roots(&self, word: &str) -> Vec<String> {
        let mut roots: Vec<String> = self.analyze_root(word).into_iter().map(|(r, _)| r).collect();
        roots.dedup();
        roots
    }

    pub fn major_cats(&self, word: &str) -> BTreeSet<MajorCat> {
        self.analyze_root(word).into_iter().map(|(_, c)| c).collect()
    }

    pub fn share_root(&self, a: &str, b: &str) -> bool {
        let ra = self.roots(a);
        self.roots(b).iter().any(|r| ra.contains(r))
    }

    pub fn share_major_cat(&self, a: &str, b: &str) -> bool {
        let ca = self.major_cats(a);
        self.major_cats(b).iter().any(|c| ca.contains(c))
    }

    pub fn is_number(&self, word: &str) -> bool {
        self.analyze_root(word).iter().any(|(_, c)| *c == MajorCat::Number)
    }

    pub fn is_repair_marker(&self, word: &str) -> bool {
        self.repair_markers.contains(word)
    }

    pub fn is_common_skippable(&self, word: &str) -> bool {
        self.common_skippable.contains(word)
    }

    /// Semantic class of a root, or the root itself when unclassed.
    pub fn sem_class(&self, root: &str) -> String {
        self.classes.get(root).cloned().unwrap_or_else(|| root.to_string())
    }

    /// Serialise in the file format. Entries are sorted, so
    /// `parse(to_file_string())` reproduces the same text.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str("@markers");
        for m in &self.repair_markers {
            out.push(' ');
            out.push_str(m);
        }
        out.push('\n');
        out.push_str("@skippable");
        for m in &self.common_skippable {
            out.push(' ');
            out.push_str(m);
        }
        out.push('\n');
        let mut lines: Vec<String> = self
            .all_entries()
            .map(|e| {
                let feats = e.features.to_string();
                let feats = &feats[1..feats.len() - 1];
                let mut line = format!("{}\t{}\t{}", e.surface, e.root, e.major_cat);
                if e.sem_class.is_some() || !feats.is_empty() {
                    line.push('\t');
                    line.push_str(e.sem_class.as_deref().unwrap_or("-"));
                }
                if !feats.is_empty() {
                    line.push('\t');
                    line.push_str(feats);
                }
                line
            })
            .collect();
        lines.sort();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    /// Check the cross-field invariants: number-category entries must be
    /// recognised as numbers, and every marker / skippable word must have
    /// an entry.
    pub fn validate(&self) -> Result<()> {
        for e in self.all_entries() {
            if e.major_cat == MajorCat::Number && !self.is_number(&e.surface) {
                return Err(Error::Validation(format!("number entry '{}' not a number", e.surface)));
            }
        }
        for w in self.repair_markers.iter().chain(&self.common_skippable) {
            if !self.contains(w) {
                return Err(Error::Validation(format!("word '{w}' has no lexicon entry")));
            }
        }
        if self.repair_markers.is_empty() {
            return Err(Error::Validation("repair marker set is empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The shipped domain lexicon, used by tests across the crate.
    pub(crate) fn domain() -> Lexicon {
        Lexicon::parse(include_str!("../data/lexicon.tsv")).expect("shipped lexicon parses")
    }

    #[test]
    fn roots_of_inflected_forms() {
        let lex = domain();
        assert_eq!(lex.analyze_root("does"), vec![("do".to_string(), MajorCat::Verb)]);
        assert_eq!(lex.analyze_root("flights"), vec![("flight".to_string(), MajorCat::Noun)]);
        assert_eq!(
            lex.analyze_root("boston"),
            vec![("boston".to_string(), MajorCat::ProperName)]
        );
    }

    #[test]
    fn unknown_words_degrade_to_identity() {
        let lex = domain();
        assert_eq!(lex.analyze_root("maybe"), vec![("maybe".to_string(), MajorCat::Other)]);
        // Suffix fallback only applies when the stem is a known root.
        assert_eq!(lex.analyze_root("ticketing")[0].0, "ticket");
        assert_eq!(lex.analyze_root("zzzs"), vec![("zzzs".to_string(), MajorCat::Other)]);
    }

    #[test]
    fn number_words() {
        let lex = domain();
        assert!(lex.is_number("sixteen"));
        assert!(lex.is_number("oh"));
        assert!(!lex.is_number("flight"));
    }

    #[test]
    fn markers_and_skippable() {
        let lex = domain();
        assert!(lex.is_repair_marker("sorry"));
        assert!(lex.is_repair_marker("no"));
        assert!(!lex.is_repair_marker("denver"));
        assert!(lex.is_common_skippable("from"));
        assert!(lex.is_common_skippable("or"));
        assert!(!lex.is_common_skippable("boston"));
    }

    #[test]
    fn default_sets() {
        let lex = Lexicon::new();
        let skippable: Vec<&str> = lex.common_skippable().iter().map(String::as_str).collect();
        assert_eq!(skippable, DEFAULT_SKIPPABLE);
        assert!(lex.is_repair_marker("sorry") && lex.is_repair_marker("no"));
    }

    #[test]
    fn semantic_classes() {
        let lex = domain();
        assert_eq!(lex.sem_class("boston"), "*place");
        assert_eq!(lex.sem_class("denver"), "*place");
        assert_eq!(lex.sem_class("flight"), "flight");
    }

    #[test]
    fn shipped_lexicon_is_valid() {
        domain().validate().unwrap();
    }

    #[test]
    fn file_round_trip() {
        let lex = domain();
        let text = lex.to_file_string();
        let again = Lexicon::parse(&text).unwrap();
        assert_eq!(again.to_file_string(), text);
        let original: BTreeSet<_> = lex.all_entries().cloned().collect();
        let reparsed: BTreeSet<_> = again.all_entries().cloned().collect();
        assert_eq!(original, reparsed);
    }

    #[test]
    fn header_overrides_defaults() {
        let lex = Lexicon::parse("@markers sorry oops\n@skippable the\noops\toops\tmarker\n").unwrap();
        assert!(lex.is_repair_marker("oops"));
        assert!(!lex.is_repair_marker("no"));
        assert!(lex.is_common_skippable("the"));
        assert!(!lex.is_common_skippable("from"));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = Lexicon::parse("# c\nflight\tflight\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = Lexicon::parse("flight\tflight\tthing\n").unwrap_err();
        assert!(err.to_string().contains("unknown major category"));
        assert!(Lexicon::parse("Flight\tflight\tnoun\n").is_err());
    }
}
