//! N-best and reference files.
//!
//! N-best: `utt_id<TAB>rank<TAB>acoustic_score<TAB>words`, ranks from 1.
//! References: `utt_id<TAB>words[<TAB>gold tree|-[<TAB>spoken words|-]]`,
//! where the spoken words are what was said before any disfluency was
//! removed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{read_file, Error, Result};
use crate::grammar::TreeSpec;
use crate::repair::Hypothesis;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// Recognizer order, rank 1 first.
    pub nbest: Vec<Hypothesis>,
    pub reference: Option<Vec<String>>,
    pub gold: Option<TreeSpec>,
    pub spoken: Option<Vec<String>>,
}

impl Utterance {
    /// Whether what was said differs from the intended words.
    pub fn has_actual_repair(&self) -> bool {
        matches!((&self.spoken, &self.reference), (Some(s), Some(r)) if s != r)
    }

    /// Keep the best `n` hypotheses.
    pub fn truncated(&self, n: usize) -> Utterance {
        let mut u = self.clone();
        u.nbest.truncate(n);
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub words: Vec<String>,
    pub gold: Option<TreeSpec>,
    pub spoken: Option<Vec<String>>,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Hypothesis lists in order of first appearance, each sorted by rank.
pub fn parse_nbest(text: &str) -> Result<Vec<(String, Vec<Hypothesis>)>> {
    let mut order: Vec<String> = Vec::new();
    let mut lists: BTreeMap<String, Vec<Hypothesis>> = BTreeMap::new();
    for (no, line) in content_lines(text) {
        let bad = |m: String| Error::format("n-best file", no, m);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        let rank: usize = f[1].parse().map_err(|_| bad(format!("bad rank {:?}", f[1])))?;
        if rank == 0 {
            return Err(bad("ranks start at 1".into()));
        }
        let score: f64 = f[2].parse().map_err(|_| bad(format!("bad score {:?}", f[2])))?;
        if !score.is_finite() {
            return Err(bad("score must be finite".into()));
        }
        let w = words(f[3]);
        if w.is_empty() {
            return Err(bad("empty hypothesis".into()));
        }
        let list = lists.entry(f[0].to_string()).or_insert_with(|| {
            order.push(f[0].to_string());
            Vec::new()
        });
        if list.iter().any(|h| h.rank == rank) {
            return Err(bad(format!("duplicate rank {rank} for {}", f[0])));
        }
        list.push(Hypothesis::original(rank, w, score));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let mut l = lists.remove(&id).expect("listed id");
            l.sort_by_key(|h| h.rank);
            (id, l)
        })
        .collect())
}

pub fn parse_references(text: &str) -> Result<BTreeMap<String, Reference>> {
    let mut out = BTreeMap::new();
    for (no, line) in content_lines(text) {
        let bad = |m: String| Error::format("reference file", no, m);
        let f: Vec<&str> = line.split('\t').collect();
        if !(2..=4).contains(&f.len()) {
            return Err(bad(format!("expected 2 to 4 tab-separated fields, found {}", f.len())));
        }
        let w = words(f[1]);
        if w.is_empty() {
            return Err(bad("empty reference".into()));
        }
        let gold = match f.get(2) {
            Some(t) if *t != "-" => Some(TreeSpec::parse(t).map_err(bad)?),
            _ => None,
        };
        if let Some(g) = &gold {
            if g.words() != w {
                return Err(bad("gold tree words differ from the reference".into()));
            }
        }
        let spoken = match f.get(3) {
            Some(s) if *s != "-" => Some(words(s)),
            _ => None,
        };
        let r = Reference { words: w, gold, spoken };
        if out.insert(f[0].to_string(), r).is_some() {
            return Err(bad(format!("duplicate reference for {}", f[0])));
        }
    }
    Ok(out)
}

/// Join N-best lists with references. Every reference must name an
/// utterance in the N-best file.
pub fn join_corpus(nbest: Vec<(String, Vec<Hypothesis>)>, refs: Option<BTreeMap<String, Reference>>) -> Result<Vec<Utterance>> {
    let mut refs = refs;
    if let Some(r) = &refs {
        let ids: BTreeSet<&String> = nbest.iter().map(|(id, _)| id).collect();
        if let Some(extra) = r.keys().find(|k| !ids.contains(k)) {
            return Err(Error::Validation(format!("reference for unknown utterance '{extra}'")));
        }
    }
    Ok(nbest
        .into_iter()
        .map(|(id, list)| {
            let r = refs.as_mut().and_then(|m| m.remove(&id));
            Utterance {
                id,
                nbest: list,
                reference: r.as_ref().map(|r| r.words.clone()),
                gold: r.as_ref().and_then(|r| r.gold.clone()),
                spoken: r.and_then(|r| r.spoken),
            }
        })
        .collect())
}

pub fn load_corpus(nbest: &Path, references: Option<&Path>) -> Result<Vec<Utterance>> {
    let lists = parse_nbest(&read_file(nbest)?)?;
    let refs = match references {
        Some(p) => Some(parse_references(&read_file(p)?)?),
        None => None,
    };
    join_corpus(lists, refs)
}

pub fn nbest_to_string(utts: &[Utterance]) -> String {
    let mut s = String::new();
    for u in utts {
        for h in &u.nbest {
            s += &format!("{}\t{}\t{:.2}\t{}\n", u.id, h.rank, h.acoustic_score, h.text());
        }
    }
    s
}

pub fn references_to_string(utts: &[Utterance]) -> String {
    let mut s = String::new();
    for u in utts {
        let Some(r) = &u.reference else { continue };
        let gold = u.gold.as_ref().map_or("-".to_string(), |g| g.to_string());
        let spoken = u.spoken.as_ref().map_or("-".to_string(), |w| w.join(" "));
        s += &format!("{}\t{}\t{}\t{}\n", u.id, r.join(" "), gold, spoken);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let nb = "u1\t2\t-12.5\tshow flights\nu1\t1\t-10.00\tShow the flights\nu2\t1\t-3\tboston\n";
        let refs = "u1\tshow the flights\t(utt_imp (vp_tv verb:show (np_det det:the (nbar_n noun:flights))))\t-\nu2\tboston\n";
        let utts = join_corpus(parse_nbest(nb).unwrap(), Some(parse_references(refs).unwrap())).unwrap();
        assert_eq!(utts.len(), 2);
        assert_eq!(utts[0].nbest[0].words, vec!["show", "the", "flights"]);
        assert_eq!(utts[0].nbest[1].rank, 2);
        assert!(utts[0].gold.is_some() && utts[1].gold.is_none());
        let again = join_corpus(
            parse_nbest(&nbest_to_string(&utts)).unwrap(),
            Some(parse_references(&references_to_string(&utts)).unwrap()),
        )
        .unwrap();
        assert_eq!(again, utts);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_nbest("u1\t1\tx\tshow").is_err());
        assert!(parse_nbest("u1\t0\t1\tshow").is_err());
        assert!(parse_nbest("u1\t1\t1\tshow\nu1\t1\t2\tlist").is_err());
        assert!(parse_nbest("u1\t1\t1").is_err());
        assert!(parse_references("u1\tshow flights\t(utt_frag (np_name propername:boston))").is_err());
        let lists = parse_nbest("u1\t1\t1\tshow").unwrap();
        assert!(join_corpus(lists, Some(parse_references("u9\tshow").unwrap())).is_err());
    }
}
