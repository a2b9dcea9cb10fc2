//! A trained preference model and its text file form.
//!
//! ```text
//! nbest-preference-model 1
//! functions speech parsed_specialized num_mismatch rules
//! combine sum
//! weight speech 0.05
//! meta phase 2
//! meta phase1_residual 3.25
//! meta trajectory 10 12 12
//! meta sentences 40
//! table rules discriminative 0.5 37
//! obj<TAB>good<TAB>bad<TAB>score<TAB>object
//! end
//! ```
//!
//! Floats are written in shortest round-trip form so a reloaded model
//! scores identically.

use std::collections::BTreeMap;
use std::path::Path;

use super::{
    combining_score, is_combining, normalized_speech, CombineMode, HypothesisContext, ObjectCounts, ObjectScoreTable,
    PreferenceVector, ScalingFactors, TableScoring, TrainingMeta, PARSED_SPECIALIZED, SPEECH,
};
use crate::analysis::{Analysis, FlagRegistry, NUM_MISMATCH};
use crate::error::{Error, Result};

const MAGIC: &str = "nbest-preference-model 1";

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    pub functions: Vec<String>,
    pub combine: CombineMode,
    pub tables: BTreeMap<String, ObjectScoreTable>,
    pub weights: ScalingFactors,
}

/// Whether `name` is a known preference function.
pub fn is_known_function(name: &str) -> bool {
    name == SPEECH
        || name == PARSED_SPECIALIZED
        || name == NUM_MISMATCH
        || is_combining(name)
        || name.strip_prefix("rule:").is_some_and(|r| !r.is_empty())
}

impl PreferenceModel {
    /// A model that ranks by acoustic score alone.
    pub fn speech_only() -> Self {
        PreferenceModel {
            functions: vec![SPEECH.to_string()],
            combine: CombineMode::Sum,
            tables: BTreeMap::new(),
            weights: ScalingFactors::new(vec![SPEECH.to_string()], vec![1.0]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::Validation("model has no preference functions".into()));
        }
        for f in &self.functions {
            if !is_known_function(f) {
                return Err(Error::Validation(format!("unknown preference function '{f}'")));
            }
            if is_combining(f) && !self.tables.contains_key(f) {
                return Err(Error::Validation(format!("no object table for '{f}'")));
            }
        }
        if self.weights.names != self.functions {
            return Err(Error::Validation("weights do not match the function list".into()));
        }
        if self.weights.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Validation("all scaling factors are zero".into()));
        }
        Ok(())
    }

    /// Flags the model reads, as a registry for analysis.
    pub fn flag_registry(&self) -> FlagRegistry {
        FlagRegistry {
            rule_counters: self
                .functions
                .iter()
                .filter_map(|f| f.strip_prefix("rule:").map(str::to_string))
                .collect(),
        }
    }

    pub fn vector(&self, analysis: &Analysis, ctx: &HypothesisContext) -> Result<PreferenceVector> {
        let mut values = Vec::with_capacity(self.functions.len());
        for f in &self.functions {
            let v = if f == SPEECH {
                normalized_speech(ctx)
            } else if f == PARSED_SPECIALIZED {
                f64::from(u8::from(ctx.parsed_specialized))
            } else if is_combining(f) {
                let table = self
                    .tables
                    .get(f)
                    .ok_or_else(|| Error::Validation(format!("no object table for '{f}'")))?;
                let objects = analysis.objects(f).expect("combining kind has objects");
                combining_score(&objects, table, self.combine)
            } else {
                analysis.structural.get(f).copied().unwrap_or(0) as f64
            };
            values.push(v);
        }
        Ok(PreferenceVector {
            names: self.functions.clone(),
            values,
        })
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!("{MAGIC}\nfunctions {}\ncombine {}\n", self.functions.join(" "), self.combine);
        for (n, w) in self.weights.names.iter().zip(&self.weights.weights) {
            s += &format!("weight {n} {w:?}\n");
        }
        let m = &self.weights.meta;
        s += &format!("meta phase {}\n", m.phase);
        s += &format!("meta phase1_residual {:?}\n", m.phase1_residual);
        let traj: Vec<String> = m.trajectory.iter().map(|t| t.to_string()).collect();
        s += &format!("meta trajectory {}\n", traj.join(" ")).replace(" \n", "\n");
        s += &format!("meta sentences {}\n", m.sentences);
        for (kind, t) in &self.tables {
            s += &format!("table {kind} {} {:?} {}\n", t.scoring, t.alpha, t.good_total);
            for (o, c) in &t.counts {
                s += &format!("obj\t{}\t{}\t{:?}\t{o}\n", c.good, c.bad, t.score_counts(*c));
            }
        }
        s += "end\n";
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, m: String| Error::format("preference model", line, m);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim_end() == MAGIC => {}
            _ => return Err(bad(1, format!("expected header '{MAGIC}'"))),
        }
        let mut functions = None;
        let mut combine = CombineMode::Sum;
        let mut weights: BTreeMap<String, f64> = BTreeMap::new();
        let mut meta = TrainingMeta::default();
        let mut tables: BTreeMap<String, ObjectScoreTable> = BTreeMap::new();
        let mut current: Option<String> = None;
        let mut ended = false;
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if ended {
                return Err(bad(no, "content after 'end'".into()));
            }
            if let Some(rest) = line.strip_prefix("obj\t") {
                let kind = current.as_ref().ok_or_else(|| bad(no, "object outside a table".into()))?;
                let f: Vec<&str> = rest.splitn(4, '\t').collect();
                if f.len() != 4 {
                    return Err(bad(no, "object line needs good, bad, score and object".into()));
                }
                let good: u64 = f[0].parse().map_err(|_| bad(no, format!("bad count {:?}", f[0])))?;
                let badc: u64 = f[1].parse().map_err(|_| bad(no, format!("bad count {:?}", f[1])))?;
                let stored: f64 = f[2].parse().map_err(|_| bad(no, format!("bad score {:?}", f[2])))?;
                let t = tables.get_mut(kind).expect("current table exists");
                let c = ObjectCounts { good, bad: badc };
                if t.score_counts(c) != stored {
                    return Err(bad(no, format!("stored score for {:?} does not match its counts", f[3])));
                }
                t.counts.insert(f[3].to_string(), c);
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["functions", names @ ..] => functions = Some(names.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
                ["combine", m] => combine = m.parse().map_err(|e| bad(no, e))?,
                ["weight", n, w] => {
                    let w: f64 = w.parse().map_err(|_| bad(no, format!("bad weight {w:?}")))?;
                    weights.insert(n.to_string(), w);
                }
                ["meta", "phase", p] => meta.phase = p.parse().map_err(|_| bad(no, "bad phase".into()))?,
                ["meta", "phase1_residual", r] => {
                    meta.phase1_residual = r.parse().map_err(|_| bad(no, "bad residual".into()))?
                }
                ["meta", "trajectory", ts @ ..] => {
                    meta.trajectory = ts
                        .iter()
                        .map(|t| t.parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad(no, "bad trajectory".into()))?
                }
                ["meta", "sentences", n] => meta.sentences = n.parse().map_err(|_| bad(no, "bad count".into()))?,
                ["table", kind, scoring, alpha, good_total] => {
                    let scoring: TableScoring = scoring.parse().map_err(|e| bad(no, e))?;
                    let alpha: f64 = alpha.parse().map_err(|_| bad(no, "bad alpha".into()))?;
                    let mut t = ObjectScoreTable::new(*kind, alpha, scoring);
                    t.good_total = good_total.parse().map_err(|_| bad(no, "bad total".into()))?;
                    tables.insert(kind.to_string(), t);
                    current = Some(kind.to_string());
                }
                ["end"] => ended = true,
                _ => return Err(bad(no, format!("unrecognised line {line:?}"))),
            }
        }
        if !ended {
            return Err(Error::format("preference model", text.lines().count(), "missing 'end'"));
        }
        let functions = functions.ok_or_else(|| Error::Validation("model lists no functions".into()))?;
        let w = functions
            .iter()
            .map(|f| {
                weights
                    .get(f)
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("no weight for '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sf = ScalingFactors::new(functions.clone(), w);
        sf.meta = meta;
        let model = PreferenceModel {
            functions,
            combine,
            tables,
            weights: sf,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::error::read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }
}
