//! End-to-end processing of an N-best list: repair expansion, parsing with
//! the specialised grammar (falling back to the general one), and
//! preference-based selection over every analysis of every hypothesis.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod io;
pub mod train;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::analysis::{Analysis, FlagRegistry};
use crate::error::{read_file, Error, Result};
use crate::grammar::{parse_chart, Grammar, ParseTree, TreeSpec};
use crate::lexicon::Lexicon;
use crate::preference::{select_best, total_score, HypothesisContext, PreferenceModel, RankedCandidate};
use crate::repair::{expand_hypotheses, Hypothesis};
use crate::specialize::{
    compile_lr, expansions, instantiate_treebank, parse_lr, specialize_grammar, to_general, LrTable,
};

pub use config::Config;
pub use eval::{evaluate, EvalReport, RepairMatrix};
pub use io::Utterance;
pub use train::{train_pipeline, TrainReport};

/// Lexicon, general grammar, specialised grammar and its LR table.
#[derive(Debug, Clone)]
pub struct GrammarBundle {
    pub lexicon: Lexicon,
    pub general: Grammar,
    pub specialized: Grammar,
    pub table: LrTable,
}

/// General-grammar trees for one hypothesis.
#[derive(Debug, Clone)]
pub struct HypothesisParses {
    pub trees: Vec<ParseTree>,
    /// Whether the specialised grammar produced them.
    pub specialized: bool,
}

impl GrammarBundle {
    pub fn new(lexicon: Lexicon, general: Grammar, specialized: Grammar, table: LrTable) -> Self {
        GrammarBundle {
            lexicon,
            general,
            specialized,
            table,
        }
    }

    pub fn from_treebank(lexicon: Lexicon, general: Grammar, trees: &[ParseTree], k: usize) -> Result<Self> {
        let specialized = specialize_grammar(trees, &general, k)?;
        let table = compile_lr(&specialized);
        Ok(Self::new(lexicon, general, specialized, table))
    }

    pub fn load(lexicon: &Path, general: &Path, specialized: &Path, table: &Path) -> Result<Self> {
        let lexicon = Lexicon::load(lexicon)?;
        let general = Grammar::load(general)?;
        let specialized = Grammar::load(specialized)?;
        let table = LrTable::from_text(&read_file(table)?, &specialized)?;
        Ok(Self::new(lexicon, general, specialized, table))
    }

    /// Parse with the specialised grammar, mapping its trees back to
    /// general-grammar trees; if that yields nothing and `fallback` is set,
    /// use the general chart parser.
    pub fn parse_hypothesis<S: AsRef<str>>(&self, words: &[S], fallback: bool) -> HypothesisParses {
        let mut seen = BTreeSet::new();
        let mut trees = Vec::new();
        for t in parse_lr(&self.table, &self.specialized, &self.lexicon, words) {
            if let Some(g) = to_general(&t, &self.specialized, &self.general, &self.lexicon) {
                if seen.insert(g.signature()) {
                    trees.push(g);
                }
            }
        }
        if !trees.is_empty() {
            trees.sort_by_cached_key(|t| t.signature());
            return HypothesisParses {
                trees,
                specialized: true,
            };
        }
        HypothesisParses {
            trees: if fallback {
                parse_chart(&self.general, &self.lexicon, words)
            } else {
                Vec::new()
            },
            specialized: false,
        }
    }
}

/// Every analysis of every expanded hypothesis of one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceAnalyses {
    pub hypotheses: Vec<Hypothesis>,
    /// Per hypothesis: did the specialised grammar parse it.
    pub parsed_specialized: Vec<bool>,
    pub analyses: Vec<Analysis>,
    pub list_best: f64,
}

impl UtteranceAnalyses {
    pub fn context(&self, a: &Analysis) -> HypothesisContext {
        let h = &self.hypotheses[a.hyp_index];
        HypothesisContext {
            acoustic_score: h.acoustic_score,
            list_best: self.list_best,
            original: h.is_original(),
            parsed_specialized: self.parsed_specialized[a.hyp_index],
        }
    }

    /// Whether hypothesis `i` got any analysis.
    pub fn has_analysis(&self, i: usize) -> bool {
        self.analyses.iter().any(|a| a.hyp_index == i)
    }
}

/// Stages 1 and 2: expand the list with repaired hypotheses and analyse
/// every hypothesis.
pub fn analyze_utterance(
    utt: &Utterance,
    bundle: &GrammarBundle,
    config: &Config,
    registry: &FlagRegistry,
) -> UtteranceAnalyses {
    let hypotheses = if config.repair {
        expand_hypotheses(&bundle.lexicon, &utt.nbest, config.repair_penalty, config.span_cap)
    } else {
        utt.nbest.clone()
    };
    let mut analyses = Vec::new();
    let mut parsed_specialized = Vec::with_capacity(hypotheses.len());
    for (i, h) in hypotheses.iter().enumerate() {
        let p = bundle.parse_hypothesis(&h.words, config.fallback_general);
        parsed_specialized.push(p.specialized);
        for t in p.trees {
            analyses.push(Analysis::new(i, t, p.specialized, &bundle.general, &bundle.lexicon, registry));
        }
    }
    let list_best = hypotheses
        .iter()
        .map(|h| h.acoustic_score)
        .fold(f64::NEG_INFINITY, f64::max);
    UtteranceAnalyses {
        hypotheses,
        parsed_specialized,
        analyses,
        list_best,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Selected,
    NoAnalysisFound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub hyp_rank: usize,
    pub repaired: bool,
    pub words: String,
    pub tree: String,
    pub scores: BTreeMap<String, f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub utt_id: String,
    pub outcome: Outcome,
    /// Index into `candidates` of the chosen analysis.
    pub chosen: Option<usize>,
    pub candidates: Vec<CandidateScore>,
}

impl SelectionResult {
    pub fn chosen_candidate(&self) -> Option<&CandidateScore> {
        self.chosen.map(|i| &self.candidates[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("selection result serialises")
    }
}

/// Stage 3 on analysed hypotheses.
pub fn select_analysis(utt_id: &str, ua: &UtteranceAnalyses, model: &PreferenceModel) -> Result<SelectionResult> {
    let mut candidates = Vec::with_capacity(ua.analyses.len());
    let mut ranked = Vec::with_capacity(ua.analyses.len());
    for a in &ua.analyses {
        let ctx = ua.context(a);
        let v = model.vector(a, &ctx)?;
        let total = total_score(&v, &model.weights)?;
        let h = &ua.hypotheses[a.hyp_index];
        candidates.push(CandidateScore {
            hyp_rank: h.rank,
            repaired: !h.is_original(),
            words: h.text(),
            tree: a.tree.signature(),
            scores: v.names.iter().cloned().zip(v.values.iter().copied()).collect(),
            total,
        });
        ranked.push(RankedCandidate {
            values: v.values,
            original: h.is_original(),
            acoustic: h.acoustic_score,
        });
    }
    let chosen = select_best(&ranked, &model.weights.weights);
    Ok(SelectionResult {
        utt_id: utt_id.to_string(),
        outcome: if chosen.is_some() {
            Outcome::Selected
        } else {
            Outcome::NoAnalysisFound
        },
        chosen,
        candidates,
    })
}

/// All three stages for one utterance. The list is used as given; callers
/// truncate it to the configured length.
pub fn run_utterance(
    utt: &Utterance,
    bundle: &GrammarBundle,
    model: &PreferenceModel,
    config: &Config,
) -> Result<SelectionResult> {
    let ua = analyze_utterance(utt, bundle, config, &model.flag_registry());
    select_analysis(&utt.id, &ua, model)
}

/// Summary of a specialisation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecializeReport {
    pub general_rules: usize,
    pub specialized_rules: usize,
    pub lr_states: usize,
    pub conflict_cells: usize,
    pub treebank_size: usize,
    /// Treebank trees recovered exactly through the specialised grammar.
    pub covered: usize,
    pub mean_general_parses: f64,
    pub mean_specialized_parses: f64,
}

impl SpecializeReport {
    pub fn to_text(&self) -> String {
        format!(
            "general rules       {}\nspecialized rules   {}\nLR states           {}\nconflict cells      {}\n\
             treebank sentences  {}\ncoverage            {}/{}\nmean parses         general {:.3}  specialized {:.3}\n",
            self.general_rules,
            self.specialized_rules,
            self.lr_states,
            self.conflict_cells,
            self.treebank_size,
            self.covered,
            self.treebank_size,
            self.mean_general_parses,
            self.mean_specialized_parses
        )
    }
}

/// Specialise `general` on a treebank and compile the result.
pub fn specialize_command(
    lexicon: &Lexicon,
    general: &Grammar,
    treebank: &[TreeSpec],
    k: usize,
) -> Result<(Grammar, LrTable, SpecializeReport)> {
    if treebank.is_empty() {
        return Err(Error::Validation("treebank is empty".into()));
    }
    let trees = instantiate_treebank(treebank, general, lexicon)?;
    let specialized = specialize_grammar(&trees, general, k)?;
    let table = compile_lr(&specialized);
    let (mut covered, mut ng, mut ns) = (0, 0usize, 0usize);
    for (t, spec) in trees.iter().zip(treebank) {
        let words = t.words();
        let lr = parse_lr(&table, &specialized, lexicon, &words);
        ns += lr.len();
        ng += parse_chart(general, lexicon, &words).len();
        if lr.iter().any(|s| expansions(s, &specialized, general).contains(spec)) {
            covered += 1;
        }
    }
    let n = trees.len() as f64;
    let report = SpecializeReport {
        general_rules: general.rules().len(),
        specialized_rules: specialized.rules().len(),
        lr_states: table.num_states(),
        conflict_cells: table.conflicts().len(),
        treebank_size: trees.len(),
        covered,
        mean_general_parses: ng as f64 / n,
        mean_specialized_parses: ns as f64 / n,
    };
    Ok((specialized, table, report))
}

/// General-grammar tree for a reference: the gold tree when given, else
/// the first parse of the reference words.
pub fn reference_tree(utt: &Utterance, bundle: &GrammarBundle) -> Result<Option<ParseTree>> {
    if let Some(g) = &utt.gold {
        let t = g
            .instantiate(&bundle.general, &bundle.lexicon)
            .map_err(|m| Error::Validation(format!("gold tree for '{}': {m}", utt.id)))?;
        return Ok(Some(t));
    }
    Ok(utt
        .reference
        .as_ref()
        .and_then(|r| parse_chart(&bundle.general, &bundle.lexicon, r).into_iter().next()))
}
