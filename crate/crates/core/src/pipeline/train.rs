//! Training a preference model on recognizer-style N-best lists with gold
//! references.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{analyze_utterance, reference_tree, Config, GrammarBundle, UtteranceAnalyses, Utterance};
use crate::grammar::ParseTree;
use crate::repair::Hypothesis;
use crate::analysis::{Analysis, FlagRegistry};
use crate::error::{Error, Result};
use crate::preference::train::{phase1_data_centered, phase2_objective};
use crate::preference::{
    similarity_trees, train_object_scores, ObjectScoreTable, train_scaling_phase1, train_scaling_phase2, Phase2Config, Phase2Outcome, PreferenceModel,
    RankedCandidate, ScalingFactors, TableScoring, TrainingMeta, TrainingSentence, SPEECH,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub utterances: usize,
    /// Utterances without a usable reference tree.
    pub skipped: usize,
    /// Utterances whose correct analysis is among the candidates.
    pub with_correct: usize,
    pub analyses: usize,
    pub phase1_top1: usize,
    pub phase2_top1: usize,
    pub trajectory: Vec<usize>,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let traj: Vec<String> = self.trajectory.iter().map(|t| t.to_string()).collect();
        format!(
            "utterances {} (skipped {}), with correct analysis {}, analyses {}\n\
             phase 1 top-1 {}/{}\nphase 2 top-1 {}/{}\ntrajectory {}\n",
            self.utterances,
            self.skipped,
            self.with_correct,
            self.analyses,
            self.phase1_top1,
            self.with_correct,
            self.phase2_top1,
            self.with_correct,
            traj.join(" ")
        )
    }
}

struct Labelled {
    ua: UtteranceAnalyses,
    good: Option<usize>,
    reference: ParseTree,
}

/// Train object tables (good = the analysis matching the gold tree, bad =
/// every other analysis), then scaling factors by least squares against
/// similarity to the reference and by hill climbing on top-1 accuracy.
pub fn train_pipeline(corpus: &[Utterance], bundle: &GrammarBundle, config: &Config) -> Result<(PreferenceModel, TrainReport)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Validation("training corpus is empty".into()));
    }
    if let Some(u) = corpus.iter().find(|u| u.reference.is_none()) {
        return Err(Error::Validation(format!("training utterance '{}' has no reference", u.id)));
    }
    let registry = FlagRegistry {
        rule_counters: config
            .functions
            .iter()
            .filter_map(|f| f.strip_prefix("rule:").map(str::to_string))
            .collect(),
    };
    let mut labelled = Vec::new();
    let mut reference_only = Vec::new();
    let mut skipped = 0;
    for full in corpus {
        let utt = full.truncated(config.eval_n);
        let Some(reference) = reference_tree(&utt, bundle)? else {
            skipped += 1;
            continue;
        };
        let target = utt.reference.clone().expect("checked above");
        if config.slt0_scoring {
            let said = Utterance {
                nbest: vec![Hypothesis::original(1, target.clone(), 0.0)],
                ..utt.clone()
            };
            let plain = Config {
                repair: false,
                ..config.clone()
            };
            reference_only.push(label(analyze_utterance(&said, bundle, &plain, &registry), &target, &reference));
        }
        labelled.push(label(analyze_utterance(&utt, bundle, config, &registry), &target, &reference));
    }

    let (tables, sentences, w1, residual, outcome) = if config.slt0_scoring {
        // Tables and non-speech weights see only analyses of the reference
        // strings; the speech weight is then tuned alone on recognizer output.
        let (tables, ref_sentences) = training_vectors(&reference_only, config, TableScoring::FrequencyOnly)?;
        let (rows, targets) = phase1_data_centered(&ref_sentences);
        let (w1, residual) = train_scaling_phase1(&rows, &targets, config.ridge)?;
        let outcome = train_scaling_phase2(&ref_sentences, &w1, phase2_config(config));
        let model = provisional(config, tables);
        let sentences = nbest_vectors(&labelled, &model, config)?;
        let speech = config.functions.iter().position(|f| f == SPEECH).expect("validated");
        let weights = tune_one(&sentences, &outcome.weights, speech);
        let trajectory = vec![phase2_objective(&sentences, &outcome.weights), phase2_objective(&sentences, &weights)];
        (model.tables, sentences, w1, residual, Phase2Outcome { weights, trajectory })
    } else {
        let (tables, sentences) = training_vectors(&labelled, config, TableScoring::Discriminative)?;
        let (rows, targets) = phase1_data_centered(&sentences);
        let (w1, residual) = train_scaling_phase1(&rows, &targets, config.ridge)?;
        let outcome = train_scaling_phase2(&sentences, &w1, phase2_config(config));
        (tables, sentences, w1, residual, outcome)
    };
    let mut model = provisional(config, tables);
    let analyses: usize = sentences.iter().map(|s| s.candidates.len()).sum();
    let with_correct = sentences.iter().filter(|s| s.correct.is_some()).count();
    let report = TrainReport {
        utterances: corpus.len(),
        skipped,
        with_correct,
        analyses,
        phase1_top1: phase2_objective(&sentences, &w1),
        phase2_top1: *outcome.trajectory.last().expect("trajectory has a start"),
        trajectory: outcome.trajectory.clone(),
    };
    model.weights = ScalingFactors {
        names: config.functions.clone(),
        weights: outcome.weights,
        meta: TrainingMeta {
            phase: 2,
            phase1_residual: residual,
            trajectory: outcome.trajectory,
            sentences: sentences.len(),
        },
    };
    model.validate()?;
    Ok((model, report))
}

fn label(ua: UtteranceAnalyses, target: &[String], reference: &ParseTree) -> Labelled {
    let sig = reference.signature();
    let good = ua
        .analyses
        .iter()
        .position(|a| a.words == target && a.tree.signature() == sig);
    Labelled {
        ua,
        good,
        reference: reference.clone(),
    }
}

fn phase2_config(config: &Config) -> Phase2Config {
    Phase2Config {
        max_sweeps: config.max_sweeps,
        delta: config.phase2_delta,
    }
}

/// Full tables plus training vectors scored with tables fitted without the
/// sentence's own fold.
fn training_vectors(
    labelled: &[Labelled],
    config: &Config,
    scoring: TableScoring,
) -> Result<(BTreeMap<String, ObjectScoreTable>, Vec<TrainingSentence>)> {
    let all: Vec<&Labelled> = labelled.iter().collect();
    let tables = build_tables(&all, config, scoring)?;
    let folds = config.table_folds.min(labelled.len()).max(1);
    if folds == 1 {
        let model = provisional(config, tables);
        let sentences = nbest_vectors(labelled, &model, config)?;
        return Ok((model.tables, sentences));
    }
    let mut fold_models = Vec::with_capacity(folds);
    for f in 0..folds {
        let rest: Vec<&Labelled> = labelled.iter().enumerate().filter(|(i, _)| i % folds != f).map(|(_, l)| l).collect();
        fold_models.push(provisional(config, build_tables(&rest, config, scoring)?));
    }
    let mut sentences = Vec::with_capacity(labelled.len());
    for (i, l) in labelled.iter().enumerate() {
        sentences.push(sentence(l, &fold_models[i % folds], config)?);
    }
    Ok((tables, sentences))
}

fn nbest_vectors(labelled: &[Labelled], model: &PreferenceModel, config: &Config) -> Result<Vec<TrainingSentence>> {
    labelled.iter().map(|l| sentence(l, model, config)).collect()
}

fn sentence(l: &Labelled, model: &PreferenceModel, config: &Config) -> Result<TrainingSentence> {
    let mut candidates = Vec::with_capacity(l.ua.analyses.len());
    let mut similarities = Vec::with_capacity(l.ua.analyses.len());
    for a in &l.ua.analyses {
        let v = model.vector(a, &l.ua.context(a))?;
        let h = &l.ua.hypotheses[a.hyp_index];
        candidates.push(RankedCandidate {
            values: v.values,
            original: h.is_original(),
            acoustic: h.acoustic_score,
        });
        similarities.push(similarity_trees(&a.tree, &l.reference, config.word_weight));
    }
    Ok(TrainingSentence {
        candidates,
        correct: l.good,
        similarities,
    })
}

/// Trial-and-error search for one weight over a fixed logarithmic grid,
/// others held; the first best grid value wins.
fn tune_one(sentences: &[TrainingSentence], w: &[f64], index: usize) -> Vec<f64> {
    let mut best = w.to_vec();
    let mut best_score = phase2_objective(sentences, w);
    for k in -16..=16 {
        let mut trial = w.to_vec();
        trial[index] = 10f64.powf(f64::from(k) / 4.0);
        let score = phase2_objective(sentences, &trial);
        if score > best_score {
            best = trial;
            best_score = score;
        }
    }
    best
}

fn build_tables(labelled: &[&Labelled], config: &Config, scoring: TableScoring) -> Result<BTreeMap<String, ObjectScoreTable>> {
    let mut tables = BTreeMap::new();
    for kind in config.combining_functions() {
        let mut data: Vec<(Vec<String>, bool)> = Vec::new();
        for l in labelled {
            for (i, a) in l.ua.analyses.iter().enumerate() {
                data.push((objects(a, &kind), l.good == Some(i)));
            }
        }
        let t = train_object_scores(&kind, &data, config.alpha, scoring)?;
        tables.insert(kind, t);
    }
    Ok(tables)
}

fn provisional(config: &Config, tables: BTreeMap<String, ObjectScoreTable>) -> PreferenceModel {
    let n = config.functions.len();
    PreferenceModel {
        functions: config.functions.clone(),
        combine: config.combine,
        tables,
        weights: ScalingFactors::new(config.functions.clone(), vec![1.0; n]),
    }
}

fn objects(a: &Analysis, kind: &str) -> Vec<String> {
    a.objects(kind).expect("combining kind has objects")
}
