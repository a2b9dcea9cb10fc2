//! Evaluation against references: combined selection, two baselines, the
//! oracle ceiling, and the breakdown of decisions on suggested repairs.

use serde::Serialize;

use super::{analyze_utterance, select_analysis, Config, GrammarBundle, SelectionResult, Utterance};
use crate::error::{Error, Result};
use crate::preference::PreferenceModel;

/// Decisions on utterances for which a repair was suggested, split by
/// whether the speaker actually repaired. Rows: no analysis found, right
/// repair chosen, wrong repair chosen, non-repair chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RepairMatrix {
    pub actual: [usize; 4],
    pub false_alarm: [usize; 4],
    /// Repair suggested but the speaker's words are unknown.
    pub unclear: usize,
}

pub const MATRIX_ROWS: [&str; 4] = ["No analysis found", "Right repair chosen", "Wrong repair chosen", "Non-repair chosen"];

impl RepairMatrix {
    pub const NO_ANALYSIS: usize = 0;
    pub const RIGHT: usize = 1;
    pub const WRONG: usize = 2;
    pub const NON_REPAIR: usize = 3;

    pub fn totals(&self) -> (usize, usize) {
        (self.actual.iter().sum(), self.false_alarm.iter().sum())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<22}{:>8}{:>8}\n", "", "Actual", "False");
        s += &format!("{:<22}{:>8}{:>8}\n", "", "repairs", "alarms");
        for (i, name) in MATRIX_ROWS.iter().enumerate() {
            // A right repair is impossible when there was nothing to repair.
            let fa = if i == Self::RIGHT {
                "-".to_string()
            } else {
                self.false_alarm[i].to_string()
            };
            s += &format!("{:<22}{:>8}{:>8}\n", name, self.actual[i], fa);
        }
        let (a, f) = self.totals();
        s += &format!("{:<22}{:>8}{:>8}\n", "Total", a, f);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rate {
    pub correct: usize,
    pub total: usize,
}

impl Rate {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub utterances: usize,
    pub combined: Rate,
    /// The recognizer's top hypothesis.
    pub speech_only: Rate,
    /// The best-ranked original hypothesis with any analysis.
    pub first_parsable: Rate,
    /// Reference present among the expanded hypotheses.
    pub oracle: Rate,
    /// Reference present among the recognizer's own hypotheses.
    pub oracle_original: Rate,
    pub no_analysis: usize,
    pub repair_suggested: usize,
    pub repair_matrix: RepairMatrix,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let line = |name: &str, r: &Rate| format!("{:<26}{:>5}/{:<5}{:>8.2}%\n", name, r.correct, r.total, 100.0 * r.value());
        let mut s = format!("utterances                {}\n", self.utterances);
        s += &line("combined selection", &self.combined);
        s += &line("speech only", &self.speech_only);
        s += &line("first parsable", &self.first_parsable);
        s += &line("oracle (expanded list)", &self.oracle);
        s += &line("oracle (recognizer list)", &self.oracle_original);
        s += &format!("no analysis found         {}\n", self.no_analysis);
        s += &format!("repair suggested          {}\n\n", self.repair_suggested);
        s += &self.repair_matrix.to_text();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn same(a: &[String], b: &str) -> bool {
    a.join(" ").to_lowercase() == b.to_lowercase()
}

/// Evaluate `model` on utterances with references, truncating each list to
/// `config.eval_n`.
pub fn evaluate(
    corpus: &[Utterance],
    bundle: &GrammarBundle,
    model: &PreferenceModel,
    config: &Config,
) -> Result<(EvalReport, Vec<SelectionResult>)> {
    if let Some(u) = corpus.iter().find(|u| u.reference.is_none()) {
        return Err(Error::Validation(format!("utterance '{}' has no reference", u.id)));
    }
    let registry = model.flag_registry();
    let n = corpus.len();
    let rate = || Rate { correct: 0, total: n };
    let mut r = EvalReport {
        utterances: n,
        combined: rate(),
        speech_only: rate(),
        first_parsable: rate(),
        oracle: rate(),
        oracle_original: rate(),
        no_analysis: 0,
        repair_suggested: 0,
        repair_matrix: RepairMatrix::default(),
    };
    let mut selections = Vec::with_capacity(n);
    for full in corpus {
        let utt = full.truncated(config.eval_n);
        let reference = utt.reference.as_ref().expect("checked above");
        let ua = analyze_utterance(&utt, bundle, config, &registry);
        let sel = select_analysis(&utt.id, &ua, model)?;
        let chosen = sel.chosen_candidate();
        let combined_ok = chosen.is_some_and(|c| same(reference, &c.words));
        r.combined.correct += usize::from(combined_ok);
        r.speech_only.correct += usize::from(utt.nbest.first().is_some_and(|h| &h.words == reference));
        let first_parsed = (0..ua.hypotheses.len()).find(|&i| ua.hypotheses[i].is_original() && ua.has_analysis(i));
        r.first_parsable.correct += usize::from(first_parsed.is_some_and(|i| &ua.hypotheses[i].words == reference));
        r.oracle.correct += usize::from(ua.hypotheses.iter().any(|h| &h.words == reference));
        r.oracle_original.correct += usize::from(utt.nbest.iter().any(|h| &h.words == reference));
        if chosen.is_none() {
            r.no_analysis += 1;
        }
        if ua.hypotheses.iter().any(|h| !h.is_original()) {
            r.repair_suggested += 1;
            let row = match chosen {
                None => RepairMatrix::NO_ANALYSIS,
                Some(c) if !c.repaired => RepairMatrix::NON_REPAIR,
                Some(_) if combined_ok && utt.has_actual_repair() => RepairMatrix::RIGHT,
                Some(_) => RepairMatrix::WRONG,
            };
            match &utt.spoken {
                None => r.repair_matrix.unclear += 1,
                Some(_) if utt.has_actual_repair() => r.repair_matrix.actual[row] += 1,
                Some(_) => r.repair_matrix.false_alarm[row] += 1,
            }
        }
        selections.push(sel);
    }
    Ok((r, selections))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::tests::small_bundle;
    use crate::repair::Hypothesis;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn utt(id: &str, hyps: &[&str], reference: &str, spoken: &str) -> Utterance {
        Utterance {
            id: id.into(),
            nbest: hyps
                .iter()
                .enumerate()
                .map(|(i, w)| Hypothesis::original(i + 1, toks(w), -(i as f64)))
                .collect(),
            reference: Some(toks(reference)),
            gold: None,
            spoken: Some(toks(spoken)),
        }
    }

    #[test]
    fn perfect_corpus() {
        let b = small_bundle();
        let corpus = vec![
            utt("a", &["show the flights", "show a flights"], "show the flights", "show the flights"),
            utt("b", &["boston"], "boston", "boston"),
        ];
        let (r, sel) = evaluate(&corpus, &b, &PreferenceModel::speech_only(), &Config::default()).unwrap();
        for rate in [r.combined, r.speech_only, r.first_parsable, r.oracle] {
            assert_eq!(rate, Rate { correct: 2, total: 2 });
        }
        assert_eq!(sel.len(), 2);
        assert_eq!(r.repair_suggested, 0);
    }

    #[test]
    fn matrix_cells() {
        let b = small_bundle();
        let corpus = vec![
            // Actual repair, repaired version chosen.
            utt(
                "a",
                &["list list flights between oakland and denver"],
                "list flights between oakland and denver",
                "list list flights between oakland and denver",
            ),
            // Recognizer doubled a word; nothing parses.
            utt("b", &["boston boston boston"], "boston", "boston"),
            // Nothing to repair, original chosen.
            utt("c", &["list list the flights", "show the flights"], "show the flights", "show the flights"),
        ];
        let (r, _) = evaluate(&corpus, &b, &PreferenceModel::speech_only(), &Config::default()).unwrap();
        assert_eq!(r.repair_suggested, 3);
        assert_eq!(r.repair_matrix.actual[RepairMatrix::RIGHT], 1);
        assert_eq!(r.repair_matrix.false_alarm[RepairMatrix::NO_ANALYSIS], 1);
        assert_eq!(r.repair_matrix.totals(), (1, 2));
        assert!(r.oracle.correct >= r.combined.correct);
        assert_eq!(r.speech_only.correct, 0);
        assert_eq!(r.first_parsable.correct, 1);
        let text = r.to_text();
        assert!(text.contains("Right repair chosen") && text.contains("-"));
        assert!(r.to_json().contains("\"repair_matrix\""));
    }

    #[test]
    fn missing_reference_rejected() {
        let mut u = utt("a", &["boston"], "boston", "boston");
        u.reference = None;
        let res = evaluate(&[u], &small_bundle(), &PreferenceModel::speech_only(), &Config::default());
        assert!(matches!(res, Err(Error::Validation(_))));
    }
}
