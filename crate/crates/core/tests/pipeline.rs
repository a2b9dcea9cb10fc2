//! End-to-end properties on the shipped data.

use std::path::{Path, PathBuf};

use nbest_core::grammar::Grammar;
use nbest_core::lexicon::Lexicon;
use nbest_core::pipeline::io::load_corpus;
use nbest_core::pipeline::{evaluate, run_utterance, specialize_command, train_pipeline, Config, GrammarBundle, Utterance};
use nbest_core::preference::PreferenceModel;
use nbest_core::repair::detect_repairs;
use nbest_core::specialize::load_treebank;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn bundle() -> GrammarBundle {
    let d = data();
    GrammarBundle::load(
        &d.join("lexicon.tsv"),
        &d.join("grammar.txt"),
        &d.join("specialized.txt"),
        &d.join("lr_table.txt"),
    )
    .unwrap()
}

fn corpus(name: &str) -> Vec<Utterance> {
    load_corpus(&data().join(format!("{name}.nbest")), Some(&data().join(format!("{name}.ref")))).unwrap()
}

fn shipped_model() -> PreferenceModel {
    PreferenceModel::load(&data().join("model.txt")).unwrap()
}

#[test]
fn slt0_ablation_does_not_beat_full_training() {
    let b = bundle();
    let cfg = Config::default();
    let train = corpus("train");
    let eval = corpus("eval");
    let slt0 = Config {
        slt0_scoring: true,
        ..cfg.clone()
    };
    let (ablated, report) = train_pipeline(&train, &b, &slt0).unwrap();
    assert_eq!(report.trajectory.len(), 2);
    let (full, _) = evaluate(&eval, &b, &shipped_model(), &cfg).unwrap();
    let (abl, _) = evaluate(&eval, &b, &ablated, &cfg).unwrap();
    assert!(
        abl.combined.correct <= full.combined.correct,
        "slt0 {} > full {}",
        abl.combined.correct,
        full.combined.correct
    );
}

#[test]
fn repair_off_leaves_unrepairable_utterances_alone() {
    let b = bundle();
    let model = shipped_model();
    let on = Config::default();
    let off = Config {
        repair: false,
        ..Config::default()
    };
    let mut checked = 0;
    for u in corpus("eval") {
        let u = u.truncated(on.eval_n);
        if u.nbest.iter().any(|h| !detect_repairs(&b.lexicon, &h.words, on.span_cap).is_empty()) {
            continue;
        }
        assert_eq!(
            run_utterance(&u, &b, &model, &on).unwrap(),
            run_utterance(&u, &b, &model, &off).unwrap(),
            "{}",
            u.id
        );
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn selections_are_deterministic_and_come_from_the_list() {
    let b = bundle();
    let model = shipped_model();
    let cfg = Config::default();
    for u in corpus("eval").iter().take(60) {
        let u = u.truncated(cfg.eval_n);
        let a = run_utterance(&u, &b, &model, &cfg).unwrap();
        assert_eq!(a, run_utterance(&u, &b, &model, &cfg).unwrap());
        if let Some(c) = a.chosen_candidate() {
            let originals = u.nbest.iter().any(|h| h.rank == c.hyp_rank && h.text() == c.words);
            assert!(originals || c.repaired, "{}", u.id);
            assert!(c.hyp_rank >= 1);
        }
    }
}

#[test]
fn higher_threshold_gives_fewer_rules() {
    let lex = Lexicon::load(data().join("lexicon.tsv")).unwrap();
    let general = Grammar::load(data().join("grammar.txt")).unwrap();
    let specs = load_treebank(data().join("treebank.txt")).unwrap();
    let (g1, _, r1) = specialize_command(&lex, &general, &specs, 1).unwrap();
    let (g2, _, r2) = specialize_command(&lex, &general, &specs, 2).unwrap();
    assert!(g2.rules().len() < g1.rules().len());
    assert_eq!(r1.covered, r1.treebank_size);
    assert!(r2.covered <= r1.covered);
    assert!(specialize_command(&lex, &general, &[], 1).is_err());
}

#[test]
fn baselines_and_oracle_are_consistent() {
    let b = bundle();
    let (r, sel) = evaluate(&corpus("eval"), &b, &shipped_model(), &Config::default()).unwrap();
    assert_eq!(sel.len(), r.utterances);
    assert!(r.oracle.correct >= r.combined.correct);
    assert!(r.oracle.correct >= r.oracle_original.correct);
    assert!(r.oracle_original.correct >= r.speech_only.correct);
    let (speech, _) = evaluate(&corpus("eval"), &b, &PreferenceModel::speech_only(), &Config::default()).unwrap();
    assert_eq!(speech.oracle, r.oracle);
}
