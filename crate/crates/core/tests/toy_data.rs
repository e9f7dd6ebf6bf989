mod common;

use jfront_core::rules::{rule_apbp, rule_sandhi_sentence, ApbpExceptions, SandhiRuleTable};

use common::{toy_corpus, toy_dir, toy_tokenizer};

#[test]
fn corpus_has_fifty_sentences() {
    let c = toy_corpus();
    assert_eq!(c.len(), 50);
    let targets: usize = c.iter().map(|s| s.targets().len()).sum();
    assert!(targets > 20);
}

#[test]
fn tokenizer_reproduces_gold_segmentation() {
    let tok = toy_tokenizer();
    for s in toy_corpus().iter() {
        let got = tok.tokenize(&s.sentence.raw);
        let surfaces = |x: &jfront_core::text::Sentence| x.morphemes.iter().map(|m| m.surface.clone()).collect::<Vec<_>>();
        assert_eq!(surfaces(&got), surfaces(&s.sentence), "{}", s.id());
    }
}

#[test]
fn rule_files_match_builtins() {
    let table = SandhiRuleTable::load(&toy_dir().join("sandhi.tsv")).unwrap();
    assert_eq!(table, SandhiRuleTable::builtin());
    let ex = ApbpExceptions::load(&toy_dir().join("apbp_exceptions.tsv")).unwrap();
    assert_eq!(ex, ApbpExceptions::builtin());
}

// The toy annotation was produced with the same conventions as the rule
// baselines, so both reproduce it exactly.
#[test]
fn rules_reproduce_toy_annotation() {
    let table = SandhiRuleTable::builtin();
    let ex = ApbpExceptions::builtin();
    for s in toy_corpus().iter() {
        assert_eq!(rule_apbp(&s.sentence, &ex), s.boundaries, "{}", s.id());
        assert_eq!(rule_sandhi_sentence(&s.sentence, &s.spans(), &table), s.nucleus_labels, "{}", s.id());
    }
}
