mod common;

use jfront_core::labels::{resolve_phrases, NucleusLabel};
use jfront_core::rules::{rule_apbp, rule_sandhi, rule_sandhi_sentence, ApbpExceptions, SandhiRuleTable};

use common::toy_tokenizer;

/// Hand-annotated boundaries over the toy tokenizer's segmentation.
const HAND: [(&str, &str, &str); 10] = [
    ("京都タワー上空の方に雲がある", "京都 タワー 上空 の 方 に 雲 が ある", "101010101"),
    ("猫が公園で魚を食べる。", "猫 が 公園 で 魚 を 食べる 。", "10101010"),
    ("山田さんは先生です。", "山田 さん は 先生 です 。", "100100"),
    ("先生のお話を聞く。", "先生 の お 話 を 聞く 。", "1010010"),
    ("よく電車で学校へ行く。", "よく 電車 で 学校 へ 行く 。", "1101010"),
    ("東京駅で先生が本を読む。", "東京 駅 で 先生 が 本 を 読む 。", "100101010"),
    ("とても寒いです。", "とても 寒い です 。", "1100"),
    ("あの方は友達です。", "あの 方 は 友達 です 。", "110100"),
    ("大阪城の空は高い。", "大阪 城 の 空 は 高い 。", "1001010"),
    ("辛いカレーを食べる。", "辛い カレー を 食べる 。", "11010"),
];

fn flags(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

#[test]
fn rule_apbp_matches_hand_annotation() {
    let tok = toy_tokenizer();
    let ex = ApbpExceptions::builtin();
    for (text, words, marks) in HAND {
        let s = tok.tokenize(text);
        let got: Vec<&str> = s.morphemes.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(got.join(" "), words);
        assert_eq!(rule_apbp(&s, &ex).flags(), flags(marks), "{text}");
    }
}

#[test]
fn tower_compound_is_traced_through_the_table() {
    let tok = toy_tokenizer();
    let s = tok.tokenize("京都タワー");
    assert_eq!(s.morphemes[1].accent_combination_type, "C1");
    assert_eq!(s.morphemes[1].mora_count(), 3);
    let labels = rule_sandhi(&s.morphemes, &SandhiRuleTable::builtin());
    assert_eq!(labels, [NucleusLabel::Flat, NucleusLabel::Nuc(1)]);
    // キョート has three morae, so the nucleus lands on the first mora of タワー.
    let (phrases, _) = resolve_phrases(&s, &[0..2], &labels);
    assert_eq!(phrases[0].nucleus, 4);
}

#[test]
fn sandhi_runs_per_phrase() {
    let tok = toy_tokenizer();
    let s = tok.tokenize("京都タワー上空の方に雲がある");
    let spans = rule_apbp(&s, &ApbpExceptions::builtin()).spans();
    let labels = rule_sandhi_sentence(&s, &spans, &SandhiRuleTable::builtin());
    // タワー and 上空 are adjacent nouns but sit in different phrases.
    assert_eq!(labels[2], NucleusLabel::Keep);
    assert_eq!(&labels[..2], [NucleusLabel::Flat, NucleusLabel::Nuc(1)]);
}

#[test]
fn custom_table_rows_win_in_order() {
    let table = SandhiRuleTable::parse("C1\tnoun+noun\t3\tNUC2\nC1\tnoun+noun\t*\tNUC1\n*\t*\t*\tNONE\n").unwrap();
    let tok = toy_tokenizer();
    let s = tok.tokenize("京都タワー");
    assert_eq!(rule_sandhi(&s.morphemes, &table), [NucleusLabel::Flat, NucleusLabel::Nuc(2)]);
    let s = tok.tokenize("京都駅");
    // 駅 is C4; no C4 row, so the default leaves both words alone.
    assert_eq!(rule_sandhi(&s.morphemes, &table), [NucleusLabel::Keep, NucleusLabel::Keep]);
}
