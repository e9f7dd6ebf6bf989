mod common;

use jfront_core::eval::overall_ap;
use jfront_core::labels::{resolve_phrases, BoundaryLabels, NucleusLabel};
use jfront_core::text::{render_pitch, AccentPhrase, Morpheme, Pitch, PitchSequence, Sentence};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{check_exact_below_mora_accuracy, check_pitch_exhaustive, expected_pitch, single_rise_single_fall};

#[test]
fn every_pattern_up_to_eight_morae() {
    assert_eq!(check_pitch_exhaustive(8), Ok((1..=8).map(|n| n + 1).sum()));
}

#[test]
fn exact_match_never_beats_mora_accuracy_per_sentence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    check_exact_below_mora_accuracy(&mut rng, 1000).unwrap();
}

// Pooled over a corpus the two rates weigh sentences differently: one short
// exact sentence and one long wrong one invert the order.
#[test]
fn corpus_level_exact_rate_can_exceed_mora_accuracy() {
    let short = PitchSequence::parse("H").unwrap();
    let long_gold = PitchSequence(vec![Pitch::High; 100]);
    let long_pred = PitchSequence(vec![Pitch::Low; 100]);
    let r = overall_ap(&[short.clone(), long_pred], &[short, long_gold]).unwrap();
    assert_eq!(r.snt_exact, Some(0.5));
    assert_eq!(r.mora_accuracy, Some(1.0 / 101.0));
}

#[test]
fn sentences_of_mismatched_length_are_excluded() {
    let a = PitchSequence::parse("LH").unwrap();
    let b = PitchSequence::parse("LHH").unwrap();
    let r = overall_ap(&[a.clone(), a.clone()], &[b, a]).unwrap();
    assert_eq!((r.evaluated, r.excluded), (1, 1));
    assert_eq!(r.snt_exact, Some(1.0));
}

fn word(surface: &str, pron: &str, accent: u32) -> Morpheme {
    Morpheme::new(surface, "noun", pron, accent).unwrap()
}

#[test]
fn tower_sentence_renders_per_phrase() {
    let s = Sentence::new(
        "tower",
        "京都タワー上空の方に雲がある",
        vec![
            word("京都", "キョート", 1),
            word("タワー", "タワー", 1),
            word("上空", "ジョークー", 0),
            word("の", "ノ", 0),
            word("方", "ホー", 1),
            word("に", "ニ", 0),
            word("雲", "クモ", 1),
            word("が", "ガ", 0),
            word("ある", "アル", 1),
        ],
    )
    .unwrap();
    let b = BoundaryLabels::new(vec![true, false, true, false, true, false, true, false, true]);
    use NucleusLabel::*;
    let labels = [Flat, Nuc(1), Keep, Keep, Keep, Keep, Keep, Keep, Keep];
    let (phrases, warnings) = resolve_phrases(&s, &b.spans(), &labels);
    assert!(warnings.is_empty());
    let nuclei: Vec<u32> = phrases.iter().map(|p| p.nucleus).collect();
    assert_eq!(nuclei, [4, 0, 1, 1, 1]);
    // キョートタワー | ジョークーノ | ホーニ | クモガ | アル
    let got = render_pitch(&phrases, &s).unwrap().to_string();
    assert_eq!(got, ["LHHHLL", "LHHHH", "HLL", "HLL", "HL"].concat());
}

proptest! {
    // A sentence renders as the concatenation of its phrase patterns.
    #[test]
    fn sentence_rendering_concatenates_phrases(
        sizes in prop::collection::vec(1usize..5, 1..6),
        picks in prop::collection::vec(0usize..100, 6),
    ) {
        let morphemes: Vec<Morpheme> = sizes.iter().map(|&n| word(&"ア".repeat(n), &"ア".repeat(n), 0)).collect();
        let raw: String = morphemes.iter().map(|m| m.surface.as_str()).collect();
        let s = Sentence::new("p", raw, morphemes).unwrap();
        let phrases: Vec<AccentPhrase> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| AccentPhrase { span: i..i + 1, nucleus: (picks[i] % (n + 1)) as u32 })
            .collect();
        let got = render_pitch(&phrases, &s).unwrap();
        let want: Vec<Pitch> = phrases
            .iter()
            .zip(&sizes)
            .flat_map(|(p, &n)| expected_pitch(n, p.nucleus as usize))
            .collect();
        prop_assert_eq!(got.labels(), &want[..]);
        let mut start = 0;
        for &n in &sizes {
            prop_assert!(single_rise_single_fall(&want[start..start + n]));
            start += n;
        }
    }
}
