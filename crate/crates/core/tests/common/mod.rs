#![allow(dead_code)]

use std::path::PathBuf;

use jfront_core::corpus::{load_corpus, AnnotatedCorpus};
use jfront_core::lexicon::{ConnectionMatrix, Lexicon, Tokenizer};

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

pub fn toy_lexicon() -> Lexicon {
    Lexicon::load(&toy_dir().join("lexicon.tsv")).unwrap()
}

pub fn toy_tokenizer() -> Tokenizer {
    let matrix = ConnectionMatrix::load(&toy_dir().join("matrix.txt")).unwrap();
    Tokenizer::new(toy_lexicon(), matrix).unwrap()
}

pub fn toy_corpus() -> AnnotatedCorpus {
    load_corpus(&toy_dir().join("corpus.txt")).unwrap()
}

use jfront_core::eval::{anpp_accuracy, apbp_f1, pd_accuracy, BoundarySubset, PhraseSubset};
use jfront_core::features::FeatureExtractor;
use jfront_core::implicit::ImplicitProvider;
use jfront_core::model::{CandidateInventory, ModelConfig, TaggerModel, Task};
use jfront_core::predict::{anpp_predict, apbp_predict, pd_predict, train_tagger, TrainSetup};
use jfront_neural::{Plateau, TrainOutcome, TrainSchedule};

/// Trains `task` on the toy corpus and scores it on the same corpus. The
/// learning rate follows the training loss because there is no held-out set.
pub fn overfit(task: Task, seed: u64) -> TrainOutcome<TaggerModel<f32>> {
    let corpus = toy_corpus();
    let mut config = ModelConfig::new(task);
    config.hidden = 32;
    config.seed = seed;
    let mut inventory = CandidateInventory::default();
    inventory.add_lexicon_homographs(&toy_lexicon());
    let setup = TrainSetup {
        config,
        schedule: TrainSchedule {
            max_epochs: Some(200),
            plateau: Plateau::TrainingLoss,
            seed,
            ..TrainSchedule::default()
        },
        extractor: FeatureExtractor::default(),
        inventory,
        provider: &ImplicitProvider::None,
    };
    train_tagger(setup, &corpus, &corpus).unwrap()
}

/// Task metric recomputed through the prediction API and the evaluation
/// module rather than the trainer's internal scoring.
pub fn rescore(model: &TaggerModel<f32>, corpus: &AnnotatedCorpus, provider: &ImplicitProvider) -> f64 {
    match model.task() {
        Task::Pd => {
            let mut pred = Vec::new();
            let mut gold = Vec::new();
            for s in corpus.iter() {
                let p = pd_predict(model, &s.sentence, provider).unwrap();
                gold.push(p.iter().map(|(i, _)| s.sentence.morphemes[*i].pronunciation().to_string()).collect());
                pred.push(p.into_iter().map(|(_, r)| r).collect::<Vec<_>>());
            }
            pd_accuracy(&pred, &gold).unwrap().unwrap()
        }
        Task::Apbp => {
            let pred: Vec<_> = corpus.iter().map(|s| apbp_predict(model, &s.sentence, provider).unwrap()).collect();
            let gold: Vec<_> = corpus.iter().map(|s| s.boundaries.clone()).collect();
            let sents: Vec<_> = corpus.iter().map(|s| s.sentence.clone()).collect();
            apbp_f1(&pred, &gold, &sents, BoundarySubset::All).unwrap().unwrap_or(1.0)
        }
        Task::Anpp => {
            let pred: Vec<_> = corpus
                .iter()
                .map(|s| anpp_predict(model, &s.sentence, &s.spans(), provider).unwrap().phrases)
                .collect();
            let gold: Vec<_> = corpus.iter().map(|s| s.gold_phrases().0).collect();
            anpp_accuracy(&pred, &gold, PhraseSubset::All).unwrap().unwrap()
        }
    }
}

use jfront_core::lexicon::{Analysis, LexiconEntry};
use jfront_core::text::Morpheme;
use rand::Rng;

/// A random tokenizer over a four-kana alphabet and a text whose lattice has
/// at most `max_nodes` nodes.
pub fn random_tokenizer_case<R: Rng>(rng: &mut R, max_nodes: usize) -> (Tokenizer, String) {
    const ALPHABET: [char; 4] = ['ア', 'イ', 'ウ', 'エ'];
    loop {
        let text: String = (0..rng.gen_range(1..=6)).map(|_| ALPHABET[rng.gen_range(0..4)]).collect();
        let chars: Vec<char> = text.chars().collect();
        let mut entries = Vec::new();
        for k in 0..rng.gen_range(1..=8) {
            let surface: String = if rng.gen_bool(0.8) {
                let a = rng.gen_range(0..chars.len());
                let b = rng.gen_range(a + 1..=chars.len().min(a + 3));
                chars[a..b].iter().collect()
            } else {
                (0..rng.gen_range(1..=3)).map(|_| ALPHABET[rng.gen_range(0..4)]).collect()
            };
            let m = Morpheme::new(surface.clone(), format!("p{k}"), surface, 0).unwrap();
            entries.push(LexiconEntry {
                left_id: rng.gen_range(0..4),
                right_id: rng.gen_range(0..4),
                // A narrow range makes equal-cost ties common.
                cost: rng.gen_range(-5..20) * 10,
                morpheme: m,
            });
        }
        let costs = (0..16).map(|_| rng.gen_range(-3..10) * 10).collect();
        let matrix = ConnectionMatrix::new(4, 4, costs).unwrap();
        let tok = Tokenizer::new(Lexicon::new(entries), matrix)
            .unwrap()
            .with_unknown_cost(rng.gen_range(5..30) * 10);
        if lattice_size(&tok, &chars) <= max_nodes {
            return (tok, text);
        }
    }
}

fn matches_at<'a>(tok: &'a Tokenizer, chars: &'a [char], p: usize) -> impl Iterator<Item = (usize, &'a LexiconEntry)> + 'a {
    tok.lexicon().entries().iter().enumerate().filter(move |(_, e)| {
        let s: Vec<char> = e.surface().chars().collect();
        chars[p..].starts_with(&s)
    })
}

fn lattice_size(tok: &Tokenizer, chars: &[char]) -> usize {
    (0..chars.len()).map(|p| matches_at(tok, chars, p).count().max(1)).sum()
}

/// One path: total cost, tie-break keys, and `(surface, pos)` per word.
pub type Path = (i64, Vec<(String, String)>);

/// Every lattice path, sorted by cost, word count, surfaces, then entry order
/// with unknown words last.
pub fn enumerate_paths(tok: &Tokenizer, text: &str) -> Vec<Path> {
    let chars: Vec<char> = text.chars().collect();
    let m = tok.matrix();
    let mut out: Vec<(i64, usize, Vec<String>, Vec<usize>, Vec<(String, String)>)> = Vec::new();
    let mut stack = vec![(0usize, 0u16, 0i64, Vec::<(String, String, usize)>::new())];
    while let Some((p, prev_right, cost, words)) = stack.pop() {
        if p == chars.len() {
            let total = cost + m.cost(prev_right, 0) as i64;
            out.push((
                total,
                words.len(),
                words.iter().map(|w| w.0.clone()).collect(),
                words.iter().map(|w| w.2).collect(),
                words.iter().map(|w| (w.0.clone(), w.1.clone())).collect(),
            ));
            continue;
        }
        let mut any = false;
        for (i, e) in matches_at(tok, &chars, p) {
            any = true;
            let mut w = words.clone();
            w.push((e.surface().to_string(), e.morpheme.pos.clone(), i));
            let c = cost + m.cost(prev_right, e.left_id) as i64 + e.cost as i64;
            stack.push((p + e.surface().chars().count(), e.right_id, c, w));
        }
        if !any {
            let mut w = words.clone();
            w.push((chars[p].to_string(), "unknown".to_string(), usize::MAX));
            let c = cost + m.cost(prev_right, 0) as i64 + tok.unknown_cost() as i64;
            stack.push((p + 1, 0, c, w));
        }
    }
    out.sort_by(|a, b| (a.0, a.1, &a.2, &a.3).cmp(&(b.0, b.1, &b.2, &b.3)));
    out.into_iter().map(|(c, _, _, _, w)| (c, w)).collect()
}

pub fn as_path(a: &Analysis) -> Path {
    let words = a.sentence.morphemes.iter().map(|m| (m.surface.clone(), m.pos.clone())).collect();
    (a.cost, words)
}

/// Checks best-path and n-best output against exhaustive enumeration.
pub fn check_tokenizer_case(tok: &Tokenizer, text: &str) -> Result<(), String> {
    let all = enumerate_paths(tok, text);
    let best = as_path(&tok.analyze(text));
    if best != all[0] {
        return Err(format!("{text}: best {best:?}, oracle {:?}", all[0]));
    }
    for n in [1, 2, 3, all.len(), all.len() + 3] {
        let got: Vec<Path> = tok.nbest(text, n).iter().map(as_path).collect();
        let want = &all[..n.min(all.len())];
        if got != want {
            return Err(format!("{text}: {n}-best {got:?}, oracle {want:?}"));
        }
    }
    Ok(())
}

use jfront_core::eval::overall_ap;
use jfront_core::text::{phrase_pattern, Pitch, PitchSequence};

/// High iff the mora is the first of a head-accented phrase, or a later
/// mora at or before the nucleus (every later mora when flat).
pub fn expected_pitch(morae: usize, nucleus: usize) -> Vec<Pitch> {
    (1..=morae)
        .map(|i| {
            let high = if i == 1 { nucleus == 1 } else { nucleus == 0 || i <= nucleus };
            if high {
                Pitch::High
            } else {
                Pitch::Low
            }
        })
        .collect()
}

/// At most one rise, only between the first two morae, and at most one
/// fall, never followed by another rise.
pub fn single_rise_single_fall(p: &[Pitch]) -> bool {
    let mut rises = 0;
    let mut falls = 0;
    for (i, w) in p.windows(2).enumerate() {
        match (w[0], w[1]) {
            (Pitch::Low, Pitch::High) => {
                if i != 0 || falls > 0 {
                    return false;
                }
                rises += 1;
            }
            (Pitch::High, Pitch::Low) => falls += 1,
            _ => {}
        }
    }
    rises <= 1 && falls <= 1
}

/// Every phrase length up to `max_morae` with every nucleus.
pub fn check_pitch_exhaustive(max_morae: usize) -> Result<usize, String> {
    let mut checked = 0;
    for morae in 1..=max_morae {
        for nucleus in 0..=morae {
            let got = phrase_pattern(morae, nucleus as u32);
            if got != expected_pitch(morae, nucleus) {
                return Err(format!("N={morae} n={nucleus}: {}", PitchSequence(got)));
            }
            if !single_rise_single_fall(&got) {
                return Err(format!("N={morae} n={nucleus}: {} has extra turns", PitchSequence(got)));
            }
            // The fall follows the nucleus exactly.
            if nucleus > 0 && nucleus < morae && !(got[nucleus - 1] == Pitch::High && got[nucleus] == Pitch::Low) {
                return Err(format!("N={morae} n={nucleus}: no fall after the nucleus"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Random gold/prediction pairs of equal length; per pair the exact-match
/// rate never exceeds mora accuracy.
pub fn check_exact_below_mora_accuracy<R: Rng>(rng: &mut R, pairs: usize) -> Result<(), String> {
    let random = |rng: &mut R, n: usize| PitchSequence((0..n).map(|_| if rng.gen_bool(0.5) { Pitch::High } else { Pitch::Low }).collect());
    for k in 0..pairs {
        let n = rng.gen_range(1..=20);
        let g = random(rng, n);
        // Bias towards near-misses and exact matches.
        let p = match rng.gen_range(0..3) {
            0 => g.clone(),
            1 => {
                let mut p = g.clone();
                let i = rng.gen_range(0..n);
                p.0[i] = if p.0[i] == Pitch::High { Pitch::Low } else { Pitch::High };
                p
            }
            _ => random(rng, n),
        };
        let r = overall_ap(&[p], &[g]).map_err(|e| e.to_string())?;
        let (e, m) = (r.snt_exact.unwrap(), r.mora_accuracy.unwrap());
        if e > m {
            return Err(format!("pair {k}: exact {e} > mora {m}"));
        }
    }
    Ok(())
}
