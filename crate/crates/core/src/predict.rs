//! Task-level prediction and training entry points.

use std::ops::Range;

use jfront_neural::{train, Float, TrainOutcome, TrainSchedule};

use crate::corpus::AnnotatedCorpus;
use crate::features::FeatureExtractor;
use crate::implicit::ImplicitProvider;
use crate::labels::{resolve_phrases, BoundaryLabels, ClampWarning, NucleusLabel};
use crate::model::{CandidateInventory, ModelConfig, ModelError, TaggerModel, Task};
use crate::lexicon::Lexicon;
use crate::text::{AccentPhrase, Sentence, TextError};

fn expect_task<F: Float>(model: &TaggerModel<F>, task: Task) -> Result<(), ModelError> {
    if model.task() != task {
        return Err(ModelError::TaskMismatch {
            expected: task,
            found: model.task(),
        });
    }
    Ok(())
}

/// Chosen reading for every polyphone target, as `(word index, reading)`.
pub fn pd_predict<F: Float>(
    model: &TaggerModel<F>,
    sentence: &Sentence,
    provider: &ImplicitProvider,
) -> Result<Vec<(usize, String)>, ModelError> {
    expect_task(model, Task::Pd)?;
    let mut targets = Vec::new();
    for (i, m) in sentence.morphemes.iter().enumerate() {
        if let Some(lemma) = &m.polyphone_lemma {
            let range = model
                .inventory()
                .output_range(lemma)
                .ok_or_else(|| ModelError::UnknownLemma(lemma.clone()))?;
            targets.push(crate::model::PdTarget {
                position: i,
                gold: range.start,
                outputs: range,
            });
        }
    }
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let inputs = model.inputs(sentence, None, provider)?;
    let choices = model.decode_pd(&inputs, &targets)?;
    Ok(targets
        .iter()
        .zip(choices)
        .map(|(t, out)| {
            let lemma = sentence.morphemes[t.position].polyphone_lemma.as_deref().unwrap();
            let cands = model.inventory().candidates(lemma).unwrap();
            (t.position, cands[out - t.outputs.start].clone())
        })
        .collect())
}

/// Sets a PD reading. Accent information comes from the lexicon entry with
/// the same surface and reading when there is one; otherwise the old accent
/// is kept, clamped to the new length.
pub fn apply_reading(sentence: &mut Sentence, i: usize, pron: &str, lexicon: Option<&Lexicon>) -> Result<(), TextError> {
    let m = &mut sentence.morphemes[i];
    if m.pronunciation() == pron {
        return Ok(());
    }
    m.set_pronunciation(pron)?;
    let entry = lexicon.and_then(|lex| lex.lookup(&m.surface).find(|e| e.morpheme.pronunciation() == pron));
    if let Some(e) = entry {
        m.set_lexical_accent(e.morpheme.lexical_accent)?;
        m.accent_combination_type = e.morpheme.accent_combination_type.clone();
    }
    Ok(())
}

/// Boundary flags; the first word always starts a phrase.
pub fn apbp_predict<F: Float>(
    model: &TaggerModel<F>,
    sentence: &Sentence,
    provider: &ImplicitProvider,
) -> Result<BoundaryLabels, ModelError> {
    expect_task(model, Task::Apbp)?;
    if sentence.is_empty() {
        return Ok(BoundaryLabels::default());
    }
    let inputs = model.inputs(sentence, None, provider)?;
    let path = model.decode_sequence(&inputs)?;
    Ok(BoundaryLabels::new(path.into_iter().map(|j| j == 1).collect()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnppPrediction {
    pub labels: Vec<NucleusLabel>,
    pub phrases: Vec<AccentPhrase>,
    pub warnings: Vec<ClampWarning>,
}

/// Per-word nucleus labels and the resolved nucleus of each phrase.
pub fn anpp_predict<F: Float>(
    model: &TaggerModel<F>,
    sentence: &Sentence,
    spans: &[Range<usize>],
    provider: &ImplicitProvider,
) -> Result<AnppPrediction, ModelError> {
    expect_task(model, Task::Anpp)?;
    if !crate::text::is_partition(spans, sentence.len()) {
        return Err(ModelError::SpanMismatch {
            morphemes: sentence.len(),
        });
    }
    if sentence.is_empty() {
        return Ok(AnppPrediction {
            labels: Vec::new(),
            phrases: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let inputs = model.inputs(sentence, Some(spans), provider)?;
    let labels: Vec<NucleusLabel> = model
        .decode_sequence(&inputs)?
        .into_iter()
        .map(|j| NucleusLabel::from_index(j).expect("CRF labels are in range"))
        .collect();
    let (phrases, warnings) = resolve_phrases(sentence, spans, &labels);
    Ok(AnppPrediction {
        labels,
        phrases,
        warnings,
    })
}

/// Everything needed to train one task model.
#[derive(Clone, Debug)]
pub struct TrainSetup<'a> {
    pub config: ModelConfig,
    pub schedule: TrainSchedule,
    pub extractor: FeatureExtractor,
    pub inventory: CandidateInventory,
    pub provider: &'a ImplicitProvider,
}

/// Builds a model from `setup`, then trains it with the validation metric
/// of its task. The returned model is the best validation snapshot.
pub fn train_tagger(
    setup: TrainSetup<'_>,
    train_set: &AnnotatedCorpus,
    valid_set: &AnnotatedCorpus,
) -> Result<TrainOutcome<TaggerModel<f32>>, ModelError> {
    let config = setup.config.with_provider(setup.provider);
    let mut inventory = setup.inventory;
    if config.task == Task::Pd {
        inventory.add_corpus(train_set);
        inventory.add_corpus(valid_set);
    }
    let model = TaggerModel::<f32>::new(config, setup.extractor, inventory, train_set)?;
    let train_ex = model.examples(train_set, setup.provider)?;
    let valid_ex = model.examples(valid_set, setup.provider)?;
    let outcome = train(model, &train_ex, &valid_ex, &setup.schedule, |m, ex| {
        m.metric(ex).unwrap_or(f64::NEG_INFINITY)
    })?;
    Ok(outcome)
}
