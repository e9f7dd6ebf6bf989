//! Text in, pronunciations and mora pitch out.
//!
//! normalize → tokenize → polyphone disambiguation → phrase boundaries →
//! nucleus labels → pitch rendering. Each stage can be a trained model, a
//! rule set, or replaced by gold annotation.

use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

use crate::corpus::AnnotatedSentence;
use crate::implicit::ImplicitProvider;
use crate::labels::{resolve_phrases, BoundaryLabels, ClampWarning, NucleusLabel};
use crate::lexicon::Tokenizer;
use crate::model::{ModelError, TaggerModel};
use crate::predict::{anpp_predict, apbp_predict, apply_reading, pd_predict};
use crate::rules::{rule_apbp, rule_sandhi_sentence, ApbpExceptions, SandhiRuleTable};
use crate::text::{render_pitch, AccentPhrase, PitchSequence, Sentence, TextError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Text(#[from] TextError),

    #[error("gold {what} has {found} entries for a sentence of {expected} words")]
    GoldLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// A trained model together with the implicit provider it was trained with.
#[derive(Clone, Debug)]
pub struct Stage {
    pub model: TaggerModel<f32>,
    pub provider: ImplicitProvider,
}

#[derive(Clone, Debug)]
pub enum BoundaryStage {
    Model(Stage),
    Rules(ApbpExceptions),
}

#[derive(Clone, Debug)]
pub enum NucleusStage {
    Model(Stage),
    Rules(SandhiRuleTable),
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub tokenizer: Tokenizer,
    /// Without a PD model, dictionary readings are kept.
    pub pd: Option<Stage>,
    pub boundaries: BoundaryStage,
    pub nuclei: NucleusStage,
}

/// Gold annotation that replaces a stage's prediction.
#[derive(Clone, Copy, Debug, Default)]
pub struct GoldInputs<'a> {
    pub boundaries: Option<&'a BoundaryLabels>,
    pub nucleus_labels: Option<&'a [NucleusLabel]>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineOutput {
    pub sentence: Sentence,
    /// PD decisions as `(word index, reading)`.
    pub readings: Vec<(usize, String)>,
    pub boundaries: BoundaryLabels,
    pub nucleus_labels: Vec<NucleusLabel>,
    pub phrases: Vec<AccentPhrase>,
    pub pitch: PitchSequence,
    pub warnings: Vec<ClampWarning>,
}

impl PipelineOutput {
    /// Stable plain-text rendering used by the command line.
    pub fn to_text(&self) -> String {
        let s = &self.sentence;
        let mut out = String::new();
        writeln!(out, "#id {}", s.id).unwrap();
        let words: Vec<&str> = s.morphemes.iter().map(|m| m.surface.as_str()).collect();
        writeln!(out, "words\t{}", words.join(" ")).unwrap();
        let prons: Vec<&str> = s.morphemes.iter().map(|m| m.pronunciation()).collect();
        writeln!(out, "readings\t{}", prons.join(" ")).unwrap();
        let phrases: Vec<String> = self
            .phrases
            .iter()
            .map(|p| {
                let text: String = s.morphemes[p.span.clone()].iter().map(|m| m.surface.as_str()).collect();
                format!("{text}/{}", p.nucleus)
            })
            .collect();
        writeln!(out, "phrases\t{}", phrases.join(" ")).unwrap();
        let labels: Vec<String> = self.nucleus_labels.iter().map(NucleusLabel::to_string).collect();
        writeln!(out, "labels\t{}", labels.join(" ")).unwrap();
        writeln!(out, "pitch\t{}", self.pitch).unwrap();
        for w in &self.warnings {
            writeln!(out, "warning\t{w}").unwrap();
        }
        out
    }
}

impl Pipeline {
    /// Rule-based accent stages with the built-in tables and no PD model.
    pub fn rule_based(tokenizer: Tokenizer) -> Self {
        Self {
            tokenizer,
            pd: None,
            boundaries: BoundaryStage::Rules(ApbpExceptions::builtin()),
            nuclei: NucleusStage::Rules(SandhiRuleTable::builtin()),
        }
    }

    /// Tokenizes `text` and runs every stage.
    pub fn run(&self, id: &str, text: &str) -> Result<PipelineOutput, PipelineError> {
        let mut sentence = self.tokenizer.tokenize(text);
        sentence.id = id.to_string();
        sentence.raw = text.to_string();
        self.run_sentence(sentence, GoldInputs::default())
    }

    /// Runs on a gold tokenization, optionally bypassing stages with its gold labels.
    pub fn run_annotated(
        &self,
        annotated: &AnnotatedSentence,
        gold_boundaries: bool,
        gold_nuclei: bool,
    ) -> Result<PipelineOutput, PipelineError> {
        let gold = GoldInputs {
            boundaries: gold_boundaries.then_some(&annotated.boundaries),
            nucleus_labels: gold_nuclei.then_some(annotated.nucleus_labels.as_slice()),
        };
        self.run_sentence(annotated.sentence.clone(), gold)
    }

    pub fn run_sentence(&self, mut sentence: Sentence, gold: GoldInputs<'_>) -> Result<PipelineOutput, PipelineError> {
        let n = sentence.len();
        let readings = match &self.pd {
            Some(stage) => {
                stage.model.inventory().mark_targets(&mut sentence);
                let readings = pd_predict(&stage.model, &sentence, &stage.provider)?;
                for (i, pron) in &readings {
                    apply_reading(&mut sentence, *i, pron, Some(self.tokenizer.lexicon()))?;
                }
                readings
            }
            None => Vec::new(),
        };

        let boundaries = match (gold.boundaries, &self.boundaries) {
            (Some(b), _) => {
                check_len("boundaries", n, b.len())?;
                b.clone()
            }
            (None, BoundaryStage::Model(stage)) => apbp_predict(&stage.model, &sentence, &stage.provider)?,
            (None, BoundaryStage::Rules(ex)) => rule_apbp(&sentence, ex),
        };
        let spans: Vec<Range<usize>> = boundaries.spans();

        let (nucleus_labels, phrases, warnings) = match (gold.nucleus_labels, &self.nuclei) {
            (Some(labels), _) => {
                check_len("nucleus labels", n, labels.len())?;
                let (p, w) = resolve_phrases(&sentence, &spans, labels);
                (labels.to_vec(), p, w)
            }
            (None, NucleusStage::Model(stage)) => {
                let pred = anpp_predict(&stage.model, &sentence, &spans, &stage.provider)?;
                (pred.labels, pred.phrases, pred.warnings)
            }
            (None, NucleusStage::Rules(table)) => {
                let labels = rule_sandhi_sentence(&sentence, &spans, table);
                let (p, w) = resolve_phrases(&sentence, &spans, &labels);
                (labels, p, w)
            }
        };
        let pitch = render_pitch(&phrases, &sentence)?;
        Ok(PipelineOutput {
            sentence,
            readings,
            boundaries,
            nucleus_labels,
            phrases,
            pitch,
            warnings,
        })
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), PipelineError> {
    if expected != found {
        return Err(PipelineError::GoldLength { what, expected, found });
    }
    Ok(())
}
