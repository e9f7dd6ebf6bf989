//! Label inventories for boundary and nucleus prediction.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::text::{AccentPhrase, Sentence};

/// Largest explicit nucleus position a word label can carry.
pub const MAX_NUCLEUS: u8 = 10;

/// How a word's accent nucleus behaves inside its accent phrase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NucleusLabel {
    /// The word keeps its lexical accent.
    Keep,
    /// The word contributes no nucleus.
    Flat,
    /// The nucleus sits on mora `k` (1-based) of this word.
    Nuc(u8),
}

impl NucleusLabel {
    pub const COUNT: usize = 2 + MAX_NUCLEUS as usize;

    pub fn index(self) -> usize {
        match self {
            NucleusLabel::Keep => 0,
            NucleusLabel::Flat => 1,
            NucleusLabel::Nuc(k) => 1 + k as usize,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(NucleusLabel::Keep),
            1 => Some(NucleusLabel::Flat),
            i if i < Self::COUNT => Some(NucleusLabel::Nuc((i - 1) as u8)),
            _ => None,
        }
    }

    pub fn all() -> impl Iterator<Item = NucleusLabel> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }

    /// Whether the label can be placed on a word with `morae` morae.
    pub fn fits(self, morae: usize) -> bool {
        match self {
            NucleusLabel::Nuc(k) => (k as usize) <= morae,
            _ => true,
        }
    }
}

impl fmt::Display for NucleusLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NucleusLabel::Keep => f.write_str("KEEP"),
            NucleusLabel::Flat => f.write_str("FLAT"),
            NucleusLabel::Nuc(k) => write!(f, "NUC{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown nucleus label {0:?}")]
pub struct ParseLabelError(pub String);

impl FromStr for NucleusLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "KEEP" => Ok(NucleusLabel::Keep),
            "FLAT" => Ok(NucleusLabel::Flat),
            _ => s
                .strip_prefix("NUC")
                .and_then(|k| k.parse::<u8>().ok())
                .filter(|k| (1..=MAX_NUCLEUS).contains(k))
                .map(NucleusLabel::Nuc)
                .ok_or_else(|| ParseLabelError(s.to_string())),
        }
    }
}

/// Per-word "accent phrase boundary before this word" flags. The first flag is always set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BoundaryLabels(Vec<bool>);

impl BoundaryLabels {
    /// Forces the first flag to `true`.
    pub fn new(mut flags: Vec<bool>) -> Self {
        if let Some(first) = flags.first_mut() {
            *first = true;
        }
        Self(flags)
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spans(&self) -> Vec<std::ops::Range<usize>> {
        crate::text::spans_from_boundaries(&self.0)
    }
}

/// A resolved nucleus that had to be pulled back inside its phrase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClampWarning {
    pub phrase: usize,
    pub requested: u32,
    pub clamped_to: u32,
}

impl fmt::Display for ClampWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "phrase {}: nucleus {} clamped to {}",
            self.phrase, self.requested, self.clamped_to
        )
    }
}

/// Nucleus contributed by one word sitting `offset` morae into its phrase.
fn contribution(label: NucleusLabel, offset: usize, lexical_accent: u32) -> Option<u32> {
    match label {
        NucleusLabel::Keep if lexical_accent > 0 => Some(offset as u32 + lexical_accent),
        NucleusLabel::Nuc(k) => Some(offset as u32 + k as u32),
        _ => None,
    }
}

/// Turns per-word labels into one nucleus per phrase. The leftmost word that
/// contributes a nucleus fixes it; a phrase with no contributor is flat.
/// Out-of-range results are clamped to the phrase length and reported.
///
/// Panics if `labels` is shorter than the sentence or spans leave it.
pub fn resolve_phrases(
    sentence: &Sentence,
    spans: &[Range<usize>],
    labels: &[NucleusLabel],
) -> (Vec<AccentPhrase>, Vec<ClampWarning>) {
    let morae: Vec<usize> = sentence.morphemes.iter().map(|m| m.mora_count()).collect();
    let accents: Vec<u32> = sentence.morphemes.iter().map(|m| m.lexical_accent).collect();
    let (nuclei, warnings) = resolve_nuclei(spans, &morae, &accents, labels);
    let phrases = spans
        .iter()
        .zip(nuclei)
        .map(|(span, nucleus)| AccentPhrase {
            span: span.clone(),
            nucleus,
        })
        .collect();
    (phrases, warnings)
}

/// [`resolve_phrases`] over bare per-word mora counts and lexical accents.
pub fn resolve_nuclei(
    spans: &[Range<usize>],
    morae: &[usize],
    accents: &[u32],
    labels: &[NucleusLabel],
) -> (Vec<u32>, Vec<ClampWarning>) {
    let mut nuclei = Vec::with_capacity(spans.len());
    let mut warnings = Vec::new();
    for (p, span) in spans.iter().enumerate() {
        let mut offset = 0;
        let mut nucleus = 0;
        for i in span.clone() {
            if let Some(n) = contribution(labels[i], offset, accents[i]) {
                nucleus = n;
                break;
            }
            offset += morae[i];
        }
        let total: usize = morae[span.clone()].iter().sum();
        let total = total as u32;
        if nucleus > total {
            warnings.push(ClampWarning {
                phrase: p,
                requested: nucleus,
                clamped_to: total,
            });
            nucleus = total;
        }
        nuclei.push(nucleus);
    }
    (nuclei, warnings)
}
