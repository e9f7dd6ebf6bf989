//! Annotated corpus files.
//!
//! Sentences are separated by blank lines. Each starts with `#id <id>` and
//! the raw text, followed by one tab-separated line per morpheme:
//!
//! ```text
//! surface pos pronunciation lexical_accent accent_combination_type
//! conjugation_form conjugation_type word_type boundary_before nucleus_label
//! polyphone_lemma
//! ```
//!
//! `boundary_before` is `0` or `1` and must be `1` on the first morpheme;
//! `polyphone_lemma` is `-` for words that are not disambiguation targets.

use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::labels::{resolve_phrases, BoundaryLabels, ClampWarning, NucleusLabel};
use crate::lexicon::{read_file, LexiconError};
use crate::text::{render_pitch, AccentPhrase, Morpheme, PitchSequence, Sentence, TextError};

const COLUMNS: [&str; 11] = [
    "surface",
    "pos",
    "pronunciation",
    "lexical_accent",
    "accent_combination_type",
    "conjugation_form",
    "conjugation_type",
    "word_type",
    "boundary_before",
    "nucleus_label",
    "polyphone_lemma",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: missing field {field}")]
    MissingField { line: usize, field: &'static str },

    #[error("line {line}: label {label} does not fit a word of {morae} morae")]
    LabelOutOfRange {
        line: usize,
        label: NucleusLabel,
        morae: usize,
    },

    #[error("line {line}: the first morpheme of a sentence must start a phrase")]
    DanglingBoundary { line: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    Text { line: usize, source: TextError },

    #[error(transparent)]
    Io(#[from] LexiconError),
}

/// A gold-tokenized sentence with its accent annotation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub boundaries: BoundaryLabels,
    pub nucleus_labels: Vec<NucleusLabel>,
}

impl AnnotatedSentence {
    pub fn id(&self) -> &str {
        &self.sentence.id
    }

    pub fn spans(&self) -> Vec<Range<usize>> {
        self.boundaries.spans()
    }

    pub fn gold_phrases(&self) -> (Vec<AccentPhrase>, Vec<ClampWarning>) {
        resolve_phrases(&self.sentence, &self.spans(), &self.nucleus_labels)
    }

    pub fn gold_pitch(&self) -> PitchSequence {
        render_pitch(&self.gold_phrases().0, &self.sentence).expect("resolved phrases always render")
    }

    /// Indices of the polyphone targets.
    pub fn targets(&self) -> Vec<usize> {
        (0..self.sentence.len())
            .filter(|&i| self.sentence.morphemes[i].is_polyphone_target())
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedCorpus {
    pub sentences: Vec<AnnotatedSentence>,
}

impl AnnotatedCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedSentence> {
        self.sentences.iter()
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let lines: Vec<&str> = text.lines().collect();
        let mut sentences = Vec::new();
        let mut i = 0;
        while i < lines.len() {
            if lines[i].trim().is_empty() {
                i += 1;
                continue;
            }
            let start = i;
            while i < lines.len() && !lines[i].trim().is_empty() {
                i += 1;
            }
            sentences.push(parse_block(&lines[start..i], start + 1)?);
        }
        Ok(Self { sentences })
    }

    pub fn to_text(&self) -> String {
        let blocks: Vec<String> = self.sentences.iter().map(write_block).collect();
        blocks.join("\n")
    }
}

pub fn load_corpus(path: &Path) -> Result<AnnotatedCorpus, CorpusError> {
    AnnotatedCorpus::parse(&read_file(path)?)
}

pub fn write_corpus(path: &Path, corpus: &AnnotatedCorpus) -> std::io::Result<()> {
    std::fs::write(path, corpus.to_text())
}

fn parse_block(lines: &[&str], first_line: usize) -> Result<AnnotatedSentence, CorpusError> {
    let id = lines[0]
        .strip_prefix("#id")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or(CorpusError::MissingField {
            line: first_line,
            field: "#id",
        })?;
    let raw = *lines.get(1).ok_or(CorpusError::MissingField {
        line: first_line + 1,
        field: "raw text",
    })?;

    let mut morphemes = Vec::new();
    let mut boundaries = Vec::new();
    let mut labels = Vec::new();
    for (k, line) in lines[2..].iter().enumerate() {
        let line_no = first_line + 2 + k;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < COLUMNS.len() {
            return Err(CorpusError::MissingField {
                line: line_no,
                field: COLUMNS[cols.len()],
            });
        }
        if cols.len() > COLUMNS.len() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("expected {} columns, found {}", COLUMNS.len(), cols.len()),
            });
        }
        let parse_err = |message: String| CorpusError::Parse { line: line_no, message };
        let accent: u32 = cols[3]
            .parse()
            .map_err(|_| parse_err(format!("lexical_accent {:?} is not a non-negative integer", cols[3])))?;
        let lemma = (cols[10] != "-").then(|| cols[10].to_string());
        let m = Morpheme::new(cols[0], cols[1], cols[2], accent)
            .map_err(|source| CorpusError::Text { line: line_no, source })?
            .with_combination_type(cols[4])
            .with_conjugation(cols[5], cols[6])
            .with_word_type(cols[7])
            .with_polyphone_lemma(lemma);
        let boundary = match cols[8] {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(format!("boundary_before must be 0 or 1, found {other:?}"))),
        };
        if k == 0 && !boundary {
            return Err(CorpusError::DanglingBoundary { line: line_no });
        }
        let label: NucleusLabel = cols[9].parse().map_err(|e: crate::labels::ParseLabelError| parse_err(e.to_string()))?;
        if !label.fits(m.mora_count()) {
            return Err(CorpusError::LabelOutOfRange {
                line: line_no,
                label,
                morae: m.mora_count(),
            });
        }
        morphemes.push(m);
        boundaries.push(boundary);
        labels.push(label);
    }
    let sentence = Sentence::new(id, raw, morphemes).map_err(|source| CorpusError::Text {
        line: first_line + 1,
        source,
    })?;
    Ok(AnnotatedSentence {
        sentence,
        boundaries: BoundaryLabels::new(boundaries),
        nucleus_labels: labels,
    })
}

fn write_block(s: &AnnotatedSentence) -> String {
    let mut out = format!("#id {}\n{}\n", s.sentence.id, s.sentence.raw);
    for (i, m) in s.sentence.morphemes.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            m.surface,
            m.pos,
            m.pronunciation(),
            m.lexical_accent,
            m.accent_combination_type,
            m.conjugation_form,
            m.conjugation_type,
            m.word_type,
            u8::from(s.boundaries.flags()[i]),
            s.nucleus_labels[i],
            m.polyphone_lemma.as_deref().unwrap_or("-"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "#id a\n雲がある\n雲\tnoun\tクモ\t1\tC1\t*\t*\t和\t1\tKEEP\t-\nが\tparticle\tガ\t0\t*\t*\t*\t和\t0\tKEEP\t-\nある\tverb\tアル\t1\t*\t基本形\t五段\t和\t1\tKEEP\t-\n\n#id b\n方に\n方\tnoun\tホー\t1\tC1\t*\t*\t漢\t1\tKEEP\t方\nに\tparticle\tニ\t0\t*\t*\t*\t和\t0\tKEEP\t-\n";

    #[test]
    fn parses_two_sentences() {
        let c = AnnotatedCorpus::parse(TWO).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.sentences[0].spans(), vec![0..2, 2..3]);
        assert_eq!(c.sentences[1].targets(), vec![0]);
        assert_eq!(c.sentences[1].sentence.morphemes[0].polyphone_lemma.as_deref(), Some("方"));
        assert_eq!(AnnotatedCorpus::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(AnnotatedCorpus::parse("").unwrap().is_empty());
        assert!(AnnotatedCorpus::parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn label_out_of_range_names_line() {
        let text = "#id x\nある\nある\tverb\tアル\t1\t*\t*\t*\t和\t1\tNUC5\t-\n";
        match AnnotatedCorpus::parse(text) {
            Err(CorpusError::LabelOutOfRange { line, morae, .. }) => {
                assert_eq!((line, morae), (3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        let dangling = "#id x\nある\nある\tverb\tアル\t1\t*\t*\t*\t和\t0\tKEEP\t-\n";
        assert!(matches!(
            AnnotatedCorpus::parse(dangling),
            Err(CorpusError::DanglingBoundary { line: 3 })
        ));
        let short = "#id x\nある\nある\tverb\tアル\t1\n";
        assert!(matches!(
            AnnotatedCorpus::parse(short),
            Err(CorpusError::MissingField {
                line: 3,
                field: "accent_combination_type"
            })
        ));
        assert!(matches!(
            AnnotatedCorpus::parse("ある\n"),
            Err(CorpusError::MissingField { line: 1, field: "#id" })
        ));
        let mismatch = "#id x\nあれ\nある\tverb\tアル\t1\t*\t*\t*\t和\t1\tKEEP\t-\n";
        assert!(matches!(
            AnnotatedCorpus::parse(mismatch),
            Err(CorpusError::Text { line: 2, .. })
        ));
    }
}
