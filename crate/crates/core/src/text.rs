//! Linguistic data types, mora segmentation and pitch rendering.

use std::fmt;
use std::ops::Range;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("invalid pronunciation character {ch:?} at offset {offset}")]
    InvalidPronunciation { ch: char, offset: usize },

    #[error("small kana {ch:?} at offset {offset} has no base kana to attach to")]
    OrphanGlide { ch: char, offset: usize },

    #[error("lexical accent {accent} exceeds mora count {morae} of {surface:?}")]
    AccentOutOfRange {
        surface: String,
        accent: u32,
        morae: usize,
    },

    #[error("phrase {phrase} has nucleus {nucleus} but only {morae} morae")]
    InvalidNucleus {
        phrase: usize,
        nucleus: u32,
        morae: usize,
    },

    #[error("accent phrases do not partition the {morphemes} morphemes of the sentence")]
    NotAPartition { morphemes: usize },

    #[error("morpheme surfaces {surfaces:?} do not spell the normalized text {text:?}")]
    SurfaceMismatch { surfaces: String, text: String },

    #[error("morpheme surface must not be empty")]
    EmptySurface,
}

/// Unicode compatibility folding (NFKC). Full-width ASCII becomes half-width
/// and half-width katakana becomes full-width; nothing is verbalized.
pub fn normalize(text: &str) -> String {
    text.nfkc().collect()
}

const LONG_VOWEL: char = 'ー';
const SOKUON: char = 'ッ';
const MORAIC_NASAL: char = 'ン';

fn is_glide(c: char) -> bool {
    matches!(
        c,
        'ャ' | 'ュ' | 'ョ' | 'ァ' | 'ィ' | 'ゥ' | 'ェ' | 'ォ' | 'ヮ'
    )
}

fn is_katakana(c: char) -> bool {
    ('\u{30A1}'..='\u{30FA}').contains(&c) || c == LONG_VOWEL
}

/// Converts hiragana to katakana, leaving everything else untouched.
pub fn to_katakana(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '\u{3041}'..='\u{3096}' => char::from_u32(c as u32 + 0x60).unwrap_or(c),
            _ => c,
        })
        .collect()
}

pub fn is_kana(c: char) -> bool {
    is_katakana(c) || ('\u{3041}'..='\u{3096}').contains(&c)
}

/// One mora of katakana: a base kana with an optional small glide, or one of
/// the standalone ー, ッ, ン.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mora(String);

impl Mora {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Mora {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Splits a katakana pronunciation into morae. Small ya/yu/yo (and the small
/// vowels used in loanwords) always join the preceding base kana.
pub fn segment_morae(pronunciation: &str) -> Result<Vec<Mora>, TextError> {
    let mut out: Vec<Mora> = Vec::new();
    let mut open = false;
    for (offset, ch) in pronunciation.chars().enumerate() {
        if !is_katakana(ch) {
            return Err(TextError::InvalidPronunciation { ch, offset });
        }
        if is_glide(ch) {
            match out.last_mut() {
                Some(m) if open => {
                    m.0.push(ch);
                    open = false;
                }
                _ => return Err(TextError::OrphanGlide { ch, offset }),
            }
            continue;
        }
        out.push(Mora(ch.to_string()));
        open = !matches!(ch, LONG_VOWEL | SOKUON | MORAIC_NASAL);
    }
    Ok(out)
}

/// One dictionary word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morpheme {
    pub surface: String,
    pub pos: String,
    pronunciation: String,
    morae: Vec<Mora>,
    /// 0 is flat (heiban); otherwise the 1-based mora carrying the nucleus.
    pub lexical_accent: u32,
    pub accent_combination_type: String,
    pub conjugation_form: String,
    pub conjugation_type: String,
    pub word_type: String,
    pub polyphone_lemma: Option<String>,
}

impl Morpheme {
    pub fn new(
        surface: impl Into<String>,
        pos: impl Into<String>,
        pronunciation: impl Into<String>,
        lexical_accent: u32,
    ) -> Result<Self, TextError> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(TextError::EmptySurface);
        }
        let pronunciation = pronunciation.into();
        let morae = segment_morae(&pronunciation)?;
        if lexical_accent as usize > morae.len() {
            return Err(TextError::AccentOutOfRange {
                surface,
                accent: lexical_accent,
                morae: morae.len(),
            });
        }
        Ok(Self {
            surface,
            pos: pos.into(),
            pronunciation,
            morae,
            lexical_accent,
            accent_combination_type: "*".into(),
            conjugation_form: "*".into(),
            conjugation_type: "*".into(),
            word_type: "*".into(),
            polyphone_lemma: None,
        })
    }

    pub fn with_combination_type(mut self, t: impl Into<String>) -> Self {
        self.accent_combination_type = t.into();
        self
    }

    pub fn with_conjugation(mut self, form: impl Into<String>, kind: impl Into<String>) -> Self {
        self.conjugation_form = form.into();
        self.conjugation_type = kind.into();
        self
    }

    pub fn with_word_type(mut self, t: impl Into<String>) -> Self {
        self.word_type = t.into();
        self
    }

    pub fn with_polyphone_lemma(mut self, lemma: Option<String>) -> Self {
        self.polyphone_lemma = lemma;
        self
    }

    pub fn pronunciation(&self) -> &str {
        &self.pronunciation
    }

    pub fn morae(&self) -> &[Mora] {
        &self.morae
    }

    pub fn mora_count(&self) -> usize {
        self.morae.len()
    }

    pub fn is_polyphone_target(&self) -> bool {
        self.polyphone_lemma.is_some()
    }

    /// Replaces the pronunciation and re-segments. The lexical accent is
    /// clamped to the new mora count.
    pub fn set_pronunciation(&mut self, pronunciation: impl Into<String>) -> Result<(), TextError> {
        let pronunciation = pronunciation.into();
        self.morae = segment_morae(&pronunciation)?;
        self.pronunciation = pronunciation;
        self.lexical_accent = self.lexical_accent.min(self.morae.len() as u32);
        Ok(())
    }

    pub fn set_lexical_accent(&mut self, accent: u32) -> Result<(), TextError> {
        if accent as usize > self.morae.len() {
            return Err(TextError::AccentOutOfRange {
                surface: self.surface.clone(),
                accent,
                morae: self.morae.len(),
            });
        }
        self.lexical_accent = accent;
        Ok(())
    }

    /// Major POS category: the part before the first `-` (`noun-proper` → `noun`).
    pub fn major_pos(&self) -> &str {
        major_pos(&self.pos)
    }
}

pub fn major_pos(pos: &str) -> &str {
    pos.split('-').next().unwrap_or(pos)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub raw: String,
    pub morphemes: Vec<Morpheme>,
}

impl Sentence {
    /// Checks that the morpheme surfaces spell `normalize(raw)`.
    pub fn new(id: impl Into<String>, raw: impl Into<String>, morphemes: Vec<Morpheme>) -> Result<Self, TextError> {
        let raw = raw.into();
        let text = normalize(&raw);
        let surfaces: String = morphemes.iter().map(|m| m.surface.as_str()).collect();
        if surfaces != text {
            return Err(TextError::SurfaceMismatch { surfaces, text });
        }
        Ok(Self {
            id: id.into(),
            raw,
            morphemes,
        })
    }

    pub fn len(&self) -> usize {
        self.morphemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphemes.is_empty()
    }

    pub fn mora_count(&self) -> usize {
        self.morphemes.iter().map(Morpheme::mora_count).sum()
    }

    pub fn pronunciation(&self) -> String {
        self.morphemes.iter().map(|m| m.pronunciation()).collect()
    }

    /// Mora count of the morphemes in `span`.
    pub fn span_morae(&self, span: &Range<usize>) -> usize {
        self.morphemes[span.clone()].iter().map(Morpheme::mora_count).sum()
    }
}

/// A contiguous morpheme span with its resolved nucleus (1-based mora index
/// inside the phrase; 0 means flat).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccentPhrase {
    pub span: Range<usize>,
    pub nucleus: u32,
}

/// Turns "boundary before this word" flags into phrase spans. The first flag
/// is treated as set regardless of its value.
pub fn spans_from_boundaries(boundaries: &[bool]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, &b) in boundaries.iter().enumerate().skip(1) {
        if b {
            spans.push(start..i);
            start = i;
        }
    }
    if !boundaries.is_empty() {
        spans.push(start..boundaries.len());
    }
    spans
}

/// Inverse of [`spans_from_boundaries`].
pub fn boundaries_from_spans(spans: &[Range<usize>], len: usize) -> Vec<bool> {
    let mut out = vec![false; len];
    for s in spans {
        if s.start < len {
            out[s.start] = true;
        }
    }
    out
}

/// True when `spans` are non-empty, contiguous and cover `0..len` exactly.
pub fn is_partition(spans: &[Range<usize>], len: usize) -> bool {
    let mut next = 0;
    for s in spans {
        if s.start != next || s.end <= s.start {
            return false;
        }
        next = s.end;
    }
    next == len
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pitch {
    Low,
    High,
}

impl Pitch {
    pub fn symbol(self) -> char {
        match self {
            Pitch::Low => 'L',
            Pitch::High => 'H',
        }
    }
}

/// One Low/High label per mora of a sentence.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PitchSequence(pub Vec<Pitch>);

impl PitchSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[Pitch] {
        &self.0
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                'L' => Some(Pitch::Low),
                'H' => Some(Pitch::High),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(PitchSequence)
    }
}

impl fmt::Display for PitchSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// Tokyo-style pitch pattern of one phrase with `morae` morae and the given nucleus.
pub fn phrase_pattern(morae: usize, nucleus: u32) -> Vec<Pitch> {
    let n = nucleus as usize;
    (0..morae)
        .map(|i| match n {
            0 => {
                if i == 0 {
                    Pitch::Low
                } else {
                    Pitch::High
                }
            }
            1 => {
                if i == 0 {
                    Pitch::High
                } else {
                    Pitch::Low
                }
            }
            _ => {
                if i == 0 || i >= n {
                    Pitch::Low
                } else {
                    Pitch::High
                }
            }
        })
        .collect()
}

pub fn render_pitch(phrases: &[AccentPhrase], sentence: &Sentence) -> Result<PitchSequence, TextError> {
    let spans: Vec<Range<usize>> = phrases.iter().map(|p| p.span.clone()).collect();
    if !is_partition(&spans, sentence.len()) {
        return Err(TextError::NotAPartition {
            morphemes: sentence.len(),
        });
    }
    let mut labels = Vec::with_capacity(sentence.mora_count());
    for (i, p) in phrases.iter().enumerate() {
        let morae = sentence.span_morae(&p.span);
        if p.nucleus as usize > morae {
            return Err(TextError::InvalidNucleus {
                phrase: i,
                nucleus: p.nucleus,
                morae,
            });
        }
        labels.extend(phrase_pattern(morae, p.nucleus));
    }
    Ok(PitchSequence(labels))
}
