//! Explicit categorical features and their index vocabularies.
//!
//! Each family is split into single-valued fields so every field gets its own
//! embedding table: POS; conjugation form/type and word type; mora count and
//! the first two morae; accent type and combination type; phrase size and
//! position; the sandhi rule label; unigram and bigram count buckets.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{self, BufRead};
use std::ops::Range;
use std::path::Path;

use jfront_neural::binio::{Decoder, Encoder};
use thiserror::Error;

use crate::lexicon::{read_file, LexiconError, Tokenizer};
use crate::rules::{rule_sandhi, SandhiRuleTable};
use crate::text::Sentence;

/// Value of a field whose prerequisite (phrases, n-gram counts) is missing.
pub const NA: &str = "NA";
/// Symbol reserved at index 0 of every field vocabulary.
pub const UNK: &str = "<unk>";
/// Left context used for the bigram of a sentence-initial word.
pub const BOS: &str = "<s>";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature vocabulary used before it was fitted")]
    LookupBeforeFit,

    #[error("cannot fit a feature vocabulary on an empty corpus")]
    EmptyCorpus,

    #[error("n-gram file line {line}: {message}")]
    NgramParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] LexiconError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Pos,
    ConjugationForm,
    ConjugationType,
    WordType,
    MoraCount,
    FirstMora,
    SecondMora,
    AccentType,
    CombinationType,
    PhraseWords,
    PhrasePosition,
    Rule,
    Unigram,
    Bigram,
}

impl Field {
    pub const COUNT: usize = 14;

    pub const ALL: [Field; Field::COUNT] = [
        Field::Pos,
        Field::ConjugationForm,
        Field::ConjugationType,
        Field::WordType,
        Field::MoraCount,
        Field::FirstMora,
        Field::SecondMora,
        Field::AccentType,
        Field::CombinationType,
        Field::PhraseWords,
        Field::PhrasePosition,
        Field::Rule,
        Field::Unigram,
        Field::Bigram,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Feature family number (1 to 7).
    pub fn family(self) -> u8 {
        match self {
            Field::Pos => 1,
            Field::ConjugationForm | Field::ConjugationType | Field::WordType => 2,
            Field::MoraCount | Field::FirstMora | Field::SecondMora => 3,
            Field::AccentType | Field::CombinationType => 4,
            Field::PhraseWords | Field::PhrasePosition => 5,
            Field::Rule => 6,
            Field::Unigram | Field::Bigram => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Pos => "pos",
            Field::ConjugationForm => "conj_form",
            Field::ConjugationType => "conj_type",
            Field::WordType => "word_type",
            Field::MoraCount => "mora_count",
            Field::FirstMora => "first_mora",
            Field::SecondMora => "second_mora",
            Field::AccentType => "accent_type",
            Field::CombinationType => "combination_type",
            Field::PhraseWords => "phrase_words",
            Field::PhrasePosition => "phrase_position",
            Field::Rule => "rule",
            Field::Unigram => "unigram",
            Field::Bigram => "bigram",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Fields with a family number in `families`.
    pub fn of_families(families: &[u8]) -> Vec<Field> {
        Self::ALL
            .into_iter()
            .filter(|f| families.contains(&f.family()))
            .collect()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `0`..`5`, then `6+`.
pub fn mora_bucket(morae: usize) -> String {
    capped_bucket(morae, 6)
}

/// `0`..`9`, then `10+`.
pub fn accent_bucket(accent: u32) -> String {
    capped_bucket(accent as usize, 10)
}

/// `1`..`5`, then `6+`.
pub fn phrase_size_bucket(words: usize) -> String {
    capped_bucket(words, 6)
}

fn capped_bucket(x: usize, cap: usize) -> String {
    if x >= cap {
        format!("{cap}+")
    } else {
        x.to_string()
    }
}

/// `min(7, floor(log2(1 + count)))`.
pub fn count_bucket(count: u64) -> u8 {
    let v = count.saturating_add(1);
    (63 - v.leading_zeros()).min(7) as u8
}

/// Position of a word inside its accent phrase.
pub fn phrase_position(offset: usize, len: usize) -> &'static str {
    match (offset, len) {
        (_, 1) => "only",
        (0, _) => "first",
        (o, l) if o + 1 == l => "last",
        _ => "middle",
    }
}

/// All explicit feature values of one morpheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureBundle {
    values: [String; Field::COUNT],
}

impl FeatureBundle {
    pub fn get(&self, field: Field) -> &str {
        &self.values[field.index()]
    }

    pub fn set(&mut self, field: Field, value: impl Into<String>) {
        self.values[field.index()] = value.into();
    }
}

/// Surface unigram and adjacent-pair bigram counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NgramCounts {
    unigrams: HashMap<String, u64>,
    bigrams: HashMap<(String, String), u64>,
}

impl NgramCounts {
    pub fn unigram(&self, w: &str) -> u64 {
        self.unigrams.get(w).copied().unwrap_or(0)
    }

    pub fn bigram(&self, a: &str, b: &str) -> u64 {
        self.bigrams
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Counts one tokenized line; the first word is paired with [`BOS`].
    pub fn add_sentence<'a>(&mut self, words: impl IntoIterator<Item = &'a str>) {
        let mut prev = BOS.to_string();
        for w in words {
            *self.unigrams.entry(w.to_string()).or_default() += 1;
            *self.bigrams.entry((prev, w.to_string())).or_default() += 1;
            prev = w.to_string();
        }
    }

    /// Tokenizes each line of plain text. Whitespace separates chunks that
    /// are tokenized independently; bigrams run across the whole line.
    pub fn build(reader: impl BufRead, tokenizer: &Tokenizer) -> io::Result<Self> {
        let mut counts = Self::default();
        for line in reader.lines() {
            let line = line?;
            let words: Vec<String> = line
                .split_whitespace()
                .flat_map(|chunk| tokenizer.tokenize(chunk).morphemes)
                .map(|m| m.surface)
                .collect();
            counts.add_sentence(words.iter().map(String::as_str));
        }
        Ok(counts)
    }

    /// Sorted TSV: `word<TAB>count` and `word1<TAB>word2<TAB>count`.
    pub fn to_tsv(&self) -> String {
        let mut uni: Vec<_> = self.unigrams.iter().collect();
        uni.sort();
        let mut bi: Vec<_> = self.bigrams.iter().collect();
        bi.sort();
        let mut out = String::new();
        for (w, c) in uni {
            out.push_str(&format!("{w}\t{c}\n"));
        }
        for ((a, b), c) in bi {
            out.push_str(&format!("{a}\t{b}\t{c}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut counts = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |message: String| FeatureError::NgramParse { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            let count: u64 = cols
                .last()
                .unwrap()
                .parse()
                .map_err(|_| err(format!("bad count {:?}", cols.last().unwrap())))?;
            match cols.len() {
                2 => {
                    counts.unigrams.insert(cols[0].to_string(), count);
                }
                3 => {
                    counts.bigrams.insert((cols[0].to_string(), cols[1].to_string()), count);
                }
                n => return Err(err(format!("expected 2 or 3 columns, found {n}"))),
            }
        }
        Ok(counts)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        Self::parse(&read_file(path)?)
    }
}

/// Computes [`FeatureBundle`]s. The sandhi table feeds the rule field and
/// the optional counts feed the n-gram fields.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureExtractor {
    pub sandhi: SandhiRuleTable,
    pub ngrams: Option<NgramCounts>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self {
            sandhi: SandhiRuleTable::builtin(),
            ngrams: None,
        }
    }
}

impl FeatureExtractor {
    pub fn new(sandhi: SandhiRuleTable, ngrams: Option<NgramCounts>) -> Self {
        Self { sandhi, ngrams }
    }

    /// One bundle per morpheme. Phrase fields are [`NA`] without `phrases`,
    /// n-gram fields are [`NA`] without counts.
    pub fn extract(&self, sentence: &Sentence, phrases: Option<&[Range<usize>]>) -> Vec<FeatureBundle> {
        let mut out: Vec<FeatureBundle> = sentence
            .morphemes
            .iter()
            .map(|m| {
                let morae = m.morae();
                let mora = |i: usize| morae.get(i).map_or("-", |x| x.as_str()).to_string();
                FeatureBundle {
                    values: [
                        m.pos.clone(),
                        m.conjugation_form.clone(),
                        m.conjugation_type.clone(),
                        m.word_type.clone(),
                        mora_bucket(morae.len()),
                        mora(0),
                        mora(1),
                        accent_bucket(m.lexical_accent),
                        m.accent_combination_type.clone(),
                        NA.into(),
                        NA.into(),
                        NA.into(),
                        NA.into(),
                        NA.into(),
                    ],
                }
            })
            .collect();

        if let Some(spans) = phrases {
            for span in spans {
                let rules = rule_sandhi(&sentence.morphemes[span.clone()], &self.sandhi);
                for (offset, i) in span.clone().enumerate() {
                    let b = &mut out[i];
                    b.set(Field::PhraseWords, phrase_size_bucket(span.len()));
                    b.set(Field::PhrasePosition, phrase_position(offset, span.len()));
                    b.set(Field::Rule, rules[offset].to_string());
                }
            }
        }

        if let Some(ngrams) = &self.ngrams {
            let mut prev = BOS;
            for (b, m) in out.iter_mut().zip(&sentence.morphemes) {
                b.set(Field::Unigram, count_bucket(ngrams.unigram(&m.surface)).to_string());
                b.set(Field::Bigram, count_bucket(ngrams.bigram(prev, &m.surface)).to_string());
                prev = &m.surface;
            }
        }
        out
    }
}

/// [`FeatureExtractor::extract`] with the built-in sandhi table.
pub fn extract_features(
    sentence: &Sentence,
    phrases: Option<&[Range<usize>]>,
    ngrams: Option<&NgramCounts>,
) -> Vec<FeatureBundle> {
    FeatureExtractor::new(SandhiRuleTable::builtin(), ngrams.cloned()).extract(sentence, phrases)
}

/// Per-field symbol tables. Index 0 is [`UNK`]; fitted symbols follow in
/// sorted order so that fitting is independent of corpus order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureVocabulary {
    fields: Option<Vec<Vec<String>>>,
    index: Vec<HashMap<String, usize>>,
}

impl FeatureVocabulary {
    pub fn fit<'a>(bundles: impl IntoIterator<Item = &'a FeatureBundle>) -> Result<Self, FeatureError> {
        let mut seen: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); Field::COUNT];
        let mut any = false;
        for b in bundles {
            any = true;
            for f in Field::ALL {
                seen[f.index()].insert(b.get(f));
            }
        }
        if !any {
            return Err(FeatureError::EmptyCorpus);
        }
        let fields = seen
            .into_iter()
            .map(|s| {
                std::iter::once(UNK.to_string())
                    .chain(s.into_iter().filter(|v| *v != UNK).map(str::to_string))
                    .collect()
            })
            .collect();
        Ok(Self::from_symbols(fields))
    }

    fn from_symbols(fields: Vec<Vec<String>>) -> Self {
        let index = fields
            .iter()
            .map(|syms| syms.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        Self {
            fields: Some(fields),
            index,
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.fields.is_some()
    }

    pub fn size(&self, field: Field) -> Result<usize, FeatureError> {
        self.fields
            .as_ref()
            .map(|f| f[field.index()].len())
            .ok_or(FeatureError::LookupBeforeFit)
    }

    pub fn symbols(&self, field: Field) -> Result<&[String], FeatureError> {
        self.fields
            .as_ref()
            .map(|f| f[field.index()].as_slice())
            .ok_or(FeatureError::LookupBeforeFit)
    }

    /// Index of `symbol`, 0 when unseen.
    pub fn lookup_symbol(&self, field: Field, symbol: &str) -> Result<usize, FeatureError> {
        if !self.is_fitted() {
            return Err(FeatureError::LookupBeforeFit);
        }
        Ok(self.index[field.index()].get(symbol).copied().unwrap_or(0))
    }

    pub fn lookup(&self, bundle: &FeatureBundle, fields: &[Field]) -> Result<Vec<usize>, FeatureError> {
        fields.iter().map(|&f| self.lookup_symbol(f, bundle.get(f))).collect()
    }

    pub fn encode(&self, enc: &mut Encoder) -> Result<(), FeatureError> {
        let fields = self.fields.as_ref().ok_or(FeatureError::LookupBeforeFit)?;
        enc.put_usize(fields.len());
        for f in fields {
            enc.put_strs(f);
        }
        Ok(())
    }

    pub fn decode(dec: &mut Decoder<'_>) -> jfront_neural::Result<Self> {
        let n = dec.usize("field count")?;
        if n != Field::COUNT {
            return Err(jfront_neural::NeuralError::Corrupt(format!(
                "expected {} feature fields, found {n}",
                Field::COUNT
            )));
        }
        let fields = (0..n).map(|_| dec.strs("field symbols")).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_symbols(fields))
    }
}
