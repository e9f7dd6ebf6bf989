//! Rule-based accent sandhi and phrase-boundary baselines.
//!
//! Both rule sets are data: the sandhi table and the boundary exception list
//! are plain TSV files, with small built-in defaults for the toy setup.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::features::mora_bucket;
use crate::labels::{BoundaryLabels, NucleusLabel, MAX_NUCLEUS};
use crate::lexicon::{read_file, LexiconError};
use crate::text::{major_pos, Morpheme, Sentence};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sandhi table has no default rule (all three patterns \"*\")")]
    MissingDefault,

    #[error(transparent)]
    Io(#[from] LexiconError),
}

/// A field pattern: `*`, or `|`-separated alternatives. An alternative
/// matches a POS either exactly or by its major category.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Pattern(Option<Vec<String>>);

impl Pattern {
    fn parse(s: &str) -> Self {
        if s == "*" {
            Pattern(None)
        } else {
            Pattern(Some(s.split('|').map(str::to_string).collect()))
        }
    }

    fn is_wildcard(&self) -> bool {
        self.0.is_none()
    }

    fn matches(&self, value: &str) -> bool {
        match &self.0 {
            None => true,
            Some(alts) => alts.iter().any(|a| a == value || a == major_pos(value)),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            None => f.write_str("*"),
            Some(alts) => f.write_str(&alts.join("|")),
        }
    }
}

/// What a matching rule does to a word pair (preceding A, following B).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SandhiOutcome {
    /// The pair is left alone.
    None,
    /// B takes this label unless a rule further right already decided it; A goes flat.
    Following(NucleusLabel),
    /// The nucleus lands on the last mora of A; B goes flat.
    PrevLast,
}

impl fmt::Display for SandhiOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SandhiOutcome::None => f.write_str("NONE"),
            SandhiOutcome::Following(l) => l.fmt(f),
            SandhiOutcome::PrevLast => f.write_str("PREV_LAST"),
        }
    }
}

impl FromStr for SandhiOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NONE" => Ok(SandhiOutcome::None),
            "PREV_LAST" => Ok(SandhiOutcome::PrevLast),
            _ => s
                .parse::<NucleusLabel>()
                .map(SandhiOutcome::Following)
                .map_err(|e| e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SandhiRule {
    combination_type: Pattern,
    pos_before: Pattern,
    pos_after: Pattern,
    mora_bucket: Pattern,
    pub outcome: SandhiOutcome,
}

impl SandhiRule {
    fn is_default(&self) -> bool {
        self.combination_type.is_wildcard()
            && self.pos_before.is_wildcard()
            && self.pos_after.is_wildcard()
            && self.mora_bucket.is_wildcard()
    }

    fn matches(&self, before: &Morpheme, after: &Morpheme) -> bool {
        self.combination_type.matches(&after.accent_combination_type)
            && self.pos_before.matches(&before.pos)
            && self.pos_after.matches(&after.pos)
            && self.mora_bucket.matches(&mora_bucket(after.mora_count()))
    }
}

/// Ordered sandhi rules; the first match wins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SandhiRuleTable {
    rules: Vec<SandhiRule>,
}

const BUILTIN_SANDHI: &str = "\
# combination_type\tpos_pair\tmora_bucket\toutcome
C1\tnoun+noun\t*\tNUC1
C2\tnoun+noun\t*\tKEEP
C3\tnoun+noun\t*\tFLAT
C4\tnoun+noun|suffix\t*\tPREV_LAST
*\t*\t*\tNONE
";

impl SandhiRuleTable {
    /// Parses `combination_type  pos_pair  mora_bucket  outcome` rows, where
    /// `pos_pair` is `A+B` or `*`. Blank and `#` lines are skipped.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RuleError::Parse { line: line_no, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            let (pos_before, pos_after) = if cols[1] == "*" {
                ("*", "*")
            } else {
                cols[1]
                    .split_once('+')
                    .ok_or_else(|| err(format!("POS pair {:?} is not of the form A+B", cols[1])))?
            };
            rules.push(SandhiRule {
                combination_type: Pattern::parse(cols[0]),
                pos_before: Pattern::parse(pos_before),
                pos_after: Pattern::parse(pos_after),
                mora_bucket: Pattern::parse(cols[2]),
                outcome: cols[3].parse().map_err(err)?,
            });
        }
        if !rules.iter().any(SandhiRule::is_default) {
            return Err(RuleError::MissingDefault);
        }
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self, RuleError> {
        Self::parse(&read_file(path)?)
    }

    /// Small table covering the four toy combination types.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SANDHI).expect("built-in table parses")
    }

    pub fn rules(&self) -> &[SandhiRule] {
        &self.rules
    }

    pub fn outcome(&self, before: &Morpheme, after: &Morpheme) -> SandhiOutcome {
        self.rules
            .iter()
            .find(|r| r.matches(before, after))
            .map(|r| r.outcome)
            .unwrap_or(SandhiOutcome::None)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let pair = if r.pos_before.is_wildcard() && r.pos_after.is_wildcard() {
                "*".to_string()
            } else {
                format!("{}+{}", r.pos_before, r.pos_after)
            };
            out.push_str(&format!("{}\t{pair}\t{}\t{}\n", r.combination_type, r.mora_bucket, r.outcome));
        }
        out
    }
}

/// Labels for the words of one phrase, applying the table to each adjacent
/// pair from right to left.
pub fn rule_sandhi(words: &[Morpheme], table: &SandhiRuleTable) -> Vec<NucleusLabel> {
    let mut labels = vec![NucleusLabel::Keep; words.len()];
    for i in (1..words.len()).rev() {
        match table.outcome(&words[i - 1], &words[i]) {
            SandhiOutcome::None => {}
            SandhiOutcome::Following(label) => {
                if labels[i] == NucleusLabel::Keep {
                    labels[i] = if label.fits(words[i].mora_count()) {
                        label
                    } else {
                        NucleusLabel::Flat
                    };
                }
                labels[i - 1] = NucleusLabel::Flat;
            }
            SandhiOutcome::PrevLast => {
                let morae = words[i - 1].mora_count();
                if morae > 0 {
                    labels[i - 1] = NucleusLabel::Nuc(morae.min(MAX_NUCLEUS as usize) as u8);
                }
                labels[i] = NucleusLabel::Flat;
            }
        }
    }
    labels
}

/// [`rule_sandhi`] run phrase by phrase over a whole sentence.
pub fn rule_sandhi_sentence(
    sentence: &Sentence,
    spans: &[Range<usize>],
    table: &SandhiRuleTable,
) -> Vec<NucleusLabel> {
    let mut out = Vec::with_capacity(sentence.len());
    for span in spans {
        out.extend(rule_sandhi(&sentence.morphemes[span.clone()], table));
    }
    out
}

const CONTENT_POS: [&str; 4] = ["noun", "verb", "adjective", "adverb"];

/// POS pairs `(previous, current)` that never get a boundary between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApbpExceptions {
    pairs: Vec<(Pattern, Pattern)>,
}

const BUILTIN_EXCEPTIONS: &str = "\
# previous_pos\tcurrent_pos
noun-proper\tnoun
";

impl ApbpExceptions {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(RuleError::Parse {
                    line: i + 1,
                    message: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            pairs.push((Pattern::parse(cols[0]), Pattern::parse(cols[1])));
        }
        Ok(Self { pairs })
    }

    pub fn load(path: &Path) -> Result<Self, RuleError> {
        Self::parse(&read_file(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_EXCEPTIONS).expect("built-in exceptions parse")
    }

    pub fn none() -> Self {
        Self { pairs: Vec::new() }
    }

    fn contains(&self, prev: &str, cur: &str) -> bool {
        self.pairs.iter().any(|(a, b)| a.matches(prev) && b.matches(cur))
    }
}

/// POS-driven boundary rules: a boundary goes before every content word
/// unless the previous word is a prefix or the pair is an exception. A
/// prefix opens the phrase of the word it attaches to.
pub fn rule_apbp(sentence: &Sentence, exceptions: &ApbpExceptions) -> BoundaryLabels {
    let ms = &sentence.morphemes;
    let flags = (0..ms.len())
        .map(|i| {
            if i == 0 {
                return true;
            }
            let (prev, cur) = (&ms[i - 1], &ms[i]);
            (CONTENT_POS.contains(&cur.major_pos()) || cur.major_pos() == "prefix")
                && prev.major_pos() != "prefix"
                && !exceptions.contains(&prev.pos, &cur.pos)
        })
        .collect();
    BoundaryLabels::new(flags)
}
