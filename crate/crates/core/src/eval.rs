//! Objective metrics and multi-seed aggregation.
//!
//! Rates over an empty denominator are `None` rather than zero.

use std::fmt::Write as _;

use thiserror::Error;

use crate::labels::BoundaryLabels;
use crate::text::{AccentPhrase, PitchSequence, Sentence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("sentence {index}: {what} has {predicted} predicted items but {gold} gold items")]
    AlignmentMismatch {
        index: usize,
        what: &'static str,
        predicted: usize,
        gold: usize,
    },

    #[error("sentence {index}: predicted phrase spans differ from the gold spans")]
    SpanMismatch { index: usize },
}

fn check_len(index: usize, what: &'static str, predicted: usize, gold: usize) -> Result<(), EvalError> {
    if predicted != gold {
        return Err(EvalError::AlignmentMismatch {
            index,
            what,
            predicted,
            gold,
        });
    }
    Ok(())
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Fraction of polyphone targets read correctly. Each sentence contributes
/// its targets' predicted and gold readings in the same order.
pub fn pd_accuracy<S: AsRef<str>>(predictions: &[Vec<S>], gold: &[Vec<S>]) -> Result<Option<f64>, EvalError> {
    check_len(0, "corpus", predictions.len(), gold.len())?;
    let (mut hit, mut total) = (0, 0);
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        check_len(i, "targets", p.len(), g.len())?;
        hit += p.iter().zip(g).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
        total += g.len();
    }
    Ok(rate(hit, total))
}

/// Confusion counts of the positive (boundary) class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoundaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BoundaryCounts {
    /// Counts every slot after position 0 for which `keep(slot)` holds.
    pub fn add(&mut self, predicted: &[bool], gold: &[bool], keep: impl Fn(usize) -> bool) {
        for i in 1..gold.len().min(predicted.len()) {
            if !keep(i) {
                continue;
            }
            match (predicted[i], gold[i]) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => {}
            }
        }
    }

    pub fn precision(&self) -> Option<f64> {
        rate(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        rate(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`; `None` when there are no positives at all.
    pub fn f1(&self) -> Option<f64> {
        rate(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundarySubset {
    All,
    /// Only slots where the words on both sides are nouns.
    AdjacentNouns,
}

impl BoundarySubset {
    pub fn name(self) -> &'static str {
        match self {
            BoundarySubset::All => "all",
            BoundarySubset::AdjacentNouns => "adjacent_nouns",
        }
    }
}

pub fn apbp_counts(
    predictions: &[BoundaryLabels],
    gold: &[BoundaryLabels],
    sentences: &[Sentence],
    subset: BoundarySubset,
) -> Result<BoundaryCounts, EvalError> {
    check_len(0, "corpus", predictions.len(), gold.len())?;
    check_len(0, "corpus", sentences.len(), gold.len())?;
    let mut counts = BoundaryCounts::default();
    for (i, ((p, g), s)) in predictions.iter().zip(gold).zip(sentences).enumerate() {
        check_len(i, "boundaries", p.len(), g.len())?;
        check_len(i, "morphemes", s.len(), g.len())?;
        let ms = &s.morphemes;
        counts.add(p.flags(), g.flags(), |slot| match subset {
            BoundarySubset::All => true,
            BoundarySubset::AdjacentNouns => ms[slot - 1].major_pos() == "noun" && ms[slot].major_pos() == "noun",
        });
    }
    Ok(counts)
}

/// Boundary-class F1 with position 0 excluded.
pub fn apbp_f1(
    predictions: &[BoundaryLabels],
    gold: &[BoundaryLabels],
    sentences: &[Sentence],
    subset: BoundarySubset,
) -> Result<Option<f64>, EvalError> {
    Ok(apbp_counts(predictions, gold, sentences, subset)?.f1())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhraseSubset {
    All,
    /// Phrases of three or more words.
    LongPhrases,
}

impl PhraseSubset {
    pub fn name(self) -> &'static str {
        match self {
            PhraseSubset::All => "all",
            PhraseSubset::LongPhrases => "long_phrases",
        }
    }
}

/// Fraction of phrases whose nucleus matches gold. Spans must agree.
pub fn anpp_accuracy(
    predictions: &[Vec<AccentPhrase>],
    gold: &[Vec<AccentPhrase>],
    subset: PhraseSubset,
) -> Result<Option<f64>, EvalError> {
    check_len(0, "corpus", predictions.len(), gold.len())?;
    let (mut hit, mut total) = (0, 0);
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.len() != g.len() || p.iter().zip(g).any(|(a, b)| a.span != b.span) {
            return Err(EvalError::SpanMismatch { index: i });
        }
        for (a, b) in p.iter().zip(g) {
            if subset == PhraseSubset::LongPhrases && b.span.len() < 3 {
                continue;
            }
            total += 1;
            hit += usize::from(a.nucleus == b.nucleus);
        }
    }
    Ok(rate(hit, total))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OverallAp {
    pub snt_exact: Option<f64>,
    pub mora_accuracy: Option<f64>,
    pub evaluated: usize,
    /// Sentences skipped because predicted and gold mora counts differ.
    pub excluded: usize,
}

/// Sentence exact-match rate and per-mora accuracy of pitch labels.
pub fn overall_ap(predictions: &[PitchSequence], gold: &[PitchSequence]) -> Result<OverallAp, EvalError> {
    check_len(0, "corpus", predictions.len(), gold.len())?;
    let mut out = OverallAp::default();
    let (mut exact, mut correct, mut morae) = (0, 0, 0);
    for (p, g) in predictions.iter().zip(gold) {
        if p.len() != g.len() {
            out.excluded += 1;
            continue;
        }
        out.evaluated += 1;
        let c = p.labels().iter().zip(g.labels()).filter(|(a, b)| a == b).count();
        exact += usize::from(c == g.len());
        correct += c;
        morae += g.len();
    }
    out.snt_exact = rate(exact, out.evaluated);
    out.mora_accuracy = rate(correct, morae);
    Ok(out)
}

/// One metric value, optionally for a subset and a seed.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub name: String,
    pub subset: String,
    pub seed: Option<u64>,
    pub value: Option<f64>,
}

/// Per-seed results of one metric and their mean.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<MetricRow>,
    /// Free-form per-sentence error listing.
    pub errors: Vec<String>,
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    pub fn push(&mut self, name: &str, subset: &str, seed: Option<u64>, value: Option<f64>) {
        self.rows.push(MetricRow {
            name: name.into(),
            subset: subset.into(),
            seed,
            value,
        });
    }

    pub fn value(&self, name: &str, subset: &str, seed: Option<u64>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.name == name && r.subset == subset && r.seed == seed)
            .and_then(|r| r.value)
    }

    /// Adds a seedless `mean` row for every (name, subset) that has per-seed rows.
    pub fn add_means(&mut self) {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            if r.seed.is_some() && !keys.iter().any(|(n, s)| *n == r.name && *s == r.subset) {
                keys.push((r.name.clone(), r.subset.clone()));
            }
        }
        for (name, subset) in keys {
            let values: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| r.name == name && r.subset == subset && r.seed.is_some())
                .filter_map(|r| r.value)
                .collect();
            let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            self.push(&name, &subset, None, mean);
        }
    }

    /// `name<TAB>subset<TAB>seed<TAB>value`, one metric per line; seedless rows use `mean`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
            writeln!(out, "{}\t{}\t{}\t{}", r.name, r.subset, seed, fmt_value(r.value)).unwrap();
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = ["metric", "subset", "seed", "value"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.name.clone(),
                    r.subset.clone(),
                    r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
                    fmt_value(r.value),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cols: [&str; 4]| {
            let parts: Vec<String> = cols
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(header) + "\n";
        for row in &cells {
            out += &line([&row[0], &row[1], &row[2], &row[3]]);
            out.push('\n');
        }
        out
    }
}

/// Runs `run` once per seed, collects its rows under that seed and appends means.
pub fn multi_seed<E>(
    seeds: &[u64],
    mut run: impl FnMut(u64) -> Result<Vec<(String, String, Option<f64>)>, E>,
) -> Result<EvalReport, E> {
    let mut report = EvalReport::default();
    for &seed in seeds {
        for (name, subset, value) in run(seed)? {
            report.push(&name, &subset, Some(seed), value);
        }
    }
    report.add_means();
    Ok(report)
}
