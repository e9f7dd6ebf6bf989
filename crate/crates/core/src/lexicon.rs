//! Dictionary-driven lattice tokenizer.
//!
//! Every dictionary match in the normalized text becomes a lattice node.
//! Positions where no entry starts get a single-character unknown node so
//! that a complete path always exists. Path cost is the sum of node costs
//! plus connection costs between neighbours, where the sentence begin and end
//! markers use context id 0 on both sides.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::text::{is_kana, normalize, segment_morae, to_katakana, Morpheme, Sentence, TextError};

pub const DEFAULT_UNKNOWN_COST: i32 = 10_000;
pub const UNKNOWN_POS: &str = "unknown";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("lexicon is empty")]
    EmptyLexicon,

    #[error("entry {surface:?} uses context id {id} outside the {bound}-wide connection matrix")]
    IdOutOfRange { surface: String, id: u16, bound: usize },

    #[error("connection matrix: {0}")]
    Matrix(String),

    #[error("line {line}: {source}")]
    Text { line: usize, source: TextError },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub(crate) fn read_file(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconEntry {
    pub left_id: u16,
    pub right_id: u16,
    pub cost: i32,
    /// Word template; its surface is the string matched in text.
    pub morpheme: Morpheme,
}

impl LexiconEntry {
    pub fn surface(&self) -> &str {
        &self.morpheme.surface
    }
}

/// Costs indexed by (right id of the left word, left id of the right word).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<i32>,
}

impl ConnectionMatrix {
    pub fn new(rows: usize, cols: usize, costs: Vec<i32>) -> Result<Self, LexiconError> {
        if rows == 0 || cols == 0 {
            return Err(LexiconError::Matrix("matrix must have at least one row and column".into()));
        }
        if costs.len() != rows * cols {
            return Err(LexiconError::Matrix(format!(
                "expected {} costs for a {rows}x{cols} matrix, found {}",
                rows * cols,
                costs.len()
            )));
        }
        Ok(Self { rows, cols, costs })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            costs: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn cost(&self, right_id: u16, left_id: u16) -> i32 {
        self.costs[right_id as usize * self.cols + left_id as usize]
    }

    pub fn set(&mut self, right_id: u16, left_id: u16, cost: i32) {
        self.costs[right_id as usize * self.cols + left_id as usize] = cost;
    }

    /// Parses `"R C"` followed by `R*C` whitespace-separated integers.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut nums = text.split_whitespace().map(|t| {
            t.parse::<i64>()
                .map_err(|_| LexiconError::Matrix(format!("not an integer: {t:?}")))
        });
        let mut next = |what: &str| {
            nums.next()
                .unwrap_or_else(|| Err(LexiconError::Matrix(format!("missing {what}"))))
        };
        let rows = usize::try_from(next("row count")?).map_err(|_| LexiconError::Matrix("negative row count".into()))?;
        let cols = usize::try_from(next("column count")?).map_err(|_| LexiconError::Matrix("negative column count".into()))?;
        let mut costs = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let v = next("cost")?;
            costs.push(i32::try_from(v).map_err(|_| LexiconError::Matrix(format!("cost {v} out of range")))?);
        }
        if nums.next().is_some() {
            return Err(LexiconError::Matrix("trailing values after the last row".into()));
        }
        Self::new(rows, cols, costs)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&read_file(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let row: Vec<String> = self.costs[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(i32::to_string)
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Dictionary with a surface → entries index.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, Vec<usize>>,
    max_chars: usize,
}

impl Lexicon {
    /// Entry surfaces are normalized so they match normalized input text.
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        let mut lex = Self::default();
        for e in entries {
            lex.push(e);
        }
        lex
    }

    pub fn push(&mut self, mut entry: LexiconEntry) {
        entry.morpheme.surface = normalize(&entry.morpheme.surface);
        let s = entry.morpheme.surface.clone();
        self.max_chars = self.max_chars.max(s.chars().count());
        self.index.entry(s).or_default().push(self.entries.len());
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, surface: &str) -> impl Iterator<Item = &LexiconEntry> {
        self.index
            .get(surface)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    /// Parses the tab-separated lexicon format:
    /// `surface left_id right_id cost pos pronunciation lexical_accent
    ///  accent_combination_type conjugation_form conjugation_type word_type`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 11 {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: format!("expected 11 tab-separated columns, found {}", cols.len()),
                });
            }
            let num = |idx: usize, what: &str| -> Result<i64, LexiconError> {
                cols[idx].parse::<i64>().map_err(|_| LexiconError::Parse {
                    line: line_no,
                    message: format!("{what} is not an integer: {:?}", cols[idx]),
                })
            };
            let id = |idx: usize, what: &str| -> Result<u16, LexiconError> {
                u16::try_from(num(idx, what)?).map_err(|_| LexiconError::Parse {
                    line: line_no,
                    message: format!("{what} out of range"),
                })
            };
            let left_id = id(1, "left_id")?;
            let right_id = id(2, "right_id")?;
            let cost = i32::try_from(num(3, "cost")?).map_err(|_| LexiconError::Parse {
                line: line_no,
                message: "cost out of range".into(),
            })?;
            let accent = u32::try_from(num(6, "lexical_accent")?).map_err(|_| LexiconError::Parse {
                line: line_no,
                message: "lexical_accent must be non-negative".into(),
            })?;
            let morpheme = Morpheme::new(cols[0], cols[4], cols[5], accent)
                .map_err(|source| LexiconError::Text { line: line_no, source })?
                .with_combination_type(cols[7])
                .with_conjugation(cols[8], cols[9])
                .with_word_type(cols[10]);
            entries.push(LexiconEntry {
                left_id,
                right_id,
                cost,
                morpheme,
            });
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&read_file(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let m = &e.morpheme;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                m.surface,
                e.left_id,
                e.right_id,
                e.cost,
                m.pos,
                m.pronunciation(),
                m.lexical_accent,
                m.accent_combination_type,
                m.conjugation_form,
                m.conjugation_type,
                m.word_type
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum NodeKind {
    Entry(usize),
    Unknown(char),
}

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    kind: NodeKind,
    surface: String,
    left_id: u16,
    right_id: u16,
    cost: i32,
}

impl Node {
    /// Final tie-break key after surfaces: dictionary order, unknown words last.
    fn order_key(&self) -> usize {
        match self.kind {
            NodeKind::Entry(i) => i,
            NodeKind::Unknown(_) => usize::MAX,
        }
    }
}

struct Lattice {
    nodes: Vec<Node>,
    /// Node indices ending at each character position.
    ends_at: Vec<Vec<usize>>,
    len: usize,
}

/// One tokenization together with its total path cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    pub sentence: Sentence,
    pub cost: i64,
}

#[derive(Clone, Debug)]
pub struct Tokenizer {
    lexicon: Lexicon,
    matrix: ConnectionMatrix,
    unknown_cost: i32,
}

impl Tokenizer {
    /// Fails if the lexicon is empty or uses ids outside the matrix.
    pub fn new(lexicon: Lexicon, matrix: ConnectionMatrix) -> Result<Self, LexiconError> {
        if lexicon.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        for e in lexicon.entries() {
            for (id, bound) in [(e.left_id, matrix.cols()), (e.right_id, matrix.rows())] {
                if id as usize >= bound {
                    return Err(LexiconError::IdOutOfRange {
                        surface: e.surface().to_string(),
                        id,
                        bound,
                    });
                }
            }
        }
        Ok(Self {
            lexicon,
            matrix,
            unknown_cost: DEFAULT_UNKNOWN_COST,
        })
    }

    pub fn with_unknown_cost(mut self, cost: i32) -> Self {
        self.unknown_cost = cost;
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn matrix(&self) -> &ConnectionMatrix {
        &self.matrix
    }

    pub fn unknown_cost(&self) -> i32 {
        self.unknown_cost
    }

    fn build_lattice(&self, chars: &[char]) -> Lattice {
        let n = chars.len();
        let mut nodes = Vec::new();
        for start in 0..n {
            let mut matched = false;
            for len in 1..=self.lexicon.max_chars.min(n - start) {
                let surface: String = chars[start..start + len].iter().collect();
                if let Some(ids) = self.lexicon.index.get(&surface) {
                    for &i in ids {
                        let e = &self.lexicon.entries[i];
                        nodes.push(Node {
                            start,
                            end: start + len,
                            kind: NodeKind::Entry(i),
                            surface: surface.clone(),
                            left_id: e.left_id,
                            right_id: e.right_id,
                            cost: e.cost,
                        });
                    }
                    matched = true;
                }
            }
            if !matched {
                nodes.push(Node {
                    start,
                    end: start + 1,
                    kind: NodeKind::Unknown(chars[start]),
                    surface: chars[start].to_string(),
                    left_id: 0,
                    right_id: 0,
                    cost: self.unknown_cost,
                });
            }
        }
        let mut ends_at = vec![Vec::new(); n + 1];
        for (i, node) in nodes.iter().enumerate() {
            ends_at[node.end].push(i);
        }
        Lattice { nodes, ends_at, len: n }
    }

    fn conn(&self, right_id: u16, left_id: u16) -> i64 {
        self.matrix.cost(right_id, left_id) as i64
    }

    fn compare_paths(&self, lattice: &Lattice, a: &[usize], b: &[usize]) -> Ordering {
        let sa = a.iter().map(|&i| lattice.nodes[i].surface.as_str());
        let sb = b.iter().map(|&i| lattice.nodes[i].surface.as_str());
        sa.cmp(sb).then_with(|| {
            let ka = a.iter().map(|&i| lattice.nodes[i].order_key());
            let kb = b.iter().map(|&i| lattice.nodes[i].order_key());
            ka.cmp(kb)
        })
    }

    /// Forward pass: best `(cost, morpheme count, predecessor)` for every node.
    fn viterbi(&self, lattice: &Lattice) -> Vec<Option<(i64, usize, Option<usize>)>> {
        let mut best: Vec<Option<(i64, usize, Option<usize>)>> = vec![None; lattice.nodes.len()];
        let back_path = |best: &[Option<(i64, usize, Option<usize>)>], mut v: Option<usize>| {
            let mut path = Vec::new();
            while let Some(i) = v {
                path.push(i);
                v = best[i].and_then(|b| b.2);
            }
            path.reverse();
            path
        };
        let mut order: Vec<usize> = (0..lattice.nodes.len()).collect();
        order.sort_by_key(|&i| lattice.nodes[i].start);
        for v in order {
            let node = &lattice.nodes[v];
            let candidates: Vec<(i64, usize, Option<usize>)> = if node.start == 0 {
                vec![(self.conn(0, node.left_id) + node.cost as i64, 1, None)]
            } else {
                lattice.ends_at[node.start]
                    .iter()
                    .filter_map(|&u| {
                        best[u].map(|(c, k, _)| {
                            let un = &lattice.nodes[u];
                            (c + self.conn(un.right_id, node.left_id) + node.cost as i64, k + 1, Some(u))
                        })
                    })
                    .collect()
            };
            let mut chosen: Option<(i64, usize, Option<usize>)> = None;
            for cand in candidates {
                chosen = Some(match chosen {
                    None => cand,
                    Some(cur) => {
                        let ord = (cand.0, cand.1).cmp(&(cur.0, cur.1)).then_with(|| {
                            let pa = back_path(&best, cand.2);
                            let pb = back_path(&best, cur.2);
                            self.compare_paths(lattice, &pa, &pb)
                        });
                        if ord == Ordering::Less {
                            cand
                        } else {
                            cur
                        }
                    }
                });
            }
            best[v] = chosen;
        }
        best
    }

    fn sentence_from_path(&self, raw: &str, lattice: &Lattice, path: &[usize]) -> Sentence {
        let morphemes = path
            .iter()
            .map(|&i| match &lattice.nodes[i].kind {
                NodeKind::Entry(e) => self.lexicon.entries[*e].morpheme.clone(),
                NodeKind::Unknown(ch) => unknown_morpheme(*ch),
            })
            .collect();
        Sentence::new("", raw, morphemes).expect("lattice paths spell the normalized text")
    }

    /// Minimum-cost tokenization of `normalize(text)`. Ties prefer fewer
    /// morphemes, then the lexicographically smaller surface sequence.
    pub fn tokenize(&self, text: &str) -> Sentence {
        self.analyze(text).sentence
    }

    pub fn analyze(&self, text: &str) -> Analysis {
        let chars: Vec<char> = normalize(text).chars().collect();
        let lattice = self.build_lattice(&chars);
        if lattice.len == 0 {
            return Analysis {
                sentence: Sentence::new("", text, Vec::new()).expect("empty sentence"),
                cost: self.conn(0, 0),
            };
        }
        let best = self.viterbi(&lattice);
        let mut chosen: Option<(i64, usize, usize)> = None;
        let mut chosen_path: Vec<usize> = Vec::new();
        for &v in &lattice.ends_at[lattice.len] {
            let Some((c, k, _)) = best[v] else { continue };
            let total = c + self.conn(lattice.nodes[v].right_id, 0);
            let path = {
                let mut p = vec![v];
                let mut cur = best[v].and_then(|b| b.2);
                while let Some(i) = cur {
                    p.push(i);
                    cur = best[i].and_then(|b| b.2);
                }
                p.reverse();
                p
            };
            let better = match chosen {
                None => true,
                Some((bc, bk, _)) => (total, k)
                    .cmp(&(bc, bk))
                    .then_with(|| self.compare_paths(&lattice, &path, &chosen_path))
                    == Ordering::Less,
            };
            if better {
                chosen = Some((total, k, v));
                chosen_path = path;
            }
        }
        let (cost, _, _) = chosen.expect("unknown-word fallback guarantees a path");
        Analysis {
            sentence: self.sentence_from_path(text, &lattice, &chosen_path),
            cost,
        }
    }

    /// The best of the `n` best analyses whose concatenated pronunciation
    /// equals `gold`, or `None` when none does. Sentences without a match are
    /// left out of pipeline evaluation.
    pub fn matching_analysis(&self, text: &str, gold: &str, n: usize) -> Option<Analysis> {
        self.nbest(text, n).into_iter().find(|a| {
            a.sentence.morphemes.iter().map(|m| m.pronunciation()).collect::<String>() == gold
        })
    }

    /// Up to `n` distinct tokenizations in non-decreasing cost order (same
    /// tie-break as [`Tokenizer::tokenize`]). The first equals `tokenize(text)`.
    pub fn nbest(&self, text: &str, n: usize) -> Vec<Analysis> {
        if n == 0 {
            return Vec::new();
        }
        let chars: Vec<char> = normalize(text).chars().collect();
        let lattice = self.build_lattice(&chars);
        if lattice.len == 0 {
            return vec![self.analyze(text)];
        }
        let best = self.viterbi(&lattice);

        // Backward A* from the end marker; the forward Viterbi costs are exact heuristics.
        struct State {
            node: usize,
            parent: Option<usize>,
            suffix_cost: i64,
        }
        let mut arena: Vec<State> = Vec::new();
        let mut heap: BinaryHeap<Reverse<(i64, usize)>> = BinaryHeap::new();
        for &v in &lattice.ends_at[lattice.len] {
            if let Some((c, _, _)) = best[v] {
                let g = self.conn(lattice.nodes[v].right_id, 0);
                arena.push(State {
                    node: v,
                    parent: None,
                    suffix_cost: g,
                });
                heap.push(Reverse((c + g, arena.len() - 1)));
            }
        }
        let mut done: Vec<(i64, Vec<usize>)> = Vec::new();
        while let Some(Reverse((priority, s))) = heap.pop() {
            if done.len() >= n && priority > done[n - 1].0 {
                break;
            }
            let v = arena[s].node;
            let node = &lattice.nodes[v];
            if node.start == 0 {
                let mut path = Vec::new();
                let mut cur = Some(s);
                while let Some(i) = cur {
                    path.push(arena[i].node);
                    cur = arena[i].parent;
                }
                done.push((priority, path));
                continue;
            }
            let g = arena[s].suffix_cost + node.cost as i64;
            for &u in &lattice.ends_at[node.start] {
                if let Some((c, _, _)) = best[u] {
                    let gu = g + self.conn(lattice.nodes[u].right_id, node.left_id);
                    arena.push(State {
                        node: u,
                        parent: Some(s),
                        suffix_cost: gu,
                    });
                    heap.push(Reverse((c + gu, arena.len() - 1)));
                }
            }
        }
        done.sort_by(|a, b| {
            (a.0, a.1.len())
                .cmp(&(b.0, b.1.len()))
                .then_with(|| self.compare_paths(&lattice, &a.1, &b.1))
        });
        done.truncate(n);
        done.into_iter()
            .map(|(cost, path)| Analysis {
                sentence: self.sentence_from_path(text, &lattice, &path),
                cost,
            })
            .collect()
    }

    /// Cost of an explicit segmentation into lexicon entries, by entry index.
    /// `None` marks an unknown single-character word.
    pub fn path_cost(&self, path: &[(String, Option<usize>)]) -> i64 {
        let mut cost = 0i64;
        let mut prev_right = 0u16;
        for (_, e) in path {
            let (l, r, c) = match e {
                Some(i) => {
                    let e = &self.lexicon.entries[*i];
                    (e.left_id, e.right_id, e.cost)
                }
                None => (0, 0, self.unknown_cost),
            };
            cost += self.conn(prev_right, l) + c as i64;
            prev_right = r;
        }
        cost + self.conn(prev_right, 0)
    }
}

/// Morpheme for a character with no dictionary match. Kana keep their
/// reading; anything else gets an empty pronunciation.
pub fn unknown_morpheme(ch: char) -> Morpheme {
    let pron = if is_kana(ch) {
        to_katakana(&ch.to_string())
    } else {
        String::new()
    };
    let pron = if segment_morae(&pron).is_ok() { pron } else { String::new() };
    Morpheme::new(ch.to_string(), UNKNOWN_POS, pron, 0).expect("unknown morpheme is well formed")
}
