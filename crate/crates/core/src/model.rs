//! BiLSTM taggers for polyphone disambiguation (PD), accent phrase boundary
//! prediction (APBP) and accent nucleus position prediction (ANPP).
//!
//! All three share one architecture: per-field categorical embeddings,
//! optionally concatenated with frozen implicit vectors, feed a one-layer
//! BiLSTM whose states are projected to per-word scores. APBP and ANPP decode
//! the scores with a CRF; PD normalises the target word's scores over the
//! candidate readings of its lemma only.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use jfront_neural::binio::{decode_params_into, encode_params, Container, Decoder, Encoder};
use jfront_neural::loss::{masked_argmax, masked_softmax_xent};
use jfront_neural::lstm::BiLstmCache;
use jfront_neural::{BiLstm, Crf, Embedding, Float, Linear, NeuralError, Param, ParamSet, Tensor2, Trainable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{AnnotatedCorpus, AnnotatedSentence};
use crate::eval::BoundaryCounts;
use crate::features::{FeatureError, FeatureExtractor, FeatureVocabulary, Field, NgramCounts};
use crate::implicit::{ImplicitError, ImplicitProvider};
use crate::labels::{resolve_nuclei, NucleusLabel};
use crate::lexicon::Lexicon;
use crate::rules::{RuleError, SandhiRuleTable};
use crate::text::Sentence;

pub(crate) const MODEL_MAGIC: &[u8; 4] = b"JTFM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Feature(#[from] FeatureError),

    #[error(transparent)]
    Implicit(#[from] ImplicitError),

    #[error(transparent)]
    Neural(#[from] NeuralError),

    #[error(transparent)]
    Rule(#[from] RuleError),

    #[error("lemma {0:?} has no candidate readings in the model inventory")]
    UnknownLemma(String),

    #[error("gold reading {pronunciation:?} of {lemma:?} is not in the candidate inventory")]
    GoldNotInInventory { lemma: String, pronunciation: String },

    #[error("model expects a {expected_kind} provider of width {expected_dim}, got {found_kind} of width {found_dim}")]
    ProviderMismatch {
        expected_kind: String,
        expected_dim: usize,
        found_kind: String,
        found_dim: usize,
    },

    #[error("nucleus prediction needs accent phrase spans")]
    MissingSpans,

    #[error("spans do not partition the {morphemes} morphemes of the sentence")]
    SpanMismatch { morphemes: usize },

    #[error("model has neither explicit nor implicit inputs")]
    NoInputs,

    #[error("expected a {expected} model, found {found}")]
    TaskMismatch { expected: Task, found: Task },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Pd,
    Apbp,
    Anpp,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Pd => "pd",
            Task::Apbp => "apbp",
            Task::Anpp => "anpp",
        }
    }

    /// Feature fields used by default: family 1 for PD, families 1-4 (plus 7
    /// when requested) for APBP, families 1-6 for ANPP.
    pub fn default_fields(self, ngram_features: bool) -> Vec<Field> {
        match self {
            Task::Pd => Field::of_families(&[1]),
            Task::Apbp if ngram_features => Field::of_families(&[1, 2, 3, 4, 7]),
            Task::Apbp => Field::of_families(&[1, 2, 3, 4]),
            Task::Anpp => Field::of_families(&[1, 2, 3, 4, 5, 6]),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pd" => Ok(Task::Pd),
            "apbp" => Ok(Task::Apbp),
            "anpp" => Ok(Task::Anpp),
            _ => Err(format!("unknown task {s:?} (expected pd, apbp or anpp)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub task: Task,
    pub fields: Vec<Field>,
    pub field_dim: usize,
    pub hidden: usize,
    /// Provider kind (`none`, `file`, `charlm`) and width the model was built for.
    pub implicit_kind: String,
    pub implicit_dim: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            fields: task.default_fields(false),
            field_dim: 16,
            hidden: 512,
            implicit_kind: "none".into(),
            implicit_dim: 0,
            seed: 1,
        }
    }

    pub fn with_provider(mut self, provider: &ImplicitProvider) -> Self {
        self.implicit_kind = provider.kind().into();
        self.implicit_dim = provider.dim();
        self
    }
}

/// Candidate readings per polyphone lemma. Each (lemma, reading) pair owns
/// one output unit; a lemma's units are contiguous and sorted by reading.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidateInventory {
    lemmas: BTreeMap<String, Vec<String>>,
}

impl CandidateInventory {
    pub fn add(&mut self, lemma: &str, pronunciation: &str) {
        let prons = self.lemmas.entry(lemma.to_string()).or_default();
        if let Err(pos) = prons.binary_search_by(|p| p.as_str().cmp(pronunciation)) {
            prons.insert(pos, pronunciation.to_string());
        }
    }

    /// Gold readings of every target in the corpus.
    pub fn add_corpus(&mut self, corpus: &AnnotatedCorpus) {
        for s in corpus.iter() {
            for m in &s.sentence.morphemes {
                if let Some(lemma) = &m.polyphone_lemma {
                    self.add(lemma, m.pronunciation());
                }
            }
        }
    }

    /// Lexicon surfaces listed with more than one reading.
    pub fn add_lexicon_homographs(&mut self, lexicon: &Lexicon) {
        let mut by_surface: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in lexicon.entries() {
            by_surface.entry(e.surface()).or_default().push(e.morpheme.pronunciation());
        }
        for (surface, mut prons) in by_surface {
            prons.sort_unstable();
            prons.dedup();
            if prons.len() > 1 {
                for p in prons {
                    self.add(surface, p);
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.lemmas.iter().map(|(l, p)| (l.as_str(), p.as_slice()))
    }

    pub fn candidates(&self, lemma: &str) -> Option<&[String]> {
        self.lemmas.get(lemma).map(Vec::as_slice)
    }

    pub fn num_outputs(&self) -> usize {
        self.lemmas.values().map(Vec::len).sum()
    }

    /// Output units belonging to `lemma`.
    pub fn output_range(&self, lemma: &str) -> Option<Range<usize>> {
        let mut start = 0;
        for (l, prons) in &self.lemmas {
            if l == lemma {
                return Some(start..start + prons.len());
            }
            start += prons.len();
        }
        None
    }

    /// Marks words whose surface is a lemma with several readings as targets.
    pub fn mark_targets(&self, sentence: &mut Sentence) {
        for m in &mut sentence.morphemes {
            if m.polyphone_lemma.is_none() && self.lemmas.get(&m.surface).is_some_and(|p| p.len() > 1) {
                m.polyphone_lemma = Some(m.surface.clone());
            }
        }
    }

    fn encode(&self, enc: &mut Encoder) {
        enc.put_usize(self.lemmas.len());
        for (l, prons) in &self.lemmas {
            enc.put_str(l);
            enc.put_strs(prons);
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> jfront_neural::Result<Self> {
        let n = dec.usize("lemma count")?;
        let mut lemmas = BTreeMap::new();
        for _ in 0..n {
            let l = dec.str("lemma")?;
            lemmas.insert(l, dec.strs("readings")?);
        }
        Ok(Self { lemmas })
    }
}

/// Network inputs for one sentence.
#[derive(Clone, Debug)]
pub struct Inputs<F> {
    /// One index per configured field, per word.
    pub features: Vec<Vec<usize>>,
    pub implicit: Option<Tensor2<F>>,
    pub morae: Vec<usize>,
}

impl<F> Inputs<F> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdTarget {
    pub position: usize,
    pub outputs: Range<usize>,
    pub gold: usize,
}

/// What is needed to score phrase nuclei without the sentence itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhraseContext {
    pub spans: Vec<Range<usize>>,
    pub accents: Vec<u32>,
    pub gold_nuclei: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Pd(Vec<PdTarget>),
    Boundaries(Vec<usize>),
    Nuclei { labels: Vec<usize>, phrases: PhraseContext },
}

#[derive(Clone, Debug)]
pub struct Example<F> {
    pub inputs: Inputs<F>,
    pub target: Target,
}

struct Forward<F> {
    x: Tensor2<F>,
    cache: BiLstmCache<F>,
    logits: Tensor2<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggerModel<F> {
    config: ModelConfig,
    vocab: FeatureVocabulary,
    extractor: FeatureExtractor,
    inventory: CandidateInventory,
    embeddings: Vec<Embedding<F>>,
    bilstm: BiLstm<F>,
    head: Linear<F>,
    crf: Option<Crf<F>>,
}

fn num_outputs(task: Task, inventory: &CandidateInventory) -> usize {
    match task {
        Task::Pd => inventory.num_outputs().max(1),
        Task::Apbp => 2,
        Task::Anpp => NucleusLabel::COUNT,
    }
}

impl<F: Float> TaggerModel<F> {
    /// Fits the feature vocabulary on `train` and initialises parameters from
    /// `config.seed`.
    pub fn new(
        config: ModelConfig,
        extractor: FeatureExtractor,
        inventory: CandidateInventory,
        train: &AnnotatedCorpus,
    ) -> Result<Self, ModelError> {
        let task = config.task;
        let bundles = train.iter().flat_map(|s| {
            let spans = s.spans();
            extractor.extract(&s.sentence, (task == Task::Anpp).then_some(spans.as_slice()))
        });
        let vocab = FeatureVocabulary::fit(bundles.collect::<Vec<_>>().iter())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut embeddings = Vec::with_capacity(config.fields.len());
        for &f in &config.fields {
            embeddings.push(Embedding::new(vocab.size(f)?, config.field_dim, &mut rng));
        }
        let input = config.fields.len() * config.field_dim + config.implicit_dim;
        if input == 0 {
            return Err(ModelError::NoInputs);
        }
        let k = num_outputs(task, &inventory);
        let bilstm = BiLstm::new(input, config.hidden, &mut rng);
        let head = Linear::new(2 * config.hidden, k, &mut rng);
        let crf = (task != Task::Pd).then(|| Crf::new(k, &mut rng));
        Ok(Self {
            config,
            vocab,
            extractor,
            inventory,
            embeddings,
            bilstm,
            head,
            crf,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.config.task
    }

    pub fn vocabulary(&self) -> &FeatureVocabulary {
        &self.vocab
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn inventory(&self) -> &CandidateInventory {
        &self.inventory
    }

    fn check_provider(&self, provider: &ImplicitProvider) -> Result<(), ModelError> {
        if provider.kind() != self.config.implicit_kind || provider.dim() != self.config.implicit_dim {
            return Err(ModelError::ProviderMismatch {
                expected_kind: self.config.implicit_kind.clone(),
                expected_dim: self.config.implicit_dim,
                found_kind: provider.kind().into(),
                found_dim: provider.dim(),
            });
        }
        Ok(())
    }

    /// Features for `sentence`. Phrase spans are required for ANPP and ignored otherwise.
    pub fn inputs(
        &self,
        sentence: &Sentence,
        spans: Option<&[Range<usize>]>,
        provider: &ImplicitProvider,
    ) -> Result<Inputs<F>, ModelError> {
        self.check_provider(provider)?;
        let spans = match self.config.task {
            Task::Anpp => {
                let s = spans.ok_or(ModelError::MissingSpans)?;
                if !crate::text::is_partition(s, sentence.len()) {
                    return Err(ModelError::SpanMismatch {
                        morphemes: sentence.len(),
                    });
                }
                Some(s)
            }
            _ => None,
        };
        let features = self
            .extractor
            .extract(sentence, spans)
            .iter()
            .map(|b| self.vocab.lookup(b, &self.config.fields))
            .collect::<Result<Vec<_>, _>>()?;
        let implicit = provider.embed(sentence)?.map(|m| m.to_tensor());
        Ok(Inputs {
            features,
            implicit,
            morae: sentence.morphemes.iter().map(|m| m.mora_count()).collect(),
        })
    }

    /// PD targets of `sentence` with their output ranges; `gold` is filled
    /// from the current pronunciation when `with_gold` is set.
    fn pd_targets(&self, sentence: &Sentence, with_gold: bool) -> Result<Vec<PdTarget>, ModelError> {
        let mut out = Vec::new();
        for (i, m) in sentence.morphemes.iter().enumerate() {
            let Some(lemma) = &m.polyphone_lemma else { continue };
            let outputs = self
                .inventory
                .output_range(lemma)
                .ok_or_else(|| ModelError::UnknownLemma(lemma.clone()))?;
            let gold = if with_gold {
                let cands = self.inventory.candidates(lemma).unwrap();
                let k = cands
                    .iter()
                    .position(|p| p == m.pronunciation())
                    .ok_or_else(|| ModelError::GoldNotInInventory {
                        lemma: lemma.clone(),
                        pronunciation: m.pronunciation().into(),
                    })?;
                outputs.start + k
            } else {
                outputs.start
            };
            out.push(PdTarget {
                position: i,
                outputs,
                gold,
            });
        }
        Ok(out)
    }

    pub fn example(&self, s: &AnnotatedSentence, provider: &ImplicitProvider) -> Result<Example<F>, ModelError> {
        let spans = s.spans();
        let inputs = self.inputs(&s.sentence, Some(&spans), provider)?;
        let target = match self.config.task {
            Task::Pd => Target::Pd(self.pd_targets(&s.sentence, true)?),
            Task::Apbp => Target::Boundaries(s.boundaries.flags().iter().map(|&b| usize::from(b)).collect()),
            Task::Anpp => Target::Nuclei {
                labels: s.nucleus_labels.iter().map(|l| l.index()).collect(),
                phrases: PhraseContext {
                    accents: s.sentence.morphemes.iter().map(|m| m.lexical_accent).collect(),
                    gold_nuclei: s.gold_phrases().0.iter().map(|p| p.nucleus).collect(),
                    spans,
                },
            },
        };
        Ok(Example { inputs, target })
    }

    pub fn examples(&self, corpus: &AnnotatedCorpus, provider: &ImplicitProvider) -> Result<Vec<Example<F>>, ModelError> {
        corpus.iter().map(|s| self.example(s, provider)).collect()
    }

    fn embed_inputs(&self, inputs: &Inputs<F>) -> Tensor2<F> {
        let t_len = inputs.len();
        let fd = self.config.field_dim;
        let explicit = self.embeddings.len() * fd;
        let mut x = Tensor2::zeros(t_len, explicit + self.config.implicit_dim);
        for t in 0..t_len {
            let row = x.row_mut(t);
            for (k, emb) in self.embeddings.iter().enumerate() {
                row[k * fd..(k + 1) * fd].copy_from_slice(emb.table.value.row(inputs.features[t][k]));
            }
            if let Some(imp) = &inputs.implicit {
                row[explicit..].copy_from_slice(imp.row(t));
            }
        }
        x
    }

    fn forward(&self, inputs: &Inputs<F>) -> Result<Forward<F>, ModelError> {
        let x = self.embed_inputs(inputs);
        let cache = self.bilstm.forward(&x)?;
        let logits = self.head.forward(&cache.output)?;
        Ok(Forward { x, cache, logits })
    }

    /// Per-word output scores.
    pub fn emissions(&self, inputs: &Inputs<F>) -> Result<Tensor2<F>, ModelError> {
        Ok(self.forward(inputs)?.logits)
    }

    fn loss_and_grad(&self, logits: &Tensor2<F>, target: &Target, crf: Option<&mut Crf<F>>) -> Result<(F, Tensor2<F>), ModelError> {
        let mut d = Tensor2::zeros(logits.rows(), logits.cols());
        let loss = match target {
            Target::Pd(targets) => {
                let mut loss = F::zero();
                for tg in targets {
                    let cands: Vec<usize> = tg.outputs.clone().collect();
                    let (l, g) = masked_softmax_xent(logits.row(tg.position), &cands, tg.gold);
                    loss += l;
                    for (a, b) in d.row_mut(tg.position).iter_mut().zip(g) {
                        *a += b;
                    }
                }
                loss
            }
            Target::Boundaries(labels) | Target::Nuclei { labels, .. } => {
                let crf = crf.expect("sequence tasks have a CRF");
                let (nll, g) = crf.nll_backward(logits, labels)?;
                d = g;
                nll
            }
        };
        Ok((loss, d))
    }

    /// Loss on one example without touching gradients.
    pub fn loss(&self, ex: &Example<F>) -> Result<f64, ModelError> {
        if ex.inputs.is_empty() {
            return Ok(0.0);
        }
        let logits = self.emissions(&ex.inputs)?;
        let mut crf = self.crf.clone();
        Ok(self.loss_and_grad(&logits, &ex.target, crf.as_mut())?.0.as_f64())
    }

    fn backprop(&mut self, ex: &Example<F>) -> Result<f64, ModelError> {
        if ex.inputs.is_empty() || matches!(&ex.target, Target::Pd(t) if t.is_empty()) {
            return Ok(0.0);
        }
        let fwd = self.forward(&ex.inputs)?;
        let mut crf = self.crf.take();
        let res = self.loss_and_grad(&fwd.logits, &ex.target, crf.as_mut());
        self.crf = crf;
        let (loss, d_logits) = res?;
        let d_h = self.head.backward(&fwd.cache.output, &d_logits);
        let d_x = self.bilstm.backward(&fwd.cache, &d_h);
        let fd = self.config.field_dim;
        for (k, emb) in self.embeddings.iter_mut().enumerate() {
            let idx: Vec<usize> = ex.inputs.features.iter().map(|f| f[k]).collect();
            let mut slice = Tensor2::zeros(d_x.rows(), fd);
            for t in 0..d_x.rows() {
                slice.row_mut(t).copy_from_slice(&d_x.row(t)[k * fd..(k + 1) * fd]);
            }
            emb.backward(&idx, &slice);
        }
        debug_assert_eq!(fwd.x.rows(), d_x.rows());
        Ok(loss.as_f64())
    }

    /// Output unit chosen for each PD target.
    pub fn decode_pd(&self, inputs: &Inputs<F>, targets: &[PdTarget]) -> Result<Vec<usize>, ModelError> {
        if targets.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.emissions(inputs)?;
        Ok(targets
            .iter()
            .map(|tg| {
                let cands: Vec<usize> = tg.outputs.clone().collect();
                masked_argmax(logits.row(tg.position), &cands).expect("non-empty candidate set")
            })
            .collect())
    }

    /// Viterbi labels for the sequence tasks. APBP forces a boundary at
    /// position 0; ANPP never emits `NUC(k)` on a word shorter than `k` morae.
    pub fn decode_sequence(&self, inputs: &Inputs<F>) -> Result<Vec<usize>, ModelError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let crf = self.crf.as_ref().expect("sequence tasks have a CRF");
        let logits = self.emissions(inputs)?;
        let (path, _) = match self.config.task {
            Task::Apbp => crf.viterbi_masked(&logits, |t, j| t != 0 || j == 1)?,
            _ => crf.viterbi_masked(&logits, |t, j| {
                NucleusLabel::from_index(j).is_some_and(|l| l.fits(inputs.morae[t]))
            })?,
        };
        Ok(path)
    }

    /// Task metric over examples: PD target accuracy, APBP boundary F1
    /// (position 0 excluded; 1.0 when there is nothing to find), ANPP phrase
    /// nucleus accuracy.
    pub fn metric(&self, examples: &[Example<F>]) -> Result<f64, ModelError> {
        let (mut hit, mut total) = (0usize, 0usize);
        let mut counts = BoundaryCounts::default();
        for ex in examples {
            match &ex.target {
                Target::Pd(targets) => {
                    let pred = self.decode_pd(&ex.inputs, targets)?;
                    hit += pred.iter().zip(targets).filter(|(p, t)| **p == t.gold).count();
                    total += targets.len();
                }
                Target::Boundaries(gold) => {
                    let pred = self.decode_sequence(&ex.inputs)?;
                    let p: Vec<bool> = pred.iter().map(|&x| x == 1).collect();
                    let g: Vec<bool> = gold.iter().map(|&x| x == 1).collect();
                    counts.add(&p, &g, |_| true);
                }
                Target::Nuclei { phrases, .. } => {
                    let pred = self.decode_sequence(&ex.inputs)?;
                    let labels: Vec<NucleusLabel> = pred.iter().map(|&j| NucleusLabel::from_index(j).unwrap()).collect();
                    let (nuclei, _) = resolve_nuclei(&phrases.spans, &ex.inputs.morae, &phrases.accents, &labels);
                    hit += nuclei.iter().zip(&phrases.gold_nuclei).filter(|(a, b)| a == b).count();
                    total += phrases.spans.len();
                }
            }
        }
        Ok(match self.config.task {
            Task::Apbp => counts.f1().unwrap_or(1.0),
            _ if total == 0 => 0.0,
            _ => hit as f64 / total as f64,
        })
    }
}

impl<F: Float> ParamSet<F> for TaggerModel<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        let p = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        for (f, e) in self.config.fields.iter().zip(&self.embeddings) {
            e.params(&p(&format!("emb.{f}")), out);
        }
        self.bilstm.params(&p("bilstm"), out);
        self.head.params(&p("head"), out);
        if let Some(crf) = &self.crf {
            crf.params(&p("crf"), out);
        }
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        let p = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        for (f, e) in self.config.fields.iter().zip(&mut self.embeddings) {
            e.params_mut(&p(&format!("emb.{f}")), out);
        }
        self.bilstm.params_mut(&p("bilstm"), out);
        self.head.params_mut(&p("head"), out);
        if let Some(crf) = &mut self.crf {
            crf.params_mut(&p("crf"), out);
        }
    }
}

impl<F: Float> Trainable for TaggerModel<F> {
    type Example = Example<F>;

    fn zero_grad(&mut self) {
        ParamSet::zero_grad(self);
    }

    fn accumulate(&mut self, example: &Example<F>) -> jfront_neural::Result<f64> {
        self.backprop(example).map_err(|e| match e {
            ModelError::Neural(n) => n,
            other => NeuralError::Corrupt(other.to_string()),
        })
    }

    fn step(&mut self, lr: f64, batch_len: usize) {
        self.sgd_step(F::of(lr / batch_len.max(1) as f64));
    }
}

impl TaggerModel<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut config = Encoder::new();
        config.put_str(c.task.name());
        config.put_strs(&c.fields.iter().map(|f| f.name().to_string()).collect::<Vec<_>>());
        config.put_usize(c.field_dim);
        config.put_usize(c.hidden);
        config.put_str(&c.implicit_kind);
        config.put_usize(c.implicit_dim);
        config.put_u64(c.seed);

        let mut vocab = Encoder::new();
        self.vocab.encode(&mut vocab).expect("model vocabularies are fitted");

        let mut inventory = Encoder::new();
        self.inventory.encode(&mut inventory);

        let mut extractor = Encoder::new();
        extractor.put_str(&self.extractor.sandhi.to_tsv());
        match &self.extractor.ngrams {
            Some(n) => {
                extractor.put_u8(1);
                extractor.put_str(&n.to_tsv());
            }
            None => extractor.put_u8(0),
        }

        let mut container = Container::new(c.task.name());
        container.push("config", config.into_bytes());
        container.push("vocab", vocab.into_bytes());
        container.push("inventory", inventory.into_bytes());
        container.push("extractor", extractor.into_bytes());
        container.push("params", encode_params(&self.named_params()));
        container.encode(MODEL_MAGIC, MODEL_VERSION)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let corrupt = |m: String| ModelError::Neural(NeuralError::Corrupt(m));
        let container = Container::decode(bytes, MODEL_MAGIC, MODEL_VERSION)?;

        let mut dec = Decoder::new(container.section("config")?);
        let task: Task = dec.str("task")?.parse().map_err(corrupt)?;
        if container.tag != task.name() {
            return Err(corrupt(format!("tag {:?} does not match task {task}", container.tag)));
        }
        let fields = dec
            .strs("fields")?
            .iter()
            .map(|n| Field::from_name(n).ok_or_else(|| corrupt(format!("unknown field {n:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let config = ModelConfig {
            task,
            fields,
            field_dim: dec.usize("field_dim")?,
            hidden: dec.usize("hidden")?,
            implicit_kind: dec.str("implicit kind")?,
            implicit_dim: dec.usize("implicit dim")?,
            seed: dec.u64("seed")?,
        };
        dec.finish("config")?;

        let mut dec = Decoder::new(container.section("vocab")?);
        let vocab = FeatureVocabulary::decode(&mut dec)?;
        dec.finish("vocab")?;

        let mut dec = Decoder::new(container.section("inventory")?);
        let inventory = CandidateInventory::decode(&mut dec)?;
        dec.finish("inventory")?;

        let mut dec = Decoder::new(container.section("extractor")?);
        let sandhi = SandhiRuleTable::parse(&dec.str("sandhi table")?)?;
        let ngrams = match dec.u8("ngram flag")? {
            0 => None,
            _ => Some(NgramCounts::parse(&dec.str("ngram counts")?)?),
        };
        dec.finish("extractor")?;

        let input = config.fields.len() * config.field_dim + config.implicit_dim;
        if input == 0 || config.hidden == 0 {
            return Err(corrupt("model has zero-width layers".into()));
        }
        let k = num_outputs(task, &inventory);
        let mut embeddings = Vec::new();
        for &f in &config.fields {
            embeddings.push(Embedding {
                table: Param::zeros(vocab.size(f)?, config.field_dim),
            });
        }
        let mut model = Self {
            bilstm: BiLstm::zeros(input, config.hidden),
            head: Linear {
                weight: Param::zeros(k, 2 * config.hidden),
                bias: Param::zeros(1, k),
            },
            crf: (task != Task::Pd).then(|| Crf::zeros(k)),
            config,
            vocab,
            extractor: FeatureExtractor::new(sandhi, ngrams),
            inventory,
            embeddings,
        };
        decode_params_into(container.section("params")?, &mut model.named_params_mut())?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
