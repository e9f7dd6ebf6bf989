//! A small bidirectional character language model used as a frozen feature
//! extractor.
//!
//! The forward model reads `<s> c1 .. cn` and predicts `c1 .. cn </s>`; the
//! backward model reads `</s> cn .. c1` and predicts `cn .. c1 <s>`. A
//! morpheme is represented by the forward state after its last character
//! concatenated with the backward state after its first character.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use jfront_neural::binio::{decode_params_into, encode_params, Container, Decoder, Encoder};
use jfront_neural::loss::softmax_xent;
use jfront_neural::{Embedding, Float, Linear, Lstm, Param, ParamSet, Tensor2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingMatrix, ImplicitError};
use crate::text::{normalize, Sentence};

pub(crate) const MODEL_MAGIC: &[u8; 4] = b"JTFM";
pub(crate) const MODEL_VERSION: u32 = 1;
const TAG: &str = "charlm";

const UNK: usize = 0;
const BOS: usize = 1;
const EOS: usize = 2;
const RESERVED: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct CharLmConfig {
    pub hidden: usize,
    pub embedding: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CharLmConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            embedding: 16,
            epochs: 20,
            lr: 0.1,
            batch_size: 8,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Direction<F: Float> {
    embed: Embedding<F>,
    lstm: Lstm<F>,
    out: Linear<F>,
}

impl<F: Float> Direction<F> {
    fn new(vocab: usize, emb: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            embed: Embedding::new(vocab, emb, rng),
            lstm: Lstm::new(emb, hidden, rng),
            out: Linear::new(hidden, vocab, rng),
        }
    }

    fn zeros(vocab: usize, emb: usize, hidden: usize) -> Self {
        Self {
            embed: Embedding {
                table: Param::zeros(vocab, emb),
            },
            lstm: Lstm::zeros(emb, hidden),
            out: Linear {
                weight: Param::zeros(vocab, hidden),
                bias: Param::zeros(1, vocab),
            },
        }
    }

    fn states(&self, inputs: &[usize]) -> Tensor2<F> {
        let x = self.embed.forward(inputs);
        self.lstm.forward(&x).expect("embedding width matches LSTM input").hidden
    }

    /// Summed negative log-likelihood of `targets`.
    fn nll(&self, inputs: &[usize], targets: &[usize]) -> f64 {
        let h = self.states(inputs);
        let logits = self.out.forward(&h).expect("hidden width matches projection");
        targets
            .iter()
            .enumerate()
            .map(|(t, &y)| softmax_xent(logits.row(t), y).0.as_f64())
            .sum()
    }

    /// Accumulates gradients of the mean per-symbol loss; returns that loss.
    fn accumulate(&mut self, inputs: &[usize], targets: &[usize]) -> f64 {
        let x = self.embed.forward(inputs);
        let cache = self.lstm.forward(&x).expect("embedding width matches LSTM input");
        let logits = self.out.forward(&cache.hidden).expect("hidden width matches projection");
        let n = F::of(targets.len() as f64);
        let mut d_logits = Tensor2::zeros(logits.rows(), logits.cols());
        let mut loss = 0.0;
        for (t, &y) in targets.iter().enumerate() {
            let (l, g) = softmax_xent(logits.row(t), y);
            loss += l.as_f64();
            for (d, gv) in d_logits.row_mut(t).iter_mut().zip(g) {
                *d = gv / n;
            }
        }
        let d_hidden = self.out.backward(&cache.hidden, &d_logits);
        let dx = self.lstm.backward(&cache, &d_hidden);
        self.embed.backward(inputs, &dx);
        loss / targets.len() as f64
    }
}

impl<F: Float> ParamSet<F> for Direction<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        self.embed.params(&format!("{prefix}.embed"), out);
        self.lstm.params(&format!("{prefix}.lstm"), out);
        self.out.params(&format!("{prefix}.out"), out);
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        self.embed.params_mut(&format!("{prefix}.embed"), out);
        self.lstm.params_mut(&format!("{prefix}.lstm"), out);
        self.out.params_mut(&format!("{prefix}.out"), out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharLm<F: Float = f32> {
    chars: Vec<char>,
    index: HashMap<char, usize>,
    embedding: usize,
    hidden: usize,
    forward: Direction<F>,
    backward: Direction<F>,
}

fn corpus_lines(text: &str) -> Vec<Vec<char>> {
    text.lines()
        .map(|l| normalize(l).chars().filter(|c| !c.is_whitespace()).collect::<Vec<_>>())
        .filter(|l| !l.is_empty())
        .collect()
}

fn forward_io(ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let inputs = std::iter::once(BOS).chain(ids.iter().copied()).collect();
    let targets = ids.iter().copied().chain(std::iter::once(EOS)).collect();
    (inputs, targets)
}

fn backward_io(ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let rev: Vec<usize> = ids.iter().rev().copied().collect();
    let inputs = std::iter::once(EOS).chain(rev.iter().copied()).collect();
    let targets = rev.into_iter().chain(std::iter::once(BOS)).collect();
    (inputs, targets)
}

impl<F: Float> CharLm<F> {
    fn with_vocab(
        chars: Vec<char>,
        embedding: usize,
        hidden: usize,
        init: impl FnOnce(usize) -> (Direction<F>, Direction<F>),
    ) -> Self {
        assert!(hidden > 0 && embedding > 0, "charlm dimensions must be positive");
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i + RESERVED)).collect();
        let (forward, backward) = init(chars.len() + RESERVED);
        Self {
            chars,
            index,
            embedding,
            hidden,
            forward,
            backward,
        }
    }

    /// Randomly initialised model over the characters of `text`.
    pub fn new(text: &str, config: &CharLmConfig) -> Self {
        let chars: BTreeSet<char> = corpus_lines(text).into_iter().flatten().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::with_vocab(chars.into_iter().collect(), config.embedding, config.hidden, |v| {
            let f = Direction::new(v, config.embedding, config.hidden, &mut rng);
            let b = Direction::new(v, config.embedding, config.hidden, &mut rng);
            (f, b)
        })
    }

    /// All-zero parameters over the characters of `text`.
    pub fn zeros(text: &str, embedding: usize, hidden: usize) -> Self {
        let chars: BTreeSet<char> = corpus_lines(text).into_iter().flatten().collect();
        Self::with_vocab(chars.into_iter().collect(), embedding, hidden, |v| {
            (Direction::zeros(v, embedding, hidden), Direction::zeros(v, embedding, hidden))
        })
    }

    /// Characters plus the unknown, begin and end symbols.
    pub fn vocab_size(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Width of [`charlm_embed`] rows.
    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    fn ids(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|c| self.index.get(c).copied().unwrap_or(UNK)).collect()
    }

    /// Per-symbol perplexity of both directions over the lines of `text`.
    pub fn perplexity(&self, text: &str) -> f64 {
        let mut nll = 0.0;
        let mut n = 0usize;
        for line in corpus_lines(text) {
            let ids = self.ids(&line);
            let (fi, ft) = forward_io(&ids);
            let (bi, bt) = backward_io(&ids);
            nll += self.forward.nll(&fi, &ft) + self.backward.nll(&bi, &bt);
            n += ft.len() + bt.len();
        }
        if n == 0 {
            return 1.0;
        }
        (nll / n as f64).exp()
    }

    /// Sum over the lines of `text` of the mean per-symbol loss of each
    /// direction. This is the objective that training minimises.
    pub fn training_loss(&self, text: &str) -> f64 {
        corpus_lines(text)
            .iter()
            .map(|line| {
                let ids = self.ids(line);
                let (fi, ft) = forward_io(&ids);
                let (bi, bt) = backward_io(&ids);
                self.forward.nll(&fi, &ft) / ft.len() as f64 + self.backward.nll(&bi, &bt) / bt.len() as f64
            })
            .sum()
    }

    /// Adds the gradient of [`CharLm::training_loss`] to the parameter
    /// gradients and returns the loss.
    pub fn accumulate(&mut self, text: &str) -> f64 {
        let mut loss = 0.0;
        for line in corpus_lines(text) {
            let ids = self.ids(&line);
            let (fi, ft) = forward_io(&ids);
            let (bi, bt) = backward_io(&ids);
            loss += self.forward.accumulate(&fi, &ft) + self.backward.accumulate(&bi, &bt);
        }
        loss
    }
}

impl CharLm<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut config = Encoder::new();
        config.put_usize(self.embedding);
        config.put_usize(self.hidden);
        config.put_str(&self.chars.iter().collect::<String>());
        let mut c = Container::new(TAG);
        c.push("config", config.into_bytes());
        c.push("params", encode_params(&self.named_params()));
        c.encode(MODEL_MAGIC, MODEL_VERSION)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ImplicitError> {
        let c = Container::decode(bytes, MODEL_MAGIC, MODEL_VERSION)?;
        if c.tag != TAG {
            return Err(jfront_neural::NeuralError::Corrupt(format!("expected a {TAG} model, found {:?}", c.tag)).into());
        }
        let mut dec = Decoder::new(c.section("config")?);
        let embedding = dec.usize("embedding")?;
        let hidden = dec.usize("hidden")?;
        let chars: Vec<char> = dec.str("characters")?.chars().collect();
        dec.finish("config")?;
        if embedding == 0 || hidden == 0 {
            return Err(jfront_neural::NeuralError::Corrupt("zero charlm dimension".into()).into());
        }
        let mut lm = Self::with_vocab(chars, embedding, hidden, |v| {
            (Direction::zeros(v, embedding, hidden), Direction::zeros(v, embedding, hidden))
        });
        decode_params_into(c.section("params")?, &mut lm.named_params_mut())?;
        Ok(lm)
    }

    pub fn load(path: &Path) -> Result<Self, ImplicitError> {
        let bytes = std::fs::read(path).map_err(|source| ImplicitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), ImplicitError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ImplicitError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

impl<F: Float> ParamSet<F> for CharLm<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        let p = if prefix.is_empty() { String::new() } else { format!("{prefix}.") };
        self.forward.params(&format!("{p}fwd"), out);
        self.backward.params(&format!("{p}bwd"), out);
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        let p = if prefix.is_empty() { String::new() } else { format!("{prefix}.") };
        self.forward.params_mut(&format!("{p}fwd"), out);
        self.backward.params_mut(&format!("{p}bwd"), out);
    }
}

/// A trained model with the training-set perplexity before the first epoch
/// (`perplexities[0]`) and after each epoch.
#[derive(Clone, Debug)]
pub struct CharLmTraining {
    pub model: CharLm,
    pub perplexities: Vec<f64>,
}

/// Mini-batch SGD on both directions; the gradient is averaged over lines.
pub fn train_charlm(text: &str, config: &CharLmConfig) -> Result<CharLmTraining, ImplicitError> {
    let lines = corpus_lines(text);
    if lines.is_empty() {
        return Err(ImplicitError::EmptyCorpus);
    }
    let mut model = CharLm::<f32>::new(text, config);
    let examples: Vec<_> = lines
        .iter()
        .map(|l| {
            let ids = model.ids(l);
            (forward_io(&ids), backward_io(&ids))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut perplexities = vec![model.perplexity(text)];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size.max(1)) {
            model.zero_grad();
            for &i in batch {
                let ((fi, ft), (bi, bt)) = &examples[i];
                model.forward.accumulate(fi, ft);
                model.backward.accumulate(bi, bt);
            }
            model.sgd_step((config.lr / batch.len() as f64) as f32);
        }
        perplexities.push(model.perplexity(text));
    }
    Ok(CharLmTraining { model, perplexities })
}

/// Forward state at each morpheme's last character concatenated with the
/// backward state at its first character. Unknown characters map to UNK.
pub fn charlm_embed(model: &CharLm, sentence: &Sentence) -> EmbeddingMatrix {
    let chars: Vec<char> = sentence.morphemes.iter().flat_map(|m| m.surface.chars()).collect();
    let ids = model.ids(&chars);
    let n = ids.len();
    let (fi, _) = forward_io(&ids);
    let (bi, _) = backward_io(&ids);
    let fwd = model.forward.states(&fi);
    let bwd = model.backward.states(&bi);
    let h = model.hidden;
    let mut data = Vec::with_capacity(sentence.len() * 2 * h);
    let mut start = 0;
    for m in &sentence.morphemes {
        let end = start + m.surface.chars().count();
        // Row t of the forward states has read t characters; row t of the
        // backward states has read the last t characters.
        data.extend_from_slice(fwd.row(end));
        data.extend_from_slice(bwd.row(n - start));
        start = end;
    }
    EmbeddingMatrix::new(2 * h, data)
}
