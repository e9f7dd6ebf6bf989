use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use jfront_core::corpus::{load_corpus, AnnotatedCorpus, AnnotatedSentence};
use jfront_core::eval::{anpp_accuracy, apbp_f1, overall_ap, pd_accuracy, BoundarySubset, EvalReport, PhraseSubset};
use jfront_core::features::{Field, FeatureExtractor, NgramCounts};
use jfront_core::implicit::{train_charlm, CharLm, EmbeddingFile, ImplicitProvider};
use jfront_core::lexicon::{ConnectionMatrix, Lexicon, Tokenizer};
use jfront_core::model::{CandidateInventory, ModelConfig, TaggerModel, Task};
use jfront_core::pipeline::{BoundaryStage, NucleusStage, Pipeline, Stage};
use jfront_core::predict::{anpp_predict, apbp_predict, apply_reading, pd_predict, train_tagger, TrainSetup};
use jfront_core::rules::{ApbpExceptions, SandhiRuleTable};
use log::info;

use crate::config::{ImplicitKind, RunConfig};
use crate::error::CliError;

fn required<'a>(path: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("no {what} configured (set paths.{what} or {flag})")))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))
}

/// Reads `path`, or standard input for `None` and `-`.
fn read_input(path: Option<&Path>) -> Result<String, CliError> {
    match path {
        Some(p) if p != Path::new("-") => read_text(p),
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::data(Path::new("<stdin>"), e))?;
            Ok(s)
        }
    }
}

/// Writes to `path`, or standard output for `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::data(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn corpus(path: &Path) -> Result<AnnotatedCorpus, CliError> {
    load_corpus(path).map_err(|e| CliError::data(path, e))
}

fn lexicon(c: &RunConfig) -> Result<Lexicon, CliError> {
    let path = required(&c.paths.lexicon, "lexicon", "--lexicon")?;
    Lexicon::load(path).map_err(|e| CliError::data(path, e))
}

fn tokenizer(c: &RunConfig) -> Result<Tokenizer, CliError> {
    let lex = lexicon(c)?;
    let path = required(&c.paths.matrix, "matrix", "--matrix")?;
    let matrix = ConnectionMatrix::load(path).map_err(|e| CliError::data(path, e))?;
    Tokenizer::new(lex, matrix).map_err(|e| CliError::data(path, e))
}

fn sandhi(c: &RunConfig) -> Result<SandhiRuleTable, CliError> {
    match &c.paths.sandhi {
        Some(p) => SandhiRuleTable::load(p).map_err(|e| CliError::data(p, e)),
        None => Ok(SandhiRuleTable::builtin()),
    }
}

fn apbp_exceptions(c: &RunConfig) -> Result<ApbpExceptions, CliError> {
    match &c.paths.apbp_exceptions {
        Some(p) => ApbpExceptions::load(p).map_err(|e| CliError::data(p, e)),
        None => Ok(ApbpExceptions::builtin()),
    }
}

/// Loads providers on first use so each file is read once per run.
#[derive(Default)]
struct Providers {
    cache: HashMap<&'static str, ImplicitProvider>,
}

impl Providers {
    fn get(&mut self, kind: &str, c: &RunConfig) -> Result<ImplicitProvider, CliError> {
        let key = match kind {
            "none" => return Ok(ImplicitProvider::None),
            "file" => "file",
            "charlm" => "charlm",
            other => return Err(CliError::Invalid(format!("unknown implicit provider kind {other:?}"))),
        };
        if let Some(p) = self.cache.get(key) {
            return Ok(p.clone());
        }
        let p = if key == "file" {
            let path = required(&c.paths.embeddings, "embeddings", "--embeddings")?;
            ImplicitProvider::File(EmbeddingFile::load(path).map_err(|e| CliError::data(path, e))?)
        } else {
            let path = required(&c.paths.charlm, "charlm", "--charlm")?;
            ImplicitProvider::CharLm(CharLm::load(path).map_err(|e| CliError::data(path, e))?)
        };
        self.cache.insert(key, p.clone());
        Ok(p)
    }
}

fn load_model(path: &Path) -> Result<TaggerModel<f32>, CliError> {
    TaggerModel::load(path).map_err(|e| CliError::data(path, e))
}

pub fn tokenize(c: &RunConfig, input: Option<&Path>, nbest: usize, out: Option<&Path>) -> Result<(), CliError> {
    if nbest == 0 {
        return Err(CliError::Usage("--nbest must be at least 1".into()));
    }
    let tok = tokenizer(c)?;
    let text = read_input(input)?;
    let mut buf = String::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        for (rank, a) in tok.nbest(line, nbest).iter().enumerate() {
            if nbest > 1 {
                writeln!(buf, "#rank {} cost {}", rank + 1, a.cost).unwrap();
            }
            for m in &a.sentence.morphemes {
                writeln!(buf, "{}\t{}\t{}\t{}", m.surface, m.pos, m.pronunciation(), m.lexical_accent).unwrap();
            }
            buf.push('\n');
        }
    }
    emit(out, &buf)
}

pub fn build_ngrams(c: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let tok = tokenizer(c)?;
    let file = std::fs::File::open(input).map_err(|e| CliError::data(input, e))?;
    let counts = NgramCounts::build(std::io::BufReader::new(file), &tok).map_err(|e| CliError::data(input, e))?;
    emit(Some(out), &counts.to_tsv())
}

pub fn train_charlm_cmd(c: &RunConfig, input: &Path, out: &Path, report: Option<&Path>) -> Result<(), CliError> {
    let text = read_text(input)?;
    let seed = c.seeds[0];
    info!("seed {seed}");
    let run = train_charlm(&text, &c.charlm.to_config(seed)).map_err(|e| CliError::data(input, e))?;
    run.model.save(out).map_err(|e| CliError::data(out, e))?;
    let mut tsv = String::from("epoch\tperplexity\n");
    for (epoch, p) in run.perplexities.iter().enumerate() {
        writeln!(tsv, "{epoch}\t{p:.6}").unwrap();
    }
    emit(report, &tsv)
}

/// Output path for one seed: `out` itself for a single seed, otherwise
/// `<stem>.seed<N>.<ext>`.
pub fn seed_path(out: &Path, seed: u64, many: bool) -> PathBuf {
    if !many {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    out.with_file_name(name)
}

pub fn train(c: &mut RunConfig, out: &Path, report: Option<&Path>) -> Result<(), CliError> {
    let task = c.training_task()?;
    info!("resolved config:\n{}", c.to_toml());
    let train_path = required(&c.paths.train, "train", "--train")?;
    let train_set = corpus(train_path)?;
    let valid_set = match &c.paths.valid {
        Some(p) => corpus(p)?,
        None => train_set.clone(),
    };
    let mut inventory = CandidateInventory::default();
    if c.paths.lexicon.is_some() {
        inventory.add_lexicon_homographs(&lexicon(c)?);
    }
    let ngrams = if c.features.ngram {
        let path = required(&c.paths.ngrams, "ngrams", "--ngrams")?;
        Some(NgramCounts::load(path).map_err(|e| CliError::data(path, e))?)
    } else {
        None
    };
    let extractor = FeatureExtractor::new(sandhi(c)?, ngrams);
    let kind = match c.features.implicit {
        ImplicitKind::None => "none",
        ImplicitKind::File => "file",
        ImplicitKind::Charlm => "charlm",
    };
    let provider = Providers::default().get(kind, c)?;

    let mut fields = Vec::new();
    if c.features.explicit {
        fields = task.default_fields(c.features.ngram);
        if c.features.ngram && task != Task::Apbp {
            fields.extend(Field::of_families(&[7]));
        }
    }

    let many = c.seeds.len() > 1;
    let mut report_rows = EvalReport::default();
    for &seed in &c.seeds {
        info!("seed {seed}");
        let config = ModelConfig {
            task,
            fields: fields.clone(),
            field_dim: c.model.field_dim,
            hidden: c.model.hidden,
            seed,
            ..ModelConfig::new(task)
        };
        let setup = TrainSetup {
            config,
            schedule: c.schedule.to_schedule(seed),
            extractor: extractor.clone(),
            inventory: inventory.clone(),
            provider: &provider,
        };
        let outcome = train_tagger(setup, &train_set, &valid_set).map_err(CliError::invalid)?;
        let path = seed_path(out, seed, many);
        outcome.model.save(&path).map_err(|e| CliError::data(&path, e))?;
        info!("seed {seed}: best metric {:.6} at epoch {}, saved {}", outcome.best_metric, outcome.best_epoch, path.display());
        report_rows.push("best_metric", task.name(), Some(seed), Some(outcome.best_metric));
        report_rows.push("best_epoch", task.name(), Some(seed), Some(outcome.best_epoch as f64));
    }
    report_rows.add_means();
    print!("{}", report_rows.to_table());
    if let Some(p) = report {
        emit(Some(p), &report_rows.to_tsv())?;
    }
    Ok(())
}

/// Replaces the task's annotation in every sentence with model predictions.
/// ANPP uses the boundaries already in the corpus.
fn predict_corpus(
    model: &TaggerModel<f32>,
    gold: &AnnotatedCorpus,
    provider: &ImplicitProvider,
    lexicon: Option<&Lexicon>,
) -> Result<AnnotatedCorpus, CliError> {
    let mut out = gold.clone();
    for s in &mut out.sentences {
        let id = s.id().to_string();
        let ctx = |e: &dyn std::fmt::Display| CliError::Invalid(format!("sentence {id}: {e}"));
        match model.task() {
            Task::Pd => {
                for (i, pron) in pd_predict(model, &s.sentence, provider).map_err(|e| ctx(&e))? {
                    apply_reading(&mut s.sentence, i, &pron, lexicon).map_err(|e| ctx(&e))?;
                }
            }
            Task::Apbp => s.boundaries = apbp_predict(model, &s.sentence, provider).map_err(|e| ctx(&e))?,
            Task::Anpp => {
                s.nucleus_labels = anpp_predict(model, &s.sentence, &s.spans(), provider).map_err(|e| ctx(&e))?.labels;
            }
        }
    }
    Ok(out)
}

pub fn predict(c: &RunConfig, model: &Path, input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let m = load_model(model)?;
    info!("model {} task {} seed {}", model.display(), m.task(), m.config().seed);
    let provider = Providers::default().get(&m.config().implicit_kind, c)?;
    let gold = corpus(input)?;
    let lex = c.paths.lexicon.as_ref().map(|_| lexicon(c)).transpose()?;
    let pred = predict_corpus(&m, &gold, &provider, lex.as_ref())?;
    emit(out, &pred.to_text())
}

/// Every metric that the two corpora support, as `(name, subset, value)`.
pub fn evaluate(pred: &AnnotatedCorpus, gold: &AnnotatedCorpus) -> Result<Vec<(String, String, Option<f64>)>, CliError> {
    if pred.len() != gold.len() {
        return Err(CliError::Invalid(format!(
            "prediction has {} sentences, gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    for (p, g) in pred.iter().zip(gold.iter()) {
        if p.id() != g.id() || p.sentence.len() != g.sentence.len() {
            return Err(CliError::Invalid(format!(
                "sentence {} does not line up with gold {}",
                p.id(),
                g.id()
            )));
        }
    }
    let mut rows = Vec::new();
    let mut push = |name: &str, subset: &str, v: Option<f64>| rows.push((name.to_string(), subset.to_string(), v));

    let readings = |c: &AnnotatedCorpus, targets: &[Vec<usize>]| -> Vec<Vec<String>> {
        c.iter()
            .zip(targets)
            .map(|(s, t)| t.iter().map(|&i| s.sentence.morphemes[i].pronunciation().to_string()).collect())
            .collect()
    };
    let targets: Vec<Vec<usize>> = gold.iter().map(AnnotatedSentence::targets).collect();
    let pd = pd_accuracy(&readings(pred, &targets), &readings(gold, &targets)).map_err(CliError::invalid)?;
    push("pd_accuracy", "all", pd);

    let sents: Vec<_> = gold.iter().map(|s| s.sentence.clone()).collect();
    let pb: Vec<_> = pred.iter().map(|s| s.boundaries.clone()).collect();
    let gb: Vec<_> = gold.iter().map(|s| s.boundaries.clone()).collect();
    for subset in [BoundarySubset::All, BoundarySubset::AdjacentNouns] {
        push("apbp_f1", subset.name(), apbp_f1(&pb, &gb, &sents, subset).map_err(CliError::invalid)?);
    }

    let pp: Vec<_> = pred.iter().map(|s| s.gold_phrases().0).collect();
    let gp: Vec<_> = gold.iter().map(|s| s.gold_phrases().0).collect();
    let spans_agree = pb == gb;
    for subset in [PhraseSubset::All, PhraseSubset::LongPhrases] {
        // Nucleus accuracy is only defined on shared phrase spans.
        let v = if spans_agree {
            anpp_accuracy(&pp, &gp, subset).map_err(CliError::invalid)?
        } else {
            None
        };
        push("anpp_accuracy", subset.name(), v);
    }

    let ppitch: Vec<_> = pred.iter().map(AnnotatedSentence::gold_pitch).collect();
    let gpitch: Vec<_> = gold.iter().map(AnnotatedSentence::gold_pitch).collect();
    let ap = overall_ap(&ppitch, &gpitch).map_err(CliError::invalid)?;
    push("snt_exact", "all", ap.snt_exact);
    push("mora_accuracy", "all", ap.mora_accuracy);
    Ok(rows)
}

pub fn eval(c: &RunConfig, gold_path: &Path, preds: &[PathBuf], models: &[PathBuf], report: Option<&Path>) -> Result<(), CliError> {
    if preds.is_empty() == models.is_empty() {
        return Err(CliError::Usage("give either --pred or --model".into()));
    }
    let gold = corpus(gold_path)?;
    let mut out = EvalReport::default();
    if preds.len() == 1 {
        for (name, subset, v) in evaluate(&corpus(&preds[0])?, &gold)? {
            out.push(&name, &subset, None, v);
        }
    } else if !preds.is_empty() {
        let runs: Vec<(u64, &PathBuf)> = preds.iter().enumerate().map(|(i, p)| (i as u64 + 1, p)).collect();
        for (seed, p) in runs {
            for (name, subset, v) in evaluate(&corpus(p)?, &gold)? {
                out.push(&name, &subset, Some(seed), v);
            }
        }
        out.add_means();
    } else {
        let lex = c.paths.lexicon.as_ref().map(|_| lexicon(c)).transpose()?;
        let mut providers = Providers::default();
        for path in models {
            let m = load_model(path)?;
            let seed = m.config().seed;
            info!("model {} task {} seed {seed}", path.display(), m.task());
            let provider = providers.get(&m.config().implicit_kind, c)?;
            let pred = predict_corpus(&m, &gold, &provider, lex.as_ref())?;
            let task_metrics: &[&str] = match m.task() {
                Task::Pd => &["pd_accuracy"],
                Task::Apbp => &["apbp_f1"],
                Task::Anpp => &["anpp_accuracy"],
            };
            for (name, subset, v) in evaluate(&pred, &gold)? {
                if task_metrics.contains(&name.as_str()) {
                    out.push(&name, &subset, (models.len() > 1).then_some(seed), v);
                }
            }
        }
        if models.len() > 1 {
            out.add_means();
        }
    }
    print!("{}", out.to_table());
    if let Some(p) = report {
        emit(Some(p), &out.to_tsv())?;
    }
    Ok(())
}

pub struct PipelineArgs<'a> {
    pub input: Option<&'a Path>,
    pub corpus: Option<&'a Path>,
    pub pd_model: Option<&'a Path>,
    pub apbp_model: Option<&'a Path>,
    pub anpp_model: Option<&'a Path>,
    pub gold_boundaries: bool,
    pub gold_nuclei: bool,
    pub out: Option<&'a Path>,
}

pub fn pipeline(c: &RunConfig, a: &PipelineArgs<'_>) -> Result<(), CliError> {
    if a.input.is_some() && a.corpus.is_some() {
        return Err(CliError::Usage("give either --input or --corpus, not both".into()));
    }
    if (a.gold_boundaries || a.gold_nuclei) && a.corpus.is_none() {
        return Err(CliError::Usage("gold stages need an annotated --corpus".into()));
    }
    let rules_only = c.preset()?.is_some_and(|p| p.is_rule_based());
    if rules_only && (a.apbp_model.is_some() || a.anpp_model.is_some()) {
        return Err(CliError::Usage("preset AP0 uses the rule-based accent stages; drop the accent models".into()));
    }
    let mut providers = Providers::default();
    let mut stage = |path: &Path, task: Task| -> Result<Stage, CliError> {
        let model = load_model(path)?;
        if model.task() != task {
            return Err(CliError::data(path, format!("expected a {task} model, found {}", model.task())));
        }
        info!("{task} model {} seed {}", path.display(), model.config().seed);
        let provider = providers.get(&model.config().implicit_kind, c)?;
        Ok(Stage { model, provider })
    };
    let pd = a.pd_model.map(|p| stage(p, Task::Pd)).transpose()?;
    let boundaries = match a.apbp_model {
        Some(p) => BoundaryStage::Model(stage(p, Task::Apbp)?),
        None => BoundaryStage::Rules(apbp_exceptions(c)?),
    };
    let nuclei = match a.anpp_model {
        Some(p) => NucleusStage::Model(stage(p, Task::Anpp)?),
        None => NucleusStage::Rules(sandhi(c)?),
    };
    let p = Pipeline {
        tokenizer: tokenizer(c)?,
        pd,
        boundaries,
        nuclei,
    };

    let mut buf = String::new();
    let fail = |id: &str, e: &dyn std::fmt::Display| CliError::Invalid(format!("sentence {id}: {e}"));
    if let Some(path) = a.corpus {
        for s in corpus(path)?.iter() {
            let o = p.run_annotated(s, a.gold_boundaries, a.gold_nuclei).map_err(|e| fail(s.id(), &e))?;
            buf.push_str(&o.to_text());
            buf.push('\n');
        }
    } else {
        let text = read_input(a.input)?;
        let lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        for (i, line) in lines.enumerate() {
            // `id<TAB>text` keeps ids stable for file-backed providers.
            let (id, body) = match line.split_once('\t') {
                Some((id, body)) => (id.to_string(), body),
                None => (format!("line{:04}", i + 1), line),
            };
            let o = p.run(&id, body).map_err(|e| fail(&id, &e))?;
            buf.push_str(&o.to_text());
            buf.push('\n');
        }
    }
    emit(a.out, &buf)
}
