//! Run configuration: a TOML file, overridden by `JFRONT_*` environment
//! variables (paths only), overridden by command-line flags.
//!
//! ```toml
//! task = "pd"            # pd | apbp | anpp
//! preset = "PD6"         # optional, see `Preset`
//! seeds = [1, 2, 3]
//!
//! [paths]                # relative paths resolve against the file's directory
//! lexicon = "lexicon.tsv"
//! matrix = "matrix.txt"
//! train = "corpus.txt"
//! valid = "corpus.txt"
//! test = "corpus.txt"
//! embeddings = "emb.bin"
//! charlm = "charlm.bin"
//! ngrams = "ngrams.tsv"
//! sandhi = "sandhi.tsv"
//! apbp_exceptions = "apbp_exceptions.tsv"
//!
//! [features]
//! explicit = true
//! implicit = "none"      # none | file | charlm
//! ngram = false
//!
//! [model]
//! hidden = 512
//! field_dim = 16
//!
//! [schedule]
//! lr = 0.1
//! batch_size = 32
//! patience = 4
//! anneal_factor = 0.5
//! min_lr = 0.0001
//! max_epochs = 200       # optional
//! plateau = "metric"     # metric | loss
//!
//! [charlm]
//! hidden = 32
//! embedding = 16
//! epochs = 20
//! lr = 0.1
//! batch_size = 8
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use jfront_core::implicit::CharLmConfig;
use jfront_core::model::Task;
use jfront_neural::{Plateau, TrainSchedule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<String>,
    pub preset: Option<String>,
    pub seeds: Vec<u64>,
    pub paths: Paths,
    pub features: Features,
    pub model: Dims,
    pub schedule: Schedule,
    pub charlm: CharLmSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: None,
            preset: None,
            seeds: vec![1],
            paths: Paths::default(),
            features: Features::default(),
            model: Dims::default(),
            schedule: Schedule::default(),
            charlm: CharLmSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub lexicon: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub charlm: Option<PathBuf>,
    pub ngrams: Option<PathBuf>,
    pub sandhi: Option<PathBuf>,
    pub apbp_exceptions: Option<PathBuf>,
}

impl Paths {
    fn slots(&mut self) -> [(&'static str, &mut Option<PathBuf>); 10] {
        [
            ("lexicon", &mut self.lexicon),
            ("matrix", &mut self.matrix),
            ("train", &mut self.train),
            ("valid", &mut self.valid),
            ("test", &mut self.test),
            ("embeddings", &mut self.embeddings),
            ("charlm", &mut self.charlm),
            ("ngrams", &mut self.ngrams),
            ("sandhi", &mut self.sandhi),
            ("apbp_exceptions", &mut self.apbp_exceptions),
        ]
    }

    fn resolve_against(&mut self, base: &Path) {
        for (_, slot) in self.slots() {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    /// `JFRONT_LEXICON`, `JFRONT_TRAIN`, ... replace the file values.
    fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (name, slot) in self.slots() {
            if let Some(v) = lookup(&format!("JFRONT_{}", name.to_uppercase())) {
                if !v.is_empty() {
                    *slot = Some(PathBuf::from(v));
                }
            }
        }
    }

    fn apply(&mut self, other: &Paths) {
        let mut other = other.clone();
        for ((_, slot), (_, new)) in self.slots().into_iter().zip(other.slots()) {
            if new.is_some() {
                *slot = new.take();
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImplicitKind {
    #[default]
    None,
    File,
    Charlm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Features {
    pub explicit: bool,
    pub implicit: ImplicitKind,
    pub ngram: bool,
}

impl Default for Features {
    fn default() -> Self {
        Self {
            explicit: true,
            implicit: ImplicitKind::None,
            ngram: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dims {
    pub hidden: usize,
    pub field_dim: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            hidden: 512,
            field_dim: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlateauKind {
    #[default]
    Metric,
    Loss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub anneal_factor: f64,
    pub min_lr: f64,
    pub max_epochs: Option<usize>,
    pub plateau: PlateauKind,
}

impl Default for Schedule {
    fn default() -> Self {
        let d = TrainSchedule::default();
        Self {
            lr: d.lr,
            batch_size: d.batch_size,
            patience: d.patience,
            anneal_factor: d.anneal_factor,
            min_lr: d.min_lr,
            max_epochs: d.max_epochs,
            plateau: PlateauKind::Metric,
        }
    }
}

impl Schedule {
    pub fn to_schedule(&self, seed: u64) -> TrainSchedule {
        TrainSchedule {
            lr: self.lr,
            batch_size: self.batch_size,
            patience: self.patience,
            anneal_factor: self.anneal_factor,
            min_lr: self.min_lr,
            max_epochs: self.max_epochs,
            plateau: match self.plateau {
                PlateauKind::Metric => Plateau::Metric,
                PlateauKind::Loss => Plateau::TrainingLoss,
            },
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharLmSection {
    pub hidden: usize,
    pub embedding: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for CharLmSection {
    fn default() -> Self {
        let d = CharLmConfig::default();
        Self {
            hidden: d.hidden,
            embedding: d.embedding,
            epochs: d.epochs,
            lr: d.lr,
            batch_size: d.batch_size,
        }
    }
}

impl CharLmSection {
    pub fn to_config(&self, seed: u64) -> CharLmConfig {
        CharLmConfig {
            hidden: self.hidden,
            embedding: self.embedding,
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
        }
    }
}

/// Named system configurations. PD presets pick the inputs of the
/// disambiguation model; AP presets pick the inputs of both accent models,
/// with AP0 meaning the rule-based stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Pd3,
    Pd4,
    Pd5,
    Pd6,
    Pd7,
    Ap0,
    Ap1,
    Ap2,
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "PD3" => Preset::Pd3,
            "PD4" => Preset::Pd4,
            "PD5" => Preset::Pd5,
            "PD6" => Preset::Pd6,
            "PD7" => Preset::Pd7,
            "AP0" => Preset::Ap0,
            "AP1" => Preset::Ap1,
            "AP2" => Preset::Ap2,
            _ => return Err(CliError::Usage(format!("unknown preset {s:?} (expected PD3-PD7 or AP0-AP2)"))),
        })
    }
}

impl Preset {
    pub fn is_rule_based(self) -> bool {
        self == Preset::Ap0
    }

    /// Task and feature switches. AP presets cover two tasks, so they need
    /// the task to be known.
    pub fn apply(self, task: Option<Task>, features: &mut Features) -> Result<Task, CliError> {
        let set = |f: &mut Features, explicit, implicit, ngram| {
            f.explicit = explicit;
            f.implicit = implicit;
            f.ngram = ngram;
        };
        let pd = |t: Option<Task>| match t {
            None | Some(Task::Pd) => Ok(Task::Pd),
            Some(t) => Err(CliError::Usage(format!("preset {self:?} is for pd, not {t}"))),
        };
        let ap = |t: Option<Task>| match t {
            Some(t @ (Task::Apbp | Task::Anpp)) => Ok(t),
            _ => Err(CliError::Usage(format!("preset {self:?} needs --task apbp or --task anpp"))),
        };
        use ImplicitKind as K;
        match self {
            Preset::Pd3 => set(features, true, K::None, false),
            Preset::Pd4 => set(features, false, K::File, false),
            Preset::Pd5 => set(features, false, K::Charlm, false),
            Preset::Pd6 => set(features, true, K::File, false),
            Preset::Pd7 => set(features, true, K::Charlm, false),
            Preset::Ap0 => return Err(CliError::Usage("preset AP0 is rule-based and has no model to train".into())),
            Preset::Ap1 => {
                let t = ap(task)?;
                set(features, true, K::None, t == Task::Apbp);
                return Ok(t);
            }
            Preset::Ap2 => {
                let t = ap(task)?;
                let implicit = if t == Task::Apbp { K::File } else { K::Charlm };
                set(features, true, implicit, false);
                return Ok(t);
            }
        }
        pd(task)
    }
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub task: Option<String>,
    pub preset: Option<String>,
    pub seeds: Vec<u64>,
    pub paths: Paths,
    pub hidden: Option<usize>,
    pub max_epochs: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, toml::de::Error> {
        let mut c: RunConfig = toml::from_str(text)?;
        c.paths.resolve_against(base);
        Ok(c)
    }

    /// File (if any), then environment, then flags.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        flags: &Overrides,
    ) -> Result<Self, CliError> {
        let mut c = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
                let base = path.parent().unwrap_or(Path::new("."));
                Self::parse(&text, base).map_err(|e| CliError::data(path, e))?
            }
            None => Self::default(),
        };
        c.paths.apply_env(env);
        c.paths.apply(&flags.paths);
        if flags.task.is_some() {
            c.task = flags.task.clone();
        }
        if flags.preset.is_some() {
            c.preset = flags.preset.clone();
        }
        if !flags.seeds.is_empty() {
            c.seeds = flags.seeds.clone();
        }
        if let Some(h) = flags.hidden {
            c.model.hidden = h;
        }
        if flags.max_epochs.is_some() {
            c.schedule.max_epochs = flags.max_epochs;
        }
        if c.seeds.is_empty() {
            return Err(CliError::Usage("the seed list is empty".into()));
        }
        Ok(c)
    }

    pub fn task(&self) -> Result<Option<Task>, CliError> {
        self.task.as_deref().map(|t| t.parse().map_err(CliError::Usage)).transpose()
    }

    pub fn preset(&self) -> Result<Option<Preset>, CliError> {
        self.preset.as_deref().map(str::parse).transpose()
    }

    /// The task to train, with the preset's feature switches applied.
    pub fn training_task(&mut self) -> Result<Task, CliError> {
        let task = self.task()?;
        match self.preset()? {
            Some(p) => {
                let t = p.apply(task, &mut self.features)?;
                self.task = Some(t.name().into());
                Ok(t)
            }
            None => task.ok_or_else(|| CliError::Usage("no task given (use --task or --preset)".into())),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unprintable config: {e}>"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_env_flag_precedence() {
        let text = "[paths]\nlexicon = \"lex.tsv\"\ntrain = \"/abs/train.txt\"\nvalid = \"v.txt\"\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        let env = |k: &str| (k == "JFRONT_TRAIN").then(|| "/env/train.txt".to_string());
        let flags = Overrides {
            paths: Paths {
                valid: Some("/flag/v.txt".into()),
                ..Paths::default()
            },
            ..Overrides::default()
        };
        let c = RunConfig::resolve(Some(&path), env, &flags).unwrap();
        assert_eq!(c.paths.lexicon, Some(dir.path().join("lex.tsv")));
        assert_eq!(c.paths.train, Some("/env/train.txt".into()));
        assert_eq!(c.paths.valid, Some("/flag/v.txt".into()));
        assert_eq!(c.seeds, vec![1]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("hiden = 3", Path::new(".")).is_err());
    }

    #[test]
    fn presets_set_feature_switches() {
        let mut f = Features::default();
        assert_eq!(Preset::Pd6.apply(None, &mut f).unwrap(), Task::Pd);
        assert_eq!((f.explicit, f.implicit), (true, ImplicitKind::File));
        Preset::Pd5.apply(Some(Task::Pd), &mut f).unwrap();
        assert_eq!((f.explicit, f.implicit), (false, ImplicitKind::Charlm));
        Preset::Ap1.apply(Some(Task::Apbp), &mut f).unwrap();
        assert!(f.explicit && f.ngram);
        Preset::Ap2.apply(Some(Task::Anpp), &mut f).unwrap();
        assert_eq!((f.implicit, f.ngram), (ImplicitKind::Charlm, false));
        assert!(Preset::Ap1.apply(None, &mut f).is_err());
        assert!(Preset::Pd3.apply(Some(Task::Anpp), &mut f).is_err());
        assert!("PD9".parse::<Preset>().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml(), Path::new("/")).unwrap(), c);
    }
}
