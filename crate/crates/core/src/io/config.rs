use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::GrammarConfig;
use crate::tasks::{DataSplit, GapTest, TaskConfig};

pub const RUN_FORMAT_VERSION: u32 = 1;

/// Everything needed to regenerate a grammar and its datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default = "default_version")]
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grammar: GrammarConfig,
    pub train: TaskConfig,
    pub test: TaskConfig,
}

fn default_version() -> u32 {
    RUN_FORMAT_VERSION
}

pub const PROFILES: [&str; 5] = ["paper-main", "task2-paper", "task3-paper", "task4-sweep", "tiny"];

fn task(task: u8, split: DataSplit, num_sequences: usize) -> TaskConfig {
    TaskConfig {
        task,
        split,
        num_sequences,
        ..TaskConfig::default()
    }
}

/// Built-in experiment profiles.
pub fn profile(name: &str) -> Result<RunConfig> {
    let main_grammar = GrammarConfig::default();
    let (grammar, train, test) = match name {
        "paper-main" => (
            main_grammar,
            task(1, DataSplit::Train, 200_000),
            task(1, DataSplit::Test, 1_000),
        ),
        "task2-paper" => (
            main_grammar,
            task(2, DataSplit::Train, 200_000),
            task(2, DataSplit::Test, 1_000),
        ),
        "task3-paper" => (
            main_grammar,
            TaskConfig {
                p_gap: 0.1,
                ..task(3, DataSplit::Train, 200_000)
            },
            TaskConfig {
                p_gap: 1.0,
                ..task(3, DataSplit::Test, 1_000)
            },
        ),
        "task4-sweep" => (
            main_grammar,
            task(4, DataSplit::Train, 200_000),
            TaskConfig {
                gap_test: GapTest::Sweep((1..=10).map(|i| i * 10).collect()),
                ..task(4, DataSplit::Test, 1_000)
            },
        ),
        "tiny" => (
            GrammarConfig {
                num_observables: 4,
                ambiguity: 2,
                p_transition: 0.1,
                ..GrammarConfig::default()
            },
            TaskConfig {
                t_max: 20,
                ..task(1, DataSplit::Train, 50)
            },
            TaskConfig {
                t_max: 20,
                ..task(1, DataSplit::Test, 20)
            },
        ),
        _ => {
            return Err(Error::UnknownProfile {
                name: name.to_string(),
                valid: PROFILES.join(", "),
            })
        }
    };
    Ok(RunConfig {
        profile: Some(name.to_string()),
        format_version: RUN_FORMAT_VERSION,
        output_dir: None,
        grammar,
        train,
        test,
    })
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Parses TOML. A `profile` key supplies defaults that the remaining keys
    /// override field by field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Value = toml::from_str(text)?;
        let value = match user.get("profile").and_then(|p| p.as_str()) {
            Some(name) => {
                let mut base = toml::Value::try_from(profile(name)?)
                    .map_err(|e| Error::Format(format!("profile serialization: {e}")))?;
                merge(&mut base, user);
                base
            }
            None => user,
        };
        let config: RunConfig = value.try_into()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != RUN_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported format_version {} (supported: {RUN_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if let Some(p) = &self.profile {
            profile(p)?;
        }
        self.grammar.validate()?;
        for (cfg, split) in [(&self.train, DataSplit::Train), (&self.test, DataSplit::Test)] {
            cfg.validate()?;
            if cfg.split != split {
                return Err(Error::InvalidConfig(format!(
                    "the {} section declares split {}",
                    split.name(),
                    cfg.split.name()
                )));
            }
        }
        Ok(())
    }

    /// Uses `seed` for the grammar and both splits.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.grammar.seed = seed;
        self.train.seed = seed;
        self.test.seed = seed;
        self
    }
}
