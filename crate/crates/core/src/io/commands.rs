use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::records::{read_dataset, write_dataset, write_json, DataFormat, Manifest};
use crate::complexity::{analyze, ComplexityReport};
use crate::error::{Error, Result};
use crate::grammar::{build_grammar, Grammar, ValidationReport};
use crate::kernels::checks::{kernel_check, CheckOutcome};
use crate::kernels::report::{param_report, ParamReport};
use crate::kernels::ModelKind;
use crate::oracle::{oracle_eval, OracleReport};
use crate::tasks::generate;

pub const GRAMMAR_FILE: &str = "grammar.json";
pub const VALIDATION_FILE: &str = "grammar.validation.json";
pub const ANALYSIS_FILE: &str = "grammar.analysis.json";
pub const CONFIG_FILE: &str = "run.toml";

#[derive(Debug, Clone)]
pub struct GrammarArtifacts {
    pub grammar: Grammar,
    pub validation: ValidationReport,
    pub analysis: ComplexityReport,
    pub path: PathBuf,
}

/// Builds the grammar and writes it with its validation and analysis reports.
pub fn cmd_gen_grammar(config: &RunConfig, out: &Path) -> Result<GrammarArtifacts> {
    config.validate()?;
    let grammar = build_grammar(&config.grammar)?;
    let validation = grammar.validate_disambiguable();
    let analysis = analyze(&grammar)?;
    std::fs::create_dir_all(out)?;
    let path = out.join(GRAMMAR_FILE);
    std::fs::write(&path, grammar.to_json()? + "\n")?;
    write_json(&out.join(VALIDATION_FILE), &validation)?;
    write_json(&out.join(ANALYSIS_FILE), &analysis)?;
    std::fs::write(out.join(CONFIG_FILE), config.to_toml()?)?;
    Ok(GrammarArtifacts {
        grammar,
        validation,
        analysis,
        path,
    })
}

pub fn load_grammar(path: &Path) -> Result<Grammar> {
    Grammar::from_json(&std::fs::read_to_string(path)?)
}

/// Generates the train and test splits of `config` from an existing grammar
/// file and writes them with manifests.
pub fn cmd_gen_dataset(
    config: &RunConfig,
    grammar_path: &Path,
    out: &Path,
    format: DataFormat,
) -> Result<Vec<Manifest>> {
    config.validate()?;
    let grammar = load_grammar(grammar_path)?;
    let validation = grammar.validate_disambiguable();
    if !validation.passed {
        return Err(Error::InvalidGrammar(format!(
            "{} violates disambiguability ({} violations)",
            grammar_path.display(),
            validation.violations.len()
        )));
    }
    let hash = grammar.content_hash();
    let id = grammar.grammar_id();
    let mut manifests = Vec::new();
    for task in [&config.train, &config.test] {
        for dataset in generate(&grammar, task)? {
            manifests.push(write_dataset(out, &dataset, format, &hash, &id, grammar.vocab_size())?);
        }
    }
    Ok(manifests)
}

pub fn cmd_analyze(grammar_path: &Path) -> Result<(ComplexityReport, ValidationReport)> {
    let grammar = load_grammar(grammar_path)?;
    Ok((analyze(&grammar)?, grammar.validate_disambiguable()))
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutcome {
    pub report: OracleReport,
    pub manifest: Manifest,
    pub content_hash_ok: bool,
}

impl EvalOutcome {
    pub fn certified(&self) -> bool {
        self.report.certified()
    }
}

/// Runs the oracle over a stored dataset. The grammar must be the one the
/// manifest names; a changed data file is reported but still evaluated.
pub fn cmd_oracle_eval(dataset_path: &Path, grammar_path: &Path) -> Result<EvalOutcome> {
    let grammar = load_grammar(grammar_path)?;
    let loaded = read_dataset(dataset_path)?;
    let found = grammar.content_hash();
    if found != loaded.manifest.grammar_hash {
        return Err(Error::HashMismatch {
            expected: loaded.manifest.grammar_hash,
            found,
        });
    }
    let report = oracle_eval(&grammar, &loaded.dataset);
    Ok(EvalOutcome {
        report,
        manifest: loaded.manifest,
        content_hash_ok: loaded.content_hash_ok,
    })
}

pub fn parse_models(names: &[String]) -> Result<Vec<ModelKind>> {
    if names.is_empty() || names.iter().any(|n| n == "all") {
        return Ok(ModelKind::ALL.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

pub fn cmd_kernel_check(kinds: &[ModelKind], seed: u64) -> Result<Vec<(ModelKind, Vec<CheckOutcome>)>> {
    kinds.iter().map(|&k| Ok((k, kernel_check(k, seed)?))).collect()
}

pub fn cmd_param_report(seed: u64) -> Result<ParamReport> {
    param_report(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::profile;

    #[test]
    fn tiny_pipeline_certifies() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = profile("tiny").unwrap();
        let art = cmd_gen_grammar(&cfg, dir.path()).unwrap();
        assert!(art.validation.passed);
        let manifests = cmd_gen_dataset(&cfg, &art.path, dir.path(), DataFormat::Text).unwrap();
        assert_eq!(manifests.len(), 2);
        for m in &manifests {
            let out = cmd_oracle_eval(&dir.path().join(&m.file), &art.path).unwrap();
            assert!(out.certified() && out.content_hash_ok);
        }
    }

    #[test]
    fn grammar_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = profile("tiny").unwrap();
        let art = cmd_gen_grammar(&cfg, &dir.path().join("a")).unwrap();
        let other = cmd_gen_grammar(&cfg.clone().with_seed(99), &dir.path().join("b")).unwrap();
        let m = cmd_gen_dataset(&cfg, &art.path, dir.path(), DataFormat::Binary).unwrap();
        let err = cmd_oracle_eval(&dir.path().join(&m[0].file), &other.path).unwrap_err();
        assert!(matches!(err, Error::HashMismatch { .. }));
    }

    #[test]
    fn model_names() {
        assert_eq!(parse_models(&[]).unwrap().len(), 9);
        assert_eq!(parse_models(&["gla".into()]).unwrap(), vec![ModelKind::GLA]);
        assert!(matches!(parse_models(&["lstm".into()]), Err(Error::UnknownModel { .. })));
    }
}
