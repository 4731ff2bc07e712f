//! Exact online disambiguator.
//!
//! The oracle sees only encoded vectors. Dense vectors that are not exact
//! one-hots are noise gaps; a one-hot observable that no believed latent can
//! reach is a non-grammatical gap. Everything else is a grammar symbol and
//! advances the belief. On observation-deterministic grammars the belief stays
//! a singleton, so the oracle reproduces every target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::tasks::{decode_one_hot, encode_token, Dataset, Token, TokenStream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefState {
    /// Latents consistent with the prefix, sorted.
    pub latents: Vec<usize>,
    pub step: usize,
}

impl BeliefState {
    pub fn is_singleton(&self) -> bool {
        self.latents.len() == 1
    }

    /// The singleton member (the smallest member for larger beliefs).
    pub fn current(&self) -> usize {
        self.latents[0]
    }
}

pub fn oracle_init(grammar: &Grammar, first_observable: usize) -> Result<BeliefState> {
    if first_observable >= grammar.num_observables() {
        return Err(Error::IdOutOfRange {
            id: first_observable,
            vocab: grammar.num_observables(),
        });
    }
    let latents: Vec<usize> = grammar
        .initial_set()
        .iter()
        .copied()
        .filter(|&z| grammar.obs_of(z) == Some(first_observable))
        .collect();
    if latents.is_empty() {
        return Err(Error::EmptyBelief { position: 0 });
    }
    Ok(BeliefState { latents, step: 1 })
}

/// Advances the belief on one encoded vector and returns the prediction.
pub fn oracle_step_encoded(grammar: &Grammar, belief: BeliefState, encoded: &[f32]) -> Result<(BeliefState, usize)> {
    let position = belief.step;
    let Some(s) = decode_one_hot(encoded) else {
        // Dense noise.
        let z = belief.current();
        return Ok((BeliefState { step: position + 1, ..belief }, z));
    };
    if s == grammar.terminal_observable() {
        return Ok((
            BeliefState {
                step: position + 1,
                ..belief
            },
            grammar.terminal_latent(),
        ));
    }
    if s > grammar.terminal_observable() {
        return Err(Error::IdOutOfRange {
            id: s,
            vocab: grammar.vocab_size(),
        });
    }
    let mut next: Vec<usize> = belief
        .latents
        .iter()
        .flat_map(|&z| grammar.edges(z).iter())
        .map(|e| e.target)
        .filter(|&t| t < grammar.latent_count() && grammar.obs_of(t) == Some(s))
        .collect();
    next.sort_unstable();
    next.dedup();
    if next.is_empty() {
        // Unreachable from every believed latent: a non-grammatical gap.
        let z = belief.current();
        return Ok((BeliefState { step: position + 1, ..belief }, z));
    }
    let prediction = next[0];
    Ok((
        BeliefState {
            latents: next,
            step: position + 1,
        },
        prediction,
    ))
}

pub fn oracle_step(grammar: &Grammar, belief: BeliefState, token: &Token) -> Result<(BeliefState, usize)> {
    let encoded = encode_token(token, grammar.vocab_size())?;
    oracle_step_encoded(grammar, belief, &encoded)
}

/// Runs the oracle over a whole encoded sequence.
pub fn predict_encoded(grammar: &Grammar, encoded: &[Vec<f32>]) -> Result<Vec<usize>> {
    let Some(first) = encoded.first() else {
        return Ok(Vec::new());
    };
    let s = decode_one_hot(first).ok_or(Error::EmptyBelief { position: 0 })?;
    let mut belief = oracle_init(grammar, s)?;
    let mut predictions = Vec::with_capacity(encoded.len());
    predictions.push(belief.current());
    for v in &encoded[1..] {
        let (next, p) = oracle_step_encoded(grammar, belief, v)?;
        belief = next;
        predictions.push(p);
    }
    Ok(predictions)
}

pub fn predict(grammar: &Grammar, stream: &TokenStream) -> Result<Vec<usize>> {
    let encoded = stream
        .tokens
        .iter()
        .map(|t| encode_token(t, grammar.vocab_size()))
        .collect::<Result<Vec<_>>>()?;
    predict_encoded(grammar, &encoded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub sequence: usize,
    pub position: usize,
    pub target: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub index: u64,
    pub length: usize,
    pub accuracy_all: Option<f64>,
    pub accuracy_symbols: Option<f64>,
    /// Set when the oracle lost track of the grammar.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub sequences: usize,
    pub positions: usize,
    pub symbol_positions: usize,
    /// Position-weighted accuracy; `None` for an empty dataset.
    pub accuracy_all: Option<f64>,
    pub accuracy_symbols: Option<f64>,
    pub mismatches: Vec<Mismatch>,
    pub failures: Vec<(usize, String)>,
    pub per_sequence: Vec<SequenceResult>,
}

impl OracleReport {
    /// Accuracy is exactly 1 in both scopes and nothing failed.
    pub fn certified(&self) -> bool {
        self.sequences > 0
            && self.failures.is_empty()
            && self.mismatches.is_empty()
            && self.accuracy_all == Some(1.0)
            && self.accuracy_symbols == Some(1.0)
    }

    pub fn summary(&self) -> String {
        let fmt = |a: Option<f64>| a.map_or_else(|| "undefined".to_string(), |a| format!("{a:.6}"));
        let mut out = format!(
            "sequences {}  positions {}  accuracy(all) {}  accuracy(symbols) {}  mismatches {}  failures {}\n",
            self.sequences,
            self.positions,
            fmt(self.accuracy_all),
            fmt(self.accuracy_symbols),
            self.mismatches.len(),
            self.failures.len()
        );
        for m in self.mismatches.iter().take(20) {
            out.push_str(&format!(
                "  mismatch: sequence {} position {} target {} predicted {}\n",
                m.sequence, m.position, m.target, m.predicted
            ));
        }
        for (seq, err) in self.failures.iter().take(20) {
            out.push_str(&format!("  failure: sequence {seq}: {err}\n"));
        }
        out.push_str(if self.certified() { "CERTIFIED\n" } else { "NOT CERTIFIED\n" });
        out
    }
}

pub fn oracle_eval_streams(grammar: &Grammar, streams: &[TokenStream]) -> OracleReport {
    let mut report = OracleReport {
        sequences: streams.len(),
        positions: 0,
        symbol_positions: 0,
        accuracy_all: None,
        accuracy_symbols: None,
        mismatches: Vec::new(),
        failures: Vec::new(),
        per_sequence: Vec::with_capacity(streams.len()),
    };
    let (mut hits_all, mut hits_sym) = (0usize, 0usize);
    for (seq, stream) in streams.iter().enumerate() {
        report.positions += stream.len();
        let symbol_positions = stream.tokens.iter().filter(|t| !t.is_gap()).count();
        report.symbol_positions += symbol_positions;
        match predict(grammar, stream) {
            Ok(predictions) => {
                let (mut h_all, mut h_sym) = (0, 0);
                for (position, (&p, t)) in predictions.iter().zip(&stream.tokens).enumerate() {
                    if p == t.target {
                        h_all += 1;
                        h_sym += usize::from(!t.is_gap());
                    } else {
                        report.mismatches.push(Mismatch {
                            sequence: seq,
                            position,
                            target: t.target,
                            predicted: p,
                        });
                    }
                }
                hits_all += h_all;
                hits_sym += h_sym;
                report.per_sequence.push(SequenceResult {
                    index: stream.index,
                    length: stream.len(),
                    accuracy_all: ratio(h_all, stream.len()),
                    accuracy_symbols: ratio(h_sym, symbol_positions),
                    error: None,
                });
            }
            Err(e) => {
                report.failures.push((seq, e.to_string()));
                report.per_sequence.push(SequenceResult {
                    index: stream.index,
                    length: stream.len(),
                    accuracy_all: Some(0.0),
                    accuracy_symbols: Some(0.0),
                    error: Some(e.to_string()),
                });
            }
        }
    }
    report.accuracy_all = ratio(hits_all, report.positions);
    report.accuracy_symbols = ratio(hits_sym, report.symbol_positions);
    report
}

pub fn oracle_eval(grammar: &Grammar, dataset: &Dataset) -> OracleReport {
    oracle_eval_streams(grammar, &dataset.streams)
}

fn ratio(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{build_grammar, GrammarConfig, GrammarParts};
    use crate::tasks::{make_task1, make_task2, make_task3, DataSplit, Payload, TaskConfig};

    fn grammar() -> Grammar {
        build_grammar(&GrammarConfig {
            num_observables: 8,
            ambiguity: 3,
            p_transition: 0.08,
            p_end: 0.02,
            seed: 21,
            max_resample_attempts: 2,
        })
        .unwrap()
    }

    fn config(task: u8) -> TaskConfig {
        TaskConfig {
            task,
            t_min: 1,
            t_max: 60,
            p_gap: 1.0,
            split: DataSplit::Test,
            num_sequences: 50,
            seed: 4,
            ..TaskConfig::default()
        }
    }

    #[test]
    fn unit_ambiguity_init_is_the_latent() {
        let succ: Vec<Vec<usize>> = (0..3).map(|z| vec![(z + 1) % 3]).collect();
        let g = Grammar::from_parts(GrammarParts::uniform(3, 1, &succ, vec![0, 1, 2])).unwrap();
        for s in 0..3 {
            assert_eq!(oracle_init(&g, s).unwrap().latents, vec![s]);
        }
    }

    #[test]
    fn distinct_initial_observables_give_singletons() {
        // Observable 0 = {0,1}, observable 1 = {2,3}; initial set {1, 2}.
        let succ = vec![vec![2], vec![3], vec![0], vec![1]];
        let g = Grammar::from_parts(GrammarParts::uniform(2, 2, &succ, vec![1, 2])).unwrap();
        assert_eq!(oracle_init(&g, 0).unwrap().latents, vec![1]);
        assert_eq!(oracle_init(&g, 1).unwrap().latents, vec![2]);
        let g = Grammar::from_parts(GrammarParts::uniform(2, 2, &succ, vec![1])).unwrap();
        assert!(matches!(oracle_init(&g, 1), Err(Error::EmptyBelief { .. })));
    }

    #[test]
    fn certifies_every_task() {
        let g = grammar();
        for ds in [
            make_task1(&g, &config(1)).unwrap(),
            make_task2(&g, &config(2)).unwrap(),
            make_task3(&g, &config(3)).unwrap(),
        ] {
            let report = oracle_eval(&g, &ds);
            assert!(report.certified(), "{}", report.summary());
        }
    }

    #[test]
    fn corrupted_target_is_located() {
        let g = grammar();
        let mut ds = make_task1(&g, &config(1)).unwrap();
        let seq = 7;
        let pos = ds.streams[seq].len() / 2;
        ds.streams[seq].tokens[pos].target += 1;
        let report = oracle_eval(&g, &ds);
        assert!(!report.certified());
        assert!(report.accuracy_all.unwrap() < 1.0);
        assert_eq!(
            report.mismatches,
            vec![Mismatch {
                sequence: seq,
                position: pos,
                target: ds.streams[seq].tokens[pos].target,
                predicted: ds.streams[seq].tokens[pos].target - 1,
            }]
        );
    }

    #[test]
    fn empty_dataset_is_undefined() {
        let report = oracle_eval_streams(&grammar(), &[]);
        assert_eq!(report.sequences, 0);
        assert_eq!(report.accuracy_all, None);
        assert!(!report.certified());
    }

    #[test]
    fn gaps_repeat_the_current_latent() {
        let g = grammar();
        let ds = make_task3(&g, &config(3)).unwrap();
        for stream in &ds.streams {
            let preds = predict(&g, stream).unwrap();
            for (i, t) in stream.tokens.iter().enumerate() {
                if let Payload::NonGrammaticalGap(_) = t.payload {
                    assert_eq!(preds[i], preds[i - 1]);
                }
            }
        }
    }

    #[test]
    fn predictions_are_causal() {
        let g = grammar();
        let ds = make_task2(&g, &config(2)).unwrap();
        let stream = &ds.streams[3];
        let full = predict(&g, stream).unwrap();
        for cut in 1..stream.len() {
            let prefix = TokenStream {
                tokens: stream.tokens[..cut].to_vec(),
                ..stream.clone()
            };
            assert_eq!(predict(&g, &prefix).unwrap(), full[..cut]);
        }
    }
}
