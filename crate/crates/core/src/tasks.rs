//! The four benchmark tasks built on sampled grammar trajectories.
//!
//! 1. disambiguation: plain observable sequences, targets are the latents;
//! 2. noise gaps: dense uniform noise runs after every symbol;
//! 3. non-grammatical gaps: single one-hot distractors unreachable from the
//!    current latent, inserted with probability `p_gap`;
//! 4. length generalization: Task 2 training, test family over growing gaps.
//!
//! Gap tokens are supervised with the latent of the preceding symbol.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::rng::{self, Purpose, Rng, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Symbol(usize),
    NoiseGap(Vec<f32>),
    NonGrammaticalGap(usize),
    Terminal(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub payload: Payload,
    /// Latent the model should output at this position.
    pub target: usize,
}

impl Token {
    pub fn is_gap(&self) -> bool {
        matches!(self.payload, Payload::NoiseGap(_) | Payload::NonGrammaticalGap(_))
    }

    pub fn is_symbol(&self) -> bool {
        matches!(self.payload, Payload::Symbol(_))
    }

    /// The one-hot id, if the token is not dense noise.
    pub fn observable(&self) -> Option<usize> {
        match self.payload {
            Payload::Symbol(id) | Payload::NonGrammaticalGap(id) | Payload::Terminal(id) => Some(id),
            Payload::NoiseGap(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub grammar_id: String,
    /// Master seed of the dataset the stream belongs to.
    pub seed: u64,
    /// Sequence index within the dataset; selects the random substreams.
    pub index: u64,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn targets(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.target).collect()
    }

    pub fn symbol_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_symbol()).count()
    }

    pub fn gap_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_gap()).count()
    }

    /// Structural invariants shared by every task.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(format!("stream {}: {msg}", self.index)));
        match self.tokens.first() {
            Some(t) if t.is_symbol() => {}
            _ => return bad("first token must be a symbol".into()),
        }
        let mut last_symbol_target = None;
        for (i, t) in self.tokens.iter().enumerate() {
            match &t.payload {
                Payload::Terminal(_) if i + 1 != self.tokens.len() => {
                    return bad(format!("terminal at position {i} is not last"))
                }
                Payload::Symbol(_) | Payload::Terminal(_) => last_symbol_target = Some(t.target),
                _ if Some(t.target) != last_symbol_target => {
                    return bad(format!("gap at position {i} does not repeat the preceding target"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSplit {
    Train,
    Test,
}

impl DataSplit {
    pub fn rng_split(self) -> Split {
        match self {
            DataSplit::Train => Split::Train,
            DataSplit::Test => Split::Test,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DataSplit::Train => "train",
            DataSplit::Test => "test",
        }
    }
}

/// Test-time gap setting: one fixed length (Task 2) or a sweep (Task 4).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GapTest {
    Fixed(usize),
    Sweep(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// 1..=4.
    pub task: u8,
    pub t_min: usize,
    pub t_max: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub gap_test: GapTest,
    pub gamma: f32,
    pub p_gap: f64,
    pub split: DataSplit,
    pub num_sequences: usize,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            task: 1,
            t_min: 1,
            t_max: 200,
            n_min: 0,
            n_max: 10,
            gap_test: GapTest::Fixed(10),
            gamma: 0.2,
            p_gap: 0.1,
            split: DataSplit::Train,
            num_sequences: 1000,
            seed: 0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(1..=4).contains(&self.task) {
            return bad(format!("task must be 1..=4, got {}", self.task));
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            return bad(format!("need 1 <= t_min <= t_max, got {}..{}", self.t_min, self.t_max));
        }
        if self.n_min > self.n_max {
            return bad(format!("need n_min <= n_max, got {}..{}", self.n_min, self.n_max));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.p_gap) {
            return bad(format!("p_gap = {} is not a probability", self.p_gap));
        }
        Ok(())
    }

    fn fixed_test_gap(&self) -> Result<usize> {
        match &self.gap_test {
            GapTest::Fixed(n) => Ok(*n),
            GapTest::Sweep(_) => Err(Error::InvalidConfig(
                "task 2 test split needs a single fixed gap length".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub config: TaskConfig,
    /// Set for members of a length-generalization family.
    pub gap_length: Option<usize>,
    pub streams: Vec<TokenStream>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    /// Uniform integer duration in `n_min..=n_max` per symbol.
    Train,
    /// The same duration after every symbol.
    TestFixed(usize),
}

fn sequence_rng(config: &TaskConfig, index: u64, purpose: Purpose) -> Rng {
    rng::substream(config.seed, config.split.rng_split(), index, purpose)
}

/// A Task 1 stream: length, trajectory and observation for one sequence.
pub fn base_stream(grammar: &Grammar, config: &TaskConfig, index: u64) -> Result<TokenStream> {
    let length = sequence_rng(config, index, Purpose::Length).gen_range(config.t_min..=config.t_max);
    let trajectory = grammar.sample_trajectory(length, &mut sequence_rng(config, index, Purpose::Trajectory))?;
    let observed = grammar.observe(&trajectory.states)?;
    let tokens = trajectory
        .states
        .iter()
        .zip(observed)
        .map(|(&z, s)| Token {
            payload: if grammar.is_terminal(z) {
                Payload::Terminal(s)
            } else {
                Payload::Symbol(s)
            },
            target: z,
        })
        .collect();
    Ok(TokenStream {
        tokens,
        grammar_id: grammar.grammar_id(),
        seed: config.seed,
        index,
    })
}

fn generate_streams<F>(config: &TaskConfig, build: F) -> Result<Vec<TokenStream>>
where
    F: Fn(u64) -> Result<TokenStream> + Sync + Send,
{
    (0..config.num_sequences as u64).into_par_iter().map(build).collect()
}

pub fn make_task1(grammar: &Grammar, config: &TaskConfig) -> Result<Dataset> {
    config.validate()?;
    let streams = generate_streams(config, |i| base_stream(grammar, config, i))?;
    Ok(Dataset {
        config: config.clone(),
        gap_length: None,
        streams,
    })
}

/// Inserts runs of dense noise after every symbol. Each noise component is
/// drawn independently from `U[0, gamma]`.
pub fn insert_noise_gaps(
    stream: &TokenStream,
    n_min: usize,
    n_max: usize,
    gamma: f32,
    mode: GapMode,
    vocab_size: usize,
    rng: &mut Rng,
) -> TokenStream {
    let noise = Uniform::new_inclusive(0.0f32, gamma);
    let mut tokens = Vec::with_capacity(stream.len());
    for token in &stream.tokens {
        tokens.push(token.clone());
        if !token.is_symbol() {
            continue;
        }
        let n = match mode {
            GapMode::Train => rng.gen_range(n_min..=n_max),
            GapMode::TestFixed(n) => n,
        };
        for _ in 0..n {
            let v: Vec<f32> = (0..vocab_size).map(|_| noise.sample(rng)).collect();
            tokens.push(Token {
                payload: Payload::NoiseGap(v),
                target: token.target,
            });
        }
    }
    TokenStream {
        tokens,
        ..stream.clone()
    }
}

/// After each symbol, with probability `p_gap`, inserts one observable drawn
/// uniformly from the observables unreachable from the symbol's latent.
pub fn insert_nongrammatical_gaps(
    stream: &TokenStream,
    grammar: &Grammar,
    p_gap: f64,
    rng: &mut Rng,
) -> Result<TokenStream> {
    if p_gap > 0.0 {
        if let Some(z) = stream
            .tokens
            .iter()
            .filter(|t| t.is_symbol())
            .map(|t| t.target)
            .find(|&z| grammar.non_reachable_observables(z).is_empty())
        {
            return Err(Error::EmptyDistractorSet { latent: z });
        }
    }
    let mut tokens = Vec::with_capacity(stream.len());
    for token in &stream.tokens {
        tokens.push(token.clone());
        if token.is_symbol() && rng.gen_bool(p_gap) {
            let distractors = grammar.non_reachable_observables(token.target);
            let &s = distractors
                .choose(rng)
                .ok_or(Error::EmptyDistractorSet { latent: token.target })?;
            tokens.push(Token {
                payload: Payload::NonGrammaticalGap(s),
                target: token.target,
            });
        }
    }
    Ok(TokenStream {
        tokens,
        ..stream.clone()
    })
}

pub fn make_task2(grammar: &Grammar, config: &TaskConfig) -> Result<Dataset> {
    config.validate()?;
    let mode = match config.split {
        DataSplit::Train => GapMode::Train,
        DataSplit::Test => GapMode::TestFixed(config.fixed_test_gap()?),
    };
    let streams = generate_streams(config, |i| {
        let base = base_stream(grammar, config, i)?;
        let mut rng = sequence_rng(config, i, Purpose::NoiseGaps);
        Ok(insert_noise_gaps(
            &base,
            config.n_min,
            config.n_max,
            config.gamma,
            mode,
            grammar.vocab_size(),
            &mut rng,
        ))
    })?;
    Ok(Dataset {
        config: config.clone(),
        gap_length: None,
        streams,
    })
}

pub fn make_task3(grammar: &Grammar, config: &TaskConfig) -> Result<Dataset> {
    config.validate()?;
    let streams = generate_streams(config, |i| {
        let base = base_stream(grammar, config, i)?;
        let mut rng = sequence_rng(config, i, Purpose::NonGrammaticalGaps);
        insert_nongrammatical_gaps(&base, grammar, config.p_gap, &mut rng)
    })?;
    Ok(Dataset {
        config: config.clone(),
        gap_length: None,
        streams,
    })
}

/// One test dataset per gap length, all sharing the same symbol content.
pub fn make_length_gen_eval(
    grammar: &Grammar,
    base_config: &TaskConfig,
    gap_lengths: &[usize],
) -> Result<Vec<Dataset>> {
    base_config.validate()?;
    let base: Vec<TokenStream> = generate_streams(base_config, |i| base_stream(grammar, base_config, i))?;
    gap_lengths
        .iter()
        .map(|&g| {
            let streams = base
                .par_iter()
                .map(|s| {
                    let mut rng = sequence_rng(base_config, s.index, Purpose::NoiseGaps);
                    insert_noise_gaps(
                        s,
                        base_config.n_min,
                        base_config.n_max,
                        base_config.gamma,
                        GapMode::TestFixed(g),
                        grammar.vocab_size(),
                        &mut rng,
                    )
                })
                .collect();
            Ok(Dataset {
                config: TaskConfig {
                    gap_test: GapTest::Fixed(g),
                    ..base_config.clone()
                },
                gap_length: Some(g),
                streams,
            })
        })
        .collect()
}

/// Builds every dataset a task config describes: one dataset, or the gap
/// family for a Task 4 test split.
pub fn generate(grammar: &Grammar, config: &TaskConfig) -> Result<Vec<Dataset>> {
    match (config.task, config.split) {
        (1, _) => Ok(vec![make_task1(grammar, config)?]),
        (2, _) | (4, DataSplit::Train) => Ok(vec![make_task2(grammar, config)?]),
        (3, _) => Ok(vec![make_task3(grammar, config)?]),
        (4, DataSplit::Test) => {
            let gaps = match &config.gap_test {
                GapTest::Sweep(g) => g.clone(),
                GapTest::Fixed(g) => vec![*g],
            };
            make_length_gen_eval(grammar, config, &gaps)
        }
        (t, _) => Err(Error::InvalidConfig(format!("task must be 1..=4, got {t}"))),
    }
}

pub fn one_hot(id: usize, vocab_size: usize) -> Result<Vec<f32>> {
    if id >= vocab_size {
        return Err(Error::IdOutOfRange { id, vocab: vocab_size });
    }
    let mut v = vec![0.0; vocab_size];
    v[id] = 1.0;
    Ok(v)
}

/// Id of an exact one-hot vector; `None` for anything else.
pub fn decode_one_hot(v: &[f32]) -> Option<usize> {
    let mut hot = None;
    for (i, &x) in v.iter().enumerate() {
        if x == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if x != 0.0 {
            return None;
        }
    }
    hot
}

pub fn encode_token(token: &Token, vocab_size: usize) -> Result<Vec<f32>> {
    match &token.payload {
        Payload::NoiseGap(v) if v.len() == vocab_size => Ok(v.clone()),
        Payload::NoiseGap(v) => Err(Error::LengthMismatch {
            expected: vocab_size,
            got: v.len(),
        }),
        _ => one_hot(token.observable().expect("non-noise token"), vocab_size),
    }
}

pub fn encode(stream: &TokenStream, vocab_size: usize) -> Result<Vec<Vec<f32>>> {
    stream.tokens.iter().map(|t| encode_token(t, vocab_size)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Every position of the gap-extended sequence.
    All,
    /// Non-gap positions only.
    SymbolsOnly,
}

/// Fraction of positions in `scope` where the prediction equals the target.
pub fn accuracy(predictions: &[usize], stream: &TokenStream, scope: Scope) -> Result<f64> {
    if predictions.len() != stream.len() {
        return Err(Error::LengthMismatch {
            expected: stream.len(),
            got: predictions.len(),
        });
    }
    let (hits, total) = predictions
        .iter()
        .zip(&stream.tokens)
        .filter(|(_, t)| scope == Scope::All || !t.is_gap())
        .fold((0usize, 0usize), |(h, n), (&p, t)| (h + usize::from(p == t.target), n + 1));
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{build_grammar, GrammarConfig};

    fn grammar(s: usize, a: usize, p: f64) -> Grammar {
        build_grammar(&GrammarConfig {
            num_observables: s,
            ambiguity: a,
            p_transition: p,
            p_end: 0.0,
            seed: 5,
            max_resample_attempts: 2,
        })
        .unwrap()
    }

    fn config(task: u8, split: DataSplit) -> TaskConfig {
        TaskConfig {
            task,
            t_min: 5,
            t_max: 30,
            split,
            num_sequences: 40,
            seed: 9,
            ..TaskConfig::default()
        }
    }

    fn symbols(stream: &TokenStream) -> Vec<Token> {
        stream.tokens.iter().filter(|t| !t.is_gap()).cloned().collect()
    }

    #[test]
    fn task1_with_unit_ambiguity_is_recoverable() {
        let g = grammar(5, 1, 0.4);
        let ds = make_task1(&g, &config(1, DataSplit::Train)).unwrap();
        for s in &ds.streams {
            s.check().unwrap();
            for t in &s.tokens {
                assert_eq!(t.observable(), Some(t.target));
            }
        }
    }

    #[test]
    fn single_symbol_streams_start_in_initial_set() {
        let g = grammar(6, 3, 0.2);
        let cfg = TaskConfig {
            t_min: 1,
            t_max: 1,
            ..config(1, DataSplit::Test)
        };
        for s in make_task1(&g, &cfg).unwrap().streams {
            assert_eq!(s.len(), 1);
            assert!(g.initial_set().contains(&s.tokens[0].target));
        }
    }

    #[test]
    fn task1_is_deterministic() {
        let g = grammar(6, 3, 0.2);
        let cfg = TaskConfig {
            num_sequences: 1000,
            ..config(1, DataSplit::Train)
        };
        let a = serde_json::to_vec(&make_task1(&g, &cfg).unwrap()).unwrap();
        let b = serde_json::to_vec(&make_task1(&g, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_gaps_is_identity() {
        let g = grammar(6, 3, 0.2);
        let base = base_stream(&g, &config(2, DataSplit::Train), 0).unwrap();
        let mut rng = rng::substream(0, Split::Train, 0, Purpose::NoiseGaps);
        let out = insert_noise_gaps(&base, 0, 0, 0.2, GapMode::Train, g.vocab_size(), &mut rng);
        assert_eq!(out, base);
    }

    #[test]
    fn fixed_noise_gap_counts() {
        let g = grammar(6, 3, 0.2);
        let base = base_stream(&g, &config(2, DataSplit::Test), 3).unwrap();
        let mut rng = rng::substream(0, Split::Test, 3, Purpose::NoiseGaps);
        let out = insert_noise_gaps(&base, 0, 10, 0.2, GapMode::TestFixed(10), g.vocab_size(), &mut rng);
        assert_eq!(out.len(), base.len() + 10 * base.symbol_count());
        assert_eq!(symbols(&out), base.tokens);
        out.check().unwrap();
        for t in out.tokens.iter().filter(|t| t.is_gap()) {
            let Payload::NoiseGap(v) = &t.payload else { panic!() };
            assert_eq!(v.len(), g.vocab_size());
            assert!(v.iter().all(|&x| (0.0..=0.2).contains(&x)));
            assert_eq!(decode_one_hot(v), None);
        }
    }

    #[test]
    fn no_gaps_after_terminal() {
        let g = build_grammar(&GrammarConfig {
            num_observables: 4,
            ambiguity: 2,
            p_transition: 0.3,
            p_end: 0.5,
            seed: 1,
            max_resample_attempts: 1,
        })
        .unwrap();
        let cfg = TaskConfig {
            t_min: 20,
            t_max: 20,
            ..config(2, DataSplit::Test)
        };
        let ds = make_task2(&g, &cfg).unwrap();
        let terminated: Vec<_> = ds
            .streams
            .iter()
            .filter(|s| matches!(s.tokens.last().unwrap().payload, Payload::Terminal(_)))
            .collect();
        assert!(!terminated.is_empty());
        for s in terminated {
            s.check().unwrap();
            assert_eq!(s.tokens.last().unwrap().target, g.terminal_latent());
        }
    }

    #[test]
    fn nongrammatical_gap_extremes() {
        let g = grammar(8, 2, 0.1);
        let base = base_stream(&g, &config(3, DataSplit::Test), 1).unwrap();
        let mut rng = rng::substream(0, Split::Test, 1, Purpose::NonGrammaticalGaps);
        assert_eq!(insert_nongrammatical_gaps(&base, &g, 0.0, &mut rng).unwrap(), base);
        let full = insert_nongrammatical_gaps(&base, &g, 1.0, &mut rng).unwrap();
        assert_eq!(full.gap_count(), base.symbol_count());
        assert_eq!(symbols(&full), base.tokens);
        for w in full.tokens.windows(2) {
            assert!(!(w[0].is_gap() && w[1].is_gap()));
            if let Payload::NonGrammaticalGap(s) = w[1].payload {
                let z = w[0].target;
                assert!(g.partition(s).iter().all(|&t| g.prob(z, t) == 0.0));
            }
        }
    }

    #[test]
    fn dense_grammar_has_no_distractors() {
        let g = grammar(3, 1, 1.0);
        let base = base_stream(&g, &config(3, DataSplit::Test), 0).unwrap();
        let mut rng = rng::substream(0, Split::Test, 0, Purpose::NonGrammaticalGaps);
        assert!(matches!(
            insert_nongrammatical_gaps(&base, &g, 0.5, &mut rng),
            Err(Error::EmptyDistractorSet { .. })
        ));
    }

    #[test]
    fn length_family_shares_symbols() {
        let g = grammar(6, 2, 0.2);
        let cfg = config(4, DataSplit::Test);
        let gaps: Vec<usize> = (1..=10).map(|k| 10 * k).collect();
        let family = make_length_gen_eval(&g, &cfg, &gaps).unwrap();
        assert_eq!(family.len(), 10);
        let task1 = make_task1(&g, &TaskConfig { task: 1, ..cfg.clone() }).unwrap();
        for (ds, &gap) in family.iter().zip(&gaps) {
            assert_eq!(ds.gap_length, Some(gap));
            for (s, base) in ds.streams.iter().zip(&task1.streams) {
                assert_eq!(symbols(s), base.tokens);
                assert_eq!(s.len(), base.len() + gap * base.symbol_count());
            }
        }
        let zero = make_length_gen_eval(&g, &cfg, &[0]).unwrap();
        assert_eq!(zero[0].streams, task1.streams);
    }

    #[test]
    fn encoding() {
        let t = Token {
            payload: Payload::Terminal(4),
            target: 8,
        };
        assert_eq!(encode_token(&t, 5).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let v = vec![0.1, 0.0, 0.2, 0.05, 0.15];
        let noise = Token {
            payload: Payload::NoiseGap(v.clone()),
            target: 0,
        };
        assert_eq!(encode_token(&noise, 5).unwrap(), v);
        let far = Token {
            payload: Payload::Symbol(7),
            target: 0,
        };
        assert!(matches!(encode_token(&far, 5), Err(Error::IdOutOfRange { id: 7, vocab: 5 })));

        let g = grammar(6, 3, 0.2);
        let base = base_stream(&g, &config(1, DataSplit::Train), 2).unwrap();
        for (row, t) in encode(&base, g.vocab_size()).unwrap().iter().zip(&base.tokens) {
            assert_eq!(row.iter().filter(|&&x| x != 0.0).count(), 1);
            assert_eq!(decode_one_hot(row), t.observable());
        }
    }

    #[test]
    fn accuracy_scopes() {
        let sym = |id, z| Token { payload: Payload::Symbol(id), target: z };
        let gap = |z| Token { payload: Payload::NoiseGap(vec![0.0; 3]), target: z };
        let stream = TokenStream {
            tokens: vec![sym(0, 0), gap(0), gap(0), sym(1, 3), gap(3), sym(0, 1)],
            grammar_id: String::new(),
            seed: 0,
            index: 0,
        };
        let targets = stream.targets();
        assert_eq!(accuracy(&targets, &stream, Scope::All).unwrap(), 1.0);
        assert_eq!(accuracy(&targets, &stream, Scope::SymbolsOnly).unwrap(), 1.0);
        assert_eq!(accuracy(&[9; 6], &stream, Scope::All).unwrap(), 0.0);
        // Right on the 3 symbols, wrong on the 3 gaps.
        let preds = vec![0, 9, 9, 3, 9, 1];
        assert_eq!(accuracy(&preds, &stream, Scope::SymbolsOnly).unwrap(), 1.0);
        assert_eq!(accuracy(&preds, &stream, Scope::All).unwrap(), 3.0 / 6.0);
        assert!(matches!(
            accuracy(&[0], &stream, Scope::All),
            Err(Error::LengthMismatch { expected: 6, got: 1 })
        ));
    }

    #[test]
    fn task_config_validation() {
        let mut c = TaskConfig::default();
        c.t_min = 5;
        c.t_max = 4;
        assert!(c.validate().is_err());
        let c = TaskConfig { task: 5, ..TaskConfig::default() };
        assert!(c.validate().is_err());
        let c = TaskConfig { p_gap: 2.0, ..TaskConfig::default() };
        assert!(c.validate().is_err());
        let c = TaskConfig { n_min: 3, n_max: 1, ..TaskConfig::default() };
        assert!(c.validate().is_err());
    }
}
