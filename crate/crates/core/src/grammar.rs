//! Artificial grammars as partially observable Markov chains.
//!
//! Latent states `0..|Z|` are partitioned into `|S|` observables of equal size
//! `A` (latent `z` belongs to observable `z / A`). The terminal state `#` is
//! unambiguous and gets the id `|Z|` as a latent and `|S|` as an observable, so
//! one-hot encodings live in `|S| + 1` dimensions.
//!
//! Generated grammars are *observation-deterministic*: from any latent state at
//! most one successor with positive probability lies in each observable. With an
//! initial set holding at most one latent per observable this makes the latent
//! trajectory recoverable online from the observations alone.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose, Rng, Split};

pub const GRAMMAR_FORMAT_VERSION: u32 = 1;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarConfig {
    /// Observable vocabulary size `|S|`, terminal excluded.
    pub num_observables: usize,
    /// Latent states per observable.
    pub ambiguity: usize,
    /// Candidate-edge probability for every ordered latent pair.
    pub p_transition: f64,
    /// Per-step termination probability `τ(z, #)`.
    pub p_end: f64,
    pub seed: u64,
    pub max_resample_attempts: u32,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            num_observables: 40,
            ambiguity: 40,
            p_transition: 0.001,
            p_end: 0.0,
            seed: 0,
            max_resample_attempts: 16,
        }
    }
}

impl GrammarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_observables == 0 {
            return bad("num_observables must be positive".into());
        }
        if self.ambiguity == 0 {
            return bad("ambiguity must be positive".into());
        }
        if self.ambiguity >= 2 && self.num_observables < 2 {
            return bad("num_observables must be at least 2 when ambiguity >= 2".into());
        }
        for (name, p) in [("p_transition", self.p_transition), ("p_end", self.p_end)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.max_resample_attempts == 0 {
            return bad("max_resample_attempts must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub target: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GrammarDocument", into = "GrammarDocument")]
pub struct Grammar {
    config: Option<GrammarConfig>,
    num_observables: usize,
    ambiguity: usize,
    obs_of: Vec<usize>,
    partitions: Vec<Vec<usize>>,
    /// Outgoing edges per latent, sorted by target; target `|Z|` is `#`.
    transitions: Vec<Vec<Edge>>,
    initial_set: Vec<usize>,
}

/// Raw pieces of a grammar, used for hand-built grammars and deserialization.
#[derive(Debug, Clone)]
pub struct GrammarParts {
    pub num_observables: usize,
    pub ambiguity: usize,
    pub obs_of: Vec<usize>,
    pub transitions: Vec<Vec<Edge>>,
    pub initial_set: Vec<usize>,
}

impl GrammarParts {
    /// Contiguous partition (`z / A`) with uniform probabilities over the
    /// given successor lists. `#` may appear as `num_observables * ambiguity`.
    pub fn uniform(
        num_observables: usize,
        ambiguity: usize,
        successors: &[Vec<usize>],
        initial_set: Vec<usize>,
    ) -> Self {
        let transitions = successors
            .iter()
            .map(|targets| {
                let p = 1.0 / targets.len() as f64;
                targets.iter().map(|&target| Edge { target, prob: p }).collect()
            })
            .collect();
        Self {
            num_observables,
            ambiguity,
            obs_of: (0..num_observables * ambiguity).map(|z| z / ambiguity).collect(),
            transitions,
            initial_set,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A latent has several positive-probability successors in one observable.
    NondeterministicRow {
        latent: usize,
        observable: usize,
        targets: Vec<usize>,
    },
    /// Several initial latents share an observable.
    AmbiguousInitial {
        observable: usize,
        latents: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub terminated: bool,
}

impl Grammar {
    pub fn from_parts(parts: GrammarParts) -> Result<Self> {
        Self::assemble(parts, None)
    }

    fn assemble(parts: GrammarParts, config: Option<GrammarConfig>) -> Result<Self> {
        let GrammarParts {
            num_observables,
            ambiguity,
            obs_of,
            mut transitions,
            mut initial_set,
        } = parts;
        let bad = |msg: String| Err(Error::InvalidGrammar(msg));
        if num_observables == 0 || ambiguity == 0 {
            return bad("num_observables and ambiguity must be positive".into());
        }
        let latent_count = num_observables * ambiguity;
        if obs_of.len() != latent_count {
            return bad(format!(
                "obs_of has {} entries, expected {latent_count}",
                obs_of.len()
            ));
        }
        let mut partitions = vec![Vec::with_capacity(ambiguity); num_observables];
        for (z, &s) in obs_of.iter().enumerate() {
            if s >= num_observables {
                return bad(format!("latent {z} maps to unknown observable {s}"));
            }
            partitions[s].push(z);
        }
        if let Some((s, p)) = partitions.iter().enumerate().find(|(_, p)| p.len() != ambiguity) {
            return bad(format!(
                "observable {s} has {} latents, expected {ambiguity}",
                p.len()
            ));
        }
        if transitions.len() != latent_count {
            return bad(format!(
                "{} transition rows for {latent_count} latents",
                transitions.len()
            ));
        }
        for (z, row) in transitions.iter_mut().enumerate() {
            if row.is_empty() {
                return bad(format!("latent {z} has no outgoing edge"));
            }
            row.sort_by_key(|e| e.target);
            let mut sum = 0.0;
            for (i, e) in row.iter().enumerate() {
                if e.target > latent_count {
                    return bad(format!("edge {z} -> {} leaves the state space", e.target));
                }
                if !(e.prob.is_finite() && e.prob > 0.0 && e.prob <= 1.0) {
                    return bad(format!("edge {z} -> {} has probability {}", e.target, e.prob));
                }
                if i > 0 && row[i - 1].target == e.target {
                    return bad(format!("duplicate edge {z} -> {}", e.target));
                }
                sum += e.prob;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return bad(format!("row {z} sums to {sum}"));
            }
        }
        initial_set.sort_unstable();
        initial_set.dedup();
        if let Some(&z) = initial_set.iter().find(|&&z| z >= latent_count) {
            return bad(format!("initial latent {z} out of range"));
        }
        Ok(Self {
            config,
            num_observables,
            ambiguity,
            obs_of,
            partitions,
            transitions,
            initial_set,
        })
    }

    pub fn config(&self) -> Option<&GrammarConfig> {
        self.config.as_ref()
    }

    pub fn num_observables(&self) -> usize {
        self.num_observables
    }

    /// One-hot dimension `|S| + 1` (observables plus `#`).
    pub fn vocab_size(&self) -> usize {
        self.num_observables + 1
    }

    pub fn ambiguity(&self) -> usize {
        self.ambiguity
    }

    /// Size of the largest partition.
    pub fn ambiguity_depth(&self) -> usize {
        self.partitions.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn latent_count(&self) -> usize {
        self.obs_of.len()
    }

    pub fn terminal_latent(&self) -> usize {
        self.latent_count()
    }

    pub fn terminal_observable(&self) -> usize {
        self.num_observables
    }

    pub fn is_terminal(&self, z: usize) -> bool {
        z == self.terminal_latent()
    }

    /// Observable of a latent; `#` maps to itself.
    pub fn obs_of(&self, z: usize) -> Option<usize> {
        if z == self.terminal_latent() {
            Some(self.terminal_observable())
        } else {
            self.obs_of.get(z).copied()
        }
    }

    pub fn partition(&self, s: usize) -> &[usize] {
        &self.partitions[s]
    }

    pub fn partitions(&self) -> &[Vec<usize>] {
        &self.partitions
    }

    pub fn edges(&self, z: usize) -> &[Edge] {
        &self.transitions[z]
    }

    /// `τ(from, to)`; rows of `#` are empty.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transitions
            .get(from)
            .and_then(|row| row.iter().find(|e| e.target == to))
            .map_or(0.0, |e| e.prob)
    }

    pub fn initial_set(&self) -> &[usize] {
        &self.initial_set
    }

    /// Number of non-terminal successors per latent.
    pub fn out_degrees(&self) -> Vec<usize> {
        let t = self.terminal_latent();
        self.transitions
            .iter()
            .map(|row| row.iter().filter(|e| e.target != t).count())
            .collect()
    }

    pub fn validate_disambiguable(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let t = self.terminal_latent();
        for (z, row) in self.transitions.iter().enumerate() {
            let mut by_obs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for e in row.iter().filter(|e| e.target != t) {
                by_obs.entry(self.obs_of[e.target]).or_default().push(e.target);
            }
            for (observable, targets) in by_obs {
                if targets.len() > 1 {
                    violations.push(Violation::NondeterministicRow {
                        latent: z,
                        observable,
                        targets,
                    });
                }
            }
        }
        let mut initial_by_obs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &z in &self.initial_set {
            initial_by_obs.entry(self.obs_of[z]).or_default().push(z);
        }
        for (observable, latents) in initial_by_obs {
            if latents.len() > 1 {
                violations.push(Violation::AmbiguousInitial { observable, latents });
            }
        }
        ValidationReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    /// Observables `s̄` none of whose latents is reachable in one step from `z`.
    /// `#` is never included.
    pub fn non_reachable_observables(&self, z: usize) -> Vec<usize> {
        let mut reachable = vec![false; self.num_observables];
        let t = self.terminal_latent();
        for e in self.transitions[z].iter().filter(|e| e.target != t) {
            reachable[self.obs_of[e.target]] = true;
        }
        (0..self.num_observables).filter(|&s| !reachable[s]).collect()
    }

    pub fn observe(&self, z_seq: &[usize]) -> Result<Vec<usize>> {
        z_seq
            .iter()
            .map(|&z| self.obs_of(z).ok_or(Error::UnknownLatent(z)))
            .collect()
    }

    /// Walks the chain from a uniformly chosen initial latent until `#` is hit
    /// or `target_length` states have been emitted. `#` counts towards the
    /// length and is always the final element when present.
    pub fn sample_trajectory(&self, target_length: usize, rng: &mut Rng) -> Result<Trajectory> {
        if target_length == 0 {
            return Err(Error::InvalidConfig("target_length must be positive".into()));
        }
        let &first = self.initial_set.choose(rng).ok_or(Error::EmptyInitialSet)?;
        let mut states = Vec::with_capacity(target_length);
        states.push(first);
        let t = self.terminal_latent();
        let mut terminated = false;
        while states.len() < target_length {
            let next = self.draw_successor(*states.last().unwrap(), rng);
            states.push(next);
            if next == t {
                terminated = true;
                break;
            }
        }
        Ok(Trajectory { states, terminated })
    }

    fn draw_successor(&self, z: usize, rng: &mut Rng) -> usize {
        let row = &self.transitions[z];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for e in row {
            acc += e.prob;
            if u < acc {
                return e.target;
            }
        }
        row.last().expect("rows are non-empty").target
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 over the compact serialized form, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("grammar serialization is infallible");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Short identifier carried by dataset records.
    pub fn grammar_id(&self) -> String {
        self.content_hash()[..16].to_string()
    }
}

/// Builds a grammar, resampling with successive construction streams until
/// it passes [`Grammar::validate_disambiguable`].
pub fn build_grammar(config: &GrammarConfig) -> Result<Grammar> {
    config.validate()?;
    for attempt in 0..config.max_resample_attempts {
        let mut rng = rng::substream(
            config.seed,
            Split::Grammar,
            attempt as u64,
            Purpose::Construction,
        );
        let grammar = construct(config, &mut rng)?;
        if grammar.validate_disambiguable().passed {
            return Ok(grammar);
        }
    }
    Err(Error::ConstructionFailed {
        attempts: config.max_resample_attempts,
    })
}

fn construct(config: &GrammarConfig, rng: &mut Rng) -> Result<Grammar> {
    let s_count = config.num_observables;
    let a = config.ambiguity;
    let latent_count = s_count * a;
    let terminal = latent_count;

    // Candidate edges, thinned to one uniformly chosen target per observable.
    let mut successors: Vec<Vec<usize>> = Vec::with_capacity(latent_count);
    let mut candidates = Vec::with_capacity(a);
    for _z in 0..latent_count {
        let mut row = Vec::new();
        for s in 0..s_count {
            candidates.clear();
            candidates.extend((s * a..(s + 1) * a).filter(|_| rng.gen_bool(config.p_transition)));
            if let Some(&target) = candidates.choose(rng) {
                row.push(target);
            }
        }
        successors.push(row);
    }

    // A latent without successors gets exactly one edge.
    for row in successors.iter_mut().filter(|r| r.is_empty()) {
        row.push(rng.gen_range(0..latent_count));
    }

    let transitions = successors
        .iter()
        .map(|row| {
            let mut edges = Vec::with_capacity(row.len() + 1);
            let share = (1.0 - config.p_end) / row.len() as f64;
            if share > 0.0 {
                edges.extend(row.iter().map(|&target| Edge { target, prob: share }));
            }
            if config.p_end > 0.0 {
                edges.push(Edge {
                    target: terminal,
                    prob: config.p_end,
                });
            }
            edges
        })
        .collect::<Vec<_>>();

    let mut initial_set = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let eligible: Vec<usize> = (s * a..(s + 1) * a)
            .filter(|&z| !transitions[z].is_empty())
            .collect();
        if let Some(&z) = eligible.choose(rng) {
            initial_set.push(z);
        }
    }

    Grammar::assemble(
        GrammarParts {
            num_observables: s_count,
            ambiguity: a,
            obs_of: (0..latent_count).map(|z| z / a).collect(),
            transitions,
            initial_set,
        },
        Some(config.clone()),
    )
}

/// On-disk form of a grammar.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarDocument {
    format_version: u32,
    config: Option<GrammarConfig>,
    num_observables: usize,
    ambiguity: usize,
    terminal_latent: usize,
    terminal_observable: usize,
    partitions: Vec<Vec<usize>>,
    /// `(source, target, probability)` triples.
    transitions: Vec<(usize, usize, f64)>,
    initial_set: Vec<usize>,
}

impl From<Grammar> for GrammarDocument {
    fn from(g: Grammar) -> Self {
        let transitions = g
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(z, row)| row.iter().map(move |e| (z, e.target, e.prob)))
            .collect();
        Self {
            format_version: GRAMMAR_FORMAT_VERSION,
            terminal_latent: g.terminal_latent(),
            terminal_observable: g.terminal_observable(),
            config: g.config,
            num_observables: g.num_observables,
            ambiguity: g.ambiguity,
            partitions: g.partitions,
            transitions,
            initial_set: g.initial_set,
        }
    }
}

impl TryFrom<GrammarDocument> for Grammar {
    type Error = Error;

    fn try_from(doc: GrammarDocument) -> Result<Self> {
        if doc.format_version != GRAMMAR_FORMAT_VERSION {
            return Err(Error::InvalidGrammar(format!(
                "unsupported grammar format version {}",
                doc.format_version
            )));
        }
        let latent_count = doc.num_observables * doc.ambiguity;
        if doc.terminal_latent != latent_count || doc.terminal_observable != doc.num_observables {
            return Err(Error::InvalidGrammar("inconsistent terminal ids".into()));
        }
        if doc.partitions.len() != doc.num_observables {
            return Err(Error::InvalidGrammar("partition table size mismatch".into()));
        }
        let mut obs_of = vec![usize::MAX; latent_count];
        for (s, members) in doc.partitions.iter().enumerate() {
            for &z in members {
                match obs_of.get_mut(z) {
                    Some(slot) if *slot == usize::MAX => *slot = s,
                    _ => {
                        return Err(Error::InvalidGrammar(format!(
                            "latent {z} is out of range or in several partitions"
                        )))
                    }
                }
            }
        }
        let mut transitions = vec![Vec::new(); latent_count];
        for (src, target, prob) in doc.transitions {
            transitions
                .get_mut(src)
                .ok_or_else(|| Error::InvalidGrammar(format!("edge source {src} out of range")))?
                .push(Edge { target, prob });
        }
        Grammar::assemble(
            GrammarParts {
                num_observables: doc.num_observables,
                ambiguity: doc.ambiguity,
                obs_of,
                transitions,
                initial_set: doc.initial_set,
            },
            doc.config,
        )
    }
}
