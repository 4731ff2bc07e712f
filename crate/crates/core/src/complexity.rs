//! Topological entropy of a grammar's Boolean transition graph.
//!
//! The Perron root is computed per strongly connected component: the spectral
//! radius of a non-negative matrix is the largest radius among its irreducible
//! diagonal blocks. Each non-trivial block is shifted by the identity, which
//! makes it primitive without moving its Perron vector, and power-iterated
//! from the all-ones vector. Convergence is certified by the Collatz-Wielandt
//! bounds `min_i (Mx)_i / x_i <= ρ(M) <= max_i (Mx)_i / x_i`.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::Grammar;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Square 0/1 matrix over the non-terminal latent states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanTransitionMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl BooleanTransitionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![false; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v != 0);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.entries[i * self.n + j] = value;
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.get(i, j))
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().filter(|&&b| b).count()
    }

    /// Relabels states: entry `(p[i], p[j])` of the result is entry `(i, j)`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(perm[i], perm[j], self.get(i, j));
            }
        }
        out
    }
}

/// Binarizes `τ` restricted to the non-terminal latents.
pub fn boolean_transition(grammar: &Grammar) -> BooleanTransitionMatrix {
    let n = grammar.latent_count();
    let mut m = BooleanTransitionMatrix::zeros(n);
    for z in 0..n {
        for e in grammar.edges(z) {
            if e.target < n && e.prob > 0.0 {
                m.set(z, e.target, true);
            }
        }
    }
    m
}

/// Perron root of a Boolean matrix to within `tol`.
pub fn spectral_radius(matrix: &BooleanTransitionMatrix, tol: f64, max_iters: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let n = matrix.dim();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, matrix.edge_count());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in matrix.successors(i) {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }

    let mut radius: f64 = 0.0;
    for component in tarjan_scc(&graph) {
        let members: Vec<usize> = component.iter().map(|v| v.index()).collect();
        let block_radius = match members.as_slice() {
            // Acyclic singleton: contributes a zero eigenvalue.
            [i] if !matrix.get(*i, *i) => 0.0,
            [_] => 1.0,
            _ => irreducible_radius(matrix, &members, tol, max_iters)?,
        };
        radius = radius.max(block_radius);
    }
    Ok(radius)
}

fn irreducible_radius(
    matrix: &BooleanTransitionMatrix,
    members: &[usize],
    tol: f64,
    max_iters: usize,
) -> Result<f64> {
    let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let adjacency: Vec<Vec<usize>> = members
        .iter()
        .map(|&i| matrix.successors(i).filter_map(|j| local.get(&j).copied()).collect())
        .collect();

    let m = members.len();
    let mut x = vec![1.0; m];
    let mut y = vec![0.0; m];
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    for _ in 0..max_iters {
        // y = (A + I) x
        for (k, succ) in adjacency.iter().enumerate() {
            y[k] = x[k] + succ.iter().map(|&j| x[j]).sum::<f64>();
        }
        lower = f64::INFINITY;
        upper = 0.0;
        for k in 0..m {
            let ratio = y[k] / x[k];
            lower = f64::min(lower, ratio);
            upper = f64::max(upper, ratio);
        }
        if upper - lower <= tol {
            return Ok(0.5 * (lower + upper) - 1.0);
        }
        let scale = y.iter().copied().fold(0.0, f64::max);
        for k in 0..m {
            x[k] = y[k] / scale;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        estimate: 0.5 * (lower + upper) - 1.0,
        residual: upper - lower,
    })
}

/// Natural log of the Perron root; zero when the root is at most one.
pub fn topological_entropy(grammar: &Grammar) -> Result<f64> {
    let lambda = spectral_radius(&boolean_transition(grammar), DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)?;
    Ok(entropy_from_radius(lambda))
}

pub fn entropy_from_radius(lambda: f64) -> f64 {
    if lambda <= 1.0 {
        0.0
    } else {
        lambda.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub grammar_id: String,
    pub latent_count: usize,
    pub num_observables: usize,
    pub ambiguity: usize,
    pub ambiguity_depth: usize,
    pub edge_count: usize,
    pub spectral_radius: f64,
    pub topological_entropy: f64,
    /// Out-degree (non-terminal successors) -> number of latents.
    pub out_degree_histogram: BTreeMap<usize, usize>,
    /// Partition size -> number of observables.
    pub partition_sizes: BTreeMap<usize, usize>,
}

pub fn analyze(grammar: &Grammar) -> Result<ComplexityReport> {
    let matrix = boolean_transition(grammar);
    let lambda = spectral_radius(&matrix, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)?;
    let mut out_degree_histogram = BTreeMap::new();
    for d in grammar.out_degrees() {
        *out_degree_histogram.entry(d).or_insert(0) += 1;
    }
    let mut partition_sizes = BTreeMap::new();
    for p in grammar.partitions() {
        *partition_sizes.entry(p.len()).or_insert(0) += 1;
    }
    Ok(ComplexityReport {
        grammar_id: grammar.grammar_id(),
        latent_count: grammar.latent_count(),
        num_observables: grammar.num_observables(),
        ambiguity: grammar.ambiguity(),
        ambiguity_depth: grammar.ambiguity_depth(),
        edge_count: matrix.edge_count(),
        spectral_radius: lambda,
        topological_entropy: entropy_from_radius(lambda),
        out_degree_histogram,
        partition_sizes,
    })
}

impl std::fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "grammar            {}", self.grammar_id)?;
        writeln!(f, "latent states |Z|  {}", self.latent_count)?;
        writeln!(f, "observables |S|    {}", self.num_observables)?;
        writeln!(f, "ambiguity A / D    {} / {}", self.ambiguity, self.ambiguity_depth)?;
        writeln!(f, "edges              {}", self.edge_count)?;
        writeln!(f, "spectral radius    {:.10}", self.spectral_radius)?;
        writeln!(f, "topological entropy {:.6}", self.topological_entropy)?;
        write!(f, "out-degree histogram")?;
        for (d, c) in &self.out_degree_histogram {
            write!(f, " {d}:{c}")?;
        }
        writeln!(f)?;
        write!(f, "partition sizes    ")?;
        for (s, c) in &self.partition_sizes {
            write!(f, " {s}:{c}")?;
        }
        writeln!(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{build_grammar, GrammarConfig, GrammarParts};

    fn radius(rows: &[Vec<u8>]) -> f64 {
        spectral_radius(&BooleanTransitionMatrix::from_rows(rows).unwrap(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)
            .unwrap()
    }

    #[test]
    fn all_ones_is_dimension() {
        let rows = vec![vec![1u8; 5]; 5];
        assert!((radius(&rows) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn golden_mean_shift() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((radius(&[vec![1, 1], vec![1, 0]]) - phi).abs() < 1e-9);
    }

    #[test]
    fn nilpotent_is_zero() {
        let rows = vec![vec![0, 1, 1, 1], vec![0, 0, 1, 1], vec![0, 0, 0, 1], vec![0, 0, 0, 0]];
        assert_eq!(radius(&rows), 0.0);
        assert_eq!(radius(&[]), 0.0);
    }

    #[test]
    fn periodic_block_converges() {
        // Period-2 irreducible matrix, λ = √2.
        let rows = vec![vec![0, 1, 1], vec![1, 0, 0], vec![1, 0, 0]];
        assert!((radius(&rows) - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn reducible_takes_largest_block() {
        // Self-loop block (λ=1) feeding a complete 3-block (λ=3).
        let rows = vec![
            vec![1, 1, 0, 0],
            vec![0, 1, 1, 1],
            vec![0, 1, 1, 1],
            vec![0, 1, 1, 1],
        ];
        assert!((radius(&rows) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_is_reported() {
        let rows = vec![vec![0, 1, 1], vec![1, 0, 0], vec![1, 0, 0]];
        let m = BooleanTransitionMatrix::from_rows(&rows).unwrap();
        match spectral_radius(&m, 1e-15, 2) {
            Err(Error::NonConvergence { iterations: 2, residual, .. }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(spectral_radius(&m, 0.0, 10).is_err());
    }

    #[test]
    fn boolean_matrix_of_cycle_is_permutation() {
        let succ: Vec<Vec<usize>> = (0..4).map(|z| vec![(z + 1) % 4, 4]).collect();
        let g = crate::grammar::Grammar::from_parts(GrammarParts::uniform(4, 1, &succ, vec![0])).unwrap();
        let m = boolean_transition(&g);
        for i in 0..4 {
            let succ: Vec<usize> = m.successors(i).collect();
            assert_eq!(succ, vec![(i + 1) % 4]);
        }
        assert_eq!(topological_entropy(&g).unwrap(), 0.0);
    }

    #[test]
    fn boolean_matrix_matches_tau() {
        let g = build_grammar(&GrammarConfig {
            num_observables: 5,
            ambiguity: 3,
            p_transition: 0.3,
            p_end: 0.1,
            seed: 3,
            max_resample_attempts: 1,
        })
        .unwrap();
        let m = boolean_transition(&g);
        assert_eq!(m.dim(), 15);
        for i in 0..15 {
            for j in 0..15 {
                assert_eq!(m.get(i, j), g.prob(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn fully_connected_grammar_is_all_ones() {
        let g = build_grammar(&GrammarConfig {
            num_observables: 5,
            ambiguity: 1,
            p_transition: 1.0,
            p_end: 0.0,
            seed: 0,
            max_resample_attempts: 1,
        })
        .unwrap();
        let m = boolean_transition(&g);
        assert_eq!(m.edge_count(), 25);
        assert!((topological_entropy(&g).unwrap() - 5f64.ln()).abs() < 1e-9);
        let report = analyze(&g).unwrap();
        assert_eq!(report.out_degree_histogram.get(&5), Some(&5));
        assert!(report.to_string().contains("topological entropy"));
    }
}
