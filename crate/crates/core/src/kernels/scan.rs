//! Sequence evaluation: the step loop and a chunked prefix scan.
//!
//! Each step is an affine map `S -> A_t S + W_t`. Within a chunk the maps are
//! combined with an inclusive Hillis-Steele scan, giving every position its
//! map from the chunk-start state; chunk boundaries are carried sequentially.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::cell::{apply_dynamics, concat, step_dynamics, HeadDynamics, RecurrentState, Transition};
use super::weights::ModelWeights;
use crate::error::{Error, Result};

/// Projects every token and derives its per-head dynamics.
pub fn sequence_dynamics(weights: &ModelWeights, tokens: &[DVector<f64>]) -> Result<Vec<Vec<HeadDynamics>>> {
    let spec = weights.spec();
    tokens
        .par_iter()
        .map(|x| step_dynamics(spec, &weights.project(x)?))
        .collect()
}

/// Outputs of the plain step loop from a zero state.
pub fn sequential_scan(weights: &ModelWeights, tokens: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let dynamics = sequence_dynamics(weights, tokens)?;
    run_steps(RecurrentState::zeros(weights.spec())?, &dynamics).map(|(ys, _)| ys)
}

fn run_steps(
    mut state: RecurrentState,
    dynamics: &[Vec<HeadDynamics>],
) -> Result<(Vec<DVector<f64>>, RecurrentState)> {
    let mut ys = Vec::with_capacity(dynamics.len());
    for dy in dynamics {
        let (next, y) = apply_dynamics(&state, dy)?;
        ys.push(y);
        state = next;
    }
    Ok((ys, state))
}

type Affine = (Transition, DMatrix<f64>);

/// `later . earlier`.
fn combine(earlier: &Affine, later: &Affine) -> Result<Affine> {
    let a = earlier.0.then(&later.0)?;
    let b = later.0.apply(&earlier.1) + &later.1;
    Ok((a, b))
}

/// Inclusive prefix maps of one head within one chunk.
fn prefix_maps(chunk: &[Vec<HeadDynamics>], head: usize) -> Result<Vec<Affine>> {
    let mut cur: Vec<Affine> = chunk
        .iter()
        .map(|dy| (dy[head].transition.clone(), dy[head].write()))
        .collect();
    let mut offset = 1;
    while offset < cur.len() {
        let mut next = cur.clone();
        for j in offset..cur.len() {
            next[j] = combine(&cur[j - offset], &cur[j])?;
        }
        cur = next;
        offset *= 2;
    }
    Ok(cur)
}

/// Chunked evaluation of the recurrence from a zero state.
///
/// `chunk_size == 1` runs the step loop directly.
pub fn chunked_scan(
    weights: &ModelWeights,
    tokens: &[DVector<f64>],
    chunk_size: usize,
) -> Result<Vec<DVector<f64>>> {
    if tokens.is_empty() {
        return Err(Error::InvalidConfig("sequence must have at least one token".into()));
    }
    if chunk_size == 0 {
        return Err(Error::InvalidConfig("chunk size must be at least 1".into()));
    }
    let dynamics = sequence_dynamics(weights, tokens)?;
    let start = RecurrentState::zeros(weights.spec())?;
    if chunk_size == 1 {
        return run_steps(start, &dynamics).map(|(ys, _)| ys);
    }
    let heads = start.heads.len();

    // prefix maps per chunk, per head
    let prefixes: Vec<Vec<Vec<Affine>>> = dynamics
        .par_chunks(chunk_size)
        .map(|chunk| (0..heads).map(|h| prefix_maps(chunk, h)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    // chunk-start states
    let mut starts = Vec::with_capacity(prefixes.len());
    let mut state = start;
    for chunk in &prefixes {
        let next = RecurrentState {
            heads: chunk
                .iter()
                .zip(&state.heads)
                .map(|(maps, s)| {
                    let (a, b) = maps.last().expect("non-empty chunk");
                    a.apply(s) + b
                })
                .collect(),
        };
        next.check_finite()?;
        starts.push(std::mem::replace(&mut state, next));
    }

    let outputs: Vec<Vec<DVector<f64>>> = prefixes
        .par_iter()
        .zip(dynamics.par_chunks(chunk_size))
        .zip(starts.par_iter())
        .map(|((maps, chunk), s0)| {
            (0..chunk.len())
                .map(|j| {
                    concat((0..heads).map(|h| {
                        let (a, b) = &maps[h][j];
                        chunk[j][h].read(&(a.apply(&s0.heads[h]) + b))
                    }))
                })
                .collect()
        })
        .collect();
    let outputs: Vec<DVector<f64>> = outputs.into_iter().flatten().collect();
    if let Some(index) = super::math::first_non_finite(outputs.iter().flat_map(|y| y.iter())) {
        return Err(Error::NonFinite { what: "output", index });
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::math::rel_error_seq;
    use crate::kernels::spec::{ModelKind, ModelSpec};
    use crate::kernels::weights::random_tokens;

    /// Unrolled evaluation over `vec(S)` with explicit operator matrices.
    fn dense_unrolled(dynamics: &[Vec<HeadDynamics>]) -> Vec<DVector<f64>> {
        let heads = dynamics[0].len();
        let mut per_head: Vec<Vec<DVector<f64>>> = Vec::new();
        for h in 0..heads {
            let kd = dynamics[0][h].write_key.len();
            let vd = dynamics[0][h].write_value.len();
            let n = kd * vd;
            let idx = |i: usize, j: usize| i * vd + j;
            let op = |t: &Transition| -> DMatrix<f64> {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..kd {
                    for j in 0..vd {
                        match t {
                            Transition::Identity => m[(idx(i, j), idx(i, j))] = 1.0,
                            Transition::Scalar(a) => m[(idx(i, j), idx(i, j))] = *a,
                            Transition::Rows(r) => m[(idx(i, j), idx(i, j))] = r[i],
                            Transition::Elementwise(e) => m[(idx(i, j), idx(i, j))] = e[(i, j)],
                            Transition::Dense(a) => {
                                for k in 0..kd {
                                    m[(idx(i, j), idx(k, j))] = a[(i, k)];
                                }
                            }
                        }
                    }
                }
                m
            };
            let ops: Vec<DMatrix<f64>> = dynamics.iter().map(|d| op(&d[h].transition)).collect();
            let writes: Vec<DVector<f64>> = dynamics
                .iter()
                .map(|d| {
                    let (k, v) = (&d[h].write_key, &d[h].write_value);
                    DVector::from_fn(n, |r, _| k[r / vd] * v[r % vd])
                })
                .collect();
            let mut ys = Vec::new();
            for t in 0..dynamics.len() {
                // S_t = sum_s (M_t ... M_{s+1}) w_s
                let mut s = DVector::zeros(n);
                for src in 0..=t {
                    let mut term = writes[src].clone();
                    for m in &ops[src + 1..=t] {
                        term = m * term;
                    }
                    s += term;
                }
                let c = &dynamics[t][h].readout;
                ys.push(DVector::from_fn(vd, |j, _| (0..kd).map(|i| s[idx(i, j)] * c[i]).sum()));
            }
            per_head.push(ys);
        }
        (0..dynamics.len())
            .map(|t| concat(per_head.iter().map(|ys| ys[t].clone())))
            .collect()
    }

    fn tiny(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            d: 8,
            n_heads: 2,
            d_state: 4,
            n_householder: 3,
            ..ModelSpec::small(kind)
        }
    }

    #[test]
    fn step_loop_matches_unrolled_oracle() {
        for kind in ModelKind::RECURRENT {
            let spec = tiny(kind);
            let w = ModelWeights::init(&spec, 11).unwrap();
            let tokens = random_tokens(spec.d, 64, 12);
            let ys = sequential_scan(&w, &tokens).unwrap();
            let oracle = dense_unrolled(&sequence_dynamics(&w, &tokens).unwrap());
            let err = rel_error_seq(&ys, &oracle);
            assert!(err <= 1e-6, "{kind}: {err}");
        }
    }

    #[test]
    fn chunked_matches_sequential() {
        for kind in ModelKind::RECURRENT {
            let spec = ModelSpec::small(kind);
            let w = ModelWeights::init(&spec, 3).unwrap();
            let tokens = random_tokens(spec.d, 200, 4);
            let seq = sequential_scan(&w, &tokens).unwrap();
            for chunk in [1, 7, 64, 200] {
                let ys = chunked_scan(&w, &tokens, chunk).unwrap();
                let err = rel_error_seq(&ys, &seq);
                assert!(err <= 1e-5, "{kind} chunk {chunk}: {err}");
            }
        }
    }

    #[test]
    fn chunk_size_one_is_the_step_loop() {
        let spec = ModelSpec::small(ModelKind::GatedDeltaNet);
        let w = ModelWeights::init(&spec, 3).unwrap();
        let tokens = random_tokens(spec.d, 40, 4);
        assert_eq!(chunked_scan(&w, &tokens, 1).unwrap(), sequential_scan(&w, &tokens).unwrap());
    }

    #[test]
    fn scan_preconditions() {
        let spec = ModelSpec::small(ModelKind::GLA);
        let w = ModelWeights::init(&spec, 3).unwrap();
        assert!(chunked_scan(&w, &[], 4).is_err());
        let tokens = random_tokens(spec.d, 4, 4);
        assert!(chunked_scan(&w, &tokens, 0).is_err());
    }

    #[test]
    fn non_finite_weights_surface() {
        let spec = ModelSpec::small(ModelKind::LinearAttention);
        let mut w = ModelWeights::init(&spec, 3).unwrap();
        w.param_mut("w_v").unwrap()[(0, 0)] = f64::INFINITY;
        let tokens = random_tokens(spec.d, 4, 4);
        assert!(matches!(
            chunked_scan(&w, &tokens, 2),
            Err(Error::NonFinite { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn chunking_never_changes_outputs(
                kind in 0usize..8,
                seed in 0u64..1000,
                len in 1usize..90,
                chunk in 1usize..40,
            ) {
                let spec = ModelSpec::small(ModelKind::RECURRENT[kind]);
                let w = ModelWeights::init(&spec, seed).unwrap();
                let tokens = random_tokens(spec.d, len, seed + 1);
                let seq = sequential_scan(&w, &tokens).unwrap();
                let err = rel_error_seq(&chunked_scan(&w, &tokens, chunk).unwrap(), &seq);
                prop_assert!(err <= 1e-5, "err {}", err);
            }

            #[test]
            fn state_map_is_affine(kind in 0usize..8, seed in 0u64..1000) {
                let spec = ModelSpec::small(ModelKind::RECURRENT[kind]);
                let w = ModelWeights::init(&spec, seed).unwrap();
                let x = &random_tokens(spec.d, 1, seed)[0];
                let defect = crate::kernels::checks::affine_defect(&w, x, seed).unwrap();
                prop_assert!(defect <= 1e-10);
            }

            #[test]
            fn diagonal_decay_controls_norm(kind in 0usize..4, seed in 0u64..1000) {
                let kind = [ModelKind::S4D, ModelKind::GLA, ModelKind::Mamba, ModelKind::Mamba2][kind];
                let spec = ModelSpec::small(kind);
                let w = ModelWeights::init(&spec, seed).unwrap();
                let tokens = random_tokens(spec.d, 64, seed);
                prop_assert!(crate::kernels::checks::norm_control(&w, &tokens).unwrap());
            }
        }
    }
}
