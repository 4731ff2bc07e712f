//! Executable checks of the structural claims about each cell.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::attention::softmax_attention_forward;
use super::cell::{
    apply_dynamics, delta_rule_update, head_dynamics, householder, step_dynamics, HeadDynamics,
    HeadInputs, RecurrentState, Transition,
};
use super::math::{rel_error, rel_error_seq, sigmoid, softplus};
use super::scan::{chunked_scan, sequence_dynamics, sequential_scan};
use super::spec::{ModelKind, ModelSpec};
use super::weights::{random_tokens, ModelWeights};
use crate::error::{Error, Result};

/// Eigenvalues of `A_t` for one head, ascending.
///
/// Diagonal transitions report their entries; symmetric Delta transitions
/// their eigenvalues; Gated DeltaProduct (not symmetric) its singular values.
pub fn transition_spectrum(spec: &ModelSpec, inputs: &HeadInputs) -> Result<Vec<f64>> {
    let layout = spec
        .layout()
        .ok_or_else(|| Error::InvalidConfig(format!("{} has no transition matrix", spec.kind)))?;
    let dy = head_dynamics(spec, &layout, inputs)?;
    let mut values: Vec<f64> = match dy.transition {
        Transition::Identity => vec![1.0; layout.key_dim],
        Transition::Scalar(a) => vec![a],
        Transition::Rows(r) => r.iter().copied().collect(),
        Transition::Elementwise(m) => m.iter().copied().collect(),
        Transition::Dense(m) if spec.kind == ModelKind::GatedDeltaProduct => {
            m.singular_values().iter().copied().collect()
        }
        Transition::Dense(m) => SymmetricEigen::new(m).eigenvalues.iter().copied().collect(),
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GatingClass {
    /// Forgetting and writing move in opposite directions with the gate.
    Complementary,
    /// The gate moves only one of the two.
    Independent,
    /// Neither depends on the gate.
    Ungated,
}

#[derive(Debug, Clone, Serialize)]
pub struct GatingReport {
    pub kind: ModelKind,
    pub grid: Vec<f64>,
    /// Per grid point: retention components of `A_t`.
    pub retention: Vec<Vec<f64>>,
    /// Per grid point: write magnitudes `|B_t|`.
    pub write: Vec<Vec<f64>>,
    pub retention_non_increasing: bool,
    pub write_non_decreasing: bool,
    pub retention_strictly_decreasing: bool,
    pub write_strictly_increasing: bool,
    pub retention_varies: bool,
    pub write_varies: bool,
    pub class: GatingClass,
}

fn with_gates(inputs: &HeadInputs, g: f64) -> HeadInputs {
    let mut h = inputs.clone();
    h.gates.iter_mut().for_each(|x| *x = g);
    h
}

/// Retention and write magnitudes of one head.
fn gate_response(spec: &ModelSpec, inputs: &HeadInputs, dy: &HeadDynamics) -> (Vec<f64>, Vec<f64>) {
    let vnorm = inputs.value.norm();
    match (&dy.transition, spec.kind) {
        (Transition::Dense(_), ModelKind::GatedDeltaProduct) => {
            // factor-wise: k_i^T (decay H_i) k_i against |beta_i k_i|
            let decay = inputs.base_decay.as_ref().map_or(1.0, |a| a[(0, 0)])
                * inputs.decay_gate.map_or(1.0, softplus);
            inputs
                .keys
                .iter()
                .zip(&inputs.gates)
                .map(|(k, &g)| {
                    let beta = sigmoid(g);
                    let h = householder(k, beta) * decay;
                    ((k.transpose() * h * k)[(0, 0)], (k * beta).norm() * vnorm)
                })
                .unzip()
        }
        (Transition::Dense(m), _) => {
            let k = &inputs.keys[0];
            (vec![(k.transpose() * m * k)[(0, 0)]], vec![dy.write_key.norm() * dy.write_value.norm()])
        }
        (t, _) => {
            let retention = match t {
                Transition::Identity => vec![1.0],
                Transition::Scalar(a) => vec![*a],
                Transition::Rows(r) => r.iter().copied().collect(),
                Transition::Elementwise(m) => m.iter().copied().collect(),
                Transition::Dense(_) => unreachable!(),
            };
            (retention, vec![dy.write_key.norm() * dy.write_value.norm()])
        }
    }
}

fn monotone(series: &[Vec<f64>], ok: impl Fn(f64, f64) -> bool) -> bool {
    series
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(&a, &b)| ok(a, b)))
}

fn varies(series: &[Vec<f64>]) -> bool {
    let Some(first) = series.first() else {
        return false;
    };
    series.iter().any(|row| {
        row.iter()
            .zip(first)
            .any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
    })
}

/// Sweeps the shared gate pre-activation of head 0 over `grid`.
pub fn complementary_gating_check(
    spec: &ModelSpec,
    inputs: &HeadInputs,
    grid: &[f64],
) -> Result<GatingReport> {
    let layout = spec
        .layout()
        .ok_or_else(|| Error::InvalidConfig(format!("{} has no gates", spec.kind)))?;
    let mut retention = Vec::with_capacity(grid.len());
    let mut write = Vec::with_capacity(grid.len());
    for &g in grid {
        let h = with_gates(inputs, g);
        let dy = head_dynamics(spec, &layout, &h)?;
        let (r, w) = gate_response(spec, &h, &dy);
        retention.push(r);
        write.push(w);
    }
    let retention_non_increasing = monotone(&retention, |a, b| b <= a);
    let write_non_decreasing = monotone(&write, |a, b| b >= a);
    let retention_varies = varies(&retention);
    let write_varies = varies(&write);
    let class = match (retention_varies, write_varies) {
        (false, false) => GatingClass::Ungated,
        (true, true) if retention_non_increasing && write_non_decreasing => GatingClass::Complementary,
        _ => GatingClass::Independent,
    };
    Ok(GatingReport {
        kind: spec.kind,
        grid: grid.to_vec(),
        retention_strictly_decreasing: monotone(&retention, |a, b| b < a),
        write_strictly_increasing: monotone(&write, |a, b| b > a),
        retention,
        write,
        retention_non_increasing,
        write_non_decreasing,
        retention_varies,
        write_varies,
        class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionCheck {
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Composed Gated DeltaProduct step against decay followed by `n_h`
/// sequential delta-rule updates.
pub fn deltaproduct_composition_check(
    spec: &ModelSpec,
    inputs: &HeadInputs,
    state: &DMatrix<f64>,
) -> Result<CompositionCheck> {
    if spec.kind != ModelKind::GatedDeltaProduct {
        return Err(Error::InvalidConfig(format!(
            "composition check applies to gated-deltaproduct, not {}",
            spec.kind
        )));
    }
    let layout = spec.layout().expect("recurrent kind");
    let composed = head_dynamics(spec, &layout, inputs)?.advance(state);
    let decay = inputs.base_decay.as_ref().map_or(1.0, |a| a[(0, 0)])
        * inputs.decay_gate.map_or(1.0, softplus);
    let mut s = state * decay;
    for (k, &g) in inputs.keys.iter().zip(&inputs.gates) {
        s = delta_rule_update(&s, k, &inputs.value, sigmoid(g));
    }
    let max_rel_error = rel_error(composed.as_slice(), s.as_slice());
    Ok(CompositionCheck {
        max_rel_error,
        passed: max_rel_error <= 1e-6,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Selectivity {
    None,
    /// Input-dependent, but cannot forget in every direction.
    Weak,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Features {
    pub selectivity: Selectivity,
    pub complementary_gating: bool,
    pub channel_mixing: bool,
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |b: bool| if b { "yes" } else { "no" };
        let sel = match self.selectivity {
            Selectivity::None => "no",
            Selectivity::Weak => "weak",
            Selectivity::Full => "yes",
        };
        write!(
            f,
            "{}/{}/{}",
            sel,
            mark(self.complementary_gating),
            mark(self.channel_mixing)
        )
    }
}

/// Published feature row for each recurrent kind.
pub fn reference_features(kind: ModelKind) -> Option<Features> {
    use Selectivity::*;
    let (selectivity, complementary_gating, channel_mixing) = match kind {
        ModelKind::LinearAttention | ModelKind::S4D => (None, false, false),
        ModelKind::DeltaNet => (Weak, true, true),
        ModelKind::GLA => (Full, false, false),
        ModelKind::Mamba | ModelKind::Mamba2 => (Full, true, false),
        ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => (Full, true, true),
        ModelKind::SoftmaxAttention => return Option::None,
    };
    Some(Features {
        selectivity,
        complementary_gating,
        channel_mixing,
    })
}

pub fn gate_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Measures selectivity, complementary gating and channel mixing for head 0.
pub fn probe_features(spec: &ModelSpec, inputs: &HeadInputs) -> Result<Features> {
    let grid = gate_grid(-10.0, 10.0, 41);
    let mut spectra = Vec::with_capacity(grid.len());
    for &g in &grid {
        let mut h = with_gates(inputs, g);
        if let Some(a) = h.decay_gate.as_mut() {
            *a = g;
        }
        spectra.push(transition_spectrum(spec, &h)?);
    }
    let tops: Vec<Vec<f64>> = spectra.iter().map(|s| vec![s.last().map_or(0.0, |x| x.abs())]).collect();
    let selectivity = if !varies(&spectra) {
        Selectivity::None
    } else if varies(&tops) {
        Selectivity::Full
    } else {
        Selectivity::Weak
    };
    let complementary_gating =
        complementary_gating_check(spec, inputs, &grid)?.class == GatingClass::Complementary;
    let layout = spec.layout().expect("recurrent kind");
    let channel_mixing = match head_dynamics(spec, &layout, inputs)?.transition {
        Transition::Dense(m) => {
            let off = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { 0.0 } else { m[(i, j)] });
            off.amax() > 1e-12
        }
        _ => false,
    };
    Ok(Features {
        selectivity,
        complementary_gating,
        channel_mixing,
    })
}

/// `|A S|_F <= max|A| |S|_F + |B||I|` along a sequence, for diagonal transitions.
pub fn norm_control(weights: &ModelWeights, tokens: &[DVector<f64>]) -> Result<bool> {
    let dynamics = sequence_dynamics(weights, tokens)?;
    let mut state = RecurrentState::zeros(weights.spec())?;
    for dy in &dynamics {
        let (next, _) = apply_dynamics(&state, dy)?;
        for ((prev, cur), d) in state.heads.iter().zip(&next.heads).zip(dy) {
            let amax = match &d.transition {
                Transition::Identity => 1.0,
                Transition::Scalar(a) => a.abs(),
                Transition::Rows(r) => r.amax(),
                Transition::Elementwise(m) => m.amax(),
                Transition::Dense(_) => return Err(Error::InvalidConfig("norm control needs a diagonal transition".into())),
            };
            let bound = prev.norm() * amax + d.write_key.norm() * d.write_value.norm();
            if cur.norm() > bound * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
        state = next;
    }
    Ok(true)
}

/// Largest deviation from `f(S1 + S2) = f(S1) + f(S2) - f(0)` over one step.
pub fn affine_defect(weights: &ModelWeights, token: &DVector<f64>, seed: u64) -> Result<f64> {
    let spec = weights.spec();
    let dy = step_dynamics(spec, &weights.project(token)?)?;
    let zero = RecurrentState::zeros(spec)?;
    let random_state = |s: u64| -> RecurrentState {
        let mut it = random_tokens(1, zero.numel(), s).into_iter().map(|v| v[0]);
        RecurrentState {
            heads: zero
                .heads
                .iter()
                .map(|h| DMatrix::from_fn(h.nrows(), h.ncols(), |_, _| it.next().unwrap()))
                .collect(),
        }
    };
    let s1 = random_state(seed);
    let s2 = random_state(seed + 1);
    let sum = RecurrentState {
        heads: s1.heads.iter().zip(&s2.heads).map(|(a, b)| a + b).collect(),
    };
    let f = |s: &RecurrentState| apply_dynamics(s, &dy).map(|(n, _)| n);
    let (a, b, c, z) = (f(&sum)?, f(&s1)?, f(&s2)?, f(&zero)?);
    let lhs: Vec<f64> = a.heads.iter().flat_map(|m| m.iter().copied()).collect();
    let rhs: Vec<f64> = b
        .heads
        .iter()
        .zip(&c.heads)
        .zip(&z.heads)
        .flat_map(|((x, y), w)| (x + y - w).iter().copied().collect::<Vec<_>>())
        .collect();
    Ok(rel_error(&lhs, &rhs))
}

/// Masked full-matrix attention, for comparison with the cached form.
fn softmax_attention_dense(weights: &ModelWeights, tokens: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let spec = weights.spec();
    let t = tokens.len();
    let inputs = tokens.iter().map(|x| weights.project(x)).collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / (spec.d_head() as f64).sqrt();
    let mut ys = vec![Vec::new(); t];
    for h in 0..spec.n_heads {
        let q = DMatrix::from_fn(t, spec.d_head(), |i, j| inputs[i].heads[h].query[j]);
        let k = DMatrix::from_fn(t, spec.d_head(), |i, j| inputs[i].heads[h].keys[0][j]);
        let v = DMatrix::from_fn(t, spec.d_head(), |i, j| inputs[i].heads[h].value[j]);
        let mut scores = q * k.transpose() * scale;
        for i in 0..t {
            let max = (0..=i).map(|j| scores[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..t {
                let w = if j <= i { (scores[(i, j)] - max).exp() } else { 0.0 };
                scores[(i, j)] = w;
                total += w;
            }
            for j in 0..t {
                scores[(i, j)] /= total;
            }
        }
        let out = scores * v;
        for (i, y) in ys.iter_mut().enumerate() {
            y.extend(out.row(i).iter().copied());
        }
    }
    Ok(ys.into_iter().map(DVector::from_vec).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

/// Sequence length and chunk sizes used by the equivalence check.
pub const EQUIVALENCE_LEN: usize = 512;
pub const EQUIVALENCE_CHUNKS: [usize; 3] = [16, 100, 512];

/// Largest relative error of the chunked scan over the three chunk sizes.
pub fn equivalence_error(weights: &ModelWeights, tokens: &[DVector<f64>]) -> Result<f64> {
    let reference = sequential_scan(weights, tokens)?;
    let mut worst: f64 = 0.0;
    for chunk in EQUIVALENCE_CHUNKS {
        worst = worst.max(rel_error_seq(&chunked_scan(weights, tokens, chunk)?, &reference));
    }
    Ok(worst)
}

/// Runs the property suite for one model kind at a small configuration.
pub fn kernel_check(kind: ModelKind, seed: u64) -> Result<Vec<CheckOutcome>> {
    let spec = ModelSpec::small(kind);
    let weights = ModelWeights::init(&spec, seed)?;
    let tokens = random_tokens(spec.d, EQUIVALENCE_LEN, seed);
    let mut out = Vec::new();

    if kind == ModelKind::SoftmaxAttention {
        let (ys, cache) = softmax_attention_forward(&weights, &tokens)?;
        let dense = softmax_attention_dense(&weights, &tokens)?;
        let err = rel_error_seq(&ys, &dense);
        out.push(CheckOutcome::new("equivalence", err <= 1e-5, format!("cached vs dense max rel err {err:.2e}")));
        let expected = (2 * tokens.len() * spec.d_head() * spec.n_heads) as u64;
        out.push(CheckOutcome::new(
            "cache-growth",
            cache == expected,
            format!("cache {cache} reals after {} steps (expected {expected})", tokens.len()),
        ));
        return Ok(out);
    }

    let err = equivalence_error(&weights, &tokens)?;
    out.push(CheckOutcome::new(
        "equivalence",
        err <= 1e-5,
        format!("T={} chunks {:?}: max rel err {err:.2e}", tokens.len(), EQUIVALENCE_CHUNKS),
    ));

    let defect = affine_defect(&weights, &tokens[0], seed)?;
    out.push(CheckOutcome::new("affine-state", defect <= 1e-10, format!("superposition defect {defect:.2e}")));

    let head = weights.project(&tokens[0])?.heads.swap_remove(0);
    let expected = reference_features(kind).expect("recurrent kind");
    let measured = probe_features(&spec, &head)?;
    out.push(CheckOutcome::new(
        "features",
        measured == expected,
        format!("measured [{measured}] expected [{expected}]"),
    ));

    let grid = gate_grid(-5.0, 5.0, 101);
    let gating = complementary_gating_check(&spec, &head, &grid)?;
    let expected_class = match kind {
        ModelKind::LinearAttention | ModelKind::S4D => GatingClass::Ungated,
        ModelKind::GLA => GatingClass::Independent,
        _ => GatingClass::Complementary,
    };
    out.push(CheckOutcome::new(
        "gating",
        gating.class == expected_class,
        format!("{:?} (expected {:?})", gating.class, expected_class),
    ));

    match kind {
        ModelKind::DeltaNet => {
            let (ok, detail) = weak_selectivity(&spec, &head)?;
            out.push(CheckOutcome::new("weak-selectivity", ok, detail));
        }
        ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => {
            let norm = fast_forgetting_norm(&spec, &head, -10.0)?;
            out.push(CheckOutcome::new(
                "fast-forgetting",
                norm < 1e-3,
                format!("|A_t| = {norm:.2e} at alpha = -10"),
            ));
        }
        _ => {}
    }

    if kind == ModelKind::GatedDeltaProduct {
        let layout = spec.layout().expect("recurrent kind");
        let state = DMatrix::from_fn(layout.key_dim, layout.value_dim, |i, j| tokens[1][(i + j) % spec.d]);
        let c = deltaproduct_composition_check(&spec, &head, &state)?;
        out.push(CheckOutcome::new(
            "composition",
            c.passed,
            format!("n_h={}: max rel err {:.2e}", spec.n_householder, c.max_rel_error),
        ));
    }

    if matches!(kind, ModelKind::S4D | ModelKind::GLA | ModelKind::Mamba | ModelKind::Mamba2) {
        let ok = norm_control(&weights, &tokens)?;
        out.push(CheckOutcome::new("norm-control", ok, "|S_t| <= max(A_t)|S_t-1| + |B_t||I_t|"));
    }
    Ok(out)
}

/// DeltaNet spectrum over `g in [-10, 10]`: minimum `1 - sigma(g) > 0`, maximum 1.
pub fn weak_selectivity(spec: &ModelSpec, head: &HeadInputs) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut min_seen = f64::INFINITY;
    for g in gate_grid(-10.0, 10.0, 201) {
        let spectrum = transition_spectrum(spec, &with_gates(head, g))?;
        let (lo, hi) = (spectrum[0], *spectrum.last().unwrap());
        worst = worst.max((lo - (1.0 - sigmoid(g))).abs()).max((hi - 1.0).abs());
        min_seen = min_seen.min(lo);
    }
    let ok = worst <= 1e-9 && min_seen > 0.0;
    Ok((ok, format!("min eigenvalue {min_seen:.3e} > 0, max deviation from analytic {worst:.1e}")))
}

/// Spectral norm of `A_t` with the decay gate forced to `alpha`.
pub fn fast_forgetting_norm(spec: &ModelSpec, head: &HeadInputs, alpha: f64) -> Result<f64> {
    let mut h = head.clone();
    h.decay_gate = Some(alpha);
    let layout = spec.layout().expect("recurrent kind");
    match head_dynamics(spec, &layout, &h)?.transition {
        Transition::Dense(m) => Ok(m.singular_values().max()),
        _ => Err(Error::InvalidConfig(format!("{} has no gated dense transition", spec.kind))),
    }
}
