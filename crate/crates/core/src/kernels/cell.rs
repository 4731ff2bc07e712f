//! One recurrence step `S_t = A_t (.) S_{t-1} + B_t (x) I_t`, `y_t = S_t^T C_t`.
//!
//! Each head keeps a `key_dim x value_dim` state. The transition acts on the
//! key axis: elementwise for the diagonal models, by matrix product for the
//! Delta family.

use nalgebra::{DMatrix, DVector};

use super::math::{first_non_finite, sigmoid, softplus};
use super::spec::{ModelKind, ModelSpec, StateLayout};
use crate::error::{Error, Result};

/// Per-head projected inputs for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadInputs {
    /// `k_t`; one key per Householder factor for Gated DeltaProduct, `W_B u`
    /// for Mamba, empty for S4D.
    pub keys: Vec<DVector<f64>>,
    /// Readout `C_t`.
    pub query: DVector<f64>,
    /// Input `I_t`.
    pub value: DVector<f64>,
    /// Gate pre-activations `g_t` (one per factor, or one per channel).
    pub gates: Vec<f64>,
    /// Decay gate pre-activation `alpha_t`.
    pub decay_gate: Option<f64>,
    /// Learned base decay: `1 x 1` per head, or `d_state x width` for S4D and Mamba.
    pub base_decay: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInputs {
    pub heads: Vec<HeadInputs>,
}

/// Linear part of the state update, acting on a `key x value` state.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Identity,
    Scalar(f64),
    /// One factor per key row.
    Rows(DVector<f64>),
    /// Full elementwise mask.
    Elementwise(DMatrix<f64>),
    /// Left matrix product over the key axis.
    Dense(DMatrix<f64>),
}

impl Transition {
    pub fn apply(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Transition::Identity => s.clone(),
            Transition::Scalar(a) => s * *a,
            Transition::Rows(r) => {
                let mut out = s.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= r[i];
                }
                out
            }
            Transition::Elementwise(m) => s.component_mul(m),
            Transition::Dense(m) => m * s,
        }
    }

    /// `later . self`: apply `self` first.
    pub fn then(&self, later: &Transition) -> Result<Transition> {
        use Transition::*;
        Ok(match (self, later) {
            (Identity, t) | (t, Identity) => t.clone(),
            (Scalar(a), Scalar(b)) => Scalar(a * b),
            (Scalar(a), Rows(r)) | (Rows(r), Scalar(a)) => Rows(r * *a),
            (Scalar(a), Elementwise(m)) | (Elementwise(m), Scalar(a)) => Elementwise(m * *a),
            (Scalar(a), Dense(m)) | (Dense(m), Scalar(a)) => Dense(m * *a),
            (Rows(r1), Rows(r2)) => Rows(r1.component_mul(r2)),
            (Elementwise(m1), Elementwise(m2)) => Elementwise(m1.component_mul(m2)),
            (Dense(m1), Dense(m2)) => Dense(m2 * m1),
            (Rows(r), Dense(m)) => Dense(m * DMatrix::from_diagonal(r)),
            (Dense(m), Rows(r)) => Dense(DMatrix::from_diagonal(r) * m),
            (a, b) => {
                return Err(Error::Shape(format!(
                    "cannot compose transitions {} and {}",
                    a.variant(),
                    b.variant()
                )))
            }
        })
    }

    fn variant(&self) -> &'static str {
        match self {
            Transition::Identity => "identity",
            Transition::Scalar(_) => "scalar",
            Transition::Rows(_) => "rows",
            Transition::Elementwise(_) => "elementwise",
            Transition::Dense(_) => "dense",
        }
    }
}

/// `(A_t, B_t, I_t, C_t)` for one head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadDynamics {
    pub transition: Transition,
    pub write_key: DVector<f64>,
    pub write_value: DVector<f64>,
    pub readout: DVector<f64>,
}

impl HeadDynamics {
    /// `B_t (x) I_t`.
    pub fn write(&self) -> DMatrix<f64> {
        &self.write_key * self.write_value.transpose()
    }

    pub fn advance(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        self.transition.apply(s) + self.write()
    }

    pub fn read(&self, s: &DMatrix<f64>) -> DVector<f64> {
        s.tr_mul(&self.readout)
    }
}

/// `I - beta k k^T`.
pub fn householder(key: &DVector<f64>, beta: f64) -> DMatrix<f64> {
    let n = key.len();
    DMatrix::identity(n, n) - key * key.transpose() * beta
}

/// Delta rule: `S - beta k (k^T S) + beta k v^T`.
pub fn delta_rule_update(
    state: &DMatrix<f64>,
    key: &DVector<f64>,
    value: &DVector<f64>,
    beta: f64,
) -> DMatrix<f64> {
    let read = state.tr_mul(key);
    state + key * (value - read).transpose() * beta
}

fn need<'a, T>(x: Option<&'a T>, what: &str) -> Result<&'a T> {
    x.ok_or_else(|| Error::Shape(format!("missing {what}")))
}

fn check_len(v: &DVector<f64>, len: usize, what: &str) -> Result<()> {
    if v.len() != len {
        return Err(Error::Shape(format!("{what} has length {}, expected {len}", v.len())));
    }
    Ok(())
}

fn scalar_decay(inputs: &HeadInputs) -> Result<f64> {
    let a = need(inputs.base_decay.as_ref(), "base decay")?;
    if a.shape() != (1, 1) {
        return Err(Error::Shape(format!("scalar base decay has shape {:?}", a.shape())));
    }
    Ok(a[(0, 0)])
}

fn check_inputs(inputs: &HeadInputs) -> Result<()> {
    let vectors = inputs
        .keys
        .iter()
        .chain([&inputs.query, &inputs.value])
        .flat_map(|v| v.iter());
    let scalars = inputs.gates.iter().chain(inputs.decay_gate.iter());
    let base = inputs.base_decay.iter().flat_map(|m| m.iter());
    if let Some(index) = first_non_finite(vectors.chain(scalars).chain(base)) {
        return Err(Error::NonFinite {
            what: "step input",
            index,
        });
    }
    Ok(())
}

/// Transition, write and readout for one head.
pub fn head_dynamics(spec: &ModelSpec, layout: &StateLayout, inputs: &HeadInputs) -> Result<HeadDynamics> {
    check_inputs(inputs)?;
    let (kd, vd) = (layout.key_dim, layout.value_dim);
    check_len(&inputs.query, kd, "query")?;
    check_len(&inputs.value, vd, "value")?;
    let key = |i: usize| -> Result<&DVector<f64>> {
        let k = need(inputs.keys.get(i), "key")?;
        check_len(k, kd, "key")?;
        Ok(k)
    };
    let gate = |i: usize| -> Result<f64> { need(inputs.gates.get(i), "gate").copied() };
    let (transition, write_key, write_value) = match spec.kind {
        ModelKind::LinearAttention => (Transition::Identity, key(0)?.clone(), inputs.value.clone()),
        ModelKind::S4D => {
            let a = need(inputs.base_decay.as_ref(), "state matrix")?;
            if a.shape() != (kd, vd) {
                return Err(Error::Shape(format!("state matrix has shape {:?}", a.shape())));
            }
            (
                Transition::Elementwise(a.map(|x| (-x).exp())),
                DVector::from_element(kd, 1.0),
                inputs.value.clone(),
            )
        }
        ModelKind::DeltaNet => {
            let k = key(0)?;
            let beta = sigmoid(gate(0)?);
            (Transition::Dense(householder(k, beta)), k * beta, inputs.value.clone())
        }
        ModelKind::GLA => {
            if inputs.gates.len() != kd {
                return Err(Error::Shape(format!("GLA expects {kd} gates, got {}", inputs.gates.len())));
            }
            let tau = spec.gla_tau;
            let rows = DVector::from_iterator(kd, inputs.gates.iter().map(|&g| sigmoid(g).powf(1.0 / tau)));
            (Transition::Rows(rows), key(0)?.clone(), inputs.value.clone())
        }
        ModelKind::Mamba => {
            let a = need(inputs.base_decay.as_ref(), "state matrix")?;
            if a.shape() != (kd, vd) || inputs.gates.len() != vd {
                return Err(Error::Shape("Mamba state matrix or gate width mismatch".into()));
            }
            let z: Vec<f64> = inputs.gates.iter().map(|&g| softplus(g)).collect();
            let decay = DMatrix::from_fn(kd, vd, |n, c| (-a[(n, c)] * z[c]).exp());
            let gated = DVector::from_iterator(vd, inputs.value.iter().zip(&z).map(|(u, z)| u * z));
            (Transition::Elementwise(decay), key(0)?.clone(), gated)
        }
        ModelKind::Mamba2 => {
            let z = softplus(gate(0)?);
            let a = scalar_decay(inputs)?;
            (Transition::Scalar((-a * z).exp()), key(0)? * z, inputs.value.clone())
        }
        ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => {
            let factors = if spec.kind == ModelKind::GatedDeltaNet {
                1
            } else {
                spec.n_householder
            };
            if inputs.keys.len() != factors || inputs.gates.len() != factors {
                return Err(Error::Shape(format!(
                    "expected {factors} keys and gates, got {} and {}",
                    inputs.keys.len(),
                    inputs.gates.len()
                )));
            }
            let decay = scalar_decay(inputs)? * softplus(*need(inputs.decay_gate.as_ref(), "decay gate")?);
            let mut product = DMatrix::identity(kd, kd);
            let mut b = DVector::zeros(kd);
            for i in 0..factors {
                let k = key(i)?;
                let beta = sigmoid(gate(i)?);
                let h = householder(k, beta);
                b = &h * b + k * beta;
                product = h * product;
            }
            (Transition::Dense(product * decay), b, inputs.value.clone())
        }
        ModelKind::SoftmaxAttention => {
            return Err(Error::InvalidConfig("softmax attention has no recurrent step".into()))
        }
    };
    Ok(HeadDynamics {
        transition,
        write_key,
        write_value,
        readout: inputs.query.clone(),
    })
}

pub fn step_dynamics(spec: &ModelSpec, inputs: &StepInputs) -> Result<Vec<HeadDynamics>> {
    let layout = layout_of(spec)?;
    if inputs.heads.len() != layout.heads {
        return Err(Error::Shape(format!(
            "expected {} heads, got {}",
            layout.heads,
            inputs.heads.len()
        )));
    }
    inputs.heads.iter().map(|h| head_dynamics(spec, &layout, h)).collect()
}

fn layout_of(spec: &ModelSpec) -> Result<StateLayout> {
    spec.layout()
        .ok_or_else(|| Error::InvalidConfig(format!("{} has no fixed recurrent state", spec.kind)))
}

/// Per-head `key_dim x value_dim` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub heads: Vec<DMatrix<f64>>,
}

impl RecurrentState {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let l = layout_of(spec)?;
        Ok(Self {
            heads: vec![DMatrix::zeros(l.key_dim, l.value_dim); l.heads],
        })
    }

    pub fn numel(&self) -> usize {
        self.heads.iter().map(|h| h.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.heads.iter().map(|h| h.norm_squared()).sum::<f64>().sqrt()
    }

    fn check(&self, layout: &StateLayout) -> Result<()> {
        if self.heads.len() != layout.heads
            || self.heads.iter().any(|h| h.shape() != (layout.key_dim, layout.value_dim))
        {
            return Err(Error::Shape("recurrent state does not match the model layout".into()));
        }
        Ok(())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match first_non_finite(self.heads.iter().flat_map(|h| h.iter())) {
            Some(index) => Err(Error::NonFinite { what: "state", index }),
            None => Ok(()),
        }
    }
}

/// Concatenated per-head outputs.
pub(crate) fn concat(parts: impl IntoIterator<Item = DVector<f64>>) -> DVector<f64> {
    let all: Vec<f64> = parts.into_iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect();
    DVector::from_vec(all)
}

/// One recurrence step; returns the new state and `y_t`.
pub fn step(spec: &ModelSpec, state: &RecurrentState, inputs: &StepInputs) -> Result<(RecurrentState, DVector<f64>)> {
    let layout = layout_of(spec)?;
    state.check(&layout)?;
    let dynamics = step_dynamics(spec, inputs)?;
    apply_dynamics(state, &dynamics)
}

pub(crate) fn apply_dynamics(
    state: &RecurrentState,
    dynamics: &[HeadDynamics],
) -> Result<(RecurrentState, DVector<f64>)> {
    let heads: Vec<DMatrix<f64>> = state
        .heads
        .iter()
        .zip(dynamics)
        .map(|(s, dy)| dy.advance(s))
        .collect();
    let next = RecurrentState { heads };
    next.check_finite()?;
    let y = concat(next.heads.iter().zip(dynamics).map(|(s, dy)| dy.read(s)));
    Ok((next, y))
}
