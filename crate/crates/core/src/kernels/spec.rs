use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearAttention,
    S4D,
    DeltaNet,
    GLA,
    Mamba,
    Mamba2,
    GatedDeltaNet,
    GatedDeltaProduct,
    SoftmaxAttention,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::LinearAttention,
        ModelKind::S4D,
        ModelKind::DeltaNet,
        ModelKind::GLA,
        ModelKind::Mamba,
        ModelKind::Mamba2,
        ModelKind::GatedDeltaNet,
        ModelKind::GatedDeltaProduct,
        ModelKind::SoftmaxAttention,
    ];

    /// Kinds with a fixed-size recurrent state.
    pub const RECURRENT: [ModelKind; 8] = [
        ModelKind::LinearAttention,
        ModelKind::S4D,
        ModelKind::DeltaNet,
        ModelKind::GLA,
        ModelKind::Mamba,
        ModelKind::Mamba2,
        ModelKind::GatedDeltaNet,
        ModelKind::GatedDeltaProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearAttention => "linear-attention",
            ModelKind::S4D => "s4d",
            ModelKind::DeltaNet => "deltanet",
            ModelKind::GLA => "gla",
            ModelKind::Mamba => "mamba",
            ModelKind::Mamba2 => "mamba2",
            ModelKind::GatedDeltaNet => "gated-deltanet",
            ModelKind::GatedDeltaProduct => "gated-deltaproduct",
            ModelKind::SoftmaxAttention => "softmax-attention",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::LinearAttention => "L.A.",
            ModelKind::S4D => "S4D",
            ModelKind::DeltaNet => "DeltaNet",
            ModelKind::GLA => "GLA",
            ModelKind::Mamba => "Mamba",
            ModelKind::Mamba2 => "Mamba2",
            ModelKind::GatedDeltaNet => "Gated DeltaNet",
            ModelKind::GatedDeltaProduct => "Gated DeltaProduct",
            ModelKind::SoftmaxAttention => "Softmax attention",
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != ModelKind::SoftmaxAttention
    }

    /// Transition acts by matrix product (Householder-type), mixing channels.
    pub fn is_delta_family(self) -> bool {
        matches!(
            self,
            ModelKind::DeltaNet | ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct
        )
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::UnknownModel {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

/// Rank of GLA's two-stage gate projection.
pub const GLA_GATE_RANK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Model dimension.
    pub d: usize,
    pub n_heads: usize,
    pub d_state: usize,
    /// Householder factors per step (Gated DeltaProduct).
    pub n_householder: usize,
    /// Channel expansion factor `v`.
    pub expansion: usize,
    /// GLA gate temperature.
    pub gla_tau: f64,
}

/// Per-head recurrent state layout: `heads` matrices of `key_dim x value_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub heads: usize,
    pub key_dim: usize,
    pub value_dim: usize,
}

impl StateLayout {
    pub fn numel(&self) -> usize {
        self.heads * self.key_dim * self.value_dim
    }
}

impl ModelSpec {
    /// Largest configuration used for the parameter and state-size tables.
    pub fn reference(kind: ModelKind) -> Self {
        Self {
            kind,
            d: 1296,
            n_heads: 16,
            d_state: if kind == ModelKind::Mamba2 { 128 } else { 64 },
            n_householder: 4,
            expansion: 2,
            gla_tau: 16.0,
        }
    }

    /// Small configuration for numerical checks.
    pub fn small(kind: ModelKind) -> Self {
        Self {
            kind,
            d: 16,
            n_heads: 2,
            d_state: 8,
            n_householder: 4,
            expansion: 2,
            gla_tau: 16.0,
        }
    }

    pub fn d_head(&self) -> usize {
        self.d / self.n_heads
    }

    /// Expanded channel count `v * d` (Mamba family).
    pub fn expanded(&self) -> usize {
        self.expansion * self.d
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d == 0 || self.n_heads == 0 || self.d_state == 0 || self.expansion == 0 {
            return bad("all dimensions must be positive".into());
        }
        if self.d % self.n_heads != 0 {
            return bad(format!("d = {} is not divisible by n_heads = {}", self.d, self.n_heads));
        }
        if self.n_householder == 0 {
            return bad("n_householder must be at least 1".into());
        }
        if !(self.gla_tau > 0.0 && self.gla_tau.is_finite()) {
            return bad(format!("gla_tau must be positive, got {}", self.gla_tau));
        }
        Ok(())
    }

    /// Additional constraints for running the recurrence (integer head shapes).
    pub fn validate_for_kernels(&self) -> Result<()> {
        self.validate()?;
        match self.kind {
            ModelKind::GLA if self.d_head() % 2 != 0 => Err(Error::Shape(format!(
                "GLA needs an even head dimension, got {}",
                self.d_head()
            ))),
            ModelKind::Mamba2 if self.expanded() % self.n_heads != 0 => Err(Error::Shape(format!(
                "expanded width {} is not divisible by n_heads = {}",
                self.expanded(),
                self.n_heads
            ))),
            ModelKind::Mamba if self.expanded() < GLA_GATE_RANK => Err(Error::Shape(format!(
                "Mamba needs an expanded width of at least 16, got {}",
                self.expanded()
            ))),
            _ => Ok(()),
        }
    }

    pub fn layout(&self) -> Option<StateLayout> {
        let (n, dh, e) = (self.n_heads, self.d_head(), self.expanded());
        let (heads, key_dim, value_dim) = match self.kind {
            ModelKind::LinearAttention | ModelKind::DeltaNet => (n, dh, dh),
            ModelKind::S4D => (1, self.d_state, self.d),
            ModelKind::GLA => (n, dh / 2, dh),
            ModelKind::Mamba => (1, self.d_state, e),
            ModelKind::Mamba2 => (n, self.d_state, e / n),
            ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => (n, dh, self.expansion * dh),
            ModelKind::SoftmaxAttention => return None,
        };
        Some(StateLayout {
            heads,
            key_dim,
            value_dim,
        })
    }
}

/// Parameters of the transition gate `A_t`.
///
/// | model | count |
/// |---|---|
/// | linear attention | 0 |
/// | S4D | `d * d_state` |
/// | DeltaNet | `d * N + d^2` |
/// | GLA | `d * 16 + 16 * d / (2N)` |
/// | Mamba | `v d * d_state + 2 (v d)^2 / 16` |
/// | Mamba2 | `v d * N` |
/// | Gated DeltaNet | `2 d * N + d^2` |
/// | Gated DeltaProduct | `n_h (d * N + d^2)` |
pub fn count_gate_params(spec: &ModelSpec) -> u64 {
    let d = spec.d as u64;
    let n = spec.n_heads as u64;
    let ds = spec.d_state as u64;
    let e = spec.expanded() as u64;
    let rank = GLA_GATE_RANK as u64;
    match spec.kind {
        ModelKind::LinearAttention | ModelKind::SoftmaxAttention => 0,
        ModelKind::S4D => d * ds,
        ModelKind::DeltaNet => d * n + d * d,
        ModelKind::GLA => d * rank + rank * d / (2 * n),
        ModelKind::Mamba => e * ds + 2 * e * e / rank,
        ModelKind::Mamba2 => e * n,
        ModelKind::GatedDeltaNet => 2 * d * n + d * d,
        ModelKind::GatedDeltaProduct => spec.n_householder as u64 * (d * n + d * d),
    }
}

/// Number of reals in the recurrent state; `None` for softmax attention,
/// whose cache grows with the sequence.
pub fn state_size(spec: &ModelSpec) -> Option<u64> {
    let d = spec.d as u64;
    let n = spec.n_heads as u64;
    let ds = spec.d_state as u64;
    let dh = spec.d_head() as u64;
    let v = spec.expansion as u64;
    Some(match spec.kind {
        ModelKind::LinearAttention | ModelKind::DeltaNet => d * d / n,
        ModelKind::S4D => ds * d,
        ModelKind::GLA => d * d / (2 * n),
        ModelKind::Mamba | ModelKind::Mamba2 => ds * v * d,
        ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => v * dh * dh * n,
        ModelKind::SoftmaxAttention => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("Gated_DeltaNet".parse::<ModelKind>().unwrap(), ModelKind::GatedDeltaNet);
        let err = "rwkv".parse::<ModelKind>().unwrap_err();
        assert!(err.to_string().contains("mamba2"));
    }

    #[test]
    fn reference_gate_params() {
        let p = |k| count_gate_params(&ModelSpec::reference(k));
        assert_eq!(p(ModelKind::LinearAttention), 0);
        assert_eq!(p(ModelKind::DeltaNet), 1_700_352);
        assert_eq!(p(ModelKind::GLA), 21_384);
        assert_eq!(p(ModelKind::Mamba), 1_005_696);
        assert_eq!(p(ModelKind::Mamba2), 41_472);
        assert_eq!(p(ModelKind::GatedDeltaNet), 1_721_088);
        assert_eq!(p(ModelKind::GatedDeltaProduct), 6_801_408);
        assert_eq!(p(ModelKind::S4D), 82_944);
    }

    #[test]
    fn reference_state_sizes() {
        let s = |k| state_size(&ModelSpec::reference(k)).unwrap();
        assert_eq!(s(ModelKind::LinearAttention), 104_976);
        assert_eq!(s(ModelKind::DeltaNet), 104_976);
        assert_eq!(s(ModelKind::S4D), 82_944);
        assert_eq!(s(ModelKind::GLA), 52_488);
        assert_eq!(s(ModelKind::Mamba), 165_888);
        assert_eq!(s(ModelKind::Mamba2), 331_776);
        assert_eq!(s(ModelKind::GatedDeltaNet), 209_952);
        assert_eq!(s(ModelKind::GatedDeltaProduct), 209_952);
        assert_eq!(state_size(&ModelSpec::reference(ModelKind::SoftmaxAttention)), None);
    }

    #[test]
    fn layouts_match_state_size() {
        for k in ModelKind::RECURRENT {
            let spec = ModelSpec::small(k);
            spec.validate_for_kernels().unwrap();
            assert_eq!(spec.layout().unwrap().numel() as u64, state_size(&spec).unwrap(), "{k}");
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = ModelSpec::small(ModelKind::DeltaNet);
        s.n_heads = 3;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::small(ModelKind::GatedDeltaProduct);
        s.n_householder = 0;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::small(ModelKind::GLA);
        s.d = 18;
        assert!(s.validate().is_ok());
        assert!(s.validate_for_kernels().is_err());
    }
}
