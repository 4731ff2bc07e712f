use nalgebra::DVector;

use super::cell::concat;
use super::spec::ModelKind;
use super::weights::ModelWeights;
use crate::error::{Error, Result};

/// Causal softmax attention with an explicit key/value cache.
#[derive(Debug, Clone)]
pub struct SoftmaxAttention<'w> {
    weights: &'w ModelWeights,
    /// Per head: cached keys and values.
    keys: Vec<Vec<DVector<f64>>>,
    values: Vec<Vec<DVector<f64>>>,
}

impl<'w> SoftmaxAttention<'w> {
    pub fn new(weights: &'w ModelWeights) -> Result<Self> {
        if weights.spec().kind != ModelKind::SoftmaxAttention {
            return Err(Error::InvalidConfig(format!(
                "softmax attention needs softmax-attention weights, got {}",
                weights.spec().kind
            )));
        }
        let n = weights.spec().n_heads;
        Ok(Self {
            weights,
            keys: vec![Vec::new(); n],
            values: vec![Vec::new(); n],
        })
    }

    /// Steps seen so far.
    pub fn len(&self) -> usize {
        self.keys[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reals held in the cache: `2 * t * d_head * n_heads`.
    pub fn cache_size(&self) -> u64 {
        let per_step: usize = self
            .keys
            .iter()
            .zip(&self.values)
            .map(|(k, v)| k.last().map_or(0, |k| k.len()) + v.last().map_or(0, |v| v.len()))
            .sum();
        (per_step * self.len()) as u64
    }

    /// Appends one token and returns its output.
    pub fn push(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let inputs = self.weights.project(x)?;
        let scale = 1.0 / (self.weights.spec().d_head() as f64).sqrt();
        let mut outs = Vec::with_capacity(inputs.heads.len());
        for (h, head) in inputs.heads.into_iter().enumerate() {
            let key = head.keys.into_iter().next().expect("attention head has a key");
            self.keys[h].push(key);
            self.values[h].push(head.value);
            let scores: Vec<f64> = self.keys[h].iter().map(|k| k.dot(&head.query) * scale).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut y = DVector::zeros(self.values[h][0].len());
            for (w, v) in weights.iter().zip(&self.values[h]) {
                y += v * (w / total);
            }
            outs.push(y);
        }
        let y = concat(outs);
        if let Some(index) = super::math::first_non_finite(y.iter()) {
            return Err(Error::NonFinite { what: "attention output", index });
        }
        Ok(y)
    }
}

/// Outputs for every position, and the final cache size.
pub fn softmax_attention_forward(
    weights: &ModelWeights,
    tokens: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, u64)> {
    if tokens.is_empty() {
        return Err(Error::InvalidConfig("sequence must have at least one token".into()));
    }
    let mut attn = SoftmaxAttention::new(weights)?;
    let ys = tokens.iter().map(|x| attn.push(x)).collect::<Result<Vec<_>>>()?;
    Ok((ys, attn.cache_size()))
}
