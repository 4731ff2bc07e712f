use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::cell::{HeadInputs, StepInputs};
use super::math::{gaussian, uniform, unit};
use super::spec::{ModelKind, ModelSpec, GLA_GATE_RANK};
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose, Rng, Split};

/// Seeded projection weights for one model.
///
/// Matrices are stored `out x in` so that a projection is `W * x`.
#[derive(Debug, Clone)]
pub struct ModelWeights {
    spec: ModelSpec,
    params: BTreeMap<String, DMatrix<f64>>,
}

fn kind_index(kind: ModelKind) -> u64 {
    ModelKind::ALL.iter().position(|&k| k == kind).unwrap() as u64
}

impl ModelWeights {
    /// Gaussian projections with standard deviation `1/sqrt(fan_in)`; positive
    /// decay parameters drawn uniformly (`[0.5, 1.5]` for the state-space
    /// matrices, `[0.5, 1.0]` for per-head scalars).
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate_for_kernels()?;
        let mut rng = substream(seed, Split::Grammar, kind_index(spec.kind), Purpose::Weights);
        let rng = &mut rng;
        let (d, n, ds, e) = (spec.d, spec.n_heads, spec.d_state, spec.expanded());
        let dh = spec.d_head();
        let mut params = BTreeMap::new();
        let mut proj = |name: &str, rows: usize, cols: usize, rng: &mut Rng| {
            let std = 1.0 / (cols as f64).sqrt();
            params.insert(name.to_string(), gaussian(rows, cols, std, rng));
        };
        match spec.kind {
            ModelKind::LinearAttention | ModelKind::SoftmaxAttention => {
                proj("w_q", d, d, rng);
                proj("w_k", d, d, rng);
                proj("w_v", d, d, rng);
            }
            ModelKind::S4D => {
                proj("w_q", ds, d, rng);
                proj("w_v", d, d, rng);
            }
            ModelKind::DeltaNet => {
                proj("w_q", d, d, rng);
                proj("w_k", d, d, rng);
                proj("w_v", d, d, rng);
                proj("w_g", n, d, rng);
            }
            ModelKind::GLA => {
                let dk = dh / 2;
                proj("w_q", n * dk, d, rng);
                proj("w_k", n * dk, d, rng);
                proj("w_v", d, d, rng);
                proj("w_g1", GLA_GATE_RANK, d, rng);
                proj("w_g2", dk, GLA_GATE_RANK, rng);
            }
            ModelKind::Mamba => {
                proj("w_in", e, d, rng);
                proj("w_b", ds, e, rng);
                proj("w_q", ds, e, rng);
                proj("w_g1", e / GLA_GATE_RANK, e, rng);
                proj("w_g2", e, e / GLA_GATE_RANK, rng);
            }
            ModelKind::Mamba2 => {
                proj("w_in", e, d, rng);
                proj("w_k", ds, e, rng);
                proj("w_q", ds, e, rng);
                proj("w_g", n, e, rng);
            }
            ModelKind::GatedDeltaNet => {
                proj("w_q", d, d, rng);
                proj("w_k", d, d, rng);
                proj("w_v", spec.expansion * d, d, rng);
                proj("w_alpha", n, d, rng);
                proj("w_g", n, d, rng);
            }
            ModelKind::GatedDeltaProduct => {
                proj("w_q", d, d, rng);
                for i in 0..spec.n_householder {
                    proj(&format!("w_k.{i}"), d, d, rng);
                }
                proj("w_v", spec.expansion * d, d, rng);
                proj("w_alpha", n, d, rng);
                for i in 0..spec.n_householder {
                    proj(&format!("w_h.{i}"), n, d, rng);
                }
            }
        }
        match spec.kind {
            ModelKind::S4D => {
                params.insert("a".into(), uniform(ds, d, 0.5, 1.5, rng));
            }
            ModelKind::Mamba => {
                params.insert("a".into(), uniform(ds, e, 0.5, 1.5, rng));
            }
            ModelKind::Mamba2 | ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => {
                params.insert("a".into(), uniform(n, 1, 0.5, 1.0, rng));
            }
            _ => {}
        }
        Ok(Self {
            spec: *spec,
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.params.get(name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut DMatrix<f64>> {
        self.params.get_mut(name)
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &DMatrix<f64>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn p(&self, name: &str) -> &DMatrix<f64> {
        &self.params[name]
    }

    /// Projects one token into per-head step inputs.
    pub fn project(&self, x: &DVector<f64>) -> Result<StepInputs> {
        let spec = &self.spec;
        if x.len() != spec.d {
            return Err(Error::Shape(format!(
                "token has dimension {}, model expects {}",
                x.len(),
                spec.d
            )));
        }
        let n = spec.n_heads;
        let dh = spec.d_head();
        let slice = |v: &DVector<f64>, h: usize, w: usize| v.rows(h * w, w).into_owned();
        let heads = match spec.kind {
            ModelKind::LinearAttention | ModelKind::SoftmaxAttention | ModelKind::DeltaNet => {
                let q = self.p("w_q") * x;
                let k = self.p("w_k") * x;
                let v = self.p("w_v") * x;
                let g = self.params.get("w_g").map(|w| w * x);
                (0..n)
                    .map(|h| {
                        let kh = slice(&k, h, dh);
                        let delta = spec.kind == ModelKind::DeltaNet;
                        HeadInputs {
                            keys: vec![if delta { unit(&kh) } else { kh }],
                            query: slice(&q, h, dh),
                            value: slice(&v, h, dh),
                            gates: g.as_ref().map(|g| vec![g[h]]).unwrap_or_default(),
                            decay_gate: None,
                            base_decay: None,
                        }
                    })
                    .collect()
            }
            ModelKind::S4D => vec![HeadInputs {
                keys: vec![],
                query: self.p("w_q") * x,
                value: self.p("w_v") * x,
                gates: vec![],
                decay_gate: None,
                base_decay: Some(self.p("a").clone()),
            }],
            ModelKind::GLA => {
                let dk = dh / 2;
                let q = self.p("w_q") * x;
                let k = self.p("w_k") * x;
                let v = self.p("w_v") * x;
                let g = self.p("w_g2") * (self.p("w_g1") * x);
                (0..n)
                    .map(|h| HeadInputs {
                        keys: vec![slice(&k, h, dk)],
                        query: slice(&q, h, dk),
                        value: slice(&v, h, dh),
                        gates: g.iter().copied().collect(),
                        decay_gate: None,
                        base_decay: None,
                    })
                    .collect()
            }
            ModelKind::Mamba => {
                let u = self.p("w_in") * x;
                let g = self.p("w_g2") * (self.p("w_g1") * &u);
                vec![HeadInputs {
                    keys: vec![self.p("w_b") * &u],
                    query: self.p("w_q") * &u,
                    value: u,
                    gates: g.iter().copied().collect(),
                    decay_gate: None,
                    base_decay: Some(self.p("a").clone()),
                }]
            }
            ModelKind::Mamba2 => {
                let u = self.p("w_in") * x;
                let k = self.p("w_k") * &u;
                let q = self.p("w_q") * &u;
                let g = self.p("w_g") * &u;
                let hw = spec.expanded() / n;
                let a = self.p("a");
                (0..n)
                    .map(|h| HeadInputs {
                        keys: vec![k.clone()],
                        query: q.clone(),
                        value: slice(&u, h, hw),
                        gates: vec![g[h]],
                        decay_gate: None,
                        base_decay: Some(DMatrix::from_element(1, 1, a[h])),
                    })
                    .collect()
            }
            ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => {
                let q = self.p("w_q") * x;
                let v = self.p("w_v") * x;
                let alpha = self.p("w_alpha") * x;
                let a = self.p("a");
                let factors = if spec.kind == ModelKind::GatedDeltaNet {
                    vec![(self.p("w_k") * x, self.p("w_g") * x)]
                } else {
                    (0..spec.n_householder)
                        .map(|i| (self.p(&format!("w_k.{i}")) * x, self.p(&format!("w_h.{i}")) * x))
                        .collect()
                };
                let vw = spec.expansion * dh;
                (0..n)
                    .map(|h| HeadInputs {
                        keys: factors.iter().map(|(k, _)| unit(&slice(k, h, dh))).collect(),
                        query: slice(&q, h, dh),
                        value: slice(&v, h, vw),
                        gates: factors.iter().map(|(_, g)| g[h]).collect(),
                        decay_gate: Some(alpha[h]),
                        base_decay: Some(DMatrix::from_element(1, 1, a[h])),
                    })
                    .collect()
            }
        };
        Ok(StepInputs { heads })
    }
}

/// Seeded standard-normal token matrix, one row per step.
pub fn random_tokens(d: usize, len: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = substream(seed, Split::Grammar, 0, Purpose::Inputs);
    let m = gaussian(len, d, 1.0, &mut rng);
    (0..len).map(|t| m.row(t).transpose()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(w: &ModelWeights, name: &str) -> (usize, usize) {
        w.param(name).map(|m| m.shape()).unwrap()
    }

    #[test]
    fn gate_shapes_match_parameter_count() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::small(kind);
            let w = ModelWeights::init(&spec, 1).unwrap();
            let gate_names: &[&str] = match kind {
                ModelKind::S4D | ModelKind::Mamba => &["a", "w_g1", "w_g2"],
                ModelKind::DeltaNet => &["w_g", "w_k"],
                ModelKind::GLA => &["w_g1", "w_g2"],
                ModelKind::Mamba2 => &["w_g"],
                ModelKind::GatedDeltaNet => &["w_alpha", "w_g", "w_k"],
                _ => &[],
            };
            let mut total: u64 = gate_names
                .iter()
                .filter_map(|n| w.param(n))
                .map(|m| m.len() as u64)
                .sum();
            if kind == ModelKind::GatedDeltaProduct {
                for i in 0..spec.n_householder {
                    total += w.param(&format!("w_k.{i}")).unwrap().len() as u64;
                    total += w.param(&format!("w_h.{i}")).unwrap().len() as u64;
                }
            }
            let expected = super::super::spec::count_gate_params(&spec);
            assert_eq!(total, expected, "{kind}");
        }
    }

    #[test]
    fn mamba_shapes() {
        let spec = ModelSpec::small(ModelKind::Mamba);
        let w = ModelWeights::init(&spec, 0).unwrap();
        let e = spec.expanded();
        assert_eq!(shape(&w, "a"), (spec.d_state, e));
        assert_eq!(shape(&w, "w_g1"), (e / 16, e));
        assert_eq!(shape(&w, "w_g2"), (e, e / 16));
        assert_eq!(shape(&w, "w_b"), (spec.d_state, e));
    }

    #[test]
    fn deterministic_and_kind_specific() {
        let s = ModelSpec::small(ModelKind::DeltaNet);
        let a = ModelWeights::init(&s, 5).unwrap();
        let b = ModelWeights::init(&s, 5).unwrap();
        assert_eq!(a.param("w_k"), b.param("w_k"));
        let c = ModelWeights::init(&ModelSpec::small(ModelKind::LinearAttention), 5).unwrap();
        assert_ne!(a.param("w_k"), c.param("w_k"));
    }

    #[test]
    fn decay_ranges() {
        let w = ModelWeights::init(&ModelSpec::small(ModelKind::S4D), 3).unwrap();
        assert!(w.param("a").unwrap().iter().all(|&x| (0.5..1.5).contains(&x)));
        let w = ModelWeights::init(&ModelSpec::small(ModelKind::GatedDeltaNet), 3).unwrap();
        assert!(w.param("a").unwrap().iter().all(|&x| (0.5..1.0).contains(&x)));
    }

    #[test]
    fn delta_keys_are_unit() {
        for kind in [ModelKind::DeltaNet, ModelKind::GatedDeltaNet, ModelKind::GatedDeltaProduct] {
            let spec = ModelSpec::small(kind);
            let w = ModelWeights::init(&spec, 2).unwrap();
            let x = &random_tokens(spec.d, 1, 9)[0];
            for h in w.project(x).unwrap().heads {
                for k in &h.keys {
                    assert!((k.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wrong_token_width() {
        let w = ModelWeights::init(&ModelSpec::small(ModelKind::GLA), 0).unwrap();
        assert!(matches!(w.project(&DVector::zeros(3)), Err(Error::Shape(_))));
    }
}
