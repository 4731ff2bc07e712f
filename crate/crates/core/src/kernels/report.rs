//! Gate-parameter, state-size and feature tables for the reference configuration,
//! next to the published values.

use std::fmt;

use serde::Serialize;

use super::checks::{probe_features, reference_features, Features};
use super::spec::{count_gate_params, state_size, ModelKind, ModelSpec};
use super::weights::{random_tokens, ModelWeights};
use crate::error::Result;

/// Published gate-parameter counts at `d = 1296`.
pub const PUBLISHED_GATE_PARAMS: [(ModelKind, &str); 7] = [
    (ModelKind::LinearAttention, "0"),
    (ModelKind::DeltaNet, "1.7M"),
    (ModelKind::GLA, "21k"),
    (ModelKind::Mamba, "1M"),
    (ModelKind::Mamba2, "41k"),
    (ModelKind::GatedDeltaNet, "1.7M"),
    (ModelKind::GatedDeltaProduct, "6.7M"),
];

/// Published state sizes at `d = 1296`.
pub const PUBLISHED_STATE_SIZES: [(ModelKind, &str); 8] = [
    (ModelKind::LinearAttention, "105k"),
    (ModelKind::S4D, "83k"),
    (ModelKind::DeltaNet, "105k"),
    (ModelKind::GLA, "52k"),
    (ModelKind::Mamba, "166k"),
    (ModelKind::Mamba2, "332k"),
    (ModelKind::GatedDeltaNet, "210k"),
    (ModelKind::GatedDeltaProduct, "210k"),
];

/// Symbolic gate-parameter formula per kind.
pub fn gate_formula(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::LinearAttention | ModelKind::SoftmaxAttention => "0",
        ModelKind::S4D => "d*d_state",
        ModelKind::DeltaNet => "d*N + d^2",
        ModelKind::GLA => "d*16 + 16*d/(2N)",
        ModelKind::Mamba => "2d*d_state + 8d^2/16",
        ModelKind::Mamba2 => "2d*N",
        ModelKind::GatedDeltaNet => "2d*N + d^2",
        ModelKind::GatedDeltaProduct => "n_h*(d*N + d^2)",
    }
}

pub fn state_formula(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::LinearAttention | ModelKind::DeltaNet => "d^2/N",
        ModelKind::S4D => "d_state*d",
        ModelKind::GLA => "d^2/(2N)",
        ModelKind::Mamba | ModelKind::Mamba2 => "d_state*2d",
        ModelKind::GatedDeltaNet | ModelKind::GatedDeltaProduct => "2*d_head^2*N",
        ModelKind::SoftmaxAttention => "2*t*d_head*N (grows)",
    }
}

/// Renders `value` at the precision and unit of `published` ("1.7M", "52k",
/// "0"), rounding half away from zero. `None` if `published` is unparseable.
pub fn render_like(value: u64, published: &str) -> Option<String> {
    let (mantissa, suffix, unit) = match published.chars().last()? {
        'k' | 'K' => (&published[..published.len() - 1], "k", 1e3),
        'M' => (&published[..published.len() - 1], "M", 1e6),
        c if c.is_ascii_digit() => (published, "", 1.0),
        _ => return None,
    };
    mantissa.parse::<f64>().ok()?;
    let decimals = mantissa.split_once('.').map_or(0, |(_, frac)| frac.len());
    let scale = 10f64.powi(decimals as i32);
    let rounded = (value as f64 / unit * scale).round() / scale;
    Some(format!("{rounded:.decimals$}{suffix}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct TableCell {
    pub kind: ModelKind,
    pub quantity: &'static str,
    pub formula: &'static str,
    pub computed: u64,
    pub rendered: String,
    pub published: &'static str,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureRow {
    pub kind: ModelKind,
    pub measured: Features,
    pub published: Features,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamReport {
    pub d: usize,
    pub n_heads: usize,
    pub features: Vec<FeatureRow>,
    pub gate_params: Vec<TableCell>,
    pub state_sizes: Vec<TableCell>,
}

impl ParamReport {
    pub fn all_match(&self) -> bool {
        self.features.iter().all(|r| r.matches)
            && self.gate_params.iter().chain(&self.state_sizes).all(|c| c.matches)
    }

    pub fn mismatches(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .features
            .iter()
            .filter(|r| !r.matches)
            .map(|r| format!("{} features: measured [{}] published [{}]", r.kind, r.measured, r.published))
            .collect();
        out.extend(
            self.gate_params
                .iter()
                .chain(&self.state_sizes)
                .filter(|c| !c.matches)
                .map(|c| {
                    format!(
                        "{} {}: computed {} renders as {}, published {}",
                        c.kind, c.quantity, c.computed, c.rendered, c.published
                    )
                }),
        );
        out
    }
}

fn cell(kind: ModelKind, quantity: &'static str, formula: &'static str, computed: u64, published: &'static str) -> TableCell {
    let rendered = render_like(computed, published).unwrap_or_else(|| computed.to_string());
    TableCell {
        kind,
        quantity,
        formula,
        computed,
        matches: rendered == published,
        rendered,
        published,
    }
}

/// Builds all three tables; features are probed on small seeded models.
pub fn param_report(seed: u64) -> Result<ParamReport> {
    let mut features = Vec::new();
    for kind in ModelKind::RECURRENT {
        let spec = ModelSpec::small(kind);
        let w = ModelWeights::init(&spec, seed)?;
        let head = w.project(&random_tokens(spec.d, 1, seed)[0])?.heads.swap_remove(0);
        let measured = probe_features(&spec, &head)?;
        let published = reference_features(kind).expect("recurrent kind");
        features.push(FeatureRow {
            kind,
            measured,
            published,
            matches: measured == published,
        });
    }
    let gate_params = PUBLISHED_GATE_PARAMS
        .iter()
        .map(|&(kind, p)| {
            let n = count_gate_params(&ModelSpec::reference(kind));
            cell(kind, "gate parameters", gate_formula(kind), n, p)
        })
        .collect();
    let state_sizes = PUBLISHED_STATE_SIZES
        .iter()
        .map(|&(kind, p)| {
            let n = state_size(&ModelSpec::reference(kind)).expect("recurrent kind");
            cell(kind, "state size", state_formula(kind), n, p)
        })
        .collect();
    let r = ModelSpec::reference(ModelKind::DeltaNet);
    Ok(ParamReport {
        d: r.d,
        n_heads: r.n_heads,
        features,
        gate_params,
        state_sizes,
    })
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISMATCH"
    }
}

impl fmt::Display for ParamReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gating features (selectivity/complementary gating/channel mixing)")?;
        writeln!(f, "{:<20} {:<14} {:<14}", "model", "measured", "published")?;
        for r in &self.features {
            writeln!(
                f,
                "{:<20} {:<14} {:<14} {}",
                r.kind.display_name(),
                r.measured.to_string(),
                r.published.to_string(),
                mark(r.matches)
            )?;
        }
        for (title, cells) in [
            (format!("Gate parameters (d={}, N_heads={})", self.d, self.n_heads), &self.gate_params),
            (format!("State size (d={}, N_heads={})", self.d, self.n_heads), &self.state_sizes),
        ] {
            writeln!(f)?;
            writeln!(f, "{title}")?;
            writeln!(
                f,
                "{:<20} {:<22} {:>10} {:>9} {:>9}",
                "model", "formula", "exact", "rounded", "published"
            )?;
            for c in cells {
                writeln!(
                    f,
                    "{:<20} {:<22} {:>10} {:>9} {:>9} {}",
                    c.kind.display_name(),
                    c.formula,
                    c.computed,
                    c.rendered,
                    c.published,
                    mark(c.matches)
                )?;
            }
        }
        Ok(())
    }
}
