use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid grammar: {0}")]
    InvalidGrammar(String),

    #[error("no disambiguable grammar found after {attempts} attempts")]
    ConstructionFailed { attempts: u32 },

    #[error("grammar has an empty initial set")]
    EmptyInitialSet,

    #[error("unknown latent state {0}")]
    UnknownLatent(usize),

    #[error("latent {latent} reaches every observable; no non-grammatical distractor exists")]
    EmptyDistractorSet { latent: usize },

    #[error("id {id} out of range for vocabulary of size {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty belief at position {position}: observation inconsistent with the grammar")]
    EmptyBelief { position: usize },

    #[error("power iteration did not converge after {iterations} iterations (estimate {estimate}, residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {what} at component {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("unknown model `{name}`; valid names: {valid}")]
    UnknownModel { name: String, valid: String },

    #[error("unknown profile `{name}`; valid profiles: {valid}")]
    UnknownProfile { name: String, valid: String },

    #[error("grammar hash {found} does not match manifest hash {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("malformed dataset: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
