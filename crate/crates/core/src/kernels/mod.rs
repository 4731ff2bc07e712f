//! Forward-only linear recurrent memory cells.
//!
//! Every recurrent kind is written in one form, `S_t = A_t (.) S_{t-1} + B_t (x) I_t`
//! with readout `y_t = S_t^T C_t`; softmax attention is kept for contrast.

pub mod attention;
pub mod cell;
pub mod checks;
pub mod math;
pub mod report;
pub mod scan;
pub mod spec;
pub mod weights;

pub use attention::{softmax_attention_forward, SoftmaxAttention};
pub use cell::{delta_rule_update, step, HeadInputs, RecurrentState, StepInputs, Transition};
pub use checks::{
    complementary_gating_check, deltaproduct_composition_check, kernel_check, transition_spectrum,
    CheckOutcome, GatingClass, GatingReport,
};
pub use scan::{chunked_scan, sequential_scan};
pub use spec::{count_gate_params, state_size, ModelKind, ModelSpec};
pub use weights::{random_tokens, ModelWeights};
