//! Deterministic, splittable random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 generator keyed by the
//! master seed, with the 64-bit ChaCha stream id selecting an independent
//! substream. The stream id packs the dataset split, the sequence index and the
//! purpose of the draws:
//!
//! ```text
//! bits 63..62  split tag   (0 = grammar construction, 1 = train, 2 = test)
//! bits 61..4   sequence index (or resample attempt for grammar construction)
//! bits  3..0   purpose     (trajectory, noise gaps, non-grammatical gaps, ...)
//! ```
//!
//! Because a substream depends only on `(seed, split, index, purpose)`, sequences
//! can be generated in any order or in parallel and still produce identical
//! output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Grammar = 0,
    Train = 1,
    Test = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Construction = 0,
    Length = 1,
    Trajectory = 2,
    NoiseGaps = 3,
    NonGrammaticalGaps = 4,
    Weights = 5,
    Inputs = 6,
}

const INDEX_BITS: u32 = 58;

pub fn stream_id(split: Split, index: u64, purpose: Purpose) -> u64 {
    assert!(index < (1 << INDEX_BITS), "sequence index {index} too large");
    ((split as u64) << 62) | (index << 4) | purpose as u64
}

/// Substream for `(seed, split, index, purpose)`.
pub fn substream(seed: u64, split: Split, index: u64, purpose: Purpose) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(split, index, purpose));
    rng
}
