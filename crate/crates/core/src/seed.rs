// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Counter-based seed splitting.
//!
//! A child seed is the first word of the ChaCha8 stream keyed by the parent
//! seed, on stream number `stream`, advanced to word `index`. Children of
//! one parent never share a (stream, index) pair, and deriving one child
//! does not depend on any other.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Streams used by the simulator.
pub mod stream {
    pub const DETECTOR: u64 = 1;
    pub const STATIC_DETUNING: u64 = 2;
}

pub fn derive(parent: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}
