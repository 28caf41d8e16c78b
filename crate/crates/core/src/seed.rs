// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Independent, reproducible random streams for batches and sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Separate purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Random initial pulses, simplices, populations and DE draws.
    Algorithm,
    /// Additive measurement noise.
    Noise,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Algorithm => 0x616c_676f,
            Purpose::Noise => 0x6e6f_6973,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(master, point, run, purpose)`.
///
/// The key depends on master seed, sweep point and purpose; the run index
/// selects the ChaCha stream within that key, so distinct tuples never
/// share a keystream.
pub fn stream(master: u64, point: u64, run: u64, purpose: Purpose) -> ChaCha8Rng {
    let key = splitmix64(master ^ splitmix64(point ^ splitmix64(purpose.tag())));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(run);
    rng
}
