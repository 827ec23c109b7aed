//! Counter-derived random streams.
//!
//! Every random draw in a simulation comes from a stream keyed by
//! `(seed, agent, round, purpose)`, so results do not depend on how work is
//! split across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

/// What a stream is used for inside one agent-round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 0,
    Decide = 1,
    Reward = 2,
    ProbeChoice = 3,
    ProbeDelay = 4,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn stream(seed: u64, agent: u64, round: u64, purpose: Purpose) -> SimRng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ agent);
    h = splitmix64(h ^ round);
    h = splitmix64(h ^ purpose as u64);
    SimRng::seed_from_u64(h)
}
