//! Seed splitting. Every random role in a run (per-queue arrivals, per-server
//! coins, winner selection, counterfactual picks, per-queue strategies, the
//! central sampler) draws from its own deterministic sub-stream, so no
//! consumer can perturb another and coupled engines see identical randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Role {
    Arrival = 1,
    Coin = 2,
    Selection = 3,
    Counterfactual = 4,
    Strategy = 5,
    Central = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn sub_seed(master: u64, role: Role, index: u64) -> u64 {
    let a = splitmix64(master ^ (role as u64).rotate_left(48));
    splitmix64(a ^ index)
}

pub(crate) fn sub_rng(master: u64, role: Role, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(sub_seed(master, role, index))
}
