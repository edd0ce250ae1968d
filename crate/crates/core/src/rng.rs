//! Reproducible random streams.
//!
//! Every random quantity is drawn from ChaCha8 keyed by the master seed.
//! The 256-bit key is four consecutive outputs of SplitMix64 started at the
//! master seed, written little-endian. Each replica owns four ChaCha streams
//! selected by `stream = (replica_index << 2) | domain`:
//!
//! | domain | consumer |
//! |-------:|----------|
//! | 0 | edge uniforms: edge `e` (row-major upper triangle) reads the 64-bit word at word position `2e` |
//! | 1 | vertex weights of the inhomogeneous family |
//! | 2 | random Hopfield patterns |
//! | 3 | anything else tied to the replica (initial states, trajectories) |
//!
//! Because edge `e` always reads the same word, couplings do not depend on
//! the order in which edges are visited.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream domains, see the module documentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Edges = 0,
    VertexWeights = 1,
    Patterns = 2,
    Auxiliary = 3,
}

/// One SplitMix64 step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 key derived from a master seed.
pub fn key_from_seed(master_seed: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// The stream owned by `(master_seed, replica_index, domain)`.
pub fn stream(master_seed: u64, replica_index: u64, domain: Domain) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key_from_seed(master_seed));
    rng.set_stream((replica_index << 2) | domain as u64);
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`, safe to take logarithms of.
pub fn open_unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - unit_f64(rng)
}

/// Uniform integer in `0..n` by rejection (no modulo bias).
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0);
    let zone = u64::MAX - (u64::MAX - n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % n;
        }
    }
}

/// Edge uniform for edge `e` read by random access.
pub fn edge_uniform(rng: &mut ChaCha8Rng, e: u64) -> f64 {
    rng.set_word_pos(2 * e as u128);
    unit_f64(rng)
}
