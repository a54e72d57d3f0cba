//! Round-reduced Simeck64/128.
//!
//! A 64-bit block splits into `left` (most significant word) and `right`.
//! The master key loads as four words `(t2, t1, t0, k0)` from most to least
//! significant; `k0` is the first round key.

use crate::error::CipherError;
use crate::Block64;

pub const FULL_ROUNDS: usize = 44;

/// Key-schedule constant `2^32 - 4`.
pub const ROUND_CONSTANT: u32 = 0xFFFF_FFFC;

/// Feedback taps of the constant sequence: `s[i+6] = s[i] ^ s[i+1]`
/// (primitive polynomial `x^6 + x + 1`, period 63), seeded with all ones.
const LFSR_DEGREE: usize = 6;

/// Bit `i` of the constant sequence `z`, `i < 63`, least significant first.
pub const Z_SEQUENCE: u64 = lfsr_sequence();

const fn lfsr_sequence() -> u64 {
    let mut state: u64 = (1 << LFSR_DEGREE) - 1;
    let mut out = 0u64;
    let mut i = 0;
    while i < 63 {
        out |= (state & 1) << i;
        let feedback = (state ^ (state >> 1)) & 1;
        state = (state >> 1) | (feedback << (LFSR_DEGREE - 1));
        i += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SimeckState {
    pub left: u32,
    pub right: u32,
}

impl SimeckState {
    pub fn from_block(block: Block64) -> Self {
        Self {
            left: (block >> 32) as u32,
            right: block as u32,
        }
    }

    pub fn to_block(self) -> Block64 {
        ((self.left as u64) << 32) | self.right as u64
    }
}

/// A 128-bit master key as words `[k0, t0, t1, t2]` (least significant first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SimeckKey128 {
    words: [u32; 4],
}

impl SimeckKey128 {
    pub fn from_u128(bits: u128) -> Self {
        Self {
            words: [
                bits as u32,
                (bits >> 32) as u32,
                (bits >> 64) as u32,
                (bits >> 96) as u32,
            ],
        }
    }

    pub fn to_u128(self) -> u128 {
        self.words
            .iter()
            .rev()
            .fold(0u128, |acc, &w| (acc << 32) | w as u128)
    }

    /// Words least significant first: `[k0, t0, t1, t2]`.
    pub fn words(self) -> [u32; 4] {
        self.words
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimeckRoundKeys {
    keys: Vec<u32>,
}

impl SimeckRoundKeys {
    pub fn keys(&self) -> &[u32] {
        &self.keys
    }
}

/// The nonlinear function `(z & (z <<< 5)) ^ (z <<< 1)`.
#[inline]
pub fn f32(z: u32) -> u32 {
    (z & z.rotate_left(5)) ^ z.rotate_left(1)
}

#[inline]
pub fn simeck_round(state: SimeckState, subkey: u32) -> SimeckState {
    SimeckState {
        left: state.right ^ f32(state.left) ^ subkey,
        right: state.left,
    }
}

#[inline]
pub fn simeck_round_inv(state: SimeckState, subkey: u32) -> SimeckState {
    SimeckState {
        left: state.right,
        right: state.left ^ f32(state.right) ^ subkey,
    }
}

fn check_rounds(rounds: usize) -> Result<(), CipherError> {
    if (1..=FULL_ROUNDS).contains(&rounds) {
        Ok(())
    } else {
        Err(CipherError::Rounds {
            cipher: "simeck",
            rounds,
            max: FULL_ROUNDS,
        })
    }
}

pub fn key_schedule_64_128(
    key: SimeckKey128,
    rounds: usize,
) -> Result<SimeckRoundKeys, CipherError> {
    key_schedule_with_sequence(key, rounds, Z_SEQUENCE)
}

/// Key schedule driven by an arbitrary constant sequence (bit `i` of
/// `sequence` is `z_i`). Only useful for checking that test vectors catch
/// constant errors.
pub fn key_schedule_with_sequence(
    key: SimeckKey128,
    rounds: usize,
    sequence: u64,
) -> Result<SimeckRoundKeys, CipherError> {
    check_rounds(rounds)?;
    Ok(expand_key(key, rounds, sequence))
}

fn expand_key(key: SimeckKey128, rounds: usize, sequence: u64) -> SimeckRoundKeys {
    let [mut k, mut t0, mut t1, mut t2] = key.words;
    let mut keys = Vec::with_capacity(rounds);
    for i in 0..rounds {
        keys.push(k);
        let next = k ^ f32(t0) ^ ROUND_CONSTANT ^ ((sequence >> (i % 63)) & 1) as u32;
        k = t0;
        t0 = t1;
        t1 = t2;
        t2 = next;
    }
    SimeckRoundKeys { keys }
}

pub fn encrypt_with_keys(plaintext: Block64, keys: &SimeckRoundKeys) -> Block64 {
    keys.keys
        .iter()
        .fold(SimeckState::from_block(plaintext), |s, &k| simeck_round(s, k))
        .to_block()
}

pub fn decrypt_with_keys(ciphertext: Block64, keys: &SimeckRoundKeys) -> Block64 {
    keys.keys
        .iter()
        .rev()
        .fold(SimeckState::from_block(ciphertext), |s, &k| {
            simeck_round_inv(s, k)
        })
        .to_block()
}

pub fn simeck_encrypt(
    plaintext: Block64,
    key: SimeckKey128,
    rounds: usize,
) -> Result<Block64, CipherError> {
    let keys = key_schedule_64_128(key, rounds)?;
    Ok(encrypt_with_keys(plaintext, &keys))
}

pub fn simeck_encrypt_with_sequence(
    plaintext: Block64,
    key: SimeckKey128,
    rounds: usize,
    sequence: u64,
) -> Result<Block64, CipherError> {
    let keys = key_schedule_with_sequence(key, rounds, sequence)?;
    Ok(encrypt_with_keys(plaintext, &keys))
}

pub fn simeck_decrypt(
    ciphertext: Block64,
    key: SimeckKey128,
    rounds: usize,
) -> Result<Block64, CipherError> {
    let keys = key_schedule_64_128(key, rounds)?;
    Ok(decrypt_with_keys(ciphertext, &keys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const KAT_KEY: u128 = 0x1b1a1918_13121110_0b0a0908_03020100;
    const KAT_PT: u64 = 0x656b696c_20646e75;
    const KAT_CT: u64 = 0x45ce6902_5f7ab7ed;

    #[test]
    fn f_examples() {
        assert_eq!(f32(0), 0);
        assert_eq!(f32(1), 2);
        assert_eq!(f32(0x8000_0000), 1);
    }

    #[test]
    fn round_examples() {
        let s = simeck_round(SimeckState { left: 0, right: 0xDEAD }, 0);
        assert_eq!(s, SimeckState { left: 0xDEAD, right: 0 });
        let s = simeck_round(SimeckState { left: 1, right: 0 }, 0);
        assert_eq!(s, SimeckState { left: 2, right: 1 });
        let s0 = SimeckState { left: 0x1234_5678, right: 0x9abc_def0 };
        assert_eq!(simeck_round_inv(simeck_round(s0, 0x55aa), 0x55aa), s0);
    }

    #[test]
    fn z_sequence_prefix() {
        // First 44 constants consumed by the full cipher, least significant first.
        assert_eq!(Z_SEQUENCE & ((1 << 44) - 1), 0x938_BCA3_083F);
        // Period 63: the state returns to all ones.
        assert_eq!(Z_SEQUENCE & 0x3F, 0x3F);
    }

    #[test]
    fn key_schedule_structure() {
        let key = SimeckKey128::from_u128(KAT_KEY);
        assert_eq!(key.to_u128(), KAT_KEY);
        let ks = key_schedule_64_128(key, 4).unwrap();
        let [k0, t0, t1, t2] = key.words();
        assert_eq!(ks.keys()[0], k0);
        assert_eq!(ks.keys()[1], t0);
        assert_eq!(ks.keys()[2], t1);
        assert_eq!(ks.keys()[3], t2);
        assert_eq!(ks.keys().len(), 4);
        let ks5 = key_schedule_64_128(key, 5).unwrap();
        assert_eq!(ks5.keys()[4], k0 ^ f32(t0) ^ ROUND_CONSTANT ^ 1);
    }

    #[test]
    fn full_round_vector() {
        let key = SimeckKey128::from_u128(KAT_KEY);
        assert_eq!(simeck_encrypt(KAT_PT, key, 44).unwrap(), KAT_CT);
        assert_eq!(simeck_decrypt(KAT_CT, key, 44).unwrap(), KAT_PT);
    }

    #[test]
    fn rejects_bad_round_counts() {
        let key = SimeckKey128::from_u128(0);
        assert!(key_schedule_64_128(key, 0).is_err());
        assert!(key_schedule_64_128(key, 45).is_err());
    }

    #[test]
    fn zero_left_difference_is_transparent_for_one_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = SimeckState::from_block(rng.random());
            let dr: u32 = rng.random();
            let k: u32 = rng.random();
            let a = simeck_round(s, k);
            let b = simeck_round(SimeckState { left: s.left, right: s.right ^ dr }, k);
            assert_eq!(a.left ^ b.left, dr);
            assert_eq!(a.right ^ b.right, 0);
        }
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p: u64 = rng.random();
            let k = SimeckKey128::from_u128(rng.random());
            let r = rng.random_range(1..=44);
            let c = simeck_encrypt(p, k, r).unwrap();
            assert_eq!(simeck_decrypt(c, k, r).unwrap(), p);
            assert_eq!(SimeckState::from_block(p).to_block(), p);
        }
    }
}
