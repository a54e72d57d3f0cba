//! Round-reduced PRESENT with the 80-bit key schedule.
//!
//! Bit 0 of a [`Block64`] is the least significant bit; nibble `i` occupies
//! bits `4i..4i+3`. The permutation layer moves state bit `i` to bit
//! `16i mod 63` (bit 63 stays in place).

use crate::error::CipherError;
use crate::Block64;

/// Rounds of the full cipher.
pub const FULL_ROUNDS: usize = 31;

pub const SBOX: [u8; 16] = [
    0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2,
];

pub const SBOX_INV: [u8; 16] = invert_sbox(&SBOX);

const fn invert_sbox(sbox: &[u8; 16]) -> [u8; 16] {
    let mut inv = [0u8; 16];
    let mut i = 0;
    while i < 16 {
        inv[sbox[i] as usize] = i as u8;
        i += 1;
    }
    inv
}

const KEY_MASK: u128 = (1u128 << 80) - 1;

/// An 80-bit PRESENT master key, `k79..k0` with `k79` the most significant bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PresentKey80(u128);

impl PresentKey80 {
    /// Bits above position 79 are discarded.
    pub fn new(bits: u128) -> Self {
        Self(bits & KEY_MASK)
    }

    pub fn bits(self) -> u128 {
        self.0
    }
}

/// Subkeys `K_1..K_{r+1}` for an `r`-round encryption; the last one is the
/// post-whitening key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresentRoundKeys {
    keys: Vec<Block64>,
}

impl PresentRoundKeys {
    pub fn keys(&self) -> &[Block64] {
        &self.keys
    }

    pub fn rounds(&self) -> usize {
        self.keys.len() - 1
    }
}

#[inline]
pub fn sbox_nibble(x: u8) -> u8 {
    SBOX[(x & 0xF) as usize]
}

#[inline]
pub fn sbox_layer(state: Block64) -> Block64 {
    apply_nibbles(state, &SBOX)
}

#[inline]
pub fn sbox_layer_inv(state: Block64) -> Block64 {
    apply_nibbles(state, &SBOX_INV)
}

#[inline]
fn apply_nibbles(state: Block64, table: &[u8; 16]) -> Block64 {
    let mut out = 0u64;
    for i in 0..16 {
        let nib = (state >> (4 * i)) & 0xF;
        out |= (table[nib as usize] as u64) << (4 * i);
    }
    out
}

/// Destination of state bit `i` under the permutation layer.
#[inline]
pub const fn p_index(i: usize) -> usize {
    if i == 63 {
        63
    } else {
        (16 * i) % 63
    }
}

#[inline]
pub fn p_layer(state: Block64) -> Block64 {
    let mut out = 0u64;
    for i in 0..64 {
        out |= ((state >> i) & 1) << p_index(i);
    }
    out
}

#[inline]
pub fn p_layer_inv(state: Block64) -> Block64 {
    let mut out = 0u64;
    for i in 0..64 {
        out |= ((state >> p_index(i)) & 1) << i;
    }
    out
}

#[inline]
pub fn add_round_key(state: Block64, subkey: Block64) -> Block64 {
    state ^ subkey
}

fn check_rounds(rounds: usize) -> Result<(), CipherError> {
    if (1..=FULL_ROUNDS).contains(&rounds) {
        Ok(())
    } else {
        Err(CipherError::Rounds {
            cipher: "present",
            rounds,
            max: FULL_ROUNDS,
        })
    }
}

pub fn key_schedule_80(key: PresentKey80, rounds: usize) -> Result<PresentRoundKeys, CipherError> {
    check_rounds(rounds)?;
    Ok(expand_key(key, rounds, &SBOX))
}

fn expand_key(key: PresentKey80, rounds: usize, sbox: &[u8; 16]) -> PresentRoundKeys {
    let mut reg = key.0;
    let mut keys = Vec::with_capacity(rounds + 1);
    for counter in 1..=rounds as u128 {
        keys.push((reg >> 16) as u64);
        reg = ((reg << 61) | (reg >> 19)) & KEY_MASK;
        let top = sbox[((reg >> 76) & 0xF) as usize] as u128;
        reg = (reg & !(0xFu128 << 76)) | (top << 76);
        reg ^= counter << 15;
    }
    keys.push((reg >> 16) as u64);
    PresentRoundKeys { keys }
}

/// Encrypt with precomputed subkeys: `rounds()` rounds followed by whitening.
pub fn encrypt_with_keys(plaintext: Block64, keys: &PresentRoundKeys) -> Block64 {
    let (last, body) = keys.keys.split_last().expect("at least one subkey");
    let mut state = plaintext;
    for &k in body {
        state = p_layer(sbox_layer(add_round_key(state, k)));
    }
    add_round_key(state, *last)
}

pub fn decrypt_with_keys(ciphertext: Block64, keys: &PresentRoundKeys) -> Block64 {
    let (last, body) = keys.keys.split_last().expect("at least one subkey");
    let mut state = add_round_key(ciphertext, *last);
    for &k in body.iter().rev() {
        state = add_round_key(sbox_layer_inv(p_layer_inv(state)), k);
    }
    state
}

pub fn present_encrypt(
    plaintext: Block64,
    key: PresentKey80,
    rounds: usize,
) -> Result<Block64, CipherError> {
    let keys = key_schedule_80(key, rounds)?;
    Ok(encrypt_with_keys(plaintext, &keys))
}

/// Full pipeline with a substitute S-box in both the data path and the key
/// schedule. Only useful for checking that test vectors catch table errors.
pub fn present_encrypt_with_sbox(
    plaintext: Block64,
    key: PresentKey80,
    rounds: usize,
    sbox: &[u8; 16],
) -> Result<Block64, CipherError> {
    check_rounds(rounds)?;
    let keys = expand_key(key, rounds, sbox);
    let (last, body) = keys.keys.split_last().expect("at least one subkey");
    let mut state = plaintext;
    for &k in body {
        state = p_layer(apply_nibbles(state ^ k, sbox));
    }
    Ok(state ^ last)
}

pub fn present_decrypt(
    ciphertext: Block64,
    key: PresentKey80,
    rounds: usize,
) -> Result<Block64, CipherError> {
    let keys = key_schedule_80(key, rounds)?;
    Ok(decrypt_with_keys(ciphertext, &keys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sbox_values() {
        assert_eq!(sbox_nibble(0x0), 0xC);
        assert_eq!(sbox_nibble(0x5), 0x0);
        assert_eq!(sbox_nibble(0xF), 0x2);
        let mut seen = [false; 16];
        for x in 0..16 {
            seen[sbox_nibble(x) as usize] = true;
            assert_eq!(SBOX_INV[SBOX[x as usize] as usize], x);
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn sbox_layer_examples() {
        assert_eq!(sbox_layer(0), 0xCCCC_CCCC_CCCC_CCCC);
        assert_eq!(sbox_layer(u64::MAX), 0x2222_2222_2222_2222);
        // Nibble-wise lookup, most significant nibble first.
        let expected = "C56B90AD3EF84712"
            .chars()
            .fold(0u64, |acc, c| (acc << 4) | c.to_digit(16).unwrap() as u64);
        assert_eq!(sbox_layer(0x0123_4567_89AB_CDEF), expected);
    }

    #[test]
    fn p_layer_matches_printed_prefix() {
        let prefix = [0, 16, 32, 48, 1, 17, 33, 49, 2, 18, 34, 50, 3, 19, 35, 51];
        for (i, &p) in prefix.iter().enumerate() {
            assert_eq!(p_index(i), p);
        }
        assert_eq!(p_layer(1 << 1), 1 << 16);
        assert_eq!(p_layer(1 << 7), 1 << 49);
        assert_eq!(p_layer(0), 0);
        assert_eq!(p_layer(1 << 63), 1 << 63);
    }

    #[test]
    fn p_layer_single_bit_orbits() {
        let mut image = 0u64;
        for i in 0..64 {
            let out = p_layer(1 << i);
            assert_eq!(out.count_ones(), 1);
            image |= out;
        }
        assert_eq!(image, u64::MAX);
        for i in 0..63 {
            let mut s = 1u64 << i;
            for _ in 0..63 {
                s = p_layer(s);
            }
            assert_eq!(s, 1 << i);
        }
    }

    #[test]
    fn add_round_key_examples() {
        let x = 0x1234_5678_9ABC_DEF0;
        assert_eq!(add_round_key(x, 0), x);
        assert_eq!(add_round_key(x, x), 0);
        assert_eq!(add_round_key(0xF0F0_F0F0_F0F0_F0F0, 0x0F0F_0F0F_0F0F_0F0F), u64::MAX);
    }

    /// Straight-line register update written against individual key bits.
    fn reference_schedule(key: u128, rounds: usize) -> Vec<u64> {
        let mut k: Vec<u8> = (0..80).map(|i| ((key >> i) & 1) as u8).collect();
        let mut out = Vec::new();
        for counter in 1..=rounds {
            out.push((16..80).rev().fold(0u64, |acc, i| (acc << 1) | k[i] as u64));
            // new bit j takes old bit (j + 19) mod 80
            let old = k.clone();
            for j in 0..80 {
                k[j] = old[(j + 19) % 80];
            }
            let nib = k[76] | k[77] << 1 | k[78] << 2 | k[79] << 3;
            let s = SBOX[nib as usize];
            for b in 0..4 {
                k[76 + b] = (s >> b) & 1;
            }
            for b in 0..5 {
                k[15 + b] ^= ((counter >> b) & 1) as u8;
            }
        }
        out.push((16..80).rev().fold(0u64, |acc, i| (acc << 1) | k[i] as u64));
        out
    }

    #[test]
    fn key_schedule_matches_bitwise_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let key = PresentKey80::new(rng.random::<u128>());
            let keys = key_schedule_80(key, 31).unwrap();
            assert_eq!(keys.keys().len(), 32);
            assert_eq!(keys.keys()[0], (key.bits() >> 16) as u64);
            assert_eq!(keys.keys(), reference_schedule(key.bits(), 31).as_slice());
        }
    }

    #[test]
    fn rotation_moves_k18_to_k79() {
        // Only k18 set: after the rotation it lands on k79, then the S-box
        // maps the top nibble 0b1000 to S(8) = 3.
        let keys = key_schedule_80(PresentKey80::new(1 << 18), 1).unwrap();
        assert_eq!(keys.keys()[1] >> 60, 0x3);
    }

    #[test]
    fn rejects_bad_round_counts() {
        assert!(key_schedule_80(PresentKey80::new(0), 0).is_err());
        assert!(key_schedule_80(PresentKey80::new(0), 32).is_err());
        assert!(present_encrypt(0, PresentKey80::new(0), 32).is_err());
    }

    #[test]
    fn full_round_vectors() {
        let ones = PresentKey80::new(KEY_MASK);
        let zero = PresentKey80::new(0);
        assert_eq!(present_encrypt(0, zero, 31).unwrap(), 0x5579_C138_7B22_8445);
        assert_eq!(present_encrypt(0, ones, 31).unwrap(), 0xE72C_46C0_F594_5049);
        assert_eq!(present_encrypt(u64::MAX, zero, 31).unwrap(), 0xA112_FFC7_2F68_417B);
        assert_eq!(present_encrypt(u64::MAX, ones, 31).unwrap(), 0x3333_DCD3_2132_10D2);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = rng.random::<u64>();
            let k = PresentKey80::new(rng.random());
            let r = rng.random_range(1..=31);
            let c = present_encrypt(p, k, r).unwrap();
            assert_eq!(present_decrypt(c, k, r).unwrap(), p);
            assert_eq!(present_encrypt(p, k, r).unwrap(), c);
        }
    }
}
