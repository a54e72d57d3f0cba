//! Cipher selection shared by dataset generation, oracles and baselines.

use std::fmt;
use std::str::FromStr;

use crate::error::CipherError;
use crate::present::{self, PresentKey80, PresentRoundKeys};
use crate::simeck::{self, SimeckKey128, SimeckRoundKeys};
use crate::Block64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CipherKind {
    Present,
    Simeck,
    /// Zero-round debug cipher: encryption is the identity.
    Identity,
}

impl CipherKind {
    pub fn name(self) -> &'static str {
        match self {
            CipherKind::Present => "present",
            CipherKind::Simeck => "simeck",
            CipherKind::Identity => "identity",
        }
    }

    pub fn max_rounds(self) -> usize {
        match self {
            CipherKind::Present => present::FULL_ROUNDS,
            CipherKind::Simeck => simeck::FULL_ROUNDS,
            CipherKind::Identity => 0,
        }
    }

    /// Mask selecting the meaningful low bits of a raw `u128` key.
    pub fn key_mask(self) -> u128 {
        match self.key_bits() {
            128 => u128::MAX,
            bits => (1u128 << bits) - 1,
        }
    }

    pub fn key_bits(self) -> u32 {
        match self {
            CipherKind::Present => 80,
            CipherKind::Simeck => 128,
            CipherKind::Identity => 0,
        }
    }
}

impl fmt::Display for CipherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CipherKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "present" | "present80" => Ok(CipherKind::Present),
            "simeck" | "simeck64" => Ok(CipherKind::Simeck),
            "identity" => Ok(CipherKind::Identity),
            other => Err(format!("unknown cipher `{other}`")),
        }
    }
}

/// A cipher truncated to a fixed number of rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RoundReduced {
    kind: CipherKind,
    rounds: usize,
}

impl RoundReduced {
    pub fn new(kind: CipherKind, rounds: usize) -> Result<Self, CipherError> {
        let ok = match kind {
            CipherKind::Identity => rounds == 0,
            _ => (1..=kind.max_rounds()).contains(&rounds),
        };
        if ok {
            Ok(Self { kind, rounds })
        } else {
            Err(CipherError::Rounds {
                cipher: kind.name(),
                rounds,
                max: kind.max_rounds(),
            })
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: CipherKind::Identity,
            rounds: 0,
        }
    }

    pub fn kind(self) -> CipherKind {
        self.kind
    }

    pub fn rounds(self) -> usize {
        self.rounds
    }

    /// Expand a raw key (low `key_bits()` bits used) for repeated encryption.
    pub fn schedule(self, key: u128) -> KeyedCipher {
        match self.kind {
            CipherKind::Present => KeyedCipher::Present(
                present::key_schedule_80(PresentKey80::new(key), self.rounds)
                    .expect("rounds validated at construction"),
            ),
            CipherKind::Simeck => KeyedCipher::Simeck(
                simeck::key_schedule_64_128(SimeckKey128::from_u128(key), self.rounds)
                    .expect("rounds validated at construction"),
            ),
            CipherKind::Identity => KeyedCipher::Identity,
        }
    }

    pub fn encrypt(self, plaintext: Block64, key: u128) -> Block64 {
        self.schedule(key).encrypt(plaintext)
    }
}

#[derive(Clone, Debug)]
pub enum KeyedCipher {
    Present(PresentRoundKeys),
    Simeck(SimeckRoundKeys),
    Identity,
}

impl KeyedCipher {
    #[inline]
    pub fn encrypt(&self, plaintext: Block64) -> Block64 {
        match self {
            KeyedCipher::Present(keys) => present::encrypt_with_keys(plaintext, keys),
            KeyedCipher::Simeck(keys) => simeck::encrypt_with_keys(plaintext, keys),
            KeyedCipher::Identity => plaintext,
        }
    }

    #[inline]
    pub fn decrypt(&self, ciphertext: Block64) -> Block64 {
        match self {
            KeyedCipher::Present(keys) => present::decrypt_with_keys(ciphertext, keys),
            KeyedCipher::Simeck(keys) => simeck::decrypt_with_keys(ciphertext, keys),
            KeyedCipher::Identity => ciphertext,
        }
    }
}
