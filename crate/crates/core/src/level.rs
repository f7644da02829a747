//! Deterministic tower levels shared by client and server.
//!
//! Each draw hashes `(domain tag, seed, counter)` with SHA-256 and reads the
//! output as a coin stream, most significant bit first; a set bit is heads.
//! The level is the number of heads before the first tails.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::error::Error;
use crate::node::MAX_LEVEL;

pub const SEED_LEN: usize = 10;

/// 80-bit seed shared by both parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub [u8; SEED_LEN]);

impl Seed {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl FromStr for Seed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches("0x");
        let raw = hex::decode(s).map_err(|e| Error::format("seed", e.to_string()))?;
        if raw.len() > SEED_LEN {
            return Err(Error::format("seed", format!("{} bytes, at most {SEED_LEN} allowed", raw.len())));
        }
        // Short seeds are left-padded with zeros, like a big-endian integer.
        let mut bytes = [0; SEED_LEN];
        bytes[SEED_LEN - raw.len()..].copy_from_slice(&raw);
        Ok(Seed(bytes))
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Independent coin streams derived from the same seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LevelDomain {
    /// Block towers of a version's data list.
    Data,
    /// Towers of the version index.
    Index,
}

impl LevelDomain {
    fn tag(self) -> &'static [u8] {
        match self {
            LevelDomain::Data => b"flexvault/level/data",
            LevelDomain::Index => b"flexvault/level/index",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelSource {
    pub seed: Seed,
    pub counter: u64,
    pub domain: LevelDomain,
}

impl LevelSource {
    pub fn new(seed: Seed, domain: LevelDomain) -> Self {
        LevelSource {
            seed,
            counter: 0,
            domain,
        }
    }

    pub fn at(seed: Seed, domain: LevelDomain, counter: u64) -> Self {
        LevelSource {
            seed,
            counter,
            domain,
        }
    }

    /// Level for the current counter without advancing.
    pub fn peek(&self) -> u8 {
        let mut h = Sha256::new();
        h.update(self.domain.tag());
        h.update(self.seed.0);
        h.update(self.counter.to_be_bytes());
        level_from_coins(&h.finalize())
    }

    pub fn draw(&mut self) -> u8 {
        let level = self.peek();
        self.counter += 1;
        level
    }
}

/// Pure form of [`LevelSource::draw`].
pub fn draw_level(src: LevelSource) -> (u8, LevelSource) {
    let mut next = src;
    let level = next.draw();
    (level, next)
}

/// Counts leading heads (set bits, MSB first), capped at [`MAX_LEVEL`].
pub fn level_from_coins(coins: &[u8]) -> u8 {
    let mut heads = 0u32;
    for byte in coins {
        let ones = byte.leading_ones();
        heads += ones;
        if ones < 8 {
            break;
        }
    }
    heads.min(MAX_LEVEL as u32) as u8
}
