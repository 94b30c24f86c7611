//! Fixed-width bit strings and the hash/XOR primitives the scheme is built from.

use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Width of every protocol value, in bits.
pub const K_BITS: usize = 256;

/// Width of every protocol value, in bytes.
pub const K_BYTES: usize = K_BITS / 8;

/// Identifies the one-way function used by a card and the server that issued it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashId {
    #[default]
    #[serde(rename = "sha256")]
    Sha256,
}

impl HashId {
    pub const fn as_str(self) -> &'static str {
        match self {
            HashId::Sha256 => "sha256",
        }
    }

    /// Output width of the function in bits.
    pub const fn width_bits(self) -> usize {
        match self {
            HashId::Sha256 => 256,
        }
    }
}

impl fmt::Display for HashId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HashId {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sha256" => Ok(HashId::Sha256),
            other => Err(BitsError::UnknownHash(other.to_owned())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("expected {expected} bytes, got {actual}")]
    Width { expected: usize, actual: usize },
    #[error("invalid hex: {0}")]
    Hex(String),
    #[error("hex must be lowercase")]
    NotLowercase,
    #[error("unknown hash function {0:?}")]
    UnknownHash(String),
    #[error("timestamp {0} is outside 0..=u64::MAX")]
    TimestampRange(i128),
}

/// A k-bit value stored big-endian.
///
/// The width is fixed by the type, so XOR of mismatched widths cannot be
/// expressed. Values enter from the outside world only through
/// [`Bits::from_slice`] or [`Bits::from_hex`], which check the length.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits([u8; K_BYTES]);

impl Bits {
    pub const ZERO: Bits = Bits([0; K_BYTES]);

    pub const fn from_bytes(bytes: [u8; K_BYTES]) -> Self {
        Bits(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, BitsError> {
        let arr: [u8; K_BYTES] = bytes.try_into().map_err(|_| BitsError::Width {
            expected: K_BYTES,
            actual: bytes.len(),
        })?;
        Ok(Bits(arr))
    }

    /// Parses exactly `2 * K_BYTES` lowercase hex characters.
    pub fn from_hex(s: &str) -> Result<Self, BitsError> {
        if s.bytes().any(|c| c.is_ascii_uppercase()) {
            return Err(BitsError::NotLowercase);
        }
        let raw = hex::decode(s).map_err(|e| BitsError::Hex(e.to_string()))?;
        Self::from_slice(&raw)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub const fn as_bytes(&self) -> &[u8; K_BYTES] {
        &self.0
    }

    pub fn bit(&self, index: usize) -> bool {
        assert!(index < K_BITS);
        // index 0 is the least significant bit of the big-endian value
        let byte = self.0[K_BYTES - 1 - index / 8];
        (byte >> (index % 8)) & 1 == 1
    }

    /// Returns a copy with bit `index` inverted (0 = least significant).
    pub fn flip_bit(mut self, index: usize) -> Self {
        assert!(index < K_BITS);
        self.0[K_BYTES - 1 - index / 8] ^= 1 << (index % 8);
        self
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        let mut out = [0u8; K_BYTES];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        Bits(out)
    }
}

impl BitXor for Bits {
    type Output = Bits;

    fn bitxor(self, rhs: Bits) -> Bits {
        self.xor(&rhs)
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({})", self.to_hex())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Bits {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Bits::from_hex(s)
    }
}

impl Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Bits::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A password as typed. Any byte string is legal, including the empty one.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Password(Vec<u8>);

impl Password {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Password(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&str> for Password {
    fn from(s: &str) -> Self {
        Password(s.as_bytes().to_vec())
    }
}

impl From<&[u8]> for Password {
    fn from(b: &[u8]) -> Self {
        Password(b.to_vec())
    }
}

impl fmt::Debug for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Password({})", hex::encode(&self.0))
    }
}

/// Seconds since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const fn from_secs(secs: u64) -> Self {
        Timestamp(secs)
    }

    pub const fn secs(self) -> u64 {
        self.0
    }

    /// Accepts any signed input and rejects what does not fit in `0..=u64::MAX`.
    pub fn try_from_signed(secs: i128) -> Result<Self, BitsError> {
        u64::try_from(secs)
            .map(Timestamp)
            .map_err(|_| BitsError::TimestampRange(secs))
    }

    /// `self - earlier` as a signed difference.
    pub fn signed_diff(self, earlier: Timestamp) -> i128 {
        i128::from(self.0) - i128::from(earlier.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One-way function over arbitrary bytes.
pub fn hash(data: &[u8]) -> Bits {
    let digest = Sha256::digest(data);
    Bits::from_slice(digest.as_slice()).expect("sha256 output is 32 bytes")
}

/// Hashes the canonical big-endian encoding of a k-bit value.
pub fn hash_bits(value: &Bits) -> Bits {
    hash(value.as_bytes())
}

pub fn hash_password(pw: &Password) -> Bits {
    hash(pw.as_bytes())
}

pub fn xor(a: &Bits, b: &Bits) -> Bits {
    a.xor(b)
}

/// Embeds `t` as 64-bit big-endian in the low bytes of a zero k-bit value.
pub fn embed_timestamp(t: Timestamp) -> Bits {
    let mut out = [0u8; K_BYTES];
    out[K_BYTES - 8..].copy_from_slice(&t.secs().to_be_bytes());
    Bits(out)
}
