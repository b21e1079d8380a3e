//! Fixed-width bit strings used for PIDs, TIDs, keys, ciphertexts and digests.
//!
//! Bits are indexed from the most significant end: bit 0 is the leftmost
//! character of the binary rendering (`"1010"` has bit 0 set). The canonical
//! byte encoding is the big-endian integer value, zero-padded on the high side
//! to a whole number of bytes. Transcripts and commitments depend on this
//! encoding being bit-exact.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitsError {
    #[error("bit strings must have positive width")]
    ZeroWidth,
    #[error("width mismatch: expected {expected} bits, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid binary digit {0:?}")]
    InvalidBinary(char),
    #[error("invalid hex encoding: {0}")]
    InvalidHex(String),
    #[error("value does not fit in {width} bits")]
    Overflow { width: usize },
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    width: usize,
    bytes: Vec<u8>,
}

fn byte_len(width: usize) -> usize {
    width.div_ceil(8)
}

impl BitString {
    pub fn zeros(width: usize) -> Result<Self, BitsError> {
        if width == 0 {
            return Err(BitsError::ZeroWidth);
        }
        Ok(Self {
            width,
            bytes: vec![0; byte_len(width)],
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self, BitsError> {
        let mut out = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        Ok(out)
    }

    /// Parses a binary literal such as `"1010"`; the width is the literal length.
    pub fn from_binary(s: &str) -> Result<Self, BitsError> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::InvalidBinary(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bits(&bits)
    }

    /// Builds a bit string from its canonical big-endian bytes.
    pub fn from_bytes(width: usize, bytes: &[u8]) -> Result<Self, BitsError> {
        if width == 0 {
            return Err(BitsError::ZeroWidth);
        }
        if bytes.len() != byte_len(width) {
            return Err(BitsError::Overflow { width });
        }
        let spare = bytes.len() * 8 - width;
        if spare > 0 && bytes[0] >> (8 - spare) != 0 {
            return Err(BitsError::Overflow { width });
        }
        Ok(Self {
            width,
            bytes: bytes.to_vec(),
        })
    }

    pub fn from_hex(width: usize, s: &str) -> Result<Self, BitsError> {
        let bytes = hex::decode(s).map_err(|e| BitsError::InvalidHex(e.to_string()))?;
        Self::from_bytes(width, &bytes)
    }

    pub fn from_u64(width: usize, value: u64) -> Result<Self, BitsError> {
        if width < 64 && value >> width != 0 {
            return Err(BitsError::Overflow { width });
        }
        let mut out = Self::zeros(width)?;
        for i in 0..width.min(64) {
            if (value >> i) & 1 == 1 {
                out.set(width - 1 - i, true);
            }
        }
        Ok(out)
    }

    /// Integer value of a string at most 64 bits wide.
    pub fn to_u64(&self) -> Option<u64> {
        if self.width > 64 {
            return None;
        }
        Some(self.bytes.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b)))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Lowercase hex of the canonical bytes.
    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn to_binary(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    fn locate(&self, index: usize) -> (usize, u8) {
        assert!(index < self.width, "bit index {index} out of range for width {}", self.width);
        let pos = self.width - 1 - index;
        (self.bytes.len() - 1 - pos / 8, 1u8 << (pos % 8))
    }

    pub fn get(&self, index: usize) -> bool {
        let (byte, mask) = self.locate(index);
        self.bytes[byte] & mask != 0
    }

    pub fn set(&mut self, index: usize, value: bool) {
        let (byte, mask) = self.locate(index);
        if value {
            self.bytes[byte] |= mask;
        } else {
            self.bytes[byte] &= !mask;
        }
    }

    pub fn flip(&mut self, index: usize) {
        let (byte, mask) = self.locate(index);
        self.bytes[byte] ^= mask;
    }

    pub fn with_flipped(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.flip(index);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &Self) -> Result<Self, BitsError> {
        if self.width != other.width {
            return Err(BitsError::WidthMismatch {
                expected: self.width,
                found: other.width,
            });
        }
        Ok(Self {
            width: self.width,
            bytes: self
                .bytes
                .iter()
                .zip(&other.bytes)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width <= 32 {
            write!(f, "BitString({})", self.to_binary())
        } else {
            write!(f, "BitString({}b:{})", self.width, self.to_hex())
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_encoding_is_left_padded() {
        let b = BitString::from_binary("1010").unwrap();
        assert_eq!(b.as_bytes(), &[0x0a]);
        assert_eq!(b.to_hex(), "0a");
        let b = BitString::from_binary("100000001").unwrap();
        assert_eq!(b.as_bytes(), &[0x01, 0x01]);
    }

    #[test]
    fn rejects_zero_width_and_overflow() {
        assert_eq!(BitString::zeros(0), Err(BitsError::ZeroWidth));
        assert!(BitString::from_hex(4, "1f").is_err());
        assert!(BitString::from_hex(8, "0102").is_err());
        assert!(BitString::from_u64(3, 8).is_err());
        assert!(BitString::from_binary("10x").is_err());
    }

    #[test]
    fn xor_requires_equal_width() {
        let a = BitString::zeros(4).unwrap();
        let b = BitString::zeros(5).unwrap();
        assert_eq!(
            a.xor(&b),
            Err(BitsError::WidthMismatch { expected: 4, found: 5 })
        );
    }

    #[test]
    fn u64_conversion_matches_binary() {
        let b = BitString::from_u64(4, 0b1100).unwrap();
        assert_eq!(b.to_binary(), "1100");
        assert_eq!(b.to_u64(), Some(12));
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..300)) {
            let b = BitString::from_bits(&bits).unwrap();
            let back = BitString::from_hex(b.width(), &b.to_hex()).unwrap();
            prop_assert_eq!(&back, &b);
            prop_assert_eq!(back.iter().collect::<Vec<_>>(), bits);
        }
    }
}
