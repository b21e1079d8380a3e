//! Two-key one-time-pad delivery: the ciphertext is `TID ⊕ K₁ ⊕ K₂`, where
//! `K₁` is shared with LAT1 and `K₂` with LAT2.

use super::{CooperationGate, KeylinkError};
use crate::bits::BitString;

/// Largest width for which the one-key posterior is enumerated.
pub const MAX_ENUMERATION_WIDTH: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedTid {
    pub ciphertext: BitString,
    pub pid: BitString,
}

impl EncryptedTid {
    pub fn width(&self) -> usize {
        self.ciphertext.width()
    }
}

pub fn split_deliver(
    tid: &BitString,
    k1: &BitString,
    k2: &BitString,
    pid: &BitString,
) -> Result<EncryptedTid, KeylinkError> {
    Ok(EncryptedTid {
        ciphertext: tid.xor(k1)?.xor(k2)?,
        pid: pid.clone(),
    })
}

/// Joint opening by both authorities.
pub fn open(
    e: &EncryptedTid,
    k1: &BitString,
    k2: &BitString,
    _gate: &CooperationGate,
) -> Result<BitString, KeylinkError> {
    Ok(e.ciphertext.xor(k1)?.xor(k2)?)
}

/// What a single authority obtains alone: `TID ⊕ K_other`.
pub fn open_with_single_key(e: &EncryptedTid, key: &BitString) -> Result<BitString, KeylinkError> {
    Ok(e.ciphertext.xor(key)?)
}

/// Histogram over candidate TIDs obtained by enumerating every value of the
/// missing key; entry `t` counts the keys under which the ciphertext opens
/// to `t`.
pub fn one_key_posterior(e: &EncryptedTid, known_key: &BitString) -> Result<Vec<u64>, KeylinkError> {
    let width = e.width();
    if width > MAX_ENUMERATION_WIDTH {
        return Err(KeylinkError::InvalidParams(format!(
            "posterior enumeration limited to {MAX_ENUMERATION_WIDTH} bits, got {width}"
        )));
    }
    let partial = open_with_single_key(e, known_key)?;
    let mut counts = vec![0u64; 1 << width];
    for candidate in 0..(1u64 << width) {
        let missing = BitString::from_u64(width, candidate)?;
        let tid = partial.xor(&missing)?;
        counts[tid.to_u64().expect("width ≤ 16") as usize] += 1;
    }
    Ok(counts)
}
