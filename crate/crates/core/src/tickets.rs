//! Ticket arithmetic for the rewards phase: hash commitments, the XOR-fold
//! winner, Hamming scoring, reward shares and public outcome verification.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::{BitString, BitsError};

pub type Share = Ratio<u64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TicketError {
    #[error("cannot fold an empty ticket list")]
    Empty,
    #[error(transparent)]
    Bits(#[from] BitsError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Commitment {
    digest: BitString,
}

impl Commitment {
    pub const SCHEME: &'static str = "sha-256";

    pub fn of_bytes(bytes: &[u8]) -> Self {
        let digest: [u8; 32] = Sha256::digest(bytes).into();
        Self {
            digest: BitString::from_bytes(256, &digest).expect("32-byte digest"),
        }
    }

    pub fn from_hex(s: &str) -> Result<Self, BitsError> {
        Ok(Self {
            digest: BitString::from_hex(256, s)?,
        })
    }

    pub fn digest(&self) -> &BitString {
        &self.digest
    }

    pub fn to_hex(&self) -> String {
        self.digest.to_hex()
    }

    pub fn opens_to(&self, value: &BitString) -> bool {
        hash_commit(value) == *self
    }
}

/// SHA-256 over the canonical big-endian byte encoding.
pub fn hash_commit(value: &BitString) -> Commitment {
    Commitment::of_bytes(value.as_bytes())
}

/// Winning ticket `⊕ tidᵢ`.
pub fn xor_fold<'a, I>(tids: I) -> Result<BitString, TicketError>
where
    I: IntoIterator<Item = &'a BitString>,
{
    let mut iter = tids.into_iter();
    let first = iter.next().ok_or(TicketError::Empty)?.clone();
    iter.try_fold(first, |acc, t| Ok(acc.xor(t)?))
}

pub fn hamming(a: &BitString, b: &BitString) -> Result<usize, BitsError> {
    Ok(a.xor(b)?.count_ones())
}

/// How a ticket's Hamming distance `d` to the winner becomes a score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// `(width − d) / width`: closer tickets earn more.
    #[default]
    Closeness,
    /// `d / width`: the literal reading, farther tickets earn more.
    Distance,
}

impl Scoring {
    /// Score numerator over the common denominator `width`.
    fn numerator(self, distance: usize, width: usize) -> u64 {
        match self {
            Scoring::Closeness => (width - distance) as u64,
            Scoring::Distance => distance as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "score")]
pub enum RewardPolicy {
    ExactSplit,
    DistanceProportional(Scoring),
}

impl Default for RewardPolicy {
    fn default() -> Self {
        RewardPolicy::DistanceProportional(Scoring::Closeness)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardEntry {
    pub participant: usize,
    pub tid: BitString,
    pub distance: usize,
    pub share: Share,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardFlag {
    NoExactWinner,
    ZeroTotalScore,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardTable {
    pub entries: Vec<RewardEntry>,
    pub flag: Option<RewardFlag>,
}

impl RewardTable {
    pub fn total_share(&self) -> Share {
        self.entries.iter().map(|e| e.share).sum()
    }
}

pub fn compute_rewards(
    tids: &[(usize, BitString)],
    winner: &BitString,
    policy: RewardPolicy,
) -> Result<RewardTable, TicketError> {
    let width = winner.width();
    let distances = tids
        .iter()
        .map(|(_, t)| hamming(t, winner))
        .collect::<Result<Vec<_>, _>>()?;
    let weights: Vec<u64> = match policy {
        RewardPolicy::ExactSplit => distances.iter().map(|&d| u64::from(d == 0)).collect(),
        RewardPolicy::DistanceProportional(scoring) => distances
            .iter()
            .map(|&d| scoring.numerator(d, width))
            .collect(),
    };
    let total: u64 = weights.iter().sum();
    let flag = match (total, policy) {
        (0, RewardPolicy::ExactSplit) => Some(RewardFlag::NoExactWinner),
        (0, _) => Some(RewardFlag::ZeroTotalScore),
        _ => None,
    };
    let entries = tids
        .iter()
        .zip(distances)
        .zip(weights)
        .map(|(((participant, tid), distance), w)| RewardEntry {
            participant: *participant,
            tid: tid.clone(),
            distance,
            share: if total == 0 {
                Share::from_integer(0)
            } else {
                Share::new(w, total)
            },
        })
        .collect();
    Ok(RewardTable { entries, flag })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verdict")]
pub enum Verdict {
    Ok,
    /// Announced ticket does not open the participant's commitment.
    CommitmentMismatch { participant: usize },
    /// Participant with a commitment but no announcement, or the reverse.
    MissingAnnouncement { participant: usize },
    WinnerMismatch,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Ok => f.write_str("OK"),
            Verdict::CommitmentMismatch { participant } => {
                write!(f, "commitment mismatch: participant {participant}")
            }
            Verdict::MissingAnnouncement { participant } => {
                write!(f, "missing announcement: participant {participant}")
            }
            Verdict::WinnerMismatch => f.write_str("winner mismatch"),
        }
    }
}

/// Checks announced tickets against their commitments, then the winner
/// against the XOR of the announcements. Both lists are aligned by
/// participant id; the first violation is reported.
pub fn verify_outcome(
    announced: &[(usize, BitString)],
    commitments: &[(usize, Commitment)],
    winner: &BitString,
) -> Verdict {
    for pair in announced.iter().zip(commitments.iter()) {
        let ((pa, tid), (pc, commitment)) = pair;
        if pa != pc {
            return Verdict::MissingAnnouncement {
                participant: *pa.min(pc),
            };
        }
        if !commitment.opens_to(tid) {
            return Verdict::CommitmentMismatch { participant: *pa };
        }
    }
    if announced.len() != commitments.len() {
        let longer = if announced.len() > commitments.len() {
            announced[commitments.len()].0
        } else {
            commitments[announced.len()].0
        };
        return Verdict::MissingAnnouncement {
            participant: longer,
        };
    }
    match xor_fold(announced.iter().map(|(_, t)| t)) {
        Ok(w) if w == *winner => Verdict::Ok,
        _ => Verdict::WinnerMismatch,
    }
}
