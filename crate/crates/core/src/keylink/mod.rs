//! Confidential TID delivery from a participant to the two ticketing
//! authorities.
//!
//! * [`qkd`]: prepare-and-measure BB84 key agreement.
//! * [`semiquantum`]: key agreement with a classical (measure-or-reflect) party.
//! * [`split`]: one-time-pad delivery under `K₁ ⊕ K₂`, opened only jointly.
//! * [`entangled`]: singlet distribution, eavesdrop check and
//!   entanglement-swapping transfer of the TID.

pub mod entangled;
pub mod qkd;
pub mod semiquantum;
pub mod split;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitsError;
use crate::qsim::{measure, Basis, PureState, QsimError};
use crate::rng::RandomStream;

pub use entangled::{
    bell_distribute_and_check, ent_decode_block, ent_decode_tid, ent_deliver_tid,
    ent_encode_block, ent_encode_tid, Announcement, BellSession, Carrier, CheckOutcome,
    CheckParams, CheckReport, SwapTable,
};
pub use qkd::{bb84_qkd, QkdAbort, QkdOutcome, QkdParams, SiftedKey};
pub use semiquantum::semiquantum_qkd;
pub use split::{
    one_key_posterior, open, open_with_single_key, split_deliver, EncryptedTid,
    MAX_ENUMERATION_WIDTH,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeylinkError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cooperation of LAT1 and LAT2 required, got {0} and {1}")]
    CooperationRequired(Authority, Authority),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("insufficient blocks: need {needed}, have {available}")]
    InsufficientBlocks { needed: usize, available: usize },
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Authority {
    Lat1,
    Lat2,
}

impl fmt::Display for Authority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Authority::Lat1 => "LAT1",
            Authority::Lat2 => "LAT2",
        })
    }
}

/// Proof that both ticketing authorities take part in the current step.
/// Joint openings and joint Bell measurements require one.
#[derive(Debug)]
pub struct CooperationGate {
    _private: (),
}

impl CooperationGate {
    pub fn convene(first: Authority, second: Authority) -> Result<Self, KeylinkError> {
        if first != second {
            Ok(Self { _private: () })
        } else {
            Err(KeylinkError::CooperationRequired(first, second))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EveBasis {
    #[default]
    Random,
    Rectilinear,
    Diagonal,
}

/// Intercept-resend on one quantum channel: each transiting qubit is attacked
/// with probability `fraction`, measured in the chosen basis and replaced by
/// the resulting eigenstate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interception {
    pub fraction: f64,
    #[serde(default)]
    pub basis: EveBasis,
}

impl Interception {
    pub fn full(basis: EveBasis) -> Self {
        Self {
            fraction: 1.0,
            basis,
        }
    }

    /// Attacks `qubit` of a (possibly multi-qubit) register.
    pub fn apply(
        &self,
        state: PureState,
        qubit: usize,
        rng: &mut RandomStream,
    ) -> Result<PureState, QsimError> {
        if !rng.bernoulli(self.fraction) {
            return Ok(state);
        }
        let basis = match self.basis {
            EveBasis::Rectilinear => Basis::Rectilinear,
            EveBasis::Diagonal => Basis::Diagonal,
            EveBasis::Random => {
                if rng.bit() {
                    Basis::Diagonal
                } else {
                    Basis::Rectilinear
                }
            }
        };
        Ok(measure(&state, qubit, basis, rng)?.post_state)
    }
}

/// Errors seen on disclosed check positions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCount {
    pub errors: usize,
    pub checked: usize,
}

impl ErrorCount {
    pub fn rate(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.errors as f64 / self.checked as f64
        }
    }

    pub fn record(&mut self, error: bool) {
        self.checked += 1;
        if error {
            self.errors += 1;
        }
    }
}

impl std::ops::AddAssign for ErrorCount {
    fn add_assign(&mut self, rhs: Self) {
        self.errors += rhs.errors;
        self.checked += rhs.checked;
    }
}
