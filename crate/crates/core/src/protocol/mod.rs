//! Full lottery runs: roles, phases, adversary injection and the transcript.

pub mod audit;
pub mod phase;
mod run;
pub mod stats;
pub mod transcript;

use thiserror::Error;

use crate::bits::BitsError;
use crate::config::ConfigError;
use crate::keylink::KeylinkError;
use crate::qds::QdsError;
use crate::tickets::TicketError;

pub use audit::{check_invariants, verify_transcript};
pub use phase::{Admission, Phase, PhaseBarrier};
pub use run::{run_lottery, run_lottery_with_source};
pub use stats::{detected, detection_stats, trial_seed, wilson_interval, DetectionSummary};
pub use transcript::{Event, EventPayload, Transcript, TranscriptVerdict, Visibility};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown target participant {0}")]
    UnknownTarget(usize),
    #[error("phase violation: {0}")]
    PhaseViolation(String),
    #[error("transcript error: {0}")]
    Transcript(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Keylink(#[from] KeylinkError),
    #[error(transparent)]
    Qds(#[from] QdsError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Tickets(#[from] TicketError),
}
