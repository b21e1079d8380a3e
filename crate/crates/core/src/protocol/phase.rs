//! Phase ordering and the ticket barrier.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Registration,
    Ticketing,
    Rewards,
}

impl Phase {
    fn previous(self) -> Option<Phase> {
        match self {
            Phase::Registration => None,
            Phase::Ticketing => Some(Phase::Registration),
            Phase::Rewards => Some(Phase::Ticketing),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Registration => "registration",
            Phase::Ticketing => "ticketing",
            Phase::Rewards => "rewards",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    /// Submitted after ticketing closed.
    Late,
    /// Participant already holds an accepted ticket.
    Duplicate,
}

/// Phases run strictly registration → ticketing → rewards, each opened then
/// closed; only an open ticketing phase admits tickets, one per participant.
#[derive(Clone, Debug, Default)]
pub struct PhaseBarrier {
    current: Option<Phase>,
    open: bool,
    submitted: BTreeSet<usize>,
}

impl PhaseBarrier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> Option<Phase> {
        self.current
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn open(&mut self, phase: Phase) -> Result<(), ProtocolError> {
        let in_order = match (self.current, phase.previous()) {
            (None, None) => true,
            (Some(cur), Some(prev)) => cur == prev && !self.open,
            _ => false,
        };
        if !in_order {
            return Err(ProtocolError::PhaseViolation(format!(
                "cannot open {phase} from {}",
                self.describe()
            )));
        }
        self.current = Some(phase);
        self.open = true;
        Ok(())
    }

    pub fn close(&mut self, phase: Phase) -> Result<(), ProtocolError> {
        if self.current != Some(phase) || !self.open {
            return Err(ProtocolError::PhaseViolation(format!(
                "cannot close {phase} from {}",
                self.describe()
            )));
        }
        self.open = false;
        Ok(())
    }

    pub fn submit_ticket(&mut self, participant: usize) -> Result<Admission, ProtocolError> {
        match (self.current, self.open) {
            (Some(Phase::Ticketing), true) => {
                if self.submitted.insert(participant) {
                    Ok(Admission::Accepted)
                } else {
                    Ok(Admission::Duplicate)
                }
            }
            (Some(Phase::Ticketing), false) | (Some(Phase::Rewards), _) => Ok(Admission::Late),
            _ => Err(ProtocolError::PhaseViolation(format!(
                "ticket submitted during {}",
                self.describe()
            ))),
        }
    }

    fn describe(&self) -> String {
        match self.current {
            None => "start".into(),
            Some(p) if self.open => format!("open {p}"),
            Some(p) => format!("closed {p}"),
        }
    }
}
