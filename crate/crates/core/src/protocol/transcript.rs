//! Ordered event log of one lottery run and its JSON form.
//!
//! Event indices are logical timestamps. BitStrings appear as lowercase
//! big-endian hex. Serialization is deterministic: identical runs produce
//! identical bytes.

use serde::{Deserialize, Serialize};

use super::phase::Phase;
use super::ProtocolError;
use crate::config::RunConfig;
use crate::keylink::entangled::Announcement;
use crate::keylink::Authority;

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "role")]
pub enum Visibility {
    Public,
    /// Only the named role(s) see the event, e.g. `"LAT1"`, `"LA"`, `"P2"`.
    Private(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionKind {
    Bb84Qkd,
    SemiQuantumQkd,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenedTicket {
    pub participant: usize,
    pub tid: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum EventPayload {
    PhaseOpened {
        phase: Phase,
    },
    PhaseClosed {
        phase: Phase,
    },
    CredentialsChecked {
        participant: usize,
        accepted: bool,
    },
    PidIssued {
        participant: usize,
        pid: String,
    },
    SignatureRegistered {
        participant: usize,
        positions: usize,
        lat1_records: usize,
        lat2_records: usize,
    },
    /// `authority` is absent for the joint semi-quantum check.
    Authentication {
        participant: usize,
        authority: Option<Authority>,
        accepted: bool,
        mismatches: usize,
        checked: usize,
        reason: Option<String>,
    },
    KeySession {
        participant: usize,
        authority: Authority,
        kind: SessionKind,
        attempt: usize,
        established: bool,
        qber: f64,
        sample_errors: usize,
        sample_checked: usize,
        control_errors: Option<usize>,
        control_checked: Option<usize>,
        abort_reason: Option<String>,
    },
    EavesdropCheck {
        participant: usize,
        attempt: usize,
        set1_violations: usize,
        set1_checked: usize,
        set2_violations: usize,
        set2_checked: usize,
        proceed: bool,
    },
    ParticipantExcluded {
        participant: usize,
        reason: String,
    },
    TidCommitted {
        participant: usize,
        digest: String,
    },
    TidDelivered {
        participant: usize,
        pid: String,
        ciphertext: String,
    },
    TidEncoded {
        participant: usize,
        announcements: Vec<Announcement>,
    },
    Warning {
        participant: Option<usize>,
        message: String,
    },
    TicketAccepted {
        participant: usize,
    },
    TicketRejected {
        participant: usize,
        reason: String,
    },
    CooperationDenied {
        authority: Authority,
        message: String,
    },
    /// One-key enumeration over the missing key (reduced width only).
    PosteriorDiagnostic {
        participant: usize,
        authority: Authority,
        candidates: usize,
        min_count: u64,
        max_count: u64,
    },
    AdversaryAction {
        description: String,
    },
    TidOpened {
        participant: usize,
        tid: String,
    },
    WinnerAnnounced {
        winner: String,
    },
    /// Tickets the authorities used for the draw, published after it.
    TicketsOpened {
        tickets: Vec<OpenedTicket>,
    },
    TidAnnounced {
        participant: usize,
        tid: String,
    },
    RunAborted {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub index: usize,
    pub phase: Phase,
    pub visibility: Visibility,
    pub payload: EventPayload,
}

impl Event {
    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub seed_source: String,
    pub non_secure: bool,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRow {
    pub participant: usize,
    pub tid: String,
    pub distance: usize,
    /// Exact share `numerator/denominator`.
    pub share: String,
    pub share_decimal: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verdict")]
pub enum TranscriptVerdict {
    Ok,
    CommitmentMismatch { participant: usize },
    MissingAnnouncement { participant: usize },
    WinnerMismatch,
    /// The authorities drew with a ticket that does not open the
    /// participant's commitment.
    AuthorityTamper { participant: usize },
}

impl TranscriptVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, TranscriptVerdict::Ok)
    }

    pub fn culprit(&self) -> Option<String> {
        match self {
            TranscriptVerdict::Ok => None,
            TranscriptVerdict::CommitmentMismatch { participant }
            | TranscriptVerdict::MissingAnnouncement { participant } => Some(format!("P{participant}")),
            TranscriptVerdict::WinnerMismatch => Some("LA".into()),
            TranscriptVerdict::AuthorityTamper { participant } => {
                Some(format!("LA (ticket of P{participant})"))
            }
        }
    }
}

impl std::fmt::Display for TranscriptVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TranscriptVerdict::Ok => f.write_str("OK"),
            TranscriptVerdict::CommitmentMismatch { participant } => {
                write!(f, "commitment mismatch: participant P{participant}")
            }
            TranscriptVerdict::MissingAnnouncement { participant } => {
                write!(f, "missing announcement: participant P{participant}")
            }
            TranscriptVerdict::WinnerMismatch => f.write_str("winner mismatch"),
            TranscriptVerdict::AuthorityTamper { participant } => {
                write!(f, "authority tamper: ticket of participant P{participant}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub version: u32,
    pub config_echo: ConfigEcho,
    pub events: Vec<Event>,
    pub winner_hex: Option<String>,
    pub rewards: Vec<RewardRow>,
    pub verdicts: Vec<TranscriptVerdict>,
}

impl Transcript {
    pub fn new(config_echo: ConfigEcho) -> Self {
        Self {
            version: TRANSCRIPT_VERSION,
            config_echo,
            events: Vec::new(),
            winner_hex: None,
            rewards: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn push(&mut self, phase: Phase, visibility: Visibility, payload: EventPayload) {
        let index = self.events.len();
        self.events.push(Event {
            index,
            phase,
            visibility,
            payload,
        });
    }

    pub fn public(&mut self, phase: Phase, payload: EventPayload) {
        self.push(phase, Visibility::Public, payload);
    }

    pub fn private(&mut self, phase: Phase, role: impl Into<String>, payload: EventPayload) {
        self.push(phase, Visibility::Private(role.into()), payload);
    }

    pub fn payloads(&self) -> impl Iterator<Item = &EventPayload> {
        self.events.iter().map(|e| &e.payload)
    }

    pub fn abort_reason(&self) -> Option<&str> {
        self.payloads().find_map(|p| match p {
            EventPayload::RunAborted { reason } => Some(reason.as_str()),
            _ => None,
        })
    }

    /// Copy with every non-public event removed.
    pub fn public_view(&self) -> Transcript {
        Transcript {
            events: self.events.iter().filter(|e| e.is_public()).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn accepted_participants(&self) -> Vec<usize> {
        self.payloads()
            .filter_map(|p| match p {
                EventPayload::TicketAccepted { participant } => Some(*participant),
                _ => None,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String, ProtocolError> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| ProtocolError::Transcript(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let t: Transcript =
            serde_json::from_str(text).map_err(|e| ProtocolError::Transcript(e.to_string()))?;
        if t.version != TRANSCRIPT_VERSION {
            return Err(ProtocolError::Transcript(format!(
                "unsupported transcript version {}",
                t.version
            )));
        }
        Ok(t)
    }
}
