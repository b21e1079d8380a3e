//! Public verification of a finished transcript and structural invariant
//! checks used by tests.

use std::collections::{BTreeMap, BTreeSet};

use super::phase::Phase;
use super::transcript::{EventPayload, Transcript, TranscriptVerdict};
use super::ProtocolError;
use crate::bits::BitString;
use crate::tickets::{verify_outcome, xor_fold, Commitment, Verdict};

fn parse_tid(width: usize, hex: &str) -> Result<BitString, ProtocolError> {
    BitString::from_hex(width, hex)
        .map_err(|e| ProtocolError::Transcript(format!("bad TID hex `{hex}`: {e}")))
}

/// Re-checks the outcome from public events only: announced TIDs against
/// their commitments, the winner against the XOR of the announcements, the
/// tickets the authorities drew with, and the published winner field.
pub fn verify_transcript(t: &Transcript) -> Result<Vec<TranscriptVerdict>, ProtocolError> {
    let width = t.config_echo.config.widths.tid;
    let mut commitments: BTreeMap<usize, Commitment> = BTreeMap::new();
    let mut announced: BTreeMap<usize, BitString> = BTreeMap::new();
    let mut drawn: Option<BTreeMap<usize, BitString>> = None;
    let mut winner_event: Option<String> = None;

    for event in t.events.iter().filter(|e| e.is_public()) {
        match &event.payload {
            EventPayload::TidCommitted {
                participant,
                digest,
            } => {
                let c = Commitment::from_hex(digest).map_err(|e| {
                    ProtocolError::Transcript(format!("bad digest for P{participant}: {e}"))
                })?;
                commitments.insert(*participant, c);
            }
            EventPayload::TidAnnounced { participant, tid } => {
                announced.insert(*participant, parse_tid(width, tid)?);
            }
            EventPayload::TicketsOpened { tickets } => {
                let mut map = BTreeMap::new();
                for ticket in tickets {
                    map.insert(ticket.participant, parse_tid(width, &ticket.tid)?);
                }
                drawn = Some(map);
            }
            EventPayload::WinnerAnnounced { winner } => winner_event = Some(winner.clone()),
            _ => {}
        }
    }

    let Some(drawn) = drawn else {
        // Aborted runs publish no winner; nothing to dispute unless one
        // was claimed anyway.
        return Ok(if t.winner_hex.is_some() || winner_event.is_some() {
            vec![TranscriptVerdict::WinnerMismatch]
        } else {
            vec![TranscriptVerdict::Ok]
        });
    };

    let mut verdicts = Vec::new();
    let winner = match &t.winner_hex {
        Some(hex) => parse_tid(width, hex).ok(),
        None => None,
    };
    let in_draw: Vec<(usize, Commitment)> = drawn
        .keys()
        .filter_map(|p| commitments.get(p).map(|c| (*p, c.clone())))
        .collect();
    let announcements: Vec<(usize, BitString)> = drawn
        .keys()
        .filter_map(|p| announced.get(p).map(|a| (*p, a.clone())))
        .collect();
    match &winner {
        Some(w) => match verify_outcome(&announcements, &in_draw, w) {
            Verdict::Ok => {}
            Verdict::CommitmentMismatch { participant } => {
                verdicts.push(TranscriptVerdict::CommitmentMismatch { participant })
            }
            Verdict::MissingAnnouncement { participant } => {
                verdicts.push(TranscriptVerdict::MissingAnnouncement { participant })
            }
            Verdict::WinnerMismatch => verdicts.push(TranscriptVerdict::WinnerMismatch),
        },
        None => verdicts.push(TranscriptVerdict::WinnerMismatch),
    }
    for p in drawn.keys() {
        if !commitments.contains_key(p) {
            verdicts.push(TranscriptVerdict::MissingAnnouncement { participant: *p });
        }
    }

    // The authorities' own draw inputs must open the commitments too.
    for (p, tid) in &drawn {
        if let Some(c) = commitments.get(p) {
            if !c.opens_to(tid) {
                verdicts.push(TranscriptVerdict::AuthorityTamper { participant: *p });
            }
        }
    }
    let draw_xor = xor_fold(drawn.values()).ok();
    if winner.is_none()
        || draw_xor != winner
        || winner_event.as_deref() != t.winner_hex.as_deref()
    {
        verdicts.push(TranscriptVerdict::WinnerMismatch);
    }

    let mut seen = Vec::new();
    verdicts.retain(|v| {
        if seen.contains(v) {
            false
        } else {
            seen.push(v.clone());
            true
        }
    });
    if verdicts.is_empty() {
        verdicts.push(TranscriptVerdict::Ok);
    }
    Ok(verdicts)
}

/// Structural properties every transcript must satisfy. Returns one message
/// per violation; empty means the transcript is well formed.
pub fn check_invariants(t: &Transcript) -> Vec<String> {
    let mut problems = Vec::new();
    let mut last_phase = Phase::Registration;
    let mut ticketing_closed = false;
    let mut credentials: BTreeMap<usize, bool> = BTreeMap::new();
    let mut authenticated: BTreeMap<usize, bool> = BTreeMap::new();
    let mut committed = BTreeSet::new();
    let mut delivered = BTreeSet::new();
    let mut accepted = BTreeSet::new();

    for (k, event) in t.events.iter().enumerate() {
        if event.index != k {
            problems.push(format!("event {k} carries index {}", event.index));
        }
        if event.phase < last_phase {
            problems.push(format!("event {k} goes back to {}", event.phase));
        }
        last_phase = event.phase;
        match &event.payload {
            EventPayload::PhaseClosed {
                phase: Phase::Ticketing,
            } => ticketing_closed = true,
            EventPayload::CredentialsChecked {
                participant,
                accepted,
            } => {
                credentials.insert(*participant, *accepted);
            }
            EventPayload::Authentication {
                participant,
                accepted,
                ..
            } => {
                let entry = authenticated.entry(*participant).or_insert(true);
                *entry &= *accepted;
            }
            EventPayload::TidCommitted { participant, .. } => {
                committed.insert(*participant);
            }
            EventPayload::TidDelivered { participant, .. }
            | EventPayload::TidEncoded { participant, .. } => {
                if !committed.contains(participant) {
                    problems.push(format!("P{participant} delivered before committing"));
                }
                delivered.insert(*participant);
            }
            EventPayload::TicketAccepted { participant } => {
                if ticketing_closed {
                    problems.push(format!("P{participant} accepted after ticketing closed"));
                }
                if credentials.get(participant) != Some(&true) {
                    problems.push(format!("P{participant} accepted without credentials"));
                }
                if authenticated.get(participant) != Some(&true) {
                    problems.push(format!("P{participant} accepted without authentication"));
                }
                if !delivered.contains(participant) {
                    problems.push(format!("P{participant} accepted without delivery"));
                }
                if !accepted.insert(*participant) {
                    problems.push(format!("P{participant} accepted twice"));
                }
            }
            EventPayload::TicketsOpened { tickets } => {
                for ticket in tickets {
                    if !accepted.contains(&ticket.participant) {
                        problems.push(format!(
                            "P{} drawn without an accepted ticket",
                            ticket.participant
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    problems
}
