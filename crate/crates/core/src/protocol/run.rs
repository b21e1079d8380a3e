//! One complete lottery run.
//!
//! Random streams are forked from a single root by role and purpose, so a
//! (config, seed) pair always replays the same transcript.

use std::collections::{BTreeMap, HashSet};

use super::audit::verify_transcript;
use super::phase::{Admission, Phase, PhaseBarrier};
use super::transcript::{
    ConfigEcho, EventPayload, OpenedTicket, RewardRow, SessionKind, Transcript,
};
use super::ProtocolError;
use crate::bits::BitString;
use crate::classical::ClassicalAction;
use crate::config::{AdversaryConfig, RunConfig, Scheme};
use crate::keylink::entangled::{self, BellSession, CheckOutcome, CheckParams};
use crate::keylink::qkd::{QkdAbort, QkdOutcome, QkdParams};
use crate::keylink::{
    self, Authority, CooperationGate, EncryptedTid, Interception, MAX_ENUMERATION_WIDTH,
};
use crate::qds::{self, AuthReport, Bb84Registration, Decision, RejectReason, SemiQuantumRecord};
use crate::rng::{unique_id, RandomStream};
use crate::tickets::{compute_rewards, hash_commit, xor_fold, Commitment};

const AUTHORITIES: [Authority; 2] = [Authority::Lat1, Authority::Lat2];

enum Signature {
    Bb84(Bb84Registration),
    SemiQuantum(SemiQuantumRecord),
}

/// How the authorities will recover the TID in the rewards phase.
enum Delivery {
    Split {
        encrypted: EncryptedTid,
        /// Keys as held by LAT1 and LAT2.
        keys: [BitString; 2],
    },
    Entangled {
        session: BellSession,
        announcements: Vec<entangled::Announcement>,
    },
}

struct ParticipantRecord {
    stream: RandomStream,
    pid: Option<BitString>,
    signature: Option<Signature>,
    authenticated: bool,
    tid: Option<BitString>,
    commitment: Option<Commitment>,
    delivery: Option<Delivery>,
    accepted: bool,
}

struct Run<'a> {
    config: &'a RunConfig,
    root: RandomStream,
    transcript: Transcript,
    barrier: PhaseBarrier,
    participants: Vec<ParticipantRecord>,
}

pub fn run_lottery(config: &RunConfig, seed: u64) -> Result<Transcript, ProtocolError> {
    run_lottery_with_source(config, seed, "explicit")
}

/// As [`run_lottery`], recording where the seed came from in the echo.
pub fn run_lottery_with_source(
    config: &RunConfig,
    seed: u64,
    seed_source: &str,
) -> Result<Transcript, ProtocolError> {
    config.validate()?;
    for p in config.adversary.targets() {
        if p >= config.participants {
            return Err(ProtocolError::UnknownTarget(p));
        }
    }
    let root = RandomStream::new(seed, "lottery");
    let participants = (0..config.participants)
        .map(|i| ParticipantRecord {
            stream: root.fork(format!("P{i}")),
            pid: None,
            signature: None,
            authenticated: false,
            tid: None,
            commitment: None,
            delivery: None,
            accepted: false,
        })
        .collect();
    let mut run = Run {
        config,
        root,
        transcript: Transcript::new(ConfigEcho {
            seed,
            seed_source: seed_source.into(),
            non_secure: config.non_secure(),
            config: config.clone(),
        }),
        barrier: PhaseBarrier::new(),
        participants,
    };
    run.registration()?;
    run.ticketing()?;
    run.rewards()?;
    Ok(run.transcript)
}

fn role(i: usize) -> String {
    format!("P{i}")
}

fn reject_text(report: &AuthReport) -> Option<String> {
    match report.decision {
        Decision::Accept => None,
        Decision::Reject(RejectReason::Mismatches { count, checked }) => {
            Some(format!("{count} mismatches in {checked} checked positions"))
        }
        Decision::Reject(RejectReason::InsufficientPass {
            declared_pass_fraction,
        }) => Some(format!(
            "declared pass fraction {declared_pass_fraction:.4} too low"
        )),
    }
}

impl Run<'_> {
    fn open(&mut self, phase: Phase) -> Result<(), ProtocolError> {
        self.barrier.open(phase)?;
        self.transcript.public(phase, EventPayload::PhaseOpened { phase });
        Ok(())
    }

    fn close(&mut self, phase: Phase) -> Result<(), ProtocolError> {
        self.barrier.close(phase)?;
        self.transcript.public(phase, EventPayload::PhaseClosed { phase });
        Ok(())
    }

    fn exclude(&mut self, phase: Phase, participant: usize, reason: String) {
        self.transcript.public(
            phase,
            EventPayload::ParticipantExcluded {
                participant,
                reason,
            },
        );
    }

    fn adversary_note(&mut self, phase: Phase, description: String) {
        self.transcript
            .private(phase, "ADV", EventPayload::AdversaryAction { description });
    }

    /// The attacker on `participant`'s link with `authority`, if any.
    fn interception(&self, participant: usize, authority: Authority) -> Option<Interception> {
        match self.config.adversary {
            AdversaryConfig::InterceptResend {
                participant: target,
                link,
                fraction,
                basis,
            } if target.is_none_or(|t| t == participant) && link.covers(authority) => {
                Some(Interception { fraction, basis })
            }
            _ => None,
        }
    }

    fn registration(&mut self) -> Result<(), ProtocolError> {
        let phase = Phase::Registration;
        self.open(phase)?;
        let widths = &self.config.widths;
        let mut pid_stream = self.root.fork("LAR/pid");
        let mut issued = HashSet::new();
        for i in 0..self.participants.len() {
            let ok = !self.config.rejected_credentials.contains(&i);
            self.transcript.public(
                phase,
                EventPayload::CredentialsChecked {
                    participant: i,
                    accepted: ok,
                },
            );
            if !ok {
                self.exclude(phase, i, "credentials rejected by LAR".into());
                continue;
            }
            let pid = unique_id(&mut pid_stream, &issued, widths.pid)?;
            issued.insert(pid.clone());
            self.transcript.private(
                phase,
                format!("LAR,{}", role(i)),
                EventPayload::PidIssued {
                    participant: i,
                    pid: pid.to_hex(),
                },
            );
            let stream = self.participants[i].stream.fork("registration");
            let signature = match self.config.scheme {
                Scheme::Bb84 | Scheme::Entangled => Signature::Bb84(qds::register_bb84(
                    widths.signature_length,
                    widths.min_signature_length,
                    &stream,
                )?),
                Scheme::SemiQuantum => Signature::SemiQuantum(qds::register_semiquantum(
                    widths.signature_length,
                    widths.min_signature_length,
                    &stream,
                )?),
            };
            let (lat1_records, lat2_records) = match &signature {
                Signature::Bb84(r) => (r.lat1.records.len(), r.lat2.records.len()),
                Signature::SemiQuantum(r) => {
                    let kept = r.positions.iter().filter(|p| p.kept).count();
                    (kept, kept)
                }
            };
            self.transcript.private(
                phase,
                format!("{},LAT1,LAT2", role(i)),
                EventPayload::SignatureRegistered {
                    participant: i,
                    positions: widths.signature_length,
                    lat1_records,
                    lat2_records,
                },
            );
            let p = &mut self.participants[i];
            p.pid = Some(pid);
            p.signature = Some(signature);
        }
        self.close(phase)
    }

    fn ticketing(&mut self) -> Result<(), ProtocolError> {
        let phase = Phase::Ticketing;
        self.open(phase)?;
        for i in 0..self.participants.len() {
            if self.participants[i].pid.is_none() {
                continue;
            }
            if !self.authenticate(i)? {
                continue;
            }
            self.participants[i].authenticated = true;
            self.issue_ticket(i)?;
        }
        self.close(phase)?;

        if let AdversaryConfig::LateTicket { participant } = self.config.adversary {
            let late = self.participants[participant]
                .stream
                .fork("late-tid")
                .bits(self.config.widths.tid)?;
            self.adversary_note(
                phase,
                format!("P{participant} submits TID {} after close", late.to_hex()),
            );
            let reason = match self.barrier.submit_ticket(participant)? {
                Admission::Late => "submitted after ticketing closed",
                Admission::Duplicate => "participant already holds a ticket",
                Admission::Accepted => unreachable!("barrier is closed"),
            };
            self.transcript.public(
                phase,
                EventPayload::TicketRejected {
                    participant,
                    reason: reason.into(),
                },
            );
        }
        Ok(())
    }

    /// Declaration check by LAT1 and LAT2; both must accept.
    fn authenticate(&mut self, i: usize) -> Result<bool, ProtocolError> {
        let phase = Phase::Ticketing;
        let thresholds = &self.config.thresholds;
        let forged = matches!(
            self.config.adversary,
            AdversaryConfig::ForgeDeclaration { participant } if participant == i
        );
        let mut forger = self.participants[i].stream.fork("forger");
        if forged {
            self.adversary_note(phase, format!("impersonator reveals a random declaration for P{i}"));
        }
        let reports: Vec<(Option<Authority>, AuthReport)> =
            match self.participants[i].signature.as_ref().expect("registered") {
                Signature::Bb84(reg) => {
                    let decl = if forged {
                        qds::SignatureDeclaration::random(reg.declaration.len(), &mut forger)
                    } else {
                        reg.declaration.clone()
                    };
                    let (r1, r2) =
                        qds::verify_bb84(&reg.lat1, &reg.lat2, &decl, thresholds.signature_mismatch)?;
                    vec![(Some(Authority::Lat1), r1), (Some(Authority::Lat2), r2)]
                }
                Signature::SemiQuantum(record) => {
                    let declared: Vec<ClassicalAction> = if forged {
                        qds::random_actions(record.len(), &mut forger)
                    } else {
                        record.actions()
                    };
                    let r = qds::verify_semiquantum(
                        record,
                        &declared,
                        thresholds.signature_mismatch,
                        thresholds.min_pass_fraction,
                    )?;
                    vec![(None, r)]
                }
            };
        let mut all = true;
        for (authority, report) in reports {
            all &= report.accepted();
            self.transcript.public(
                phase,
                EventPayload::Authentication {
                    participant: i,
                    authority,
                    accepted: report.accepted(),
                    mismatches: report.mismatches,
                    checked: report.checked,
                    reason: reject_text(&report),
                },
            );
        }
        if !all {
            self.exclude(phase, i, "authentication failed".into());
        }
        Ok(all)
    }

    fn draw_tid(&self, i: usize) -> Result<BitString, ProtocolError> {
        let width = self.config.widths.tid;
        if let AdversaryConfig::FixedTids { tids } = &self.config.adversary {
            if let Some(hex) = tids.get(&i) {
                return Ok(BitString::from_hex(width, hex)?);
            }
        }
        Ok(self.participants[i].stream.fork("tid").bits(width)?)
    }

    fn issue_ticket(&mut self, i: usize) -> Result<(), ProtocolError> {
        let phase = Phase::Ticketing;
        // Key material (or a checked Bell session) comes first; a participant
        // that cannot obtain it never commits.
        let delivery = match self.config.scheme {
            Scheme::Bb84 | Scheme::SemiQuantum => match self.establish_keys(i)? {
                Some(keys) => Some(keys),
                None => return Ok(()),
            },
            Scheme::Entangled => None,
        };
        let session = match self.config.scheme {
            Scheme::Entangled => match self.bell_session(i)? {
                Some(s) => Some(s),
                None => return Ok(()),
            },
            _ => None,
        };

        let tid = self.draw_tid(i)?;
        if matches!(self.config.adversary, AdversaryConfig::FixedTids { ref tids } if tids.contains_key(&i))
        {
            self.adversary_note(phase, format!("P{i} uses fixed TID {}", tid.to_hex()));
        }
        let commitment = hash_commit(&tid);
        self.transcript.public(
            phase,
            EventPayload::TidCommitted {
                participant: i,
                digest: commitment.to_hex(),
            },
        );
        let pid = self.participants[i].pid.clone().expect("registered");
        let delivery = match (delivery, session) {
            (Some((participant_keys, authority_keys)), _) => {
                if participant_keys[0] == participant_keys[1] {
                    self.transcript.public(
                        phase,
                        EventPayload::Warning {
                            participant: Some(i),
                            message: "K1 equals K2; ciphertext equals the TID".into(),
                        },
                    );
                }
                let encrypted =
                    keylink::split_deliver(&tid, &participant_keys[0], &participant_keys[1], &pid)?;
                self.transcript.public(
                    phase,
                    EventPayload::TidDelivered {
                        participant: i,
                        pid: pid.to_hex(),
                        ciphertext: encrypted.ciphertext.to_hex(),
                    },
                );
                Delivery::Split {
                    encrypted,
                    keys: authority_keys,
                }
            }
            (None, Some(mut session)) => {
                let mut rng = self.participants[i].stream.fork("encode");
                let announcements = entangled::ent_encode_tid(&mut session, &tid, &mut rng)?;
                self.transcript.public(
                    phase,
                    EventPayload::TidEncoded {
                        participant: i,
                        announcements: announcements.clone(),
                    },
                );
                Delivery::Entangled {
                    session,
                    announcements,
                }
            }
            (None, None) => unreachable!("every scheme yields keys or a session"),
        };
        match self.barrier.submit_ticket(i)? {
            Admission::Accepted => {
                self.transcript
                    .public(phase, EventPayload::TicketAccepted { participant: i });
                let p = &mut self.participants[i];
                p.tid = Some(tid);
                p.commitment = Some(commitment);
                p.delivery = Some(delivery);
                p.accepted = true;
            }
            other => {
                self.transcript.public(
                    phase,
                    EventPayload::TicketRejected {
                        participant: i,
                        reason: format!("{other:?}").to_lowercase(),
                    },
                );
            }
        }
        Ok(())
    }

    /// QKD with each authority, retrying aborted sessions. Returns
    /// (participant's keys, authorities' keys), indexed LAT1 then LAT2.
    #[allow(clippy::type_complexity)]
    fn establish_keys(
        &mut self,
        i: usize,
    ) -> Result<Option<([BitString; 2], [BitString; 2])>, ProtocolError> {
        let phase = Phase::Ticketing;
        let widths = &self.config.widths;
        let (kind, raw_length) = match self.config.scheme {
            Scheme::SemiQuantum => (SessionKind::SemiQuantumQkd, widths.semiquantum_raw),
            _ => (SessionKind::Bb84Qkd, widths.qkd_raw),
        };
        let params = QkdParams {
            raw_length,
            key_length: widths.tid,
            sample_size: widths.qkd_sample,
            abort_threshold: self.config.thresholds.qber_abort,
        };
        let mut participant_keys = Vec::with_capacity(2);
        let mut authority_keys = Vec::with_capacity(2);
        for authority in AUTHORITIES {
            let eve = self.interception(i, authority);
            let mut last_reason = String::new();
            let mut established = None;
            for attempt in 0..=self.config.retries {
                let rng = self.participants[i]
                    .stream
                    .fork(format!("qkd/{authority}/{attempt}"));
                let outcome = match kind {
                    SessionKind::Bb84Qkd => keylink::bb84_qkd(&params, eve.as_ref(), &rng)?,
                    SessionKind::SemiQuantumQkd => {
                        keylink::semiquantum_qkd(&params, eve.as_ref(), &rng)?
                    }
                };
                let sample = outcome.sample();
                let control = outcome.control();
                let abort_reason = match &outcome {
                    QkdOutcome::Established { .. } => None,
                    QkdOutcome::Aborted {
                        reason: QkdAbort::Qber { estimate },
                        ..
                    } => Some(format!("error rate {estimate:.4} above threshold")),
                    QkdOutcome::Aborted {
                        reason: QkdAbort::Insufficient { sifted, required },
                        ..
                    } => Some(format!("{sifted} sifted bits, {required} required")),
                };
                self.transcript.public(
                    phase,
                    EventPayload::KeySession {
                        participant: i,
                        authority,
                        kind: kind.clone(),
                        attempt,
                        established: outcome.is_established(),
                        qber: outcome.qber_estimate(),
                        sample_errors: sample.errors,
                        sample_checked: sample.checked,
                        control_errors: control.map(|c| c.errors),
                        control_checked: control.map(|c| c.checked),
                        abort_reason: abort_reason.clone(),
                    },
                );
                if let QkdOutcome::Established {
                    sender, receiver, ..
                } = outcome
                {
                    // BB84: the participant sends. Semi-quantum: the
                    // authority is the quantum sender.
                    established = Some(match kind {
                        SessionKind::Bb84Qkd => (sender.bits, receiver.bits),
                        SessionKind::SemiQuantumQkd => (receiver.bits, sender.bits),
                    });
                    break;
                }
                last_reason = abort_reason.unwrap_or_default();
            }
            match established {
                Some((mine, theirs)) => {
                    participant_keys.push(mine);
                    authority_keys.push(theirs);
                }
                None => {
                    self.exclude(
                        phase,
                        i,
                        format!("QKD with {authority} aborted: {last_reason}"),
                    );
                    return Ok(None);
                }
            }
        }
        let to_pair = |v: Vec<BitString>| -> [BitString; 2] { v.try_into().expect("two keys") };
        Ok(Some((to_pair(participant_keys), to_pair(authority_keys))))
    }

    fn bell_session(&mut self, i: usize) -> Result<Option<BellSession>, ProtocolError> {
        let phase = Phase::Ticketing;
        let params = CheckParams {
            threshold: self.config.thresholds.anti_correlation,
            ..CheckParams::default()
        };
        let eve = [
            self.interception(i, Authority::Lat1),
            self.interception(i, Authority::Lat2),
        ];
        let mut worst = 0.0;
        for attempt in 0..=self.config.retries {
            let rng = self.participants[i].stream.fork(format!("bell/{attempt}"));
            let outcome = entangled::bell_distribute_and_check(
                self.config.widths.bell_pairs(),
                &params,
                [eve[0].as_ref(), eve[1].as_ref()],
                &rng,
            )?;
            let report = outcome.report();
            self.transcript.public(
                phase,
                EventPayload::EavesdropCheck {
                    participant: i,
                    attempt,
                    set1_violations: report.sets[0].errors,
                    set1_checked: report.sets[0].checked,
                    set2_violations: report.sets[1].errors,
                    set2_checked: report.sets[1].checked,
                    proceed: matches!(outcome, CheckOutcome::Proceed { .. }),
                },
            );
            match outcome {
                CheckOutcome::Proceed { session, .. } => return Ok(Some(session)),
                CheckOutcome::Abort { report } => worst = report.worst_rate(),
            }
        }
        self.exclude(
            phase,
            i,
            format!("anti-correlation violation: rate {worst:.4} above threshold"),
        );
        Ok(None)
    }

    fn single_authority_attempt(&mut self, authority: Authority) {
        let phase = Phase::Rewards;
        self.adversary_note(phase, format!("{authority} tries to open tickets alone"));
        let err = CooperationGate::convene(authority, authority).expect_err("same authority");
        self.transcript.public(
            phase,
            EventPayload::CooperationDenied {
                authority,
                message: err.to_string(),
            },
        );
        let slot = match authority {
            Authority::Lat1 => 0,
            Authority::Lat2 => 1,
        };
        let mut diagnostics = Vec::new();
        for (i, p) in self.participants.iter().enumerate() {
            if let Some(Delivery::Split { encrypted, keys }) = &p.delivery {
                if encrypted.width() <= MAX_ENUMERATION_WIDTH {
                    if let Ok(counts) = keylink::one_key_posterior(encrypted, &keys[slot]) {
                        diagnostics.push(EventPayload::PosteriorDiagnostic {
                            participant: i,
                            authority,
                            candidates: counts.len(),
                            min_count: counts.iter().copied().min().unwrap_or(0),
                            max_count: counts.iter().copied().max().unwrap_or(0),
                        });
                    }
                }
            }
        }
        for d in diagnostics {
            self.transcript.private(phase, authority.to_string(), d);
        }
    }

    fn rewards(&mut self) -> Result<(), ProtocolError> {
        let phase = Phase::Rewards;
        self.open(phase)?;
        if let AdversaryConfig::SingleAuthorityOpen { authority } = self.config.adversary {
            self.single_authority_attempt(authority);
        }

        let gate = CooperationGate::convene(Authority::Lat1, Authority::Lat2)?;
        let mut opened: BTreeMap<usize, BitString> = BTreeMap::new();
        for i in 0..self.participants.len() {
            if !self.participants[i].accepted {
                continue;
            }
            let mut decode_rng = self.root.fork(format!("LA/decode/P{i}"));
            let tid = match self.participants[i].delivery.as_mut().expect("accepted") {
                Delivery::Split { encrypted, keys } => keylink::open(encrypted, &keys[0], &keys[1], &gate)?,
                Delivery::Entangled {
                    session,
                    announcements,
                } => entangled::ent_decode_tid(session, announcements, &gate, &mut decode_rng)?,
            };
            self.transcript.private(
                phase,
                "LA",
                EventPayload::TidOpened {
                    participant: i,
                    tid: tid.to_hex(),
                },
            );
            let commitment = self.participants[i].commitment.as_ref().expect("accepted");
            if !commitment.opens_to(&tid) {
                self.transcript.public(
                    phase,
                    EventPayload::TicketRejected {
                        participant: i,
                        reason: "delivered TID does not open the commitment".into(),
                    },
                );
                continue;
            }
            opened.insert(i, tid);
        }

        if let AdversaryConfig::CorruptAuthority {
            authority,
            participant,
        } = self.config.adversary
        {
            if let Some(tid) = opened.get_mut(&participant) {
                *tid = tid.with_flipped(0);
                self.adversary_note(
                    phase,
                    format!("{authority} alters the opened TID of P{participant}"),
                );
            }
        }

        if opened.is_empty() {
            let mut reasons: Vec<String> = self
                .transcript
                .payloads()
                .filter_map(|p| match p {
                    EventPayload::ParticipantExcluded {
                        participant,
                        reason,
                    } => Some(format!("P{participant}: {reason}")),
                    EventPayload::TicketRejected {
                        participant,
                        reason,
                    } => Some(format!("P{participant}: {reason}")),
                    _ => None,
                })
                .collect();
            reasons.dedup();
            let reason = if reasons.is_empty() {
                "no valid tickets".to_string()
            } else {
                format!("no valid tickets ({})", reasons.join("; "))
            };
            self.transcript
                .public(phase, EventPayload::RunAborted { reason });
            self.close(phase)?;
            self.transcript.verdicts = verify_transcript(&self.transcript)?;
            return Ok(());
        }

        let winner = xor_fold(opened.values())?;
        self.transcript.public(
            phase,
            EventPayload::WinnerAnnounced {
                winner: winner.to_hex(),
            },
        );
        self.transcript.public(
            phase,
            EventPayload::TicketsOpened {
                tickets: opened
                    .iter()
                    .map(|(&participant, t)| OpenedTicket {
                        participant,
                        tid: t.to_hex(),
                    })
                    .collect(),
            },
        );
        for &i in opened.keys() {
            let mut tid = self.participants[i].tid.clone().expect("accepted");
            if matches!(self.config.adversary, AdversaryConfig::PostHocTidSwap { participant } if participant == i)
            {
                tid = tid.with_flipped(tid.width() - 1);
                self.adversary_note(phase, format!("P{i} announces a swapped TID"));
            }
            self.transcript.public(
                phase,
                EventPayload::TidAnnounced {
                    participant: i,
                    tid: tid.to_hex(),
                },
            );
        }

        let tickets: Vec<(usize, BitString)> = opened.into_iter().collect();
        let table = compute_rewards(&tickets, &winner, self.config.rewards)?;
        if let Some(flag) = table.flag {
            self.transcript.public(
                phase,
                EventPayload::Warning {
                    participant: None,
                    message: format!("reward table flagged: {flag:?}"),
                },
            );
        }
        self.transcript.rewards = table
            .entries
            .iter()
            .map(|e| RewardRow {
                participant: e.participant,
                tid: e.tid.to_hex(),
                distance: e.distance,
                share: format!("{}/{}", e.share.numer(), e.share.denom()),
                share_decimal: format!("{:.6}", *e.share.numer() as f64 / *e.share.denom() as f64),
            })
            .collect();
        self.transcript.winner_hex = Some(winner.to_hex());
        self.close(phase)?;
        self.transcript.verdicts = verify_transcript(&self.transcript)?;
        Ok(())
    }
}
