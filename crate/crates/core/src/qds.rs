//! Participant authentication.
//!
//! Two mechanisms are provided:
//!
//! * BB84 eliminated signatures. The participant sends the same random
//!   sequence of BB84 states to both ticketing authorities. Each authority
//!   forwards every element to its peer with probability 1/2 or keeps it, then
//!   measures everything it holds in a random basis. An outcome `v` in basis
//!   `b` proves the participant never sent the orthogonal state, which is
//!   recorded as eliminated. A later classical declaration of the sequence is
//!   checked against those records.
//! * Semi-quantum measure-or-reflect records. `|+⟩` qubits travel
//!   LAR → participant → LAT1 → participant → LAT2; the participant either
//!   passes or Z-measures each one (the same choice on both passes) and both
//!   authorities measure in random bases. On positions the participant claims
//!   to have passed and where the authorities used the same basis, their
//!   outcomes must agree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classical::{ClassicalAction, ClassicalParty};
use crate::qsim::{measure, prepare_bb84, Basis, PureState, QsimError};
use crate::rng::RandomStream;

pub const DEFAULT_SIGNATURE_LENGTH: usize = 2048;
pub const DEFAULT_MISMATCH_THRESHOLD: f64 = 0.05;
pub const DEFAULT_MIN_PASS_FRACTION: f64 = 0.25;
pub const FORWARD_PROBABILITY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdsError {
    #[error("signature length {length} below configured minimum {minimum}")]
    TooShort { length: usize, minimum: usize },
    #[error("declaration length {found} does not match registered length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bb84State {
    Zero,
    One,
    Plus,
    Minus,
}

impl Bb84State {
    pub const ALL: [Bb84State; 4] = [Self::Zero, Self::One, Self::Plus, Self::Minus];

    pub fn new(bit: u8, basis: Basis) -> Self {
        match (basis, bit) {
            (Basis::Diagonal, 0) => Self::Plus,
            (Basis::Diagonal, _) => Self::Minus,
            (_, 0) => Self::Zero,
            (_, _) => Self::One,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Self::Zero | Self::Plus => 0,
            Self::One | Self::Minus => 1,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Self::Zero | Self::One => Basis::Rectilinear,
            Self::Plus | Self::Minus => Basis::Diagonal,
        }
    }

    pub fn orthogonal(self) -> Self {
        Self::new(1 - self.bit(), self.basis())
    }

    pub fn prepare(self) -> PureState {
        prepare_bb84(self.bit(), self.basis()).expect("BB84 basis")
    }

    pub fn random(rng: &mut RandomStream) -> Self {
        Self::ALL[rng.below(4)]
    }
}

pub fn random_basis(rng: &mut RandomStream) -> Basis {
    if rng.bit() {
        Basis::Diagonal
    } else {
        Basis::Rectilinear
    }
}

/// Classical description of the participant's BB84 sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignatureDeclaration {
    pub states: Vec<Bb84State>,
}

impl SignatureDeclaration {
    pub fn random(length: usize, rng: &mut RandomStream) -> Self {
        Self {
            states: (0..length).map(|_| Bb84State::random(rng)).collect(),
        }
    }

    /// Redraws each position uniformly (possibly to the same state) with
    /// probability `fraction`.
    pub fn corrupted(&self, fraction: f64, rng: &mut RandomStream) -> Self {
        Self {
            states: self
                .states
                .iter()
                .map(|&s| {
                    if rng.bernoulli(fraction) {
                        Bb84State::random(rng)
                    } else {
                        s
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordSource {
    DirectFromParticipant,
    ForwardedFromPeer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EliminationRecord {
    pub position: usize,
    pub eliminated: Bb84State,
    pub source: RecordSource,
}

/// What one authority learned from the elements it measured.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminatedSignature {
    pub length: usize,
    pub records: Vec<EliminationRecord>,
}

/// Outcome `value` in `basis` rules out its orthogonal partner.
pub fn eliminated_by(value: u8, basis: Basis) -> Bb84State {
    Bb84State::new(value, basis).orthogonal()
}

#[derive(Clone, Debug)]
pub struct Bb84Registration {
    /// Kept private by the participant until ticketing.
    pub declaration: SignatureDeclaration,
    pub lat1: EliminatedSignature,
    pub lat2: EliminatedSignature,
}

/// Runs signature registration for one participant. `rng` is the
/// participant's registration stream; the authorities' choices come from
/// labeled forks of it.
pub fn register_bb84(
    length: usize,
    min_length: usize,
    rng: &RandomStream,
) -> Result<Bb84Registration, QdsError> {
    if length < min_length || length == 0 {
        return Err(QdsError::TooShort {
            length,
            minimum: min_length.max(1),
        });
    }
    let mut participant = rng.fork("participant");
    let mut lat_rng = [rng.fork("lat1"), rng.fork("lat2")];
    let declaration = SignatureDeclaration::random(length, &mut participant);

    // held[a] = (position, source) pairs authority `a` will measure
    let mut held: [Vec<(usize, RecordSource)>; 2] = [Vec::new(), Vec::new()];
    for position in 0..length {
        for a in 0..2 {
            if lat_rng[a].bernoulli(FORWARD_PROBABILITY) {
                held[1 - a].push((position, RecordSource::ForwardedFromPeer));
            } else {
                held[a].push((position, RecordSource::DirectFromParticipant));
            }
        }
    }

    let mut signatures = Vec::with_capacity(2);
    for (a, items) in held.iter_mut().enumerate() {
        items.sort_by_key(|&(p, s)| (p, s == RecordSource::ForwardedFromPeer));
        let mut records = Vec::with_capacity(items.len());
        for &(position, source) in items.iter() {
            let basis = random_basis(&mut lat_rng[a]);
            let sent = declaration.states[position].prepare();
            let outcome = measure(&sent, 0, basis, &mut lat_rng[a])?;
            records.push(EliminationRecord {
                position,
                eliminated: eliminated_by(outcome.value, basis),
                source,
            });
        }
        signatures.push(EliminatedSignature { length, records });
    }
    let lat2 = signatures.pop().expect("two signatures");
    let lat1 = signatures.pop().expect("two signatures");
    Ok(Bb84Registration {
        declaration,
        lat1,
        lat2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum RejectReason {
    Mismatches { count: usize, checked: usize },
    InsufficientPass { declared_pass_fraction: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision {
    Accept,
    Reject(RejectReason),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuthReport {
    pub decision: Decision,
    pub mismatches: usize,
    pub checked: usize,
}

impl AuthReport {
    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }

    fn from_counts(mismatches: usize, checked: usize, threshold: f64) -> Self {
        let decision = if mismatches as f64 <= threshold * checked as f64 {
            Decision::Accept
        } else {
            Decision::Reject(RejectReason::Mismatches {
                count: mismatches,
                checked,
            })
        };
        Self {
            decision,
            mismatches,
            checked,
        }
    }
}

/// One authority's check of a declaration against its eliminated signature.
pub fn verify_declaration(
    sig: &EliminatedSignature,
    decl: &SignatureDeclaration,
    threshold_fraction: f64,
) -> Result<AuthReport, QdsError> {
    if decl.len() != sig.length {
        return Err(QdsError::LengthMismatch {
            expected: sig.length,
            found: decl.len(),
        });
    }
    let mismatches = sig
        .records
        .iter()
        .filter(|r| decl.states[r.position] == r.eliminated)
        .count();
    Ok(AuthReport::from_counts(
        mismatches,
        sig.records.len(),
        threshold_fraction,
    ))
}

/// Both authorities must accept.
pub fn verify_bb84(
    reg_lat1: &EliminatedSignature,
    reg_lat2: &EliminatedSignature,
    decl: &SignatureDeclaration,
    threshold_fraction: f64,
) -> Result<(AuthReport, AuthReport), QdsError> {
    Ok((
        verify_declaration(reg_lat1, decl, threshold_fraction)?,
        verify_declaration(reg_lat2, decl, threshold_fraction)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SemiQuantumPosition {
    /// The participant's true action; never shown to the authorities.
    pub participant_action: ClassicalAction,
    pub lat1_basis: Basis,
    pub lat2_basis: Basis,
    pub lat1_outcome: u8,
    pub lat2_outcome: u8,
    pub kept: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemiQuantumRecord {
    pub positions: Vec<SemiQuantumPosition>,
}

impl SemiQuantumRecord {
    pub fn actions(&self) -> Vec<ClassicalAction> {
        self.positions.iter().map(|p| p.participant_action).collect()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn random_actions(n: usize, rng: &mut RandomStream) -> Vec<ClassicalAction> {
    (0..n)
        .map(|_| {
            if rng.bit() {
                ClassicalAction::MeasureZ
            } else {
                ClassicalAction::Pass
            }
        })
        .collect()
}

/// Simulates the `|+⟩` round trip for `n` qubits.
pub fn register_semiquantum(
    n: usize,
    min_length: usize,
    rng: &RandomStream,
) -> Result<SemiQuantumRecord, QdsError> {
    if n < min_length || n == 0 {
        return Err(QdsError::TooShort {
            length: n,
            minimum: min_length.max(1),
        });
    }
    let mut participant_rng = rng.fork("participant");
    let mut lat1 = rng.fork("lat1");
    let mut lat2 = rng.fork("lat2");
    let party = ClassicalParty;
    let actions = random_actions(n, &mut participant_rng);
    let mut positions = Vec::with_capacity(n);
    for action in actions {
        let qubit = prepare_bb84(0, Basis::Diagonal)?;
        let (_, qubit) = party.act(action, qubit, &mut participant_rng)?;
        let lat1_basis = random_basis(&mut lat1);
        let m1 = measure(&qubit, 0, lat1_basis, &mut lat1)?;
        let (_, qubit) = party.act(action, m1.post_state, &mut participant_rng)?;
        let lat2_basis = random_basis(&mut lat2);
        let m2 = measure(&qubit, 0, lat2_basis, &mut lat2)?;
        positions.push(SemiQuantumPosition {
            participant_action: action,
            lat1_basis,
            lat2_basis,
            lat1_outcome: m1.value,
            lat2_outcome: m2.value,
            kept: lat1_basis == lat2_basis,
        });
    }
    Ok(SemiQuantumRecord { positions })
}

/// Joint check by LAT1 and LAT2 of the participant's declared actions.
pub fn verify_semiquantum(
    record: &SemiQuantumRecord,
    declared: &[ClassicalAction],
    threshold_fraction: f64,
    min_pass_fraction: f64,
) -> Result<AuthReport, QdsError> {
    if declared.len() != record.len() {
        return Err(QdsError::LengthMismatch {
            expected: record.len(),
            found: declared.len(),
        });
    }
    let declared_pass = declared
        .iter()
        .filter(|&&a| a == ClassicalAction::Pass)
        .count();
    let pass_fraction = declared_pass as f64 / declared.len().max(1) as f64;
    let (mut checked, mut mismatches) = (0, 0);
    for (p, &a) in record.positions.iter().zip(declared) {
        if p.kept && a == ClassicalAction::Pass {
            checked += 1;
            if p.lat1_outcome != p.lat2_outcome {
                mismatches += 1;
            }
        }
    }
    if pass_fraction < min_pass_fraction || checked == 0 {
        return Ok(AuthReport {
            decision: Decision::Reject(RejectReason::InsufficientPass {
                declared_pass_fraction: pass_fraction,
            }),
            mismatches,
            checked,
        });
    }
    Ok(AuthReport::from_counts(
        mismatches,
        checked,
        threshold_fraction,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_measured_in_z_eliminates_one() {
        let mut rng = RandomStream::new(0, "t");
        let out = measure(&Bb84State::Zero.prepare(), 0, Basis::Rectilinear, &mut rng).unwrap();
        assert_eq!(out.value, 0);
        assert_eq!(eliminated_by(out.value, Basis::Rectilinear), Bb84State::One);
    }

    #[test]
    fn elimination_never_rules_out_the_sent_state() {
        // Exhaustive over sent state × basis × every reachable outcome.
        let mut rng = RandomStream::new(11, "sound");
        for s in Bb84State::ALL {
            for basis in [Basis::Rectilinear, Basis::Diagonal] {
                let mut seen = [false; 2];
                for _ in 0..200 {
                    let out = measure(&s.prepare(), 0, basis, &mut rng).unwrap();
                    seen[out.value as usize] = true;
                    assert_ne!(eliminated_by(out.value, basis), s);
                }
                if basis == s.basis() {
                    assert_eq!(seen, [s.bit() == 0, s.bit() == 1]);
                } else {
                    assert_eq!(seen, [true, true], "{s:?} in {basis}");
                }
            }
        }
    }

    #[test]
    fn registration_records_every_element_once() {
        let reg = register_bb84(512, 1, &RandomStream::new(3, "P0/qds")).unwrap();
        let mut count = vec![0; 512];
        for r in reg.lat1.records.iter().chain(&reg.lat2.records) {
            count[r.position] += 1;
        }
        // Two copies per position, each measured by exactly one authority.
        assert!(count.iter().all(|&c| c == 2));
        let forwarded = reg
            .lat1
            .records
            .iter()
            .filter(|r| r.source == RecordSource::ForwardedFromPeer)
            .count();
        assert!(forwarded > 180 && forwarded < 330, "forwarded = {forwarded}");
    }

    #[test]
    fn honest_declaration_accepted_with_zero_mismatches() {
        for seed in 0..50 {
            let reg = register_bb84(256, 1, &RandomStream::new(seed, "P/qds")).unwrap();
            let (a, b) = verify_bb84(&reg.lat1, &reg.lat2, &reg.declaration, 0.0).unwrap();
            assert!(a.accepted() && b.accepted());
            assert_eq!((a.mismatches, b.mismatches), (0, 0));
        }
    }

    #[test]
    fn short_signature_and_length_mismatch_rejected() {
        let rng = RandomStream::new(3, "x");
        assert!(matches!(
            register_bb84(100, DEFAULT_SIGNATURE_LENGTH, &rng),
            Err(QdsError::TooShort { .. })
        ));
        let reg = register_bb84(64, 1, &rng).unwrap();
        let short = SignatureDeclaration {
            states: reg.declaration.states[..63].to_vec(),
        };
        assert!(matches!(
            verify_declaration(&reg.lat1, &short, 0.05),
            Err(QdsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn random_forgery_is_rejected() {
        let reg = register_bb84(256, 1, &RandomStream::new(8, "P/qds")).unwrap();
        let forged = SignatureDeclaration::random(256, &mut RandomStream::new(8, "forger"));
        let (a, b) = verify_bb84(&reg.lat1, &reg.lat2, &forged, 0.05).unwrap();
        assert!(!a.accepted() || !b.accepted());
        assert!(matches!(a.decision, Decision::Reject(RejectReason::Mismatches { .. })));
    }

    #[test]
    fn semiquantum_pass_positions_with_equal_bases_match() {
        for seed in 0..20 {
            let rec = register_semiquantum(64, 1, &RandomStream::new(seed, "P/sq")).unwrap();
            for p in &rec.positions {
                assert_eq!(p.kept, p.lat1_basis == p.lat2_basis);
                if p.participant_action == ClassicalAction::Pass && p.kept {
                    assert_eq!(p.lat1_outcome, p.lat2_outcome);
                }
                if p.participant_action == ClassicalAction::Pass
                    && p.lat1_basis == Basis::Diagonal
                {
                    // |+⟩ read in X the first time is always +.
                    assert_eq!(p.lat1_outcome, 0);
                }
            }
            let report = verify_semiquantum(&rec, &rec.actions(), 0.0, 0.25).unwrap();
            assert!(report.accepted());
            assert_eq!(report.mismatches, 0);
        }
    }

    #[test]
    fn all_measure_declaration_hits_pass_guard() {
        let rec = register_semiquantum(256, 1, &RandomStream::new(1, "P/sq")).unwrap();
        let declared = vec![ClassicalAction::MeasureZ; 256];
        let report = verify_semiquantum(&rec, &declared, 0.05, 0.25).unwrap();
        assert!(matches!(
            report.decision,
            Decision::Reject(RejectReason::InsufficientPass { .. })
        ));
        assert!(verify_semiquantum(&rec, &declared[..10], 0.05, 0.25).is_err());
    }
}
