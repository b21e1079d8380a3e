//! TID transfer by entanglement swapping.
//!
//! The participant prepares two sets of `ψ⁻` pairs, keeping the first qubit
//! of every pair and sending the second qubits of Set I to LAT1 and of Set II
//! to LAT2. Half of each set is sacrificed for an anti-correlation check in
//! random Z/X bases. Each remaining block (one pair from each set, register
//! order `p₁ l₁ p₂ l₂`) carries two bits: the participant applies `U_k` to one
//! of their two qubits, Bell-measures `(p₁, p₂)` and announces the carrier and
//! outcome. Swapping leaves `(l₁, l₂)` in a Bell state that only a joint
//! measurement by both authorities can read; the pair of outcomes determines
//! `k` through [`SwapTable`].

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{CooperationGate, ErrorCount, Interception, KeylinkError};
use crate::bits::BitString;
use crate::qds::random_basis;
use crate::qsim::{
    apply_pauli, bell_measure, bell_project, identify_bell, measure, prepare_bell, BellState,
    PauliCode, PureState,
};
use crate::rng::RandomStream;

pub const DEFAULT_CHECK_FRACTION: f64 = 0.5;
pub const DEFAULT_VIOLATION_THRESHOLD: f64 = 0.05;

/// Which of the participant's two qubits receives `U_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Carrier {
    Set1,
    Set2,
}

impl Carrier {
    fn register_qubit(self) -> usize {
        match self {
            Carrier::Set1 => 0,
            Carrier::Set2 => 2,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Decode table: `(carrier, participant outcome, authority outcome) → k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapTable {
    table: [[[Option<u8>; 4]; 4]; 2],
}

impl SwapTable {
    /// Enumerates every code, carrier and participant outcome on `ψ⁻ ⊗ ψ⁻`
    /// and records the Bell state left on the authorities' qubits.
    pub fn build() -> Result<Self, KeylinkError> {
        let pair = prepare_bell(BellState::PsiMinus);
        let base = pair.tensor(&pair)?;
        let mut table = [[[None; 4]; 4]; 2];
        for carrier in [Carrier::Set1, Carrier::Set2] {
            for code in PauliCode::all() {
                let encoded = apply_pauli(&base, carrier.register_qubit(), code)?;
                for p in BellState::ALL {
                    let proj = bell_project(&encoded, 0, 2, p)?;
                    if proj.probability < 1e-9 {
                        continue;
                    }
                    let residual = proj.residual.as_ref().expect("four-qubit register");
                    let l = identify_bell(residual).ok_or_else(|| {
                        KeylinkError::ProtocolViolation(format!(
                            "residual after outcome {p:?} is not a Bell state"
                        ))
                    })?;
                    let slot = &mut table[carrier.index()][p.index()][l.index()];
                    match slot {
                        Some(existing) if *existing != code.value() => {
                            return Err(KeylinkError::ProtocolViolation(format!(
                                "swap relation not invertible at {carrier:?}/{p:?}/{l:?}"
                            )))
                        }
                        _ => *slot = Some(code.value()),
                    }
                }
            }
        }
        let out = Self { table };
        if !out.is_bijective() {
            return Err(KeylinkError::ProtocolViolation(
                "swap decode table is not a bijection".into(),
            ));
        }
        Ok(out)
    }

    pub fn global() -> &'static SwapTable {
        static TABLE: OnceLock<SwapTable> = OnceLock::new();
        TABLE.get_or_init(|| SwapTable::build().expect("swap table enumeration"))
    }

    pub fn lookup(&self, carrier: Carrier, participant: BellState, authorities: BellState) -> Option<u8> {
        self.table[carrier.index()][participant.index()][authorities.index()]
    }

    /// For every carrier and announced outcome, the authority outcome ↦ k map
    /// covers all four codes.
    pub fn is_bijective(&self) -> bool {
        self.table.iter().flatten().all(|row| {
            let mut seen = [false; 4];
            for k in row.iter().flatten() {
                seen[*k as usize] = true;
            }
            row.iter().all(Option::is_some) && seen.iter().all(|&s| s)
        })
    }

    pub fn carrier_invariant(&self) -> bool {
        self.table[0] == self.table[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    pub check_fraction: f64,
    pub threshold: f64,
    /// Skip the abort decision (diagnostics only).
    pub force_proceed: bool,
}

impl Default for CheckParams {
    fn default() -> Self {
        Self {
            check_fraction: DEFAULT_CHECK_FRACTION,
            threshold: DEFAULT_VIOLATION_THRESHOLD,
            force_proceed: false,
        }
    }
}

/// Anti-correlation violations per set (Set I with LAT1, Set II with LAT2).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub sets: [ErrorCount; 2],
}

impl CheckReport {
    pub fn worst_rate(&self) -> f64 {
        self.sets[0].rate().max(self.sets[1].rate())
    }
}

#[derive(Clone, Debug)]
pub struct BellSession {
    /// `sets[s][i]` is a two-qubit register: participant half, authority half.
    sets: [Vec<PureState>; 2],
    checked: bool,
    residuals: Vec<Option<PureState>>,
    decoded: Vec<bool>,
}

impl BellSession {
    /// Prepares `pairs_per_set` singlets per set and sends the authority
    /// halves over the (possibly attacked) channels.
    pub fn distribute(
        pairs_per_set: usize,
        attack: [Option<&Interception>; 2],
        rng: &RandomStream,
    ) -> Result<Self, KeylinkError> {
        if pairs_per_set == 0 {
            return Err(KeylinkError::InvalidParams("no Bell pairs requested".into()));
        }
        let singlet = prepare_bell(BellState::PsiMinus);
        let mut eve = rng.fork("eve");
        let mut sets: [Vec<PureState>; 2] = [Vec::new(), Vec::new()];
        for (set, channel) in sets.iter_mut().zip(attack) {
            for _ in 0..pairs_per_set {
                let pair = match channel {
                    Some(a) => a.apply(singlet.clone(), 1, &mut eve)?,
                    None => singlet.clone(),
                };
                set.push(pair);
            }
        }
        Ok(Self {
            sets,
            checked: false,
            residuals: Vec::new(),
            decoded: Vec::new(),
        })
    }

    pub fn pairs_per_set(&self) -> usize {
        self.sets[0].len()
    }

    /// Blocks available for encoding (zero before the check).
    pub fn blocks(&self) -> usize {
        if self.checked {
            self.residuals.len()
        } else {
            0
        }
    }
}

#[derive(Clone, Debug)]
pub enum CheckOutcome {
    Proceed { session: BellSession, report: CheckReport },
    Abort { report: CheckReport },
}

impl CheckOutcome {
    pub fn report(&self) -> CheckReport {
        match self {
            CheckOutcome::Proceed { report, .. } | CheckOutcome::Abort { report } => *report,
        }
    }
}

/// Distributes the singlets, then runs the anti-correlation check: on a random
/// `check_fraction` of each set the participant measures in a random basis,
/// announces it, and the authority measures in the same basis. Equal results
/// are violations. Surviving pairs are re-indexed in their original order.
pub fn bell_distribute_and_check(
    pairs_per_set: usize,
    params: &CheckParams,
    attack: [Option<&Interception>; 2],
    rng: &RandomStream,
) -> Result<CheckOutcome, KeylinkError> {
    let session = BellSession::distribute(pairs_per_set, attack, rng)?;
    check_session(session, params, rng)
}

pub fn check_session(
    mut session: BellSession,
    params: &CheckParams,
    rng: &RandomStream,
) -> Result<CheckOutcome, KeylinkError> {
    if session.checked {
        return Err(KeylinkError::ProtocolViolation("session already checked".into()));
    }
    if !(0.0..1.0).contains(&params.check_fraction) {
        return Err(KeylinkError::InvalidParams(format!(
            "check fraction {} outside [0, 1)",
            params.check_fraction
        )));
    }
    let mut participant = rng.fork("check/participant");
    let mut authority = rng.fork("check/authorities");
    let n = session.pairs_per_set();
    let sample = (n as f64 * params.check_fraction).round() as usize;
    let mut report = CheckReport::default();
    for (s, set) in session.sets.iter_mut().enumerate() {
        let picked = participant.subset(n, sample);
        let mut is_checked = vec![false; n];
        for &i in &picked {
            is_checked[i] = true;
            let basis = random_basis(&mut participant);
            let mine = measure(&set[i], 0, basis, &mut participant)?;
            let theirs = measure(&mine.post_state, 1, basis, &mut authority)?;
            report.sets[s].record(mine.value == theirs.value);
        }
        let survivors: Vec<PureState> = std::mem::take(set)
            .into_iter()
            .zip(is_checked)
            .filter(|(_, c)| !c)
            .map(|(p, _)| p)
            .collect();
        *set = survivors;
    }
    if !params.force_proceed && report.worst_rate() > params.threshold {
        return Ok(CheckOutcome::Abort { report });
    }
    let blocks = session.sets[0].len();
    session.checked = true;
    session.residuals = vec![None; blocks];
    session.decoded = vec![false; blocks];
    Ok(CheckOutcome::Proceed { session, report })
}

/// Public data announced by the participant for one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub block: usize,
    pub carrier: Carrier,
    pub outcome: BellState,
}

pub fn ent_encode_block(
    session: &mut BellSession,
    block: usize,
    two_bits: u8,
    rng: &mut RandomStream,
) -> Result<Announcement, KeylinkError> {
    let carrier = if rng.bit() { Carrier::Set2 } else { Carrier::Set1 };
    encode_block_with(session, block, two_bits, carrier, rng)
}

/// Encoding with an explicit carrier choice.
pub fn encode_block_with(
    session: &mut BellSession,
    block: usize,
    two_bits: u8,
    carrier: Carrier,
    rng: &mut RandomStream,
) -> Result<Announcement, KeylinkError> {
    if !session.checked {
        return Err(KeylinkError::ProtocolViolation(
            "encoding before the eavesdrop check".into(),
        ));
    }
    if block >= session.blocks() {
        return Err(KeylinkError::InsufficientBlocks {
            needed: block + 1,
            available: session.blocks(),
        });
    }
    if session.residuals[block].is_some() || session.decoded[block] {
        return Err(KeylinkError::ProtocolViolation(format!("block {block} reused")));
    }
    let code = PauliCode::new(two_bits).map_err(|_| {
        KeylinkError::InvalidParams(format!("two-bit value {two_bits} out of range"))
    })?;
    let register = session.sets[0][block].tensor(&session.sets[1][block])?;
    let encoded = apply_pauli(&register, carrier.register_qubit(), code)?;
    let out = bell_measure(&encoded, 0, 2, rng)?;
    session.residuals[block] = out.residual;
    Ok(Announcement {
        block,
        carrier,
        outcome: BellState::from_index(out.value as usize).expect("Bell index"),
    })
}

/// Joint Bell measurement of the authorities' qubits and table lookup.
pub fn ent_decode_block(
    session: &mut BellSession,
    announced: &Announcement,
    gate: &CooperationGate,
    rng: &mut RandomStream,
) -> Result<u8, KeylinkError> {
    let _ = gate;
    let block = announced.block;
    if block >= session.residuals.len() || session.decoded[block] {
        return Err(KeylinkError::ProtocolViolation(format!(
            "block {block} unavailable for decoding"
        )));
    }
    let residual = session.residuals[block].take().ok_or_else(|| {
        KeylinkError::ProtocolViolation(format!("block {block} was never encoded"))
    })?;
    session.decoded[block] = true;
    let out = bell_measure(&residual, 0, 1, rng)?;
    let authorities = BellState::from_index(out.value as usize).expect("Bell index");
    SwapTable::global()
        .lookup(announced.carrier, announced.outcome, authorities)
        .ok_or_else(|| KeylinkError::ProtocolViolation("no decode entry".into()))
}

fn check_tid_capacity(session: &BellSession, width: usize) -> Result<usize, KeylinkError> {
    if width % 2 != 0 {
        return Err(KeylinkError::InvalidParams(format!(
            "TID width {width} is not a whole number of two-bit blocks"
        )));
    }
    let needed = width / 2;
    if session.blocks() < needed {
        return Err(KeylinkError::InsufficientBlocks {
            needed,
            available: session.blocks(),
        });
    }
    Ok(needed)
}

/// Encodes the TID two bits per block; bits `(2i, 2i+1)` give `k = 2b₀ + b₁`.
pub fn ent_encode_tid(
    session: &mut BellSession,
    tid: &BitString,
    rng: &mut RandomStream,
) -> Result<Vec<Announcement>, KeylinkError> {
    let blocks = check_tid_capacity(session, tid.width())?;
    (0..blocks)
        .map(|i| {
            let k = (u8::from(tid.get(2 * i)) << 1) | u8::from(tid.get(2 * i + 1));
            ent_encode_block(session, i, k, rng)
        })
        .collect()
}

pub fn ent_decode_tid(
    session: &mut BellSession,
    announcements: &[Announcement],
    gate: &CooperationGate,
    rng: &mut RandomStream,
) -> Result<BitString, KeylinkError> {
    let mut bits = Vec::with_capacity(announcements.len() * 2);
    for a in announcements {
        let k = ent_decode_block(session, a, gate, rng)?;
        bits.push(k & 2 != 0);
        bits.push(k & 1 != 0);
    }
    Ok(BitString::from_bits(&bits)?)
}

/// Participant encodes, authorities jointly decode.
pub fn ent_deliver_tid(
    session: &mut BellSession,
    tid: &BitString,
    gate: &CooperationGate,
    rng: &RandomStream,
) -> Result<(Vec<Announcement>, BitString), KeylinkError> {
    let announcements = ent_encode_tid(session, tid, &mut rng.fork("encode"))?;
    let delivered = ent_decode_tid(session, &announcements, gate, &mut rng.fork("decode"))?;
    Ok((announcements, delivered))
}
