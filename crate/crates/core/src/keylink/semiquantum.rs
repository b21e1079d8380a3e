//! Semi-quantum key agreement with a measure-or-reflect classical party.
//!
//! The quantum party sends random BB84 states. For each one the classical
//! party either SIFTs (measures in Z and resends) or CTRLs (reflects). The
//! quantum party measures every returned qubit in its preparation basis.
//! Key material comes from SIFT positions prepared in Z. All CTRL positions,
//! plus a disclosed sample of the SIFT-Z positions, estimate disturbance.
//! The attacker sits on the outbound channel.

use super::qkd::{finish_sifting, QkdOutcome, QkdParams};
use super::{ErrorCount, Interception, KeylinkError};
use crate::classical::{ClassicalAction, ClassicalParty};
use crate::qds::random_basis;
use crate::qsim::{measure, prepare_bb84, Basis};
use crate::rng::RandomStream;

/// Raw length giving ≈512 expected SIFT-Z positions at the default
/// key and sample sizes.
pub const DEFAULT_RAW_LENGTH: usize = 2048;

pub fn default_params() -> QkdParams {
    QkdParams {
        raw_length: DEFAULT_RAW_LENGTH,
        ..QkdParams::default()
    }
}

pub fn semiquantum_qkd(
    params: &QkdParams,
    interception: Option<&Interception>,
    rng: &RandomStream,
) -> Result<QkdOutcome, KeylinkError> {
    params.validate()?;
    let mut quantum = rng.fork("quantum");
    let mut classical_rng = rng.fork("classical");
    let mut eve = rng.fork("eve");
    let mut public = rng.fork("sample");
    let classical = ClassicalParty;

    let mut control = ErrorCount::default();
    let mut quantum_bits = Vec::new();
    let mut classical_bits = Vec::new();
    for _ in 0..params.raw_length {
        let bit = u8::from(quantum.bit());
        let basis = random_basis(&mut quantum);
        let mut qubit = prepare_bb84(bit, basis)?;
        if let Some(attack) = interception {
            qubit = attack.apply(qubit, 0, &mut eve)?;
        }
        let action = if classical_rng.bit() {
            ClassicalAction::MeasureZ
        } else {
            ClassicalAction::Pass
        };
        let (reading, returned) = classical.act(action, qubit, &mut classical_rng)?;
        let back = measure(&returned, 0, basis, &mut quantum)?;
        match (action, reading) {
            (ClassicalAction::Pass, _) => control.record(back.value != bit),
            (ClassicalAction::MeasureZ, Some(v)) if basis == Basis::Rectilinear => {
                quantum_bits.push(bit == 1);
                classical_bits.push(v == 1);
            }
            _ => {}
        }
    }
    finish_sifting(
        params,
        &quantum_bits,
        &classical_bits,
        Some(control),
        &mut public,
    )
}
