//! Prepare-and-measure BB84 key agreement over a noiseless channel.
//!
//! No error correction or privacy amplification is performed: without an
//! eavesdropper the sifted keys are already identical, and with one the
//! session is expected to abort on the sampled error rate.

use serde::{Deserialize, Serialize};

use super::{ErrorCount, Interception, KeylinkError};
use crate::bits::BitString;
use crate::qds::random_basis;
use crate::qsim::{measure, prepare_bb84};
use crate::rng::RandomStream;

pub const DEFAULT_KEY_LENGTH: usize = 256;
pub const DEFAULT_SAMPLE_SIZE: usize = 128;
pub const DEFAULT_QBER_ABORT: f64 = 0.11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QkdParams {
    pub raw_length: usize,
    pub key_length: usize,
    pub sample_size: usize,
    pub abort_threshold: f64,
}

impl Default for QkdParams {
    fn default() -> Self {
        Self {
            raw_length: 4 * (DEFAULT_KEY_LENGTH + DEFAULT_SAMPLE_SIZE),
            key_length: DEFAULT_KEY_LENGTH,
            sample_size: DEFAULT_SAMPLE_SIZE,
            abort_threshold: DEFAULT_QBER_ABORT,
        }
    }
}

impl QkdParams {
    pub(crate) fn validate(&self) -> Result<(), KeylinkError> {
        if self.raw_length == 0 || self.key_length == 0 || self.sample_size == 0 {
            return Err(KeylinkError::InvalidParams(
                "raw length, key length and sample size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.abort_threshold) {
            return Err(KeylinkError::InvalidParams(format!(
                "abort threshold {} outside [0, 1]",
                self.abort_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiftedKey {
    pub bits: BitString,
    pub qber_estimate: f64,
    pub sample_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum QkdAbort {
    Qber { estimate: f64 },
    Insufficient { sifted: usize, required: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum QkdOutcome {
    Established {
        sender: SiftedKey,
        receiver: SiftedKey,
        /// Errors on disclosed sifted positions.
        sample: ErrorCount,
        /// Errors on control (reflected) positions; semi-quantum sessions only.
        control: Option<ErrorCount>,
    },
    Aborted {
        reason: QkdAbort,
        sample: ErrorCount,
        control: Option<ErrorCount>,
    },
}

impl QkdOutcome {
    pub fn is_established(&self) -> bool {
        matches!(self, QkdOutcome::Established { .. })
    }

    pub fn sample(&self) -> ErrorCount {
        match self {
            QkdOutcome::Established { sample, .. } | QkdOutcome::Aborted { sample, .. } => *sample,
        }
    }

    pub fn control(&self) -> Option<ErrorCount> {
        match self {
            QkdOutcome::Established { control, .. } | QkdOutcome::Aborted { control, .. } => {
                *control
            }
        }
    }

    /// Worst error rate over the sample and control checks.
    pub fn qber_estimate(&self) -> f64 {
        let c = self.control().map_or(0.0, |c| c.rate());
        self.sample().rate().max(c)
    }
}

/// Shared sifting tail: discloses a random sample of the sifted positions,
/// estimates the error rate and keeps `key_length` of the rest.
pub(crate) fn finish_sifting(
    params: &QkdParams,
    sender_bits: &[bool],
    receiver_bits: &[bool],
    control: Option<ErrorCount>,
    rng: &mut RandomStream,
) -> Result<QkdOutcome, KeylinkError> {
    let sifted = sender_bits.len();
    let required = params.key_length + params.sample_size;
    if sifted < required {
        return Ok(QkdOutcome::Aborted {
            reason: QkdAbort::Insufficient { sifted, required },
            sample: ErrorCount::default(),
            control,
        });
    }
    let sample_idx = rng.subset(sifted, params.sample_size);
    let mut sample = ErrorCount::default();
    let mut in_sample = vec![false; sifted];
    for &i in &sample_idx {
        in_sample[i] = true;
        sample.record(sender_bits[i] != receiver_bits[i]);
    }
    let estimate = sample
        .rate()
        .max(control.map_or(0.0, |c| c.rate()));
    if estimate > params.abort_threshold {
        return Ok(QkdOutcome::Aborted {
            reason: QkdAbort::Qber { estimate },
            sample,
            control,
        });
    }
    let keep: Vec<usize> = (0..sifted)
        .filter(|&i| !in_sample[i])
        .take(params.key_length)
        .collect();
    let key = |bits: &[bool]| -> Result<SiftedKey, KeylinkError> {
        Ok(SiftedKey {
            bits: BitString::from_bits(&keep.iter().map(|&i| bits[i]).collect::<Vec<_>>())?,
            qber_estimate: estimate,
            sample_size: params.sample_size,
        })
    };
    Ok(QkdOutcome::Established {
        sender: key(sender_bits)?,
        receiver: key(receiver_bits)?,
        sample,
        control,
    })
}

/// One BB84 session from `rng`'s owner (sender) to the receiver, with an
/// optional intercept-resend attacker on the channel.
pub fn bb84_qkd(
    params: &QkdParams,
    interception: Option<&Interception>,
    rng: &RandomStream,
) -> Result<QkdOutcome, KeylinkError> {
    params.validate()?;
    let mut alice = rng.fork("sender");
    let mut bob = rng.fork("receiver");
    let mut eve = rng.fork("eve");
    let mut public = rng.fork("sample");

    let mut sender_bits = Vec::with_capacity(params.raw_length / 2 + 1);
    let mut receiver_bits = Vec::with_capacity(params.raw_length / 2 + 1);
    for _ in 0..params.raw_length {
        let bit = u8::from(alice.bit());
        let basis = random_basis(&mut alice);
        let mut qubit = prepare_bb84(bit, basis)?;
        if let Some(attack) = interception {
            qubit = attack.apply(qubit, 0, &mut eve)?;
        }
        let bob_basis = random_basis(&mut bob);
        let outcome = measure(&qubit, 0, bob_basis, &mut bob)?;
        if bob_basis == basis {
            sender_bits.push(bit == 1);
            receiver_bits.push(outcome.value == 1);
        }
    }
    finish_sifting(params, &sender_bits, &receiver_bits, None, &mut public)
}
