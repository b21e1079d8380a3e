//! Repeated independent runs and detection statistics.

use rayon::prelude::*;
use serde::Serialize;

use super::run::run_lottery_with_source;
use super::transcript::{EventPayload, Transcript};
use super::ProtocolError;
use crate::config::RunConfig;
use crate::rng::RandomStream;

/// 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub attack: String,
    pub scheme: String,
    pub trials: usize,
    pub detections: usize,
    pub detection_probability: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Mean QBER / anti-correlation violation rate over every key or Bell
    /// check in every trial.
    pub mean_error_rate: Option<f64>,
    pub mean_signature_mismatch_rate: Option<f64>,
    pub aborted_runs: usize,
}

/// Wilson score interval for `successes` out of `n` at 95%. Fewer than two
/// trials carry no spread information, so the interval is all of [0, 1].
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n < 2 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Whether anything in the run flagged misbehaviour: an aborted key or Bell
/// session, a failed authentication, a rejected ticket, a refused
/// single-authority opening or a failed verdict.
pub fn detected(t: &Transcript) -> bool {
    let flagged = t.payloads().any(|p| match p {
        EventPayload::KeySession { established, .. } => !established,
        EventPayload::EavesdropCheck { proceed, .. } => !proceed,
        EventPayload::Authentication { accepted, .. } => !accepted,
        EventPayload::TicketRejected { .. } | EventPayload::CooperationDenied { .. } => true,
        _ => false,
    });
    flagged || t.verdicts.iter().any(|v| !v.is_ok())
}

fn rate(errors: usize, checked: usize) -> Option<f64> {
    (checked > 0).then(|| errors as f64 / checked as f64)
}

fn error_rates(t: &Transcript) -> (Vec<f64>, Vec<f64>) {
    let mut channel = Vec::new();
    let mut signature = Vec::new();
    for p in t.payloads() {
        match p {
            EventPayload::KeySession { qber, .. } => channel.push(*qber),
            EventPayload::EavesdropCheck {
                set1_violations,
                set1_checked,
                set2_violations,
                set2_checked,
                ..
            } => {
                let worst = rate(*set1_violations, *set1_checked)
                    .unwrap_or(0.0)
                    .max(rate(*set2_violations, *set2_checked).unwrap_or(0.0));
                channel.push(worst);
            }
            EventPayload::Authentication {
                mismatches,
                checked,
                ..
            } => signature.extend(rate(*mismatches, *checked)),
            _ => {}
        }
    }
    (channel, signature)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Seed of trial `k`, derived from the master seed.
pub fn trial_seed(seed: u64, k: usize) -> u64 {
    RandomStream::new(seed, "stats")
        .fork(format!("trial/{k}"))
        .bits(64)
        .ok()
        .and_then(|b| b.to_u64())
        .expect("64-bit draw")
}

/// Runs `trials` independent lotteries in parallel. Results are gathered in
/// trial order, so the summary does not depend on scheduling.
pub fn detection_stats(
    config: &RunConfig,
    seed: u64,
    trials: usize,
) -> Result<DetectionSummary, ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::Transcript("at least one trial required".into()));
    }
    let transcripts: Vec<Transcript> = (0..trials)
        .into_par_iter()
        .map(|k| run_lottery_with_source(config, trial_seed(seed, k), "stats"))
        .collect::<Result<_, _>>()?;
    let detections = transcripts.iter().filter(|t| detected(t)).count();
    let aborted_runs = transcripts.iter().filter(|t| t.abort_reason().is_some()).count();
    let (mut channel, mut signature) = (Vec::new(), Vec::new());
    for t in &transcripts {
        let (c, s) = error_rates(t);
        channel.extend(c);
        signature.extend(s);
    }
    let (wilson_low, wilson_high) = wilson_interval(detections, trials);
    Ok(DetectionSummary {
        attack: config.adversary.name().into(),
        scheme: config.scheme.to_string(),
        trials,
        detections,
        detection_probability: detections as f64 / trials as f64,
        wilson_low,
        wilson_high,
        mean_error_rate: mean(&channel),
        mean_signature_mismatch_rate: mean(&signature),
        aborted_runs,
    })
}
