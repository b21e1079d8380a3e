//! Run configuration: scheme, sizes, thresholds, adversary and reward policy.
//!
//! Configs are TOML (key = value with sections) or JSON. Every field has a
//! default, so an empty file describes an honest five-participant BB84 run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keylink::{Authority, EveBasis};
use crate::tickets::RewardPolicy;

pub const SECURE_TID_WIDTH: usize = 256;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Bb84,
    Entangled,
    SemiQuantum,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Bb84 => "bb84",
            Scheme::Entangled => "entangled",
            Scheme::SemiQuantum => "semi-quantum",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Widths {
    pub tid: usize,
    pub pid: usize,
    /// BB84 signature length, or qubit count of the semi-quantum registration.
    pub signature_length: usize,
    pub min_signature_length: usize,
    /// Raw qubits per BB84 QKD session.
    pub qkd_raw: usize,
    /// Raw qubits per semi-quantum QKD session.
    pub semiquantum_raw: usize,
    pub qkd_sample: usize,
    /// Singlets per set in the entangled scheme; defaults to the TID width.
    pub bell_pairs: Option<usize>,
}

impl Default for Widths {
    fn default() -> Self {
        Self {
            tid: SECURE_TID_WIDTH,
            pid: 256,
            signature_length: crate::qds::DEFAULT_SIGNATURE_LENGTH,
            min_signature_length: crate::qds::DEFAULT_SIGNATURE_LENGTH,
            qkd_raw: 4 * (256 + 128),
            semiquantum_raw: crate::keylink::semiquantum::DEFAULT_RAW_LENGTH,
            qkd_sample: 128,
            bell_pairs: None,
        }
    }
}

impl Widths {
    pub fn bell_pairs(&self) -> usize {
        self.bell_pairs.unwrap_or(self.tid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub signature_mismatch: f64,
    pub qber_abort: f64,
    pub anti_correlation: f64,
    pub min_pass_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            signature_mismatch: crate::qds::DEFAULT_MISMATCH_THRESHOLD,
            qber_abort: crate::keylink::qkd::DEFAULT_QBER_ABORT,
            anti_correlation: crate::keylink::entangled::DEFAULT_VIOLATION_THRESHOLD,
            min_pass_fraction: crate::qds::DEFAULT_MIN_PASS_FRACTION,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinkTarget {
    #[default]
    Lat1,
    Lat2,
    Both,
}

impl LinkTarget {
    pub fn covers(self, authority: Authority) -> bool {
        matches!(
            (self, authority),
            (LinkTarget::Both, _)
                | (LinkTarget::Lat1, Authority::Lat1)
                | (LinkTarget::Lat2, Authority::Lat2)
        )
    }
}

/// At most one attack per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "attack", deny_unknown_fields)]
pub enum AdversaryConfig {
    #[default]
    None,
    /// Intercept-resend on the key/TID channel(s) of one participant, or of
    /// every participant when `participant` is absent.
    InterceptResend {
        #[serde(default)]
        participant: Option<usize>,
        #[serde(default)]
        link: LinkTarget,
        #[serde(default = "one")]
        fraction: f64,
        #[serde(default)]
        basis: EveBasis,
    },
    /// An impersonator reveals a random declaration for this participant.
    ForgeDeclaration { participant: usize },
    /// The participant announces a different TID after the winner is known.
    PostHocTidSwap { participant: usize },
    /// One authority tries to open tickets without its peer.
    SingleAuthorityOpen { authority: Authority },
    /// The participant submits another ticket after ticketing closes.
    LateTicket { participant: usize },
    /// An authority alters this participant's opened TID before the draw.
    CorruptAuthority {
        authority: Authority,
        participant: usize,
    },
    /// Colluding participants fix their TIDs (hex) instead of drawing them.
    FixedTids { tids: BTreeMap<usize, String> },
}

fn one() -> f64 {
    1.0
}

impl AdversaryConfig {
    /// Participant indices the attack names.
    pub fn targets(&self) -> Vec<usize> {
        match self {
            AdversaryConfig::None | AdversaryConfig::SingleAuthorityOpen { .. } => Vec::new(),
            AdversaryConfig::InterceptResend { participant, .. } => participant.iter().copied().collect(),
            AdversaryConfig::ForgeDeclaration { participant }
            | AdversaryConfig::PostHocTidSwap { participant }
            | AdversaryConfig::LateTicket { participant }
            | AdversaryConfig::CorruptAuthority { participant, .. } => vec![*participant],
            AdversaryConfig::FixedTids { tids } => tids.keys().copied().collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryConfig::None => "none",
            AdversaryConfig::InterceptResend { .. } => "intercept-resend",
            AdversaryConfig::ForgeDeclaration { .. } => "forge-declaration",
            AdversaryConfig::PostHocTidSwap { .. } => "post-hoc-tid-swap",
            AdversaryConfig::SingleAuthorityOpen { .. } => "single-authority-open",
            AdversaryConfig::LateTicket { .. } => "late-ticket",
            AdversaryConfig::CorruptAuthority { .. } => "corrupt-authority",
            AdversaryConfig::FixedTids { .. } => "fixed-tids",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub participants: usize,
    pub seed: Option<u64>,
    pub widths: Widths,
    pub thresholds: Thresholds,
    pub adversary: AdversaryConfig,
    pub rewards: RewardPolicy,
    /// Extra attempts after an aborted key or Bell session.
    pub retries: usize,
    /// Participants whose credentials the registrar rejects.
    pub rejected_credentials: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Bb84,
            participants: 5,
            seed: None,
            widths: Widths::default(),
            thresholds: Thresholds::default(),
            adversary: AdversaryConfig::None,
            rewards: RewardPolicy::default(),
            retries: 1,
            rejected_credentials: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Below the 256-bit TID width the run is a diagnostic, not a secure lottery.
    pub fn non_secure(&self) -> bool {
        self.widths.tid < SECURE_TID_WIDTH
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("participants", self.participants),
            ("widths.tid", self.widths.tid),
            ("widths.pid", self.widths.pid),
            ("widths.signature_length", self.widths.signature_length),
            ("widths.qkd_raw", self.widths.qkd_raw),
            ("widths.semiquantum_raw", self.widths.semiquantum_raw),
            ("widths.qkd_sample", self.widths.qkd_sample),
            ("widths.bell_pairs", self.widths.bell_pairs()),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(ConfigError::invalid(field, "must be positive"));
            }
        }
        let fractions = [
            ("thresholds.signature_mismatch", self.thresholds.signature_mismatch),
            ("thresholds.qber_abort", self.thresholds.qber_abort),
            ("thresholds.anti_correlation", self.thresholds.anti_correlation),
            ("thresholds.min_pass_fraction", self.thresholds.min_pass_fraction),
        ];
        for (field, value) in fractions {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::invalid(
                    field,
                    format!("must be within [0, 1], got {value}"),
                ));
            }
        }
        if self.widths.signature_length < self.widths.min_signature_length {
            return Err(ConfigError::invalid(
                "widths.signature_length",
                format!(
                    "{} is below widths.min_signature_length = {}",
                    self.widths.signature_length, self.widths.min_signature_length
                ),
            ));
        }
        if self.scheme == Scheme::Entangled {
            if self.widths.tid % 2 != 0 {
                return Err(ConfigError::invalid(
                    "widths.tid",
                    "entangled scheme encodes two bits per block; width must be even",
                ));
            }
            if self.widths.bell_pairs() < self.widths.tid {
                return Err(ConfigError::invalid(
                    "widths.bell_pairs",
                    "half of the pairs are checked; need at least one pair per TID bit",
                ));
            }
        }
        for &p in &self.rejected_credentials {
            if p >= self.participants {
                return Err(ConfigError::invalid(
                    "rejected_credentials",
                    format!("participant {p} does not exist"),
                ));
            }
        }
        for p in self.adversary.targets() {
            if p >= self.participants {
                return Err(ConfigError::invalid(
                    "adversary.participant",
                    format!("unknown target participant {p}"),
                ));
            }
        }
        match &self.adversary {
            AdversaryConfig::InterceptResend { fraction, .. } if !(0.0..=1.0).contains(fraction) => {
                return Err(ConfigError::invalid(
                    "adversary.fraction",
                    format!("must be within [0, 1], got {fraction}"),
                ))
            }
            AdversaryConfig::FixedTids { tids } => {
                for (p, hex) in tids {
                    crate::bits::BitString::from_hex(self.widths.tid, hex).map_err(|e| {
                        ConfigError::invalid("adversary.tids", format!("participant {p}: {e}"))
                    })?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tickets::Scoring;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_sections_and_adversary() {
        let text = r#"
scheme = "entangled"
participants = 3
seed = 9

[widths]
tid = 8
signature_length = 64
min_signature_length = 64

[thresholds]
qber_abort = 0.2

[adversary]
attack = "intercept-resend"
participant = 1
link = "lat2"
fraction = 0.5
basis = "rectilinear"

[rewards]
policy = "exact-split"
"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.scheme, Scheme::Entangled);
        assert_eq!(c.widths.bell_pairs(), 8);
        assert_eq!(c.thresholds.qber_abort, 0.2);
        assert_eq!(c.rewards, RewardPolicy::ExactSplit);
        assert_eq!(
            c.adversary,
            AdversaryConfig::InterceptResend {
                participant: Some(1),
                link: LinkTarget::Lat2,
                fraction: 0.5,
                basis: EveBasis::Rectilinear
            }
        );
        assert!(c.non_secure());
    }

    #[test]
    fn reward_scoring_parses() {
        let c = RunConfig::parse("[rewards]\npolicy = \"distance-proportional\"\nscore = \"distance\"\n").unwrap();
        assert_eq!(c.rewards, RewardPolicy::DistanceProportional(Scoring::Distance));
    }

    #[test]
    fn out_of_range_threshold_names_the_field() {
        let err = RunConfig::parse("[thresholds]\nqber_abort = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("thresholds.qber_abort"), "{err}");
    }

    #[test]
    fn unknown_target_rejected() {
        let err = RunConfig::parse(
            "participants = 2\n[adversary]\nattack = \"post-hoc-tid-swap\"\nparticipant = 5\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown target"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::parse("schema = \"bb84\"\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn zero_participants_rejected() {
        let err = RunConfig::parse("participants = 0\n").unwrap_err();
        assert!(err.to_string().contains("participants"));
    }
}
