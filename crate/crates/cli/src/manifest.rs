//! Experiment manifests and their hashes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of the acceptance suite the tool implements.
pub const SUITE_VERSION: &str = "1.0";

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ADJWALK_OUT_DIR";

const DEFAULT_OUT_DIR: &str = "adjwalk-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    StationaryTest,
    Decay,
    Coupling,
    HydroNaive,
    HydroTransformed,
    Schemes,
    Mixing,
    CutoffSweep,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::StationaryTest => "stationary-test",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::HydroNaive => "hydro-naive",
            ExperimentKind::HydroTransformed => "hydro-transformed",
            ExperimentKind::Schemes => "schemes",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::CutoffSweep => "cutoff-sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: usize,
    pub lambda: f64,
    pub alpha1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeTag {
    Fixed,
    Vanishing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub n: usize,
    pub lambda: f64,
    pub regime: RegimeTag,
}

/// Everything needed to reproduce one experiment.
///
/// `times` are absolute times for `simulate`, `decay` and `mixing`, scheme
/// times for `schemes`, and fractions of the normalizer for `cutoff-sweep`.
/// `t_max` is the horizon (`simulate`, `stationary-test`, `coupling`) or the
/// scheme time (`hydro-naive`, `hydro-transformed`, `schemes`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub trajectories: usize,
    /// Per-pair single-event trials (`coupling`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub tool_version: String,
}

fn params(n: usize, lambda: f64) -> Option<ParamsSpec> {
    Some(ParamsSpec { n, lambda, alpha1: 1.0 })
}

impl ExperimentManifest {
    /// Built-in defaults, used when no manifest file is given.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut m = ExperimentManifest {
            kind,
            params: None,
            schedule: Vec::new(),
            times: Vec::new(),
            t_max: None,
            trajectories: 1000,
            trials: None,
            seed: 42,
            epsilon: None,
            slack: None,
            regime: None,
            out_dir: None,
            tool_version: TOOL_VERSION.to_string(),
        };
        match kind {
            ExperimentKind::Simulate => {
                m.params = params(16, 0.5);
                m.t_max = Some(8.0);
            }
            ExperimentKind::StationaryTest => {
                m.params = params(64, 0.2);
                m.trajectories = 10_000;
            }
            ExperimentKind::Decay => {
                m.params = params(32, 0.3);
                m.times = (1..=10).map(|i| 2.0 * i as f64).collect();
                m.trajectories = 10_000;
            }
            ExperimentKind::Coupling => {
                m.params = params(32, 0.3);
                m.trajectories = 200;
                m.trials = Some(100_000);
            }
            ExperimentKind::HydroNaive => {
                m.params = params(512, 0.8);
                m.t_max = Some(0.5);
                m.trajectories = 500;
            }
            ExperimentKind::HydroTransformed => {
                m.params = params(64, 0.3);
                m.t_max = Some(1.0);
            }
            ExperimentKind::Schemes => {
                m.params = params(256, 0.0625);
                m.t_max = Some(4.0);
                m.epsilon = Some(0.1);
                m.trajectories = 0;
            }
            ExperimentKind::Mixing => {
                m.params = params(128, 0.25);
                m.epsilon = Some(0.25);
                m.regime = Some(RegimeTag::Vanishing);
            }
            ExperimentKind::CutoffSweep => {
                m.schedule = [64usize, 128, 256]
                    .iter()
                    .map(|&n| ScheduleEntry {
                        n,
                        lambda: (n as f64).powf(-0.5),
                        regime: RegimeTag::Vanishing,
                    })
                    .collect();
                m.epsilon = Some(0.25);
                m.slack = Some(0.25);
            }
        }
        m
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid manifest {}: {e}", path.display())))
    }

    /// The manifest without its output directory, which does not affect results.
    pub fn canonical(&self) -> Self {
        ExperimentManifest { out_dir: None, ..self.clone() }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.canonical()).expect("manifest serializes")
    }

    /// SHA-256 of the canonical JSON, as lowercase hex.
    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `flag > manifest > $ADJWALK_OUT_DIR > ./adjwalk-out`.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

/// Parses `N:λ:regime` entries separated by commas. `λ` may be written
/// `N^p` for `N` raised to the power `p`.
pub fn parse_schedule(s: &str) -> Result<Vec<ScheduleEntry>, CliError> {
    s.split(',')
        .map(|entry| {
            let bad = || CliError::Usage(format!("bad schedule entry {entry:?}, expected N:lambda:regime"));
            let mut parts = entry.trim().split(':');
            let (Some(n), Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let n: usize = n.parse().map_err(|_| bad())?;
            let lambda = match l.strip_prefix("N^") {
                Some(pow) => (n as f64).powf(pow.parse::<f64>().map_err(|_| bad())?),
                None => l.parse().map_err(|_| bad())?,
            };
            let regime = match r {
                "fixed" => RegimeTag::Fixed,
                "vanishing" => RegimeTag::Vanishing,
                _ => return Err(bad()),
            };
            Ok(ScheduleEntry { n, lambda, regime })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hash_ignores_out_dir() {
        let a = ExperimentManifest::defaults(ExperimentKind::Mixing);
        let b = ExperimentManifest { out_dir: Some("/tmp/x".into()), ..a.clone() };
        assert_eq!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
        let c = ExperimentManifest { seed: 43, ..a.clone() };
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn defaults_round_trip() {
        for kind in [
            ExperimentKind::Simulate,
            ExperimentKind::StationaryTest,
            ExperimentKind::Decay,
            ExperimentKind::Coupling,
            ExperimentKind::HydroNaive,
            ExperimentKind::HydroTransformed,
            ExperimentKind::Schemes,
            ExperimentKind::Mixing,
            ExperimentKind::CutoffSweep,
        ] {
            let m = ExperimentManifest::defaults(kind);
            let back: ExperimentManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"kind":"decay","trajectories":1,"seed":1,"tool_version":"x","bogus":1}"#;
        assert!(serde_json::from_str::<ExperimentManifest>(text).is_err());
    }

    #[test]
    fn schedule_parsing() {
        let s = parse_schedule("64:N^-0.5:vanishing, 32:0.6:fixed").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].lambda, 0.125);
        assert_eq!(s[1], ScheduleEntry { n: 32, lambda: 0.6, regime: RegimeTag::Fixed });
        assert!(parse_schedule("64:0.1").is_err());
        assert!(parse_schedule("64:0.1:slow").is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let m = ExperimentManifest { out_dir: Some("from-manifest".into()), ..ExperimentManifest::defaults(ExperimentKind::Decay) };
        assert_eq!(m.resolve_out_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
        assert_eq!(m.resolve_out_dir(None), PathBuf::from("from-manifest"));
    }

    proptest! {
        #[test]
        fn manifest_round_trip(
            n in 2usize..1000,
            lambda in 0.0f64..1.0,
            seed: u64,
            times in proptest::collection::vec(0.0f64..1e4, 0..8),
            eps in proptest::option::of(0.0f64..1.0),
            traj in 0usize..100_000,
        ) {
            let m = ExperimentManifest {
                params: Some(ParamsSpec { n, lambda, alpha1: 1.0 }),
                times,
                epsilon: eps,
                seed,
                trajectories: traj,
                ..ExperimentManifest::defaults(ExperimentKind::Mixing)
            };
            let text = serde_json::to_string(&m).unwrap();
            let back: ExperimentManifest = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.sha256(), m.sha256());
        }
    }
}
