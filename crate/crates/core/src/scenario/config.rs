// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::agents::{AttackSchedule, AttackTarget, DetectorConfig};
use crate::message::IpAddress;
use crate::sim::{
    build_topology, LatencyProfile, LinkOverride, RegistrationOrder, Scenario, TopologyConfig, DEFAULT_PROBE_TIMEOUT,
    DEFAULT_TIME_LIMIT,
};
use crate::time::{SimDuration, SimTime};

fn one() -> u32 {
    1
}

fn default_probe_timeout() -> Option<f64> {
    Some(DEFAULT_PROBE_TIMEOUT.as_ms_f64())
}

fn default_time_limit() -> f64 {
    DEFAULT_TIME_LIMIT.as_ms_f64()
}

fn default_payload() -> u32 {
    64
}

fn default_k() -> u32 {
    1
}

fn default_window() -> f64 {
    1000.0
}

fn default_ports() -> Vec<u16> {
    vec![22]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub registration: RegistrationConfig,
    #[serde(default = "one")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
    /// Hard timeout of the install probe; `null` disables the probe.
    #[serde(default = "default_probe_timeout")]
    pub probe_timeout_ms: Option<f64>,
    #[serde(default = "default_time_limit")]
    pub time_limit_ms: f64,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

/// A preset name or inline values layered over an optional base preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileConfig {
    Preset(String),
    Inline(InlineProfile),
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Preset("zero".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host_link_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_link_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer_link_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victim_detect_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_handle_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_install_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<LinkOverrideConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverrideConfig {
    pub a: String,
    pub b: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default)]
    pub start_ms: f64,
    pub inter_packet_ms: f64,
    pub packet_count: u32,
    #[serde(default = "default_payload")]
    pub payload_bytes: u32,
    pub targets: Vec<TargetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Host id or address.
    pub victim: String,
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSettings {
    #[serde(default = "default_k")]
    pub threshold_k: u32,
    #[serde(default = "default_window")]
    pub window_ms: f64,
    #[serde(default = "default_ports")]
    pub protected_ports: Vec<u16>,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        DetectorSettings { threshold_k: default_k(), window_ms: default_window(), protected_ports: default_ports() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegistrationConfig {
    #[default]
    BeforeAttack,
    Concurrent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMode {
    #[default]
    Memory,
    Udp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    #[serde(default)]
    pub mode: TransportMode,
    /// First controller port in UDP mode; 0 picks ephemeral ports.
    #[serde(default)]
    pub base_port: u16,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricsFormat {
    #[default]
    Csv,
    Structured,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PathBuf>,
    #[serde(default)]
    pub format: MetricsFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(ConfigError),
}

fn duration(errors: &mut Vec<ConfigError>, path: &str, ms: f64) -> SimDuration {
    SimDuration::from_ms_f64(ms).unwrap_or_else(|| {
        errors.push(ConfigError::new(path, format!("expected a finite, non-negative duration, got {ms}")));
        SimDuration::ZERO
    })
}

fn positive(errors: &mut Vec<ConfigError>, path: &str, ms: f64) -> SimDuration {
    let d = duration(errors, path, ms);
    if d.is_zero() && SimDuration::from_ms_f64(ms).is_some() {
        errors.push(ConfigError::new(path, "must be positive"));
    }
    d
}

impl ProfileConfig {
    pub fn resolve(&self) -> Result<LatencyProfile, Vec<ConfigError>> {
        let unknown = |path: &str, name: &str| {
            ConfigError::new(
                path,
                format!("unknown profile `{name}` (known: {})", LatencyProfile::PRESETS.join(", ")),
            )
        };
        let inline = match self {
            ProfileConfig::Preset(name) => {
                return LatencyProfile::preset(name).ok_or_else(|| vec![unknown("profile", name)]);
            }
            ProfileConfig::Inline(inline) => inline,
        };
        let mut errors = Vec::new();
        let mut profile = match inline.base.as_deref() {
            None => LatencyProfile::zero(),
            Some(name) => LatencyProfile::preset(name).unwrap_or_else(|| {
                errors.push(unknown("profile.base", name));
                LatencyProfile::zero()
            }),
        };
        if inline.base.is_none() {
            profile.name = "custom".into();
        }
        let fields = [
            ("host_link_ms", inline.host_link_ms, &mut profile.host_link),
            ("controller_link_ms", inline.controller_link_ms, &mut profile.controller_link),
            ("peer_link_ms", inline.peer_link_ms, &mut profile.peer_link),
            ("victim_detect_ms", inline.victim_detect_ms, &mut profile.victim_detect),
            ("controller_handle_ms", inline.controller_handle_ms, &mut profile.controller_handle),
            ("switch_install_ms", inline.switch_install_ms, &mut profile.switch_install),
        ];
        for (field, value, slot) in fields {
            if let Some(ms) = value {
                *slot = duration(&mut errors, &format!("profile.{field}"), ms);
            }
        }
        if let Some(p) = inline.loss_probability {
            if (0.0..=1.0).contains(&p) {
                profile.loss_probability = p;
            } else {
                errors.push(ConfigError::new("profile.loss_probability", format!("{p} is outside [0, 1]")));
            }
        }
        for (i, o) in inline.overrides.iter().enumerate() {
            let latency = duration(&mut errors, &format!("profile.overrides[{i}].latency_ms"), o.latency_ms);
            profile.overrides.push(LinkOverride { a: o.a.clone(), b: o.b.clone(), latency });
        }
        if errors.is_empty() {
            Ok(profile)
        } else {
            Err(errors)
        }
    }
}

impl ScenarioConfig {
    pub fn from_yaml(text: &str) -> Result<Self, ConfigError> {
        let de = serde_yaml::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            let message = e.into_inner().to_string();
            let message = match message.strip_prefix(&format!("{path}: ")) {
                Some(rest) if !path.is_empty() => rest.to_owned(),
                _ => message,
            };
            ConfigError::new(path, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })?;
        Self::from_yaml(&text).map_err(LoadError::Parse)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("scenario configs serialize")
    }

    /// Full schema and referential checks; every problem is reported.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        self.compile().map(|_| ())
    }

    /// Validates and builds the runnable scenario.
    pub fn compile(&self) -> Result<Scenario, Vec<ConfigError>> {
        let mut errors = Vec::new();
        if self.trials == 0 {
            errors.push(ConfigError::new("trials", "at least one trial is required"));
        }
        let time_limit = positive(&mut errors, "time_limit_ms", self.time_limit_ms);
        let probe_timeout = self.probe_timeout_ms.map(|ms| positive(&mut errors, "probe_timeout_ms", ms));

        let d = &self.detector;
        if d.threshold_k == 0 {
            errors.push(ConfigError::new("detector.threshold_k", "must be at least 1"));
        }
        let window = positive(&mut errors, "detector.window_ms", d.window_ms);
        if d.protected_ports.is_empty() {
            errors.push(ConfigError::new("detector.protected_ports", "at least one port is required"));
        }
        let detector = DetectorConfig::new(d.threshold_k.max(1), if window.is_zero() { SimDuration::from_us(1) } else { window })
            .expect("arguments checked above");

        let profile = self.profile.resolve().unwrap_or_else(|mut e| {
            errors.append(&mut e);
            LatencyProfile::zero()
        });
        let topology = match build_topology(&self.topology, &profile) {
            Ok(t) => Some(t),
            Err(mut e) => {
                errors.append(&mut e);
                None
            }
        };

        let mut attack = None;
        if let (Some(a), Some(topo)) = (&self.attack, &topology) {
            let start = duration(&mut errors, "attack.start_ms", a.start_ms);
            let gap = positive(&mut errors, "attack.inter_packet_ms", a.inter_packet_ms);
            if a.packet_count == 0 {
                errors.push(ConfigError::new("attack.packet_count", "must be at least 1"));
            }
            if a.targets.is_empty() {
                errors.push(ConfigError::new("attack.targets", "at least one target is required"));
            }
            match &topo.attacker {
                None => errors.push(ConfigError::new("attack", "the topology has no attacker")),
                Some(attacker) => {
                    let mut targets = Vec::new();
                    let mut seen = BTreeSet::new();
                    for (i, t) in a.targets.iter().enumerate() {
                        let path = format!("attack.targets[{i}].victim");
                        let host = topo
                            .hosts
                            .iter()
                            .position(|h| h.name == t.victim)
                            .or_else(|| t.victim.parse::<IpAddress>().ok().and_then(|ip| topo.host_by_ip(ip)));
                        let Some(hi) = host else {
                            errors.push(ConfigError::new(path, format!("unknown victim `{}`", t.victim)));
                            continue;
                        };
                        let h = &topo.hosts[hi];
                        if topo.attacker_port_on(h.switch).is_none() {
                            errors.push(ConfigError::new(
                                path,
                                format!("the attacker is not attached to `{}`", topo.switches[h.switch].name),
                            ));
                            continue;
                        }
                        if !seen.insert((hi, t.port)) {
                            errors.push(ConfigError::new(format!("attack.targets[{i}]"), "duplicate target"));
                            continue;
                        }
                        targets.push(AttackTarget { victim_ip: h.addr.ip, victim_mac: h.addr.mac, dst_port: t.port });
                    }
                    if errors.is_empty() {
                        let schedule = AttackSchedule::new(
                            attacker.ip,
                            attacker.mac,
                            targets,
                            SimTime::ZERO + start,
                            gap,
                            a.packet_count,
                        )
                        .map(|s| s.with_payload_bytes(a.payload_bytes));
                        match schedule {
                            Ok(s) => attack = Some(s),
                            Err(e) => errors.push(ConfigError::new("attack", e.to_string())),
                        }
                    }
                }
            }
        }

        if !errors.is_empty() {
            return Err(errors);
        }
        let mut scenario = Scenario::new(topology.expect("no errors"), profile);
        scenario.attack = attack;
        scenario.detector = detector;
        scenario.protected_ports = d.protected_ports.iter().copied().collect();
        scenario.registration = match self.registration {
            RegistrationConfig::BeforeAttack => RegistrationOrder::BeforeAttack,
            RegistrationConfig::Concurrent => RegistrationOrder::Concurrent,
        };
        scenario.probe_timeout = probe_timeout;
        scenario.time_limit = time_limit;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets;

    fn fig3() -> ScenarioConfig {
        presets::scenario("geni-fig3").unwrap()
    }

    fn paths(cfg: &ScenarioConfig) -> Vec<String> {
        cfg.validate().unwrap_err().into_iter().map(|e| e.path).collect()
    }

    #[test]
    fn preset_is_valid() {
        let scenario = fig3().compile().unwrap();
        assert_eq!(scenario.profile, LatencyProfile::geni());
        assert_eq!(scenario.attack.unwrap().targets().len(), 2);
    }

    #[test]
    fn zero_trials_names_the_field() {
        let mut cfg = fig3();
        cfg.trials = 0;
        assert_eq!(paths(&cfg), vec!["trials"]);
    }

    #[test]
    fn unknown_victim_ip_is_referential_error() {
        let mut cfg = fig3();
        cfg.attack.as_mut().unwrap().targets[1].victim = "10.9.9.9".into();
        assert_eq!(paths(&cfg), vec!["attack.targets[1].victim"]);
    }

    #[test]
    fn victim_by_address() {
        let mut cfg = fig3();
        cfg.attack.as_mut().unwrap().targets[0].victim = "10.0.1.5".into();
        cfg.validate().unwrap();
    }

    #[test]
    fn yaml_errors_carry_paths() {
        let text = presets::scenario_source("geni-fig3").unwrap().replace("packet_count: 20", "packet_count: lots");
        let err = ScenarioConfig::from_yaml(&text).unwrap_err();
        assert_eq!(err.path, "attack.packet_count");

        let err = ScenarioConfig::from_yaml("topology: {}\nbogus: 1\n").unwrap_err();
        assert!(err.message.contains("bogus"), "{err}");
    }

    #[test]
    fn several_errors_reported_together() {
        let mut cfg = fig3();
        cfg.trials = 0;
        cfg.detector.threshold_k = 0;
        cfg.attack.as_mut().unwrap().packet_count = 0;
        cfg.profile = ProfileConfig::Preset("lab".into());
        let p = paths(&cfg);
        for expected in ["trials", "detector.threshold_k", "attack.packet_count", "profile"] {
            assert!(p.iter().any(|x| x == expected), "{expected} missing from {p:?}");
        }
    }

    #[test]
    fn inline_profile_layers_over_base() {
        let text = "topology: {preset: geni-fig3}\nprofile:\n  base: hardware\n  switch_install_ms: 70\n";
        let cfg = ScenarioConfig::from_yaml(text).unwrap();
        let scenario = cfg.compile().unwrap();
        assert_eq!(scenario.profile.switch_install, SimDuration::from_ms(70));
        assert_eq!(scenario.profile.victim_detect, SimDuration::from_ms(306));

        let bad = ScenarioConfig::from_yaml("topology: {preset: geni-fig3}\nprofile: {peer_link_ms: -3}\n").unwrap();
        assert_eq!(paths(&bad), vec!["profile.peer_link_ms"]);
    }

    #[test]
    fn yaml_round_trip() {
        let cfg = fig3();
        assert_eq!(ScenarioConfig::from_yaml(&cfg.to_yaml()).unwrap(), cfg);
    }

    #[test]
    fn probe_can_be_disabled() {
        let cfg = ScenarioConfig::from_yaml("topology: {preset: single-network}\nprobe_timeout_ms: null\n").unwrap();
        assert!(cfg.compile().unwrap().probe_timeout.is_none());
    }
}
