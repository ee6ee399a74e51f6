// SPDX-License-Identifier: Apache-2.0

//! Scenario files: schema, validation and the embedded presets.

mod config;
pub mod presets;

use std::fmt;

pub use config::{
    AttackConfig, DetectorSettings, InlineProfile, LinkOverrideConfig, LoadError, MetricsFormat, OutputsConfig,
    ProfileConfig, RegistrationConfig, ScenarioConfig, TargetConfig, TransportConfig, TransportMode,
};

/// A validation problem located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}
