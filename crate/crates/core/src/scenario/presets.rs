// SPDX-License-Identifier: Apache-2.0

use super::ScenarioConfig;
use crate::sim::TopologyConfig;

pub const SCENARIOS: [&str; 2] = ["geni-fig3", "single-network"];
pub const TOPOLOGIES: [&str; 2] = SCENARIOS;

fn source(name: &str) -> Option<&'static str> {
    match name {
        "geni-fig3" => Some(include_str!("../../presets/geni-fig3.yaml")),
        "single-network" => Some(include_str!("../../presets/single-network.yaml")),
        _ => None,
    }
}

/// The YAML text of an embedded scenario preset.
pub fn scenario_source(name: &str) -> Option<&'static str> {
    source(name)
}

pub fn scenario(name: &str) -> Option<ScenarioConfig> {
    source(name).map(|text| ScenarioConfig::from_yaml(text).expect("embedded presets parse"))
}

pub fn topology(name: &str) -> Option<TopologyConfig> {
    scenario(name).map(|s| s.topology)
}
