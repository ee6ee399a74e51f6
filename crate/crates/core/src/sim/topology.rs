// SPDX-License-Identifier: Apache-2.0

//! Scenario topology: controllers, their switches, attached hosts, one
//! attacker and the controller peerings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::profile::LatencyProfile;
use crate::message::{IpAddress, MacAddress, NetAddr, PortId};
use crate::scenario::{presets, ConfigError};
use crate::time::SimDuration;

pub const DEFAULT_CONTROLLER_PORT: u16 = 9999;
pub const DEFAULT_SWITCH_CHANNEL_PORT: u16 = 6653;
pub const DEFAULT_AGENT_PORT: u16 = 5001;

fn default_controller_port() -> u16 {
    DEFAULT_CONTROLLER_PORT
}

fn default_agent_port() -> u16 {
    DEFAULT_AGENT_PORT
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controllers: Vec<ControllerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hosts: Vec<HostConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker: Option<AttackerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peerings: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub id: String,
    pub ip: IpAddress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddress>,
    /// Peer and victim message port.
    #[serde(default = "default_controller_port")]
    pub port: u16,
    pub switches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostConfig {
    pub id: String,
    pub ip: IpAddress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddress>,
    pub switch: String,
    pub port: u16,
    /// Runs the victim agent (registration and detection).
    #[serde(default)]
    pub agent: bool,
    #[serde(default = "default_true")]
    pub register: bool,
    /// Fault injection: alerts carry a wrong passcode.
    #[serde(default)]
    pub corrupt_passcode: bool,
    #[serde(default = "default_agent_port")]
    pub listen_port: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachmentConfig {
    pub switch: String,
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    pub id: String,
    pub ip: IpAddress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddress>,
    pub attachments: Vec<AttachmentConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Controller(usize),
    Switch(usize),
    Host(usize),
    Attacker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerNode {
    pub name: String,
    pub addr: NetAddr,
    pub switches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchNode {
    pub name: String,
    pub controller: usize,
    pub ports: BTreeMap<PortId, NodeRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostNode {
    pub name: String,
    pub addr: NetAddr,
    pub switch: usize,
    pub port: PortId,
    pub agent: bool,
    pub register: bool,
    pub corrupt_passcode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackerNode {
    pub name: String,
    pub ip: IpAddress,
    pub mac: MacAddress,
    pub attachments: Vec<(usize, PortId)>,
}

/// Bidirectional link with symmetric one-way latency.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeRef,
    pub b: NodeRef,
    pub latency: SimDuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub controllers: Vec<ControllerNode>,
    pub switches: Vec<SwitchNode>,
    pub hosts: Vec<HostNode>,
    pub attacker: Option<AttackerNode>,
    pub links: Vec<Link>,
    pub peerings: Vec<(usize, usize)>,
    link_index: BTreeMap<(NodeRef, NodeRef), usize>,
}

fn ordered(a: NodeRef, b: NodeRef) -> (NodeRef, NodeRef) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    pub fn name_of(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Controller(i) => &self.controllers[i].name,
            NodeRef::Switch(i) => &self.switches[i].name,
            NodeRef::Host(i) => &self.hosts[i].name,
            NodeRef::Attacker => self.attacker.as_ref().map_or("attacker", |a| &a.name),
        }
    }

    pub fn node_count(&self) -> usize {
        self.controllers.len() + self.switches.len() + self.hosts.len() + usize::from(self.attacker.is_some())
    }

    pub fn link(&self, a: NodeRef, b: NodeRef) -> Option<&Link> {
        self.link_index.get(&ordered(a, b)).map(|&i| &self.links[i])
    }

    /// One-way latency between two directly linked nodes.
    pub fn latency(&self, a: NodeRef, b: NodeRef) -> SimDuration {
        self.link(a, b)
            .map(|l| l.latency)
            .unwrap_or_else(|| panic!("no link between {a:?} and {b:?}"))
    }

    pub fn find(&self, name: &str) -> Option<NodeRef> {
        if let Some(i) = self.controllers.iter().position(|c| c.name == name) {
            return Some(NodeRef::Controller(i));
        }
        if let Some(i) = self.switches.iter().position(|s| s.name == name) {
            return Some(NodeRef::Switch(i));
        }
        if let Some(i) = self.hosts.iter().position(|h| h.name == name) {
            return Some(NodeRef::Host(i));
        }
        self.attacker.as_ref().filter(|a| a.name == name).map(|_| NodeRef::Attacker)
    }

    pub fn host_by_ip(&self, ip: IpAddress) -> Option<usize> {
        self.hosts.iter().position(|h| h.addr.ip == ip)
    }

    pub fn attacker_port_on(&self, switch: usize) -> Option<PortId> {
        self.attacker
            .as_ref()?
            .attachments
            .iter()
            .find(|(s, _)| *s == switch)
            .map(|(_, p)| *p)
    }

    fn add_link(&mut self, a: NodeRef, b: NodeRef, latency: SimDuration) {
        self.link_index.insert(ordered(a, b), self.links.len());
        self.links.push(Link { a, b, latency });
    }
}

/// Resolves presets, checks referential integrity and wires links with the
/// profile's latencies. All problems are reported, each with the path of the
/// offending field.
pub fn build_topology(config: &TopologyConfig, profile: &LatencyProfile) -> Result<Topology, Vec<ConfigError>> {
    let resolved;
    let config = match &config.preset {
        Some(name) => {
            let inline = !config.controllers.is_empty()
                || !config.hosts.is_empty()
                || config.attacker.is_some()
                || !config.peerings.is_empty();
            if inline {
                return Err(vec![ConfigError::new("topology.preset", "a preset cannot be combined with inline nodes")]);
            }
            resolved = presets::topology(name).ok_or_else(|| {
                vec![ConfigError::new(
                    "topology.preset",
                    format!("unknown topology preset `{name}` (known: {})", presets::TOPOLOGIES.join(", ")),
                )]
            })?;
            &resolved
        }
        None => config,
    };

    let mut errors = Vec::new();
    let mut names = BTreeSet::new();
    let mut ips = BTreeSet::new();
    let mut claim = |names: &mut BTreeSet<String>, errors: &mut Vec<ConfigError>, path: String, name: &str, ip: IpAddress| {
        if !names.insert(name.to_owned()) {
            errors.push(ConfigError::new(format!("{path}.id"), format!("duplicate node id `{name}`")));
        }
        if !ips.insert(ip) {
            errors.push(ConfigError::new(format!("{path}.ip"), format!("duplicate address {ip}")));
        }
    };

    let mut topo = Topology {
        controllers: Vec::new(),
        switches: Vec::new(),
        hosts: Vec::new(),
        attacker: None,
        links: Vec::new(),
        peerings: Vec::new(),
        link_index: BTreeMap::new(),
    };

    if config.controllers.is_empty() {
        errors.push(ConfigError::new("topology.controllers", "at least one controller is required"));
    }
    let mut switch_index: BTreeMap<String, usize> = BTreeMap::new();
    for (ci, c) in config.controllers.iter().enumerate() {
        let path = format!("topology.controllers[{ci}]");
        claim(&mut names, &mut errors, path.clone(), &c.id, c.ip);
        if c.switches.is_empty() {
            errors.push(ConfigError::new(format!("{path}.switches"), "a controller needs at least one switch"));
        }
        let mut owned = Vec::new();
        for (si, s) in c.switches.iter().enumerate() {
            if switch_index.contains_key(s) {
                errors.push(ConfigError::new(format!("{path}.switches[{si}]"), format!("switch `{s}` already has a controller")));
                continue;
            }
            if !names.insert(s.clone()) {
                errors.push(ConfigError::new(format!("{path}.switches[{si}]"), format!("duplicate node id `{s}`")));
                continue;
            }
            switch_index.insert(s.clone(), topo.switches.len());
            owned.push(topo.switches.len());
            topo.switches.push(SwitchNode { name: s.clone(), controller: ci, ports: BTreeMap::new() });
        }
        let mac = c.mac.unwrap_or_else(|| MacAddress::local(c.ip.to_bits()));
        topo.controllers.push(ControllerNode { name: c.id.clone(), addr: NetAddr::new(c.ip, mac, c.port), switches: owned });
    }

    let attach = |topo: &mut Topology, errors: &mut Vec<ConfigError>, path: String, switch: &str, port: u16, node: NodeRef| -> Option<(usize, PortId)> {
        let Some(&si) = switch_index.get(switch) else {
            errors.push(ConfigError::new(format!("{path}.switch"), format!("unknown switch `{switch}`")));
            return None;
        };
        if port == PortId::CONTROLLER.0 {
            errors.push(ConfigError::new(format!("{path}.port"), "port 0 is reserved for the controller channel"));
            return None;
        }
        let ports = &mut topo.switches[si].ports;
        if ports.contains_key(&PortId(port)) {
            errors.push(ConfigError::new(format!("{path}.port"), format!("port {port} on `{switch}` is already in use")));
            return None;
        }
        ports.insert(PortId(port), node);
        Some((si, PortId(port)))
    };

    for (hi, h) in config.hosts.iter().enumerate() {
        let path = format!("topology.hosts[{hi}]");
        claim(&mut names, &mut errors, path.clone(), &h.id, h.ip);
        let node = NodeRef::Host(topo.hosts.len());
        if let Some((switch, port)) = attach(&mut topo, &mut errors, path, &h.switch, h.port, node) {
            let mac = h.mac.unwrap_or_else(|| MacAddress::local(h.ip.to_bits()));
            topo.hosts.push(HostNode {
                name: h.id.clone(),
                addr: NetAddr::new(h.ip, mac, h.listen_port),
                switch,
                port,
                agent: h.agent,
                register: h.register,
                corrupt_passcode: h.corrupt_passcode,
            });
        }
    }

    if let Some(a) = &config.attacker {
        claim(&mut names, &mut errors, "topology.attacker".into(), &a.id, a.ip);
        if a.attachments.is_empty() {
            errors.push(ConfigError::new("topology.attacker.attachments", "the attacker must attach to at least one switch"));
        }
        let mut attachments = Vec::new();
        let mut switches_seen = BTreeSet::new();
        for (ai, att) in a.attachments.iter().enumerate() {
            let path = format!("topology.attacker.attachments[{ai}]");
            if !switches_seen.insert(att.switch.clone()) {
                errors.push(ConfigError::new(format!("{path}.switch"), format!("attacker already attached to `{}`", att.switch)));
                continue;
            }
            if let Some(slot) = attach(&mut topo, &mut errors, path, &att.switch, att.port, NodeRef::Attacker) {
                attachments.push(slot);
            }
        }
        let mac = a.mac.unwrap_or_else(|| MacAddress::local(a.ip.to_bits()));
        topo.attacker = Some(AttackerNode { name: a.id.clone(), ip: a.ip, mac, attachments });
    }

    let mut peer_pairs = BTreeSet::new();
    for (pi, [x, y]) in config.peerings.iter().enumerate() {
        let path = format!("topology.peerings[{pi}]");
        let find = |name: &str| topo.controllers.iter().position(|c| c.name == name);
        match (find(x), find(y)) {
            (Some(i), Some(j)) if i == j => {
                errors.push(ConfigError::new(path, "a controller cannot peer with itself"));
            }
            (Some(i), Some(j)) => {
                if peer_pairs.insert((i.min(j), i.max(j))) {
                    topo.peerings.push((i, j));
                } else {
                    errors.push(ConfigError::new(path, format!("duplicate peering {x} <-> {y}")));
                }
            }
            (a, _) => {
                let (idx, bad) = if a.is_none() { (0, x) } else { (1, y) };
                errors.push(ConfigError::new(format!("{path}[{idx}]"), format!("unknown controller `{bad}`")));
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    for (hi, h) in topo.hosts.clone().iter().enumerate() {
        topo.add_link(NodeRef::Host(hi), NodeRef::Switch(h.switch), profile.host_link);
    }
    if let Some(a) = topo.attacker.clone() {
        for (si, _) in a.attachments {
            topo.add_link(NodeRef::Attacker, NodeRef::Switch(si), profile.host_link);
        }
    }
    for si in 0..topo.switches.len() {
        let ci = topo.switches[si].controller;
        topo.add_link(NodeRef::Switch(si), NodeRef::Controller(ci), profile.controller_link);
    }
    for (i, j) in topo.peerings.clone() {
        topo.add_link(NodeRef::Controller(i), NodeRef::Controller(j), profile.peer_link);
    }

    for (oi, o) in profile.overrides.iter().enumerate() {
        let path = format!("profile.overrides[{oi}]");
        match (topo.find(&o.a), topo.find(&o.b)) {
            (Some(a), Some(b)) => match topo.link_index.get(&ordered(a, b)) {
                Some(&li) => topo.links[li].latency = o.latency,
                None => errors.push(ConfigError::new(path, format!("no link between `{}` and `{}`", o.a, o.b))),
            },
            _ => errors.push(ConfigError::new(path, format!("unknown node in override `{}` <-> `{}`", o.a, o.b))),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(topo)
}
