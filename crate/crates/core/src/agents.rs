// SPDX-License-Identifier: Apache-2.0

//! Victim agent and attacker traffic generator.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::message::{IpAddress, MacAddress, MessageBody, NetAddr, Packet, PacketKind, Passcode, WireMessage};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("agent already holds a passcode")]
    AlreadyRegistered,
    #[error("attack from {attacker} detected before registration completed")]
    NotRegistered { attacker: IpAddress },
    #[error("invalid detector: {0}")]
    InvalidDetector(&'static str),
    #[error("invalid attack schedule: {0}")]
    InvalidSchedule(&'static str),
}

/// Fires when `threshold_k` packets from one source arrive within a sliding
/// window of `window` length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorConfig {
    threshold_k: u32,
    window: SimDuration,
}

impl DetectorConfig {
    pub fn new(threshold_k: u32, window: SimDuration) -> Result<Self, AgentError> {
        if threshold_k == 0 {
            return Err(AgentError::InvalidDetector("threshold_k must be at least 1"));
        }
        if window.is_zero() {
            return Err(AgentError::InvalidDetector("window must be positive"));
        }
        Ok(DetectorConfig { threshold_k, window })
    }

    pub fn threshold_k(&self) -> u32 {
        self.threshold_k
    }

    pub fn window(&self) -> SimDuration {
        self.window
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { threshold_k: 1, window: SimDuration::from_ms(1000) }
    }
}

#[derive(Debug, Clone)]
pub struct VictimState {
    pub addr: NetAddr,
    pub controller: NetAddr,
    passcode: Option<Passcode>,
    protected_ports: BTreeSet<u16>,
    detector: DetectorConfig,
    /// Arrivals per source still inside the detection window.
    observed: BTreeMap<IpAddress, VecDeque<SimTime>>,
    alerted: BTreeSet<IpAddress>,
}

impl VictimState {
    pub fn new(
        addr: NetAddr,
        controller: NetAddr,
        protected_ports: impl IntoIterator<Item = u16>,
        detector: DetectorConfig,
    ) -> Self {
        VictimState {
            addr,
            controller,
            passcode: None,
            protected_ports: protected_ports.into_iter().collect(),
            detector,
            observed: BTreeMap::new(),
            alerted: BTreeSet::new(),
        }
    }

    pub fn passcode(&self) -> Option<Passcode> {
        self.passcode
    }

    pub fn has_alerted(&self, attacker: IpAddress) -> bool {
        self.alerted.contains(&attacker)
    }

    pub fn victim_register(&mut self, now: SimTime) -> Result<Packet, AgentError> {
        if self.passcode.is_some() {
            return Err(AgentError::AlreadyRegistered);
        }
        let msg = WireMessage::new(self.addr.ip, self.addr.port, now.whole_ms(), MessageBody::Register);
        Ok(Packet::control(self.addr, self.controller, msg))
    }

    /// Stores the passcode carried by a REGISTER_ACK. Other messages are
    /// ignored; returns whether a passcode was stored.
    pub fn on_control(&mut self, msg: &WireMessage) -> bool {
        match msg.body {
            MessageBody::RegisterAck { passcode } if msg.sender_ip == self.controller.ip => {
                self.passcode = Some(passcode);
                true
            }
            _ => false,
        }
    }

    /// Feeds one received packet to the detector. Returns the ALERT packet to
    /// send when this packet completes a detection.
    pub fn victim_on_packet(&mut self, packet: &Packet, now: SimTime) -> Result<Option<Packet>, AgentError> {
        if !matches!(packet.kind, PacketKind::IpData { .. }) {
            return Ok(None);
        }
        let src = packet.src_ip;
        let window = self.detector.window;
        let arrivals = self.observed.entry(src).or_default();
        arrivals.push_back(now);
        while arrivals.front().is_some_and(|&t| now.saturating_since(t) >= window) {
            arrivals.pop_front();
        }
        let fired = self.protected_ports.contains(&packet.dst_port)
            && arrivals.len() >= self.detector.threshold_k as usize
            && !self.alerted.contains(&src);
        if !fired {
            return Ok(None);
        }
        let Some(passcode) = self.passcode else {
            return Err(AgentError::NotRegistered { attacker: src });
        };
        self.alerted.insert(src);
        let msg = WireMessage::new(
            self.addr.ip,
            self.addr.port,
            now.whole_ms(),
            MessageBody::Alert { passcode: Some(passcode), attacker_ip: src },
        );
        Ok(Some(Packet::control(self.addr, self.controller, msg)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackTarget {
    pub victim_ip: IpAddress,
    pub victim_mac: MacAddress,
    pub dst_port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackSchedule {
    attacker_ip: IpAddress,
    attacker_mac: MacAddress,
    targets: Vec<AttackTarget>,
    start: SimTime,
    inter_packet: SimDuration,
    packet_count: u32,
    payload_bytes: u32,
}

/// First source port used by the attacker; target `i` uses `BASE + i`.
pub const ATTACKER_BASE_PORT: u16 = 40000;

impl AttackSchedule {
    pub fn new(
        attacker_ip: IpAddress,
        attacker_mac: MacAddress,
        targets: Vec<AttackTarget>,
        start: SimTime,
        inter_packet: SimDuration,
        packet_count: u32,
    ) -> Result<Self, AgentError> {
        if targets.is_empty() {
            return Err(AgentError::InvalidSchedule("at least one target is required"));
        }
        if inter_packet.is_zero() {
            return Err(AgentError::InvalidSchedule("inter_packet must be positive"));
        }
        if packet_count == 0 {
            return Err(AgentError::InvalidSchedule("packet_count must be at least 1"));
        }
        Ok(AttackSchedule {
            attacker_ip,
            attacker_mac,
            targets,
            start,
            inter_packet,
            packet_count,
            payload_bytes: 64,
        })
    }

    pub fn with_payload_bytes(mut self, bytes: u32) -> Self {
        self.payload_bytes = bytes;
        self
    }

    pub fn with_start(mut self, start: SimTime) -> Self {
        self.start = start;
        self
    }

    pub fn attacker_ip(&self) -> IpAddress {
        self.attacker_ip
    }

    pub fn targets(&self) -> &[AttackTarget] {
        &self.targets
    }

    pub fn start(&self) -> SimTime {
        self.start
    }

    pub fn inter_packet(&self) -> SimDuration {
        self.inter_packet
    }

    pub fn packet_count(&self) -> u32 {
        self.packet_count
    }
}

/// Expands a schedule into timed packets: round `r` is sent at
/// `start + r * inter_packet`, visiting targets in order.
pub fn attacker_run(schedule: &AttackSchedule) -> Vec<(SimTime, Packet)> {
    let mut out = Vec::with_capacity(schedule.targets.len() * schedule.packet_count as usize);
    for round in 0..u64::from(schedule.packet_count) {
        let at = schedule.start + schedule.inter_packet * round;
        for (i, target) in schedule.targets.iter().enumerate() {
            let src = NetAddr::new(
                schedule.attacker_ip,
                schedule.attacker_mac,
                ATTACKER_BASE_PORT.wrapping_add(i as u16),
            );
            let dst = NetAddr::new(target.victim_ip, target.victim_mac, target.dst_port);
            out.push((at, Packet::data(src, dst, schedule.payload_bytes)));
        }
    }
    out
}
