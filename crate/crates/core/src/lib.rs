// SPDX-License-Identifier: Apache-2.0

//! Cooperative SDN defense: a flow-switch model, the defending controller,
//! victim and attacker agents, and a deterministic discrete-event harness
//! that measures how quickly an attacker gets blocked across networks.

pub mod agents;
pub mod controller;
pub mod message;
pub mod scenario;
pub mod sim;
pub mod switch;
pub mod time;

pub use agents::{attacker_run, AgentError, AttackSchedule, AttackTarget, DetectorConfig, VictimState};
pub use controller::{ControllerEffect, ControllerError, ControllerId, ControllerState, Notice, RejectReason};
pub use message::{
    FlowAction, FlowEntry, FlowMatch, IpAddress, MacAddress, MessageBody, MessageType, NetAddr, Packet, PacketKind,
    Passcode, PortId, WireMessage,
};
pub use scenario::{ConfigError, ScenarioConfig};
pub use sim::{LatencyProfile, MetricName, MetricRecord, RunOutput, Scenario, SimError, Simulation, Topology};
pub use switch::{FlowRemoved, FlowTable, SwitchEffect, SwitchError, SwitchId, SwitchState};
pub use time::{SimDuration, SimTime};
