// SPDX-License-Identifier: Apache-2.0

//! Deterministic simulation harness.

mod engine;
mod event;
mod metrics;
mod profile;
mod topology;
mod trace;
mod transport;

pub use engine::{
    AcceptedAlert, RegistrationOrder, RunOutput, Scenario, SimError, Simulation, DEFAULT_PROBE_TIMEOUT,
    DEFAULT_TIME_LIMIT, PROBE_COOKIE, PROBE_SOURCE,
};
pub use event::{Event, EventKind, EventQueue, Rank};
pub use metrics::{summarize, to_csv, MetricName, MetricRecord, MetricSummary, UnknownMetric, CSV_HEADER};
pub use profile::{LatencyProfile, LinkOverride};
pub use topology::{
    build_topology, AttachmentConfig, AttackerConfig, AttackerNode, ControllerConfig, ControllerNode, HostConfig,
    HostNode, Link, NodeRef, SwitchNode, Topology, TopologyConfig, DEFAULT_AGENT_PORT, DEFAULT_CONTROLLER_PORT,
    DEFAULT_SWITCH_CHANNEL_PORT,
};
pub use trace::{timeline, EventTrace, Milestone, PacketSummary, RuleSummary, TimelineEntry, TraceEvent, TraceRecord};
pub use transport::{Endpoint, InMemoryTransport, Transport, TransportError, UdpTransport};
