// SPDX-License-Identifier: Apache-2.0

//! Structured event trace and its line-oriented export.

use std::fmt::{self, Write as _};

use crate::controller::RejectReason;
use crate::message::{FlowAction, FlowEntry, FlowMatch, IpAddress, Packet, Passcode, PortId};
use crate::time::{SimDuration, SimTime};

/// The parts of a packet worth recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketSummary {
    pub id: u64,
    pub kind: &'static str,
    pub src: IpAddress,
    pub dst: IpAddress,
    pub dst_port: u16,
}

impl PacketSummary {
    pub fn of(packet: &Packet) -> Self {
        PacketSummary {
            id: packet.id,
            kind: packet.kind.label(),
            src: packet.src_ip,
            dst: packet.dst_ip,
            dst_port: packet.dst_port,
        }
    }

    pub fn is_data(&self) -> bool {
        self.kind == "data"
    }
}

impl fmt::Display for PacketSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pkt={} type={} src={} dst={} dport={}", self.id, self.kind, self.src, self.dst, self.dst_port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSummary {
    pub pattern: FlowMatch,
    pub action: FlowAction,
    pub priority: u16,
    pub cookie: u64,
    pub hard_timeout: SimDuration,
}

impl RuleSummary {
    pub fn of(entry: &FlowEntry) -> Self {
        RuleSummary {
            pattern: entry.pattern,
            action: entry.action,
            priority: entry.priority,
            cookie: entry.cookie,
            hard_timeout: entry.hard_timeout,
        }
    }

    pub fn drops_source(&self, ip: IpAddress) -> bool {
        self.action == FlowAction::Drop && self.pattern.src_ip == Some(ip)
    }
}

impl fmt::Display for RuleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "match={} action={} prio={} cookie={} timeout_us={}",
            self.pattern,
            self.action,
            self.priority,
            self.cookie,
            self.hard_timeout.as_us()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Phase { name: &'static str },
    Connect { switch: String },
    TableInit,
    Send { packet: PacketSummary },
    Ingress { packet: PacketSummary, port: PortId },
    Forward { packet: PacketSummary, port: PortId },
    Drop { packet: PacketSummary, cookie: Option<u64> },
    PacketIn { packet: PacketSummary, switch: String },
    Recv { packet: PacketSummary },
    FlowMod { switch: String, rule: RuleSummary },
    FlowInstalled { rule: RuleSummary },
    FlowRemoved { rule: RuleSummary },
    PacketOut { switch: String, port: PortId, packet: PacketSummary },
    Register,
    Registered { host: IpAddress, passcode: Passcode },
    PasscodeStored { passcode: Passcode },
    Detect { attacker: IpAddress },
    AlertSent { attacker: IpAddress },
    AlertAccepted { reporter: IpAddress, attacker: IpAddress },
    AlertRejected { reporter: IpAddress, attacker: IpAddress, reason: RejectReason },
    AlertSuppressed { attacker: IpAddress },
    ShareSent { peer: String, attacker: IpAddress },
    ShareAccepted { peer: IpAddress, attacker: IpAddress },
    ShareRejected { peer: IpAddress },
    BlockListed { attacker: IpAddress },
    UnknownDestination { packet: PacketSummary },
    Ignored { what: String },
    Lost { what: String },
    Echo { rtt: SimDuration },
    Probe { measured: SimDuration },
}

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceEvent::Phase { .. } => "phase",
            TraceEvent::Connect { .. } => "connect",
            TraceEvent::TableInit => "table-init",
            TraceEvent::Send { .. } => "send",
            TraceEvent::Ingress { .. } => "ingress",
            TraceEvent::Forward { .. } => "forward",
            TraceEvent::Drop { .. } => "drop",
            TraceEvent::PacketIn { .. } => "packet-in",
            TraceEvent::Recv { .. } => "recv",
            TraceEvent::FlowMod { .. } => "flow-mod",
            TraceEvent::FlowInstalled { .. } => "flow-installed",
            TraceEvent::FlowRemoved { .. } => "flow-removed",
            TraceEvent::PacketOut { .. } => "packet-out",
            TraceEvent::Register => "register",
            TraceEvent::Registered { .. } => "registered",
            TraceEvent::PasscodeStored { .. } => "passcode-stored",
            TraceEvent::Detect { .. } => "detect",
            TraceEvent::AlertSent { .. } => "alert-sent",
            TraceEvent::AlertAccepted { .. } => "alert-accepted",
            TraceEvent::AlertRejected { .. } => "alert-rejected",
            TraceEvent::AlertSuppressed { .. } => "alert-suppressed",
            TraceEvent::ShareSent { .. } => "share-sent",
            TraceEvent::ShareAccepted { .. } => "share-accepted",
            TraceEvent::ShareRejected { .. } => "share-rejected",
            TraceEvent::BlockListed { .. } => "block-listed",
            TraceEvent::UnknownDestination { .. } => "unknown-destination",
            TraceEvent::Ignored { .. } => "ignored",
            TraceEvent::Lost { .. } => "lost",
            TraceEvent::Echo { .. } => "echo",
            TraceEvent::Probe { .. } => "probe",
        }
    }

    fn details(&self, out: &mut String) -> fmt::Result {
        match self {
            TraceEvent::Phase { name } => write!(out, "name={name}"),
            TraceEvent::Connect { switch } => write!(out, "switch={switch}"),
            TraceEvent::TableInit | TraceEvent::Register => Ok(()),
            TraceEvent::Send { packet } | TraceEvent::Recv { packet } => write!(out, "{packet}"),
            TraceEvent::Ingress { packet, port } | TraceEvent::Forward { packet, port } => {
                write!(out, "{packet} port={port}")
            }
            TraceEvent::Drop { packet, cookie } => match cookie {
                Some(c) => write!(out, "{packet} cookie={c}"),
                None => write!(out, "{packet} cookie=-"),
            },
            TraceEvent::PacketIn { packet, switch } => write!(out, "switch={switch} {packet}"),
            TraceEvent::FlowMod { switch, rule } => write!(out, "switch={switch} {rule}"),
            TraceEvent::FlowInstalled { rule } | TraceEvent::FlowRemoved { rule } => write!(out, "{rule}"),
            TraceEvent::PacketOut { switch, port, packet } => write!(out, "switch={switch} port={port} {packet}"),
            TraceEvent::Registered { host, passcode } => write!(out, "host={host} passcode={passcode}"),
            TraceEvent::PasscodeStored { passcode } => write!(out, "passcode={passcode}"),
            TraceEvent::Detect { attacker }
            | TraceEvent::AlertSent { attacker }
            | TraceEvent::AlertSuppressed { attacker }
            | TraceEvent::BlockListed { attacker } => write!(out, "attacker={attacker}"),
            TraceEvent::AlertAccepted { reporter, attacker } => write!(out, "reporter={reporter} attacker={attacker}"),
            TraceEvent::AlertRejected { reporter, attacker, reason } => {
                let reason = match reason {
                    RejectReason::Untrusted => "untrusted",
                    RejectReason::NoEvidence => "no-evidence",
                };
                write!(out, "reporter={reporter} attacker={attacker} reason={reason}")
            }
            TraceEvent::ShareSent { peer, attacker } => write!(out, "peer={peer} attacker={attacker}"),
            TraceEvent::ShareAccepted { peer, attacker } => write!(out, "peer={peer} attacker={attacker}"),
            TraceEvent::ShareRejected { peer } => write!(out, "peer={peer}"),
            TraceEvent::UnknownDestination { packet } => write!(out, "{packet}"),
            TraceEvent::Ignored { what } | TraceEvent::Lost { what } => write!(out, "what={what}"),
            TraceEvent::Echo { rtt } => write!(out, "rtt_us={}", rtt.as_us()),
            TraceEvent::Probe { measured } => write!(out, "measured_us={}", measured.as_us()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub at: SimTime,
    pub node: String,
    pub event: TraceEvent,
}

impl TraceRecord {
    /// `<t_us> <node> <event_kind> <details>`, without a trailing newline.
    pub fn to_line(&self) -> String {
        let mut line = format!("{} {} {}", self.at.as_us(), self.node, self.event.kind());
        let mut details = String::new();
        self.event.details(&mut details).expect("writing to a String cannot fail");
        if !details.is_empty() {
            line.push(' ');
            line.push_str(&details);
        }
        line
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTrace {
    records: Vec<TraceRecord>,
}

impl EventTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at: SimTime, node: &str, event: TraceEvent) {
        self.records.push(TraceRecord { at, node: node.to_owned(), event });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    /// Every record on its own line, each terminated by `\n`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&record.to_line());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Milestone {
    Registration,
    FirstPacketIn,
    ForwardInstall,
    Detection,
    Alert,
    AlertAccepted,
    AlertRejected,
    AlertSuppressed,
    DropInstall,
    PeerShare,
    ShareAccepted,
    RemoteDropInstall,
}

impl Milestone {
    pub fn label(self) -> &'static str {
        match self {
            Milestone::Registration => "registration",
            Milestone::FirstPacketIn => "first packet-in",
            Milestone::ForwardInstall => "forward install",
            Milestone::Detection => "detection",
            Milestone::Alert => "ALERT",
            Milestone::AlertAccepted => "alert verified",
            Milestone::AlertRejected => "alert rejected",
            Milestone::AlertSuppressed => "alert suppressed",
            Milestone::DropInstall => "drop install",
            Milestone::PeerShare => "PEER_SHARE",
            Milestone::ShareAccepted => "share verified",
            Milestone::RemoteDropInstall => "remote drop install",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub at: SimTime,
    pub node: String,
    pub milestone: Milestone,
    pub detail: String,
}

impl fmt::Display for TimelineEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>12}  {:<10} {}", self.at.to_string(), self.node, self.milestone.label())?;
        if !self.detail.is_empty() {
            write!(f, "  ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Condenses a trace into the workflow milestones, in trace order.
///
/// `local_switches` names the switches of the controller that accepted the
/// first alert; drop installs elsewhere count as remote.
pub fn timeline(trace: &EventTrace, local_switches: &[String]) -> Vec<TimelineEntry> {
    let mut out = Vec::new();
    let mut seen_packet_in = false;
    let mut push = |r: &TraceRecord, milestone, detail: String| {
        out.push(TimelineEntry { at: r.at, node: r.node.clone(), milestone, detail });
    };
    for r in trace.iter() {
        match &r.event {
            TraceEvent::Registered { host, .. } => push(r, Milestone::Registration, format!("host {host}")),
            TraceEvent::PacketIn { packet, .. } if packet.is_data() && !seen_packet_in => {
                seen_packet_in = true;
                push(r, Milestone::FirstPacketIn, format!("{} -> {}", packet.src, packet.dst));
            }
            TraceEvent::FlowInstalled { rule } if rule.hard_timeout.is_zero() => {
                let milestone = match rule.action {
                    FlowAction::Forward(_) => Milestone::ForwardInstall,
                    FlowAction::Drop if local_switches.contains(&r.node) => Milestone::DropInstall,
                    FlowAction::Drop => Milestone::RemoteDropInstall,
                    _ => continue,
                };
                push(r, milestone, rule.pattern.to_string());
            }
            TraceEvent::Detect { attacker } => push(r, Milestone::Detection, format!("attacker {attacker}")),
            TraceEvent::AlertSent { attacker } => push(r, Milestone::Alert, format!("attacker {attacker}")),
            TraceEvent::AlertAccepted { attacker, .. } => push(r, Milestone::AlertAccepted, format!("attacker {attacker}")),
            TraceEvent::AlertRejected { attacker, reason, .. } => {
                push(r, Milestone::AlertRejected, format!("attacker {attacker}, {reason:?}"))
            }
            TraceEvent::AlertSuppressed { attacker } => push(r, Milestone::AlertSuppressed, format!("attacker {attacker}")),
            TraceEvent::ShareSent { peer, attacker } => push(r, Milestone::PeerShare, format!("to {peer}, attacker {attacker}")),
            TraceEvent::ShareAccepted { attacker, .. } => push(r, Milestone::ShareAccepted, format!("attacker {attacker}")),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{MacAddress, NetAddr};

    #[test]
    fn line_format() {
        let src = NetAddr::new(IpAddress::new(10, 0, 0, 9), MacAddress::local(9), 40000);
        let dst = NetAddr::new(IpAddress::new(10, 0, 1, 5), MacAddress::local(5), 22);
        let packet = Packet::data(src, dst, 10).with_id(3);
        let record = TraceRecord {
            at: SimTime::from_us(1500),
            node: "s1".into(),
            event: TraceEvent::Ingress { packet: PacketSummary::of(&packet), port: PortId(1) },
        };
        assert_eq!(record.to_line(), "1500 s1 ingress pkt=3 type=data src=10.0.0.9 dst=10.0.1.5 dport=22 port=1");

        let bare = TraceRecord { at: SimTime::ZERO, node: "s2".into(), event: TraceEvent::TableInit };
        assert_eq!(bare.to_line(), "0 s2 table-init");
    }

    #[test]
    fn export_terminates_every_line() {
        let mut trace = EventTrace::new();
        trace.push(SimTime::ZERO, "c1", TraceEvent::Phase { name: "connect" });
        trace.push(SimTime::from_ms(1), "v1", TraceEvent::Register);
        assert_eq!(trace.export(), "0 c1 phase name=connect\n1000 v1 register\n");
    }

    #[test]
    fn timeline_classifies_drop_installs() {
        let attacker = IpAddress::new(10, 0, 0, 9);
        let rule = RuleSummary::of(&FlowEntry::drop_source(attacker, 4));
        let mut trace = EventTrace::new();
        trace.push(SimTime::from_ms(5), "s1", TraceEvent::FlowInstalled { rule });
        trace.push(SimTime::from_ms(9), "s2", TraceEvent::FlowInstalled { rule });
        let tl = timeline(&trace, &["s1".to_owned()]);
        let kinds: Vec<_> = tl.iter().map(|e| e.milestone).collect();
        assert_eq!(kinds, vec![Milestone::DropInstall, Milestone::RemoteDropInstall]);
    }
}
