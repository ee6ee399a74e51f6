// SPDX-License-Identifier: Apache-2.0

//! The discrete-event engine.
//!
//! A run proceeds in phases, each executed until no events remain: switches
//! connect, victims register, the attacker sends its schedule, and finally a
//! hard-timeout probe measures flow installation on the alerting switch.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::event::{EventKind, EventQueue, Rank};
use super::metrics::{MetricName, MetricRecord};
use super::profile::LatencyProfile;
use super::topology::{NodeRef, Topology};
use super::trace::{EventTrace, PacketSummary, RuleSummary, TraceEvent};
use super::transport::{Endpoint, InMemoryTransport, Transport, TransportError};
use crate::agents::{attacker_run, AgentError, AttackSchedule, DetectorConfig, VictimState};
use crate::controller::{
    ControllerEffect, ControllerError, ControllerId, ControllerState, HostLocation, Notice, PeerInfo,
};
use crate::message::{
    FlowAction, FlowEntry, FlowMatch, IpAddress, MessageBody, MessageType, Packet, PacketKind,
    Passcode, PortId, WireMessage,
};
use crate::switch::{FlowRemoved, SwitchEffect, SwitchError, SwitchId, SwitchState};
use crate::time::{SimDuration, SimTime};

/// Source address matched by the measurement probe flow.
pub const PROBE_SOURCE: IpAddress = IpAddress::new(192, 0, 2, 254);
pub const PROBE_COOKIE: u64 = u64::MAX;
pub const DEFAULT_PROBE_TIMEOUT: SimDuration = SimDuration::from_ms(1000);
pub const DEFAULT_TIME_LIMIT: SimDuration = SimDuration::from_ms(60_000);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RegistrationOrder {
    #[default]
    BeforeAttack,
    Concurrent,
}

/// Everything a run needs besides its seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub profile: LatencyProfile,
    pub attack: Option<AttackSchedule>,
    pub detector: DetectorConfig,
    pub protected_ports: BTreeSet<u16>,
    pub registration: RegistrationOrder,
    /// Hard timeout of the install probe; `None` skips the probe phase.
    pub probe_timeout: Option<SimDuration>,
    pub time_limit: SimDuration,
}

impl Scenario {
    pub fn new(topology: Topology, profile: LatencyProfile) -> Self {
        Scenario {
            topology,
            profile,
            attack: None,
            detector: DetectorConfig::default(),
            protected_ports: BTreeSet::from([22]),
            registration: RegistrationOrder::default(),
            probe_timeout: Some(DEFAULT_PROBE_TIMEOUT),
            time_limit: DEFAULT_TIME_LIMIT,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("time limit exceeded: next event at {next} is past {limit}")]
    TimeLimitExceeded { next: SimTime, limit: SimTime },
    #[error("probe flow on switch {switch} was not removed within {waited}")]
    ProbeLost { switch: String, waited: SimDuration },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone)]
enum Upstream {
    Connect,
    PacketIn { packet: Packet, ingress: PortId },
    FlowRemoved(FlowRemoved),
    EchoReply { sent: SimTime },
}

#[derive(Debug, Clone)]
enum Downstream {
    Init,
    FlowMod(FlowEntry),
    PacketOut { port: PortId, packet: Packet },
    EchoRequest { sent: SimTime },
}

#[derive(Debug, Clone)]
enum Payload {
    /// Data-plane packet arriving at a node; `port` is the ingress port when
    /// the node is a switch.
    Arrive { to: NodeRef, port: PortId, packet: Packet },
    ToController { controller: usize, switch: usize, msg: Upstream },
    ToSwitch { switch: usize, msg: Downstream },
    Peer { from: usize, to: usize, message: WireMessage, sent_at: SimTime },
    /// Delayed host transmission; `alert` names the attacker being reported.
    HostSend { host: usize, packet: Packet, alert: Option<IpAddress> },
    AttackerSend { packet: Packet },
    Expiry { switch: usize },
}

impl Payload {
    fn kind(&self) -> EventKind {
        match self {
            Payload::Arrive { .. } => EventKind::PacketArrival,
            Payload::ToController { .. } | Payload::ToSwitch { .. } | Payload::Peer { .. } => {
                EventKind::ControlDelivery
            }
            Payload::HostSend { .. } | Payload::AttackerSend { .. } => EventKind::Timer,
            Payload::Expiry { .. } => EventKind::FlowExpiry,
        }
    }
}

/// The first alert a controller accepted; metrics are anchored on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcceptedAlert {
    pub controller: usize,
    pub switch: usize,
    pub attacker: IpAddress,
    pub detected_at: SimTime,
    pub accepted_at: SimTime,
    cookie: u64,
}

#[derive(Debug, Default)]
struct Tracker {
    detected: BTreeMap<u64, SimTime>,
    alert_time: Option<SimDuration>,
    accepted: Option<AcceptedAlert>,
    net1: Option<SimDuration>,
    sharing: Option<SimDuration>,
    net2: Option<SimDuration>,
    install: Option<SimDuration>,
}

#[derive(Debug, Default)]
struct Probe {
    removed_at: Option<SimTime>,
    echo_rtt: Option<SimDuration>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: EventTrace,
    pub metrics: Vec<MetricRecord>,
    pub finished_at: SimTime,
    pub accepted: Option<AcceptedAlert>,
    /// Names of the switches owned by the controller that accepted the first alert.
    pub local_switches: Vec<String>,
}

pub struct Simulation<'a> {
    scenario: &'a Scenario,
    topo: &'a Topology,
    now: SimTime,
    queue: EventQueue<Payload>,
    controllers: Vec<ControllerState>,
    switches: Vec<SwitchState>,
    victims: Vec<Option<VictimState>>,
    trace: EventTrace,
    tracker: Tracker,
    probe: Probe,
    loss: Option<ChaCha8Rng>,
    transport: Box<dyn Transport + 'a>,
    next_packet_id: u64,
    connected: bool,
}

fn switch_id(index: usize) -> SwitchId {
    SwitchId(index as u32)
}

fn corrupt(passcode: Passcode) -> Passcode {
    Passcode(passcode.0 ^ 0x5a5a_5a5a_5a5a_5a5a)
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Result<Self, SimError> {
        let topo = &scenario.topology;
        validate(scenario)?;

        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut controllers: Vec<ControllerState> = topo
            .controllers
            .iter()
            .enumerate()
            .map(|(i, c)| ControllerState::new(ControllerId(i as u32), c.addr, master.next_u64()))
            .collect();
        for (i, j) in &topo.peerings {
            let secret = Passcode(master.next_u64());
            for (me, other) in [(*i, *j), (*j, *i)] {
                let addr = topo.controllers[other].addr;
                controllers[me].register_peer(
                    ControllerId(other as u32),
                    PeerInfo { address: addr.ip, port: addr.port, shared_secret: secret },
                );
            }
        }
        let loss_seed = master.next_u64();
        for host in &topo.hosts {
            let owner = topo.switches[host.switch].controller;
            controllers[owner].add_host(
                host.addr.ip,
                HostLocation { mac: host.addr.mac, switch: switch_id(host.switch), port: host.port },
            );
        }

        let switches = topo
            .switches
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut state = SwitchState::new(switch_id(i));
                for port in s.ports.keys() {
                    state.attach_port(*port);
                }
                state
            })
            .collect();

        let victims = topo
            .hosts
            .iter()
            .map(|h| {
                h.agent.then(|| {
                    let controller = topo.controllers[topo.switches[h.switch].controller].addr;
                    VictimState::new(h.addr, controller, scenario.protected_ports.iter().copied(), scenario.detector)
                })
            })
            .collect();

        let loss = (scenario.profile.loss_probability > 0.0).then(|| ChaCha8Rng::seed_from_u64(loss_seed));

        Ok(Simulation {
            scenario,
            topo,
            now: SimTime::ZERO,
            queue: EventQueue::new(),
            controllers,
            switches,
            victims,
            trace: EventTrace::new(),
            tracker: Tracker::default(),
            probe: Probe::default(),
            loss,
            transport: Box::new(InMemoryTransport),
            next_packet_id: 1,
            connected: false,
        })
    }

    pub fn with_transport(mut self, transport: Box<dyn Transport + 'a>) -> Self {
        self.transport = transport;
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn controller(&self, index: usize) -> &ControllerState {
        &self.controllers[index]
    }

    pub fn switch(&self, index: usize) -> &SwitchState {
        &self.switches[index]
    }

    pub fn victim(&self, host: usize) -> Option<&VictimState> {
        self.victims[host].as_ref()
    }

    pub fn accepted_alert(&self) -> Option<AcceptedAlert> {
        self.tracker.accepted
    }

    /// Runs every phase and collects the trace and metrics.
    pub fn run(mut self, trial: u32) -> Result<RunOutput, SimError> {
        self.connect_switches()?;

        let attack_phase = match self.scenario.registration {
            RegistrationOrder::BeforeAttack => {
                self.phase("registration");
                self.start_registration()?;
                self.run_to_quiescence()?;
                true
            }
            RegistrationOrder::Concurrent => {
                self.phase("registration+attack");
                self.start_registration()?;
                false
            }
        };
        if let Some(schedule) = &self.scenario.attack {
            if attack_phase {
                self.phase("attack");
            }
            self.start_attack(schedule)?;
        }
        self.run_to_quiescence()?;

        if let Some(timeout) = self.scenario.probe_timeout {
            let (controller, switch) = match self.tracker.accepted {
                Some(a) => (a.controller, a.switch),
                None => (0, self.topo.controllers[0].switches[0]),
            };
            self.phase("probe");
            match self.measure_install_time(controller, switch, timeout) {
                Ok(measured) => self.tracker.install = Some(measured),
                Err(SimError::ProbeLost { switch, .. }) => {
                    let node = self.topo.controllers[controller].name.clone();
                    self.trace.push(self.now, &node, TraceEvent::Lost { what: format!("probe on {switch}") });
                }
                Err(e) => return Err(e),
            }
            self.run_to_quiescence()?;
        }

        let t = &self.tracker;
        let metrics = [
            (MetricName::AlertTime, t.alert_time),
            (MetricName::FlowInstallTime, t.install),
            (MetricName::SharingTime, t.sharing),
            (MetricName::TotalTimeNet1, t.net1),
            (MetricName::TotalTimeNet2, t.net2),
        ]
        .into_iter()
        .filter_map(|(name, value)| value.map(|value| MetricRecord { name, trial, value }))
        .collect();

        let local_switches = match t.accepted {
            Some(a) => self.topo.controllers[a.controller]
                .switches
                .iter()
                .map(|&s| self.topo.switches[s].name.clone())
                .collect(),
            None => Vec::new(),
        };
        Ok(RunOutput {
            metrics,
            accepted: t.accepted,
            local_switches,
            finished_at: self.now,
            trace: self.trace,
        })
    }

    /// Connects every switch to its controller and waits for the miss entries.
    pub fn connect_switches(&mut self) -> Result<(), SimError> {
        if self.connected {
            return Ok(());
        }
        self.connected = true;
        self.phase("connect");
        for (si, s) in self.topo.switches.iter().enumerate() {
            self.up(si, s.controller, Upstream::Connect, self.now);
        }
        self.run_to_quiescence()
    }

    /// Hard-timeout measurement of flow installation between `controller`
    /// and one of its switches: the round trip from issuing a timed probe
    /// flow to receiving its removal, minus the timeout and half an echo RTT.
    pub fn measure_install_time(
        &mut self,
        controller: usize,
        switch: usize,
        hard_timeout: SimDuration,
    ) -> Result<SimDuration, SimError> {
        if hard_timeout.is_zero() {
            return Err(SimError::InvalidArgument("probe hard timeout must be positive".into()));
        }
        let owned = self.topo.switches.get(switch).is_some_and(|s| s.controller == controller);
        if !owned || !self.controllers[controller].switches().any(|s| s == switch_id(switch)) {
            return Err(SimError::InvalidArgument(format!(
                "controller {controller} is not connected to switch {switch}"
            )));
        }

        self.probe = Probe::default();
        let issued = self.now;
        let entry = FlowEntry {
            pattern: FlowMatch::src(PROBE_SOURCE),
            action: FlowAction::Drop,
            priority: crate::message::priority::FORWARD,
            hard_timeout,
            installed_at: issued,
            cookie: PROBE_COOKIE,
        };
        self.trace.push(
            issued,
            &self.topo.controllers[controller].name,
            TraceEvent::FlowMod { switch: self.topo.switches[switch].name.clone(), rule: RuleSummary::of(&entry) },
        );
        self.schedule_down(switch, Downstream::FlowMod(entry), issued + self.scenario.profile.switch_install);
        let channel = self.topo.latency(NodeRef::Switch(switch), NodeRef::Controller(controller));
        self.schedule_down(switch, Downstream::EchoRequest { sent: issued }, issued + channel);

        let deadline = issued + SimDuration::from_us(hard_timeout.as_us().saturating_mul(10));
        while self.probe.removed_at.is_none() || self.probe.echo_rtt.is_none() {
            match self.queue.peek_time() {
                Some(t) if t <= deadline => self.step()?,
                _ => {
                    return Err(SimError::ProbeLost {
                        switch: self.topo.switches[switch].name.clone(),
                        waited: deadline.saturating_since(issued),
                    })
                }
            }
        }
        let round_trip = self.probe.removed_at.unwrap().saturating_since(issued);
        let rtt = self.probe.echo_rtt.unwrap();
        let measured = round_trip
            .checked_sub(hard_timeout)
            .and_then(|d| d.checked_sub(rtt.half()))
            .unwrap_or(SimDuration::ZERO);
        self.trace.push(self.now, &self.topo.controllers[controller].name, TraceEvent::Probe { measured });
        Ok(measured)
    }

    fn phase(&mut self, name: &'static str) {
        self.trace.push(self.now, "sim", TraceEvent::Phase { name });
    }

    fn start_registration(&mut self) -> Result<(), SimError> {
        for hi in 0..self.topo.hosts.len() {
            if !self.topo.hosts[hi].register {
                continue;
            }
            let Some(victim) = self.victims[hi].as_mut() else { continue };
            let packet = victim.victim_register(self.now)?;
            let name = &self.topo.hosts[hi].name;
            self.trace.push(self.now, name, TraceEvent::Register);
            self.host_transmit(hi, packet);
        }
        Ok(())
    }

    fn start_attack(&mut self, schedule: &AttackSchedule) -> Result<(), SimError> {
        let base = self.now;
        for (at, packet) in attacker_run(schedule) {
            let at = base + SimDuration::from_us(at.as_us());
            self.queue.push(at, Rank::Normal, Payload::AttackerSend { packet });
        }
        Ok(())
    }

    fn run_to_quiescence(&mut self) -> Result<(), SimError> {
        while !self.queue.is_empty() {
            self.step()?;
        }
        Ok(())
    }

    fn step(&mut self) -> Result<(), SimError> {
        let limit = SimTime::ZERO + self.scenario.time_limit;
        match self.queue.peek_time() {
            Some(next) if next > limit => return Err(SimError::TimeLimitExceeded { next, limit }),
            None => return Ok(()),
            _ => {}
        }
        let event = self.queue.pop().expect("peeked");
        debug_assert!(event.at >= self.now);
        self.now = event.at;
        log::trace!("{} {} seq={}", event.at, event.payload.kind().as_str(), event.seq);
        self.dispatch(event.payload)
    }

    fn lost(&mut self) -> bool {
        let p = self.scenario.profile.loss_probability;
        match &mut self.loss {
            Some(rng) => rng.random_bool(p.clamp(0.0, 1.0)),
            None => false,
        }
    }

    fn fresh_id(&mut self, packet: &mut Packet) {
        if packet.id == 0 {
            packet.id = self.next_packet_id;
            self.next_packet_id += 1;
        }
    }

    fn send_link(&mut self, from: NodeRef, to: NodeRef, port: PortId, packet: Packet, at: SimTime) {
        if self.lost() {
            let name = self.topo.name_of(from).to_owned();
            self.trace.push(self.now, &name, TraceEvent::Lost { what: format!("pkt={} to {}", packet.id, self.topo.name_of(to)) });
            return;
        }
        let arrive = at + self.topo.latency(from, to);
        self.queue.push(arrive, Rank::Normal, Payload::Arrive { to, port, packet });
    }

    fn host_transmit(&mut self, host: usize, mut packet: Packet) {
        self.fresh_id(&mut packet);
        let h = &self.topo.hosts[host];
        self.trace.push(self.now, &h.name, TraceEvent::Send { packet: PacketSummary::of(&packet) });
        self.send_link(NodeRef::Host(host), NodeRef::Switch(h.switch), h.port, packet, self.now);
    }

    fn up(&mut self, switch: usize, controller: usize, msg: Upstream, at: SimTime) {
        if self.lost() {
            let name = self.topo.switches[switch].name.clone();
            self.trace.push(self.now, &name, TraceEvent::Lost { what: "controller-channel message".into() });
            return;
        }
        let arrive = at + self.topo.latency(NodeRef::Switch(switch), NodeRef::Controller(controller));
        self.queue.push(arrive, Rank::Normal, Payload::ToController { controller, switch, msg });
    }

    fn schedule_down(&mut self, switch: usize, msg: Downstream, arrive: SimTime) {
        if self.lost() {
            let name = self.topo.controllers[self.topo.switches[switch].controller].name.clone();
            self.trace.push(self.now, &name, TraceEvent::Lost { what: "switch-channel message".into() });
            return;
        }
        let rank = match msg {
            Downstream::Init | Downstream::FlowMod(_) => Rank::TableUpdate,
            Downstream::PacketOut { .. } | Downstream::EchoRequest { .. } => Rank::Normal,
        };
        self.queue.push(arrive, rank, Payload::ToSwitch { switch, msg });
    }

    fn dispatch(&mut self, payload: Payload) -> Result<(), SimError> {
        match payload {
            Payload::Arrive { to: NodeRef::Switch(si), port, packet } => self.switch_ingress(si, port, packet),
            Payload::Arrive { to: NodeRef::Host(hi), packet, .. } => self.host_receive(hi, packet),
            Payload::Arrive { to: NodeRef::Attacker, packet, .. } => {
                let name = self.topo.name_of(NodeRef::Attacker).to_owned();
                self.trace.push(self.now, &name, TraceEvent::Recv { packet: PacketSummary::of(&packet) });
                Ok(())
            }
            Payload::Arrive { to: NodeRef::Controller(_), .. } => unreachable!("controllers have no data-plane links"),
            Payload::ToController { controller, switch, msg } => self.controller_receive(controller, switch, msg),
            Payload::ToSwitch { switch, msg } => self.switch_command(switch, msg),
            Payload::Peer { from, to, message, sent_at } => self.peer_receive(from, to, message, sent_at),
            Payload::HostSend { host, packet, alert } => {
                if let Some(attacker) = alert {
                    let name = &self.topo.hosts[host].name;
                    self.trace.push(self.now, name, TraceEvent::AlertSent { attacker });
                }
                self.host_transmit(host, packet);
                Ok(())
            }
            Payload::AttackerSend { mut packet } => {
                self.fresh_id(&mut packet);
                let attacker = self.topo.attacker.as_ref().expect("validated");
                let host = self.topo.host_by_ip(packet.dst_ip).expect("validated");
                let switch = self.topo.hosts[host].switch;
                let port = self.topo.attacker_port_on(switch).expect("validated");
                self.trace.push(self.now, &attacker.name, TraceEvent::Send { packet: PacketSummary::of(&packet) });
                self.send_link(NodeRef::Attacker, NodeRef::Switch(switch), port, packet, self.now);
                Ok(())
            }
            Payload::Expiry { switch } => {
                let removed = self.switches[switch].expire_flows(self.now);
                let controller = self.topo.switches[switch].controller;
                for r in removed {
                    let name = &self.topo.switches[switch].name;
                    self.trace.push(self.now, name, TraceEvent::FlowRemoved { rule: RuleSummary::of(&r.entry) });
                    self.up(switch, controller, Upstream::FlowRemoved(r), self.now);
                }
                Ok(())
            }
        }
    }

    fn switch_ingress(&mut self, si: usize, port: PortId, packet: Packet) -> Result<(), SimError> {
        let name = &self.topo.switches[si].name;
        let summary = PacketSummary::of(&packet);
        self.trace.push(self.now, name, TraceEvent::Ingress { packet: summary, port });
        match self.switches[si].process_packet(packet, port, self.now)? {
            SwitchEffect::Deliver { port: out, packet } => self.emit_from_switch(si, out, packet)?,
            SwitchEffect::PacketIn { packet, ingress } => {
                let controller = self.topo.switches[si].controller;
                self.up(si, controller, Upstream::PacketIn { packet, ingress }, self.now);
            }
            SwitchEffect::Dropped { packet, cookie } => {
                self.trace.push(self.now, name, TraceEvent::Drop { packet: PacketSummary::of(&packet), cookie });
            }
        }
        Ok(())
    }

    fn emit_from_switch(&mut self, si: usize, out: PortId, packet: Packet) -> Result<(), SimError> {
        let name = &self.topo.switches[si].name;
        let Some(&node) = self.topo.switches[si].ports.get(&out) else {
            self.trace.push(self.now, name, TraceEvent::Drop { packet: PacketSummary::of(&packet), cookie: None });
            return Ok(());
        };
        self.trace.push(self.now, name, TraceEvent::Forward { packet: PacketSummary::of(&packet), port: out });
        self.send_link(NodeRef::Switch(si), node, PortId::CONTROLLER, packet, self.now);
        Ok(())
    }

    fn switch_command(&mut self, si: usize, msg: Downstream) -> Result<(), SimError> {
        let name = &self.topo.switches[si].name;
        match msg {
            Downstream::Init => {
                self.switches[si].on_controller_connect(self.now);
                self.trace.push(self.now, name, TraceEvent::TableInit);
            }
            Downstream::FlowMod(entry) => {
                self.switches[si].install_flow(entry, self.now);
                let rule = RuleSummary::of(&entry);
                self.trace.push(self.now, name, TraceEvent::FlowInstalled { rule });
                if !entry.hard_timeout.is_zero() {
                    self.queue.push(self.now + entry.hard_timeout, Rank::TableUpdate, Payload::Expiry { switch: si });
                }
                self.note_install(si, &entry);
            }
            Downstream::PacketOut { port, packet } => self.emit_from_switch(si, port, packet)?,
            Downstream::EchoRequest { sent } => {
                let controller = self.topo.switches[si].controller;
                self.up(si, controller, Upstream::EchoReply { sent }, self.now);
            }
        }
        Ok(())
    }

    fn note_install(&mut self, si: usize, entry: &FlowEntry) {
        let Some(accepted) = self.tracker.accepted else { return };
        let owner = self.topo.switches[si].controller;
        if owner == accepted.controller {
            if entry.cookie == accepted.cookie && si == accepted.switch && self.tracker.net1.is_none() {
                self.tracker.net1 = Some(self.now.saturating_since(accepted.detected_at));
            }
        } else if entry.action == FlowAction::Drop
            && entry.pattern.src_ip == Some(accepted.attacker)
            && self.tracker.net2.is_none()
        {
            self.tracker.net2 = Some(self.now.saturating_since(accepted.detected_at));
        }
    }

    fn host_receive(&mut self, hi: usize, packet: Packet) -> Result<(), SimError> {
        let name = &self.topo.hosts[hi].name;
        self.trace.push(self.now, name, TraceEvent::Recv { packet: PacketSummary::of(&packet) });
        let Some(victim) = self.victims[hi].as_mut() else { return Ok(()) };

        if let PacketKind::Control(msg) = &packet.kind {
            let Some(ci) = self.topo.controllers.iter().position(|c| c.addr.ip == msg.sender_ip) else {
                return Ok(());
            };
            let msg = self.transport.carry(Endpoint::Controller(ci), Endpoint::Host(hi), msg)?;
            if victim.on_control(&msg) {
                let passcode = victim.passcode().expect("just stored");
                self.trace.push(self.now, name, TraceEvent::PasscodeStored { passcode });
            }
            return Ok(());
        }

        match victim.victim_on_packet(&packet, self.now) {
            Ok(None) => {}
            Ok(Some(mut alert)) => {
                let attacker = packet.src_ip;
                self.trace.push(self.now, name, TraceEvent::Detect { attacker });
                if self.topo.hosts[hi].corrupt_passcode {
                    let mut msg = *alert.control_message().expect("alert is a control packet");
                    if let MessageBody::Alert { passcode: Some(p), .. } = &mut msg.body {
                        *p = corrupt(*p);
                    }
                    alert.set_control_message(msg);
                }
                self.fresh_id(&mut alert);
                self.tracker.detected.insert(alert.id, self.now);
                let at = self.now + self.scenario.profile.victim_detect;
                let send = Payload::HostSend { host: hi, packet: alert, alert: Some(attacker) };
                self.queue.push(at, Rank::Normal, send);
            }
            Err(AgentError::NotRegistered { attacker }) => {
                self.trace.push(self.now, name, TraceEvent::Detect { attacker });
                self.trace.push(self.now, name, TraceEvent::AlertSuppressed { attacker });
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn controller_receive(&mut self, ci: usize, si: usize, msg: Upstream) -> Result<(), SimError> {
        let name = &self.topo.controllers[ci].name;
        match msg {
            Upstream::Connect => {
                self.trace.push(self.now, name, TraceEvent::Connect { switch: self.topo.switches[si].name.clone() });
                let effects = self.controllers[ci].on_switch_connect(switch_id(si))?;
                self.apply_effects(ci, effects, None)
            }
            Upstream::PacketIn { mut packet, ingress } => {
                let switch = self.topo.switches[si].name.clone();
                self.trace.push(self.now, name, TraceEvent::PacketIn { packet: PacketSummary::of(&packet), switch });
                if let PacketKind::Control(msg) = &packet.kind {
                    if let Some(hi) = self.topo.host_by_ip(packet.src_ip) {
                        let carried = self.transport.carry(Endpoint::Host(hi), Endpoint::Controller(ci), msg)?;
                        packet.set_control_message(carried);
                    }
                    if packet.control_message().map(WireMessage::msg_type) == Some(MessageType::Alert)
                        && self.tracker.alert_time.is_none()
                    {
                        if let Some(&detected) = self.tracker.detected.get(&packet.id) {
                            self.tracker.alert_time = Some(self.now.saturating_since(detected));
                        }
                    }
                }
                let id = packet.id;
                let summary = PacketSummary::of(&packet);
                match self.controllers[ci].on_packet_in(packet, switch_id(si), ingress, self.now) {
                    Ok(effects) => self.apply_effects(ci, effects, Some((si, id))),
                    Err(ControllerError::UnknownDestination(_)) => {
                        self.trace.push(self.now, name, TraceEvent::UnknownDestination { packet: summary });
                        Ok(())
                    }
                    Err(e) => Err(e.into()),
                }
            }
            Upstream::FlowRemoved(removed) => {
                if removed.entry.cookie == PROBE_COOKIE && removed.entry.pattern == FlowMatch::src(PROBE_SOURCE) {
                    self.probe.removed_at = Some(self.now);
                }
                self.trace.push(self.now, name, TraceEvent::FlowRemoved { rule: RuleSummary::of(&removed.entry) });
                Ok(())
            }
            Upstream::EchoReply { sent } => {
                let rtt = self.now.saturating_since(sent);
                self.probe.echo_rtt = Some(rtt);
                self.trace.push(self.now, name, TraceEvent::Echo { rtt });
                Ok(())
            }
        }
    }

    fn peer_receive(&mut self, from: usize, to: usize, message: WireMessage, sent_at: SimTime) -> Result<(), SimError> {
        let message = self.transport.carry(Endpoint::Controller(from), Endpoint::Controller(to), &message)?;
        match self.controllers[to].on_peer_message(&message, self.now) {
            Ok(effects) => {
                if let (Some(accepted), Some(attacker)) = (self.tracker.accepted, message.attacker_ip()) {
                    if attacker == accepted.attacker && self.tracker.sharing.is_none() {
                        self.tracker.sharing = Some(self.now.saturating_since(sent_at));
                    }
                }
                self.apply_effects(to, effects, None)
            }
            Err(ControllerError::UnverifiedPeer(peer)) => {
                let name = &self.topo.controllers[to].name;
                self.trace.push(self.now, name, TraceEvent::ShareRejected { peer });
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    /// `origin` is the switch and packet id of the packet-in being handled.
    fn apply_effects(
        &mut self,
        ci: usize,
        effects: Vec<ControllerEffect>,
        origin: Option<(usize, u64)>,
    ) -> Result<(), SimError> {
        let base = self.now + self.scenario.profile.controller_handle;
        let name = self.topo.controllers[ci].name.clone();
        let mut accepting = false;
        for effect in effects {
            match effect {
                ControllerEffect::InitSwitch { switch } => {
                    let si = switch.0 as usize;
                    let arrive = base + self.topo.latency(NodeRef::Switch(si), NodeRef::Controller(ci));
                    self.schedule_down(si, Downstream::Init, arrive);
                }
                ControllerEffect::InstallFlow { switch, entry } => {
                    let si = switch.0 as usize;
                    if accepting {
                        accepting = false;
                        if let Some((origin_switch, id)) = origin {
                            let detected_at = self.tracker.detected.get(&id).copied().unwrap_or(self.now);
                            self.tracker.accepted = Some(AcceptedAlert {
                                controller: ci,
                                switch: origin_switch,
                                attacker: entry.pattern.src_ip.expect("drop rules match a source"),
                                detected_at,
                                accepted_at: self.now,
                                cookie: entry.cookie,
                            });
                        }
                    }
                    let rule = RuleSummary::of(&entry);
                    self.trace.push(self.now, &name, TraceEvent::FlowMod { switch: self.topo.switches[si].name.clone(), rule });
                    self.schedule_down(si, Downstream::FlowMod(entry), base + self.scenario.profile.switch_install);
                }
                ControllerEffect::PacketOut { switch, port, mut packet } => {
                    let si = switch.0 as usize;
                    self.fresh_id(&mut packet);
                    self.trace.push(
                        self.now,
                        &name,
                        TraceEvent::PacketOut {
                            switch: self.topo.switches[si].name.clone(),
                            port,
                            packet: PacketSummary::of(&packet),
                        },
                    );
                    let arrive = base + self.topo.latency(NodeRef::Switch(si), NodeRef::Controller(ci));
                    self.schedule_down(si, Downstream::PacketOut { port, packet }, arrive);
                }
                ControllerEffect::SendPeer { peer, message } => {
                    let to = peer.0 as usize;
                    let attacker = message.attacker_ip().expect("peer shares name an attacker");
                    self.trace.push(
                        self.now,
                        &name,
                        TraceEvent::ShareSent { peer: self.topo.controllers[to].name.clone(), attacker },
                    );
                    if self.lost() {
                        self.trace.push(self.now, &name, TraceEvent::Lost { what: "peer share".into() });
                        continue;
                    }
                    let arrive = base + self.topo.latency(NodeRef::Controller(ci), NodeRef::Controller(to));
                    self.queue.push(arrive, Rank::Normal, Payload::Peer { from: ci, to, message, sent_at: base });
                }
                ControllerEffect::Notice(notice) => {
                    let event = match notice {
                        Notice::HostRegistered { host, passcode } => TraceEvent::Registered { host, passcode },
                        Notice::AlertAccepted { reporter, attacker } => {
                            accepting = self.tracker.accepted.is_none();
                            TraceEvent::AlertAccepted { reporter, attacker }
                        }
                        Notice::AlertRejected { reporter, attacker, reason } => {
                            TraceEvent::AlertRejected { reporter, attacker, reason }
                        }
                        Notice::PeerShareAccepted { peer, attacker } => TraceEvent::ShareAccepted { peer, attacker },
                        Notice::BlockListed { attacker } => TraceEvent::BlockListed { attacker },
                        Notice::IgnoredControl { sender, msg_type } => {
                            TraceEvent::Ignored { what: format!("{msg_type} from {sender}") }
                        }
                    };
                    self.trace.push(self.now, &name, event);
                }
            }
        }
        Ok(())
    }
}

fn validate(scenario: &Scenario) -> Result<(), SimError> {
    let topo = &scenario.topology;
    if topo.controllers.is_empty() {
        return Err(SimError::InvalidScenario("no controllers".into()));
    }
    if scenario.time_limit.is_zero() {
        return Err(SimError::InvalidScenario("time limit must be positive".into()));
    }
    let p = scenario.profile.loss_probability;
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::InvalidScenario(format!("loss probability {p} is outside [0, 1]")));
    }
    let Some(schedule) = &scenario.attack else { return Ok(()) };
    let Some(attacker) = &topo.attacker else {
        return Err(SimError::InvalidScenario("attack schedule without an attacker node".into()));
    };
    if schedule.attacker_ip() != attacker.ip {
        return Err(SimError::InvalidScenario(format!(
            "schedule source {} differs from attacker address {}",
            schedule.attacker_ip(),
            attacker.ip
        )));
    }
    for target in schedule.targets() {
        let host = topo
            .host_by_ip(target.victim_ip)
            .ok_or_else(|| SimError::InvalidScenario(format!("attack target {} is not a host", target.victim_ip)))?;
        let switch = topo.hosts[host].switch;
        if topo.attacker_port_on(switch).is_none() {
            return Err(SimError::InvalidScenario(format!(
                "attacker is not attached to {}, the switch of {}",
                topo.switches[switch].name, target.victim_ip
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AttackTarget;
    use crate::scenario::presets;
    use crate::sim::topology::build_topology;

    fn fig3(profile: LatencyProfile) -> Scenario {
        let topo = build_topology(&presets::topology("geni-fig3").unwrap(), &profile).unwrap();
        let attacker = topo.attacker.clone().unwrap();
        let targets = topo
            .hosts
            .iter()
            .map(|h| AttackTarget { victim_ip: h.addr.ip, victim_mac: h.addr.mac, dst_port: 22 })
            .collect();
        let schedule = AttackSchedule::new(
            attacker.ip,
            attacker.mac,
            targets,
            SimTime::ZERO,
            SimDuration::from_ms(100),
            20,
        )
        .unwrap();
        let mut scenario = Scenario::new(topo, profile);
        scenario.attack = Some(schedule);
        scenario
    }

    fn metric(out: &RunOutput, name: MetricName) -> SimDuration {
        out.metrics.iter().find(|m| m.name == name).unwrap_or_else(|| panic!("{name} missing")).value
    }

    #[test]
    fn geni_profile_metrics() {
        let scenario = fig3(LatencyProfile::geni());
        let out = Simulation::new(&scenario, 1).unwrap().run(0).unwrap();
        assert_eq!(metric(&out, MetricName::AlertTime), SimDuration::from_ms(520));
        assert_eq!(metric(&out, MetricName::FlowInstallTime), SimDuration::from_ms(46));
        assert_eq!(metric(&out, MetricName::SharingTime), SimDuration::from_ms(436));
        assert_eq!(metric(&out, MetricName::TotalTimeNet1), SimDuration::from_ms(566));
        assert_eq!(metric(&out, MetricName::TotalTimeNet2), SimDuration::from_ms(1002));
    }

    #[test]
    fn zero_profile_blocks_everywhere_at_time_zero() {
        let scenario = fig3(LatencyProfile::zero());
        let out = Simulation::new(&scenario, 1).unwrap().run(0).unwrap();
        let attacker = scenario.topology.attacker.as_ref().unwrap().ip;
        let drops: Vec<_> = out
            .trace
            .iter()
            .filter(|r| matches!(&r.event, TraceEvent::FlowInstalled { rule } if rule.drops_source(attacker)))
            .collect();
        let nodes: BTreeSet<_> = drops.iter().map(|r| r.node.as_str()).collect();
        assert_eq!(nodes, BTreeSet::from(["s1", "s2"]));
        assert!(drops.iter().all(|r| r.at == SimTime::ZERO));
        assert_eq!(metric(&out, MetricName::TotalTimeNet2), SimDuration::ZERO);
    }

    #[test]
    fn same_seed_same_trace() {
        let scenario = fig3(LatencyProfile::geni());
        let a = Simulation::new(&scenario, 7).unwrap().run(0).unwrap();
        let b = Simulation::new(&scenario, 7).unwrap().run(0).unwrap();
        assert_eq!(a.trace.export(), b.trace.export());
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn install_measurement_example() {
        let mut profile = LatencyProfile::zero();
        profile.controller_link = SimDuration::from_ms(5);
        profile.switch_install = SimDuration::from_ms(46);
        let scenario = fig3(profile);
        let mut sim = Simulation::new(&scenario, 3).unwrap();
        sim.connect_switches().unwrap();
        let t0 = sim.now();
        let measured = sim.measure_install_time(0, 0, SimDuration::from_ms(1000)).unwrap();
        assert_eq!(measured, SimDuration::from_ms(46));
        let removed = sim
            .trace()
            .iter()
            .find(|r| r.node == "c1" && matches!(r.event, TraceEvent::FlowRemoved { .. }))
            .unwrap();
        assert_eq!(removed.at, t0 + SimDuration::from_ms(46 + 1000 + 5));
    }

    #[test]
    fn probe_preconditions() {
        let scenario = fig3(LatencyProfile::zero());
        let mut sim = Simulation::new(&scenario, 3).unwrap();
        assert!(matches!(sim.measure_install_time(0, 0, SimDuration::from_ms(10)), Err(SimError::InvalidArgument(_))));
        sim.connect_switches().unwrap();
        assert!(matches!(sim.measure_install_time(0, 1, SimDuration::from_ms(10)), Err(SimError::InvalidArgument(_))));
        assert!(matches!(sim.measure_install_time(0, 0, SimDuration::ZERO), Err(SimError::InvalidArgument(_))));
    }

    #[test]
    fn slow_install_loses_probe() {
        let mut profile = LatencyProfile::zero();
        profile.switch_install = SimDuration::from_ms(500);
        let scenario = fig3(profile);
        let mut sim = Simulation::new(&scenario, 3).unwrap();
        sim.connect_switches().unwrap();
        let err = sim.measure_install_time(0, 0, SimDuration::from_ms(10)).unwrap_err();
        assert!(matches!(err, SimError::ProbeLost { .. }), "{err}");
    }

    #[test]
    fn time_limit_is_enforced() {
        let mut scenario = fig3(LatencyProfile::geni());
        scenario.time_limit = SimDuration::from_ms(700);
        let err = Simulation::new(&scenario, 1).unwrap().run(0).unwrap_err();
        assert!(matches!(err, SimError::TimeLimitExceeded { .. }));
    }

    #[test]
    fn wrong_passcode_blocks_nothing() {
        let mut scenario = fig3(LatencyProfile::geni());
        scenario.topology.hosts[0].corrupt_passcode = true;
        let out = Simulation::new(&scenario, 1).unwrap().run(0).unwrap();
        assert!(out.accepted.is_none());
        assert!(out.trace.iter().any(|r| matches!(r.event, TraceEvent::AlertRejected { .. })));
        assert!(!out
            .trace
            .iter()
            .any(|r| matches!(&r.event, TraceEvent::FlowInstalled { rule } if rule.action == FlowAction::Drop && rule.hard_timeout.is_zero())));
        assert!(out.metrics.iter().all(|m| matches!(m.name, MetricName::AlertTime | MetricName::FlowInstallTime)));
    }

    #[test]
    fn unregistered_victim_suppresses_alert() {
        let mut scenario = fig3(LatencyProfile::zero());
        scenario.topology.hosts[0].register = false;
        let out = Simulation::new(&scenario, 1).unwrap().run(0).unwrap();
        assert!(out.trace.iter().any(|r| matches!(r.event, TraceEvent::AlertSuppressed { .. })));
        assert!(!out.trace.iter().any(|r| matches!(r.event, TraceEvent::AlertSent { .. })));
    }

    #[test]
    fn loss_model_is_seeded() {
        let mut profile = LatencyProfile::geni();
        profile.loss_probability = 0.2;
        let scenario = fig3(profile);
        let a = Simulation::new(&scenario, 11).unwrap().run(0).map(|o| o.trace.export());
        let b = Simulation::new(&scenario, 11).unwrap().run(0).map(|o| o.trace.export());
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a, b),
            (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
            _ => panic!("runs diverged"),
        }
    }
}
