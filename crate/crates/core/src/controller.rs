// SPDX-License-Identifier: Apache-2.0

//! Controller state machine.
//!
//! The controller keeps, per connected switch, the set of source addresses it
//! has seen through table-miss packet-ins. That set is the evidence base: an
//! alert from a registered host only leads to a drop rule when the reported
//! attacker has actually crossed the switch. Verified alerts are shared with
//! registered peer controllers, which block the attacker on every switch that
//! has seen it and remember it in a block list for the rest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::message::{
    FlowEntry, IpAddress, MacAddress, MessageBody, MessageType, NetAddr, Packet, PacketKind,
    Passcode, PortId, WireMessage,
};
use crate::switch::SwitchId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControllerId(pub u32);

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "controller#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("{0} is already connected")]
    DuplicateSwitch(SwitchId),
    #[error("{0} is not connected to this controller")]
    UnknownSwitch(SwitchId),
    #[error("no directory entry for destination {0}")]
    UnknownDestination(IpAddress),
    #[error("message from {0} is not from a registered peer")]
    UnverifiedPeer(IpAddress),
    #[error("unexpected {0} message on the peer channel")]
    UnexpectedMessage(MessageType),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Registration {
    pub passcode: Passcode,
    pub registered_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeerInfo {
    pub address: IpAddress,
    pub port: u16,
    pub shared_secret: Passcode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HostLocation {
    pub mac: MacAddress,
    pub switch: SwitchId,
    pub port: PortId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Sender unregistered or passcode mismatch.
    Untrusted,
    /// Attacker never seen on the reporting switch.
    NoEvidence,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Untrusted => "untrusted",
            RejectReason::NoEvidence => "no-evidence",
        })
    }
}

/// Conditions worth logging that do not change the data plane by themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notice {
    HostRegistered { host: IpAddress, passcode: Passcode },
    AlertAccepted { reporter: IpAddress, attacker: IpAddress },
    AlertRejected { reporter: IpAddress, attacker: IpAddress, reason: RejectReason },
    PeerShareAccepted { peer: IpAddress, attacker: IpAddress },
    BlockListed { attacker: IpAddress },
    IgnoredControl { sender: IpAddress, msg_type: MessageType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerEffect {
    /// Reset the switch table to the table-miss entry.
    InitSwitch { switch: SwitchId },
    InstallFlow { switch: SwitchId, entry: FlowEntry },
    /// Emit `packet` on `port` without consulting the flow table.
    PacketOut { switch: SwitchId, port: PortId, packet: Packet },
    SendPeer { peer: ControllerId, message: WireMessage },
    Notice(Notice),
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    pub id: ControllerId,
    addr: NetAddr,
    switches: BTreeSet<SwitchId>,
    seen: BTreeMap<SwitchId, BTreeSet<IpAddress>>,
    block_list: BTreeSet<IpAddress>,
    registered_hosts: BTreeMap<IpAddress, Registration>,
    registered_peers: BTreeMap<ControllerId, PeerInfo>,
    host_directory: BTreeMap<IpAddress, HostLocation>,
    rng: ChaCha8Rng,
    issued: BTreeSet<u64>,
    next_cookie: u64,
}

impl ControllerState {
    /// `addr` is the controller's own address for replies and peer messages.
    pub fn new(id: ControllerId, addr: NetAddr, rng_seed: u64) -> Self {
        ControllerState {
            id,
            addr,
            switches: BTreeSet::new(),
            seen: BTreeMap::new(),
            block_list: BTreeSet::new(),
            registered_hosts: BTreeMap::new(),
            registered_peers: BTreeMap::new(),
            host_directory: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            issued: BTreeSet::new(),
            next_cookie: FlowEntry::MISS_COOKIE + 1,
        }
    }

    pub fn addr(&self) -> NetAddr {
        self.addr
    }

    pub fn switches(&self) -> impl Iterator<Item = SwitchId> + '_ {
        self.switches.iter().copied()
    }

    pub fn block_list(&self) -> &BTreeSet<IpAddress> {
        &self.block_list
    }

    pub fn seen_on(&self, switch: SwitchId) -> Option<&BTreeSet<IpAddress>> {
        self.seen.get(&switch)
    }

    pub fn registration(&self, host: IpAddress) -> Option<&Registration> {
        self.registered_hosts.get(&host)
    }

    pub fn peers(&self) -> impl Iterator<Item = (ControllerId, &PeerInfo)> {
        self.registered_peers.iter().map(|(id, info)| (*id, info))
    }

    pub fn add_host(&mut self, ip: IpAddress, location: HostLocation) {
        self.host_directory.insert(ip, location);
    }

    pub fn register_peer(&mut self, peer: ControllerId, info: PeerInfo) {
        self.registered_peers.insert(peer, info);
    }

    fn allocate_cookie(&mut self) -> u64 {
        let cookie = self.next_cookie;
        self.next_cookie += 1;
        cookie
    }

    pub fn on_switch_connect(&mut self, switch: SwitchId) -> Result<Vec<ControllerEffect>, ControllerError> {
        if self.switches.contains(&switch) {
            return Err(ControllerError::DuplicateSwitch(switch));
        }
        self.seen.insert(switch, BTreeSet::new());
        self.switches.insert(switch);
        Ok(vec![ControllerEffect::InitSwitch { switch }])
    }

    pub fn verify_trusted(&self, sender: IpAddress, passcode: Option<Passcode>) -> bool {
        match (self.registered_hosts.get(&sender), passcode) {
            (Some(reg), Some(presented)) => reg.passcode == presented,
            _ => false,
        }
    }

    pub fn has_evidence(&self, switch: SwitchId, ip: IpAddress) -> Result<bool, ControllerError> {
        self.seen
            .get(&switch)
            .map(|seen| seen.contains(&ip))
            .ok_or(ControllerError::UnknownSwitch(switch))
    }

    /// Draws a fresh token, unique among every token this controller issued.
    pub fn generate_passcode(&mut self) -> Passcode {
        loop {
            let token = self.rng.next_u64();
            if self.issued.insert(token) {
                return Passcode(token);
            }
        }
    }

    /// Handles a packet that hit the table-miss entry on `switch`.
    ///
    /// The source address is recorded as evidence before anything else, so it
    /// persists even when an error is returned.
    pub fn on_packet_in(
        &mut self,
        packet: Packet,
        switch: SwitchId,
        ingress: PortId,
        now: SimTime,
    ) -> Result<Vec<ControllerEffect>, ControllerError> {
        let seen = self.seen.get_mut(&switch).ok_or(ControllerError::UnknownSwitch(switch))?;
        seen.insert(packet.src_ip);

        match &packet.kind {
            PacketKind::Control(msg) => Ok(self.handle_control(&packet, *msg, switch, ingress, now)),
            PacketKind::ArpRequest { target } => {
                let target = *target;
                let location = self
                    .host_directory
                    .get(&target)
                    .ok_or(ControllerError::UnknownDestination(target))?;
                let reply = Packet::new(
                    NetAddr::new(target, location.mac, 0),
                    NetAddr::new(packet.src_ip, packet.src_mac, 0),
                    PacketKind::ArpReply { target, mac: location.mac },
                )
                .with_id(packet.id);
                Ok(vec![ControllerEffect::PacketOut { switch, port: ingress, packet: reply }])
            }
            PacketKind::ArpReply { .. } => Ok(Vec::new()),
            PacketKind::IpData { .. } => self.handle_data(packet, switch),
        }
    }

    fn handle_control(
        &mut self,
        packet: &Packet,
        msg: WireMessage,
        switch: SwitchId,
        ingress: PortId,
        now: SimTime,
    ) -> Vec<ControllerEffect> {
        let sender = packet.src_ip;
        match msg.body {
            MessageBody::Register => {
                let passcode = self.generate_passcode();
                self.registered_hosts.insert(sender, Registration { passcode, registered_at: now });
                let ack = WireMessage::new(
                    self.addr.ip,
                    self.addr.port,
                    now.whole_ms(),
                    MessageBody::RegisterAck { passcode },
                );
                let reply = Packet::control(
                    self.addr,
                    NetAddr::new(sender, packet.src_mac, packet.src_port),
                    ack,
                );
                vec![
                    ControllerEffect::Notice(Notice::HostRegistered { host: sender, passcode }),
                    ControllerEffect::PacketOut { switch, port: ingress, packet: reply },
                ]
            }
            MessageBody::Alert { passcode, attacker_ip } => {
                if !self.verify_trusted(sender, passcode) {
                    return vec![ControllerEffect::Notice(Notice::AlertRejected {
                        reporter: sender,
                        attacker: attacker_ip,
                        reason: RejectReason::Untrusted,
                    })];
                }
                if !self.seen[&switch].contains(&attacker_ip) {
                    return vec![ControllerEffect::Notice(Notice::AlertRejected {
                        reporter: sender,
                        attacker: attacker_ip,
                        reason: RejectReason::NoEvidence,
                    })];
                }
                self.block_list.insert(attacker_ip);
                let cookie = self.allocate_cookie();
                let mut effects = vec![
                    ControllerEffect::Notice(Notice::AlertAccepted { reporter: sender, attacker: attacker_ip }),
                    ControllerEffect::InstallFlow { switch, entry: FlowEntry::drop_source(attacker_ip, cookie) },
                ];
                effects.extend(self.registered_peers.iter().map(|(&peer, info)| {
                    ControllerEffect::SendPeer {
                        peer,
                        message: WireMessage::new(
                            self.addr.ip,
                            self.addr.port,
                            now.whole_ms(),
                            MessageBody::PeerShare {
                                passcode: Some(info.shared_secret),
                                attacker_ip,
                            },
                        ),
                    }
                }));
                effects
            }
            MessageBody::RegisterAck { .. } | MessageBody::PeerShare { .. } => {
                vec![ControllerEffect::Notice(Notice::IgnoredControl {
                    sender,
                    msg_type: msg.msg_type(),
                })]
            }
        }
    }

    fn handle_data(&mut self, packet: Packet, switch: SwitchId) -> Result<Vec<ControllerEffect>, ControllerError> {
        if self.block_list.contains(&packet.src_ip) {
            let cookie = self.allocate_cookie();
            return Ok(vec![ControllerEffect::InstallFlow {
                switch,
                entry: FlowEntry::drop_source(packet.src_ip, cookie),
            }]);
        }
        let location = self
            .host_directory
            .get(&packet.dst_ip)
            .filter(|loc| loc.switch == switch)
            .copied()
            .ok_or(ControllerError::UnknownDestination(packet.dst_ip))?;
        let cookie = self.allocate_cookie();
        Ok(vec![
            ControllerEffect::InstallFlow {
                switch,
                entry: FlowEntry::forward_destination(packet.dst_ip, location.port, cookie),
            },
            ControllerEffect::PacketOut { switch, port: location.port, packet },
        ])
    }

    /// Handles a message arriving on the peer channel.
    pub fn on_peer_message(
        &mut self,
        message: &WireMessage,
        _now: SimTime,
    ) -> Result<Vec<ControllerEffect>, ControllerError> {
        let MessageBody::PeerShare { passcode, attacker_ip } = message.body else {
            return Err(ControllerError::UnexpectedMessage(message.msg_type()));
        };
        let verified = passcode.is_some_and(|presented| {
            self.registered_peers
                .values()
                .any(|peer| peer.address == message.sender_ip && peer.shared_secret == presented)
        });
        if !verified {
            return Err(ControllerError::UnverifiedPeer(message.sender_ip));
        }

        let mut effects = vec![ControllerEffect::Notice(Notice::PeerShareAccepted {
            peer: message.sender_ip,
            attacker: attacker_ip,
        })];
        if self.block_list.insert(attacker_ip) {
            effects.push(ControllerEffect::Notice(Notice::BlockListed { attacker: attacker_ip }));
        }
        let targets: Vec<SwitchId> = self
            .seen
            .iter()
            .filter(|(_, seen)| seen.contains(&attacker_ip))
            .map(|(&switch, _)| switch)
            .collect();
        for switch in targets {
            let cookie = self.allocate_cookie();
            effects.push(ControllerEffect::InstallFlow {
                switch,
                entry: FlowEntry::drop_source(attacker_ip, cookie),
            });
        }
        Ok(effects)
    }
}
