// SPDX-License-Identifier: Apache-2.0

use super::addr::{IpAddress, MacAddress, NetAddr};
use super::wire::WireMessage;

/// Ethernet floor; sizes are only used for byte counters.
pub const MIN_PACKET_BYTES: u32 = 64;

/// Ethernet + IPv4 + UDP headers.
const HEADER_BYTES: u32 = 42;
const ARP_BYTES: u32 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PacketKind {
    ArpRequest { target: IpAddress },
    ArpReply { target: IpAddress, mac: MacAddress },
    /// Opaque application data; only the payload length is modelled.
    IpData { len: u32 },
    Control(WireMessage),
}

impl PacketKind {
    pub fn label(&self) -> &'static str {
        match self {
            PacketKind::ArpRequest { .. } => "arp-request",
            PacketKind::ArpReply { .. } => "arp-reply",
            PacketKind::IpData { .. } => "data",
            PacketKind::Control(msg) => msg.msg_type().as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Packet {
    /// Tag assigned by whoever injects the packet; copies keep the tag.
    pub id: u64,
    pub src_ip: IpAddress,
    pub dst_ip: IpAddress,
    pub src_mac: MacAddress,
    pub dst_mac: MacAddress,
    pub src_port: u16,
    pub dst_port: u16,
    pub kind: PacketKind,
    size_bytes: u32,
}

impl Packet {
    pub fn new(src: NetAddr, dst: NetAddr, kind: PacketKind) -> Self {
        let size_bytes = match &kind {
            PacketKind::ArpRequest { .. } | PacketKind::ArpReply { .. } => ARP_BYTES,
            PacketKind::IpData { len } => HEADER_BYTES.saturating_add(*len),
            PacketKind::Control(msg) => HEADER_BYTES + msg.to_line().len() as u32,
        }
        .max(MIN_PACKET_BYTES);
        Packet {
            id: 0,
            src_ip: src.ip,
            dst_ip: dst.ip,
            src_mac: src.mac,
            dst_mac: dst.mac,
            src_port: src.port,
            dst_port: dst.port,
            kind,
            size_bytes,
        }
    }

    pub fn data(src: NetAddr, dst: NetAddr, len: u32) -> Self {
        Packet::new(src, dst, PacketKind::IpData { len })
    }

    pub fn control(src: NetAddr, dst: NetAddr, msg: WireMessage) -> Self {
        Packet::new(src, dst, PacketKind::Control(msg))
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn size_bytes(&self) -> u32 {
        self.size_bytes
    }

    pub fn control_message(&self) -> Option<&WireMessage> {
        match &self.kind {
            PacketKind::Control(msg) => Some(msg),
            _ => None,
        }
    }

    /// Replaces the control payload, keeping addressing and size accounting.
    pub(crate) fn set_control_message(&mut self, msg: WireMessage) {
        if let PacketKind::Control(slot) = &mut self.kind {
            *slot = msg;
        }
    }
}
