// SPDX-License-Identifier: Apache-2.0

//! Addresses, packets, flow rules and the control-message wire format.

mod addr;
mod flow;
mod packet;
mod wire;

pub use addr::{AddrParseError, IpAddress, MacAddress, NetAddr};
pub use flow::{priority, FlowAction, FlowEntry, FlowMatch, PortId};
pub use packet::{Packet, PacketKind, MIN_PACKET_BYTES};
pub use wire::{DecodeError, MessageBody, MessageType, Passcode, WireMessage, PROTOCOL_VERSION};
