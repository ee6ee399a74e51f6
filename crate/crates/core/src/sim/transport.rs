// SPDX-License-Identifier: Apache-2.0

//! Carriers for control messages between victims, controllers and peers.
//!
//! The engine decides when a message arrives; a transport only moves the
//! encoded bytes, so metrics are identical across implementations.

use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use crate::message::{DecodeError, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Controller(usize),
    Host(usize),
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("socket error on {endpoint:?}: {source}")]
    Io {
        endpoint: Endpoint,
        #[source]
        source: io::Error,
    },
    #[error("timed out waiting for a datagram on {0:?}")]
    Timeout(Endpoint),
    #[error("undecodable datagram: {0}")]
    Decode(#[from] DecodeError),
}

pub trait Transport {
    /// Moves `msg` from `from` to `to` and returns what the receiver decoded.
    fn carry(&mut self, from: Endpoint, to: Endpoint, msg: &WireMessage) -> Result<WireMessage, TransportError>;
}

/// Byte-level round trip through the wire codec without any I/O.
#[derive(Debug, Clone, Copy, Default)]
pub struct InMemoryTransport;

impl Transport for InMemoryTransport {
    fn carry(&mut self, _from: Endpoint, _to: Endpoint, msg: &WireMessage) -> Result<WireMessage, TransportError> {
        Ok(WireMessage::decode(&msg.encode())?)
    }
}

/// Loopback UDP sockets, one per endpoint, bound on first use.
///
/// Controller `i` binds `base_port + i` (port 0 for ephemeral ports); hosts
/// always take ephemeral ports.
#[derive(Debug)]
pub struct UdpTransport {
    base_port: u16,
    timeout: Duration,
    sockets: BTreeMap<Endpoint, UdpSocket>,
}

const MAX_DATAGRAM: usize = 512;

impl UdpTransport {
    pub fn new(base_port: u16) -> Self {
        UdpTransport { base_port, timeout: Duration::from_secs(2), sockets: BTreeMap::new() }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn socket(&mut self, endpoint: Endpoint) -> Result<&UdpSocket, TransportError> {
        if !self.sockets.contains_key(&endpoint) {
            let port = match endpoint {
                Endpoint::Controller(i) if self.base_port != 0 => {
                    let offset = u16::try_from(i).ok();
                    offset.and_then(|o| self.base_port.checked_add(o)).ok_or_else(|| TransportError::Io {
                        endpoint,
                        source: io::Error::new(io::ErrorKind::InvalidInput, "controller port out of range"),
                    })?
                }
                _ => 0,
            };
            let io_err = |source| TransportError::Io { endpoint, source };
            let socket = UdpSocket::bind(("127.0.0.1", port)).map_err(io_err)?;
            socket.set_read_timeout(Some(self.timeout)).map_err(io_err)?;
            self.sockets.insert(endpoint, socket);
        }
        Ok(&self.sockets[&endpoint])
    }

    pub fn local_addr(&mut self, endpoint: Endpoint) -> Result<SocketAddr, TransportError> {
        self.socket(endpoint)?
            .local_addr()
            .map_err(|source| TransportError::Io { endpoint, source })
    }
}

impl Transport for UdpTransport {
    fn carry(&mut self, from: Endpoint, to: Endpoint, msg: &WireMessage) -> Result<WireMessage, TransportError> {
        let dest = self.local_addr(to)?;
        let source = self.local_addr(from)?;
        self.socket(from)?
            .send_to(&msg.encode(), dest)
            .map_err(|source| TransportError::Io { endpoint: from, source })?;

        let socket = self.socket(to)?;
        let mut buf = [0u8; MAX_DATAGRAM];
        loop {
            match socket.recv_from(&mut buf) {
                Ok((n, peer)) if peer == source => return Ok(WireMessage::decode(&buf[..n])?),
                Ok(_) => continue,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err(TransportError::Timeout(to));
                }
                Err(source) => return Err(TransportError::Io { endpoint: to, source }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{IpAddress, MessageBody, Passcode};

    fn alert() -> WireMessage {
        WireMessage::new(
            IpAddress::new(10, 0, 1, 5),
            5001,
            520,
            MessageBody::Alert { passcode: Some(Passcode(0xabc)), attacker_ip: IpAddress::new(10, 0, 0, 9) },
        )
    }

    #[test]
    fn memory_round_trip() {
        let msg = alert();
        let got = InMemoryTransport.carry(Endpoint::Host(0), Endpoint::Controller(0), &msg).unwrap();
        assert_eq!(got, msg);
    }

    #[test]
    fn udp_round_trip() {
        let mut t = UdpTransport::new(0);
        let msg = alert();
        assert_eq!(t.carry(Endpoint::Host(0), Endpoint::Controller(0), &msg).unwrap(), msg);
        assert_eq!(t.carry(Endpoint::Controller(0), Endpoint::Controller(1), &msg).unwrap(), msg);
    }
}
