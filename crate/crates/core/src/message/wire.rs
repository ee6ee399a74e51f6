// SPDX-License-Identifier: Apache-2.0

//! Line-oriented text encoding for control messages.
//!
//! One message per line, single-space separated, terminated by `\n`:
//!
//! ```text
//! v<version> <MSG_TYPE> <sender_ip> <sender_port> <timestamp_ms> <passcode_hex|-> [attacker_ip]
//! ```
//!
//! The attacker field is present only for `ALERT` and `PEER_SHARE`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::addr::IpAddress;

pub const PROTOCOL_VERSION: u8 = 1;

/// Registration token issued by a controller, or a peer's pre-shared secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Passcode(pub u64);

impl fmt::Display for Passcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Passcode {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.len() > 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(DecodeError::Malformed { field: "passcode", value: s.to_owned() });
        }
        u64::from_str_radix(s, 16)
            .map(Passcode)
            .map_err(|_| DecodeError::Malformed { field: "passcode", value: s.to_owned() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageType {
    Register,
    RegisterAck,
    Alert,
    PeerShare,
}

impl MessageType {
    pub const ALL: [MessageType; 4] =
        [MessageType::Register, MessageType::RegisterAck, MessageType::Alert, MessageType::PeerShare];

    pub const fn as_str(self) -> &'static str {
        match self {
            MessageType::Register => "REGISTER",
            MessageType::RegisterAck => "REGISTER_ACK",
            MessageType::Alert => "ALERT",
            MessageType::PeerShare => "PEER_SHARE",
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageType {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| DecodeError::UnknownMessageType(s.to_owned()))
    }
}

/// Type-specific content of a [`WireMessage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageBody {
    Register,
    RegisterAck { passcode: Passcode },
    Alert { passcode: Option<Passcode>, attacker_ip: IpAddress },
    PeerShare { passcode: Option<Passcode>, attacker_ip: IpAddress },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireMessage {
    pub protocol_version: u8,
    pub sender_ip: IpAddress,
    pub sender_port: u16,
    pub timestamp_ms: u64,
    pub body: MessageBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("message is not valid UTF-8")]
    NotUtf8,
    #[error("message spans more than one line")]
    MultipleLines,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unexpected trailing field `{0}`")]
    UnexpectedField(String),
    #[error("malformed {field} `{value}`")]
    Malformed { field: &'static str, value: String },
    #[error("unknown message type `{0}`")]
    UnknownMessageType(String),
    #[error("unsupported protocol version `{0}`")]
    UnsupportedVersion(String),
    #[error("{0} must not carry a passcode")]
    UnexpectedPasscode(MessageType),
}

impl WireMessage {
    pub fn new(sender_ip: IpAddress, sender_port: u16, timestamp_ms: u64, body: MessageBody) -> Self {
        WireMessage { protocol_version: PROTOCOL_VERSION, sender_ip, sender_port, timestamp_ms, body }
    }

    pub fn msg_type(&self) -> MessageType {
        match self.body {
            MessageBody::Register => MessageType::Register,
            MessageBody::RegisterAck { .. } => MessageType::RegisterAck,
            MessageBody::Alert { .. } => MessageType::Alert,
            MessageBody::PeerShare { .. } => MessageType::PeerShare,
        }
    }

    pub fn passcode(&self) -> Option<Passcode> {
        match self.body {
            MessageBody::Register => None,
            MessageBody::RegisterAck { passcode } => Some(passcode),
            MessageBody::Alert { passcode, .. } | MessageBody::PeerShare { passcode, .. } => passcode,
        }
    }

    pub fn attacker_ip(&self) -> Option<IpAddress> {
        match self.body {
            MessageBody::Alert { attacker_ip, .. } | MessageBody::PeerShare { attacker_ip, .. } => {
                Some(attacker_ip)
            }
            _ => None,
        }
    }

    /// Canonical line, including the trailing newline.
    pub fn to_line(&self) -> String {
        let passcode = match self.passcode() {
            Some(p) => p.to_string(),
            None => "-".to_owned(),
        };
        let mut line = format!(
            "v{} {} {} {} {} {}",
            self.protocol_version,
            self.msg_type(),
            self.sender_ip,
            self.sender_port,
            self.timestamp_ms,
            passcode
        );
        if let Some(attacker) = self.attacker_ip() {
            line.push(' ');
            line.push_str(&attacker.to_string());
        }
        line.push('\n');
        line
    }

    pub fn encode(&self) -> Vec<u8> {
        self.to_line().into_bytes()
    }

    /// Parses one line. The trailing newline is optional; anything after it
    /// is rejected.
    pub fn decode(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
        let text = std::str::from_utf8(bytes).map_err(|_| DecodeError::NotUtf8)?;
        let line = text.strip_suffix('\n').unwrap_or(text);
        if line.contains(['\n', '\r']) {
            return Err(DecodeError::MultipleLines);
        }
        let mut fields = line.split(' ');
        let mut next = |name: &'static str| match fields.next() {
            Some("") | None => Err(DecodeError::MissingField(name)),
            Some(f) => Ok(f),
        };

        let version = next("protocol_version")?;
        let protocol_version = version
            .strip_prefix('v')
            .and_then(|v| v.parse::<u8>().ok())
            .filter(|&v| v == PROTOCOL_VERSION)
            .ok_or_else(|| DecodeError::UnsupportedVersion(version.to_owned()))?;
        let msg_type: MessageType = next("msg_type")?.parse()?;
        let sender_ip = parse_ip("sender_ip", next("sender_ip")?)?;
        let sender_port = parse_num::<u16>("sender_port", next("sender_port")?)?;
        let timestamp_ms = parse_num::<u64>("timestamp_ms", next("timestamp_ms")?)?;
        let passcode = match next("passcode")? {
            "-" => None,
            hex => Some(hex.parse::<Passcode>()?),
        };

        let body = match msg_type {
            MessageType::Register => {
                if passcode.is_some() {
                    return Err(DecodeError::UnexpectedPasscode(msg_type));
                }
                MessageBody::Register
            }
            MessageType::RegisterAck => MessageBody::RegisterAck {
                passcode: passcode.ok_or(DecodeError::MissingField("passcode"))?,
            },
            MessageType::Alert => MessageBody::Alert {
                passcode,
                attacker_ip: parse_ip("attacker_ip", next("attacker_ip")?)?,
            },
            MessageType::PeerShare => MessageBody::PeerShare {
                passcode,
                attacker_ip: parse_ip("attacker_ip", next("attacker_ip")?)?,
            },
        };
        if let Some(extra) = fields.next() {
            return Err(DecodeError::UnexpectedField(extra.to_owned()));
        }
        Ok(WireMessage { protocol_version, sender_ip, sender_port, timestamp_ms, body })
    }
}

impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_line().trim_end())
    }
}

fn parse_ip(field: &'static str, value: &str) -> Result<IpAddress, DecodeError> {
    value.parse().map_err(|_| DecodeError::Malformed { field, value: value.to_owned() })
}

fn parse_num<T: FromStr>(field: &'static str, value: &str) -> Result<T, DecodeError> {
    // Reject signs and leading zeros so that every accepted number has one spelling.
    let canonical = !value.is_empty()
        && value.bytes().all(|b| b.is_ascii_digit())
        && (value == "0" || !value.starts_with('0'));
    if !canonical {
        return Err(DecodeError::Malformed { field, value: value.to_owned() });
    }
    value.parse().map_err(|_| DecodeError::Malformed { field, value: value.to_owned() })
}
