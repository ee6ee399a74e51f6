// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use super::addr::IpAddress;
use super::packet::Packet;
use crate::time::{SimDuration, SimTime};

/// A switch port. Port 0 is reserved for the controller channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortId(pub u16);

impl PortId {
    pub const CONTROLLER: PortId = PortId(0);
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Priority bands. Drop rules always beat forwarding rules, which beat the
/// table-miss entry.
pub mod priority {
    pub const TABLE_MISS: u16 = 0;
    pub const FORWARD: u16 = 100;
    pub const DROP: u16 = 200;
}

/// Match on source and/or destination address. Absent fields are wildcards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowMatch {
    pub src_ip: Option<IpAddress>,
    pub dst_ip: Option<IpAddress>,
}

impl FlowMatch {
    pub const ANY: FlowMatch = FlowMatch { src_ip: None, dst_ip: None };

    pub const fn src(ip: IpAddress) -> Self {
        FlowMatch { src_ip: Some(ip), dst_ip: None }
    }

    pub const fn dst(ip: IpAddress) -> Self {
        FlowMatch { src_ip: None, dst_ip: Some(ip) }
    }

    pub fn is_wildcard(&self) -> bool {
        self.src_ip.is_none() && self.dst_ip.is_none()
    }

    pub fn matches(&self, packet: &Packet) -> bool {
        self.src_ip.is_none_or(|ip| ip == packet.src_ip)
            && self.dst_ip.is_none_or(|ip| ip == packet.dst_ip)
    }

    /// True if every field present in `self` is present in `other` with the
    /// same value, so anything `other` matches is matched by `self` too.
    pub fn generalizes(&self, other: &FlowMatch) -> bool {
        self.src_ip.is_none_or(|ip| other.src_ip == Some(ip))
            && self.dst_ip.is_none_or(|ip| other.dst_ip == Some(ip))
    }
}

impl fmt::Display for FlowMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.src_ip, self.dst_ip) {
            (None, None) => f.write_str("*"),
            (Some(s), None) => write!(f, "src={s}"),
            (None, Some(d)) => write!(f, "dst={d}"),
            (Some(s), Some(d)) => write!(f, "src={s},dst={d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowAction {
    Forward(PortId),
    Drop,
    SendToController,
}

impl fmt::Display for FlowAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowAction::Forward(port) => write!(f, "forward:{port}"),
            FlowAction::Drop => f.write_str("drop"),
            FlowAction::SendToController => f.write_str("controller"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowEntry {
    pub pattern: FlowMatch,
    pub action: FlowAction,
    pub priority: u16,
    /// Zero means the entry never expires.
    pub hard_timeout: SimDuration,
    /// Overwritten by the switch when the entry is installed.
    pub installed_at: SimTime,
    pub cookie: u64,
}

impl FlowEntry {
    pub const MISS_COOKIE: u64 = 0;

    pub fn table_miss() -> Self {
        FlowEntry {
            pattern: FlowMatch::ANY,
            action: FlowAction::SendToController,
            priority: priority::TABLE_MISS,
            hard_timeout: SimDuration::ZERO,
            installed_at: SimTime::ZERO,
            cookie: Self::MISS_COOKIE,
        }
    }

    pub fn drop_source(ip: IpAddress, cookie: u64) -> Self {
        FlowEntry {
            pattern: FlowMatch::src(ip),
            action: FlowAction::Drop,
            priority: priority::DROP,
            hard_timeout: SimDuration::ZERO,
            installed_at: SimTime::ZERO,
            cookie,
        }
    }

    pub fn forward_destination(ip: IpAddress, port: PortId, cookie: u64) -> Self {
        FlowEntry {
            pattern: FlowMatch::dst(ip),
            action: FlowAction::Forward(port),
            priority: priority::FORWARD,
            hard_timeout: SimDuration::ZERO,
            installed_at: SimTime::ZERO,
            cookie,
        }
    }

    pub fn with_hard_timeout(mut self, timeout: SimDuration) -> Self {
        self.hard_timeout = timeout;
        self
    }

    pub fn is_table_miss(&self) -> bool {
        self.pattern.is_wildcard()
            && self.priority == priority::TABLE_MISS
            && self.action == FlowAction::SendToController
    }

    pub fn expires_at(&self) -> Option<SimTime> {
        (!self.hard_timeout.is_zero()).then(|| self.installed_at + self.hard_timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{MacAddress, NetAddr};
    use proptest::prelude::*;

    const ATTACKER: IpAddress = IpAddress::new(10, 0, 0, 9);
    const VICTIM1: IpAddress = IpAddress::new(10, 0, 1, 5);

    fn packet(src: IpAddress, dst: IpAddress) -> Packet {
        Packet::data(
            NetAddr::new(src, MacAddress::local(src.to_bits()), 40000),
            NetAddr::new(dst, MacAddress::local(dst.to_bits()), 22),
            100,
        )
    }

    #[test]
    fn matching_examples() {
        assert!(FlowMatch::src(ATTACKER).matches(&packet(ATTACKER, VICTIM1)));
        assert!(FlowMatch::ANY.matches(&packet(ATTACKER, VICTIM1)));
        assert!(!FlowMatch::dst(IpAddress::new(10, 0, 2, 5)).matches(&packet(ATTACKER, VICTIM1)));
        let both = FlowMatch { src_ip: Some(ATTACKER), dst_ip: Some(VICTIM1) };
        assert!(both.matches(&packet(ATTACKER, VICTIM1)));
        assert!(!both.matches(&packet(VICTIM1, ATTACKER)));
    }

    #[test]
    fn expiry_instant() {
        let mut entry = FlowEntry::drop_source(ATTACKER, 1);
        assert_eq!(entry.expires_at(), None);
        entry = entry.with_hard_timeout(SimDuration::from_ms(1000));
        entry.installed_at = SimTime::from_ms(5000);
        assert_eq!(entry.expires_at(), Some(SimTime::from_ms(6000)));
        assert!(FlowEntry::table_miss().is_table_miss());
    }

    fn small_ip() -> impl Strategy<Value = IpAddress> {
        (0u8..4).prop_map(|d| IpAddress::new(10, 0, 0, d))
    }

    fn arb_match() -> impl Strategy<Value = FlowMatch> {
        (proptest::option::of(small_ip()), proptest::option::of(small_ip()))
            .prop_map(|(src_ip, dst_ip)| FlowMatch { src_ip, dst_ip })
    }

    proptest! {
        #[test]
        fn wildcard_matches_everything(src in any::<u32>(), dst in any::<u32>()) {
            let p = packet(IpAddress::from_bits(src), IpAddress::from_bits(dst));
            prop_assert!(FlowMatch::ANY.matches(&p));
        }

        #[test]
        fn fewer_fields_match_more(a in arb_match(), b in arb_match(), src in small_ip(), dst in small_ip()) {
            let p = packet(src, dst);
            if a.generalizes(&b) && b.matches(&p) {
                prop_assert!(a.matches(&p));
            }
        }
    }
}
