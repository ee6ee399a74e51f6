// SPDX-License-Identifier: Apache-2.0

//! Simulated programmable switch with a single priority flow table.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::message::{FlowAction, FlowEntry, FlowMatch, Packet, PortId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub u32);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "switch#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwitchError {
    #[error("{0} has no table-miss entry; the controller has not initialized it")]
    NoMissEntry(SwitchId),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounters {
    pub packets: u64,
    pub bytes: u64,
}

/// Notification that a timed entry left the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowRemoved {
    pub entry: FlowEntry,
    /// Exactly `installed_at + hard_timeout`, regardless of when the switch
    /// noticed.
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchEffect {
    Deliver { port: PortId, packet: Packet },
    PacketIn { packet: Packet, ingress: PortId },
    Dropped { packet: Packet, cookie: Option<u64> },
}

#[derive(Debug, Clone)]
struct Slot {
    entry: FlowEntry,
    counters: FlowCounters,
}

impl Slot {
    /// Sort key: higher priority first, then most recently installed, then
    /// lowest cookie. Entries with equal keys keep the newest install first.
    fn precedence(&self) -> (Reverse<u16>, Reverse<SimTime>, u64) {
        (Reverse(self.entry.priority), Reverse(self.entry.installed_at), self.entry.cookie)
    }
}

/// Entries are kept sorted by precedence so lookup returns the first match.
#[derive(Debug, Clone, Default)]
pub struct FlowTable {
    slots: Vec<Slot>,
}

impl FlowTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }

    pub fn entries(&self) -> impl Iterator<Item = &FlowEntry> {
        self.slots.iter().map(|s| &s.entry)
    }

    pub fn counters(&self, pattern: &FlowMatch, priority: u16) -> Option<FlowCounters> {
        self.position(pattern, priority).map(|i| self.slots[i].counters)
    }

    fn position(&self, pattern: &FlowMatch, priority: u16) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.entry.priority == priority && s.entry.pattern == *pattern)
    }

    /// Inserts `entry` stamped with `now`, replacing any entry with the same
    /// match and priority. Returns the replaced entry.
    pub fn install(&mut self, mut entry: FlowEntry, now: SimTime) -> Option<FlowEntry> {
        entry.installed_at = now;
        let replaced = self
            .position(&entry.pattern, entry.priority)
            .map(|i| self.slots.remove(i).entry);
        let slot = Slot { entry, counters: FlowCounters::default() };
        let key = slot.precedence();
        let at = self.slots.partition_point(|s| s.precedence() < key);
        self.slots.insert(at, slot);
        replaced
    }

    pub fn lookup(&self, packet: &Packet) -> Option<&FlowEntry> {
        self.lookup_index(packet).map(|i| &self.slots[i].entry)
    }

    fn lookup_index(&self, packet: &Packet) -> Option<usize> {
        self.slots.iter().position(|s| s.entry.pattern.matches(packet))
    }

    /// Removes every timed entry whose deadline is at or before `now`.
    pub fn expire(&mut self, now: SimTime) -> Vec<FlowRemoved> {
        let mut removed = Vec::new();
        self.slots.retain(|slot| match slot.entry.expires_at() {
            Some(at) if at <= now => {
                removed.push(FlowRemoved { entry: slot.entry, at });
                false
            }
            _ => true,
        });
        removed.sort_by_key(|r| (r.at, r.entry.cookie));
        removed
    }

    /// Earliest pending hard-timeout deadline.
    pub fn next_expiry(&self) -> Option<SimTime> {
        self.slots.iter().filter_map(|s| s.entry.expires_at()).min()
    }
}

#[derive(Debug, Clone)]
pub struct SwitchState {
    pub id: SwitchId,
    table: FlowTable,
    ports: BTreeSet<PortId>,
}

impl SwitchState {
    pub fn new(id: SwitchId) -> Self {
        SwitchState { id, table: FlowTable::new(), ports: BTreeSet::new() }
    }

    pub fn attach_port(&mut self, port: PortId) {
        self.ports.insert(port);
    }

    pub fn ports(&self) -> impl Iterator<Item = PortId> + '_ {
        self.ports.iter().copied()
    }

    pub fn table(&self) -> &FlowTable {
        &self.table
    }

    pub fn is_initialized(&self) -> bool {
        self.table.entries().any(FlowEntry::is_table_miss)
    }

    /// Resets the table to a single table-miss entry.
    pub fn on_controller_connect(&mut self, now: SimTime) {
        self.table.clear();
        self.table.install(FlowEntry::table_miss(), now);
    }

    pub fn lookup(&self, packet: &Packet) -> Result<&FlowEntry, SwitchError> {
        if !self.is_initialized() {
            return Err(SwitchError::NoMissEntry(self.id));
        }
        self.table.lookup(packet).ok_or(SwitchError::NoMissEntry(self.id))
    }

    pub fn install_flow(&mut self, entry: FlowEntry, now: SimTime) -> Option<FlowEntry> {
        self.table.install(entry, now)
    }

    pub fn expire_flows(&mut self, now: SimTime) -> Vec<FlowRemoved> {
        self.table.expire(now)
    }

    /// Applies the action of the highest-precedence matching entry.
    pub fn process_packet(
        &mut self,
        packet: Packet,
        ingress: PortId,
        _now: SimTime,
    ) -> Result<SwitchEffect, SwitchError> {
        if !self.is_initialized() {
            return Err(SwitchError::NoMissEntry(self.id));
        }
        let index = self.table.lookup_index(&packet).ok_or(SwitchError::NoMissEntry(self.id))?;
        let slot = &mut self.table.slots[index];
        slot.counters.packets += 1;
        slot.counters.bytes += u64::from(packet.size_bytes());
        let cookie = slot.entry.cookie;
        Ok(match slot.entry.action {
            FlowAction::Forward(port) if self.ports.contains(&port) && port != ingress => {
                SwitchEffect::Deliver { port, packet }
            }
            // Unknown or hairpin output port.
            FlowAction::Forward(_) => SwitchEffect::Dropped { packet, cookie: Some(cookie) },
            FlowAction::Drop => SwitchEffect::Dropped { packet, cookie: Some(cookie) },
            FlowAction::SendToController => SwitchEffect::PacketIn { packet, ingress },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{IpAddress, MacAddress, NetAddr};
    use crate::time::SimDuration;

    const ATTACKER: IpAddress = IpAddress::new(10, 0, 0, 9);
    const VICTIM1: IpAddress = IpAddress::new(10, 0, 1, 5);
    const OTHER: IpAddress = IpAddress::new(10, 0, 3, 3);

    fn packet(src: IpAddress, dst: IpAddress) -> Packet {
        Packet::data(
            NetAddr::new(src, MacAddress::local(src.to_bits()), 40000),
            NetAddr::new(dst, MacAddress::local(dst.to_bits()), 22),
            100,
        )
    }

    fn switch() -> SwitchState {
        let mut sw = SwitchState::new(SwitchId(1));
        sw.attach_port(PortId(1));
        sw.attach_port(PortId(2));
        sw.on_controller_connect(SimTime::ZERO);
        sw
    }

    fn scan(entries: &[FlowEntry], p: &Packet) -> Option<FlowEntry> {
        entries
            .iter()
            .filter(|e| e.pattern.matches(p))
            .max_by_key(|e| (e.priority, e.installed_at, Reverse(e.cookie)))
            .copied()
    }

    #[test]
    fn full_tie_goes_to_newest_install() {
        let mut table = FlowTable::new();
        let at = SimTime::from_ms(3);
        let by_src = FlowEntry { cookie: 9, ..FlowEntry::drop_source(ATTACKER, 9) };
        let by_dst = FlowEntry { action: FlowAction::Drop, priority: by_src.priority, ..FlowEntry::forward_destination(VICTIM1, PortId(2), 9) };
        table.install(by_src, at);
        table.install(by_dst, at);
        assert_eq!(table.lookup(&packet(ATTACKER, VICTIM1)).unwrap().pattern, by_dst.pattern);
    }

    #[test]
    fn lookup_prefers_drop_over_forward() {
        let mut sw = switch();
        sw.install_flow(FlowEntry::forward_destination(VICTIM1, PortId(2), 1), SimTime::from_ms(1));
        sw.install_flow(FlowEntry::drop_source(ATTACKER, 2), SimTime::from_ms(2));
        let entries: Vec<_> = sw.table().entries().copied().collect();

        let hostile = packet(ATTACKER, VICTIM1);
        assert_eq!(sw.lookup(&hostile).unwrap().action, FlowAction::Drop);
        assert_eq!(Some(*sw.lookup(&hostile).unwrap()), scan(&entries, &hostile));

        let benign = packet(OTHER, VICTIM1);
        assert_eq!(sw.lookup(&benign).unwrap().action, FlowAction::Forward(PortId(2)));
        assert_eq!(Some(*sw.lookup(&benign).unwrap()), scan(&entries, &benign));
    }

    #[test]
    fn miss_only_table_returns_miss() {
        let sw = switch();
        assert!(sw.lookup(&packet(OTHER, ATTACKER)).unwrap().is_table_miss());
    }

    #[test]
    fn uninitialized_switch_reports_missing_entry() {
        let sw = SwitchState::new(SwitchId(7));
        assert_eq!(sw.lookup(&packet(OTHER, VICTIM1)), Err(SwitchError::NoMissEntry(SwitchId(7))));
        let mut sw = sw;
        assert!(sw.process_packet(packet(OTHER, VICTIM1), PortId(1), SimTime::ZERO).is_err());
    }

    #[test]
    fn tie_breaks_by_recency_then_cookie() {
        let mut sw = switch();
        let by_src = FlowEntry { cookie: 5, ..FlowEntry::drop_source(ATTACKER, 5) };
        let by_dst = FlowEntry {
            pattern: FlowMatch::dst(VICTIM1),
            ..FlowEntry::drop_source(ATTACKER, 3)
        };
        sw.install_flow(by_src, SimTime::from_ms(1));
        sw.install_flow(by_dst, SimTime::from_ms(2));
        assert_eq!(sw.lookup(&packet(ATTACKER, VICTIM1)).unwrap().cookie, 3);
        // Same instant: lower cookie wins.
        sw.install_flow(by_src, SimTime::from_ms(2));
        assert_eq!(sw.lookup(&packet(ATTACKER, VICTIM1)).unwrap().cookie, 3);
        let by_src_low = FlowEntry { cookie: 1, ..by_src };
        sw.install_flow(by_src_low, SimTime::from_ms(2));
        assert_eq!(sw.lookup(&packet(ATTACKER, VICTIM1)).unwrap().cookie, 1);
    }

    #[test]
    fn process_packet_effects() {
        let mut sw = switch();
        let first = sw.process_packet(packet(ATTACKER, VICTIM1), PortId(1), SimTime::ZERO).unwrap();
        assert!(matches!(first, SwitchEffect::PacketIn { ingress: PortId(1), .. }));

        sw.install_flow(FlowEntry::forward_destination(VICTIM1, PortId(2), 1), SimTime::ZERO);
        let fwd = sw.process_packet(packet(OTHER, VICTIM1), PortId(1), SimTime::ZERO).unwrap();
        assert!(matches!(fwd, SwitchEffect::Deliver { port: PortId(2), .. }));

        sw.install_flow(FlowEntry::drop_source(ATTACKER, 2), SimTime::ZERO);
        let drop = sw.process_packet(packet(ATTACKER, VICTIM1), PortId(1), SimTime::ZERO).unwrap();
        assert!(matches!(drop, SwitchEffect::Dropped { cookie: Some(2), .. }));

        let counters = sw.table().counters(&FlowMatch::dst(VICTIM1), 100).unwrap();
        assert_eq!(counters, FlowCounters { packets: 1, bytes: 142 });
        let miss = sw.table().counters(&FlowMatch::ANY, 0).unwrap();
        assert_eq!(miss.packets, 1);
    }

    #[test]
    fn forward_to_unknown_port_drops() {
        let mut sw = switch();
        sw.install_flow(FlowEntry::forward_destination(VICTIM1, PortId(9), 1), SimTime::ZERO);
        let effect = sw.process_packet(packet(OTHER, VICTIM1), PortId(1), SimTime::ZERO).unwrap();
        assert!(matches!(effect, SwitchEffect::Dropped { .. }));
    }

    #[test]
    fn reinstall_replaces_entry() {
        let mut sw = switch();
        let entry = FlowEntry::drop_source(ATTACKER, 2).with_hard_timeout(SimDuration::from_ms(10));
        assert!(sw.install_flow(entry, SimTime::ZERO).is_none());
        let longer = entry.with_hard_timeout(SimDuration::from_ms(500));
        assert_eq!(sw.install_flow(longer, SimTime::from_ms(1)).map(|e| e.hard_timeout), Some(SimDuration::from_ms(10)));
        let drops: Vec<_> = sw.table().entries().filter(|e| e.action == FlowAction::Drop).collect();
        assert_eq!(drops.len(), 1);
        assert_eq!(drops[0].hard_timeout, SimDuration::from_ms(500));
        assert_eq!(drops[0].installed_at, SimTime::from_ms(1));
    }

    #[test]
    fn expiry_boundary_is_inclusive() {
        let mut sw = switch();
        let entry = FlowEntry::drop_source(ATTACKER, 2).with_hard_timeout(SimDuration::from_ms(1000));
        sw.install_flow(entry, SimTime::from_ms(5000));
        assert_eq!(sw.table().next_expiry(), Some(SimTime::from_ms(6000)));
        assert!(sw.expire_flows(SimTime::from_us(5_999_999)).is_empty());
        assert!(sw.expire_flows(SimTime::from_ms(5999)).is_empty());
        let removed = sw.expire_flows(SimTime::from_ms(6000));
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].at, SimTime::from_ms(6000));
        assert_eq!(removed[0].entry.cookie, 2);
        // Late sweep still reports the exact deadline.
        sw.install_flow(entry, SimTime::from_ms(7000));
        assert_eq!(sw.expire_flows(SimTime::from_ms(9000))[0].at, SimTime::from_ms(8000));
    }

    #[test]
    fn miss_entry_never_expires() {
        let mut sw = switch();
        assert!(sw.expire_flows(SimTime::from_us(u64::MAX / 2)).is_empty());
        assert!(sw.is_initialized());
    }

    #[test]
    fn controller_connect_resets_table() {
        let mut sw = switch();
        sw.install_flow(FlowEntry::drop_source(ATTACKER, 2), SimTime::ZERO);
        sw.process_packet(packet(OTHER, VICTIM1), PortId(1), SimTime::ZERO).unwrap();
        sw.on_controller_connect(SimTime::from_ms(3));
        let entries: Vec<_> = sw.table().entries().collect();
        assert_eq!(entries.len(), 1);
        assert!(entries[0].is_table_miss());
        assert_eq!(sw.table().counters(&FlowMatch::ANY, 0), Some(FlowCounters::default()));

        let mut other = SwitchState::new(SwitchId(2));
        other.on_controller_connect(SimTime::ZERO);
        assert_eq!(other.table().len(), 1);
        assert_eq!(sw.table().len(), 1);
    }
}
