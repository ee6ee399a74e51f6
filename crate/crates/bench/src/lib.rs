// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the simulator benchmarks.

use coop_sdn_core::message::priority;
use coop_sdn_core::scenario::presets;
use coop_sdn_core::{
    FlowAction, FlowEntry, FlowMatch, FlowTable, IpAddress, MacAddress, MessageBody, NetAddr, Packet, PacketKind,
    Passcode, PortId, Scenario, SimDuration, SimTime, WireMessage,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The two-network preset, optionally with a longer attack.
pub fn fig3_scenario(packet_count: u32) -> Scenario {
    let mut cfg = presets::scenario("geni-fig3").expect("preset exists");
    if let Some(attack) = cfg.attack.as_mut() {
        attack.packet_count = packet_count;
    }
    cfg.compile().expect("preset compiles")
}

fn random_ip(rng: &mut ChaCha8Rng) -> IpAddress {
    IpAddress::new(10, 0, rng.random_range(0..4), rng.random_range(1..64))
}

/// A table of `size` random entries plus the table-miss rule.
pub fn random_table(size: usize, seed: u64) -> FlowTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = FlowTable::new();
    table.install(FlowEntry::table_miss(), SimTime::ZERO);
    for i in 0..size {
        let pattern = match rng.random_range(0..3) {
            0 => FlowMatch::src(random_ip(&mut rng)),
            1 => FlowMatch::dst(random_ip(&mut rng)),
            _ => FlowMatch { src_ip: Some(random_ip(&mut rng)), dst_ip: Some(random_ip(&mut rng)) },
        };
        let (action, prio) = if rng.random_bool(0.3) {
            (FlowAction::Drop, priority::DROP)
        } else {
            (FlowAction::Forward(PortId(rng.random_range(1..8))), priority::FORWARD)
        };
        let entry = FlowEntry {
            pattern,
            action,
            priority: prio,
            hard_timeout: SimDuration::ZERO,
            installed_at: SimTime::ZERO,
            cookie: i as u64 + 1,
        };
        table.install(entry, SimTime::from_us(i as u64));
    }
    table
}

/// Random data packets between the addresses `random_table` uses.
pub fn random_packets(count: usize, seed: u64) -> Vec<Packet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let src = NetAddr::new(random_ip(&mut rng), MacAddress::ZERO, 40000);
            let dst = NetAddr::new(random_ip(&mut rng), MacAddress::ZERO, 22);
            Packet::new(src, dst, PacketKind::IpData { len: 64 })
        })
        .collect()
}

/// One message of each type.
pub fn sample_messages() -> Vec<WireMessage> {
    let ctrl = IpAddress::new(10, 0, 1, 1);
    let host = IpAddress::new(10, 0, 1, 5);
    let attacker = IpAddress::new(10, 0, 0, 9);
    let code = Passcode(0x1234_5678_9abc_def0);
    vec![
        WireMessage::new(host, 5001, 0, MessageBody::Register),
        WireMessage::new(ctrl, 9999, 1, MessageBody::RegisterAck { passcode: code }),
        WireMessage::new(host, 5001, 520, MessageBody::Alert { passcode: Some(code), attacker_ip: attacker }),
        WireMessage::new(ctrl, 9999, 520, MessageBody::PeerShare { passcode: Some(code), attacker_ip: attacker }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_usable() {
        assert!(fig3_scenario(5).attack.is_some());
        let table = random_table(50, 1);
        assert!(table.len() >= 2);
        assert!(random_packets(10, 2).iter().all(|p| table.lookup(p).is_some()));
        for msg in sample_messages() {
            assert_eq!(WireMessage::decode(&msg.encode()).unwrap(), msg);
        }
    }
}
