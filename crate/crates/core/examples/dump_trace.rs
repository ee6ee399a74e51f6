// SPDX-License-Identifier: Apache-2.0

//! Prints the trace and metrics of one run of an embedded preset.

use coop_sdn_core::scenario::presets;
use coop_sdn_core::Simulation;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "geni-fig3".into());
    let cfg = presets::scenario(&name).expect("unknown preset");
    let scenario = cfg.compile().expect("preset is valid");
    let out = Simulation::new(&scenario, cfg.seed).unwrap().run(0).unwrap();
    print!("{}", out.trace.export());
    for m in &out.metrics {
        println!("{} {}", m.name, m.value_ms());
    }
}
