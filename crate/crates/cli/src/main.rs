// SPDX-License-Identifier: Apache-2.0

use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("COOP_SDN_LOG")).init();
    let code = coop_sdn_cli::main_with(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
