//! Switch, transceiver and dollar cost of a full-bisection Clos versus a
//! rail-only fabric for 256-GPU HB domains.
//!
//! cargo run --example network_cost

use railplan::netcost::{compare, Prices};

fn main() {
    let prices = Prices::default();
    println!("{:>6} {:>5} {:>16} {:>16} {:>6}", "N", "radix", "clos sw/xcvr", "rail sw/xcvr", "saved");
    for n in [32768, 65536] {
        for radix in [64, 128, 256] {
            let c = compare(n, 256, radix, &prices).unwrap();
            println!(
                "{n:>6} {radix:>5} {:>16} {:>16} {:>5}%",
                format!("{}/{}", c.sota.n_switches, c.sota.n_transceivers),
                format!("{}/{}", c.rail_only.n_switches, c.rail_only.n_transceivers),
                c.reduction_percent
            );
        }
    }
}
