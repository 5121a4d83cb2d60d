//! Hierarchical AllGather cost, its lower bound over partitions, and the
//! All-to-All penalty of a rail-only fabric.
//!
//! cargo run --example collective_costs

use railplan::collective::{a2a_times, ag_time, optimal_ag_bound, FabricVariant, GridShape, LinkParams};

fn main() {
    let (c_f, c_s) = (3.0e11, 2.5e10);
    let link = LinkParams::new(c_f, c_s);
    let bytes = 1.0e9;
    println!("AllGather of 1 GB");
    for (x, y) in [(8, 1), (1, 8), (8, 8), (8, 64)] {
        let g = GridShape::new(x, y).unwrap();
        println!("  {x:>2}x{y:<3} {:.4} s", ag_time(bytes, g, &link));
    }

    println!("optimal bound per byte (C_F = 100 C_S)");
    for (x, y) in [(2, 2), (4, 2), (4, 4)] {
        let g = GridShape::new(x, y).unwrap();
        for v in [FabricVariant::RailOptimized, FabricVariant::RailOnly] {
            let b = optimal_ag_bound(g, 100.0, 1.0, v).unwrap();
            println!("  {x}x{y} {v:?}: {:.4} (closed form {:.4})", b.time_per_unit, (y - 1) as f64);
        }
    }

    println!("All-to-All of 1 GB per GPU");
    for (x, y) in [(8, 16), (256, 128)] {
        let t = a2a_times(bytes, GridShape::new(x, y).unwrap(), c_f, c_s);
        println!("  {x}x{y}: full {:.3} s, rail-only {:.3} s, {:?}", t.full_bisection, t.rail_only, t.slowdown);
    }
}
