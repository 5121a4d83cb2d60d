//! Check a plan against the constraint system and print any violations.
//!
//! cargo run --example validate_plan

use railplan::model::{validate_plan, ClusterSpec, ModelSpec, ParallelPlan};

fn main() {
    let model = ModelSpec {
        hidden_size: 12288,
        seq_len: 2048,
        num_layers: 96,
        attn_heads: 96,
        vocab_size: 51200,
        global_batch: 64,
        elem_bytes: 2,
    };
    let cluster = ClusterSpec {
        n_gpus: 64,
        hb_size: 8,
        hb_bw: 3.0e11,
        net_bw: 2.5e10,
        peak_flops: 3.12e14,
        mem_bytes: 80e9,
        hb_latency: 0.0,
        net_latency: 0.0,
        gamma: 2.5,
        efficiency: 1.0,
    };

    let good = ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 3, 1, 64);
    let bad = ParallelPlan::from_splits((1, 8, 1), (2, 1, 1), 5, 1, 64);
    for (name, plan) in [("8x8 interleaved", good), ("short pipeline", bad)] {
        let v = validate_plan(&plan, &model, &cluster);
        println!("{name}: {} violation(s)", v.len());
        for c in v {
            println!("  {:?}: {} (observed {}, required {})", c.constraint_id, c.message, c.observed, c.required);
        }
    }
}
