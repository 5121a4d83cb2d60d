//! Per-component iteration time for GPT-1T on 512 DGX A100 GPUs, before and
//! after calibrating efficiency against a measured reference run.
//!
//! cargo run --example iteration_breakdown

use railplan::iteration::{calibrate_efficiency, iteration_time, IterationBreakdown};
use railplan::model::{ClusterSpec, ModelSpec, ParallelPlan};

fn gpt(h: u64, l: u64, a: u64, batch: u64) -> ModelSpec {
    ModelSpec {
        hidden_size: h,
        seq_len: 2048,
        num_layers: l,
        attn_heads: a,
        vocab_size: 51200,
        global_batch: batch,
        elem_bytes: 2,
    }
}

fn dgx(n: u64) -> ClusterSpec {
    ClusterSpec {
        n_gpus: n,
        hb_size: 8,
        hb_bw: 3.0e11,
        net_bw: 2.5e10,
        peak_flops: 3.12e14,
        mem_bytes: 80e9,
        hb_latency: 0.0,
        net_latency: 0.0,
        gamma: 2.5,
        efficiency: 1.0,
    }
}

fn show(label: &str, b: &IterationBreakdown) {
    println!("{label}");
    for (name, v) in IterationBreakdown::FIELDS.iter().zip(b.values()) {
        println!("  {name:<14} {v:.6e}");
    }
}

fn main() {
    let eta = calibrate_efficiency(
        &gpt(12288, 96, 96, 64),
        &dgx(64),
        &ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 3, 1, 64),
        11.89,
    )
    .unwrap();

    let model = gpt(25600, 128, 160, 512);
    let plan = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
    show("eta = 1", &iteration_time(&model, &dgx(512), &plan));
    let calibrated = ClusterSpec { efficiency: eta, ..dgx(512) };
    show(&format!("eta = {eta:.4}"), &iteration_time(&model, &calibrated, &plan));
}
