//! Parameters, FLOPs, micro-batch time and memory for GPT-scale models.
//!
//! cargo run --example compute_budget

use railplan::compute::{iteration_flops, memory_per_gpu, microbatch_time, transformer_param_count};
use railplan::model::{ClusterSpec, ModelSpec, ParallelPlan};

fn main() {
    let cluster = ClusterSpec {
        n_gpus: 512,
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
    let plan = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
    println!("{:>6} {:>14} {:>12} {:>10} {:>10}", "model", "params", "PFLOP/iter", "t(b) s", "mem GB");
    for (name, h, l, a) in [("175B", 12288, 96, 96), ("530B", 20480, 105, 128), ("1T", 25600, 128, 160)] {
        let model = ModelSpec {
            hidden_size: h,
            seq_len: 2048,
            num_layers: l,
            attn_heads: a,
            vocab_size: 51200,
            global_batch: 512,
            elem_bytes: 2,
        };
        let params = transformer_param_count(&model) * l;
        let flops = iteration_flops(&model);
        println!(
            "{name:>6} {params:>14} {:>12.1} {:>10.4} {:>10.1}",
            flops.total() / 1e15,
            microbatch_time(&model, &cluster, &plan),
            memory_per_gpu(&model, &plan) / 1e9
        );
    }
}
