//! Exhaustive plan search for GPT-146B on 16384 GH200-class GPUs, with the
//! time/memory Pareto front.
//!
//! cargo run --release --example plan_search

use railplan::model::{ClusterSpec, ModelSpec};
use railplan::search::{optimize, SearchOptions};

fn main() {
    let model = ModelSpec {
        hidden_size: 12288,
        seq_len: 2048,
        num_layers: 80,
        attn_heads: 96,
        vocab_size: 51200,
        global_batch: 1024,
        elem_bytes: 2,
    };
    let cluster = ClusterSpec {
        n_gpus: 16384,
        hb_size: 256,
        hb_bw: 9.0e11,
        net_bw: 5.0e10,
        peak_flops: 989e12,
        mem_bytes: 80e9,
        hb_latency: 0.0,
        net_latency: 0.0,
        gamma: 2.5,
        efficiency: 1.0,
    };
    let opts = SearchOptions { pareto: true, ..Default::default() };
    let r = optimize(&model, &cluster, &opts).unwrap();
    let p = r.best_plan;
    println!("examined {} candidates", r.n_candidates_examined);
    println!(
        "best: p={} t={} d={} (hb {}/{}/{}) v={} b={} m={}",
        p.pipeline, p.tensor, p.data, p.pipeline_hb, p.tensor_hb, p.data_hb, p.interleave, p.micro_batch, p.num_micro_batches
    );
    println!("t_iter {:.4} s, HFU {:.3}", r.breakdown.t_iter, r.breakdown.hfu);
    println!("pareto front (t_iter s, GB per GPU):");
    for pt in r.pareto.unwrap_or_default() {
        println!("  {:.4}  {:.1}", pt.t_iter, pt.mem_per_gpu / 1e9);
    }
}
