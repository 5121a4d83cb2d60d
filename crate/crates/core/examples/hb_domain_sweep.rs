//! How the best iteration time of GPT-1T on 32768 GPUs depends on HB domain
//! size, compared with one domain spanning the whole cluster.
//!
//! cargo run --release --example hb_domain_sweep

use railplan::model::{ClusterSpec, ModelSpec};
use railplan::search::{sweep, SearchOptions, SweepAxis};

fn main() {
    let model = ModelSpec {
        hidden_size: 25600,
        seq_len: 2048,
        num_layers: 128,
        attn_heads: 160,
        vocab_size: 51200,
        global_batch: 4096,
        elem_bytes: 2,
    };
    let cluster = ClusterSpec {
        n_gpus: 32768,
        hb_size: 8,
        hb_bw: 9.0e11,
        net_bw: 5.0e10,
        peak_flops: 989e12,
        mem_bytes: 80e9,
        hb_latency: 0.0,
        net_latency: 0.0,
        gamma: 2.5,
        efficiency: 1.0,
    };
    let sizes: Vec<f64> = (0..=15).map(|e| (1u64 << e) as f64).collect();
    let rows = sweep(&model, &cluster, SweepAxis::HbSize, &sizes, &SearchOptions::default(), true);
    println!("{:>6} {:>10} {:>8}", "K", "t_iter s", "vs K=N");
    for r in rows {
        match (&r.result, r.relative_performance()) {
            (Ok(res), Some(rel)) => println!("{:>6} {:>10.4} {:>7.1}%", r.value, res.breakdown.t_iter, 100.0 * rel),
            (Err(e), _) => println!("{:>6} {e}", r.value),
            _ => {}
        }
    }
}
