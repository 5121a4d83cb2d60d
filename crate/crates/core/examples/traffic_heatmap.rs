//! Build the per-iteration traffic matrix of a MegatronLM-style GPT-1T run
//! on 3072 GPUs, summarize it and write a block heatmap.
//!
//! cargo run --release --example traffic_heatmap [OUT.csv]

use std::fs::File;
use std::io::BufWriter;

use railplan::model::{ClusterSpec, ModelSpec, ParallelPlan};
use railplan::traffic::{
    assert_rail_locality, build_placement, classify_summary, heatmap_block_size, traffic_matrix, write_heatmap,
};

fn main() -> railplan::Result<()> {
    let model = ModelSpec {
        hidden_size: 25600,
        seq_len: 2048,
        num_layers: 128,
        attn_heads: 160,
        vocab_size: 51200,
        global_batch: 3072,
        elem_bytes: 2,
    };
    let cluster = ClusterSpec {
        n_gpus: 3072,
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
    let plan = ParallelPlan::from_splits((1, 8, 1), (64, 1, 6), 1, 1, 512);

    let placement = build_placement(&plan, &cluster)?;
    let m = traffic_matrix(&model, &placement);
    let s = classify_summary(&m);
    println!("{} of {} ordered pairs carry traffic", s.nonzero_pairs, s.ordered_pairs);
    for c in &s.classes {
        println!(
            "  {:<9} {:>6.2}% of bytes, {:>5} pairs, {:>5.1}% inside HB domains",
            c.class.as_str(),
            100.0 * c.byte_fraction,
            c.pairs,
            100.0 * c.within_hb_fraction
        );
    }
    println!("rail local: {}", assert_rail_locality(&m, &placement).ok);

    let out = std::env::args().nth(1).unwrap_or_else(|| "heatmap.csv".into());
    let block = heatmap_block_size(cluster.n_gpus, 192);
    write_heatmap(&m, block, BufWriter::new(File::create(&out)?))?;
    println!("wrote {out} ({block} GPUs per cell)");
    Ok(())
}
