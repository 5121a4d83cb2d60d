//! Shared fixtures for unit tests.

use crate::model::{ClusterSpec, ModelSpec, ParallelPlan};

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

pub fn gpt22b(batch: u64) -> ModelSpec {
    gpt(6144, 48, 64, batch)
}

pub fn gpt175b(batch: u64) -> ModelSpec {
    gpt(12288, 96, 96, batch)
}

pub fn gpt530b(batch: u64) -> ModelSpec {
    gpt(20480, 105, 128, batch)
}

pub fn gpt1t(batch: u64) -> ModelSpec {
    gpt(25600, 128, 160, batch)
}

pub fn tiny_model() -> ModelSpec {
    ModelSpec {
        hidden_size: 1,
        seq_len: 1,
        num_layers: 1,
        attn_heads: 1,
        vocab_size: 1,
        global_batch: 1,
        elem_bytes: 2,
    }
}

pub fn dgx_a100(n: u64) -> ClusterSpec {
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

pub fn gh200(n: u64, hb_size: u64) -> ClusterSpec {
    ClusterSpec {
        n_gpus: n,
        hb_size,
        hb_bw: 9.0e11,
        net_bw: 5.0e10,
        peak_flops: 989e12,
        mem_bytes: 80e9,
        ..dgx_a100(n)
    }
}

pub fn single_gpu() -> ClusterSpec {
    ClusterSpec {
        hb_size: 1,
        ..dgx_a100(1)
    }
}

pub fn single_plan() -> ParallelPlan {
    ParallelPlan::from_splits((1, 1, 1), (1, 1, 1), 1, 1, 1)
}
