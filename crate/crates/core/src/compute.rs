//! FLOP, compute-time and memory accounting for one training iteration.
//!
//! Conventions: 2 FLOPs per multiply-accumulate; selective activation
//! recomputation re-runs only the attention-score part of the forward pass;
//! 16-bit weights and activations with fp32 master weights and Adam moments.

use serde::{Deserialize, Serialize};

use crate::model::{ClusterSpec, ModelSpec, ParallelPlan};

/// Hardware FLOPs for one iteration over the whole global batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopBreakdown {
    /// GEMM work: QKV/output projections, MLP and the logit layer.
    pub feed_forward: f64,
    /// Attention-score work, including the selective recompute pass.
    pub attention: f64,
}

impl FlopBreakdown {
    pub fn total(&self) -> f64 {
        self.feed_forward + self.attention
    }
}

/// Parameters in one transformer block: `12h² + 13h`.
///
/// 4h² for the attention projections, 8h² for the MLP, 13h for biases and
/// layer norms. Embeddings are not included.
pub fn transformer_param_count(model: &ModelSpec) -> u64 {
    let h = model.hidden_size;
    12 * h * h + 13 * h
}

pub fn iteration_flops(model: &ModelSpec) -> FlopBreakdown {
    let b = model.global_batch as u128;
    let s = model.seq_len as u128;
    let l = model.num_layers as u128;
    let h = model.hidden_size as u128;
    let vocab = model.vocab_size as u128;

    // forward 24Bsh² per layer, backward twice that; logits 2BshV forward
    let feed_forward = 72 * b * s * l * h * h + 6 * b * s * h * vocab;
    // forward 4Bs²h per layer, backward ×2, plus one recomputed forward
    let attention = 16 * b * s * s * h * l;
    FlopBreakdown {
        feed_forward: feed_forward as f64,
        attention: attention as f64,
    }
}

/// Forward plus backward compute time of one micro-batch on one GPU.
pub fn microbatch_time(model: &ModelSpec, cluster: &ClusterSpec, plan: &ParallelPlan) -> f64 {
    let flops = iteration_flops(model);
    let work = flops.feed_forward + cluster.gamma * flops.attention;
    let rate = cluster.efficiency
        * cluster.peak_flops
        * model.global_batch as f64
        * plan.pipeline as f64
        * plan.tensor as f64;
    work * plan.micro_batch as f64 / rate
}

/// Peak per-GPU memory in bytes, evaluated on the first pipeline stage.
///
/// Weights, gradients and optimizer state take 16 bytes per parameter;
/// activations take `34·s·b·h` bytes per layer, inflated by the
/// interleaved-schedule factor `1 + (p−1)/(p·v)`.
pub fn memory_per_gpu(model: &ModelSpec, plan: &ParallelPlan) -> f64 {
    let p = plan.pipeline as f64;
    let t = plan.tensor as f64;
    let v = plan.interleave as f64;
    let layers_per_stage = model.num_layers as f64 / p;

    let states = 16.0 * layers_per_stage * transformer_param_count(model) as f64 / t;
    let per_layer_act =
        34.0 * model.seq_len as f64 * plan.micro_batch as f64 * model.hidden_size as f64;
    let activations = per_layer_act * layers_per_stage / t * (1.0 + (p - 1.0) / (p * v));
    states + activations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;

    #[test]
    fn param_count() {
        assert_eq!(transformer_param_count(&gpt1t(512)), 7_864_652_800);
        assert_eq!(transformer_param_count(&tiny_model()), 25);
        let m175 = gpt175b(64);
        assert_eq!(transformer_param_count(&m175), 1_812_099_072);
        let total = transformer_param_count(&m175) * m175.num_layers;
        assert!((total as f64 / 1.74e11 - 1.0).abs() < 0.01);
    }

    #[test]
    fn gpt1t_flops() {
        let f = iteration_flops(&gpt1t(512));
        assert_eq!(f.feed_forward, 6_341_433_313_198_080_000.0);
        assert_eq!(f.attention, 112_589_990_684_262_400.0);
    }

    #[test]
    fn empty_batch_has_no_work() {
        let f = iteration_flops(&gpt1t(512).with_global_batch(0));
        assert_eq!((f.feed_forward, f.attention), (0.0, 0.0));
    }

    #[test]
    fn sequence_scaling() {
        let m = gpt1t(512);
        let m2 = ModelSpec {
            seq_len: m.seq_len * 2,
            ..m
        };
        let (a, b) = (iteration_flops(&m), iteration_flops(&m2));
        assert_eq!(b.attention, 4.0 * a.attention);
        let logits = |m: &ModelSpec| {
            6.0 * (m.global_batch * m.seq_len * m.hidden_size * m.vocab_size) as f64
        };
        assert_eq!(
            b.feed_forward - logits(&m2),
            2.0 * (a.feed_forward - logits(&m))
        );
    }

    #[test]
    fn linear_in_batch_and_layers() {
        let m = gpt1t(512);
        let a = iteration_flops(&m);
        let b = iteration_flops(&m.with_global_batch(1024));
        assert_eq!(b.total(), 2.0 * a.total());
        let deep = ModelSpec {
            num_layers: m.num_layers * 2,
            vocab_size: 0,
            ..m
        };
        let shallow = ModelSpec { vocab_size: 0, ..m };
        assert_eq!(
            iteration_flops(&deep).total(),
            2.0 * iteration_flops(&shallow).total()
        );
    }

    #[test]
    fn gpt1t_microbatch_time() {
        let plan = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
        let t = microbatch_time(&gpt1t(512), &dgx_a100(512), &plan);
        assert!((t - 0.080_975_609_435_897_43).abs() < 1e-15);
        assert!((t - 0.0807).abs() / 0.0807 < 0.005);
    }

    #[test]
    fn microbatch_time_collapses_without_attention() {
        let model = ModelSpec {
            seq_len: 1,
            ..tiny_model()
        };
        let cluster = ClusterSpec {
            gamma: 1.0,
            ..single_gpu()
        };
        let plan = single_plan();
        let f = iteration_flops(&model);
        let t = microbatch_time(&model, &cluster, &plan);
        assert_eq!(t, f.total() / (cluster.peak_flops * model.global_batch as f64));
    }

    #[test]
    fn efficiency_scales_time() {
        let plan = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
        let c = ClusterSpec {
            efficiency: 0.5,
            ..dgx_a100(512)
        };
        let slow = microbatch_time(&gpt1t(512), &c, &plan);
        let fast = microbatch_time(&gpt1t(512), &ClusterSpec { efficiency: 1.0, ..c }, &plan);
        assert!((slow / fast - 2.0).abs() < 1e-12);
    }

    #[test]
    fn microbatch_round_trip() {
        let model = gpt1t(512);
        let cluster = ClusterSpec {
            efficiency: 0.7,
            ..dgx_a100(512)
        };
        let plan = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
        let t = microbatch_time(&model, &cluster, &plan);
        let f = iteration_flops(&model);
        let back = t * (model.global_batch / plan.micro_batch) as f64
            * (plan.pipeline * plan.tensor) as f64
            * cluster.efficiency
            * cluster.peak_flops;
        let want = f.feed_forward + cluster.gamma * f.attention;
        assert!((back / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn memory_single_gpu() {
        assert_eq!(memory_per_gpu(&tiny_model(), &single_plan()), 434.0);
    }

    #[test]
    fn memory_weight_term_halves_with_pipeline() {
        let m = ModelSpec {
            seq_len: 0,
            ..gpt1t(512)
        };
        let p32 = ParallelPlan::from_splits((1, 8, 1), (32, 1, 2), 1, 1, 256);
        let p64 = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
        assert_eq!(memory_per_gpu(&m, &p32), 2.0 * memory_per_gpu(&m, &p64));
    }

    #[test]
    fn dgx_configurations_fit_in_80gb() {
        let p530 = ParallelPlan::from_splits((1, 8, 1), (35, 1, 1), 3, 1, 280);
        assert!(memory_per_gpu(&gpt530b(280), &p530) <= 80e9);
        let p530x = ParallelPlan::from_splits((1, 8, 1), (35, 1, 8), 3, 1, 280);
        assert!(memory_per_gpu(&gpt530b(2240), &p530x) <= 80e9);
        let p1t = ParallelPlan::from_splits((1, 8, 1), (64, 1, 1), 1, 1, 512);
        assert!(memory_per_gpu(&gpt1t(512), &p1t) <= 80e9);
    }

    proptest::proptest! {
        #[test]
        fn memory_non_increasing_in_degrees(
            pe in 0u32..6, te in 0u32..6, v in 1u64..4, b in 1u64..4
        ) {
            let m = gpt1t(512);
            let (p, t) = (1u64 << pe, 1u64 << te);
            let plan = |p: u64, t: u64| ParallelPlan::from_splits((1, 1, 1), (p, t, 1), v, b, 1);
            let base = memory_per_gpu(&m, &plan(p, t));
            proptest::prop_assert!(memory_per_gpu(&m, &plan(2 * p, t)) <= base);
            proptest::prop_assert!(memory_per_gpu(&m, &plan(p, 2 * t)) <= base);
        }
    }
}
