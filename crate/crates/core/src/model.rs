//! Domain types shared by every planner module, and the constraint system a
//! parallelization plan must satisfy.
//!
//! All three specs serialize to JSON with snake_case keys; unknown keys are
//! rejected. Plans use the conventional short PTD-P names (`p`, `t`, `d`,
//! `p_h`, ..., `v`, `b`, `m`) on the wire.

use serde::{Deserialize, Serialize};

use crate::compute;
use crate::error::{Error, Result};

/// Transformer LLM hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden_size: u64,
    pub seq_len: u64,
    pub num_layers: u64,
    pub attn_heads: u64,
    pub vocab_size: u64,
    /// Global batch size in sequences.
    pub global_batch: u64,
    /// Bytes per parameter / activation element on the wire.
    #[serde(default = "default_elem_bytes")]
    pub elem_bytes: u64,
}

fn default_elem_bytes() -> u64 {
    2
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hidden_size", self.hidden_size),
            ("seq_len", self.seq_len),
            ("num_layers", self.num_layers),
            ("attn_heads", self.attn_heads),
            ("vocab_size", self.vocab_size),
            ("global_batch", self.global_batch),
            ("elem_bytes", self.elem_bytes),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::spec("model", format!("{name} must be positive")));
        }
        if !self.hidden_size.is_multiple_of(self.attn_heads) {
            return Err(Error::spec(
                "model",
                format!(
                    "attn_heads ({}) must divide hidden_size ({})",
                    self.attn_heads, self.hidden_size
                ),
            ));
        }
        Ok(())
    }

    pub fn with_global_batch(mut self, global_batch: u64) -> Self {
        self.global_batch = global_batch;
        self
    }
}

/// Physical cluster: `n_gpus` GPUs grouped into HB domains of `hb_size`.
///
/// Bandwidths are bytes/second per GPU, latencies are seconds per collective
/// step, `peak_flops` is FLOP/s per GPU and `mem_bytes` is HBM per GPU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub n_gpus: u64,
    pub hb_size: u64,
    pub hb_bw: f64,
    pub net_bw: f64,
    pub peak_flops: f64,
    pub mem_bytes: f64,
    #[serde(default)]
    pub hb_latency: f64,
    #[serde(default)]
    pub net_latency: f64,
    /// Attention slowdown factor relative to GEMM throughput.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Achieved fraction of `peak_flops`.
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
}

fn default_gamma() -> f64 {
    2.5
}

fn default_efficiency() -> f64 {
    1.0
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::spec("cluster", reason));
        if self.n_gpus == 0 || self.hb_size == 0 {
            return bad("n_gpus and hb_size must be positive".into());
        }
        if !self.n_gpus.is_multiple_of(self.hb_size) {
            return bad(format!(
                "hb_size ({}) must divide n_gpus ({})",
                self.hb_size, self.n_gpus
            ));
        }
        if !(self.net_bw > 0.0) || !(self.hb_bw >= self.net_bw) {
            return bad(format!(
                "need hb_bw >= net_bw > 0, got hb_bw={} net_bw={}",
                self.hb_bw, self.net_bw
            ));
        }
        if !(self.peak_flops > 0.0) || !(self.mem_bytes > 0.0) {
            return bad("peak_flops and mem_bytes must be positive".into());
        }
        if !(self.hb_latency >= 0.0) || !(self.net_latency >= 0.0) {
            return bad("latencies must be non-negative".into());
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!("efficiency must lie in (0, 1], got {}", self.efficiency));
        }
        if !(self.gamma >= 1.0) {
            return bad(format!("gamma must be >= 1, got {}", self.gamma));
        }
        Ok(())
    }

    pub fn num_domains(&self) -> u64 {
        self.n_gpus / self.hb_size
    }

    /// The same cluster with one HB domain spanning every GPU.
    pub fn ideal(&self) -> Self {
        Self {
            hb_size: self.n_gpus,
            ..*self
        }
    }
}

/// A complete PTD-P parallelization strategy.
///
/// Each of the pipeline, tensor and data degrees is split into a portion
/// inside one HB domain (`*_hb`) and a portion across the network (`*_net`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelPlan {
    #[serde(rename = "p")]
    pub pipeline: u64,
    #[serde(rename = "t")]
    pub tensor: u64,
    #[serde(rename = "d")]
    pub data: u64,
    #[serde(rename = "p_h")]
    pub pipeline_hb: u64,
    #[serde(rename = "t_h")]
    pub tensor_hb: u64,
    #[serde(rename = "d_h")]
    pub data_hb: u64,
    #[serde(rename = "p_l")]
    pub pipeline_net: u64,
    #[serde(rename = "t_l")]
    pub tensor_net: u64,
    #[serde(rename = "d_l")]
    pub data_net: u64,
    /// Interleaved stages per device.
    #[serde(rename = "v")]
    pub interleave: u64,
    #[serde(rename = "b")]
    pub micro_batch: u64,
    #[serde(rename = "m")]
    pub num_micro_batches: u64,
}

impl ParallelPlan {
    /// Builds a plan from its HB/network splits; the total degrees are the
    /// products of the splits.
    pub fn from_splits(
        hb: (u64, u64, u64),
        net: (u64, u64, u64),
        interleave: u64,
        micro_batch: u64,
        num_micro_batches: u64,
    ) -> Self {
        Self {
            pipeline: hb.0 * net.0,
            tensor: hb.1 * net.1,
            data: hb.2 * net.2,
            pipeline_hb: hb.0,
            tensor_hb: hb.1,
            data_hb: hb.2,
            pipeline_net: net.0,
            tensor_net: net.1,
            data_net: net.2,
            interleave,
            micro_batch,
            num_micro_batches,
        }
    }

    /// Total GPU count covered by the plan.
    pub fn world_size(&self) -> u64 {
        self.pipeline * self.tensor * self.data
    }

    /// Ordering key used for enumeration order and tie-breaking:
    /// `(p, t, d, p_h, t_h, d_h, v, b)`.
    pub fn order_key(&self) -> [u64; 8] {
        [
            self.pipeline,
            self.tensor,
            self.data,
            self.pipeline_hb,
            self.tensor_hb,
            self.data_hb,
            self.interleave,
            self.micro_batch,
        ]
    }

    fn fields(&self) -> [(&'static str, u64); 12] {
        [
            ("p", self.pipeline),
            ("t", self.tensor),
            ("d", self.data),
            ("p_h", self.pipeline_hb),
            ("t_h", self.tensor_hb),
            ("d_h", self.data_hb),
            ("p_l", self.pipeline_net),
            ("t_l", self.tensor_net),
            ("d_l", self.data_net),
            ("v", self.interleave),
            ("b", self.micro_batch),
            ("m", self.num_micro_batches),
        ]
    }
}

/// The nine constraints a valid parallelization must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintId {
    /// p·t·d = N
    TotalGpus,
    /// p_h·t_h·d_h = K
    HbDomainCover,
    /// m·b = B/d
    MicroBatches,
    /// d_h·d_l = d
    DataSplit,
    /// t_h·t_l = t
    TensorSplit,
    /// p_h·p_l = p
    PipelineSplit,
    /// every degree, v, m and b is a positive integer
    Positivity,
    /// l/(p·v), s/t, h/t and B/d are positive integers
    Divisibility,
    /// per-GPU memory fits in R
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub constraint_id: ConstraintId,
    pub message: String,
    pub observed: f64,
    pub required: f64,
}

impl ConstraintViolation {
    fn new(id: ConstraintId, observed: f64, required: f64, message: String) -> Self {
        Self {
            constraint_id: id,
            message,
            observed,
            required,
        }
    }
}

/// Checks every constraint and returns one violation per failed constraint.
/// An empty list means the plan is valid.
pub fn validate_plan(
    plan: &ParallelPlan,
    model: &ModelSpec,
    cluster: &ClusterSpec,
) -> Vec<ConstraintViolation> {
    let mut out = structural_violations(plan, model, cluster);
    if out.iter().any(|v| v.constraint_id == ConstraintId::Positivity) {
        return out;
    }
    let mem = compute::memory_per_gpu(model, plan);
    if mem > cluster.mem_bytes {
        out.push(ConstraintViolation::new(
            ConstraintId::Memory,
            mem,
            cluster.mem_bytes,
            format!(
                "memory per GPU {:.3} GB exceeds capacity {:.3} GB",
                mem / 1e9,
                cluster.mem_bytes / 1e9
            ),
        ));
    }
    out
}

/// Constraints that involve only the plan and the cluster shape: positivity,
/// GPU totals, HB cover and the three split products.
pub fn shape_violations(plan: &ParallelPlan, cluster: &ClusterSpec) -> Vec<ConstraintViolation> {
    use ConstraintId::*;
    let mut out = Vec::new();

    let zeros: Vec<&str> = plan
        .fields()
        .iter()
        .filter(|(_, v)| *v == 0)
        .map(|(n, _)| *n)
        .collect();
    if !zeros.is_empty() {
        out.push(ConstraintViolation::new(
            Positivity,
            0.0,
            1.0,
            format!("fields must be positive integers: {}", zeros.join(", ")),
        ));
    }

    // Products in u128 so oversized inputs cannot wrap.
    let prod = |a: u64, b: u64| a as u128 * b as u128;
    let (p, t, d) = (plan.pipeline, plan.tensor, plan.data);

    let world = prod(p, t) * d as u128;
    if world != cluster.n_gpus as u128 {
        out.push(ConstraintViolation::new(
            TotalGpus,
            world as f64,
            cluster.n_gpus as f64,
            format!("p·t·d = {world} != N = {}", cluster.n_gpus),
        ));
    }
    let hb = prod(plan.pipeline_hb, plan.tensor_hb) * plan.data_hb as u128;
    if hb != cluster.hb_size as u128 {
        out.push(ConstraintViolation::new(
            HbDomainCover,
            hb as f64,
            cluster.hb_size as f64,
            format!("p_h·t_h·d_h = {hb} != K = {}", cluster.hb_size),
        ));
    }

    let splits = [
        (DataSplit, "d_h·d_l", plan.data_hb, plan.data_net, d, "d"),
        (TensorSplit, "t_h·t_l", plan.tensor_hb, plan.tensor_net, t, "t"),
        (PipelineSplit, "p_h·p_l", plan.pipeline_hb, plan.pipeline_net, p, "p"),
    ];
    for (id, lhs, hb_part, net_part, total, name) in splits {
        let got = prod(hb_part, net_part);
        if got != total as u128 {
            out.push(ConstraintViolation::new(
                id,
                got as f64,
                total as f64,
                format!("{lhs} = {got} != {name} = {total}"),
            ));
        }
    }

    out
}

/// All constraints except memory capacity.
pub fn structural_violations(
    plan: &ParallelPlan,
    model: &ModelSpec,
    cluster: &ClusterSpec,
) -> Vec<ConstraintViolation> {
    use ConstraintId::*;
    let mut out = shape_violations(plan, cluster);
    let prod = |a: u64, b: u64| a as u128 * b as u128;
    let (p, t, d) = (plan.pipeline, plan.tensor, plan.data);

    let b_total = model.global_batch;
    let mb = prod(plan.num_micro_batches, plan.micro_batch);
    let local_ok = d != 0 && b_total.is_multiple_of(d);
    if !local_ok || mb != (b_total / d.max(1)) as u128 {
        let required = if d == 0 { f64::NAN } else { b_total as f64 / d as f64 };
        out.push(ConstraintViolation::new(
            MicroBatches,
            mb as f64,
            required,
            format!("m·b = {mb} != B/d = {required}"),
        ));
    }

    let ratios = [
        ("l/(p·v)", model.num_layers as u128, prod(p, plan.interleave)),
        ("s/t", model.seq_len as u128, t as u128),
        ("h/t", model.hidden_size as u128, t as u128),
        ("B/d", b_total as u128, d as u128),
    ];
    let failing: Vec<_> = ratios
        .iter()
        .filter(|(_, num, den)| *den == 0 || *num < *den || num % den != 0)
        .collect();
    if let Some((_, num, den)) = failing.first() {
        let names: Vec<String> = failing
            .iter()
            .map(|(n, num, den)| format!("{n} = {num}/{den}"))
            .collect();
        out.push(ConstraintViolation::new(
            Divisibility,
            *num as f64,
            *den as f64,
            format!("not a positive integer: {}", names.join(", ")),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{dgx_a100 as dgx, single_gpu, single_plan, tiny_model};

    fn gpt175b() -> ModelSpec {
        crate::testutil::gpt175b(64)
    }

    #[test]
    fn gpt175b_reference_plan_is_valid() {
        let plan = ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 3, 1, 64);
        assert!(validate_plan(&plan, &gpt175b(), &dgx(64)).is_empty());
    }

    #[test]
    fn single_gpu_plan_is_valid() {
        assert!(validate_plan(&single_plan(), &tiny_model(), &single_gpu()).is_empty());
    }

    #[test]
    fn product_mismatch_is_reported() {
        let plan = ParallelPlan::from_splits((1, 8, 1), (2, 1, 1), 3, 1, 64);
        let v = validate_plan(&plan, &gpt175b(), &dgx(64));
        let total = v
            .iter()
            .find(|v| v.constraint_id == ConstraintId::TotalGpus)
            .expect("total-gpu violation");
        assert_eq!(total.observed, 16.0);
        assert_eq!(total.required, 64.0);
    }

    #[test]
    fn zero_fields_do_not_panic() {
        let mut plan = ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 3, 1, 64);
        plan.tensor = 0;
        plan.interleave = 0;
        let v = validate_plan(&plan, &gpt175b(), &dgx(64));
        assert!(v.iter().any(|v| v.constraint_id == ConstraintId::Positivity));
        assert!(v.iter().any(|v| v.constraint_id == ConstraintId::Divisibility));
    }

    #[test]
    fn interleave_divisibility_uses_integers() {
        // 96 / (8·5) is 2.4: must be rejected, not rounded.
        let plan = ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 5, 1, 64);
        let v = validate_plan(&plan, &gpt175b(), &dgx(64));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint_id, ConstraintId::Divisibility);
    }

    #[test]
    fn memory_violation() {
        let plan = ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 3, 1, 64);
        let tiny = ClusterSpec {
            mem_bytes: 1e9,
            ..dgx(64)
        };
        let v = validate_plan(&plan, &gpt175b(), &tiny);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint_id, ConstraintId::Memory);
    }

    #[test]
    fn json_uses_short_plan_keys_and_rejects_unknown() {
        let plan = ParallelPlan::from_splits((1, 8, 1), (8, 1, 1), 3, 1, 64);
        let s = serde_json::to_string(&plan).unwrap();
        assert!(s.contains("\"p_h\":1") && s.contains("\"v\":3"));
        assert_eq!(serde_json::from_str::<ParallelPlan>(&s).unwrap(), plan);

        let bad = s.replace("\"v\":3", "\"v\":3,\"zz\":1");
        assert!(serde_json::from_str::<ParallelPlan>(&bad).is_err());

        let m = r#"{"hidden_size":8,"seq_len":4,"num_layers":2,"attn_heads":2,
                    "vocab_size":16,"global_batch":4}"#;
        assert_eq!(serde_json::from_str::<ModelSpec>(m).unwrap().elem_bytes, 2);
    }

    #[test]
    fn cluster_validation() {
        assert!(dgx(64).validate().is_ok());
        assert!(dgx(60).validate().is_err());
        let slow_hb = ClusterSpec {
            hb_bw: 1e9,
            ..dgx(64)
        };
        assert!(slow_hb.validate().is_err());
        let eff = ClusterSpec {
            efficiency: 1.5,
            ..dgx(64)
        };
        assert!(eff.validate().is_err());
    }

    #[test]
    fn model_validation() {
        assert!(gpt175b().validate().is_ok());
        let m = ModelSpec {
            attn_heads: 7,
            ..gpt175b()
        };
        assert!(m.validate().is_err());
    }
}
