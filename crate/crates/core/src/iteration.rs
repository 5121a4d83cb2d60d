//! Iteration-time decomposition for PTD-P training on a two-tier cluster.
//!
//! Compute and communication are never overlapped: the iteration is the
//! pipeline bubble, plus the last stage's own micro-batches, plus a final
//! data-parallel gradient sync.

use serde::{Deserialize, Serialize};

use crate::collective::{ag_time, GridShape, LinkParams};
use crate::compute::{iteration_flops, memory_per_gpu, microbatch_time};
use crate::error::{Error, Result};
use crate::model::{ClusterSpec, ModelSpec, ParallelPlan};

/// Per-iteration time components in seconds, plus the traffic sizes they
/// were derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationBreakdown {
    pub t_bubble_comp: f64,
    pub t_bubble_comm: f64,
    pub t_ls_comp: f64,
    pub t_ls_comm: f64,
    pub t_sync: f64,
    pub t_iter: f64,
    pub hfu: f64,
    /// Pipeline P2P bytes per micro-batch.
    pub d_mub_p: f64,
    /// Tensor-parallel AllGather bytes per micro-batch.
    pub d_mub_t: f64,
    /// Gradient bytes AllReduced per GPU.
    pub d_d: f64,
    pub mem_per_gpu: f64,
}

impl IterationBreakdown {
    pub const FIELDS: [&'static str; 11] = [
        "t_bubble_comp",
        "t_bubble_comm",
        "t_ls_comp",
        "t_ls_comm",
        "t_sync",
        "t_iter",
        "hfu",
        "d_mub_p",
        "d_mub_t",
        "d_d",
        "mem_per_gpu",
    ];

    /// Values in [`Self::FIELDS`] order.
    pub fn values(&self) -> [f64; 11] {
        [
            self.t_bubble_comp,
            self.t_bubble_comm,
            self.t_ls_comp,
            self.t_ls_comm,
            self.t_sync,
            self.t_iter,
            self.hfu,
            self.d_mub_p,
            self.d_mub_t,
            self.d_d,
            self.mem_per_gpu,
        ]
    }
}

fn elem(model: &ModelSpec) -> f64 {
    model.elem_bytes as f64
}

/// Activation bytes a micro-batch hands to the next pipeline stage: `2bhs/t`.
pub fn pipeline_traffic_size(model: &ModelSpec, plan: &ParallelPlan) -> f64 {
    tp_traffic_size(model, plan) / plan.tensor as f64
}

/// Bytes gathered by each tensor-parallel AllGather: `2bhs`.
pub fn tp_traffic_size(model: &ModelSpec, plan: &ParallelPlan) -> f64 {
    elem(model) * (plan.micro_batch * model.hidden_size * model.seq_len) as f64
}

/// Gradient bytes each GPU AllReduces: `2·l·S_T/(p·t)`.
pub fn dp_traffic_size(model: &ModelSpec, plan: &ParallelPlan) -> f64 {
    let params = model.num_layers as f64 * crate::compute::transformer_param_count(model) as f64;
    elem(model) * params / (plan.pipeline * plan.tensor) as f64
}

/// Pipeline fill/drain: `(compute, communication)` seconds.
pub fn bubble_time(model: &ModelSpec, cluster: &ClusterSpec, plan: &ParallelPlan) -> (f64, f64) {
    let p = plan.pipeline as f64;
    let comp = (p - 1.0) * microbatch_time(model, cluster, plan) / plan.interleave as f64;

    let d_p = pipeline_traffic_size(model, plan);
    let net_hops = 2.0 * (plan.pipeline_net as f64 - 1.0);
    let hb_hops = 2.0 * plan.pipeline_net as f64 * (plan.pipeline_hb as f64 - 1.0);
    let comm = net_hops * (d_p / cluster.net_bw + cluster.net_latency)
        + hb_hops * (d_p / cluster.hb_bw + cluster.hb_latency);
    (comp, comm)
}

/// The last pipeline stage's own work: `(compute, communication)` seconds.
pub fn last_stage_time(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    plan: &ParallelPlan,
) -> (f64, f64) {
    let m = plan.num_micro_batches as f64;
    let comp = m * microbatch_time(model, cluster, plan);

    let link = LinkParams::from_cluster(cluster);
    let tp_grid = GridShape {
        x: plan.tensor_hb,
        y: plan.tensor_net,
    };
    let tp = 8.0 * model.num_layers as f64 * m * ag_time(tp_traffic_size(model, plan), tp_grid, &link)
        / plan.pipeline as f64;

    // Without a pipeline there is no stage boundary to cross.
    let pp = if plan.pipeline == 1 {
        0.0
    } else {
        let (bw, lat) = if plan.pipeline_net > 1 {
            (cluster.net_bw, cluster.net_latency)
        } else {
            (cluster.hb_bw, cluster.hb_latency)
        };
        2.0 * m * plan.interleave as f64 * (pipeline_traffic_size(model, plan) / bw + lat)
    };
    (comp, tp + pp)
}

/// Gradient AllReduce across data-parallel replicas.
pub fn sync_time(model: &ModelSpec, cluster: &ClusterSpec, plan: &ParallelPlan) -> f64 {
    if plan.data == 1 {
        return 0.0;
    }
    let grid = GridShape {
        x: plan.data_hb,
        y: plan.data_net,
    };
    2.0 * ag_time(dp_traffic_size(model, plan), grid, &LinkParams::from_cluster(cluster))
}

/// Full breakdown for a plan. The plan is assumed structurally valid.
pub fn iteration_time(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    plan: &ParallelPlan,
) -> IterationBreakdown {
    let (t_bubble_comp, t_bubble_comm) = bubble_time(model, cluster, plan);
    let (t_ls_comp, t_ls_comm) = last_stage_time(model, cluster, plan);
    let t_sync = sync_time(model, cluster, plan);
    let t_iter = t_bubble_comp + t_bubble_comm + t_ls_comp + t_ls_comm + t_sync;
    let hfu = iteration_flops(model).total() / (t_iter * cluster.n_gpus as f64 * cluster.peak_flops);
    IterationBreakdown {
        t_bubble_comp,
        t_bubble_comm,
        t_ls_comp,
        t_ls_comm,
        t_sync,
        t_iter,
        hfu,
        d_mub_p: pipeline_traffic_size(model, plan),
        d_mub_t: tp_traffic_size(model, plan),
        d_d: dp_traffic_size(model, plan),
        mem_per_gpu: memory_per_gpu(model, plan),
    }
}

/// Efficiency that makes `plan`'s iteration time equal `target` seconds.
///
/// Compute terms scale with `1/efficiency` and communication terms do not,
/// so this is a closed-form solve.
pub fn calibrate_efficiency(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    plan: &ParallelPlan,
    target: f64,
) -> Result<f64> {
    let peak = ClusterSpec {
        efficiency: 1.0,
        ..*cluster
    };
    let b = iteration_time(model, &peak, plan);
    let comp = b.t_bubble_comp + b.t_ls_comp;
    let comm = b.t_iter - comp;
    let eff = comp / (target - comm);
    if !(target > comm) || !(eff > 0.0 && eff <= 1.0) {
        return Err(Error::spec(
            "calibration target",
            format!(
                "{target} s is unreachable: communication alone takes {comm} s and peak compute {comp} s"
            ),
        ));
    }
    Ok(eff)
}
