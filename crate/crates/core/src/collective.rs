//! Collective-communication costs on a two-tier grid of `x` GPUs per HB
//! domain times `y` HB domains.
//!
//! The hierarchical AllGather runs a ring of `y` GPUs on every rail over the
//! network (shards of `D/(x·y)`), then a ring of `x` GPUs inside every HB
//! domain (shards of `D/x`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClusterSpec;

/// Default enumeration limit for [`optimal_ag_bound`], in GPUs.
pub const DEFAULT_PARTITION_CAP: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    /// GPUs per HB domain taking part.
    pub x: u64,
    /// HB domains taking part.
    pub y: u64,
}

impl GridShape {
    pub fn new(x: u64, y: u64) -> Result<Self> {
        if x == 0 || y == 0 {
            return Err(Error::InvalidGrid { x, y });
        }
        Ok(Self { x, y })
    }

    pub fn size(&self) -> u64 {
        self.x * self.y
    }
}

/// Per-GPU link bandwidths (bytes/s) and per-step latencies (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub hb_bw: f64,
    pub net_bw: f64,
    #[serde(default)]
    pub hb_latency: f64,
    #[serde(default)]
    pub net_latency: f64,
}

impl LinkParams {
    /// Zero-latency links.
    pub fn new(hb_bw: f64, net_bw: f64) -> Self {
        Self {
            hb_bw,
            net_bw,
            hb_latency: 0.0,
            net_latency: 0.0,
        }
    }

    pub fn from_cluster(c: &ClusterSpec) -> Self {
        Self {
            hb_bw: c.hb_bw,
            net_bw: c.net_bw,
            hb_latency: c.hb_latency,
            net_latency: c.net_latency,
        }
    }
}

/// Hierarchical AllGather time for `bytes` of gathered output per GPU.
pub fn ag_time(bytes: f64, grid: GridShape, link: &LinkParams) -> f64 {
    let (x, y) = (grid.x as f64, grid.y as f64);
    (y - 1.0) * bytes / (x * y * link.net_bw)
        + (x - 1.0) * bytes / (x * link.hb_bw)
        + (y - 1.0) * link.net_latency
        + (x - 1.0) * link.hb_latency
}

/// ReduceScatter runs the AllGather schedule in reverse; same cost.
pub fn rs_time(bytes: f64, grid: GridShape, link: &LinkParams) -> f64 {
    ag_time(bytes, grid, link)
}

/// ReduceScatter followed by AllGather.
pub fn ar_time(bytes: f64, grid: GridShape, link: &LinkParams) -> f64 {
    2.0 * ag_time(bytes, grid, link)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FabricVariant {
    /// Full-bisection network across rails.
    RailOptimized,
    /// Each rail is an isolated network.
    RailOnly,
}

/// A proper, non-empty subset of the grid's GPUs.
///
/// Bit `r·x + c` is the GPU at rail `c` of HB domain `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionMatrix {
    pub grid: GridShape,
    pub bits: u64,
}

impl PartitionMatrix {
    pub fn new(grid: GridShape, bits: u64) -> Result<Self> {
        let n = grid.size();
        if n > 63 {
            return Err(Error::Capacity {
                what: "partition grid size",
                requested: n,
                limit: 63,
            });
        }
        let all = (1u64 << n) - 1;
        if bits == 0 || bits >= all {
            return Err(Error::spec(
                "partition",
                "must be a proper non-empty subset of the grid",
            ));
        }
        Ok(Self { grid, bits })
    }

    pub fn contains(&self, domain: u64, rail: u64) -> bool {
        self.bits >> (domain * self.grid.x + rail) & 1 == 1
    }

    pub fn complement(&self) -> Self {
        let all = (1u64 << self.grid.size()) - 1;
        Self {
            grid: self.grid,
            bits: !self.bits & all,
        }
    }

    pub fn count(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Complete HB domains inside the partition.
    pub fn full_domains(&self) -> u64 {
        let row = (1u64 << self.grid.x) - 1;
        (0..self.grid.y)
            .filter(|r| (self.bits >> (r * self.grid.x)) & row == row)
            .count() as u64
    }

    /// Complete rails inside the partition.
    pub fn full_rails(&self) -> u64 {
        (0..self.grid.x)
            .filter(|&c| (0..self.grid.y).all(|r| self.contains(r, c)))
            .count() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgBound {
    /// Lower bound on AllGather time per unit of data, in seconds.
    pub time_per_unit: f64,
    /// The partition attaining it (smallest bitmask on ties).
    pub partition: PartitionMatrix,
}

/// Cut ingress/egress bandwidth of one side of a partition.
fn cut_bandwidth(side: &PartitionMatrix, c_f: f64, c_s: f64, variant: FabricVariant) -> f64 {
    let g = side.grid;
    let mut bw = (c_f + c_s) * side.count() as f64 - (g.x * side.full_domains()) as f64 * c_f;
    if variant == FabricVariant::RailOnly {
        bw -= (g.y * side.full_rails()) as f64 * c_s;
    }
    bw
}

/// Partition-based AllGather lower bound, with the default size cap.
pub fn optimal_ag_bound(
    grid: GridShape,
    c_f: f64,
    c_s: f64,
    variant: FabricVariant,
) -> Result<AgBound> {
    optimal_ag_bound_capped(grid, c_f, c_s, variant, DEFAULT_PARTITION_CAP)
}

/// Exhaustive search over every proper partition of an `x·y ≤ cap` grid for
/// the one maximizing larger-side size over the smaller cut bandwidth.
pub fn optimal_ag_bound_capped(
    grid: GridShape,
    c_f: f64,
    c_s: f64,
    variant: FabricVariant,
    cap: u32,
) -> Result<AgBound> {
    let n = grid.size();
    if n > cap as u64 || n > 63 {
        return Err(Error::Capacity {
            what: "AllGather bound grid size",
            requested: n,
            limit: (cap as u64).min(63),
        });
    }
    if !(c_f > 0.0 && c_s > 0.0) {
        return Err(Error::spec("link bandwidths", "C_F and C_S must be positive"));
    }
    if n == 1 {
        return Err(Error::spec(
            "partition",
            "a single GPU has no proper partition",
        ));
    }

    let mut best: Option<AgBound> = None;
    for bits in 1..(1u64 << n) - 1 {
        let a = PartitionMatrix { grid, bits };
        let b = a.complement();
        let num = a.count().max(b.count()) as f64;
        let den = cut_bandwidth(&a, c_f, c_s, variant).min(cut_bandwidth(&b, c_f, c_s, variant));
        let t = num / den;
        if best.is_none_or(|cur| t > cur.time_per_unit) {
            best = Some(AgBound {
                time_per_unit: t,
                partition: a,
            });
        }
    }
    Ok(best.expect("grid has at least one proper partition"))
}

/// What the network-domain slowdown looks like for an All-to-All.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum A2aSlowdown {
    /// Relative extra time of rail-only over full bisection.
    Ratio(f64),
    /// Single HB domain: nothing crosses the network, the ratio is undefined.
    NoNetworkTraffic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2aTimes {
    pub full_bisection: f64,
    pub rail_only: f64,
    pub slowdown: A2aSlowdown,
}

/// All-to-All with shard size `bytes` on full-bisection and rail-only
/// fabrics; rail-only forwards through the HB domain first.
pub fn a2a_times(bytes: f64, grid: GridShape, c_f: f64, c_s: f64) -> A2aTimes {
    let (x, y) = (grid.x as f64, grid.y as f64);
    let full = x * (y - 1.0) * bytes / c_s;
    let rail_only = y * (x - 1.0) * bytes / c_f + full;
    let slowdown = if grid.y == 1 {
        A2aSlowdown::NoNetworkTraffic
    } else {
        A2aSlowdown::Ratio(y * (x - 1.0) * c_s / (x * (y - 1.0) * c_f))
    };
    A2aTimes {
        full_bisection: full,
        rail_only,
        slowdown,
    }
}

/// Step-by-step simulation of the two-phase ring AllGather, tracking which
/// chunks every GPU holds. Returns the summed step durations.
///
/// Panics if the schedule fails to deliver every chunk; meant for small
/// grids in tests.
pub fn simulate_hierarchical_ag(bytes: f64, grid: GridShape, c_f: f64, c_s: f64) -> f64 {
    let (x, y) = (grid.x as usize, grid.y as usize);
    let n = x * y;
    let gpu = |domain: usize, rail: usize| domain * x + rail;
    // held[g][c]: GPU g has chunk c (size D/n) of the gathered buffer.
    let mut held = vec![vec![false; n]; n];
    for (g, h) in held.iter_mut().enumerate() {
        h[g] = true;
    }
    let mut elapsed = 0.0;

    // Phase 1: per-rail ring over the network; every message is one chunk.
    // The chunk forwarded at step k is the one received at step k−1.
    let mut sending: Vec<usize> = (0..n).collect();
    for _ in 1..y {
        let mut step = 0.0f64;
        let mut next = sending.clone();
        for rail in 0..x {
            for d in 0..y {
                let src = gpu(d, rail);
                let dst = gpu((d + 1) % y, rail);
                let chunk = sending[src];
                held[dst][chunk] = true;
                next[dst] = chunk;
                step = step.max(bytes / n as f64 / c_s);
            }
        }
        sending = next;
        elapsed += step;
    }

    // Phase 2: per-domain ring; each message is the sender's rail bundle of
    // y chunks, i.e. D/x bytes.
    let bundle = |g: usize| -> Vec<usize> { (0..y).map(|d| gpu(d, g % x)).collect() };
    let mut sending: Vec<Vec<usize>> = (0..n).map(bundle).collect();
    for _ in 1..x {
        let mut step = 0.0f64;
        let mut next = sending.clone();
        for d in 0..y {
            for rail in 0..x {
                let src = gpu(d, rail);
                let dst = gpu(d, (rail + 1) % x);
                let msg = sending[src].clone();
                let size = msg.len() as f64 * bytes / n as f64;
                for &c in &msg {
                    assert!(held[src][c], "forwarding a chunk not yet received");
                    held[dst][c] = true;
                }
                next[dst] = msg;
                step = step.max(size / c_f);
            }
        }
        sending = next;
        elapsed += step;
    }

    assert!(
        held.iter().all(|h| h.iter().all(|&b| b)),
        "schedule left chunks undelivered"
    );
    elapsed
}
