//! Per-GPU-pair traffic of one training iteration.
//!
//! A plan is first mapped onto physical GPUs ([`build_placement`]), then
//! every tensor-parallel collective, data-parallel AllReduce and pipeline
//! transfer is expanded into ring steps and summed per ordered GPU pair
//! ([`traffic_matrix`]).
//!
//! GPU `id` sits in HB domain `id / K` at rank `id % K`. Inside a domain the
//! rank is `th + t_h·(dh + d_h·slot)`; across domains the domain index is
//! `tl + t_l·(dl + d_l·g)`, where `g` is the network pipeline group and
//! `slot` the HB pipeline slot.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collective::GridShape;
use crate::error::{Error, Result};
use crate::iteration::{dp_traffic_size, pipeline_traffic_size, tp_traffic_size};
use crate::model::{shape_violations, ClusterSpec, ModelSpec, ParallelPlan};
use crate::numfmt::fixed_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrafficClass {
    /// Tensor-parallel AllGather and ReduceScatter.
    #[serde(rename = "TP_AG_RS")]
    TpAgRs,
    /// Data-parallel gradient AllReduce.
    #[serde(rename = "DP_AR")]
    DpAr,
    /// Pipeline activations and gradients.
    #[serde(rename = "PP_P2P")]
    PpP2p,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 3] = [TrafficClass::TpAgRs, TrafficClass::DpAr, TrafficClass::PpP2p];

    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficClass::TpAgRs => "TP_AG_RS",
            TrafficClass::DpAr => "DP_AR",
            TrafficClass::PpP2p => "PP_P2P",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Logical coordinates of one GPU's work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub pp_stage: u64,
    pub dp_rank: u64,
    pub tp_rank: u64,
}

/// Bijection between logical coordinates and physical GPU ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementMap {
    plan: ParallelPlan,
    hb_size: u64,
    /// Indexed by `(pp_stage·d + dp_rank)·t + tp_rank`.
    gpu_of: Vec<u32>,
    coord_of: Vec<Coord>,
}

impl PlacementMap {
    pub fn plan(&self) -> &ParallelPlan {
        &self.plan
    }

    pub fn n_gpus(&self) -> u64 {
        self.gpu_of.len() as u64
    }

    pub fn hb_size(&self) -> u64 {
        self.hb_size
    }

    pub fn gpu(&self, c: Coord) -> u32 {
        let p = &self.plan;
        self.gpu_of[((c.pp_stage * p.data + c.dp_rank) * p.tensor + c.tp_rank) as usize]
    }

    pub fn coord(&self, gpu: u32) -> Coord {
        self.coord_of[gpu as usize]
    }

    pub fn domain(&self, gpu: u32) -> u64 {
        gpu as u64 / self.hb_size
    }

    pub fn rank(&self, gpu: u32) -> u64 {
        gpu as u64 % self.hb_size
    }

    /// Hex SHA-256 of the GPU id sequence in logical-coordinate order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for g in &self.gpu_of {
            h.update(g.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Places a plan on the cluster. Only the shape constraints are checked;
/// placement does not depend on the model or on memory capacity.
pub fn build_placement(plan: &ParallelPlan, cluster: &ClusterSpec) -> Result<PlacementMap> {
    let violations = shape_violations(plan, cluster);
    if !violations.is_empty() {
        return Err(Error::InvalidPlan(violations));
    }
    if cluster.n_gpus > u32::MAX as u64 {
        return Err(Error::Capacity {
            what: "GPUs in a traffic matrix",
            requested: cluster.n_gpus,
            limit: u32::MAX as u64,
        });
    }
    let p = plan;
    let k = cluster.hb_size;
    let n = cluster.n_gpus as usize;
    let mut gpu_of = vec![0u32; n];
    let mut coord_of = vec![
        Coord {
            pp_stage: 0,
            dp_rank: 0,
            tp_rank: 0
        };
        n
    ];

    for g in 0..p.pipeline_net {
        for j in 0..p.pipeline_hb {
            // Reverse the slot order in odd groups so a stage and its
            // successor in the next group share an HB rank.
            let slot = if g % 2 == 0 { j } else { p.pipeline_hb - 1 - j };
            let stage = j + p.pipeline_hb * g;
            for dl in 0..p.data_net {
                for dh in 0..p.data_hb {
                    for tl in 0..p.tensor_net {
                        for th in 0..p.tensor_hb {
                            let rank = th + p.tensor_hb * (dh + p.data_hb * slot);
                            let domain = tl + p.tensor_net * (dl + p.data_net * g);
                            let gpu = domain * k + rank;
                            let c = Coord {
                                pp_stage: stage,
                                dp_rank: dh + p.data_hb * dl,
                                tp_rank: th + p.tensor_hb * tl,
                            };
                            let idx = (c.pp_stage * p.data + c.dp_rank) * p.tensor + c.tp_rank;
                            gpu_of[idx as usize] = gpu as u32;
                            coord_of[gpu as usize] = c;
                        }
                    }
                }
            }
        }
    }
    Ok(PlacementMap {
        plan: *plan,
        hb_size: k,
        gpu_of,
        coord_of,
    })
}

/// Sparse bytes-per-iteration matrix, split by traffic class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficMatrix {
    pub n_gpus: u64,
    pub hb_size: u64,
    entries: BTreeMap<(u32, u32), [f64; 3]>,
}

impl TrafficMatrix {
    pub fn new(n_gpus: u64, hb_size: u64) -> Self {
        Self {
            n_gpus,
            hb_size,
            entries: BTreeMap::new(),
        }
    }

    /// Adds `bytes` from `src` to `dst`; zero amounts and self-traffic are
    /// dropped.
    pub fn add(&mut self, src: u32, dst: u32, class: TrafficClass, bytes: f64) {
        if src == dst || bytes == 0.0 {
            return;
        }
        assert!(bytes > 0.0, "negative traffic {bytes}");
        self.entries.entry((src, dst)).or_default()[class.index()] += bytes;
    }

    pub fn get(&self, src: u32, dst: u32, class: TrafficClass) -> f64 {
        self.entries
            .get(&(src, dst))
            .map_or(0.0, |e| e[class.index()])
    }

    pub fn pair_total(&self, src: u32, dst: u32) -> f64 {
        self.entries.get(&(src, dst)).map_or(0.0, |e| e.iter().sum())
    }

    /// Nonzero ordered pairs with their per-class bytes, in `(src, dst)` order.
    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), &[f64; 3])> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn nonzero_pairs(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_total(&self, class: TrafficClass) -> f64 {
        self.entries.values().map(|e| e[class.index()]).sum()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().flat_map(|e| e.iter()).sum()
    }

    fn same_domain(&self, a: u32, b: u32) -> bool {
        a as u64 / self.hb_size == b as u64 / self.hb_size
    }
}

/// One direction of a hierarchical ring collective over `members`, laid out
/// as `y` rows of `x` (row = network index, column = HB index). Phase 1 runs
/// rings down each column, phase 2 rings along each row; `scale` multiplies
/// the per-GPU shares `(y−1)·D/(x·y)` and `(x−1)·D/x`.
fn add_hierarchical_ring(
    m: &mut TrafficMatrix,
    members: &[u32],
    grid: GridShape,
    bytes: f64,
    scale: f64,
    class: TrafficClass,
) {
    let (x, y) = (grid.x as usize, grid.y as usize);
    let (xf, yf) = (grid.x as f64, grid.y as f64);
    let net_share = scale * (yf - 1.0) * bytes / (xf * yf);
    let hb_share = scale * (xf - 1.0) * bytes / xf;
    for r in 0..y {
        for c in 0..x {
            let me = members[r * x + c];
            if y > 1 {
                m.add(me, members[((r + 1) % y) * x + c], class, net_share);
            }
            if x > 1 {
                m.add(me, members[r * x + (c + 1) % x], class, hb_share);
            }
        }
    }
}

/// Expands one iteration of `placement`'s plan into per-pair bytes.
pub fn traffic_matrix(model: &ModelSpec, placement: &PlacementMap) -> TrafficMatrix {
    let plan = placement.plan();
    let mut m = TrafficMatrix::new(placement.n_gpus(), placement.hb_size());
    let (p, t, d) = (plan.pipeline, plan.tensor, plan.data);
    let micro = plan.num_micro_batches as f64;
    let at = |pp_stage, dp_rank, tp_rank| {
        placement.gpu(Coord {
            pp_stage,
            dp_rank,
            tp_rank,
        })
    };

    // Tensor parallel: 4 AllGathers and 4 ReduceScatters per layer per
    // micro-batch, each the same ring schedule.
    let tp_grid = GridShape {
        x: plan.tensor_hb,
        y: plan.tensor_net,
    };
    let tp_rounds = 8.0 * (model.num_layers / p) as f64 * micro;
    let d_t = tp_traffic_size(model, plan);
    for s in 0..p {
        for r in 0..d {
            let group: Vec<u32> = (0..t).map(|i| at(s, r, i)).collect();
            add_hierarchical_ring(&mut m, &group, tp_grid, d_t, tp_rounds, TrafficClass::TpAgRs);
        }
    }

    // Data parallel: one AllReduce (ReduceScatter then AllGather).
    let dp_grid = GridShape {
        x: plan.data_hb,
        y: plan.data_net,
    };
    let d_d = dp_traffic_size(model, plan);
    for s in 0..p {
        for i in 0..t {
            let group: Vec<u32> = (0..d).map(|r| at(s, r, i)).collect();
            add_hierarchical_ring(&mut m, &group, dp_grid, d_d, 2.0, TrafficClass::DpAr);
        }
    }

    // Pipeline: forward activations and backward gradients across every
    // stage boundary. With v chunks per device each micro-batch crosses a
    // linear boundary v times and the last-to-first wrap v−1 times.
    if p > 1 {
        let d_p = pipeline_traffic_size(model, plan);
        let v = plan.interleave as f64;
        let linear = micro * v * d_p;
        let wrap = micro * (v - 1.0) * d_p;
        for r in 0..d {
            for i in 0..t {
                for s in 0..p - 1 {
                    let (a, b) = (at(s, r, i), at(s + 1, r, i));
                    m.add(a, b, TrafficClass::PpP2p, linear);
                    m.add(b, a, TrafficClass::PpP2p, linear);
                }
                if wrap > 0.0 {
                    let (last, first) = (at(p - 1, r, i), at(0, r, i));
                    add_rail_routed(&mut m, last, first, wrap);
                    add_rail_routed(&mut m, first, last, wrap);
                }
            }
        }
    }
    m
}

/// Point-to-point transfer that must not cross rails: if source and
/// destination differ in both domain and rank, the bytes are relayed through
/// the source domain's GPU holding the destination's rank.
fn add_rail_routed(m: &mut TrafficMatrix, src: u32, dst: u32, bytes: f64) {
    let k = m.hb_size as u32;
    if m.same_domain(src, dst) || src % k == dst % k {
        m.add(src, dst, TrafficClass::PpP2p, bytes);
    } else {
        let relay = src / k * k + dst % k;
        m.add(src, relay, TrafficClass::PpP2p, bytes);
        m.add(relay, dst, TrafficClass::PpP2p, bytes);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: TrafficClass,
    pub bytes: f64,
    /// Share of all bytes in the matrix.
    pub byte_fraction: f64,
    /// Ordered pairs carrying this class.
    pub pairs: u64,
    /// `pairs` over all `N·(N−1)` ordered pairs.
    pub pair_fraction: f64,
    /// Share of this class's bytes between GPUs of the same HB domain.
    pub within_hb_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSummary {
    /// No traffic at all; every fraction is then zero.
    pub empty: bool,
    pub total_bytes: f64,
    pub ordered_pairs: u64,
    pub nonzero_pairs: u64,
    pub zero_pair_fraction: f64,
    pub classes: Vec<ClassSummary>,
}

impl TrafficSummary {
    pub fn class(&self, class: TrafficClass) -> &ClassSummary {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .expect("every class is summarized")
    }
}

pub fn classify_summary(m: &TrafficMatrix) -> TrafficSummary {
    let n = m.n_gpus;
    let ordered_pairs = n * n.saturating_sub(1);
    let total = m.total();
    let frac = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };

    let classes = TrafficClass::ALL
        .iter()
        .map(|&class| {
            let (mut bytes, mut inside, mut pairs) = (0.0, 0.0, 0u64);
            for ((s, d), e) in m.iter() {
                let b = e[class.index()];
                if b > 0.0 {
                    bytes += b;
                    pairs += 1;
                    if m.same_domain(s, d) {
                        inside += b;
                    }
                }
            }
            ClassSummary {
                class,
                bytes,
                byte_fraction: frac(bytes, total),
                pairs,
                pair_fraction: frac(pairs as f64, ordered_pairs as f64),
                within_hb_fraction: frac(inside, bytes),
            }
        })
        .collect();

    let nonzero = m.nonzero_pairs() as u64;
    TrafficSummary {
        empty: m.is_empty(),
        total_bytes: total,
        ordered_pairs,
        nonzero_pairs: nonzero,
        zero_pair_fraction: if m.is_empty() {
            0.0
        } else {
            frac((ordered_pairs - nonzero) as f64, ordered_pairs as f64)
        },
        classes,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RailLocality {
    pub ok: bool,
    /// Pairs joining different domains at different ranks.
    pub violations: Vec<(u32, u32)>,
}

/// Checks that every nonzero entry stays inside an HB domain or on a rail.
pub fn assert_rail_locality(m: &TrafficMatrix, placement: &PlacementMap) -> RailLocality {
    let violations: Vec<(u32, u32)> = m
        .iter()
        .map(|(pair, _)| pair)
        .filter(|&(s, d)| {
            placement.domain(s) != placement.domain(d) && placement.rank(s) != placement.rank(d)
        })
        .collect();
    RailLocality {
        ok: violations.is_empty(),
        violations,
    }
}

/// Sparse `src,dst,bytes,class` listing, one row per nonzero pair and class.
pub fn write_triplets<W: Write>(m: &TrafficMatrix, mut out: W) -> Result<()> {
    writeln!(out, "src,dst,bytes,class")?;
    for ((s, d), e) in m.iter() {
        for class in TrafficClass::ALL {
            let b = e[class.index()];
            if b > 0.0 {
                writeln!(out, "{s},{d},{},{class}", fixed_sig(b, 6))?;
            }
        }
    }
    Ok(())
}

/// Smallest block edge that keeps a heatmap at most `max_cells` per side.
pub fn heatmap_block_size(n_gpus: u64, max_cells: u64) -> u64 {
    n_gpus.div_ceil(max_cells.max(1)).max(1)
}

/// Dense heatmap of all classes, summed over `block`×`block` GPU tiles.
pub fn write_heatmap<W: Write>(m: &TrafficMatrix, block: u64, mut out: W) -> Result<()> {
    let block = block.max(1);
    let cells = m.n_gpus.div_ceil(block) as usize;
    let mut grid = vec![0.0f64; cells * cells];
    for ((s, d), e) in m.iter() {
        let (i, j) = ((s as u64 / block) as usize, (d as u64 / block) as usize);
        grid[i * cells + j] += e.iter().sum::<f64>();
    }
    writeln!(
        out,
        "# bytes per iteration; cell (i,j) sums traffic from GPUs [i*{block}, (i+1)*{block}) to GPUs [j*{block}, (j+1)*{block}); n_gpus={}",
        m.n_gpus
    )?;
    for row in grid.chunks(cells.max(1)) {
        let line: Vec<String> = row.iter().map(|v| fixed_sig(*v, 6)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
