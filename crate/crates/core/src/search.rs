//! Exhaustive plan enumeration, iteration-time minimization and sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compute::memory_per_gpu;
use crate::error::{Error, Result};
use crate::iteration::{iteration_time, IterationBreakdown};
use crate::model::{ClusterSpec, ModelSpec, ParallelPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Upper bound on interleaved stages per device.
    pub max_interleave: u64,
    /// Upper bound on micro-batch size; `None` allows up to `B/d`.
    pub max_micro_batch: Option<u64>,
    /// Maximum number of candidate tuples generated before giving up.
    pub cap: u64,
    /// Worker threads for candidate evaluation; 0 uses the rayon default.
    pub jobs: usize,
    /// Also report the (t_iter, memory) Pareto front.
    pub pareto: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_interleave: 16,
            max_micro_batch: None,
            cap: 10_000_000,
            jobs: 0,
            pareto: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub plan: ParallelPlan,
    pub t_iter: f64,
    pub mem_per_gpu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_plan: ParallelPlan,
    pub breakdown: IterationBreakdown,
    pub n_candidates_examined: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pareto: Option<Vec<ParetoPoint>>,
}

/// Divisors of `n` in ascending order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n.is_multiple_of(i) {
            low.push(i);
            if i * i != n {
                high.push(n / i);
            }
        }
        i += 1;
    }
    low.extend(high.into_iter().rev());
    low
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Every plan passing [`crate::model::validate_plan`], in lexicographic
/// `(p, t, d, p_h, t_h, d_h, v, b)` order.
pub fn enumerate_plans(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    opts: &SearchOptions,
) -> Result<Vec<ParallelPlan>> {
    model.validate()?;
    cluster.validate()?;
    let (n, k) = (cluster.n_gpus, cluster.hb_size);
    let (l, s, h, batch) = (
        model.num_layers,
        model.seq_len,
        model.hidden_size,
        model.global_batch,
    );

    let mut generated = 0u64;
    let mut out = Vec::new();
    for p in divisors(n).into_iter().filter(|p| l % p == 0) {
        for t in divisors(n / p) {
            if s % t != 0 || h % t != 0 {
                continue;
            }
            let d = n / (p * t);
            if batch % d != 0 {
                continue;
            }
            let per_replica = batch / d;
            for p_h in divisors(gcd(p, k)) {
                for t_h in divisors(gcd(t, k / p_h)) {
                    let d_h = k / (p_h * t_h);
                    if d % d_h != 0 {
                        continue;
                    }
                    let net = (p / p_h, t / t_h, d / d_h);
                    for v in divisors(l / p) {
                        if v > opts.max_interleave {
                            break;
                        }
                        for b in divisors(per_replica) {
                            if opts.max_micro_batch.is_some_and(|max| b > max) {
                                break;
                            }
                            generated += 1;
                            if generated > opts.cap {
                                return Err(Error::Capacity {
                                    what: "plan candidates",
                                    requested: generated,
                                    limit: opts.cap,
                                });
                            }
                            let plan = ParallelPlan::from_splits(
                                (p_h, t_h, d_h),
                                net,
                                v,
                                b,
                                per_replica / b,
                            );
                            if memory_per_gpu(model, &plan) <= cluster.mem_bytes {
                                out.push(plan);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Picks the plan with the smallest iteration time; ties go to the
/// lexicographically smallest plan.
pub fn optimize(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let plans = enumerate_plans(model, cluster, opts)?;
    if plans.is_empty() {
        return Err(Error::NoValidPlan);
    }
    let scored: Vec<(ParallelPlan, IterationBreakdown)> = in_pool(opts.jobs, || {
        plans
            .par_iter()
            .map(|p| (*p, iteration_time(model, cluster, p)))
            .collect()
    })?;

    let (best_plan, breakdown) = *scored
        .iter()
        .min_by(|a, b| {
            a.1.t_iter
                .total_cmp(&b.1.t_iter)
                .then_with(|| a.0.order_key().cmp(&b.0.order_key()))
        })
        .expect("non-empty");

    let pareto = opts.pareto.then(|| pareto_front(&scored));
    Ok(SearchResult {
        best_plan,
        breakdown,
        n_candidates_examined: scored.len() as u64,
        pareto,
    })
}

/// Plans not beaten on both iteration time and per-GPU memory.
fn pareto_front(scored: &[(ParallelPlan, IterationBreakdown)]) -> Vec<ParetoPoint> {
    let mut pts: Vec<ParetoPoint> = scored
        .iter()
        .map(|(plan, b)| ParetoPoint {
            plan: *plan,
            t_iter: b.t_iter,
            mem_per_gpu: b.mem_per_gpu,
        })
        .collect();
    pts.sort_by(|a, b| {
        a.t_iter
            .total_cmp(&b.t_iter)
            .then(a.mem_per_gpu.total_cmp(&b.mem_per_gpu))
            .then_with(|| a.plan.order_key().cmp(&b.plan.order_key()))
    });
    let mut front: Vec<ParetoPoint> = Vec::new();
    for pt in pts {
        if front.last().is_none_or(|last| pt.mem_per_gpu < last.mem_per_gpu) {
            front.push(pt);
        }
    }
    front
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    HbSize,
    HbBw,
    NetBw,
    Batch,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::HbSize => "hb_size",
            SweepAxis::HbBw => "hb_bw",
            SweepAxis::NetBw => "net_bw",
            SweepAxis::Batch => "batch",
        }
    }

    /// Applies one sweep value to copies of the model and cluster.
    pub fn apply(
        &self,
        model: &ModelSpec,
        cluster: &ClusterSpec,
        value: f64,
    ) -> Result<(ModelSpec, ClusterSpec)> {
        let int = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(Error::Config(format!(
                    "{} sweep value must be a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        let (mut m, mut c) = (*model, *cluster);
        match self {
            SweepAxis::HbSize => c.hb_size = int()?,
            SweepAxis::HbBw => c.hb_bw = value,
            SweepAxis::NetBw => c.net_bw = value,
            SweepAxis::Batch => m.global_batch = int()?,
        }
        Ok((m, c))
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub value: f64,
    pub result: Result<SearchResult>,
    /// Same cell re-optimized with one HB domain spanning the cluster.
    pub ideal: Option<Result<SearchResult>>,
}

impl SweepRow {
    /// Ideal iteration time over this cell's, when both succeeded.
    pub fn relative_performance(&self) -> Option<f64> {
        match (&self.result, &self.ideal) {
            (Ok(r), Some(Ok(i))) => Some(i.breakdown.t_iter / r.breakdown.t_iter),
            _ => None,
        }
    }
}

/// Independent [`optimize`] per value, rows in input order. A failing cell
/// does not stop the others.
pub fn sweep(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    axis: SweepAxis,
    values: &[f64],
    opts: &SearchOptions,
    compare_ideal: bool,
) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let cell = axis.apply(model, cluster, value);
            let result = cell
                .as_ref()
                .map_err(|e| Error::Config(e.to_string()))
                .and_then(|(m, c)| optimize(m, c, opts));
            let ideal = compare_ideal.then(|| match &cell {
                Ok((m, c)) => optimize(m, &c.ideal(), opts),
                Err(e) => Err(Error::Config(e.to_string())),
            });
            SweepRow {
                value,
                result,
                ideal,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_plan;
    use crate::testutil::*;

    fn toy(batch: u64) -> ModelSpec {
        ModelSpec {
            hidden_size: 64,
            seq_len: 32,
            num_layers: 4,
            attn_heads: 8,
            vocab_size: 128,
            global_batch: batch,
            elem_bytes: 2,
        }
    }

    fn toy_cluster(n: u64, k: u64) -> ClusterSpec {
        ClusterSpec {
            hb_size: k,
            ..dgx_a100(n)
        }
    }

    /// Straight nested loops over every field, filtered by validate_plan.
    fn brute_force(model: &ModelSpec, cluster: &ClusterSpec) -> Vec<ParallelPlan> {
        let n = cluster.n_gpus;
        let mut out = Vec::new();
        for p in 1..=n {
            for t in 1..=n {
                for d in 1..=n {
                    if p * t * d != n {
                        continue;
                    }
                    for p_h in 1..=p {
                        for t_h in 1..=t {
                            for d_h in 1..=d {
                                if p % p_h + t % t_h + d % d_h != 0
                                    || p_h * t_h * d_h != cluster.hb_size
                                {
                                    continue;
                                }
                                for v in 1..=16 {
                                    for b in 1..=model.global_batch {
                                        let m = model.global_batch / d.max(1) / b;
                                        let plan = ParallelPlan::from_splits(
                                            (p_h, t_h, d_h),
                                            (p / p_h, t / t_h, d / d_h),
                                            v,
                                            b,
                                            m,
                                        );
                                        if validate_plan(&plan, model, cluster).is_empty() {
                                            out.push(plan);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn divisor_lists() {
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(49), vec![1, 7, 49]);
    }

    #[test]
    fn single_gpu_single_plan() {
        let plans = enumerate_plans(&tiny_model(), &single_gpu(), &SearchOptions::default()).unwrap();
        assert_eq!(plans, vec![single_plan()]);
        let r = optimize(&tiny_model(), &single_gpu(), &SearchOptions::default()).unwrap();
        assert_eq!(r.best_plan, single_plan());
        assert_eq!(r.n_candidates_examined, 1);
    }

    #[test]
    fn matches_brute_force_n8() {
        let (m, c) = (toy(8), toy_cluster(8, 8));
        let got = enumerate_plans(&m, &c, &SearchOptions::default()).unwrap();
        assert_eq!(got, brute_force(&m, &c));
        assert!(got.windows(2).all(|w| w[0].order_key() < w[1].order_key()));
    }

    #[test]
    fn optimum_matches_brute_force_n16() {
        let (m, c) = (toy(32), toy_cluster(16, 8));
        let r = optimize(&m, &c, &SearchOptions::default()).unwrap();
        let best = brute_force(&m, &c)
            .into_iter()
            .map(|p| (iteration_time(&m, &c, &p).t_iter, p))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.order_key().cmp(&b.1.order_key())))
            .unwrap();
        assert_eq!(r.best_plan, best.1);
        assert_eq!(r.breakdown.t_iter, best.0);
        assert!(validate_plan(&r.best_plan, &m, &c).is_empty());
    }

    #[test]
    fn parallel_equals_sequential() {
        let (m, c) = (gpt1t(512), dgx_a100(512));
        let seq = optimize(&m, &c, &SearchOptions { jobs: 1, pareto: true, ..Default::default() }).unwrap();
        let par = optimize(&m, &c, &SearchOptions { jobs: 8, pareto: true, ..Default::default() }).unwrap();
        assert_eq!(seq, par);
        assert_eq!(
            enumerate_plans(&m, &c, &SearchOptions::default()).unwrap(),
            enumerate_plans(&m, &c, &SearchOptions::default()).unwrap()
        );
    }

    #[test]
    fn pareto_front_is_monotone() {
        let (m, c) = (toy(32), toy_cluster(16, 8));
        let r = optimize(&m, &c, &SearchOptions { pareto: true, ..Default::default() }).unwrap();
        let front = r.pareto.unwrap();
        assert_eq!(front[0].plan, r.best_plan);
        assert!(front
            .windows(2)
            .all(|w| w[0].t_iter <= w[1].t_iter && w[0].mem_per_gpu > w[1].mem_per_gpu));
    }

    #[test]
    fn cap_and_empty_errors() {
        let (m, c) = (gpt1t(512), dgx_a100(512));
        let opts = SearchOptions { cap: 10, ..Default::default() };
        assert!(matches!(
            enumerate_plans(&m, &c, &opts),
            Err(Error::Capacity { limit: 10, .. })
        ));
        let small = ClusterSpec { mem_bytes: 1e6, ..c };
        assert!(matches!(
            optimize(&m, &small, &SearchOptions::default()),
            Err(Error::NoValidPlan)
        ));
    }

    #[test]
    fn interleave_and_micro_batch_limits() {
        let (m, c) = (toy(16), toy_cluster(8, 8));
        let opts = SearchOptions {
            max_interleave: 1,
            max_micro_batch: Some(1),
            ..Default::default()
        };
        let plans = enumerate_plans(&m, &c, &opts).unwrap();
        assert!(!plans.is_empty());
        assert!(plans.iter().all(|p| p.interleave == 1 && p.micro_batch == 1));
    }

    #[test]
    fn gh200_candidate_count_order() {
        let plans = enumerate_plans(&gpt1t(4096), &gh200(32768, 256), &SearchOptions::default()).unwrap();
        let n = plans.len();
        assert!((1_000..100_000).contains(&n), "{n}");
    }

    #[test]
    fn sweeps() {
        let (m, c) = (toy(32), toy_cluster(16, 8));
        assert!(sweep(&m, &c, SweepAxis::HbSize, &[], &SearchOptions::default(), true).is_empty());

        let rows = sweep(&m, &c, SweepAxis::HbSize, &[1.0, 3.0, 2.5, 16.0], &SearchOptions::default(), true);
        assert_eq!(rows.len(), 4);
        assert!(rows[0].result.is_ok());
        assert!(rows[1].result.is_err(), "3 does not divide 16");
        assert!(matches!(rows[2].result, Err(Error::Config(_))));
        assert_eq!(rows[3].relative_performance(), Some(1.0));
        let r0 = rows[0].relative_performance().unwrap();
        assert!(r0 > 0.0 && r0 <= 1.0);

        let rows = sweep(&m, &c, SweepAxis::NetBw, &[1e9, 1e10, 1e11], &SearchOptions::default(), false);
        let t: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().breakdown.t_iter).collect();
        assert!(t[0] >= t[1] && t[1] >= t[2]);
        assert!(rows[0].ideal.is_none());
    }

    #[test]
    fn ideal_domain_dominates() {
        let (m, c) = (toy(32), toy_cluster(16, 1));
        let ideal = optimize(&m, &c.ideal(), &SearchOptions::default()).unwrap();
        for k in [1, 2, 4, 8] {
            let r = optimize(&m, &ClusterSpec { hb_size: k, ..c }, &SearchOptions::default()).unwrap();
            assert!(ideal.breakdown.t_iter <= r.breakdown.t_iter);
        }
    }
}
