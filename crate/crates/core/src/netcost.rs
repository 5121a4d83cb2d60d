//! Switch and transceiver counts, and prices, for a full-bisection Clos
//! fabric versus a rail-only fabric.
//!
//! A folded Clos of radix-`k` switches reaches `k`, `k²/2` and `k³/4`
//! endpoints with 1, 2 and 3 tiers. Every endpoint needs two transceivers
//! per tier. Switch prices count all `k` ports, used or not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FabricKind {
    SotaClos,
    RailOnly,
}

/// Unit prices in USD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prices {
    pub transceiver: u64,
    pub switch_port: u64,
}

impl Default for Prices {
    fn default() -> Self {
        Self {
            transceiver: 374,
            switch_port: 748,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FabricDesign {
    pub variant: FabricKind,
    pub radix: u64,
    pub tiers: u32,
    pub n_switches: u64,
    pub n_transceivers: u64,
    /// USD at default prices.
    pub total_cost: u64,
}

fn capacity(radix: u64, tiers: u32) -> u128 {
    let k = radix as u128;
    match tiers {
        1 => k,
        2 => k * k / 2,
        _ => k * k * k / 4,
    }
}

fn check_radix(radix: u64) -> Result<()> {
    if radix < 2 {
        return Err(Error::spec("radix", format!("need at least 2 ports, got {radix}")));
    }
    Ok(())
}

/// Counts for a tiered Clos over `n` endpoints.
fn clos_counts(n: u64, radix: u64) -> Result<(u32, u64, u64)> {
    check_radix(radix)?;
    if n == 0 {
        return Err(Error::spec("endpoints", "need at least one endpoint"));
    }
    let tiers = (1..=3)
        .find(|&t| capacity(radix, t) >= n as u128)
        .ok_or(Error::Capacity {
            what: "endpoints for a 3-tier Clos",
            requested: n,
            limit: capacity(radix, 3).min(u64::MAX as u128) as u64,
        })?;
    let edge = n.div_ceil(radix);
    let pair = (2 * n).div_ceil(radix);
    let switches = match tiers {
        1 => edge,
        2 => pair + edge,
        _ => 2 * pair + edge,
    };
    Ok((tiers, switches, 2 * n * tiers as u64))
}

fn design(variant: FabricKind, radix: u64, tiers: u32, n_switches: u64, n_transceivers: u64) -> FabricDesign {
    let mut d = FabricDesign {
        variant,
        radix,
        tiers,
        n_switches,
        n_transceivers,
        total_cost: 0,
    };
    d.total_cost = price(&d, &Prices::default());
    d
}

/// Full-bisection rail-optimized Clos over `n_endpoints` GPUs.
pub fn clos_design(n_endpoints: u64, radix: u64) -> Result<FabricDesign> {
    let (tiers, sw, tr) = clos_counts(n_endpoints, radix)?;
    Ok(design(FabricKind::SotaClos, radix, tiers, sw, tr))
}

/// One isolated Clos per rail: `hb_size` rails of `n_gpus/hb_size` GPUs.
/// Rails small enough for one switch share switches.
pub fn railonly_design(n_gpus: u64, hb_size: u64, radix: u64) -> Result<FabricDesign> {
    check_radix(radix)?;
    if hb_size == 0 || n_gpus == 0 || !n_gpus.is_multiple_of(hb_size) {
        return Err(Error::spec(
            "cluster",
            format!("hb_size ({hb_size}) must divide n_gpus ({n_gpus})"),
        ));
    }
    let rail = n_gpus / hb_size;
    let (tiers, sw, tr) = clos_counts(rail, radix)?;
    let n_switches = if tiers == 1 {
        hb_size.div_ceil(radix / rail)
    } else {
        sw * hb_size
    };
    Ok(design(FabricKind::RailOnly, radix, tiers, n_switches, tr * hb_size))
}

pub fn price(design: &FabricDesign, prices: &Prices) -> u64 {
    design.n_switches * design.radix * prices.switch_port + design.n_transceivers * prices.transceiver
}

/// Percent saved by `rail_only` relative to `sota`, rounded down.
pub fn cost_reduction(sota: u64, rail_only: u64) -> i64 {
    if sota == 0 {
        return 0;
    }
    let saved = sota as i128 - rail_only as i128;
    (100 * saved).div_euclid(sota as i128) as i64
}

/// One row of a Clos versus rail-only comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub n_gpus: u64,
    pub hb_size: u64,
    pub radix: u64,
    pub sota: FabricDesign,
    pub rail_only: FabricDesign,
    pub sota_cost: u64,
    pub rail_only_cost: u64,
    pub reduction_percent: i64,
    /// Unrounded `1 − rail_only/sota`.
    pub reduction_fraction: f64,
}

pub fn compare(n_gpus: u64, hb_size: u64, radix: u64, prices: &Prices) -> Result<CostComparison> {
    let sota = clos_design(n_gpus, radix)?;
    let rail_only = railonly_design(n_gpus, hb_size, radix)?;
    let (a, b) = (price(&sota, prices), price(&rail_only, prices));
    Ok(CostComparison {
        n_gpus,
        hb_size,
        radix,
        sota,
        rail_only,
        sota_cost: a,
        rail_only_cost: b,
        reduction_percent: cost_reduction(a, b),
        reduction_fraction: if a == 0 { 0.0 } else { 1.0 - b as f64 / a as f64 },
    })
}
