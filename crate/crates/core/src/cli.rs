//! Command-line front end: one JSON config per run, CSV or JSON reports.
//!
//! ```text
//! railplan itertime --config row.json --format json
//! railplan sweep --config sweep.json --jobs 8 --out sweep.csv
//! railplan traffic --config traffic.json --out atlas/
//! ```
//!
//! CSV numbers carry 6 significant digits in positional notation; JSON keeps
//! full precision. Errors go to stderr as `{"error": {"kind", "message"}}`
//! with a nonzero exit status.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::iteration::{calibrate_efficiency, iteration_time, IterationBreakdown};
use crate::model::{validate_plan, ClusterSpec, ModelSpec, ParallelPlan};
use crate::netcost::{compare, CostComparison, FabricDesign, Prices};
use crate::numfmt::fixed_sig;
use crate::search::{optimize, sweep, SearchOptions, SearchResult, SweepAxis, SweepRow};
use crate::traffic::{
    assert_rail_locality, build_placement, classify_summary, heatmap_block_size, traffic_matrix,
    write_heatmap, write_triplets, TrafficClass,
};

#[derive(Debug, Parser)]
#[command(name = "railplan", version, about = "LLM training iteration-time and network planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; for `traffic`, a directory receiving the matrix, heatmap and sidecar.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for plan evaluation; never changes results.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Plan enumeration cap.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Iteration-time breakdown of one plan.
    Itertime,
    /// Best plan for a model and cluster.
    Search,
    /// Best plan per value of one swept parameter.
    Sweep,
    /// Traffic matrix, heatmap and summary for one plan.
    Traffic,
    /// Clos versus rail-only fabric cost.
    Cost,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Itertime => "itertime",
            Command::Search => "search",
            Command::Sweep => "sweep",
            Command::Traffic => "traffic",
            Command::Cost => "cost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub cluster: Option<ClusterSpec>,
    pub plan: Option<ParallelPlan>,
    /// Solve the cluster efficiency from a reference run before evaluating.
    pub calibrate: Option<Calibration>,
    pub search: Option<SearchOptions>,
    pub sweep: Option<SweepConfig>,
    pub traffic: Option<TrafficConfig>,
    pub cost: Option<CostConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub model: ModelSpec,
    /// Defaults to the run's cluster.
    pub cluster: Option<ClusterSpec>,
    pub plan: ParallelPlan,
    pub target_t_iter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Also optimize each cell with one HB domain spanning the cluster.
    #[serde(default)]
    pub compare_ideal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    /// Largest heatmap edge in cells; GPUs are grouped into blocks to fit.
    #[serde(default = "default_heatmap_cells")]
    pub heatmap_max_cells: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            heatmap_max_cells: default_heatmap_cells(),
        }
    }
}

fn default_heatmap_cells() -> u64 {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub rows: Vec<CostRow>,
    #[serde(default)]
    pub prices: Prices,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRow {
    pub n_gpus: u64,
    pub hb_size: u64,
    pub radix: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fails with every section `command` needs but the config lacks.
    fn require(&self, command: Command) -> Result<()> {
        let mut missing = Vec::new();
        let needs_model = command != Command::Cost;
        if needs_model && self.model.is_none() {
            missing.push("model");
        }
        if needs_model && self.cluster.is_none() {
            missing.push("cluster");
        }
        match command {
            Command::Itertime | Command::Traffic if self.plan.is_none() => missing.push("plan"),
            Command::Sweep if self.sweep.is_none() => missing.push("sweep"),
            Command::Cost if self.cost.is_none() => missing.push("cost"),
            _ => {}
        }
        if missing.is_empty() {
            return Ok(());
        }
        Err(Error::Config(format!(
            "{} needs missing field(s): {}",
            command.name(),
            missing.join(", ")
        )))
    }

    fn model(&self) -> ModelSpec {
        self.model.expect("checked by require")
    }

    fn cluster(&self) -> ClusterSpec {
        self.cluster.expect("checked by require")
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim(), None);
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let detail = match &e {
                Error::InvalidPlan(v) => serde_json::to_value(v).ok(),
                _ => None,
            };
            report_error(e.kind(), &e.to_string(), detail);
            1
        }
    }
}

fn report_error(kind: &str, message: &str, violations: Option<serde_json::Value>) {
    let mut err = json!({ "kind": kind, "message": message });
    if let Some(v) = violations {
        err["violations"] = v;
    }
    eprintln!("{}", json!({ "error": err }));
}

pub fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.require(cli.command)?;
    if let Some(m) = &cfg.model {
        m.validate()?;
    }
    if let Some(c) = &cfg.cluster {
        c.validate()?;
    }
    let mut opts = cfg.search.clone().unwrap_or_default();
    if let Some(j) = cli.jobs {
        opts.jobs = j;
    }
    if let Some(c) = cli.cap {
        opts.cap = c;
    }
    if let Some(cal) = &cfg.calibrate {
        let base = cal.cluster.or(cfg.cluster).ok_or_else(|| {
            Error::Config("calibrate needs a cluster (its own or the run's)".into())
        })?;
        reject_invalid(&cal.plan, &cal.model, &base)?;
        let eff = calibrate_efficiency(&cal.model, &base, &cal.plan, cal.target_t_iter)?;
        if let Some(c) = cfg.cluster.as_mut() {
            c.efficiency = eff;
        }
    }

    if cli.command == Command::Traffic {
        return cmd_traffic(&cfg, cli.format, cli.out.as_deref());
    }
    let text = match cli.command {
        Command::Itertime => render_itertime(&cmd_itertime(&cfg)?, cli.format),
        Command::Search => render_search(&cmd_search(&cfg, &opts)?, cli.format),
        Command::Sweep => render_sweep(&cfg, &cmd_sweep(&cfg, &opts), cli.format),
        Command::Cost => render_cost(&cmd_cost(&cfg)?, cli.format),
        Command::Traffic => unreachable!(),
    };
    emit(cli.out.as_deref(), &text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn reject_invalid(plan: &ParallelPlan, model: &ModelSpec, cluster: &ClusterSpec) -> Result<()> {
    let v = validate_plan(plan, model, cluster);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidPlan(v))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ItertimeReport {
    pub plan: ParallelPlan,
    pub efficiency: f64,
    pub breakdown: IterationBreakdown,
}

pub fn cmd_itertime(cfg: &RunConfig) -> Result<ItertimeReport> {
    cfg.require(Command::Itertime)?;
    let (model, cluster) = (cfg.model(), cfg.cluster());
    let plan = cfg.plan.expect("checked by require");
    reject_invalid(&plan, &model, &cluster)?;
    Ok(ItertimeReport {
        plan,
        efficiency: cluster.efficiency,
        breakdown: iteration_time(&model, &cluster, &plan),
    })
}

pub fn cmd_search(cfg: &RunConfig, opts: &SearchOptions) -> Result<SearchResult> {
    cfg.require(Command::Search)?;
    optimize(&cfg.model(), &cfg.cluster(), opts)
}

pub fn cmd_sweep(cfg: &RunConfig, opts: &SearchOptions) -> Vec<SweepRow> {
    let Some(sw) = &cfg.sweep else {
        return Vec::new();
    };
    sweep(
        &cfg.model(),
        &cfg.cluster(),
        sw.axis,
        &sw.values,
        opts,
        sw.compare_ideal,
    )
}

pub fn cmd_cost(cfg: &RunConfig) -> Result<Vec<CostComparison>> {
    cfg.require(Command::Cost)?;
    let c = cfg.cost.as_ref().expect("checked by require");
    c.rows
        .iter()
        .map(|r| compare(r.n_gpus, r.hb_size, r.radix, &c.prices))
        .collect()
}

pub fn cmd_traffic(cfg: &RunConfig, format: Format, out: Option<&Path>) -> Result<()> {
    cfg.require(Command::Traffic)?;
    let (model, cluster) = (cfg.model(), cfg.cluster());
    let plan = cfg.plan.expect("checked by require");
    let tcfg = cfg.traffic.clone().unwrap_or_default();

    let placement = build_placement(&plan, &cluster)?;
    let matrix = traffic_matrix(&model, &placement);
    let summary = classify_summary(&matrix);
    let locality = assert_rail_locality(&matrix, &placement);
    let digest = placement.digest();
    let block = heatmap_block_size(cluster.n_gpus, tcfg.heatmap_max_cells);

    let text = match format {
        Format::Json => {
            let mut v = json!({
                "summary": summary,
                "rail_locality": {
                    "ok": locality.ok,
                    "n_violations": locality.violations.len(),
                    "violations": locality.violations.iter().take(100).collect::<Vec<_>>(),
                },
                "placement_sha256": digest,
            });
            v["plan"] = serde_json::to_value(plan)?;
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        Format::Csv => {
            let mut rows = vec![
                ("total_bytes".to_string(), fixed_sig(summary.total_bytes, 6)),
                ("ordered_pairs".into(), summary.ordered_pairs.to_string()),
                ("nonzero_pairs".into(), summary.nonzero_pairs.to_string()),
                ("zero_pair_fraction".into(), fixed_sig(summary.zero_pair_fraction, 6)),
                ("rail_locality_violations".into(), locality.violations.len().to_string()),
            ];
            for c in &summary.classes {
                let k = c.class.as_str();
                rows.push((format!("{k}.bytes"), fixed_sig(c.bytes, 6)));
                rows.push((format!("{k}.byte_fraction"), fixed_sig(c.byte_fraction, 6)));
                rows.push((format!("{k}.pairs"), c.pairs.to_string()));
                rows.push((format!("{k}.pair_fraction"), fixed_sig(c.pair_fraction, 6)));
                rows.push((format!("{k}.within_hb_fraction"), fixed_sig(c.within_hb_fraction, 6)));
            }
            let mut s = String::from("metric,value\n");
            for (k, v) in rows {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
    };

    emit(None, &text)?;
    let Some(dir) = out else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    fs::write(dir.join(format!("summary.{ext}")), &text)?;
    write_triplets(&matrix, std::io::BufWriter::new(fs::File::create(dir.join("traffic.csv"))?))?;
    write_heatmap(
        &matrix,
        block,
        std::io::BufWriter::new(fs::File::create(dir.join("heatmap.csv"))?),
    )?;
    let sidecar = json!({
        "plan": plan,
        "n_gpus": cluster.n_gpus,
        "hb_size": cluster.hb_size,
        "placement_sha256": digest,
        "block_size": block,
        "classes": TrafficClass::ALL.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
        "files": { "triplets": "traffic.csv", "heatmap": "heatmap.csv", "summary": format!("summary.{ext}") },
    });
    fs::write(
        dir.join("meta.json"),
        format!("{}\n", serde_json::to_string_pretty(&sidecar)?),
    )?;
    Ok(())
}

const PLAN_COLUMNS: [&str; 12] = ["p", "t", "d", "p_h", "t_h", "d_h", "p_l", "t_l", "d_l", "v", "b", "m"];

fn plan_cells(p: &ParallelPlan) -> Vec<String> {
    [
        p.pipeline,
        p.tensor,
        p.data,
        p.pipeline_hb,
        p.tensor_hb,
        p.data_hb,
        p.pipeline_net,
        p.tensor_net,
        p.data_net,
        p.interleave,
        p.micro_batch,
        p.num_micro_batches,
    ]
    .iter()
    .map(u64::to_string)
    .collect()
}

fn breakdown_cells(b: &IterationBreakdown) -> Vec<String> {
    b.values().iter().map(|v| fixed_sig(*v, 6)).collect()
}

fn csv_line(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

fn header(prefix: &[&str], suffix: &[&str]) -> String {
    let cells: Vec<String> = prefix
        .iter()
        .chain(PLAN_COLUMNS.iter())
        .chain(IterationBreakdown::FIELDS.iter())
        .chain(suffix.iter())
        .map(|s| s.to_string())
        .collect();
    csv_line(&cells)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn render_itertime(r: &ItertimeReport, format: Format) -> String {
    match format {
        Format::Json => pretty(r),
        Format::Csv => {
            let mut row = vec![fixed_sig(r.efficiency, 6)];
            row.extend(plan_cells(&r.plan));
            row.extend(breakdown_cells(&r.breakdown));
            header(&["efficiency"], &[]) + &csv_line(&row)
        }
    }
}

pub fn render_search(r: &SearchResult, format: Format) -> String {
    match format {
        Format::Json => pretty(r),
        Format::Csv => {
            let mut row = plan_cells(&r.best_plan);
            row.extend(breakdown_cells(&r.breakdown));
            row.push(r.n_candidates_examined.to_string());
            header(&[], &["n_candidates"]) + &csv_line(&row)
        }
    }
}

pub fn render_sweep(cfg: &RunConfig, rows: &[SweepRow], format: Format) -> String {
    let axis = cfg.sweep.as_ref().map_or("value", |s| s.axis.name());
    let err_json = |e: &Error| json!({ "kind": e.kind(), "message": e.to_string() });
    match format {
        Format::Json => {
            let cells: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut v = json!({ axis: r.value });
                    match &r.result {
                        Ok(res) => v["result"] = serde_json::to_value(res).expect("serializable"),
                        Err(e) => v["error"] = err_json(e),
                    }
                    match &r.ideal {
                        Some(Ok(res)) => v["ideal"] = serde_json::to_value(res).expect("serializable"),
                        Some(Err(e)) => v["ideal_error"] = err_json(e),
                        None => {}
                    }
                    if let Some(rel) = r.relative_performance() {
                        v["relative_performance"] = json!(rel);
                    }
                    v
                })
                .collect();
            pretty(&json!({ "axis": axis, "rows": cells }))
        }
        Format::Csv => {
            let compare = rows.iter().any(|r| r.ideal.is_some());
            let mut suffix = vec!["n_candidates"];
            if compare {
                suffix.extend(["ideal_t_iter", "relative_performance"]);
            }
            let mut s = header(&[axis, "error"], &suffix);
            let width = PLAN_COLUMNS.len() + IterationBreakdown::FIELDS.len() + 1;
            for r in rows {
                let mut row = vec![fixed_sig(r.value, 6)];
                match &r.result {
                    Ok(res) => {
                        row.push(String::new());
                        row.extend(plan_cells(&res.best_plan));
                        row.extend(breakdown_cells(&res.breakdown));
                        row.push(res.n_candidates_examined.to_string());
                    }
                    Err(e) => {
                        row.push(e.kind().to_string());
                        row.extend(std::iter::repeat_n(String::new(), width));
                    }
                }
                if compare {
                    row.push(match &r.ideal {
                        Some(Ok(i)) => fixed_sig(i.breakdown.t_iter, 6),
                        _ => String::new(),
                    });
                    row.push(r.relative_performance().map_or(String::new(), |v| fixed_sig(v, 6)));
                }
                s.push_str(&csv_line(&row));
            }
            s
        }
    }
}

pub fn render_cost(rows: &[CostComparison], format: Format) -> String {
    match format {
        Format::Json => pretty(&rows),
        Format::Csv => {
            let mut s = String::from(
                "n_gpus,hb_size,radix,sota_tiers,sota_switches,sota_transceivers,sota_cost_usd,\
                 rail_only_tiers,rail_only_switches,rail_only_transceivers,rail_only_cost_usd,\
                 reduction_percent\n",
            );
            let fabric = |f: &FabricDesign, cost: u64| {
                vec![
                    f.tiers.to_string(),
                    f.n_switches.to_string(),
                    f.n_transceivers.to_string(),
                    cost.to_string(),
                ]
            };
            for r in rows {
                let mut row = vec![r.n_gpus.to_string(), r.hb_size.to_string(), r.radix.to_string()];
                row.extend(fabric(&r.sota, r.sota_cost));
                row.extend(fabric(&r.rail_only, r.rail_only_cost));
                row.push(r.reduction_percent.to_string());
                s.push_str(&csv_line(&row));
            }
            s
        }
    }
}
