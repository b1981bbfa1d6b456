//! The staged pipeline. Each stage reads the artifacts of earlier stages
//! from the output directory and writes its own, so any stage can be rerun
//! on its own.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use emod_core::accounting::{self, BlockBreakdown, OpRanking, VariantCounts, VariantRow};
use emod_core::blocks::{divide_blocks, BlockTable};
use emod_core::device::{self, synthesize_trace, workload, GroundTruth, Workload};
use emod_core::fixtures;
use emod_core::frontend::{self, Program};
use emod_core::opdict::{build_dictionary, case_op_counts, OpDictionary, OpKey};
use emod_core::planner::{augment_cases, plan_cases, schedule, ExecutionCase, RunKind};
use emod_core::regress::{self, CostModel, CountsMatrix, FitConfig, FitReport, RegressError};
use emod_core::runner::{self, RunOptions, RunResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{load_program, RunConfig};
use crate::error::CliError;
use crate::formats::*;
use crate::svg;
use std::result::Result;

/// A parsed program with its blocks and dictionary. When garbage collection
/// is simulated the dictionary gains a `Lib:GC` column.
pub struct Source {
    pub program: Program,
    pub table: BlockTable,
    pub dict: OpDictionary,
}

impl Source {
    pub fn parse(text: &str, gc: bool) -> anyhow::Result<Source> {
        let program = frontend::parse(text).map_err(|e| anyhow!("{e}"))?;
        let table = divide_blocks(&program);
        let mut dict = build_dictionary(&program, &table);
        if gc {
            dict = dict.with_column(OpKey::Gc, &program);
        }
        Ok(Source { program, table, dict })
    }

    pub fn load(cfg: &RunConfig) -> anyhow::Result<Source> {
        let text = load_program(&cfg.paths.program)?;
        Source::parse(&text, cfg.truth.gc_rate_hz > 0.0)
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub layout: Layout,
    pub hash: String,
    pool: rayon::ThreadPool,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig) -> anyhow::Result<Ctx<'a>> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cfg.jobs {
            b = b.num_threads(j.max(1));
        }
        Ok(Ctx { cfg, layout: Layout::new(&cfg.paths.out_dir), hash: cfg.hash(), pool: b.build()? })
    }

    fn stamp(&self, seed: u64) -> Stamp {
        Stamp { config_hash: self.hash.clone(), seed }
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

pub const STAGES: [&str; 9] = ["parse", "blocks", "dict", "plan", "run", "measure", "fit", "validate", "report"];

fn stage<T>(name: &'static str, r: anyhow::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| match source.downcast::<CliError>() {
        Ok(e @ CliError::MissingPath(_)) => e,
        Ok(e) => CliError::Stage { stage: name, source: e.into() },
        Err(source) => CliError::Stage { stage: name, source },
    })
}

#[derive(Debug, Clone, Default)]
pub struct StageOptions {
    /// Write per-entry block logs next to the compact ones.
    pub entries: bool,
    /// Write the first idle and measured power trace of every case.
    pub traces: bool,
    pub svg: bool,
}

/// Runs every stage in order.
pub fn run_all(ctx: &Ctx, opts: &StageOptions) -> Result<(), CliError> {
    for name in STAGES {
        run_stage(ctx, name, opts)?;
    }
    Ok(())
}

pub fn run_stage(ctx: &Ctx, name: &'static str, opts: &StageOptions) -> Result<(), CliError> {
    let r = match name {
        "parse" => stage_parse(ctx),
        "blocks" => stage_blocks(ctx),
        "dict" => stage_dict(ctx),
        "plan" => stage_plan(ctx, &ctx.layout.plan()).map(|_| ()),
        "run" => stage_run(ctx, &ctx.layout.plan(), &ctx.layout.runs(), opts.entries),
        "measure" => stage_measure(ctx, opts.traces),
        "fit" => stage_fit(ctx).map(|_| ()),
        "validate" => stage_validate(ctx).map(|_| ()),
        "report" => stage_report(ctx, opts.svg).map(|_| ()),
        other => Err(anyhow!("unknown stage `{other}`")),
    };
    stage(name, r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramSummary {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub classes: usize,
    pub methods: Vec<String>,
    pub library_functions: Vec<String>,
    pub blocks: usize,
    pub removable_blocks: usize,
    pub operations: usize,
}

pub fn summarize(src: &Source, stamp: Stamp) -> ProgramSummary {
    ProgramSummary {
        stamp,
        classes: src.program.classes.len(),
        methods: src.program.methods().map(|(_, m)| m.name.clone()).collect(),
        library_functions: frontend::list_library_functions(&src.program),
        blocks: src.table.len(),
        removable_blocks: src.table.removable().len(),
        operations: src.dict.num_ops(),
    }
}

fn stage_parse(ctx: &Ctx) -> anyhow::Result<()> {
    let src = Source::load(ctx.cfg)?;
    write_json(&ctx.layout.program(), &summarize(&src, ctx.stamp(0)))?;
    Ok(())
}

fn stage_blocks(ctx: &Ctx) -> anyhow::Result<()> {
    let src = Source::load(ctx.cfg)?;
    write_json(&ctx.layout.blocks(), &blocks_file(&src.program, &src.table, ctx.stamp(0)))?;
    Ok(())
}

fn stage_dict(ctx: &Ctx) -> anyhow::Result<()> {
    let src = Source::load(ctx.cfg)?;
    write_dict_csv(&ctx.layout.dict(), &src.dict, &ctx.stamp(0))?;
    Ok(())
}

/// Path-run counts of every case, in case order.
fn path_counts(ctx: &Ctx, src: &Source, cases: &[ExecutionCase]) -> anyhow::Result<Vec<(u32, Vec<u64>)>> {
    ctx.install(|| {
        cases
            .par_iter()
            .map(|c| {
                let r = runner::run(&src.program, &src.table, c, &RunOptions::default())?;
                let d = src.dict.with_removed(&c.removed)?;
                Ok((c.id, case_op_counts(&d, &r.log)?))
            })
            .collect()
    })
}

/// Columns that can possibly be nonzero: executed by some case, or the GC
/// column, whose count comes from the device.
fn target_rank(src: &Source, counts: &[(u32, Vec<u64>)]) -> usize {
    let ids = src.dict.op_ids();
    (0..ids.len()).filter(|&j| ids[j] == device::GC_OP || counts.iter().any(|(_, c)| c[j] > 0)).count()
}

fn counts_rank(src: &Source, counts: &[(u32, Vec<u64>)]) -> anyhow::Result<usize> {
    let ids = src.dict.op_ids();
    let gc = ids.iter().position(|i| i == device::GC_OP);
    let mut data = Vec::with_capacity(counts.len() * ids.len());
    for (k, (_, c)) in counts.iter().enumerate() {
        // GC counts are unknown before measuring; any varying column stands in.
        data.extend(c.iter().enumerate().map(|(j, &n)| if Some(j) == gc { (k % 7 + 1) as f64 } else { n as f64 }));
    }
    let n = CountsMatrix::new(counts.iter().map(|c| c.0).collect(), ids, data)?;
    Ok(regress::rank(&n))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub cases: usize,
    pub rank: usize,
    pub target: usize,
    pub augment_rounds: u32,
}

/// Plans the cases, then draws more while the counts matrix is rank
/// deficient and the augmentation budget lasts.
pub fn stage_plan(ctx: &Ctx, out: &Path) -> anyhow::Result<PlanOutcome> {
    let cfg = ctx.cfg;
    let src = Source::load(cfg)?;
    let scenario = cfg.scenario();
    let mut cases = plan_cases(&src.table, &scenario, cfg.protocol.cases, cfg.seeds.plan)?;
    let mut counts = path_counts(ctx, &src, &cases)?;
    let mut rounds = 0;
    let target = target_rank(&src, &counts);
    let mut rank = counts_rank(&src, &counts)?;
    while rank < target && rounds < cfg.protocol.max_augment {
        rounds += 1;
        let extra = augment_cases(&src.table, &scenario, &cases, 2 * (target - rank).max(10), cfg.seeds.plan.wrapping_add(rounds as u64))?;
        counts.extend(path_counts(ctx, &src, &extra)?);
        cases.extend(extra);
        rank = counts_rank(&src, &counts)?;
    }
    if rank < target {
        eprintln!("warning: counts matrix has rank {rank} of {target} after {rounds} augmentation round(s)");
    }
    let n = cases.len();
    write_json(out, &PlanFile { stamp: ctx.stamp(cfg.seeds.plan), cases })?;
    Ok(PlanOutcome { cases: n, rank, target, augment_rounds: rounds })
}

/// The block log and timing of one case, as stored by the run stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub result: RunResult,
}

/// Executes every planned case and stores its block log.
pub fn stage_run(ctx: &Ctx, plan: &Path, out: &Path, entries: bool) -> anyhow::Result<()> {
    let src = Source::load(ctx.cfg)?;
    let plan: PlanFile = read_json(plan)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let opts = RunOptions { record_entries: entries, ..RunOptions::default() };
    let stamp = ctx.stamp(plan.stamp.seed);
    ctx.install(|| {
        plan.cases.par_iter().try_for_each(|c| -> anyhow::Result<()> {
            let mut r = runner::run(&src.program, &src.table, c, &opts).with_context(|| format!("case {}", c.id))?;
            write_block_log(&case_file(out, c.id, "csv"), &r.log, &stamp)?;
            if let Some(e) = r.entries.take() {
                write_entries(&case_file(out, c.id, "log"), &e)?;
            }
            write_json(&case_file(out, c.id, "json"), &RunRecord { stamp: stamp.clone(), result: r })?;
            Ok(())
        })
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub truth: GroundTruth,
}

pub fn ground_truth(cfg: &RunConfig, dict: &OpDictionary) -> GroundTruth {
    GroundTruth::synthetic(&dict.op_ids(), &cfg.truth_params(), cfg.seeds.truth)
}

/// Workload of one case from its stored run, with the GC column filled in.
pub fn case_workload(src: &Source, truth: &GroundTruth, case: &ExecutionCase, run: &RunResult, seed: u64) -> anyhow::Result<Workload> {
    let d = src.dict.with_removed(&case.removed)?;
    let mut w = workload(run, &d, truth, case.duration_s, seed)?;
    if let Some(j) = d.column_of(device::GC_OP) {
        w.op_counts[j] = w.gc_events;
    }
    Ok(w)
}

pub fn stage_measure(ctx: &Ctx, traces: bool) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let src = Source::load(cfg)?;
    let plan: PlanFile = read_json(&ctx.layout.plan())?;
    let truth = ground_truth(cfg, &src.dict);
    write_json(&ctx.layout.truth(), &TruthFile { stamp: ctx.stamp(cfg.seeds.truth), truth: truth.clone() })?;
    let device = cfg.device_config();
    let seed = cfg.seeds.measure;
    let runs = ctx.layout.runs();
    let trace_dir = ctx.layout.traces();
    let results: Vec<(MeasurementRow, (u32, Vec<u64>))> = ctx.install(|| -> anyhow::Result<_> {
        plan.cases
            .par_iter()
            .map(|c| -> anyhow::Result<_> {
                let rec: RunRecord = read_json(&case_file(&runs, c.id, "json"))?;
                // The compact log is authoritative; the record carries timing.
                let log = read_block_log(&case_file(&runs, c.id, "csv"), c.id, src.table.len())?;
                if log.counts != rec.result.log.counts {
                    bail!("case {}: block log and run record disagree", c.id);
                }
                let w = case_workload(&src, &truth, c, &rec.result, seed)?;
                let sched = schedule(c, cfg.protocol.repeats)?;
                let m = device::measure_workload(&w, &truth, &device, &sched, seed)?;
                if traces {
                    for kind in [RunKind::Idle, RunKind::Measured] {
                        if let Some(run) = sched.of_kind(kind).next() {
                            let rs = device::mix64(device::mix64(seed ^ device::mix64(c.id as u64)) ^ device::mix64(run.index as u64 + 1));
                            let t = synthesize_trace(&w, &truth, &device, kind == RunKind::Idle, rs)?;
                            let name = if kind == RunKind::Idle { "idle" } else { "meas" };
                            write_trace(&trace_dir.join(format!("case_{:04}_{name}.csv", c.id)), &t)?;
                        }
                    }
                }
                Ok((MeasurementRow::from(&m), (c.id, w.op_counts)))
            })
            .collect()
    })?;
    let (rows, counts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let negative = rows.iter().filter(|r| r.e_joules < 0.0).count();
    if negative > 0 {
        eprintln!("warning: {negative} case(s) measured negative workload energy");
    }
    write_measurements(&ctx.layout.measurements(), &rows, &ctx.stamp(seed))?;
    write_counts(&ctx.layout.counts(), &src.dict.op_ids(), &counts, &ctx.stamp(seed))?;
    Ok(())
}

/// The counts matrix and measured energies from the measure stage.
pub fn load_design(layout: &Layout) -> anyhow::Result<(CountsMatrix, Vec<f64>)> {
    let (ops, counts) = read_counts(&layout.counts())?;
    let energies: Vec<(u32, f64)> = read_measurements(&layout.measurements())?.iter().map(|r| (r.case_id, r.e_joules)).collect();
    Ok(regress::assemble(&counts, &energies, ops)?)
}

/// Restarts in parallel; the lowest final J wins, ties to the lower index.
pub fn parallel_fit(n: &CountsMatrix, e: &[f64], config: &FitConfig) -> Result<CostModel, RegressError> {
    let outcomes =
        (0..config.restarts.max(1)).into_par_iter().map(|k| regress::fit_restart(n, e, config, k)).collect::<Result<Vec<_>, _>>()?;
    let best = regress::select_best(outcomes).ok_or(RegressError::Empty)?;
    Ok(regress::finish_model(n, config, best))
}

pub fn stage_fit(ctx: &Ctx) -> anyhow::Result<CostModel> {
    let (n, e) = load_design(&ctx.layout)?;
    let model = ctx.install(|| parallel_fit(&n, &e, &ctx.cfg.fit_config()))?;
    if !model.meta.converged {
        eprintln!("warning: fit stopped at the iteration cap (J = {:e})", model.meta.final_j);
    }
    write_json(&ctx.layout.model(), &ModelFile::new(&model, &ctx.hash))?;
    Ok(model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub rounds: Vec<regress::RoundMetrics>,
}

pub fn stage_validate(ctx: &Ctx) -> anyhow::Result<FitReport> {
    let (n, e) = load_design(&ctx.layout)?;
    let cfg = ctx.cfg.fit_config();
    let report = ctx.install(|| regress::cross_validate(&n, &e, &cfg, ctx.cfg.protocol.rounds, &parallel_fit))?;
    let rows: Vec<MetricsRow> = report.rounds.iter().map(MetricsRow::from).collect();
    write_metrics(&ctx.layout.metrics(), &rows, &ctx.stamp(cfg.seed))?;
    write_json(&ctx.layout.validation(), &ValidationFile { stamp: ctx.stamp(cfg.seed), rounds: report.rounds.clone() })?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    #[serde(flatten)]
    pub stamp: Stamp,
    /// Case the op and block tables describe: the scenario with nothing removed.
    pub reference_case: ExecutionCase,
    pub ops: OpRanking,
    pub blocks: BlockBreakdown,
    /// `n · cost` of the reference case.
    pub predicted_j: f64,
    pub top10_share: f64,
    pub top30_share: f64,
    /// Share of the three goto kinds plus method invocation.
    pub goto_and_call_share: f64,
    /// Energy by operation class.
    pub classes: BTreeMap<String, f64>,
    /// Predicted energy of the vertex-upload variants, when the model
    /// covers their operations.
    pub variants: Option<Vec<VariantRow>>,
}

pub fn reference_case(src: &Source, cfg: &RunConfig) -> anyhow::Result<ExecutionCase> {
    let mut scenario = cfg.scenario();
    scenario.max_removed = 0;
    scenario.keep = src.table.removable();
    Ok(plan_cases(&src.table, &scenario, 2, cfg.seeds.plan)?.swap_remove(0))
}

/// Operation counts of each vertex-upload variant over one second of frames.
pub fn variant_counts() -> anyhow::Result<Vec<VariantCounts>> {
    fixtures::blit_variants()
        .iter()
        .map(|(name, text)| {
            let src = Source::parse(text, false)?;
            let mut scenario = fixtures::blit_scenario(1.0);
            scenario.max_removed = 0;
            scenario.keep = src.table.removable();
            let case = plan_cases(&src.table, &scenario, 2, 1)?.swap_remove(0);
            let r = runner::run(&src.program, &src.table, &case, &RunOptions::default())?;
            Ok(VariantCounts { name: (*name).into(), op_ids: src.dict.op_ids(), counts: case_op_counts(&src.dict, &r.log)? })
        })
        .collect()
}

pub fn build_report(src: &Source, cfg: &RunConfig, model: &CostModel, stamp: Stamp) -> anyhow::Result<Report> {
    let case = reference_case(src, cfg)?;
    let r = runner::run(&src.program, &src.table, &case, &RunOptions::default())?;
    let counts = case_op_counts(&src.dict, &r.log)?;
    let ids = src.dict.op_ids();
    // Align the counts with the model's columns.
    let mut aligned = vec![0u64; model.op_ids.len()];
    for (id, n) in ids.iter().zip(&counts) {
        match model.op_ids.iter().position(|o| o == id) {
            Some(j) => aligned[j] = *n,
            None if *n == 0 => {}
            None => bail!("model has no cost for `{id}`"),
        }
    }
    let k = |n: usize| n.min(model.op_ids.len());
    let ops = accounting::rank_operations(model, &aligned, k(10))?;
    let top30 = accounting::rank_operations(model, &aligned, k(30))?.top_k_share;
    let blocks = accounting::block_breakdown(model, &src.dict, &r.log)?;
    let predicted_j = accounting::predicted_energy(model, &ids, &counts)?;
    let class_totals = ops.class_totals();
    let classes = emod_core::opdict::OpClass::ALL.iter().map(|c| (c.name().to_string(), class_totals[c.index()])).collect();
    let goto_and_call_share = ops.share_of(&["BlockGoto_if", "BlockGoto_for", "BlockGoto_while", "MethodInvocation"]);
    let variants = variant_counts()?;
    let covered = variants.iter().all(|v| v.op_ids.iter().zip(&v.counts).all(|(id, &n)| n == 0 || model.cost_of(id).is_some()));
    let variants = if covered { Some(accounting::compare_variants(model, &variants)?) } else { None };
    Ok(Report {
        stamp,
        reference_case: case,
        top10_share: ops.top_k_share,
        top30_share: top30,
        ops,
        blocks,
        predicted_j,
        goto_and_call_share,
        classes,
        variants,
    })
}

#[derive(Serialize)]
struct OpCsv<'a> {
    rank: usize,
    id: &'a str,
    class: &'a str,
    unit_cost_j: f64,
    executions: u64,
    total_j: f64,
    share: f64,
    cumulative_share: f64,
}

#[derive(Serialize)]
struct BlockCsv {
    block: u32,
    executions: u64,
    in_app_j: f64,
    single_j: f64,
    per3000_j: f64,
}

pub fn stage_report(ctx: &Ctx, with_svg: bool) -> anyhow::Result<Report> {
    let src = Source::load(ctx.cfg)?;
    let model = read_json::<ModelFile>(&ctx.layout.model())?.to_model();
    let report = build_report(&src, ctx.cfg, &model, ctx.stamp(ctx.cfg.seeds.plan))?;
    write_json(&ctx.layout.report(), &report)?;
    let stamp = &report.stamp;
    let op_rows: Vec<OpCsv> = report
        .ops
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| OpCsv {
            rank: i + 1,
            id: &r.id,
            class: r.class.name(),
            unit_cost_j: r.unit_cost_j,
            executions: r.executions,
            total_j: r.total_j,
            share: r.share,
            cumulative_share: r.cumulative_share,
        })
        .collect();
    write_csv_rows(&ctx.layout.report_csv("ops"), &op_rows, stamp)?;
    let block_rows: Vec<BlockCsv> = report
        .blocks
        .rows
        .iter()
        .map(|b| BlockCsv { block: b.block, executions: b.executions, in_app_j: b.in_app_j, single_j: b.single_j, per3000_j: b.per3000_j })
        .collect();
    write_csv_rows(&ctx.layout.report_csv("blocks"), &block_rows, stamp)?;
    if let Some(v) = &report.variants {
        write_csv_rows(&ctx.layout.report_csv("variants"), v, stamp)?;
    }
    if with_svg {
        svg::write_charts(&ctx.layout, &report)?;
    }
    Ok(report)
}
