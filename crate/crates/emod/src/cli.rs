use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_program, Overrides, RunConfig};
use crate::error::CliError;
use crate::formats::{self, blocks_file, read_metrics, write_dict_csv, Stamp};
use crate::pipeline::{self, Ctx, Source, StageOptions};

#[derive(Debug, Parser)]
#[command(name = "emod", version, about = "Operation-level energy models for MiniJ programs")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration; built-in demo defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Base seed; derives the plan, truth, measurement and fit seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub rate_hz: Option<f64>,
    /// Relative noise per power sample.
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    #[arg(long, global = true)]
    pub repeats: Option<u32>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub restarts: Option<u32>,
    /// Worker threads for case-parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Parse and type-check a program.
    Parse {
        file: PathBuf,
        /// Print the syntax tree as JSON.
        #[arg(long)]
        dump_ast: bool,
    },
    /// Print the block table as JSON.
    Blocks {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the occurrence dictionary as CSV.
    Dict {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan execution cases.
    Plan {
        /// Program to plan for, overriding the config.
        #[arg(long)]
        program: Option<String>,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute planned cases and write their block logs.
    Run {
        plan: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one line per block entry.
        #[arg(long)]
        entries: bool,
    },
    /// Simulate the power measurements of every case.
    Measure {
        /// Write the first idle and measured trace of each case.
        #[arg(long)]
        traces: bool,
    },
    /// Fit per-operation costs.
    Fit,
    /// Cross-validate the fit.
    Validate,
    /// Energy accounting from the fitted model.
    Report {
        #[arg(long)]
        svg: bool,
    },
    /// Run every stage.
    Pipeline {
        config_file: PathBuf,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        entries: bool,
        #[arg(long)]
        traces: bool,
    },
    /// Run the bundled game-loop demo end to end and print a summary.
    Demo {
        #[arg(long)]
        svg: bool,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            program: None,
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            rate_hz: self.rate_hz,
            noise: self.noise,
            repeats: self.repeats,
            alpha: self.alpha,
            restarts: self.restarts,
            jobs: self.jobs,
        }
    }

    fn config(&self, file: Option<&Path>) -> Result<RunConfig, CliError> {
        let mut cfg = match file.or(self.config.as_deref()) {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn print_or_write(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_source(file: &Path, stage: &'static str) -> Result<Source, CliError> {
    let text = load_program(&file.to_string_lossy())?;
    Source::parse(&text, false).map_err(|source| CliError::Stage { stage, source })
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let stage_err = |stage: &'static str| move |source: anyhow::Error| CliError::Stage { stage, source };
    let stamp = || -> Result<Stamp, CliError> { Ok(Stamp { config_hash: common.config(None)?.hash(), seed: 0 }) };
    match &cli.cmd {
        Cmd::Parse { file, dump_ast } => {
            let src = load_source(file, "parse")?;
            if *dump_ast {
                let json = serde_json::to_string_pretty(&src.program).map_err(|e| stage_err("parse")(e.into()))?;
                println!("{json}");
            } else {
                let s = pipeline::summarize(&src, Stamp::default());
                println!("{} method(s), {} block(s), {} operation(s)", s.methods.len(), s.blocks, s.operations);
                for f in &s.library_functions {
                    println!("library {f}");
                }
            }
        }
        Cmd::Blocks { file, out } => {
            let src = load_source(file, "blocks")?;
            let json = serde_json::to_string_pretty(&blocks_file(&src.program, &src.table, stamp()?))
                .map_err(|e| stage_err("blocks")(e.into()))?;
            print_or_write(out.as_deref(), &(json + "\n"))?;
        }
        Cmd::Dict { file, out } => {
            let src = load_source(file, "dict")?;
            match out {
                Some(p) => write_dict_csv(p, &src.dict, &stamp()?)?,
                None => formats::dict_csv(std::io::stdout().lock(), &src.dict, &stamp()?).map_err(|e| stage_err("dict")(e.into()))?,
            }
        }
        Cmd::Plan { program, cases, out } => {
            let mut cfg = common.config(None)?;
            if let Some(p) = program {
                cfg.paths.program = p.clone();
            }
            if let Some(n) = cases {
                cfg.protocol.cases = *n;
            }
            let ctx = Ctx::new(&cfg).map_err(stage_err("plan"))?;
            let out = out.clone().unwrap_or_else(|| ctx.layout.plan());
            let p = pipeline::stage_plan(&ctx, &out).map_err(stage_err("plan"))?;
            println!("{} case(s), counts rank {} of {}, {} augmentation round(s)", p.cases, p.rank, p.target, p.augment_rounds);
        }
        Cmd::Run { plan, out, entries } => {
            let cfg = common.config(None)?;
            let ctx = Ctx::new(&cfg).map_err(stage_err("run"))?;
            let plan = plan.clone().unwrap_or_else(|| ctx.layout.plan());
            if !plan.exists() {
                return Err(CliError::MissingPath(plan));
            }
            let out = out.clone().unwrap_or_else(|| ctx.layout.runs());
            pipeline::stage_run(&ctx, &plan, &out, *entries).map_err(stage_err("run"))?;
        }
        Cmd::Measure { traces } => one_stage(common, "measure", StageOptions { traces: *traces, ..Default::default() })?,
        Cmd::Fit => one_stage(common, "fit", StageOptions::default())?,
        Cmd::Validate => {
            let cfg = common.config(None)?;
            let ctx = Ctx::new(&cfg).map_err(stage_err("validate"))?;
            pipeline::run_stage(&ctx, "validate", &StageOptions::default())?;
            print_metrics(&ctx)?;
        }
        Cmd::Report { svg } => one_stage(common, "report", StageOptions { svg: *svg, ..Default::default() })?,
        Cmd::Pipeline { config_file, svg, entries, traces } => {
            let cfg = common.config(Some(config_file))?;
            if !cfg.paths.program.starts_with("builtin:") && !Path::new(&cfg.paths.program).exists() {
                return Err(CliError::MissingPath(cfg.paths.program.clone().into()));
            }
            let ctx = Ctx::new(&cfg).map_err(stage_err("pipeline"))?;
            pipeline::run_all(&ctx, &StageOptions { entries: *entries, traces: *traces, svg: *svg })?;
            print_metrics(&ctx)?;
        }
        Cmd::Demo { svg } => {
            let mut cfg = match &common.config {
                Some(p) => RunConfig::load(p)?,
                None => demo_config(),
            };
            cfg.apply(&common.overrides());
            let ctx = Ctx::new(&cfg).map_err(stage_err("demo"))?;
            pipeline::run_all(&ctx, &StageOptions { svg: *svg, ..Default::default() })?;
            print_metrics(&ctx)?;
            let report: pipeline::Report = formats::read_json(&ctx.layout.report())?;
            println!("top-10 operations: {:.1}% of energy, top-30: {:.1}%", 100.0 * report.top10_share, 100.0 * report.top30_share);
            if let Some(v) = &report.variants {
                for r in v {
                    println!("{:<10} {:>10.4} mJ {:>+7.1}%", r.name, r.energy_j * 1e3, r.change_pct);
                }
            }
            println!("artifacts in {}", ctx.layout.dir.display());
        }
    }
    Ok(())
}

/// The bundled `demo.toml`, writing to `demo-out` under the working directory.
pub fn demo_config() -> RunConfig {
    toml::from_str(include_str!("../demo.toml")).expect("bundled demo.toml parses")
}

fn one_stage(common: &Common, name: &'static str, opts: StageOptions) -> Result<(), CliError> {
    let cfg = common.config(None)?;
    let ctx = Ctx::new(&cfg).map_err(|source| CliError::Stage { stage: name, source })?;
    pipeline::run_stage(&ctx, name, &opts)
}

fn print_metrics(ctx: &Ctx) -> Result<(), CliError> {
    let rows = read_metrics(&ctx.layout.metrics())?;
    println!("round  train_r  val_r   train_nmae  val_nmae");
    let r = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    for m in rows {
        println!("{:>5}  {:>7}  {:>6}  {:>10.3}  {:>8.3}", m.round, r(m.train_r), r(m.val_r), m.train_nmae, m.val_nmae);
    }
    Ok(())
}
