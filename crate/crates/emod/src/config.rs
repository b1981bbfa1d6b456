//! Run configuration: a TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use emod_core::device::{DeviceConfig, NoiseModel, Sensor, TruthParams};
use emod_core::fixtures;
use emod_core::planner::ScenarioSpec;
use emod_core::regress::FitConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// A `.mj` file, or `builtin:<name>` for a bundled fixture.
    pub program: String,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { program: "builtin:game_loop".into(), out_dir: "out".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub plan: u64,
    pub truth: u64,
    pub measure: u64,
    pub fit: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { plan: 42, truth: 7, measure: 1, fit: 0 }
    }
}

impl Seeds {
    /// Every stream derived from one number, as `--seed` sets them.
    pub fn from_base(s: u64) -> Self {
        Seeds { plan: s, truth: s.wrapping_add(1), measure: s.wrapping_add(2), fit: s.wrapping_add(3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Device {
    pub rate_hz: f64,
    pub sensor: Sensor,
    pub idle_w: f64,
    /// Relative noise per sample.
    pub sigma: f64,
    pub jitter_s: f64,
}

impl Default for Device {
    fn default() -> Self {
        Device { rate_hz: 30.0, sensor: Sensor::Averaging, idle_w: 0.5, sigma: 0.05, jitter_s: 0.0 }
    }
}

/// Hidden cost model of the simulated phone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truth {
    pub cost_range_j: (f64, f64),
    pub power_range_w: (f64, f64),
    pub gc_rate_hz: f64,
    pub gc_cost_j: f64,
}

impl Default for Truth {
    fn default() -> Self {
        let p = fixtures::demo_truth_params(0.0);
        Truth { cost_range_j: p.cost_range_j, power_range_w: p.power_range_w, gc_rate_hz: p.gc_rate_hz, gc_cost_j: p.gc_cost_j }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fit {
    pub alpha: f64,
    pub max_iters: u64,
    pub epsilon: f64,
    pub restarts: u32,
    pub init_range: (f64, f64),
    pub nonneg: bool,
    pub standardize: bool,
    pub backoff: bool,
    pub accelerate: bool,
}

impl Default for Fit {
    fn default() -> Self {
        let f = FitConfig::default();
        Fit {
            alpha: f.alpha,
            max_iters: f.max_iters,
            epsilon: f.epsilon,
            restarts: f.restarts,
            init_range: f.init_range,
            nonneg: f.nonneg,
            standardize: f.standardize,
            backoff: f.backoff,
            accelerate: f.accelerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub repeats: u32,
    pub duration_s: f64,
    pub cases: usize,
    pub rounds: usize,
    /// Rounds of extra cases drawn while the counts matrix is rank deficient.
    pub max_augment: u32,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol { repeats: 10, duration_s: fixtures::DEMO_DURATION_S, cases: 150, rounds: 4, max_augment: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seeds: Seeds,
    pub device: Device,
    pub truth: Truth,
    pub fit: Fit,
    pub protocol: Protocol,
    /// Defaults to the click-and-move scenario.
    pub scenario: Option<ScenarioSpec>,
    /// Worker threads for the run and measure stages; all cores when unset.
    pub jobs: Option<usize>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub program: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub rate_hz: Option<f64>,
    pub noise: Option<f64>,
    pub repeats: Option<u32>,
    pub alpha: Option<f64>,
    pub restarts: Option<u32>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        if !cfg.paths.program.starts_with("builtin:") && Path::new(&cfg.paths.program).is_relative() {
            cfg.paths.program = base.join(&cfg.paths.program).to_string_lossy().into_owned();
        }
        if cfg.paths.out_dir.is_relative() {
            cfg.paths.out_dir = base.join(&cfg.paths.out_dir);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.program {
            self.paths.program = p.clone();
        }
        if let Some(d) = &o.out_dir {
            self.paths.out_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seeds = Seeds::from_base(s);
        }
        if let Some(r) = o.rate_hz {
            self.device.rate_hz = r;
        }
        if let Some(n) = o.noise {
            self.device.sigma = n;
        }
        if let Some(r) = o.repeats {
            self.protocol.repeats = r;
        }
        if let Some(a) = o.alpha {
            self.fit.alpha = a;
        }
        if let Some(r) = o.restarts {
            self.fit.restarts = r;
        }
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
    }

    /// SHA-256 over the canonical JSON form. The output directory and the
    /// thread count do not affect results and are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths.out_dir = PathBuf::new();
        c.jobs = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn scenario(&self) -> ScenarioSpec {
        let mut s = self.scenario.clone().unwrap_or_else(|| fixtures::demo_scenario(self.protocol.duration_s));
        s.duration_s = self.protocol.duration_s;
        s
    }

    pub fn truth_params(&self) -> TruthParams {
        TruthParams {
            idle_w: self.device.idle_w,
            cost_range_j: self.truth.cost_range_j,
            power_range_w: self.truth.power_range_w,
            gc_rate_hz: self.truth.gc_rate_hz,
            gc_cost_j: self.truth.gc_cost_j,
            noise: NoiseModel { sigma: self.device.sigma, jitter_s: self.device.jitter_s },
        }
    }

    pub fn device_config(&self) -> DeviceConfig {
        DeviceConfig { rate_hz: self.device.rate_hz, sensor: self.device.sensor }
    }

    pub fn fit_config(&self) -> FitConfig {
        let f = &self.fit;
        FitConfig {
            alpha: f.alpha,
            max_iters: f.max_iters,
            epsilon: f.epsilon,
            restarts: f.restarts,
            init_range: f.init_range,
            nonneg: f.nonneg,
            standardize: f.standardize,
            backoff: f.backoff,
            accelerate: f.accelerate,
            seed: self.seeds.fit,
        }
    }
}

/// Source text of a program reference.
pub fn load_program(reference: &str) -> Result<String, CliError> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return builtin(name).map(str::to_string).ok_or_else(|| CliError::Config(format!("no bundled program named `{name}`")));
    }
    let path = Path::new(reference);
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "game_loop" => fixtures::GAME_LOOP,
        "blit_original" => fixtures::BLIT_ORIGINAL,
        "blit_licm" => fixtures::BLIT_LICM,
        "blit_unrolled" => fixtures::BLIT_UNROLLED,
        "blit_library" => fixtures::BLIT_LIBRARY,
        _ => return None,
    })
}
