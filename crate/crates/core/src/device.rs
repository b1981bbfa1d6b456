//! Simulated measurement apparatus: hidden per-operation costs, an idle
//! baseline, a sampled power sensor with noise, and the averaging protocol.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::opdict::{case_op_counts, OpDictError, OpDictionary};
use crate::planner::{RunKind, RunSchedule};
use crate::runner::RunResult;

/// Operation id under which garbage collection is charged.
pub const GC_OP: &str = "Lib:GC";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative standard deviation applied to each sample.
    pub sigma: f64,
    /// Standard deviation of each sampling instant, seconds.
    pub jitter_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Joules per execution, keyed by operation id.
    pub costs_j: BTreeMap<String, f64>,
    /// Seconds per execution.
    pub op_time_s: BTreeMap<String, f64>,
    pub idle_w: f64,
    /// Mean garbage collections per second; each costs `costs_j[GC_OP]`.
    pub gc_rate_hz: f64,
    pub noise: NoiseModel,
}

/// Knobs for [`GroundTruth::synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub idle_w: f64,
    /// Log-uniform range for costs not fixed by `anchored_costs`, joules.
    pub cost_range_j: (f64, f64),
    /// Active power range; an operation takes `cost / power` seconds.
    pub power_range_w: (f64, f64),
    pub gc_rate_hz: f64,
    pub gc_cost_j: f64,
    pub noise: NoiseModel,
}

impl Default for TruthParams {
    fn default() -> Self {
        TruthParams {
            idle_w: 0.5,
            cost_range_j: (0.1e-6, 50e-6),
            power_range_w: (0.8, 1.6),
            gc_rate_hz: 0.0,
            gc_cost_j: 400e-6,
            noise: NoiseModel { sigma: 0.0, jitter_s: 0.0 },
        }
    }
}

/// Fixed absolute costs of the three goto kinds.
pub fn anchored_costs() -> [(&'static str, f64); 3] {
    [("BlockGoto_if", 6.7e-6), ("BlockGoto_for", 4.1e-6), ("BlockGoto_while", 1.1e-6)]
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeviceError {
    #[error("operation `{0}` has no ground-truth cost or time")]
    UncoveredOp(String),
    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),
    #[error("sampling rate must be positive")]
    Rate,
    #[error("integration needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Dict(#[from] OpDictError),
}

impl GroundTruth {
    /// Anchored goto costs, every other operation log-uniform in
    /// `cost_range_j`, all drawn under `seed`.
    pub fn synthetic(op_ids: &[String], params: &TruthParams, seed: u64) -> GroundTruth {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = params.cost_range_j;
        let (plo, phi) = params.power_range_w;
        let mut costs_j = BTreeMap::new();
        let mut op_time_s = BTreeMap::new();
        let mut ids: Vec<&str> = op_ids.iter().map(String::as_str).collect();
        if params.gc_rate_hz > 0.0 && !ids.contains(&GC_OP) {
            ids.push(GC_OP);
        }
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            // Draw for every id so adding an anchor never shifts the others.
            let u: f64 = rng.random();
            let power = plo + (phi - plo) * rng.random::<f64>();
            let drawn = libm::exp(libm::log(lo) + u * (libm::log(hi) - libm::log(lo)));
            let cost = match id {
                GC_OP => params.gc_cost_j,
                _ => anchored_costs().iter().find(|(a, _)| *a == id).map_or(drawn, |(_, c)| *c),
            };
            costs_j.insert(id.into(), cost);
            op_time_s.insert(id.into(), cost / power);
        }
        GroundTruth { costs_j, op_time_s, idle_w: params.idle_w, gc_rate_hz: params.gc_rate_hz, noise: params.noise }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: &str| Err(DeviceError::InvalidTruth(m.into()));
        if self.costs_j.values().chain(self.op_time_s.values()).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return bad("costs and times must be finite and non-negative");
        }
        if !(self.idle_w > 0.0 && self.idle_w.is_finite()) {
            return bad("idle power must be positive");
        }
        if !(self.noise.sigma >= 0.0 && self.noise.jitter_s >= 0.0 && self.gc_rate_hz >= 0.0) {
            return bad("noise and GC rate must be non-negative");
        }
        if self.gc_rate_hz > 0.0 && !self.costs_j.contains_key(GC_OP) {
            return Err(DeviceError::UncoveredOp(GC_OP.into()));
        }
        Ok(())
    }

    fn lookup(&self, id: &str) -> Result<(f64, f64), DeviceError> {
        match (self.costs_j.get(id), self.op_time_s.get(id)) {
            (Some(c), Some(t)) => Ok((*c, *t)),
            _ => Err(DeviceError::UncoveredOp(id.into())),
        }
    }

    /// `Σ_j cost_j · n_j` over the dictionary's columns.
    pub fn energy_of(&self, op_ids: &[String], counts: &[u64]) -> Result<f64, DeviceError> {
        let mut s = crate::exact::ExactSum::new();
        for (id, &n) in op_ids.iter().zip(counts) {
            s.add_product(self.lookup(id)?.0, n as f64);
        }
        Ok(s.value())
    }
}

/// Extra power above idle over `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub start_s: f64,
    pub end_s: f64,
    pub watts: f64,
}

/// True power profile of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub case_id: u32,
    pub duration_s: f64,
    pub activities: Vec<Activity>,
    /// Operation counts aligned with the dictionary columns.
    pub op_counts: Vec<u64>,
    pub gc_events: u64,
    /// Exact workload energy: operations plus garbage collection.
    pub energy_j: f64,
}

/// SplitMix64 finalizer; derives independent stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, case_id: u32, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed ^ mix64(case_id as u64)) ^ salt))
}

/// Lays the run's work out in time: each input event's work starts at its
/// timestamp or when the previous event's work finishes, whichever is later.
/// Garbage collections arrive as a Poisson process, fixed per case.
/// `dict` must already reflect the case's removed blocks.
pub fn workload(result: &RunResult, dict: &OpDictionary, truth: &GroundTruth, target_s: f64, seed: u64) -> Result<Workload, DeviceError> {
    truth.validate()?;
    let ids = dict.op_ids();
    let mut cost = Vec::with_capacity(ids.len());
    let mut time = Vec::with_capacity(ids.len());
    for id in &ids {
        let (c, t) = truth.lookup(id)?;
        cost.push(c);
        time.push(t);
    }
    let block_cost: Vec<(f64, f64)> = (0..dict.blocks)
        .map(|i| {
            let row = dict.row(i);
            let c = row.iter().zip(&cost).map(|(&o, c)| o as f64 * c).sum();
            let t = row.iter().zip(&time).map(|(&o, t)| o as f64 * t).sum();
            (c, t)
        })
        .collect();

    let mut activities = Vec::new();
    let mut clock = 0.0f64;
    for seg in &result.segments {
        let (mut e, mut busy) = (0.0, 0.0);
        for &(b, n) in &seg.blocks {
            let (c, t) = block_cost[b as usize];
            e += n as f64 * c;
            busy += n as f64 * t;
        }
        let start = clock.max(seg.t_ms as f64 / 1000.0);
        if busy > 0.0 {
            activities.push(Activity { start_s: start, end_s: start + busy, watts: e / busy });
            clock = start + busy;
        } else {
            clock = start;
        }
    }
    let duration_s = clock.max(target_s);

    let op_counts = case_op_counts(dict, &result.log)?;
    let mut total = crate::exact::ExactSum::new();
    for (c, &n) in cost.iter().zip(&op_counts) {
        total.add_product(*c, n as f64);
    }
    let mut gc_events = 0;
    if truth.gc_rate_hz > 0.0 && duration_s > 0.0 {
        let (gc_cost, gc_time) = truth.lookup(GC_OP)?;
        let mut rng = stream(seed, result.case_id, 0x6763);
        let lambda = truth.gc_rate_hz * duration_s;
        gc_events = Poisson::new(lambda).map_or(0.0, |p| p.sample(&mut rng)) as u64;
        for _ in 0..gc_events {
            let span = gc_time.min(duration_s);
            let start = rng.random::<f64>() * (duration_s - span);
            if span > 0.0 {
                activities.push(Activity { start_s: start, end_s: start + span, watts: gc_cost / span });
            }
            total.add(gc_cost);
        }
    }
    Ok(Workload { case_id: result.case_id, duration_s, activities, op_counts, gc_events, energy_j: total.value() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sensor {
    /// Each sample reports the mean power since the previous sample, as an
    /// integrating power monitor does.
    Averaging,
    /// Each sample reports the instantaneous power.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub rate_hz: f64,
    pub sensor: Sensor,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig { rate_hz: 30.0, sensor: Sensor::Averaging }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    /// `(t_s, power_w)`, times non-decreasing.
    pub samples: Vec<(f64, f64)>,
}

/// Cumulative extra energy as a piecewise-linear function of time.
struct Profile {
    /// `(t, cumulative joules at t, power from t on)`.
    knots: Vec<(f64, f64, f64)>,
}

impl Profile {
    fn new(activities: &[Activity]) -> Profile {
        let mut edges: Vec<(f64, f64)> = Vec::with_capacity(activities.len() * 2);
        for a in activities {
            edges.push((a.start_s, a.watts));
            edges.push((a.end_s, -a.watts));
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut knots = Vec::with_capacity(edges.len() + 1);
        let (mut t, mut e, mut w) = (0.0, 0.0, 0.0);
        knots.push((t, e, w));
        for (at, dw) in edges {
            e += w * (at - t);
            t = at;
            w += dw;
            if libm::fabs(w) < 1e-12 * libm::fabs(dw) {
                w = 0.0;
            }
            knots.push((t, e, w));
        }
        Profile { knots }
    }

    fn knot(&self, t: f64) -> (f64, f64, f64) {
        let i = self.knots.partition_point(|k| k.0 <= t);
        self.knots[i.saturating_sub(1)]
    }

    fn energy_until(&self, t: f64) -> f64 {
        let (t0, e0, w) = self.knot(t);
        e0 + w * (t - t0)
    }

    fn power_at(&self, t: f64) -> f64 {
        self.knot(t).2
    }
}

/// Samples the power function of `workload` (or of an idle run of the same
/// duration when `idle` is set). Deterministic under `seed`.
pub fn synthesize_trace(
    workload: &Workload,
    truth: &GroundTruth,
    device: &DeviceConfig,
    idle: bool,
    seed: u64,
) -> Result<PowerTrace, DeviceError> {
    if !(device.rate_hz > 0.0) {
        return Err(DeviceError::Rate);
    }
    let profile = Profile::new(if idle { &[] } else { &workload.activities });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_max = libm::ceil(workload.duration_s * device.rate_hz - 1e-9).max(1.0) as usize;
    let dt = 1.0 / device.rate_hz;
    let mut samples = Vec::with_capacity(k_max + 1);
    let mut prev = 0.0;
    for k in 0..=k_max {
        let mut t = k as f64 * dt;
        if truth.noise.jitter_s > 0.0 && k > 0 && k < k_max {
            let z: f64 = rng.sample(StandardNormal);
            t += z * truth.noise.jitter_s;
        }
        let t = t.max(prev).min(k_max as f64 * dt);
        let extra = match device.sensor {
            Sensor::Averaging if k > 0 && t > prev => (profile.energy_until(t) - profile.energy_until(prev)) / (t - prev),
            _ => profile.power_at(t),
        };
        let mut p = truth.idle_w + extra;
        if truth.noise.sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            p = (p * (1.0 + truth.noise.sigma * z)).max(0.0);
        }
        samples.push((t, p));
        prev = t;
    }
    Ok(PowerTrace { samples })
}

/// Right-endpoint sum `Σ_{i≥1} power(t_i) · (t_i − t_{i−1})`.
pub fn integrate(trace: &PowerTrace) -> Result<f64, DeviceError> {
    let s = &trace.samples;
    if s.len() < 2 {
        return Err(DeviceError::TooFewSamples(s.len()));
    }
    Ok(s.windows(2).map(|w| w[1].1 * (w[1].0 - w[0].0)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeasurement {
    pub case_id: u32,
    pub e_meas: f64,
    pub e_idle: f64,
    /// Workload energy `e_meas − e_idle`; negative values are kept.
    pub e: f64,
    pub repeats: u32,
    pub meas_runs: Vec<f64>,
    pub idle_runs: Vec<f64>,
    /// Standard error of `e` across repeat pairs (0 for a single repeat).
    pub stderr: f64,
    pub duration_s: f64,
    pub gc_events: u64,
}

impl EnergyMeasurement {
    pub fn is_negative(&self) -> bool {
        self.e < 0.0
    }
}

/// Runs the idle and measured runs of `schedule` against one workload. The
/// interpreter is deterministic, so every measured run replays the same
/// workload; runs differ only in sensor noise and jitter.
pub fn measure_workload(
    workload: &Workload,
    truth: &GroundTruth,
    device: &DeviceConfig,
    schedule: &RunSchedule,
    seed: u64,
) -> Result<EnergyMeasurement, DeviceError> {
    let mut meas_runs = Vec::with_capacity(schedule.repeats as usize);
    let mut idle_runs = Vec::with_capacity(schedule.repeats as usize);
    for run in &schedule.runs {
        let rng_seed = mix64(mix64(seed ^ mix64(workload.case_id as u64)) ^ mix64(run.index as u64 + 1));
        match run.kind {
            RunKind::Path => {}
            RunKind::Idle => idle_runs.push(integrate(&synthesize_trace(workload, truth, device, true, rng_seed)?)?),
            RunKind::Measured => meas_runs.push(integrate(&synthesize_trace(workload, truth, device, false, rng_seed)?)?),
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (e_meas, e_idle) = (mean(&meas_runs), mean(&idle_runs));
    let diffs: Vec<f64> = meas_runs.iter().zip(&idle_runs).map(|(m, i)| m - i).collect();
    let r = diffs.len();
    let stderr = if r > 1 {
        let d = mean(&diffs);
        let var = diffs.iter().map(|x| (x - d) * (x - d)).sum::<f64>() / (r - 1) as f64;
        libm::sqrt(var / r as f64)
    } else {
        0.0
    };
    Ok(EnergyMeasurement {
        case_id: workload.case_id,
        e_meas,
        e_idle,
        e: e_meas - e_idle,
        repeats: schedule.repeats,
        meas_runs,
        idle_runs,
        stderr,
        duration_s: workload.duration_s,
        gc_events: workload.gc_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{schedule, ExecutionCase};
    use alloc::vec;

    fn truth(sigma: f64) -> GroundTruth {
        let mut t = GroundTruth::synthetic(&[], &TruthParams::default(), 0);
        t.noise.sigma = sigma;
        t
    }

    fn flat(duration_s: f64, activities: Vec<Activity>) -> Workload {
        let energy_j = activities.iter().map(|a| a.watts * (a.end_s - a.start_s)).sum();
        Workload { case_id: 0, duration_s, activities, op_counts: vec![], gc_events: 0, energy_j }
    }

    #[test]
    fn idle_only_trace_is_flat() {
        let tr = synthesize_trace(&flat(10.0, vec![]), &truth(0.0), &DeviceConfig::default(), false, 1).unwrap();
        assert!((300..=302).contains(&tr.samples.len()));
        assert!(tr.samples.iter().all(|s| s.1 == 0.5));
    }

    #[test]
    fn integrate_examples() {
        let s: Vec<(f64, f64)> = (0..11).map(|i| (i as f64 / 30.0, 2.0)).collect();
        let e = integrate(&PowerTrace { samples: s }).unwrap();
        assert!((e - 2.0 * 10.0 / 30.0).abs() < 1e-12);
        assert_eq!(integrate(&PowerTrace { samples: vec![(0.0, 9.0), (1.0, 3.0)] }).unwrap(), 3.0);
        assert_eq!(integrate(&PowerTrace { samples: vec![(0.0, 1.0)] }), Err(DeviceError::TooFewSamples(1)));
    }

    #[test]
    fn averaging_sensor_integrates_exactly() {
        let acts = vec![
            Activity { start_s: 0.01, end_s: 0.013, watts: 1.2 },
            Activity { start_s: 0.5, end_s: 0.9, watts: 0.3 },
            Activity { start_s: 0.6, end_s: 0.61, watts: 2.0 },
        ];
        let w = flat(2.0, acts);
        let mut t = truth(0.0);
        t.noise.jitter_s = 0.004;
        let dev = DeviceConfig::default();
        let e = integrate(&synthesize_trace(&w, &t, &dev, false, 3).unwrap()).unwrap();
        let idle = integrate(&synthesize_trace(&w, &t, &dev, true, 3).unwrap()).unwrap();
        assert!((e - idle - w.energy_j).abs() < 1e-12, "{} vs {}", e - idle, w.energy_j);
    }

    #[test]
    fn point_sensor_misses_short_bursts() {
        let w = flat(1.0, vec![Activity { start_s: 0.001, end_s: 0.002, watts: 5.0 }]);
        let dev = DeviceConfig { sensor: Sensor::Point, ..DeviceConfig::default() };
        let e = integrate(&synthesize_trace(&w, &truth(0.0), &dev, false, 0).unwrap()).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn measurement_subtracts_idle() {
        let w = flat(1.0, vec![Activity { start_s: 0.2, end_s: 0.4, watts: 0.25 }]);
        let case = ExecutionCase { id: 0, scenario: "s".into(), inputs: vec![], removed: vec![], duration_s: 1.0 };
        let sch = schedule(&case, 10).unwrap();
        let m = measure_workload(&w, &truth(0.0), &DeviceConfig::default(), &sch, 9).unwrap();
        assert!((m.e - 0.05).abs() < 1e-12);
        assert_eq!((m.meas_runs.len(), m.idle_runs.len()), (10, 10));
        assert_eq!(m.stderr, 0.0);
        let noisy = measure_workload(&w, &truth(0.05), &DeviceConfig::default(), &sch, 9).unwrap();
        assert!(noisy.stderr > 0.0);
        assert_eq!(noisy, measure_workload(&w, &truth(0.05), &DeviceConfig::default(), &sch, 9).unwrap());
    }

    #[test]
    fn synthetic_truth_is_anchored_and_seeded() {
        let ids: Vec<String> = ["Addition_int_int", "BlockGoto_for", "BlockGoto_if", "BlockGoto_while", "Lib:Math.sqrt"]
            .iter()
            .map(|s| String::from(*s))
            .collect();
        let t = GroundTruth::synthetic(&ids, &TruthParams::default(), 42);
        assert_eq!(t.costs_j["BlockGoto_if"], 6.7e-6);
        assert_eq!(t.costs_j["BlockGoto_for"], 4.1e-6);
        assert_eq!(t.costs_j["BlockGoto_while"], 1.1e-6);
        let c = t.costs_j["Addition_int_int"];
        assert!((0.1e-6..=50e-6).contains(&c));
        assert_eq!(t, GroundTruth::synthetic(&ids, &TruthParams::default(), 42));
        assert_ne!(t, GroundTruth::synthetic(&ids, &TruthParams::default(), 43));
        assert!(t.validate().is_ok());
        let mut bad = t.clone();
        bad.idle_w = 0.0;
        assert!(bad.validate().is_err());
    }
}
