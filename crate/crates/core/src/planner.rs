//! Execution-case design: input sequences crossed with removed-block sets,
//! plus the per-case measurement schedule.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::BlockTable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEvent {
    pub t_ms: u64,
    pub kind: String,
    pub payload: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionCase {
    pub id: u32,
    pub scenario: String,
    pub inputs: Vec<InputEvent>,
    /// Sorted, distinct.
    pub removed: Vec<u32>,
    pub duration_s: f64,
}

/// The serialized case plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePlan {
    pub cases: Vec<ExecutionCase>,
}

/// Produces events of one kind: a fixed-rate stream (frames) or Poisson
/// arrivals (taps, key presses).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGenerator {
    pub kind: String,
    /// Mean events per second.
    pub rate_hz: f64,
    #[serde(default)]
    pub periodic: bool,
    /// Inclusive range of each payload value.
    #[serde(default)]
    pub payload: Vec<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub duration_s: f64,
    pub generators: Vec<EventGenerator>,
    /// Each case scales every generator's rate by an independent factor drawn
    /// uniformly from this range, so event mixes differ between cases.
    pub intensity: (f64, f64),
    /// Upper bound `k` on the number of blocks removed per case.
    pub max_removed: usize,
    /// Blocks that are never removed.
    #[serde(default)]
    pub keep: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("at least {needed} case(s) required, got {got}")]
    TooFewCases { needed: usize, got: usize },
    #[error("scenario references unknown block {0}")]
    UnknownBlock(u32),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("repeats must be at least 1")]
    NoRepeats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    /// Logs the execution path; its energy is never used.
    Path,
    Idle,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledRun {
    pub index: u32,
    pub kind: RunKind,
    /// Pairs the k-th idle run with the k-th measured run.
    pub repeat: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSchedule {
    pub case_id: u32,
    pub repeats: u32,
    pub runs: Vec<ScheduledRun>,
}

impl RunSchedule {
    pub fn of_kind(&self, kind: RunKind) -> impl Iterator<Item = &ScheduledRun> {
        self.runs.iter().filter(move |r| r.kind == kind)
    }
}

/// One path run, then alternating idle and measured runs.
pub fn schedule(case: &ExecutionCase, repeats: u32) -> Result<RunSchedule, PlanError> {
    if repeats == 0 {
        return Err(PlanError::NoRepeats);
    }
    let mut runs = Vec::with_capacity(2 * repeats as usize + 1);
    runs.push(ScheduledRun { index: 0, kind: RunKind::Path, repeat: 0 });
    for k in 0..repeats {
        runs.push(ScheduledRun { index: 1 + 2 * k, kind: RunKind::Idle, repeat: k });
        runs.push(ScheduledRun { index: 2 + 2 * k, kind: RunKind::Measured, repeat: k });
    }
    Ok(RunSchedule { case_id: case.id, repeats, runs })
}

fn validate(table: &BlockTable, scenario: &ScenarioSpec) -> Result<Vec<u32>, PlanError> {
    for &b in &scenario.keep {
        if b as usize >= table.len() {
            return Err(PlanError::UnknownBlock(b));
        }
    }
    let (lo, hi) = scenario.intensity;
    if !(scenario.duration_s > 0.0) || !(lo > 0.0 && lo <= hi) {
        return Err(PlanError::InvalidScenario("duration and intensity range must be positive".into()));
    }
    for g in &scenario.generators {
        if !(g.rate_hz >= 0.0) || g.payload.iter().any(|(a, b)| a > b) {
            return Err(PlanError::InvalidScenario(alloc::format!("generator `{}`", g.kind)));
        }
    }
    let keep: BTreeSet<u32> = scenario.keep.iter().copied().collect();
    Ok(table.removable().into_iter().filter(|b| !keep.contains(b)).collect())
}

fn events(scenario: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<InputEvent> {
    let horizon_ms = scenario.duration_s * 1000.0;
    let (lo, hi) = scenario.intensity;
    let mut out = Vec::new();
    for g in &scenario.generators {
        let scale = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let rate = g.rate_hz * scale;
        if rate <= 0.0 {
            continue;
        }
        let mut t = if g.periodic { 0.0 } else { exponential(rng, rate) * 1000.0 };
        while t < horizon_ms {
            let payload = g.payload.iter().map(|&(a, b)| rng.random_range(a..=b)).collect();
            out.push(InputEvent { t_ms: t as u64, kind: g.kind.clone(), payload });
            t += if g.periodic { 1000.0 / rate } else { exponential(rng, rate) * 1000.0 };
        }
    }
    out.sort_by(|a, b| a.t_ms.cmp(&b.t_ms).then_with(|| a.kind.cmp(&b.kind)));
    out
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -libm::log1p(-u) / rate
}

fn removal_set(candidates: &[u32], k: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let k = k.min(candidates.len());
    let size = rng.random_range(0..=k);
    let mut pool = candidates.to_vec();
    let (chosen, _) = pool.partial_shuffle(rng, size);
    let mut set = chosen.to_vec();
    set.sort_unstable();
    set
}

fn new_cases(candidates: &[u32], scenario: &ScenarioSpec, first_id: u32, count: usize, rng: &mut ChaCha8Rng) -> Vec<ExecutionCase> {
    (0..count)
        .map(|i| ExecutionCase {
            id: first_id + i as u32,
            scenario: scenario.name.clone(),
            inputs: events(scenario, rng),
            removed: removal_set(candidates, scenario.max_removed, rng),
            duration_s: scenario.duration_s,
        })
        .collect()
}

/// Draws `count` cases. Every removable block (outside `keep`) ends up
/// removed in at least one case and present in at least one other.
pub fn plan_cases(table: &BlockTable, scenario: &ScenarioSpec, count: usize, seed: u64) -> Result<Vec<ExecutionCase>, PlanError> {
    let candidates = validate(table, scenario)?;
    let needed = if candidates.is_empty() { 1 } else { 2 };
    if count < needed {
        return Err(PlanError::TooFewCases { needed, got: count });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = new_cases(&candidates, scenario, 0, count, &mut rng);
    for &b in &candidates {
        let removed_in = cases.iter().filter(|c| c.removed.binary_search(&b).is_ok()).count();
        if removed_in == 0 {
            let c = &mut cases[rng.random_range(0..count)];
            let pos = c.removed.binary_search(&b).unwrap_err();
            c.removed.insert(pos, b);
        } else if removed_in == count {
            let c = &mut cases[rng.random_range(0..count)];
            c.removed.retain(|&x| x != b);
        }
    }
    Ok(cases)
}

/// Extra cases appended after `existing`, used when the counts matrix of the
/// planned cases turns out rank deficient.
pub fn augment_cases(
    table: &BlockTable,
    scenario: &ScenarioSpec,
    existing: &[ExecutionCase],
    extra: usize,
    seed: u64,
) -> Result<Vec<ExecutionCase>, PlanError> {
    let candidates = validate(table, scenario)?;
    let first_id = existing.iter().map(|c| c.id + 1).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(first_id as u64 + 1)));
    Ok(new_cases(&candidates, scenario, first_id, extra, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::divide_blocks;
    use crate::frontend::parse;
    use alloc::vec;

    fn scenario(k: usize) -> ScenarioSpec {
        ScenarioSpec {
            name: "s".into(),
            duration_s: 2.0,
            generators: vec![
                EventGenerator { kind: "frame".into(), rate_hz: 20.0, periodic: true, payload: vec![(0, 9)] },
                EventGenerator { kind: "tap".into(), rate_hz: 3.0, periodic: false, payload: vec![(0, 100), (0, 100)] },
            ],
            intensity: (0.5, 1.5),
            max_removed: k,
            keep: vec![],
        }
    }

    fn table() -> BlockTable {
        let src = "int x; void onFrame(int k) { if (k > 3) { x = 1; } else { x = 2; } }
                   void onTap(int a, int b) { if (a > b) { x = a; } }";
        divide_blocks(&parse(src).unwrap())
    }

    #[test]
    fn schedule_sizes() {
        let c = plan_cases(&divide_blocks(&parse("void f() { }").unwrap()), &scenario(0), 1, 1).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].removed.is_empty());
        assert_eq!(schedule(&c[0], 10).unwrap().runs.len(), 21);
        assert_eq!(schedule(&c[0], 1).unwrap().runs.len(), 3);
        assert_eq!(schedule(&c[0], 0), Err(PlanError::NoRepeats));
        let s = schedule(&c[0], 4).unwrap();
        assert_eq!(s.of_kind(RunKind::Idle).count(), 4);
        assert_eq!(s.of_kind(RunKind::Measured).count(), 4);
    }

    #[test]
    fn coverage_and_determinism() {
        let t = table();
        let removable = t.removable();
        assert_eq!(removable.len(), 3);
        for seed in 0..20 {
            let cases = plan_cases(&t, &scenario(2), 4, seed).unwrap();
            assert_eq!(cases, plan_cases(&t, &scenario(2), 4, seed).unwrap());
            for &b in &removable {
                assert!(cases.iter().any(|c| c.removed.contains(&b)));
                assert!(cases.iter().any(|c| !c.removed.contains(&b)));
            }
            for c in &cases {
                assert!(c.removed.iter().all(|b| removable.contains(b)));
                assert!(c.inputs.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
                assert!(c.inputs.iter().all(|e| (e.t_ms as f64) < c.duration_s * 1000.0));
            }
        }
    }

    #[test]
    fn errors() {
        let t = table();
        let mut s = scenario(2);
        assert!(matches!(plan_cases(&t, &s, 1, 0), Err(PlanError::TooFewCases { .. })));
        s.keep = vec![999];
        assert_eq!(plan_cases(&t, &s, 4, 0), Err(PlanError::UnknownBlock(999)));
    }

    #[test]
    fn augmentation_continues_ids() {
        let t = table();
        let cases = plan_cases(&t, &scenario(2), 5, 3).unwrap();
        let more = augment_cases(&t, &scenario(2), &cases, 3, 3).unwrap();
        assert_eq!(more.iter().map(|c| c.id).collect::<Vec<_>>(), [5, 6, 7]);
    }
}
