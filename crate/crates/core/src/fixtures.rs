//! Bundled MiniJ programs and the scenario the demo runs them under.

use alloc::vec;

use crate::device::{NoiseModel, TruthParams};
use crate::planner::{EventGenerator, ScenarioSpec};

/// Click-and-move game loop handling `frame`, `tap` and `key` events.
pub const GAME_LOOP: &str = include_str!("../fixtures/game_loop.mj");

pub const BLIT_ORIGINAL: &str = include_str!("../fixtures/blit_original.mj");
/// Loop bound hoisted out of the loop.
pub const BLIT_LICM: &str = include_str!("../fixtures/blit_licm.mj");
/// Bound hoisted and the body unrolled eight times.
pub const BLIT_UNROLLED: &str = include_str!("../fixtures/blit_unrolled.mj");
/// Whole-buffer library copy instead of the loop.
pub const BLIT_LIBRARY: &str = include_str!("../fixtures/blit_library.mj");

/// The vertex-upload variants in comparison order.
pub fn blit_variants() -> [(&'static str, &'static str); 4] {
    [("original", BLIT_ORIGINAL), ("licm", BLIT_LICM), ("unrolled", BLIT_UNROLLED), ("library", BLIT_LIBRARY)]
}

/// Case length used by the demo.
pub const DEMO_DURATION_S: f64 = 3.0;

/// Synthetic device for the demo. The cost ceiling keeps workload energy
/// well above the idle floor, so `sigma` dominates the measurement error.
pub fn demo_truth_params(sigma: f64) -> TruthParams {
    TruthParams { cost_range_j: (0.1e-6, 200e-6), noise: NoiseModel { sigma, jitter_s: 0.0 }, ..TruthParams::default() }
}

/// Desk-scale session for [`GAME_LOOP`]: frames at a fixed rate, taps and
/// key presses as Poisson arrivals.
pub fn demo_scenario(duration_s: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "click-and-move".into(),
        duration_s,
        generators: vec![
            EventGenerator { kind: "frame".into(), rate_hz: 30.0, periodic: true, payload: vec![(25, 40)] },
            EventGenerator { kind: "tap".into(), rate_hz: 4.0, periodic: false, payload: vec![(0, 319), (0, 479)] },
            EventGenerator { kind: "key".into(), rate_hz: 3.0, periodic: false, payload: vec![(0, 6)] },
        ],
        intensity: (0.6, 1.4),
        max_removed: 20,
        keep: vec![],
    }
}

/// Scenario for the vertex-upload variants: frames only.
pub fn blit_scenario(duration_s: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "vertex-upload".into(),
        duration_s,
        generators: vec![EventGenerator { kind: "frame".into(), rate_hz: 30.0, periodic: true, payload: vec![(33, 33)] }],
        intensity: (1.0, 1.0),
        max_removed: 20,
        keep: vec![],
    }
}
