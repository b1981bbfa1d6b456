use emod_core::blocks::divide_blocks;
use emod_core::device::{measure_workload, workload, DeviceConfig, GroundTruth};
use emod_core::fixtures::*;
use emod_core::frontend::{list_library_functions, parse};
use emod_core::opdict::{build_dictionary, case_op_counts};
use emod_core::planner::{plan_cases, schedule};
use emod_core::regress::{assemble, rank};
use emod_core::runner::{run, RunOptions};

#[test]
fn game_loop_shape() {
    let p = parse(GAME_LOOP).unwrap();
    let t = divide_blocks(&p);
    let d = build_dictionary(&p, &t);
    assert_eq!(t.len(), 108);
    assert_eq!(t.removable().len(), 65);
    assert_eq!(d.num_ops(), 55);
    assert_eq!(list_library_functions(&p).len(), 9);
}

#[test]
fn demo_plan_has_full_column_rank() {
    let p = parse(GAME_LOOP).unwrap();
    let t = divide_blocks(&p);
    let d = build_dictionary(&p, &t);
    let ids = d.op_ids();
    let truth = GroundTruth::synthetic(&ids, &demo_truth_params(0.0), 7);
    let cases = plan_cases(&t, &demo_scenario(DEMO_DURATION_S), 150, 42).unwrap();
    let mut counts = Vec::new();
    let mut energies = Vec::new();
    for c in &cases {
        let r = run(&p, &t, c, &RunOptions::default()).unwrap();
        let dr = d.with_removed(&c.removed).unwrap();
        let w = workload(&r, &dr, &truth, c.duration_s, 1).unwrap();
        let m = measure_workload(&w, &truth, &DeviceConfig::default(), &schedule(c, 1).unwrap(), 1).unwrap();
        // Without noise, right-endpoint sums of an averaging sensor are exact.
        assert!((m.e - w.energy_j).abs() <= 1e-9 * w.energy_j);
        counts.push((c.id, w.op_counts));
        energies.push((c.id, m.e));
    }
    let (n, _) = assemble(&counts, &energies, ids.clone()).unwrap();
    assert_eq!(rank(&n), ids.len());
}

#[test]
fn unrolling_divides_for_gotos_by_eight() {
    let mut gotos = Vec::new();
    for (_, src) in blit_variants() {
        let p = parse(src).unwrap();
        let t = divide_blocks(&p);
        let d = build_dictionary(&p, &t);
        let mut sc = blit_scenario(1.0);
        sc.max_removed = 0;
        let c = &plan_cases(&t, &sc, 2, 1).unwrap()[0];
        let r = run(&p, &t, c, &RunOptions::default()).unwrap();
        let n = case_op_counts(&d, &r.log).unwrap();
        gotos.push(d.column_of("BlockGoto_for").map_or(0, |j| n[j]));
    }
    assert_eq!(gotos, [480, 480, 60, 0]);
}
