//! Energy accounting from a fitted cost model: operation ranking, per-block
//! energy and class breakdowns, and comparison of program variants.
//!
//! Totals are exactly rounded sums of exact products, so the operation view,
//! the block view and `n · cost` agree to the last bit.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::exact::ExactSum;
use crate::opdict::{class_of_id, BlockLog, OpClass, OpDictionary};
use crate::regress::CostModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AccountingError {
    #[error("top-{k} requested but only {l} operations exist")]
    TopK { k: usize, l: usize },
    #[error("{0} counts for {1} operations")]
    Length(usize, usize),
    #[error("operation `{0}` has no cost in the model")]
    UnknownOp(String),
    #[error("block log has {got} entries for {expected} blocks")]
    LogLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRow {
    pub id: String,
    pub class: OpClass,
    pub unit_cost_j: f64,
    pub executions: u64,
    pub total_j: f64,
    /// Fraction of the total energy (0 when the total is 0).
    pub share: f64,
    /// Share of this row and every row ranked above it.
    pub cumulative_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRanking {
    /// Sorted by unit cost, highest first.
    pub rows: Vec<OpRow>,
    pub total_j: f64,
    pub k: usize,
    pub top_k_share: f64,
}

impl OpRanking {
    /// Aggregate share of the given operations.
    pub fn share_of(&self, ids: &[&str]) -> f64 {
        let mut s = ExactSum::new();
        for r in self.rows.iter().filter(|r| ids.contains(&r.id.as_str())) {
            s.add(r.total_j);
        }
        if self.total_j > 0.0 {
            s.value() / self.total_j
        } else {
            0.0
        }
    }

    /// Energy by operation class, in [`OpClass::ALL`] order.
    pub fn class_totals(&self) -> [f64; 8] {
        let mut sums: [ExactSum; 8] = Default::default();
        for r in &self.rows {
            sums[r.class.index()].add_product(r.unit_cost_j, r.executions as f64);
        }
        sums.map(|s| s.value())
    }
}

/// Ranks operations by unit cost and reports each one's aggregate share.
pub fn rank_operations(model: &CostModel, counts: &[u64], k: usize) -> Result<OpRanking, AccountingError> {
    let l = model.op_ids.len();
    if counts.len() != l {
        return Err(AccountingError::Length(counts.len(), l));
    }
    if k > l {
        return Err(AccountingError::TopK { k, l });
    }
    let mut total = ExactSum::new();
    for (c, &n) in model.cost.iter().zip(counts) {
        total.add_product(*c, n as f64);
    }
    let total_j = total.value();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| model.cost[b].total_cmp(&model.cost[a]).then_with(|| model.op_ids[a].cmp(&model.op_ids[b])));
    let mut running = ExactSum::new();
    let rows: Vec<OpRow> = order
        .into_iter()
        .map(|j| {
            let (c, n) = (model.cost[j], counts[j]);
            running.add_product(c, n as f64);
            let frac = |x: f64| if total_j != 0.0 { x / total_j } else { 0.0 };
            OpRow {
                id: model.op_ids[j].clone(),
                class: class_of_id(&model.op_ids[j]),
                unit_cost_j: c,
                executions: n,
                total_j: c * n as f64,
                share: frac(c * n as f64),
                cumulative_share: frac(running.value()),
            }
        })
        .collect();
    let top_k_share = if k == 0 { 0.0 } else { rows[k - 1].cumulative_share };
    Ok(OpRanking { rows, total_j, k, top_k_share })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: u32,
    pub executions: u64,
    /// Energy over the whole run: `Σ_j O[i][j] · B_i · cost_j`.
    pub in_app_j: f64,
    /// Energy of one entry: `Σ_j O[i][j] · cost_j`.
    pub single_j: f64,
    /// `3000 × single_j`.
    pub per3000_j: f64,
    /// Percent of `single_j` per class, in [`OpClass::ALL`] order; all zero
    /// for a block without energy.
    pub class_share: [f64; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBreakdown {
    pub rows: Vec<BlockRow>,
    /// Exact sum over every block and operation.
    pub total_j: f64,
}

fn model_costs(model: &CostModel, dict: &OpDictionary) -> Result<Vec<f64>, AccountingError> {
    let by_id: BTreeMap<&str, f64> = model.op_ids.iter().map(String::as_str).zip(model.cost.iter().copied()).collect();
    dict.ops.iter().map(|o| by_id.get(o.id.as_str()).copied().ok_or_else(|| AccountingError::UnknownOp(o.id.clone()))).collect()
}

pub fn block_breakdown(model: &CostModel, dict: &OpDictionary, log: &BlockLog) -> Result<BlockBreakdown, AccountingError> {
    if log.counts.len() != dict.blocks {
        return Err(AccountingError::LogLength { expected: dict.blocks, got: log.counts.len() });
    }
    let cost = model_costs(model, dict)?;
    let mut total = ExactSum::new();
    let mut rows = Vec::with_capacity(dict.blocks);
    for (i, &b) in log.counts.iter().enumerate() {
        let (mut in_app, mut single) = (ExactSum::new(), ExactSum::new());
        let mut classes: [ExactSum; 8] = Default::default();
        for (j, &o) in dict.row(i).iter().enumerate() {
            if o == 0 {
                continue;
            }
            let times = o as u64 * b;
            in_app.add_product(cost[j], times as f64);
            total.add_product(cost[j], times as f64);
            single.add_product(cost[j], o as f64);
            classes[dict.ops[j].class.index()].add_product(cost[j], o as f64);
        }
        let single_j = single.value();
        let class_share = if single_j != 0.0 { classes.map(|c| 100.0 * c.value() / single_j) } else { [0.0; 8] };
        rows.push(BlockRow {
            block: i as u32,
            executions: b,
            in_app_j: in_app.value(),
            single_j,
            per3000_j: 3000.0 * single_j,
            class_share,
        });
    }
    Ok(BlockBreakdown { rows, total_j: total.value() })
}

/// Model-predicted energy `n · cost`, exactly rounded. Operations absent
/// from the model are an error unless they never executed.
pub fn predicted_energy(model: &CostModel, op_ids: &[String], counts: &[u64]) -> Result<f64, AccountingError> {
    if op_ids.len() != counts.len() {
        return Err(AccountingError::Length(counts.len(), op_ids.len()));
    }
    let by_id: BTreeMap<&str, f64> = model.op_ids.iter().map(String::as_str).zip(model.cost.iter().copied()).collect();
    let mut s = ExactSum::new();
    for (id, &n) in op_ids.iter().zip(counts) {
        match by_id.get(id.as_str()) {
            Some(c) => s.add_product(*c, n as f64),
            None if n == 0 => {}
            None => return Err(AccountingError::UnknownOp(id.clone())),
        }
    }
    Ok(s.value())
}

/// Operation counts of one program variant under the shared scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCounts {
    pub name: String,
    pub op_ids: Vec<String>,
    pub counts: Vec<u64>,
}

impl VariantCounts {
    pub fn count_of(&self, id: &str) -> u64 {
        self.op_ids.iter().position(|o| o == id).map_or(0, |j| self.counts[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub name: String,
    pub energy_j: f64,
    /// Percent change against the first variant.
    pub change_pct: f64,
}

/// Predicted energy of every variant, relative to the first.
pub fn compare_variants(model: &CostModel, variants: &[VariantCounts]) -> Result<Vec<VariantRow>, AccountingError> {
    let energies = variants.iter().map(|v| predicted_energy(model, &v.op_ids, &v.counts)).collect::<Result<Vec<_>, _>>()?;
    let base = energies.first().copied().unwrap_or(0.0);
    Ok(variants
        .iter()
        .zip(energies)
        .map(|(v, e)| VariantRow {
            name: v.name.clone(),
            energy_j: e,
            change_pct: if base != 0.0 { 100.0 * (e - base) / base } else { 0.0 },
        })
        .collect())
}

/// Convenience for tests and reports: a model with the given costs.
pub fn model_from_costs(costs: &BTreeMap<String, f64>) -> CostModel {
    CostModel {
        op_ids: costs.keys().cloned().collect(),
        cost: costs.values().copied().collect(),
        meta: crate::regress::FitMeta {
            seed: 0,
            restart: 0,
            iters: 0,
            final_j: 0.0,
            final_alpha: 0.0,
            converged: true,
            rank: 0,
            unidentified: vec![],
            j_history: vec![],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::divide_blocks;
    use crate::frontend::parse;
    use crate::opdict::{build_dictionary, case_op_counts};
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn model(pairs: &[(&str, f64)]) -> CostModel {
        model_from_costs(&pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn ranking_by_unit_cost_with_aggregate_shares() {
        let m = model(&[("a", 2e-6), ("b", 1e-6)]);
        let r = rank_operations(&m, &[1, 10], 1).unwrap();
        assert_eq!(r.rows[0].id, "a");
        assert!((r.rows[0].share - 1.0 / 6.0).abs() < 1e-12);
        assert!((r.rows[1].share - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.top_k_share - 1.0 / 6.0).abs() < 1e-12);
        assert!(matches!(rank_operations(&m, &[1, 10], 3), Err(AccountingError::TopK { .. })));
        let zero = rank_operations(&m, &[0, 0], 2).unwrap();
        assert_eq!(zero.total_j, 0.0);
        assert!(zero.rows.iter().all(|r| r.share == 0.0));
    }

    #[test]
    fn block_example() {
        let p = parse("void f() { int a = 1; }").unwrap();
        let t = divide_blocks(&p);
        let d = build_dictionary(&p, &t);
        let costs: Vec<(&str, f64)> = d.ops.iter().map(|o| (o.id.as_str(), 0.0)).collect();
        let mut m = model(&costs);
        let j = m.op_ids.iter().position(|o| o == "Declaration_int").unwrap();
        m.cost[j] = 3e-6;
        let j = m.op_ids.iter().position(|o| o == "Assign_int_int").unwrap();
        m.cost[j] = 3e-6;
        let b = block_breakdown(&m, &d, &BlockLog { case_id: 0, counts: vec![2] }).unwrap();
        assert!((b.rows[0].in_app_j - 12e-6).abs() < 1e-18);
        assert!((b.rows[0].single_j - 6e-6).abs() < 1e-18);
        assert_eq!(b.rows[0].per3000_j, 3000.0 * b.rows[0].single_j);
        let pct: f64 = b.rows[0].class_share.iter().sum();
        assert!((pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn variants_relative_to_first() {
        let m = model(&[("a", 1.0), ("b", 2.0)]);
        let v = |name: &str, a, b| VariantCounts { name: name.into(), op_ids: vec!["a".into(), "b".into()], counts: vec![a, b] };
        let rows = compare_variants(&m, &[v("x", 2, 1), v("y", 2, 1), v("z", 1, 1)]).unwrap();
        assert_eq!(rows[1].change_pct, 0.0);
        assert!((rows[2].change_pct + 25.0).abs() < 1e-12);
        let unknown = VariantCounts { name: "u".into(), op_ids: vec!["c".into()], counts: vec![1] };
        assert_eq!(compare_variants(&m, &[unknown]), Err(AccountingError::UnknownOp("c".into())));
    }

    proptest! {
        #[test]
        fn views_agree_bit_for_bit(costs in proptest::collection::vec(1e-9f64..1e-4, 1..64), b0 in 0u64..5000, b1 in 0u64..5000, b2 in 0u64..5000) {
            let src = "extern M.f(int) -> int;
                int x; float y;
                void f(int k) { x = k * 2 + M.f(k); if (x > 3) { y = y + 1.5; x--; } else { y = y * 2.0; }
                  for (int i = 0; i < k; i++) { x += i % 3; } }";
            let p = parse(src).unwrap();
            let t = divide_blocks(&p);
            let d = build_dictionary(&p, &t);
            let pairs: BTreeMap<String, f64> = d.ops.iter().enumerate().map(|(j, o)| (o.id.clone(), costs[j % costs.len()])).collect();
            let m = model_from_costs(&pairs);
            let mut counts = vec![0u64; t.len()];
            for (i, c) in counts.iter_mut().enumerate() {
                *c = [b0, b1, b2][i % 3];
            }
            let log = BlockLog { case_id: 0, counts };
            let n = case_op_counts(&d, &log).unwrap();
            let ops = rank_operations(&m, &n, 0).unwrap();
            let blocks = block_breakdown(&m, &d, &log).unwrap();
            let dot = predicted_energy(&m, &d.op_ids(), &n).unwrap();
            prop_assert_eq!(ops.total_j.to_bits(), blocks.total_j.to_bits());
            prop_assert_eq!(ops.total_j.to_bits(), dot.to_bits());
            for r in &blocks.rows {
                prop_assert_eq!(r.per3000_j, 3000.0 * r.single_j);
                let s: f64 = r.class_share.iter().sum();
                prop_assert!(r.single_j == 0.0 || (s - 100.0).abs() < 0.01);
            }
        }

        #[test]
        fn rank_is_scale_invariant(costs in proptest::collection::vec(1e-9f64..1e-4, 2..30), c in 0.001f64..1000.0) {
            let pairs: BTreeMap<String, f64> = costs.iter().enumerate().map(|(j, v)| (alloc::format!("op{j:02}"), *v)).collect();
            let scaled: BTreeMap<String, f64> = pairs.iter().map(|(k, v)| (k.clone(), v * c)).collect();
            let counts: Vec<u64> = (0..costs.len() as u64).collect();
            let a = rank_operations(&model_from_costs(&pairs), &counts, 1).unwrap();
            let b = rank_operations(&model_from_costs(&scaled), &counts, 1).unwrap();
            let ids = |r: &OpRanking| r.rows.iter().map(|x| x.id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&a), ids(&b));
        }
    }
}
