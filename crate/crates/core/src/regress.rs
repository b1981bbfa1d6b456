//! Per-operation cost fitting by gradient descent, with the evaluation
//! metrics and fold-based validation used to judge a fitted model.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::mix64;

/// Cases × operations execution counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsMatrix {
    pub case_ids: Vec<u32>,
    pub op_ids: Vec<String>,
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

impl CountsMatrix {
    pub fn new(case_ids: Vec<u32>, op_ids: Vec<String>, data: Vec<f64>) -> Result<Self, RegressError> {
        let (rows, cols) = (case_ids.len(), op_ids.len());
        if data.len() != rows * cols {
            return Err(RegressError::Dimension(alloc::format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(CountsMatrix { case_ids, op_ids, rows, cols, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select_rows(&self, rows: &[usize]) -> CountsMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        CountsMatrix {
            case_ids: rows.iter().map(|&i| self.case_ids[i]).collect(),
            op_ids: self.op_ids.clone(),
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn column_max(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| libm::fabs(self.get(i, j))).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("no cases")]
    Empty,
    #[error("case {0} has counts but no measurement, or the reverse")]
    MissingCase(u32),
    #[error("case {0} appears twice")]
    DuplicateCase(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("gradient descent diverged (J = {j:e}); lower the learning rate (alpha = {alpha})")]
    Diverged { j: f64, alpha: f64 },
    #[error("need at least {needed} cases, got {got}")]
    TooFewCases { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("every reference value is zero")]
    AllZero,
    #[error("invalid fit configuration: {0}")]
    Config(String),
}

/// Aligns per-case counts with per-case workload energies by case id.
pub fn assemble(
    counts: &[(u32, Vec<u64>)],
    energies: &[(u32, f64)],
    op_ids: Vec<String>,
) -> Result<(CountsMatrix, Vec<f64>), RegressError> {
    if counts.is_empty() && energies.is_empty() {
        return Err(RegressError::Empty);
    }
    let mut by_id = BTreeMap::new();
    for (id, e) in energies {
        if by_id.insert(*id, *e).is_some() {
            return Err(RegressError::DuplicateCase(*id));
        }
    }
    let mut rows: Vec<(u32, &Vec<u64>)> = counts.iter().map(|(id, c)| (*id, c)).collect();
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(RegressError::DuplicateCase(w[0].0));
    }
    if let Some(id) = by_id.keys().find(|id| rows.binary_search_by_key(*id, |r| r.0).is_err()) {
        return Err(RegressError::MissingCase(*id));
    }
    let mut data = Vec::with_capacity(rows.len() * op_ids.len());
    let mut e = Vec::with_capacity(rows.len());
    for (id, c) in &rows {
        if c.len() != op_ids.len() {
            return Err(RegressError::Dimension(alloc::format!("case {id} has {} counts for {} ops", c.len(), op_ids.len())));
        }
        e.push(*by_id.get(id).ok_or(RegressError::MissingCase(*id))?);
        data.extend(c.iter().map(|&n| n as f64));
    }
    let ids = rows.iter().map(|r| r.0).collect();
    Ok((CountsMatrix::new(ids, op_ids, data)?, e))
}

pub fn predict(n: &CountsMatrix, cost: &[f64]) -> Vec<f64> {
    (0..n.rows).map(|i| n.row(i).iter().zip(cost).map(|(a, b)| a * b).sum()).collect()
}

/// `J = (1/2m) Σ_i (n_i · cost − e_i)²`.
pub fn loss(n: &CountsMatrix, cost: &[f64], e: &[f64]) -> f64 {
    let s: f64 = predict(n, cost).iter().zip(e).map(|(p, y)| (p - y) * (p - y)).sum();
    s / (2.0 * n.rows as f64)
}

/// `∂J/∂cost_j = (1/m) Σ_i (n_i · cost − e_i) · n_ij`.
pub fn gradient(n: &CountsMatrix, cost: &[f64], e: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; n.cols];
    for (i, p) in predict(n, cost).iter().enumerate() {
        let r = p - e[i];
        for (gj, x) in g.iter_mut().zip(n.row(i)) {
            *gj += r * x;
        }
    }
    let m = n.rows as f64;
    g.iter_mut().for_each(|x| *x /= m);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha: f64,
    pub max_iters: u64,
    /// Stop once the relative decrease of J per step falls below this.
    pub epsilon: f64,
    pub restarts: u32,
    /// Initial costs are uniform in this range, joules.
    pub init_range: (f64, f64),
    pub nonneg: bool,
    /// Scale every column to unit maximum before descending.
    pub standardize: bool,
    /// Halve `alpha` whenever a step would increase J.
    pub backoff: bool,
    /// Nesterov momentum, reset whenever it would increase J.
    pub accelerate: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha: 0.1,
            max_iters: 200_000,
            epsilon: 1e-9,
            restarts: 5,
            init_range: (0.0, 1e-5),
            nonneg: false,
            standardize: true,
            backoff: true,
            accelerate: true,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Plain descent with a fixed step, as the update rule is usually written.
    pub fn literal() -> Self {
        FitConfig { standardize: false, backoff: false, accelerate: false, ..FitConfig::default() }
    }

    fn validate(&self) -> Result<(), RegressError> {
        let bad = |m: &str| Err(RegressError::Config(m.into()));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.init_range.0 <= self.init_range.1) {
            return bad("empty init range");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub seed: u64,
    pub restart: u32,
    pub iters: u64,
    pub final_j: f64,
    pub final_alpha: f64,
    pub converged: bool,
    /// Numerical column rank of the counts matrix.
    pub rank: usize,
    /// Operations that never executed; their cost is reported as 0.
    pub unidentified: Vec<String>,
    /// J at iteration 0, every 1000th accepted step, and the end.
    pub j_history: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub op_ids: Vec<String>,
    /// Joules per execution.
    pub cost: Vec<f64>,
    pub meta: FitMeta,
}

impl CostModel {
    pub fn cost_of(&self, id: &str) -> Option<f64> {
        self.op_ids.iter().position(|o| o == id).map(|j| self.cost[j])
    }
}

/// Problem rescaled so that every active column has unit maximum and the
/// targets have unit maximum.
struct Scaled {
    x: Vec<f64>,
    y: Vec<f64>,
    rows: usize,
    active: Vec<usize>,
    col_scale: Vec<f64>,
    y_scale: f64,
}

impl Scaled {
    fn new(n: &CountsMatrix, e: &[f64], standardize: bool) -> Scaled {
        let active: Vec<usize> = (0..n.cols).filter(|&j| n.column_max(j) > 0.0).collect();
        let col_scale: Vec<f64> = active.iter().map(|&j| if standardize { n.column_max(j) } else { 1.0 }).collect();
        let y_scale = if standardize { e.iter().fold(0.0f64, |a, v| a.max(libm::fabs(*v))).max(f64::MIN_POSITIVE) } else { 1.0 };
        let k = active.len();
        let mut x = Vec::with_capacity(n.rows * k);
        for i in 0..n.rows {
            for (c, &j) in active.iter().enumerate() {
                x.push(n.get(i, j) / col_scale[c]);
            }
        }
        Scaled { x, y: e.iter().map(|v| v / y_scale).collect(), rows: n.rows, active, col_scale, y_scale }
    }

    fn residual(&self, w: &[f64], r: &mut [f64]) -> f64 {
        let k = w.len();
        let mut ss = 0.0;
        for i in 0..self.rows {
            let row = &self.x[i * k..(i + 1) * k];
            let p: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
            r[i] = p - self.y[i];
            ss += r[i] * r[i];
        }
        ss / (2.0 * self.rows as f64)
    }

    fn grad(&self, r: &[f64], g: &mut [f64]) {
        let k = g.len();
        g.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.rows {
            let row = &self.x[i * k..(i + 1) * k];
            for (gj, a) in g.iter_mut().zip(row) {
                *gj += r[i] * a;
            }
        }
        let m = self.rows as f64;
        g.iter_mut().for_each(|x| *x /= m);
    }
}

/// Result of one descent from one random start.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub restart: u32,
    pub cost: Vec<f64>,
    pub iters: u64,
    pub final_j: f64,
    pub final_alpha: f64,
    pub converged: bool,
    pub j_history: Vec<(u64, f64)>,
}

/// Runs descent from the `restart`-th seeded initialization. Independent of
/// the other restarts, so callers may run them in parallel.
pub fn fit_restart(n: &CountsMatrix, e: &[f64], config: &FitConfig, restart: u32) -> Result<RestartOutcome, RegressError> {
    config.validate()?;
    if n.rows == 0 || n.cols == 0 {
        return Err(RegressError::Empty);
    }
    if e.len() != n.rows {
        return Err(RegressError::Dimension(alloc::format!("{} energies for {} cases", e.len(), n.rows)));
    }
    let s = Scaled::new(n, e, config.standardize);
    let k = s.active.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(config.seed ^ mix64(restart as u64 + 1)));
    let (lo, hi) = config.init_range;
    let mut w: Vec<f64> = (0..k)
        .map(|c| {
            let cost = if hi > lo { rng.random_range(lo..hi) } else { lo };
            cost * s.col_scale[c] / s.y_scale
        })
        .collect();
    let mut prev = w.clone();
    let mut look = vec![0.0; k];
    let mut cand = vec![0.0; k];
    let mut g = vec![0.0; k];
    let mut r = vec![0.0; s.rows];
    let mut j = s.residual(&w, &mut r);
    let j0 = j;
    let mut alpha = config.alpha;
    let mut momentum_k = 1u64;
    let mut history = vec![(0, j * s.y_scale * s.y_scale)];
    let mut iters = 0;
    let mut converged = k == 0;
    let mut quiet = 0;
    let patience = if config.accelerate { 10 } else { 1 };
    while iters < config.max_iters && !converged {
        iters += 1;
        let beta = if config.accelerate { (momentum_k - 1) as f64 / (momentum_k + 2) as f64 } else { 0.0 };
        for c in 0..k {
            look[c] = w[c] + beta * (w[c] - prev[c]);
        }
        s.residual(&look, &mut r);
        s.grad(&r, &mut g);
        for c in 0..k {
            cand[c] = look[c] - alpha * g[c];
            if config.nonneg && cand[c] < 0.0 {
                cand[c] = 0.0;
            }
        }
        let jc = s.residual(&cand, &mut r);
        if !jc.is_finite() || jc > 1e12 * j0.max(f64::MIN_POSITIVE) {
            if config.backoff && jc.is_finite() {
                alpha *= 0.5;
                continue;
            }
            return Err(RegressError::Diverged { j: jc * s.y_scale * s.y_scale, alpha });
        }
        if jc > j && config.backoff {
            if beta > 0.0 {
                momentum_k = 1;
                prev.copy_from_slice(&w);
            } else {
                alpha *= 0.5;
                if alpha < config.alpha * 1e-30 {
                    return Err(RegressError::Diverged { j: jc * s.y_scale * s.y_scale, alpha });
                }
            }
            continue;
        }
        let rel = if j > 0.0 { (j - jc) / j } else { 0.0 };
        prev.copy_from_slice(&w);
        w.copy_from_slice(&cand);
        momentum_k += 1;
        j = jc;
        if iters % 1000 == 0 {
            history.push((iters, j * s.y_scale * s.y_scale));
        }
        quiet = if rel.abs() < config.epsilon { quiet + 1 } else { 0 };
        if quiet >= patience || j <= 1e-32 * j0 {
            converged = true;
        }
    }
    let final_j = j * s.y_scale * s.y_scale;
    history.push((iters, final_j));
    let mut cost = vec![0.0; n.cols];
    for (c, &col) in s.active.iter().enumerate() {
        cost[col] = w[c] * s.y_scale / s.col_scale[c];
    }
    Ok(RestartOutcome { restart, cost, iters, final_j, final_alpha: alpha, converged, j_history: history })
}

/// Lowest final J wins; ties go to the lower restart index.
pub fn select_best(outcomes: Vec<RestartOutcome>) -> Option<RestartOutcome> {
    outcomes.into_iter().min_by(|a, b| a.final_j.total_cmp(&b.final_j).then(a.restart.cmp(&b.restart)))
}

pub fn finish_model(n: &CountsMatrix, config: &FitConfig, best: RestartOutcome) -> CostModel {
    let unidentified = (0..n.cols).filter(|&j| n.column_max(j) == 0.0).map(|j| n.op_ids[j].clone()).collect();
    CostModel {
        op_ids: n.op_ids.clone(),
        cost: best.cost,
        meta: FitMeta {
            seed: config.seed,
            restart: best.restart,
            iters: best.iters,
            final_j: best.final_j,
            final_alpha: best.final_alpha,
            converged: best.converged,
            rank: rank(n),
            unidentified,
            j_history: best.j_history,
        },
    }
}

/// Fits costs from every restart in turn and keeps the best.
pub fn fit(n: &CountsMatrix, e: &[f64], config: &FitConfig) -> Result<CostModel, RegressError> {
    let mut outcomes = Vec::with_capacity(config.restarts as usize);
    for k in 0..config.restarts.max(1) {
        outcomes.push(fit_restart(n, e, config, k)?);
    }
    let best = select_best(outcomes).ok_or(RegressError::Empty)?;
    Ok(finish_model(n, config, best))
}

/// Numerical column rank via Householder QR with column pivoting, on
/// columns scaled to unit maximum.
pub fn rank(n: &CountsMatrix) -> usize {
    let (m, l) = (n.rows, n.cols);
    let mut a: Vec<f64> = vec![0.0; m * l];
    for j in 0..l {
        let s = n.column_max(j);
        for i in 0..m {
            a[i * l + j] = if s > 0.0 { n.get(i, j) / s } else { 0.0 };
        }
    }
    rank_of(&mut a, m, l, 1e-10)
}

/// Rank of the row-major `m × l` matrix `a` (destroyed), counting pivots
/// above `rel_tol` times the largest.
pub fn rank_of(a: &mut [f64], m: usize, l: usize, rel_tol: f64) -> usize {
    let mut norms: Vec<f64> = (0..l).map(|j| (0..m).map(|i| a[i * l + j] * a[i * l + j]).sum()).collect();
    let mut perm: Vec<usize> = (0..l).collect();
    let steps = m.min(l);
    let mut first = 0.0;
    for k in 0..steps {
        // Recompute remaining norms exactly; matrices here are small.
        for c in k..l {
            let j = perm[c];
            norms[j] = (k..m).map(|i| a[i * l + j] * a[i * l + j]).sum();
        }
        let (best, _) = (k..l).map(|c| (c, norms[perm[c]])).fold((k, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        perm.swap(k, best);
        let p = perm[k];
        let alpha = libm::sqrt(norms[p]);
        if k == 0 {
            first = alpha;
        }
        if alpha <= rel_tol * first || alpha == 0.0 {
            return k;
        }
        let sign = if a[k * l + p] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (k..m).map(|i| a[i * l + p]).collect();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in k..l {
            let j = perm[c];
            let dot: f64 = (k..m).map(|i| v[i - k] * a[i * l + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                a[i * l + j] -= f * v[i - k];
            }
        }
    }
    steps
}

/// Normalized mean absolute error and the number of cases skipped for a
/// zero reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nmae {
    pub value: f64,
    pub dropped: usize,
}

/// `(1/n) Σ |(ê_i − e_i) / e_i|` over cases with `e_i ≠ 0`.
pub fn nmae(estimate: &[f64], actual: &[f64]) -> Result<Nmae, RegressError> {
    if estimate.len() != actual.len() {
        return Err(RegressError::Dimension(alloc::format!("{} estimates for {} values", estimate.len(), actual.len())));
    }
    let (mut sum, mut n, mut dropped) = (0.0, 0usize, 0usize);
    for (p, a) in estimate.iter().zip(actual) {
        if *a == 0.0 {
            dropped += 1;
        } else {
            sum += libm::fabs((p - a) / a);
            n += 1;
        }
    }
    if n == 0 {
        return Err(if dropped == 0 { RegressError::Empty } else { RegressError::AllZero });
    }
    Ok(Nmae { value: sum / n as f64, dropped })
}

/// Pearson correlation coefficient.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64, RegressError> {
    if x.len() != y.len() {
        return Err(RegressError::Dimension(alloc::format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(RegressError::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RegressError::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub train_cases: Vec<u32>,
    pub val_cases: Vec<u32>,
    pub train_nmae: Nmae,
    pub val_nmae: Nmae,
    /// Absent when a set has fewer than two cases or no variance.
    pub train_r: Option<f64>,
    pub val_r: Option<f64>,
    pub final_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rounds: Vec<RoundMetrics>,
    /// Fit on every case.
    pub model: CostModel,
}

/// Seeded partition of `m` row indices into `rounds` folds of near-equal size.
pub fn folds(m: usize, rounds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x666f_6c64)));
    let mut out = vec![Vec::new(); rounds];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % rounds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

pub type Fitter<'a> = dyn Fn(&CountsMatrix, &[f64], &FitConfig) -> Result<CostModel, RegressError> + 'a;

/// `rounds`-fold validation: each round fits on the other folds and scores
/// both sets. `fitter` is normally [`fit`].
pub fn cross_validate(
    n: &CountsMatrix,
    e: &[f64],
    config: &FitConfig,
    rounds: usize,
    fitter: &Fitter<'_>,
) -> Result<FitReport, RegressError> {
    if rounds < 2 || n.rows < rounds {
        return Err(RegressError::TooFewCases { needed: rounds.max(2), got: n.rows });
    }
    let parts = folds(n.rows, rounds, config.seed);
    let mut out = Vec::with_capacity(rounds);
    for (k, val) in parts.iter().enumerate() {
        let train: Vec<usize> = (0..n.rows).filter(|i| val.binary_search(i).is_err()).collect();
        let (nt, nv) = (n.select_rows(&train), n.select_rows(val));
        let et: Vec<f64> = train.iter().map(|&i| e[i]).collect();
        let ev: Vec<f64> = val.iter().map(|&i| e[i]).collect();
        let model = fitter(&nt, &et, config)?;
        let (pt, pv) = (predict(&nt, &model.cost), predict(&nv, &model.cost));
        out.push(RoundMetrics {
            round: k as u32 + 1,
            train_cases: nt.case_ids.clone(),
            val_cases: nv.case_ids.clone(),
            train_nmae: nmae(&pt, &et)?,
            val_nmae: nmae(&pv, &ev)?,
            train_r: correlation(&pt, &et).ok(),
            val_r: correlation(&pv, &ev).ok(),
            final_j: model.meta.final_j,
        });
    }
    Ok(FitReport { rounds: out, model: fitter(n, e, config)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> CountsMatrix {
        let ops = (0..cols).map(|j| alloc::format!("op{j:02}")).collect();
        CountsMatrix::new((0..rows as u32).collect(), ops, data).unwrap()
    }

    fn random_instance(seed: u64, m: usize, l: usize) -> (CountsMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..m * l).map(|_| rng.random_range(0..200) as f64).collect();
        let e = (0..m).map(|_| rng.random_range(0.0..1e-2)).collect();
        (matrix(m, l, data), e)
    }

    fn lstsq(n: &CountsMatrix, e: &[f64]) -> Vec<f64> {
        let a = DMatrix::from_row_slice(n.rows, n.cols, &n.data);
        let b = DVector::from_column_slice(e);
        a.svd(true, true).solve(&b, 1e-14).unwrap().iter().copied().collect()
    }

    #[test]
    fn loss_examples() {
        let n = matrix(1, 1, vec![1.0]);
        assert_eq!(loss(&n, &[3.0], &[1.0]), 2.0);
        assert_eq!(loss(&n, &[1.0], &[1.0]), 0.0);
    }

    #[test]
    fn identity_recovers_targets() {
        let n = matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        for cfg in [FitConfig::default(), FitConfig { accelerate: false, ..FitConfig::default() }] {
            let m = fit(&n, &[1.0, 2.0, 3.0], &cfg).unwrap();
            for (c, want) in m.cost.iter().zip([1.0, 2.0, 3.0]) {
                assert!((c - want).abs() < 1e-4, "{c}");
            }
        }
    }

    #[test]
    fn matches_least_squares_on_full_rank() {
        let (n, _) = random_instance(5, 40, 8);
        let truth: Vec<f64> = (0..8).map(|j| (j as f64 + 1.0) * 1e-6).collect();
        let e = predict(&n, &truth);
        let oracle = lstsq(&n, &e);
        let m = fit(&n, &e, &FitConfig::default()).unwrap();
        assert_eq!(m.meta.rank, 8);
        for (c, o) in m.cost.iter().zip(&oracle) {
            assert!((c - o).abs() <= 1e-3 * o.abs(), "{c} vs {o}");
        }
    }

    #[test]
    fn duplicated_columns_share_their_sum() {
        let (base, _) = random_instance(9, 30, 4);
        let mut data = Vec::new();
        for i in 0..30 {
            data.extend_from_slice(base.row(i));
            data.push(base.get(i, 0));
        }
        let n = matrix(30, 5, data);
        let e = predict(&base, &[2e-6, 1e-6, 3e-6, 4e-6]);
        assert_eq!(rank(&n), 4);
        let m = fit(&n, &e, &FitConfig::default()).unwrap();
        let merged = lstsq(&base, &e);
        let sum = m.cost[0] + m.cost[4];
        assert!((sum - merged[0]).abs() < 5e-3 * merged[0]);
        assert!(loss(&n, &m.cost, &e) < 1e-20);
    }

    #[test]
    fn zero_columns_are_unidentified() {
        let n = matrix(3, 2, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let m = fit(&n, &[1.0, 2.0, 3.0], &FitConfig::default()).unwrap();
        assert_eq!(m.meta.unidentified, ["op01".to_string()]);
        assert_eq!(m.cost[1], 0.0);
    }

    #[test]
    fn literal_descent_can_diverge() {
        let n = matrix(2, 1, vec![1000.0, 2000.0]);
        let cfg = FitConfig { alpha: 1.0, ..FitConfig::literal() };
        assert!(matches!(fit(&n, &[1.0, 2.0], &cfg), Err(RegressError::Diverged { .. })));
    }

    #[test]
    fn history_is_non_increasing() {
        let (n, e) = random_instance(2, 20, 6);
        for accelerate in [false, true] {
            let cfg = FitConfig { accelerate, max_iters: 20_000, ..FitConfig::default() };
            let out = fit_restart(&n, &e, &cfg, 0).unwrap();
            assert!(out.j_history.windows(2).all(|w| w[1].1 <= w[0].1));
        }
    }

    #[test]
    fn metric_examples() {
        let v = nmae(&[110.0, 90.0], &[100.0, 100.0]).unwrap();
        assert!((v.value - 0.1).abs() < 1e-12);
        assert_eq!(nmae(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        assert_eq!(nmae(&[1.0, 2.0], &[0.0, 2.0]).unwrap().dropped, 1);
        assert_eq!(nmae(&[1.0], &[0.0]), Err(RegressError::AllZero));
        let e = [1.0, 2.0, 5.0];
        assert!((correlation(&[2.0, 4.0, 10.0], &e).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlation(&[-1.0, -2.0, -5.0], &e).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(correlation(&[1.0, 1.0, 1.0], &e), Err(RegressError::ZeroVariance));
    }

    #[test]
    fn folds_are_a_seeded_partition() {
        let f = folds(4, 4, 1);
        assert!(f.iter().all(|x| x.len() == 1));
        let f = folds(150, 4, 7);
        assert_eq!(f, folds(150, 4, 7));
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..150).collect::<Vec<_>>());
        assert!(f.iter().all(|x| x.len() == 37 || x.len() == 38));
    }

    #[test]
    fn cross_validation_zero_noise() {
        let (n, _) = random_instance(11, 40, 5);
        let e = predict(&n, &[1e-6, 2e-6, 3e-6, 4e-6, 5e-6]);
        let rep = cross_validate(&n, &e, &FitConfig::default(), 4, &fit).unwrap();
        assert_eq!(rep.rounds.len(), 4);
        for r in &rep.rounds {
            assert!(r.val_nmae.value < 0.01);
            assert_eq!(r.val_cases.len(), 10);
        }
        assert_eq!(rep, cross_validate(&n, &e, &FitConfig::default(), 4, &fit).unwrap());
        assert!(matches!(
            cross_validate(&n.select_rows(&[0, 1]), &e[..2], &FitConfig::default(), 4, &fit),
            Err(RegressError::TooFewCases { .. })
        ));
    }

    #[test]
    fn assemble_aligns_by_case_id() {
        let ops = vec!["a".to_string(), "b".into(), "c".into()];
        let (n, e) = assemble(&[(7, vec![1, 2, 3]), (3, vec![4, 5, 6])], &[(3, 0.5), (7, 0.25)], ops.clone()).unwrap();
        assert_eq!((n.rows, n.cols), (2, 3));
        assert_eq!(n.case_ids, [3, 7]);
        assert_eq!(e, [0.5, 0.25]);
        assert_eq!(assemble(&[], &[], ops.clone()), Err(RegressError::Empty));
        assert_eq!(assemble(&[(1, vec![1, 2, 3])], &[(2, 1.0)], ops.clone()), Err(RegressError::MissingCase(2)));
        assert!(matches!(assemble(&[(1, vec![1])], &[(1, 1.0)], ops), Err(RegressError::Dimension(_))));
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(seed in 0u64..10_000, m in 1usize..20, l in 1usize..20) {
            let (n, e) = random_instance(seed, m, l);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let cost: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1e-4)).collect();
            let g = gradient(&n, &cost, &e);
            for j in 0..l {
                // J is quadratic, so a large step has no truncation error.
                let h = 1e-2 * cost[j].abs().max(1e-6);
                let (mut up, mut dn) = (cost.clone(), cost.clone());
                up[j] += h;
                dn[j] -= h;
                let fd = (loss(&n, &up, &e) - loss(&n, &dn, &e)) / (2.0 * h);
                let scale = g[j].abs().max(1e-12);
                prop_assert!((fd - g[j]).abs() <= 1e-6 * scale.max(fd.abs()) + 1e-15, "j={} fd={} g={}", j, fd, g[j]);
            }
        }

        #[test]
        fn loss_matches_naive_recomputation(seed in 0u64..10_000) {
            let (n, e) = random_instance(seed, 7, 5);
            let cost = [1e-5, 2e-5, 3e-5, 4e-5, 5e-5];
            let mut naive = 0.0;
            for i in 0..7 {
                let mut p = 0.0;
                for j in 0..5 {
                    p += n.data[i * 5 + j] * cost[j];
                }
                naive += (p - e[i]).powi(2);
            }
            naive /= 14.0;
            prop_assert!((loss(&n, &cost, &e) - naive).abs() <= 1e-12 * naive.abs().max(1e-30));
        }

        #[test]
        fn predictions_are_scale_equivariant(seed in 0u64..10_000, c in 0.01f64..100.0) {
            let (n, _) = random_instance(seed, 6, 4);
            let cost = [1e-6, 2e-6, 3e-6, 4e-6];
            let mut scaled = n.clone();
            for i in 0..6 {
                scaled.data[i * 4 + 2] *= c;
            }
            let mut cost2 = cost;
            cost2[2] /= c;
            for (a, b) in predict(&n, &cost).iter().zip(predict(&scaled, &cost2)) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }

        #[test]
        fn rank_matches_svd(seed in 0u64..10_000, m in 1usize..12, l in 1usize..12, dup in proptest::bool::ANY) {
            let (mut n, _) = random_instance(seed, m, l);
            if dup && l > 1 {
                for i in 0..m {
                    n.data[i * l + l - 1] = 2.0 * n.data[i * l];
                }
            }
            let a = DMatrix::from_row_slice(m, l, &n.data);
            prop_assert_eq!(rank(&n), a.rank(1e-9 * a.norm()));
        }
    }
}
