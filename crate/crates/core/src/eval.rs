//! Metrics and the exhaustive permutation oracle.

use crate::datamodel::InteractionRecord;
use crate::error::{PrsError, Result};
use crate::pmatch::{fpsa, score_candidates, FpsaConfig, PointwiseModel};
use crate::prank::{lr_metric, DpwnModel};

/// Enumeration budget for [`exhaustive_oracle`].
pub const ORACLE_GUARD: u128 = 10_000_000;

/// Area under the ROC curve via the rank-sum statistic; ties get midranks.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(PrsError::Metric(
            "labels and scores differ in length".into(),
        ));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PrsError::Metric("auc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their average.
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(PrsError::Metric(
            "pearson needs two equal-length vectors of length ≥ 2".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PrsError::Metric("pearson of a constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between a per-record list metric and the record's click count.
pub fn list_metric_pearson(
    records: &[InteractionRecord],
    mut metric: impl FnMut(&InteractionRecord) -> f64,
) -> Result<f64> {
    if records.len() < 2 {
        return Err(PrsError::Metric("need at least two records".into()));
    }
    let values: Vec<f64> = records.iter().map(&mut metric).collect();
    let truth: Vec<f64> = records
        .iter()
        .map(|r| r.y_ctr.iter().filter(|&&c| c).count() as f64)
        .collect();
    pearson(&values, &truth)
}

/// `(candidate − reference) / reference`.
pub fn relative_improvement(candidate: f64, reference: f64) -> Result<f64> {
    if reference <= 0.0 || !reference.is_finite() {
        return Err(PrsError::Metric(format!(
            "reference value {reference} must be positive"
        )));
    }
    Ok((candidate - reference) / reference)
}

/// Result of enumerating every ordered selection.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best: Vec<usize>,
    pub best_value: f64,
    pub evaluations: usize,
    /// Every `(sequence, value)` in lexicographic order, when requested.
    pub table: Option<Vec<(Vec<usize>, f64)>>,
}

/// Number of ordered `n`-selections from `m` items.
pub fn permutation_count(m: usize, n: usize) -> u128 {
    if n > m {
        return 0;
    }
    (m - n + 1..=m).map(|v| v as u128).product()
}

/// Evaluates `reward` on every ordered `n`-selection of `0..m` in
/// lexicographic order and returns the maximum; ties keep the earliest.
pub fn exhaustive_oracle(
    m: usize,
    n: usize,
    keep_table: bool,
    mut reward: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<OracleResult> {
    if n == 0 || n > m {
        return Err(PrsError::Config(format!("cannot select {n} of {m} items")));
    }
    let count = permutation_count(m, n);
    if count > ORACLE_GUARD {
        return Err(PrsError::Resource(format!(
            "{count} permutations exceed the oracle budget of {ORACLE_GUARD}"
        )));
    }
    let mut best = OracleResult {
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
        evaluations: 0,
        table: keep_table.then(Vec::new),
    };
    let mut seq = Vec::with_capacity(n);
    let mut used = vec![false; m];
    fn recurse(
        m: usize,
        n: usize,
        seq: &mut Vec<usize>,
        used: &mut [bool],
        reward: &mut dyn FnMut(&[usize]) -> Result<f64>,
        out: &mut OracleResult,
    ) -> Result<()> {
        if seq.len() == n {
            let v = reward(seq)?;
            out.evaluations += 1;
            if v > out.best_value || out.best.is_empty() {
                out.best_value = v;
                out.best = seq.clone();
            }
            if let Some(t) = out.table.as_mut() {
                t.push((seq.clone(), v));
            }
            return Ok(());
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                seq.push(i);
                recurse(m, n, seq, used, reward, out)?;
                seq.pop();
                used[i] = false;
            }
        }
        Ok(())
    }
    recurse(m, n, &mut seq, &mut used, &mut reward, &mut best)?;
    Ok(best)
}

/// Mean LR of the top FPSA list per request, for each `alpha` in the grid.
pub fn alpha_sweep(
    records: &[InteractionRecord],
    ctr: &PointwiseModel,
    next: &PointwiseModel,
    dpwn: &DpwnModel,
    alphas: &[f64],
    beta: f64,
    n: usize,
    beam_k: usize,
) -> Result<Vec<(f64, f64)>> {
    if alphas.is_empty() {
        return Err(PrsError::Config("empty alpha grid".into()));
    }
    if records.is_empty() {
        return Err(PrsError::Config("no requests to sweep over".into()));
    }
    let scored: Vec<_> = records
        .iter()
        .map(|r| score_candidates(ctr, next, &r.user, &r.candidates))
        .collect();
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = FpsaConfig {
                n,
                beam_k,
                alpha,
                beta,
            };
            let mut total = 0.0;
            for (r, s) in records.iter().zip(&scored) {
                let set = fpsa(s, &cfg)?;
                let list: Vec<_> = set.lists[0]
                    .entry
                    .items
                    .iter()
                    .map(|&i| r.candidates[i])
                    .collect();
                total += lr_metric(dpwn, &r.user, &list)?;
            }
            Ok((alpha, total / records.len() as f64))
        })
        .collect()
}
