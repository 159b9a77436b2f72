//! Evaluation metrics on raw risk scores. Higher score means higher risk,
//! i.e. an earlier expected event.

use serde::{Deserialize, Serialize};

use crate::censoring::SurvivalRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub c_index: f64,
    pub n_comparable: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub topk_correct: Option<f64>,
}

struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn insert(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted entries with index `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut total = 0;
        while i > 0 {
            total += self.0[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

fn check_inputs(scores: &[f64], records: &[SurvivalRecord]) -> Result<()> {
    if scores.len() != records.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} records",
            scores.len(),
            records.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    Ok(())
}

/// Harrell's C-index over pairs where `i` has an event before `j`'s observed
/// time (or `j` is censored at the same time). Score ties count one half.
///
/// Runs in `O(n log n)`: samples are swept in descending time while a
/// Fenwick tree over score ranks holds everyone observed later.
pub fn c_index(scores: &[f64], records: &[SurvivalRecord]) -> Result<EvalResult> {
    check_inputs(scores, records)?;
    let n = scores.len();

    let mut sorted_scores = scores.to_vec();
    sorted_scores.sort_by(f64::total_cmp);
    sorted_scores.dedup();
    let rank = |s: f64| sorted_scores.partition_point(|&x| x < s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));

    let mut tree = Fenwick::new(sorted_scores.len());
    let mut inserted = 0u64;
    let (mut comparable, mut doubled_concordant) = (0u64, 0u64);
    let mut start = 0;
    while start < n {
        let t = records[order[start]].time;
        let end = start + order[start..].iter().take_while(|&&i| records[i].time == t).count();
        let group = &order[start..end];
        for &i in group.iter().filter(|&&i| !records[i].event) {
            tree.insert(rank(scores[i]));
            inserted += 1;
        }
        for &i in group.iter().filter(|&&i| records[i].event) {
            let r = rank(scores[i]);
            let below = tree.prefix(r);
            let tied = tree.prefix(r + 1) - below;
            comparable += inserted;
            doubled_concordant += 2 * below + tied;
        }
        for &i in group.iter().filter(|&&i| records[i].event) {
            tree.insert(rank(scores[i]));
            inserted += 1;
        }
        start = end;
    }
    if comparable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(EvalResult {
        c_index: doubled_concordant as f64 / (2 * comparable) as f64,
        n_comparable: comparable,
        topk_correct: None,
    })
}

/// Indices of the `k` largest values, ties broken by lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// `|predicted ∩ truth| / k` where the prediction is the `k` highest scores.
pub fn topk_accuracy(scores: &[f64], truth: &[usize], k: usize) -> Result<f64> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for {} samples",
            scores.len()
        )));
    }
    if truth.len() != k {
        return Err(Error::InvalidArgument(format!(
            "truth set has {} members, expected k = {k}",
            truth.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let mut is_true = vec![false; scores.len()];
    for &i in truth {
        *is_true.get_mut(i).ok_or_else(|| {
            Error::InvalidArgument(format!("truth index {i} out of range"))
        })? = true;
    }
    let hits = top_k_indices(scores, k).into_iter().filter(|&i| is_true[i]).count();
    Ok(hits as f64 / k as f64)
}

/// True top-k on synthetic data: the `k` samples with the highest true risk.
pub fn truth_topk_from_risk(true_risk: &[f64], k: usize) -> Vec<usize> {
    top_k_indices(true_risk, k)
}

/// True top-k on observed data: the `k` earliest event times among uncensored
/// samples. Censored samples never enter the truth set.
pub fn truth_topk_from_events(records: &[SurvivalRecord], k: usize) -> Result<Vec<usize>> {
    let mut events: Vec<usize> = (0..records.len()).filter(|&i| records[i].event).collect();
    if k == 0 || events.len() < k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} but only {} observed events",
            events.len()
        )));
    }
    events.sort_by(|&a, &b| records[a].time.total_cmp(&records[b].time).then(a.cmp(&b)));
    events.truncate(k);
    Ok(events)
}
