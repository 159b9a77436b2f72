//! Possible-permutation matrices for right-censored labels.
//!
//! Rank 0 is the earliest event, i.e. the highest risk. Row `i` of a
//! [`PossiblePermutationMatrix`] marks every rank sample `i` could hold in
//! some total order of true event times that agrees with the observations:
//! an event at `t` is fixed at `t`, a sample censored at `c` has a true time
//! strictly after `c`.
//!
//! Ties: an event and a censoring at the same observed time put the event
//! first; two events at the same time may appear in either order.
//!
//! Risk models score larger = riskier, while sorting networks sort ascending,
//! so scores are negated before they enter the network (see
//! [`network_input`]). That sign flip lives here and nowhere else.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    /// Observed time: the event time if `event`, otherwise the censoring time.
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Result<Self> {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid observed time {time}")));
        }
        if let Some(bad) = covariates.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite covariate {bad}")));
        }
        Ok(Self {
            time,
            event,
            covariates,
        })
    }

    /// Label-only record, for code that never looks at covariates.
    pub fn label(time: f64, event: bool) -> Self {
        Self {
            time,
            event,
            covariates: Vec::new(),
        }
    }
}

/// Flips risk scores into sort keys so the riskiest sample sorts to rank 0.
pub fn network_input<'t>(scores: Var<'t>) -> Var<'t> {
    scores.neg()
}

/// Whether `a` is known to precede `b`: `a` is an event and either happened
/// strictly earlier, or at the same time as a censoring of `b`.
fn precedes(a: &SurvivalRecord, b: &SurvivalRecord) -> bool {
    a.event && (a.time < b.time || (a.time == b.time && !b.event))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PossiblePermutationMatrix {
    n: usize,
    q: Vec<u8>,
    bounds: Vec<(usize, usize)>,
}

impl PossiblePermutationMatrix {
    fn from_bounds(bounds: Vec<(usize, usize)>) -> Self {
        let n = bounds.len();
        let mut q = vec![0u8; n * n];
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            q[i * n + lo..=i * n + hi].fill(1);
        }
        Self { n, q, bounds }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, sample: usize, rank: usize) -> u8 {
        self.q[sample * self.n + rank]
    }

    pub fn row(&self, sample: usize) -> &[u8] {
        &self.q[sample * self.n..(sample + 1) * self.n]
    }

    /// Inclusive `(lo, hi)` interval of possible ranks per sample.
    pub fn rank_bounds(&self) -> &[(usize, usize)] {
        &self.bounds
    }

    pub fn is_permutation(&self) -> bool {
        self.bounds.iter().all(|&(lo, hi)| lo == hi)
            && (0..self.n).all(|r| (0..self.n).filter(|&i| self.get(i, r) == 1).count() == 1)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.n, self.n], self.q.iter().map(|&b| b as f64).collect())
            .expect("n x n")
    }

    /// Rows as `0`/`1` strings.
    pub fn row_strings(&self) -> Vec<String> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|&b| if b == 1 { '1' } else { '0' }).collect())
            .collect()
    }
}

fn validate_labels(records: &[SurvivalRecord]) -> Result<()> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| !(r.time >= 0.0 && r.time.is_finite())) {
        return Err(Error::InvalidArgument(format!("invalid observed time {}", r.time)));
    }
    Ok(())
}

/// Builds `Q_p` with rows in the order of `records`; the input does not need
/// to be sorted.
///
/// For an event at `t`: the lowest rank is the number of events strictly
/// before `t`, the highest is the number of samples strictly before `t` plus
/// the other events tied at `t`. For a censoring at `c`: the lowest rank
/// counts events at or before `c`, the highest is `n - 1`.
pub fn build_qp(records: &[SurvivalRecord]) -> Result<PossiblePermutationMatrix> {
    validate_labels(records)?;
    let n = records.len();
    let mut times: Vec<f64> = records.iter().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    let mut event_times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
    event_times.sort_by(f64::total_cmp);

    let count_lt = |v: &[f64], t: f64| v.partition_point(|&x| x < t);
    let count_le = |v: &[f64], t: f64| v.partition_point(|&x| x <= t);

    let bounds = records
        .iter()
        .map(|r| {
            if r.event {
                let lo = count_lt(&event_times, r.time);
                let tied_events = count_le(&event_times, r.time) - lo;
                (lo, count_lt(&times, r.time) + tied_events - 1)
            } else {
                (count_le(&event_times, r.time), n - 1)
            }
        })
        .collect();
    Ok(PossiblePermutationMatrix::from_bounds(bounds))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopKLabel {
    /// Certainly among the first `k` ranks.
    In,
    /// Certainly outside the first `k` ranks.
    Out,
    /// Membership depends on unobserved event times.
    Ambiguous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopKPossible {
    pub k: usize,
    /// `Q_p` with every column at rank `>= k` zeroed.
    pub qp: PossiblePermutationMatrix,
    pub labels: Vec<TopKLabel>,
}

impl TopKPossible {
    pub fn informative(&self) -> usize {
        self.labels.iter().filter(|l| **l != TopKLabel::Ambiguous).count()
    }
}

/// `Q_p` restricted to the top `k` ranks, with a per-sample membership label.
pub fn build_topk_qp(records: &[SurvivalRecord], k: usize) -> Result<TopKPossible> {
    let full = build_qp(records)?;
    let n = full.n;
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "top-k needs 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let labels = full
        .bounds
        .iter()
        .map(|&(lo, hi)| {
            if hi < k {
                TopKLabel::In
            } else if lo >= k {
                TopKLabel::Out
            } else {
                TopKLabel::Ambiguous
            }
        })
        .collect();
    let mut qp = full;
    for i in 0..n {
        qp.q[i * n + k..(i + 1) * n].fill(0);
    }
    Ok(TopKPossible { k, qp, labels })
}

/// Directed "known to precede" relation over samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparabilityMatrix {
    n: usize,
    a: Vec<bool>,
}

impl ComparabilityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.a[i * self.n + j]
    }

    /// All ordered pairs `(i, j)` where `i` precedes `j`, row-major.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.a.iter().filter(|&&x| x).count()
    }
}

pub fn comparability(records: &[SurvivalRecord]) -> ComparabilityMatrix {
    let n = records.len();
    let mut a = vec![false; n * n];
    for (i, ri) in records.iter().enumerate() {
        for (j, rj) in records.iter().enumerate() {
            a[i * n + j] = precedes(ri, rj);
        }
    }
    ComparabilityMatrix { n, a }
}
