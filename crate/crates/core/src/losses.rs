//! Training objectives: the possible-permutation cross-entropy, its top-k
//! variant, and the partial-likelihood and ranking baselines.
//!
//! Inputs are batched: a relaxed permutation of shape `[batch, n, n]` (or a
//! single `[n, n]`) and one label structure per risk set.

use crate::autodiff::{Tensor, Var};
use crate::censoring::{
    build_qp, comparability, network_input, ComparabilityMatrix, PossiblePermutationMatrix,
    SurvivalRecord, TopKLabel, TopKPossible,
};
use crate::error::{Error, Result};
use crate::relaxperm::{relaxed_sort, RelaxationConfig, RelaxedPermutation};
use crate::sortnet::odd_even_schedule;

/// Lower clamp applied before every log.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct LossValue<'t> {
    pub scalar: Var<'t>,
    /// Per-sample (or per-pair) terms before reduction; masked entries are 0.
    pub per_sample: Var<'t>,
    pub n_effective: usize,
}

fn batch_dims(matrix: &Var<'_>) -> Result<(usize, usize)> {
    let shape = matrix.shape();
    match shape.as_slice() {
        [n, m] if n == m => Ok((1, *n)),
        [b, n, m] if n == m => Ok((*b, *n)),
        _ => Err(Error::Shape(format!(
            "expected [n, n] or [batch, n, n] permutation, got {shape:?}"
        ))),
    }
}

fn stack_masks(masks: &[Tensor], shape: &[usize]) -> Result<Tensor> {
    let data = masks.iter().flat_map(|m| m.data().iter().copied()).collect();
    Tensor::new(shape.to_vec(), data)
}

/// `-mean_i log p_i` with `p_i = Σ_j (Q_p ∘ P)_{ij}`: the log-probability
/// that each sample lands somewhere inside its own set of possible ranks.
pub fn diffsurv_loss<'t>(
    perm: &RelaxedPermutation<'t>,
    qp: &[PossiblePermutationMatrix],
) -> Result<LossValue<'t>> {
    let matrix = perm.matrix;
    let (batch, n) = batch_dims(&matrix)?;
    if qp.len() != batch || qp.iter().any(|q| q.n() != n) {
        return Err(Error::Shape(format!(
            "{} possible-permutation matrices for a {batch} x {n} x {n} batch",
            qp.len()
        )));
    }
    let tape = matrix.tape();
    let mask = stack_masks(&qp.iter().map(|q| q.to_tensor()).collect::<Vec<_>>(), &matrix.shape())?;
    let p = matrix.mul(tape.constant(mask))?.sum(matrix.shape().len() - 1)?;
    let per_sample = p.clamp(LOG_FLOOR, 1.0)?.log()?.neg();
    Ok(LossValue {
        scalar: per_sample.mean_all(),
        per_sample,
        n_effective: batch * n,
    })
}

/// Binary cross-entropy on top-k membership. `p_i` is the relaxed mass sample
/// `i` places on its possible ranks below `k`; samples labelled `In` push it
/// up, `Out` push it down, and `Ambiguous` samples are masked out.
pub fn topk_loss<'t>(perm: &RelaxedPermutation<'t>, topk: &[TopKPossible]) -> Result<LossValue<'t>> {
    let matrix = perm.matrix;
    let (batch, n) = batch_dims(&matrix)?;
    if topk.len() != batch || topk.iter().any(|t| t.qp.n() != n) {
        return Err(Error::Shape(format!(
            "{} top-k label sets for a {batch} x {n} x {n} batch",
            topk.len()
        )));
    }
    let informative: usize = topk.iter().map(TopKPossible::informative).sum();
    if informative == 0 {
        return Err(Error::UninformativeRiskSet { k: topk[0].k });
    }
    let tape = matrix.tape();
    let mask = stack_masks(&topk.iter().map(|t| t.qp.to_tensor()).collect::<Vec<_>>(), &matrix.shape())?;
    let mut in_mask = Vec::with_capacity(batch * n);
    let mut out_mask = Vec::with_capacity(batch * n);
    for t in topk {
        for l in &t.labels {
            in_mask.push(if *l == TopKLabel::In { 1.0 } else { 0.0 });
            out_mask.push(if *l == TopKLabel::Out { 1.0 } else { 0.0 });
        }
    }
    let vec_shape = &matrix.shape()[..matrix.shape().len() - 1];
    let in_mask = tape.constant(Tensor::new(vec_shape.to_vec(), in_mask)?);
    let out_mask = tape.constant(Tensor::new(vec_shape.to_vec(), out_mask)?);

    let p = matrix
        .mul(tape.constant(mask))?
        .sum(matrix.shape().len() - 1)?
        .clamp(LOG_FLOOR, 1.0 - LOG_FLOOR)?;
    let log_in = p.log()?.mul(in_mask)?;
    let log_out = p.neg().offset(1.0).log()?.mul(out_mask)?;
    let per_sample = log_in.add(log_out)?.neg();
    Ok(LossValue {
        scalar: per_sample.sum_all().scale(1.0 / informative as f64),
        per_sample,
        n_effective: informative,
    })
}

/// Differences `h[i] - h[j]` over flat indices of `h`, as a `[pairs]` vector.
fn pair_differences<'t>(h: Var<'t>, pairs: &[(usize, usize)]) -> Result<Var<'t>> {
    let len: usize = h.shape().iter().product();
    let m = pairs.len();
    let mut select = vec![0.0; len * m];
    for (c, &(i, j)) in pairs.iter().enumerate() {
        select[i * m + c] += 1.0;
        select[j * m + c] -= 1.0;
    }
    let select = h.tape().constant(Tensor::new(vec![len, m], select)?);
    h.reshape(&[1, len])?.matmul(select)?.reshape(&[m])
}

fn set_layout(h: &Var<'_>) -> Result<(usize, usize)> {
    match h.shape().as_slice() {
        [n] => Ok((1, *n)),
        [b, n] => Ok((*b, *n)),
        s => Err(Error::Shape(format!("expected [n] or [batch, n] scores, got {s:?}"))),
    }
}

fn check_cases(labels: &[SurvivalRecord], cases: &[usize], batch: usize, n: usize) -> Result<()> {
    if labels.len() != batch * n || cases.len() != batch {
        return Err(Error::Shape(format!(
            "{} labels and {} cases for {batch} risk sets of size {n}",
            labels.len(),
            cases.len()
        )));
    }
    for (b, &c) in cases.iter().enumerate() {
        if c >= n {
            return Err(Error::InvalidArgument(format!("case index {c} out of range")));
        }
        if !labels[b * n + c].event {
            return Err(Error::InvalidArgument(format!(
                "risk set {b}: designated case is censored"
            )));
        }
    }
    Ok(())
}

/// Negative log partial likelihood of each sampled risk set,
/// `logsumexp(h_set) - h_case`, averaged over sets.
///
/// `h` holds log-hazards of shape `[batch, n]`; `labels` are the `batch * n`
/// slot labels in the same order and `cases[b]` is the case slot of set `b`.
pub fn cox_pl_sampled<'t>(
    h: Var<'t>,
    labels: &[SurvivalRecord],
    cases: &[usize],
) -> Result<LossValue<'t>> {
    let (batch, n) = set_layout(&h)?;
    check_cases(labels, cases, batch, n)?;
    let mut onehot = vec![0.0; batch * n];
    for (b, &c) in cases.iter().enumerate() {
        onehot[b * n + c] = 1.0;
    }
    let h2 = h.reshape(&[batch, n])?;
    let onehot = h.tape().constant(Tensor::new(vec![batch, n], onehot)?);
    let h_case = h2.mul(onehot)?.sum(1)?;
    let per_sample = h2.log_sum_exp()?.sub(h_case)?;
    Ok(LossValue {
        scalar: per_sample.mean_all(),
        per_sample,
        n_effective: batch,
    })
}

/// `softplus(h_control - h_case)` averaged over the given pairs.
pub fn cox_pl_pairwise<'t>(h_case: Var<'t>, h_control: Var<'t>) -> Result<LossValue<'t>> {
    if h_case.shape() != h_control.shape() {
        return Err(Error::Shape(format!(
            "case/control shapes differ: {:?} vs {:?}",
            h_case.shape(),
            h_control.shape()
        )));
    }
    let per_sample = h_control.sub(h_case)?.softplus();
    Ok(LossValue {
        scalar: per_sample.mean_all(),
        n_effective: per_sample.value().len(),
        per_sample,
    })
}

/// Pairwise partial likelihood over every (case, control) pair of each
/// sampled risk set.
pub fn cox_pl_pairwise_sets<'t>(
    h: Var<'t>,
    labels: &[SurvivalRecord],
    cases: &[usize],
) -> Result<LossValue<'t>> {
    let (batch, n) = set_layout(&h)?;
    check_cases(labels, cases, batch, n)?;
    let pairs: Vec<(usize, usize)> = cases
        .iter()
        .enumerate()
        .flat_map(|(b, &c)| (0..n).filter(move |&j| j != c).map(move |j| (b * n + j, b * n + c)))
        .collect();
    let per_sample = pair_differences(h, &pairs)?.softplus();
    Ok(LossValue {
        scalar: per_sample.mean_all(),
        per_sample,
        n_effective: pairs.len(),
    })
}

/// Log-sigmoid ranking loss `-mean log σ_β(h_i - h_j)` over acceptable pairs
/// where `i` is known to precede `j`.
pub fn ranking_loss<'t>(
    h: Var<'t>,
    comparability: &[ComparabilityMatrix],
    beta: f64,
) -> Result<LossValue<'t>> {
    let (batch, n) = set_layout(&h)?;
    if comparability.len() != batch || comparability.iter().any(|c| c.n() != n) {
        return Err(Error::Shape(format!(
            "{} comparability matrices for {batch} risk sets of size {n}",
            comparability.len()
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("ranking loss beta {beta}")));
    }
    let pairs: Vec<(usize, usize)> = comparability
        .iter()
        .enumerate()
        .flat_map(|(b, c)| c.pairs().into_iter().map(move |(i, j)| (b * n + i, b * n + j)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoComparablePairs);
    }
    // -log σ(βx) = softplus(-βx)
    let per_sample = pair_differences(h, &pairs)?.scale(-beta).softplus();
    Ok(LossValue {
        scalar: per_sample.mean_all(),
        per_sample,
        n_effective: pairs.len(),
    })
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub pairs: usize,
    pub max_diffsurv_vs_ranking: f64,
    /// Only defined for `beta == 1`, where the ranking loss is the pairwise
    /// partial likelihood.
    pub max_ranking_vs_cox: Option<f64>,
}

impl EquivalenceReport {
    pub fn max_abs_diff(&self) -> f64 {
        self.max_diffsurv_vs_ranking
            .max(self.max_ranking_vs_cox.unwrap_or(0.0))
    }
}

/// Evaluates the three losses on uncensored two-sample risk sets. Each entry
/// of `scores` is `(z_case, z_control)` where the case has the earlier event.
pub fn equivalence_report(scores: &[(f64, f64)], beta: f64) -> Result<EquivalenceReport> {
    use crate::autodiff::Tape;
    let relax = RelaxationConfig::logistic(beta)?;
    let schedule = odd_even_schedule(2)?;
    let labels = vec![SurvivalRecord::label(1.0, true), SurvivalRecord::label(2.0, true)];
    let qp = build_qp(&labels)?;
    let comp = comparability(&labels);

    let mut report = EquivalenceReport {
        pairs: scores.len(),
        max_diffsurv_vs_ranking: 0.0,
        max_ranking_vs_cox: (beta == 1.0).then_some(0.0),
    };
    for &(case, control) in scores {
        let tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![case, control]));
        let perm = relaxed_sort(&schedule, network_input(z), relax)?;
        let diffsurv = diffsurv_loss(&perm, std::slice::from_ref(&qp))?.scalar.item();
        let ranking = ranking_loss(z, std::slice::from_ref(&comp), beta)?.scalar.item();
        report.max_diffsurv_vs_ranking = report.max_diffsurv_vs_ranking.max((diffsurv - ranking).abs());
        if let Some(worst) = report.max_ranking_vs_cox.as_mut() {
            let hc = tape.leaf(Tensor::vector(vec![case]));
            let hk = tape.leaf(Tensor::vector(vec![control]));
            let cox = cox_pl_pairwise(hc, hk)?.scalar.item();
            *worst = worst.max((ranking - cox).abs());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::censoring::build_topk_qp;
    use crate::relaxperm::RelaxationKind;
    use crate::sortnet::{ComparatorSchedule, NetworkKind};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(rows: &[(f64, bool)]) -> Vec<SurvivalRecord> {
        rows.iter().map(|&(t, e)| SurvivalRecord::label(t, e)).collect()
    }

    fn sort<'t>(tape: &'t Tape, z: &[f64], relax: RelaxationConfig) -> RelaxedPermutation<'t> {
        let s = odd_even_schedule(z.len()).unwrap();
        let zv = tape.leaf(Tensor::vector(z.to_vec()));
        relaxed_sort(&s, network_input(zv), relax).unwrap()
    }

    fn logistic(beta: f64) -> RelaxationConfig {
        RelaxationConfig::logistic(beta).unwrap()
    }

    fn closed_form_softplus(x: f64) -> f64 {
        (1.0 + x.exp()).ln()
    }

    #[test]
    fn all_censored_loss_is_zero() {
        let tape = Tape::new();
        let perm = sort(&tape, &[0.3, -1.0, 2.0, 0.1], logistic(4.0));
        let qp = build_qp(&labels(&[(1.0, false), (2.0, false), (3.0, false), (4.0, false)])).unwrap();
        let loss = diffsurv_loss(&perm, &[qp]).unwrap();
        assert_abs_diff_eq!(loss.scalar.item(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tied_scores_give_log_two() {
        let tape = Tape::new();
        let perm = sort(&tape, &[0.7, 0.7], logistic(1.0));
        let qp = build_qp(&labels(&[(1.0, true), (2.0, true)])).unwrap();
        let loss = diffsurv_loss(&perm, &[qp]).unwrap();
        assert_abs_diff_eq!(loss.scalar.item(), std::f64::consts::LN_2, epsilon = 1e-12);
        let p = loss.per_sample.value();
        assert_abs_diff_eq!(p.data()[0], std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn two_sample_diffsurv_equals_pairwise_partial_likelihood() {
        // sample 1 has the earlier event; its score is 3
        let tape = Tape::new();
        let perm = sort(&tape, &[1.0, 3.0], logistic(1.0));
        let qp = build_qp(&labels(&[(2.0, true), (1.0, true)])).unwrap();
        let d = diffsurv_loss(&perm, &[qp]).unwrap().scalar.item();
        let hc = tape.leaf(Tensor::vector(vec![3.0]));
        let hk = tape.leaf(Tensor::vector(vec![1.0]));
        let cox = cox_pl_pairwise(hc, hk).unwrap().scalar.item();
        assert_abs_diff_eq!(d, cox, epsilon = 1e-12);
        assert_abs_diff_eq!(cox, closed_form_softplus(-2.0), epsilon = 1e-12);
    }

    #[test]
    fn topk_direct_matrix_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let records = labels(&[(3.0, true), (1.0, true), (4.0, true), (2.0, true)]);
        let top = build_topk_qp(&records, 2).unwrap();
        let tape = Tape::new();
        let perm = sort(&tape, &z, logistic(3.0));
        let loss = topk_loss(&perm, std::slice::from_ref(&top)).unwrap().scalar.item();

        let p = perm.matrix.value();
        // samples 1 and 3 are the two earliest events
        let mass = |i: usize| p.get(&[i, 0]) * top.qp.get(i, 0) as f64 + p.get(&[i, 1]) * top.qp.get(i, 1) as f64;
        let expected = -(mass(1).ln() + mass(3).ln() + (1.0 - mass(0)).ln() + (1.0 - mass(2)).ln()) / 4.0;
        assert_abs_diff_eq!(loss, expected, epsilon = 1e-12);
    }

    #[test]
    fn topk_saturates_for_a_correct_steep_model() {
        let tape = Tape::new();
        let perm = sort(&tape, &[1.0, 5.0, 3.0, 0.0], logistic(1e4));
        let top = build_topk_qp(&labels(&[(3.0, true), (1.0, true), (2.0, true), (4.0, true)]), 1).unwrap();
        let loss = topk_loss(&perm, &[top]).unwrap().scalar.item();
        assert!(loss < 1e-9, "{loss}");
    }

    #[test]
    fn topk_rejects_uninformative_sets() {
        let tape = Tape::new();
        let perm = sort(&tape, &[1.0, 2.0, 3.0], logistic(1.0));
        let top = build_topk_qp(&labels(&[(1.0, false), (2.0, false), (3.0, false)]), 1).unwrap();
        assert!(matches!(topk_loss(&perm, &[top]), Err(Error::UninformativeRiskSet { k: 1 })));
    }

    #[test]
    fn cox_sampled_cases() {
        let tape = Tape::new();
        let recs = labels(&[(1.0, true), (2.0, false), (3.0, true), (4.0, true)]);
        let h = tape.leaf(Tensor::vector(vec![0.4; 4]));
        let loss = cox_pl_sampled(h, &recs, &[0]).unwrap();
        assert_abs_diff_eq!(loss.scalar.item(), 4f64.ln(), epsilon = 1e-12);

        let h = tape.leaf(Tensor::vector(vec![60.0, 0.0, -1.0, 1.0]));
        assert!(cox_pl_sampled(h, &recs, &[0]).unwrap().scalar.item() < 1e-20);
        assert!(cox_pl_sampled(h, &recs, &[1]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pair = labels(&[(1.0, true), (2.0, false)]);
        for _ in 0..50 {
            let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let sampled = cox_pl_sampled(tape.leaf(Tensor::vector(vec![a, b])), &pair, &[0])
                .unwrap()
                .scalar
                .item();
            let pairwise = cox_pl_pairwise(tape.leaf(Tensor::vector(vec![a])), tape.leaf(Tensor::vector(vec![b])))
                .unwrap()
                .scalar
                .item();
            assert_abs_diff_eq!(sampled, pairwise, epsilon = 1e-12);
        }
    }

    #[test]
    fn pairwise_values() {
        let tape = Tape::new();
        let eq = cox_pl_pairwise(tape.leaf(Tensor::scalar(0.3)), tape.leaf(Tensor::scalar(0.3))).unwrap();
        assert_abs_diff_eq!(eq.scalar.item(), std::f64::consts::LN_2, epsilon = 1e-15);
        let far = cox_pl_pairwise(tape.leaf(Tensor::scalar(10.0)), tape.leaf(Tensor::scalar(0.0))).unwrap();
        assert_abs_diff_eq!(far.scalar.item(), 4.5398899216870535e-5, epsilon = 1e-15);
    }

    #[test]
    fn ranking_matches_pairwise_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let comp = comparability(&labels(&[(1.0, true), (2.0, true)]));
        let tape = Tape::new();
        for _ in 0..100 {
            let (a, b) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let r = ranking_loss(tape.leaf(Tensor::vector(vec![a, b])), std::slice::from_ref(&comp), 1.0)
                .unwrap()
                .scalar
                .item();
            let c = cox_pl_pairwise(tape.leaf(Tensor::scalar(a)), tape.leaf(Tensor::scalar(b)))
                .unwrap()
                .scalar
                .item();
            assert_abs_diff_eq!(r, c, epsilon = 1e-12);
        }
        let three = comparability(&labels(&[(1.0, true), (2.0, true), (3.0, true)]));
        let sep = ranking_loss(tape.leaf(Tensor::vector(vec![50.0, 0.0, -50.0])), std::slice::from_ref(&three), 1.0).unwrap();
        assert!(sep.scalar.item() < 1e-20);
        assert_eq!(sep.n_effective, 3);
        let flat = ranking_loss(tape.leaf(Tensor::vector(vec![1.0; 3])), std::slice::from_ref(&three), 1.0).unwrap();
        assert_abs_diff_eq!(flat.scalar.item(), std::f64::consts::LN_2, epsilon = 1e-15);

        let none = comparability(&labels(&[(1.0, false), (2.0, false)]));
        assert!(matches!(
            ranking_loss(tape.leaf(Tensor::vector(vec![0.0, 0.0])), &[none], 1.0),
            Err(Error::NoComparablePairs)
        ));
    }

    #[test]
    fn three_way_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let pairs: Vec<(f64, f64)> = (0..1000)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        let report = equivalence_report(&pairs, 1.0).unwrap();
        assert!(report.max_abs_diff() < 1e-9, "{report:?}");

        let zero = equivalence_report(&[(0.0, 0.0)], 1.0).unwrap();
        assert!(zero.max_abs_diff() < 1e-15);

        let steep = equivalence_report(&pairs[..200], 2.5).unwrap();
        assert!(steep.max_diffsurv_vs_ranking < 1e-9);
        assert!(steep.max_ranking_vs_cox.is_none());
    }

    #[test]
    fn losses_are_shift_invariant_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let records = labels(&[(1.0, true), (2.0, false), (3.0, true), (3.5, false), (5.0, true), (6.0, true)]);
        let qp = build_qp(&records).unwrap();
        let top = build_topk_qp(&records, 2).unwrap();
        let comp = comparability(&records);
        let schedule = ComparatorSchedule::new(NetworkKind::OddEven, 6).unwrap();
        let relax = RelaxationConfig::new(RelaxationKind::Cauchy, 12.0).unwrap();
        let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eval = |shift: f64| {
            let tape = Tape::new();
            let zv = tape.leaf(Tensor::vector(z.iter().map(|v| v + shift).collect()));
            let perm = relaxed_sort(&schedule, network_input(zv), relax).unwrap();
            [
                diffsurv_loss(&perm, std::slice::from_ref(&qp)).unwrap().scalar.item(),
                topk_loss(&perm, std::slice::from_ref(&top)).unwrap().scalar.item(),
                cox_pl_sampled(zv, &records, &[0]).unwrap().scalar.item(),
                cox_pl_pairwise_sets(zv, &records, &[0]).unwrap().scalar.item(),
                ranking_loss(zv, std::slice::from_ref(&comp), 1.0).unwrap().scalar.item(),
            ]
        };
        let base = eval(0.0);
        let shifted = eval(7.25);
        for (a, b) in base.iter().zip(&shifted) {
            assert!(*a >= 0.0);
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn gradient_raises_the_earlier_event() {
        let tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![0.2, 0.5]));
        let s = odd_even_schedule(2).unwrap();
        let perm = relaxed_sort(&s, network_input(z), RelaxationConfig::cauchy(4.0).unwrap()).unwrap();
        // sample 0 has the earlier event
        let qp = build_qp(&labels(&[(1.0, true), (2.0, true)])).unwrap();
        let loss = diffsurv_loss(&perm, &[qp]).unwrap();
        tape.backward(loss.scalar).unwrap();
        let g = z.grad();
        assert!(g.data()[0] < 0.0 && g.data()[1] > 0.0, "{g:?}");
    }

    #[test]
    fn widening_possible_sets_never_increases_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        for _ in 0..50 {
            let n = 5;
            let records: Vec<_> = (0..n)
                .map(|_| SurvivalRecord::label(rng.random_range(1.0..6.0), rng.random_bool(0.7)))
                .collect();
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tape = Tape::new();
            let perm = sort(&tape, &z, logistic(5.0));
            let before = diffsurv_loss(&perm, &[build_qp(&records).unwrap()]).unwrap().scalar.item();
            let mut widened = records.clone();
            let i = rng.random_range(0..n);
            widened[i].event = false;
            let after = diffsurv_loss(&perm, &[build_qp(&widened).unwrap()]).unwrap().scalar.item();
            assert!(after <= before + 1e-15);
        }
    }

    #[test]
    fn batched_diffsurv_is_mean_of_sets() {
        let tape = Tape::new();
        let s = odd_even_schedule(3).unwrap();
        let z = tape.leaf(Tensor::new(vec![2, 3], vec![0.1, 0.5, -0.3, 1.0, 0.0, 2.0]).unwrap());
        let perm = relaxed_sort(&s, network_input(z), logistic(2.0)).unwrap();
        let a = build_qp(&labels(&[(1.0, true), (2.0, false), (3.0, true)])).unwrap();
        let b = build_qp(&labels(&[(3.0, true), (2.0, true), (1.0, true)])).unwrap();
        let batched = diffsurv_loss(&perm, &[a.clone(), b.clone()]).unwrap().scalar.item();
        let single = |row: [f64; 3], q: &PossiblePermutationMatrix| {
            let t = Tape::new();
            let zv = t.leaf(Tensor::vector(row.to_vec()));
            let p = relaxed_sort(&s, network_input(zv), logistic(2.0)).unwrap();
            diffsurv_loss(&p, std::slice::from_ref(q)).unwrap().scalar.item()
        };
        let mean = (single([0.1, 0.5, -0.3], &a) + single([1.0, 0.0, 2.0], &b)) / 2.0;
        assert_abs_diff_eq!(batched, mean, epsilon = 1e-14);
        assert!(diffsurv_loss(&perm, &[a]).is_err());
    }
}
