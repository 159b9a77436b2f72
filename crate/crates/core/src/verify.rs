//! Self-check suite behind `diffsurv verify`. Every check compares library
//! output against an independent computation: printed values, exhaustive
//! enumeration, exact sorting, finite differences or a brute-force loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{grad_check, Tape, Tensor, Var};
use crate::censoring::{build_qp, comparability, network_input, SurvivalRecord};
use crate::data::{generate_synthetic, SyntheticParams};
use crate::error::Result;
use crate::losses::{cox_pl_pairwise, diffsurv_loss, ranking_loss};
use crate::metrics::c_index;
use crate::model::{BoundMlp, Mlp, MlpConfig};
use crate::relaxperm::{default_beta, relaxed_sort, RelaxationConfig, RelaxationKind};
use crate::sortnet::{hard_sort, sorts_all_binary, ComparatorSchedule, NetworkKind};
use crate::trainer::{train, BetaSetting, LossKind, TrainConfig};

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Test fixture: evaluates every conditional swap with its comparison
    /// reversed. Checks that see the sort direction must then fail.
    pub flip_swap_sign: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// The seven-sample layout with events at sorted positions 1 and 4, and its
/// possible-permutation rows as printed.
pub const GOLDEN_EVENTS: [usize; 2] = [1, 4];
pub const GOLDEN_ROWS: [&str; 7] = ["1111111", "1100000", "0111111", "0111111", "0111100", "0011111", "0011111"];

pub fn golden_records() -> Vec<SurvivalRecord> {
    (0..7).map(|i| SurvivalRecord::label(i as f64 + 1.0, GOLDEN_EVENTS.contains(&i))).collect()
}

fn sort_input<'t>(z: Var<'t>, opts: &VerifyOptions) -> Var<'t> {
    // reversing every comparison is the same network run on -z
    if opts.flip_swap_sign {
        z.neg()
    } else {
        z
    }
}

pub fn check_qp_golden() -> Result<(bool, String)> {
    let rows = build_qp(&golden_records())?.row_strings();
    let passed = rows.iter().zip(GOLDEN_ROWS).all(|(a, b)| a == b);
    Ok((passed, if passed { "7x7 matrix matches".into() } else { format!("got {rows:?}") }))
}

/// Brute-force realisability of an ordering under the tie rule. Events in a
/// tie group occupy distinct instants inside the group; a censoring at `c`
/// must come after every event observed at `c`.
pub fn order_is_realisable(order: &[usize], records: &[SurvivalRecord]) -> bool {
    // (time, 1 = event slot / 2 = after the events, counter)
    let mut prev: Option<(f64, u32, u32)> = None;
    for &s in order {
        let r = &records[s];
        let next = prev.map(|p| (p.0, p.1, p.2 + 1));
        let at = if r.event {
            match prev {
                None => (r.time, 1, 0),
                Some(p) if p.0 < r.time => (r.time, 1, 0),
                Some(p) if p.0 == r.time && p.1 == 1 => (r.time, 1, p.2 + 1),
                _ => return false,
            }
        } else {
            let floor = (r.time, 2, 0);
            match next {
                Some(n) if n > floor => n,
                _ => floor,
            }
        };
        prev = Some(at);
    }
    true
}

/// `Q_p` by enumerating every ordering of the samples.
pub fn enumerate_qp(records: &[SurvivalRecord]) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], records: &[SurvivalRecord], q: &mut [Vec<u8>]) {
        if prefix.len() == used.len() {
            if order_is_realisable(prefix, records) {
                for (rank, &s) in prefix.iter().enumerate() {
                    q[s][rank] = 1;
                }
            }
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, records, q);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let n = records.len();
    let mut q = vec![vec![0; n]; n];
    rec(&mut Vec::new(), &mut vec![false; n], records, &mut q);
    q
}

pub fn check_qp_oracle(sets: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..sets {
        let n = rng.random_range(2..=7);
        let records: Vec<_> = (0..n)
            .map(|_| SurvivalRecord::label(rng.random_range(1..=5) as f64, rng.random_bool(0.5)))
            .collect();
        let q = build_qp(&records)?;
        let expected = enumerate_qp(&records);
        for (i, row) in expected.iter().enumerate() {
            if q.row(i) != row.as_slice() {
                return Ok((false, format!("set {t}, row {i}: {:?} vs enumerated {row:?}", q.row(i))));
            }
        }
    }
    Ok((true, format!("{sets} random sets match enumeration")))
}

fn configurations() -> Vec<(NetworkKind, RelaxationKind)> {
    let mut out = Vec::new();
    for net in [NetworkKind::OddEven, NetworkKind::Bitonic] {
        for relax in [RelaxationKind::Logistic, RelaxationKind::Cauchy] {
            out.push((net, relax));
        }
    }
    out
}

pub fn check_doubly_stochastic(trials: usize, opts: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(3));
    let mut worst = 0.0f64;
    for n in [2, 4, 8, 16, 32] {
        for (net, kind) in configurations() {
            let schedule = ComparatorSchedule::new(net, n)?;
            let relax = RelaxationConfig::new(kind, default_beta(net, n)?)?;
            for _ in 0..trials {
                let tape = Tape::new();
                let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let zv = sort_input(tape.constant(Tensor::vector(z)), opts);
                let p = relaxed_sort(&schedule, zv, relax)?.matrix.value();
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| p.get(&[i, j])).sum();
                    let col: f64 = (0..n).map(|j| p.get(&[j, i])).sum();
                    worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
                }
                if p.data().iter().any(|&v| v < 0.0) {
                    return Ok((false, format!("negative entry for {net}/{kind} n={n}")));
                }
            }
        }
    }
    Ok((worst < 1e-6, format!("max |sum - 1| = {worst:.3e}")))
}

/// Distinct values with gaps of at least 0.05: a shuffled grid plus jitter.
fn separated_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut grid: Vec<usize> = (0..n).collect();
    grid.shuffle(rng);
    grid.into_iter().map(|g| g as f64 * 0.1 + rng.random_range(0.0..0.05)).collect()
}

pub fn check_hard_limit(trials: usize, opts: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(4));
    for n in [2, 4, 8, 16, 32] {
        for (net, kind) in configurations() {
            let schedule = ComparatorSchedule::new(net, n)?;
            let relax = RelaxationConfig::new(kind, 1e6)?;
            for _ in 0..trials {
                let z = separated_values(n, &mut rng);
                let (_, rank) = hard_sort(&schedule, &z)?;
                let tape = Tape::new();
                let zv = sort_input(tape.constant(Tensor::vector(z.clone())), opts);
                let p = relaxed_sort(&schedule, zv, relax)?.matrix.value();
                for (i, &r) in rank.iter().enumerate() {
                    let row = &p.data()[i * n..(i + 1) * n];
                    let argmax = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                    if argmax != r {
                        return Ok((false, format!("{net}/{kind} n={n}: input {i} peaks at rank {argmax}, sorts to {r}")));
                    }
                }
            }
        }
    }
    Ok((true, format!("{trials} trials per configuration")))
}

pub fn check_zero_one() -> Result<(bool, String)> {
    for n in 2..=10 {
        if !sorts_all_binary(&ComparatorSchedule::new(NetworkKind::OddEven, n)?) {
            return Ok((false, format!("odd-even n={n} fails")));
        }
    }
    for n in [2, 4, 8, 16] {
        if !sorts_all_binary(&ComparatorSchedule::new(NetworkKind::Bitonic, n)?) {
            return Ok((false, format!("bitonic n={n} fails")));
        }
    }
    Ok((true, "odd-even 2..10 and bitonic 2,4,8,16 sort every binary input".into()))
}

/// Pointwise agreement on random pairs, then whole training runs with
/// matched seeds.
pub fn check_equivalence(opts: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(6));
    let schedule = ComparatorSchedule::new(NetworkKind::OddEven, 2)?;
    let relax = RelaxationConfig::logistic(1.0)?;
    // sample 0 is the case: event at time 1, control event at time 2
    let labels = [SurvivalRecord::label(1.0, true), SurvivalRecord::label(2.0, true)];
    let qp = build_qp(&labels)?;
    let comp = comparability(&labels);
    let mut pointwise = 0.0f64;
    for _ in 0..1000 {
        let (case, control) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![case, control]));
        let perm = relaxed_sort(&schedule, sort_input(network_input(z), opts), relax)?;
        let diffsurv = diffsurv_loss(&perm, std::slice::from_ref(&qp))?.scalar.item();
        let ranking = ranking_loss(z, std::slice::from_ref(&comp), 1.0)?.scalar.item();
        let cox = cox_pl_pairwise(tape.leaf(Tensor::scalar(case)), tape.leaf(Tensor::scalar(control)))?
            .scalar
            .item();
        pointwise = pointwise.max((diffsurv - ranking).abs()).max((ranking - cox).abs());
    }

    let data = generate_synthetic(&SyntheticParams { n_samples: 400, dim: 3, seed: opts.seed, ..Default::default() })?;
    let base = TrainConfig {
        risk_set_size: 2,
        relaxation: RelaxationKind::Logistic,
        beta: BetaSetting::Value(1.0),
        hidden_sizes: vec![8],
        max_steps: 200,
        seed: opts.seed,
        ..Default::default()
    };
    let mut curves = Vec::new();
    for loss in [LossKind::Diffsurv, LossKind::CoxPlPairwise, LossKind::Ranking] {
        let report = train(&TrainConfig { loss, ..base.clone() }, &data)?.report;
        curves.push(report.epochs.iter().map(|e| e.train_loss).collect::<Vec<_>>());
    }
    let mut trajectory = 0.0f64;
    for other in &curves[1..] {
        if other.len() != curves[0].len() {
            return Ok((false, "trajectories have different lengths".into()));
        }
        for (a, b) in curves[0].iter().zip(other) {
            trajectory = trajectory.max((a - b).abs());
        }
    }
    let passed = pointwise < 1e-9 && trajectory < 1e-9;
    Ok((passed, format!("pointwise {pointwise:.2e}, trajectory {trajectory:.2e} over {} epochs", curves[0].len())))
}

/// Central differences through MLP, negation, relaxed sort and the
/// possible-permutation loss.
pub fn check_end_to_end_gradient(instances: usize, opts: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(7));
    let (n, d) = (4, 3);
    let schedule = ComparatorSchedule::new(NetworkKind::OddEven, n)?;
    let relax = RelaxationConfig::cauchy(default_beta(NetworkKind::OddEven, n)?)?;
    let mut worst = 0.0f64;
    for t in 0..instances {
        let model = Mlp::new(MlpConfig { input_dim: d, hidden_sizes: vec![8], dropout_rate: 0.0, seed: rng.random() })?;
        let x = Tensor::new(vec![1, n, d], (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let labels: Vec<_> = (0..n)
            .map(|_| SurvivalRecord::label(rng.random_range(0.0..10.0), rng.random_bool(0.6)))
            .collect();
        let qp = build_qp(&labels)?;
        let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
        let report = grad_check(
            |tape, vars| {
                let bound = BoundMlp::from_vars(vars, 0.0)?;
                let scores = bound.forward(tape.constant(x.clone()), None)?;
                let perm = relaxed_sort(&schedule, sort_input(network_input(scores), opts), relax)?;
                Ok(diffsurv_loss(&perm, std::slice::from_ref(&qp))?.scalar)
            },
            &params,
            // at 1e-6 the rounding noise on exactly-zero gradients (dead ReLU
            // units) already reaches the 1e-4 tolerance after the 1e-6 floor
            1e-5,
            1e-4,
        )?;
        worst = worst.max(report.max_rel_error);
        if !report.passed {
            return Ok((false, format!("instance {t}: relative error {:.3e}", report.max_rel_error)));
        }
    }
    Ok((true, format!("max relative error {worst:.3e} over {instances} instances")))
}

/// Pair-by-pair Harrell count.
pub fn brute_force_c_index(scores: &[f64], records: &[SurvivalRecord]) -> Option<f64> {
    let (mut mass, mut pairs) = (0.0, 0u64);
    for (i, a) in records.iter().enumerate() {
        for (j, b) in records.iter().enumerate() {
            if a.event && (a.time < b.time || (a.time == b.time && !b.event)) {
                pairs += 1;
                mass += match scores[i].partial_cmp(&scores[j]) {
                    Some(std::cmp::Ordering::Greater) => 1.0,
                    Some(std::cmp::Ordering::Equal) => 0.5,
                    _ => 0.0,
                };
            }
        }
    }
    (pairs > 0).then(|| mass / pairs as f64)
}

pub fn check_c_index(instances: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(10));
    let mut done = 0;
    while done < instances {
        let n = rng.random_range(2..=200);
        let records: Vec<_> = (0..n)
            .map(|_| SurvivalRecord::label(rng.random_range(0..30) as f64, rng.random_bool(0.7)))
            .collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-20..20) as f64 / 4.0).collect();
        let Some(expected) = brute_force_c_index(&scores, &records) else { continue };
        let got = c_index(&scores, &records)?.c_index;
        if got != expected {
            return Ok((false, format!("instance {done}: {got} vs brute force {expected}")));
        }
        done += 1;
    }
    Ok((true, format!("{instances} instances match exactly")))
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs checks 1-7 and 10.
pub fn run_all(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    vec![
        timed(1, "qp-golden", check_qp_golden),
        timed(2, "qp-oracle", || check_qp_oracle(500, opts.seed)),
        timed(3, "doubly-stochastic", || check_doubly_stochastic(100, opts)),
        timed(4, "hard-limit", || check_hard_limit(100, opts)),
        timed(5, "zero-one", check_zero_one),
        timed(6, "pairwise-equivalence", || check_equivalence(opts)),
        timed(7, "end-to-end-gradient", || check_end_to_end_gradient(10, opts)),
        timed(10, "c-index-oracle", || check_c_index(100, opts.seed)),
    ]
}
