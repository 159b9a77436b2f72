use diffsurv::data::{generate_synthetic, SyntheticParams};
use diffsurv::metrics::c_index;
use diffsurv::trainer::{train, LossKind, TrainConfig};

#[test]
fn generator_mean_time_matches_target() {
    let data = generate_synthetic(&SyntheticParams { n_samples: 100_000, seed: 11, ..Default::default() }).unwrap();
    let truth = data.truth.as_ref().unwrap();
    let mean = truth.true_time.iter().sum::<f64>() / truth.true_time.len() as f64;
    assert!((mean - 30.0).abs() <= 3.0, "mean true time {mean}");
    assert_eq!(data.len() - data.n_events(), 30_000);
}

#[test]
fn uncensored_generator_observes_true_times() {
    let data = generate_synthetic(&SyntheticParams { n_samples: 500, censor_frac: 0.0, ..Default::default() }).unwrap();
    let truth = data.truth.as_ref().unwrap();
    assert_eq!(data.n_events(), 500);
    for (r, &t) in data.records.iter().zip(&truth.true_time) {
        assert_eq!(r.time, t);
    }
}

#[test]
fn censoring_never_extends_follow_up() {
    let data = generate_synthetic(&SyntheticParams { n_samples: 2000, seed: 4, ..Default::default() }).unwrap();
    let truth = data.truth.as_ref().unwrap();
    for (r, &t) in data.records.iter().zip(&truth.true_time) {
        if r.event {
            assert_eq!(r.time, t);
        } else {
            assert!(r.time > 0.0 && r.time <= t);
        }
    }
}

#[test]
fn oracle_scoring_is_near_perfect_on_default_data() {
    let data = generate_synthetic(&SyntheticParams::default()).unwrap();
    let truth = data.truth.as_ref().unwrap();
    let c = c_index(&truth.true_risk, &data.records).unwrap().c_index;
    assert!(c > 0.95, "oracle C-index {c}");
}

#[test]
fn noiseless_risk_is_recovered() {
    let params = SyntheticParams { n_samples: 2000, dim: 1, censor_frac: 0.0, seed: 2, ..Default::default() };
    let data = generate_synthetic(&params).unwrap();
    let config = TrainConfig { loss: LossKind::Diffsurv, risk_set_size: 8, seed: 1, ..TrainConfig::default() };
    let outcome = train(&config, &data).unwrap();
    assert!(outcome.report.test.c_index > 0.95, "test C-index {}", outcome.report.test.c_index);
}

#[test]
fn trained_model_beats_chance_under_censoring() {
    let data = generate_synthetic(&SyntheticParams { n_samples: 1500, seed: 9, ..Default::default() }).unwrap();
    for loss in [LossKind::Diffsurv, LossKind::DiffsurvTopk, LossKind::CoxPl, LossKind::CoxPlPairwise, LossKind::Ranking] {
        let config = TrainConfig { loss, risk_set_size: 4, max_steps: 400, ..TrainConfig::default() };
        let c = train(&config, &data).unwrap().report.test.c_index;
        assert!(c > 0.8, "{loss}: test C-index {c}");
    }
}
