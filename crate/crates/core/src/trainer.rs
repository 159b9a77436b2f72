//! Training loop: risk-set batches, loss selection, Adam, early stopping on a
//! validation metric and restoration of the best parameters.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::autodiff::{Tape, Tensor, Var};
use crate::censoring::{build_qp, build_topk_qp, comparability, network_input, TopKPossible};
use crate::data::{split, Dataset, RiskSetBatch, RiskSetSampler, Standardizer};
use crate::error::{Error, Result};
use crate::losses::{cox_pl_pairwise_sets, cox_pl_sampled, diffsurv_loss, ranking_loss, topk_loss};
use crate::metrics::{c_index, topk_accuracy, truth_topk_from_events, truth_topk_from_risk, EvalResult};
use crate::model::{Mlp, MlpConfig};
use crate::relaxperm::{default_beta, relaxed_sort, RelaxationConfig, RelaxationKind};
use crate::sortnet::{ComparatorSchedule, NetworkKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Diffsurv,
    DiffsurvTopk,
    CoxPl,
    CoxPlPairwise,
    Ranking,
}

impl LossKind {
    pub fn uses_sorting_network(self) -> bool {
        matches!(self, LossKind::Diffsurv | LossKind::DiffsurvTopk)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Diffsurv => "diffsurv",
            LossKind::DiffsurvTopk => "diffsurv-topk",
            LossKind::CoxPl => "cox-pl",
            LossKind::CoxPlPairwise => "cox-pl-pairwise",
            LossKind::Ranking => "ranking",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "diffsurv" => LossKind::Diffsurv,
            "diffsurv-topk" => LossKind::DiffsurvTopk,
            "cox-pl" => LossKind::CoxPl,
            "cox-pl-pairwise" => LossKind::CoxPlPairwise,
            "ranking" => LossKind::Ranking,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown loss `{other}` (expected diffsurv, diffsurv-topk, cox-pl, cox-pl-pairwise or ranking)"
                )))
            }
        })
    }
}

/// Steepness: `auto` follows the network's default schedule.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum BetaSetting {
    #[default]
    Auto,
    Value(f64),
}

impl BetaSetting {
    pub fn resolve(self, network: NetworkKind, n: usize) -> Result<f64> {
        match self {
            BetaSetting::Auto => default_beta(network, n),
            BetaSetting::Value(b) => Ok(b),
        }
    }
}

impl fmt::Display for BetaSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaSetting::Auto => f.write_str("auto"),
            BetaSetting::Value(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for BetaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(BetaSetting::Auto);
        }
        s.parse::<f64>()
            .map(BetaSetting::Value)
            .map_err(|_| Error::Config { field: "beta".into(), msg: format!("`{s}` is neither `auto` nor a number") })
    }
}

impl Serialize for BetaSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BetaSetting::Auto => s.serialize_str("auto"),
            BetaSetting::Value(b) => s.serialize_f64(*b),
        }
    }
}

impl<'de> Deserialize<'de> for BetaSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(b) => Ok(BetaSetting::Value(b)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub network: NetworkKind,
    pub relaxation: RelaxationKind,
    pub beta: BetaSetting,
    pub risk_set_size: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub max_steps: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Top-k as a fraction of the set being ranked.
    pub topk_frac: f64,
    pub hidden_sizes: Vec<usize>,
    pub dropout: f64,
    /// Train / validation / test fractions.
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Diffsurv,
            network: NetworkKind::OddEven,
            relaxation: RelaxationKind::Cauchy,
            beta: BetaSetting::Auto,
            risk_set_size: 8,
            batch_size: 32,
            lr: 1e-3,
            max_steps: 100_000,
            patience: 10,
            topk_frac: 0.1,
            hidden_sizes: vec![32, 32],
            dropout: 0.0,
            split: [0.6, 0.2, 0.2],
            seed: 0,
        }
    }
}

fn config_error(field: &str, msg: impl Into<String>) -> Error {
    Error::Config { field: field.into(), msg: msg.into() }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.risk_set_size < 2 {
            return Err(config_error("risk_set_size", format!("must be at least 2, got {}", self.risk_set_size)));
        }
        if self.loss.uses_sorting_network() && self.network == NetworkKind::Bitonic && !self.risk_set_size.is_power_of_two() {
            return Err(config_error("risk_set_size", "bitonic networks need a power of two"));
        }
        if self.batch_size == 0 {
            return Err(config_error("batch_size", "must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(config_error("lr", format!("must be positive, got {}", self.lr)));
        }
        if self.max_steps == 0 {
            return Err(config_error("max_steps", "must be at least 1"));
        }
        if self.patience == 0 {
            return Err(config_error("patience", "must be at least 1"));
        }
        if !(self.topk_frac > 0.0 && self.topk_frac < 1.0) {
            return Err(config_error("topk_frac", format!("{} not in (0, 1)", self.topk_frac)));
        }
        if let BetaSetting::Value(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(config_error("beta", format!("must be positive, got {b}")));
            }
        }
        if self.hidden_sizes.contains(&0) {
            return Err(config_error("hidden_sizes", "every layer needs at least one unit"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(config_error("dropout", format!("{} not in [0, 1)", self.dropout)));
        }
        if self.split.iter().any(|&f| !(f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config_error("split", "fractions must be positive and sum to 1"));
        }
        Ok(())
    }

    /// Top-k used inside a training risk set, kept within `1..n`.
    pub fn train_k(&self) -> usize {
        ((self.topk_frac * self.risk_set_size as f64).ceil() as usize).clamp(1, self.risk_set_size - 1)
    }

    pub fn eval_k(&self, n_eval: usize) -> usize {
        ((self.topk_frac * n_eval as f64).round() as usize).clamp(1, n_eval)
    }
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn for_model(lr: f64, model: &Mlp) -> Self {
        Self::new(lr, &model.params().iter().map(|p| p.len()).collect::<Vec<_>>())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update. Non-finite gradients abort before any parameter
    /// or moment changes.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "Adam state for {} tensors, got {} params and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::Shape(format!("parameter {k}: size mismatch with optimizer state")));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter {k}")));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for ((x, &gi), (mi, vi)) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut().zip(v.iter_mut())) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_cindex: f64,
    pub val_topk: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Patience,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub beta: Option<f64>,
    pub train_k: Option<usize>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub steps_per_epoch: usize,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub val_metric: String,
    pub best_epoch: usize,
    pub best_val_metric: f64,
    pub epochs: Vec<EpochLog>,
    pub test: EvalResult,
    pub test_k: usize,
    pub wall_clock_secs: f64,
}

impl RunReport {
    /// `epoch,train_loss,val_cindex,val_topk`
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_cindex,val_topk\n");
        for e in &self.epochs {
            let topk = e.val_topk.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.val_cindex, topk));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: RunReport,
    /// Best parameters, acting on standardized covariates.
    pub model: Mlp,
    pub standardizer: Standardizer,
    /// Best parameters with the standardization folded in; acts on raw
    /// covariates.
    pub raw_model: Mlp,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Ground truth for top-k evaluation: true risk when the data carries it,
/// observed event order otherwise.
pub fn topk_truth(dataset: &Dataset, k: usize) -> Result<Vec<usize>> {
    match &dataset.truth {
        Some(t) => Ok(truth_topk_from_risk(&t.true_risk, k)),
        None => truth_topk_from_events(&dataset.records, k),
    }
}

/// C-index and, when `k` is given, top-k accuracy of `model` on `dataset`.
pub fn evaluate(model: &Mlp, dataset: &Dataset, k: Option<usize>) -> Result<EvalResult> {
    if dataset.dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "model expects {} covariates, data has {}",
            model.input_dim(),
            dataset.dim()
        )));
    }
    let scores = model.predict(&dataset.covariates())?;
    let mut result = c_index(&scores, &dataset.records)?;
    if let Some(k) = k {
        result.topk_correct = Some(topk_accuracy(&scores, &topk_truth(dataset, k)?, k)?);
    }
    Ok(result)
}

/// Everything that stays fixed across steps of one run.
pub struct StepContext {
    pub loss: LossKind,
    pub schedule: Option<ComparatorSchedule>,
    pub relax: Option<RelaxationConfig>,
    pub train_k: usize,
}

impl StepContext {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        let n = config.risk_set_size;
        let (schedule, relax) = if config.loss.uses_sorting_network() {
            let beta = config.beta.resolve(config.network, n)?;
            (
                Some(ComparatorSchedule::new(config.network, n)?),
                Some(RelaxationConfig::new(config.relaxation, beta)?),
            )
        } else {
            (None, None)
        };
        Ok(Self { loss: config.loss, schedule, relax, train_k: config.train_k() })
    }

    /// Loss of one batch given scores of shape `[batch, n]`. `None` when no
    /// sample in the batch carries a top-k signal.
    pub fn loss<'t>(&self, scores: Var<'t>, batch: &RiskSetBatch) -> Result<Option<Var<'t>>> {
        let sets = 0..batch.batch_size;
        let value = match self.loss {
            LossKind::Diffsurv | LossKind::DiffsurvTopk => {
                let schedule = self.schedule.as_ref().expect("sorting losses carry a schedule");
                let perm = relaxed_sort(schedule, network_input(scores), self.relax.unwrap())?;
                if self.loss == LossKind::Diffsurv {
                    let qp = sets.map(|b| build_qp(batch.set_labels(b))).collect::<Result<Vec<_>>>()?;
                    diffsurv_loss(&perm, &qp)?
                } else {
                    let topk = sets
                        .map(|b| build_topk_qp(batch.set_labels(b), self.train_k))
                        .collect::<Result<Vec<TopKPossible>>>()?;
                    if topk.iter().all(|t| t.informative() == 0) {
                        return Ok(None);
                    }
                    topk_loss(&perm, &topk)?
                }
            }
            LossKind::CoxPl => cox_pl_sampled(scores, &batch.labels, &batch.cases)?,
            LossKind::CoxPlPairwise => cox_pl_pairwise_sets(scores, &batch.labels, &batch.cases)?,
            LossKind::Ranking => {
                let comp: Vec<_> = sets.map(|b| comparability(batch.set_labels(b))).collect();
                ranking_loss(scores, &comp, 1.0)?
            }
        };
        Ok(Some(value.scalar))
    }
}

/// Splits `dataset` per the config and trains on the result.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let (tr, va, te) = split(dataset, config.split, config.seed)?;
    train_on_splits(config, tr, va, te)
}

pub fn train_on_splits(config: &TrainConfig, train: Dataset, val: Dataset, test: Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let started = Instant::now();
    let standardizer = Standardizer::fit(&train);
    let train_std = standardizer.apply(&train);
    let val_std = standardizer.apply(&val);

    let context = StepContext::new(config)?;
    let sampler = RiskSetSampler::new(&train_std, config.risk_set_size)?;
    let mut model = Mlp::new(MlpConfig {
        input_dim: train.dim(),
        hidden_sizes: config.hidden_sizes.clone(),
        dropout_rate: config.dropout,
        seed: config.seed,
    })?;
    let mut adam = Adam::for_model(config.lr, &model);
    // separate stream from the initializer
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));

    let topk_run = config.loss == LossKind::DiffsurvTopk;
    let val_k = config.eval_k(val.len());
    let steps_per_epoch = train.n_events().div_ceil(config.batch_size);

    let mut epochs = Vec::new();
    // (primary metric, C-index tie-break, epoch, parameters)
    let mut best: Option<(f64, f64, usize, Mlp)> = None;
    let mut since_best = 0;
    let mut steps = 0;
    let stop_reason = loop {
        if steps >= config.max_steps {
            break StopReason::MaxSteps;
        }
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for _ in 0..steps_per_epoch {
            if steps >= config.max_steps {
                break;
            }
            let batch = sampler.sample(&train_std, config.batch_size, &mut rng)?;
            steps += 1;
            let tape = Tape::new();
            let bound = model.bind(&tape);
            let scores = bound.forward(tape.constant(batch.x.clone()), Some(&mut rng))?;
            let Some(loss) = context.loss(scores, &batch)? else { continue };
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::Divergence { step: steps, msg: format!("loss is {value}") });
            }
            tape.backward(loss)?;
            let grads: Vec<Tensor> = bound.vars().iter().map(Var::grad).collect();
            adam.step(model.params_mut(), &grads)
                .map_err(|e| Error::Divergence { step: steps, msg: e.to_string() })?;
            loss_sum += value;
            loss_count += 1;
        }

        let val_eval = evaluate(&model, &val_std, Some(val_k))?;
        let metric = if topk_run { val_eval.topk_correct.unwrap() } else { val_eval.c_index };
        epochs.push(EpochLog {
            epoch: epochs.len(),
            train_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { f64::NAN },
            val_cindex: val_eval.c_index,
            val_topk: val_eval.topk_correct,
        });
        // top-k accuracy moves in steps of 1/k, so ties fall back to C-index
        let improved = best
            .as_ref()
            .is_none_or(|(m, c, _, _)| metric > *m || (metric == *m && val_eval.c_index > *c));
        if improved {
            best = Some((metric, val_eval.c_index, epochs.len() - 1, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break StopReason::Patience;
            }
        }
    };

    let (best_val_metric, _, best_epoch, best_model) = best.expect("at least one epoch runs");
    let mut raw_model = best_model.clone();
    raw_model.fold_standardization(&standardizer.mean, &standardizer.std)?;
    let test_k = config.eval_k(test.len());
    let test_eval = evaluate(&raw_model, &test, Some(test_k))?;

    let report = RunReport {
        config: config.clone(),
        beta: context.relax.map(|r| r.beta),
        train_k: topk_run.then_some(context.train_k),
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
        steps_per_epoch,
        steps,
        stop_reason,
        val_metric: if topk_run { "val_topk".into() } else { "val_cindex".into() },
        best_epoch,
        best_val_metric,
        epochs,
        test: test_eval,
        test_k,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { report, model: best_model, standardizer, raw_model, train, val, test })
}
