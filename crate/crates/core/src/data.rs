//! Datasets: synthetic generation, CSV ingestion, stratified splits and
//! case-control risk-set sampling.

use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::censoring::SurvivalRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_samples: usize,
    pub dim: usize,
    pub censor_frac: f64,
    pub mean_time: f64,
    /// Multiplier on the standardized latent; sets how well the covariate
    /// determines the event order.
    pub risk_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            dim: 5,
            censor_frac: 0.3,
            mean_time: 30.0,
            risk_scale: 10.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Synthetic(SyntheticParams),
    Csv { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTruth {
    pub true_risk: Vec<f64>,
    pub true_time: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<SurvivalRecord>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
    pub truth: Option<SyntheticTruth>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    /// Row-major `[len, dim]` covariates.
    pub fn covariates(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| r.covariates.iter().copied()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
            truth: self.truth.as_ref().map(|t| SyntheticTruth {
                true_risk: indices.iter().map(|&i| t.true_risk[i]).collect(),
                true_time: indices.iter().map(|&i| t.true_time[i]).collect(),
            }),
        }
    }
}

/// `E[exp(-a z)]` for `z` uniform on `[-√3, √3]`.
fn mean_exp_neg(a: f64) -> f64 {
    let s = a * 3f64.sqrt();
    if s == 0.0 {
        1.0
    } else {
        s.sinh() / s
    }
}

/// Synthetic survival data with the survSVHN time mechanism on tabular
/// covariates.
///
/// Covariates are standard normal. The latent `u = Φ(x_1)` is uniform and
/// its standardization `z` scaled by `risk_scale` is the log-hazard. True
/// times are exponential with rate `exp(r) / s`, where `s` makes the
/// population mean equal `mean_time`. A fixed `censor_frac` of samples, drawn
/// without replacement, is censored at `Uniform(0, t*]`.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<Dataset> {
    let p = params;
    if p.n_samples < 2 {
        return Err(Error::Config { field: "n".into(), msg: "need at least 2 samples".into() });
    }
    if p.dim == 0 {
        return Err(Error::Config { field: "dim".into(), msg: "need at least 1 covariate".into() });
    }
    if !(0.0..1.0).contains(&p.censor_frac) {
        return Err(Error::Config {
            field: "censor_frac".into(),
            msg: format!("{} not in [0, 1)", p.censor_frac),
        });
    }
    if !(p.mean_time > 0.0 && p.mean_time.is_finite()) {
        return Err(Error::Config { field: "mean_time".into(), msg: "must be positive".into() });
    }
    if !(p.risk_scale >= 0.0 && p.risk_scale.is_finite()) {
        return Err(Error::Config { field: "risk_scale".into(), msg: "must be non-negative".into() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let scale = p.mean_time / mean_exp_neg(p.risk_scale);
    let n = p.n_samples;
    let mut covariates = Vec::with_capacity(n);
    let mut true_risk = Vec::with_capacity(n);
    let mut true_time = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p.dim).map(|_| rng.sample(StandardNormal)).collect();
        let u = 0.5 * statrs::function::erf::erfc(-x[0] / std::f64::consts::SQRT_2);
        let r = p.risk_scale * (u - 0.5) * 12f64.sqrt();
        let e: f64 = rng.sample(Exp1);
        true_time.push(e * scale * (-r).exp());
        true_risk.push(r);
        covariates.push(x);
    }

    let n_censored = (p.censor_frac * n as f64).round() as usize;
    let mut censored = vec![false; n];
    for i in index::sample(&mut rng, n, n_censored) {
        censored[i] = true;
    }
    let records = covariates
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let time = if censored[i] {
                // 1 - U lies in (0, 1], so the censoring time is in (0, t*]
                true_time[i] * (1.0 - rng.random::<f64>())
            } else {
                true_time[i]
            };
            SurvivalRecord { time, event: !censored[i], covariates: x }
        })
        .collect();
    Ok(Dataset {
        records,
        feature_names: (1..=p.dim).map(|i| format!("x{i}")).collect(),
        provenance: Provenance::Synthetic(p.clone()),
        truth: Some(SyntheticTruth { true_risk, true_time }),
    })
}

/// `data.csv` → `data.truth.csv`.
pub fn truth_sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.truth.csv"))
}

fn csv_error(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::Csv { path: path.display().to_string(), row, msg: msg.into() }
}

/// Reads `time,event,<features…>`. Rows in error messages are 1-based data
/// rows (the header is row 0). A `*.truth.csv` sidecar is attached when
/// present.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 0, e.to_string()))?.clone();
    if headers.get(0) != Some("time") || headers.get(1) != Some("event") {
        return Err(csv_error(path, 0, "header must start with `time,event`"));
    }
    if headers.len() < 3 {
        return Err(csv_error(path, 0, "no feature columns"));
    }
    let feature_names: Vec<String> = headers.iter().skip(2).map(str::to_owned).collect();

    let mut records = Vec::new();
    for (r, row) in reader.records().enumerate() {
        let row_no = r + 1;
        let row = row.map_err(|e| csv_error(path, row_no, e.to_string()))?;
        if row.len() != headers.len() {
            return Err(csv_error(path, row_no, format!("expected {} columns, found {}", headers.len(), row.len())));
        }
        let number = |c: usize| -> Result<f64> {
            let cell = &row[c];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| csv_error(path, row_no, format!("column `{}`: `{cell}` is not a finite number", &headers[c])))
        };
        let time = number(0)?;
        if time < 0.0 {
            return Err(csv_error(path, row_no, format!("negative time {time}")));
        }
        let event = match &row[1] {
            "0" => false,
            "1" => true,
            other => return Err(csv_error(path, row_no, format!("event must be 0 or 1, got `{other}`"))),
        };
        let covariates = (2..row.len()).map(number).collect::<Result<_>>()?;
        records.push(SurvivalRecord { time, event, covariates });
    }
    if records.is_empty() {
        return Err(csv_error(path, 0, "no data rows"));
    }

    let sidecar = truth_sidecar_path(path);
    let truth = if sidecar.exists() { Some(load_truth_csv(&sidecar, records.len())?) } else { None };
    Ok(Dataset { records, feature_names, provenance: Provenance::Csv { path: path.to_path_buf() }, truth })
}

fn load_truth_csv(path: &Path, expected: usize) -> Result<SyntheticTruth> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 0, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["true_time", "true_risk"] {
        return Err(csv_error(path, 0, "header must be `true_time,true_risk`"));
    }
    let mut truth = SyntheticTruth { true_risk: Vec::new(), true_time: Vec::new() };
    for (r, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, r + 1, e.to_string()))?;
        let parse = |c: usize| row[c].parse::<f64>().map_err(|_| csv_error(path, r + 1, format!("`{}` is not a number", &row[c])));
        truth.true_time.push(parse(0)?);
        truth.true_risk.push(parse(1)?);
    }
    if truth.true_time.len() != expected {
        return Err(csv_error(path, 0, format!("{} truth rows for {expected} data rows", truth.true_time.len())));
    }
    Ok(truth)
}

/// Writes the dataset (and its truth sidecar, if any). Floats are written in
/// shortest round-trip form.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let to_io = |e: csv::Error| Error::Io(e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend(dataset.feature_names.iter().cloned());
    w.write_record(&header).map_err(to_io)?;
    for r in &dataset.records {
        let mut row = vec![r.time.to_string(), if r.event { "1" } else { "0" }.to_string()];
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    if let Some(truth) = &dataset.truth {
        let mut w = csv::Writer::from_path(truth_sidecar_path(path)).map_err(to_io)?;
        w.write_record(["true_time", "true_risk"]).map_err(to_io)?;
        for (t, r) in truth.true_time.iter().zip(&truth.true_risk) {
            w.write_record([t.to_string(), r.to_string()]).map_err(to_io)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Seeded split into train/val/test, stratified on the event flag.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config {
            field: "split".into(),
            msg: format!("fractions {fractions:?} must be positive and sum to 1"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for event in [true, false] {
        let mut stratum: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.records[i].event == event).collect();
        stratum.shuffle(&mut rng);
        let m = stratum.len();
        let a = (fractions[0] * m as f64).round() as usize;
        let b = ((fractions[1] * m as f64).round() as usize).min(m - a);
        parts[0].extend_from_slice(&stratum[..a]);
        parts[1].extend_from_slice(&stratum[a..a + b]);
        parts[2].extend_from_slice(&stratum[a + b..]);
    }
    for (name, part) in ["train", "val", "test"].iter().zip(parts.iter_mut()) {
        if !part.iter().any(|&i| dataset.records[i].event) {
            return Err(Error::InvalidArgument(format!("{name} split has no events")));
        }
        part.shuffle(&mut rng);
    }
    Ok((dataset.subset(&parts[0]), dataset.subset(&parts[1]), dataset.subset(&parts[2])))
}

/// Per-feature mean and standard deviation of a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant features get a standard deviation of 1.
    pub fn fit(dataset: &Dataset) -> Self {
        let d = dataset.dim();
        let n = dataset.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &dataset.records {
            for (m, x) in mean.iter_mut().zip(&r.covariates) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in &dataset.records {
            for ((v, x), m) in var.iter_mut().zip(&r.covariates).zip(&mean) {
                *v += (x - m).powi(2) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        let mut out = dataset.clone();
        for r in &mut out.records {
            for ((x, m), s) in r.covariates.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct RiskSetBatch {
    /// `[batch, n, d]`
    pub x: Tensor,
    /// Slot labels, `batch * n` in slot order.
    pub labels: Vec<SurvivalRecord>,
    /// Case slot per risk set.
    pub cases: Vec<usize>,
    /// Dataset index of every slot.
    pub indices: Vec<usize>,
    pub batch_size: usize,
    pub n: usize,
}

impl RiskSetBatch {
    pub fn set_labels(&self, b: usize) -> &[SurvivalRecord] {
        &self.labels[b * self.n..(b + 1) * self.n]
    }
}

/// Case-control sampler. Samples are ordered by time with events ahead of
/// censorings at equal times, so the at-risk set of any case is a suffix.
#[derive(Clone, Debug)]
pub struct RiskSetSampler {
    order: Vec<usize>,
    /// `(dataset index, start of its at-risk suffix in order)`
    eligible: Vec<(usize, usize)>,
    n: usize,
}

impl RiskSetSampler {
    pub fn new(dataset: &Dataset, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config { field: "risk_set_size".into(), msg: format!("must be at least 2, got {n}") });
        }
        let recs = &dataset.records;
        let mut order: Vec<usize> = (0..recs.len()).collect();
        let key = |i: usize| (recs[i].time, !recs[i].event);
        order.sort_by(|&a, &b| {
            let (ta, ca) = key(a);
            let (tb, cb) = key(b);
            ta.total_cmp(&tb).then(ca.cmp(&cb)).then(a.cmp(&b))
        });
        let eligible: Vec<(usize, usize)> = (0..recs.len())
            .filter(|&i| recs[i].event)
            .map(|i| {
                let t = recs[i].time;
                // first position past every sample at (t, event) or earlier
                let start = order.partition_point(|&j| recs[j].time < t || (recs[j].time == t && recs[j].event));
                (i, start)
            })
            .filter(|&(_, start)| recs.len() - start >= n - 1)
            .collect();
        if eligible.is_empty() {
            return Err(Error::InsufficientRiskSet(format!(
                "no event has {} samples at risk; try a smaller risk_set_size",
                n - 1
            )));
        }
        Ok(Self { order, eligible, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eligible_cases(&self) -> usize {
        self.eligible.len()
    }

    pub fn sample(&self, dataset: &Dataset, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<RiskSetBatch> {
        if batch_size == 0 {
            return Err(Error::Config { field: "batch_size".into(), msg: "must be at least 1".into() });
        }
        let (n, d) = (self.n, dataset.dim());
        let mut indices = Vec::with_capacity(batch_size * n);
        let mut cases = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let (case, start) = self.eligible[rng.random_range(0..self.eligible.len())];
            let mut slots = vec![case];
            slots.extend(
                index::sample(rng, self.order.len() - start, n - 1)
                    .into_iter()
                    .map(|k| self.order[start + k]),
            );
            slots.shuffle(rng);
            cases.push(slots.iter().position(|&s| s == case).unwrap());
            indices.extend(slots);
        }
        let labels: Vec<SurvivalRecord> = indices
            .iter()
            .map(|&i| SurvivalRecord::label(dataset.records[i].time, dataset.records[i].event))
            .collect();
        let x = indices.iter().flat_map(|&i| dataset.records[i].covariates.iter().copied()).collect();
        Ok(RiskSetBatch {
            x: Tensor::new(vec![batch_size, n, d], x)?,
            labels,
            cases,
            indices,
            batch_size,
            n,
        })
    }
}

pub fn sample_risk_sets(dataset: &Dataset, batch_size: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<RiskSetBatch> {
    RiskSetSampler::new(dataset, n)?.sample(dataset, batch_size, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::c_index;

    fn small(censor_frac: f64, n: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticParams { n_samples: n, dim: 3, censor_frac, seed, ..Default::default() }).unwrap()
    }

    #[test]
    fn no_censoring_means_observed_equals_true() {
        let d = small(0.0, 500, 1);
        let truth = d.truth.as_ref().unwrap();
        assert!(d.records.iter().all(|r| r.event));
        for (r, t) in d.records.iter().zip(&truth.true_time) {
            assert_eq!(r.time, *t);
        }
    }

    #[test]
    fn censoring_is_a_fixed_fraction_before_true_time() {
        let d = small(0.3, 1000, 2);
        assert_eq!(d.n_events(), 700);
        let truth = d.truth.as_ref().unwrap();
        for (r, t) in d.records.iter().zip(&truth.true_time) {
            if r.event {
                assert_eq!(r.time, *t);
            } else {
                assert!(r.time > 0.0 && r.time < *t);
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(small(0.3, 200, 3), small(0.3, 200, 3));
        assert_ne!(small(0.3, 200, 3), small(0.3, 200, 4));
    }

    #[test]
    fn calibration_constant_matches_quadrature() {
        for a in [0.0, 1.0, 10.0] {
            let steps = 200_000;
            let h = 2.0 * 3f64.sqrt() / steps as f64;
            let integral: f64 = (0..steps)
                .map(|k| {
                    let z = -3f64.sqrt() + (k as f64 + 0.5) * h;
                    (-a * z).exp() * h / (2.0 * 3f64.sqrt())
                })
                .sum();
            assert!((integral / mean_exp_neg(a) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let bad = |p: SyntheticParams| generate_synthetic(&p).is_err();
        assert!(bad(SyntheticParams { censor_frac: 1.0, ..Default::default() }));
        assert!(bad(SyntheticParams { n_samples: 1, ..Default::default() }));
        assert!(bad(SyntheticParams { dim: 0, ..Default::default() }));
        assert!(bad(SyntheticParams { mean_time: 0.0, ..Default::default() }));
    }

    #[test]
    fn true_risk_orders_uncensored_data() {
        let d = small(0.0, 2000, 5);
        let c = c_index(&d.truth.as_ref().unwrap().true_risk, &d.records).unwrap().c_index;
        assert!(c > 0.94, "{c}");
    }

    #[test]
    fn split_sizes_and_stratification() {
        let d = small(0.3, 1000, 6);
        let (a, b, c) = split(&d, [0.6, 0.2, 0.2], 9).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (600, 200, 200));
        let (a2, _, _) = split(&d, [0.6, 0.2, 0.2], 9).unwrap();
        assert_eq!(a, a2);
        let mut times: Vec<f64> = [&a, &b, &c].iter().flat_map(|s| s.records.iter().map(|r| r.time)).collect();
        times.sort_by(f64::total_cmp);
        let mut all: Vec<f64> = d.records.iter().map(|r| r.time).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(times, all);
        assert!(split(&d, [0.5, 0.5, 0.0], 1).is_err());
        assert!(split(&d, [0.5, 0.2, 0.2], 1).is_err());
    }

    #[test]
    fn split_carries_truth() {
        let d = small(0.3, 100, 7);
        let (a, _, _) = split(&d, [0.6, 0.2, 0.2], 1).unwrap();
        let t = a.truth.as_ref().unwrap();
        for (r, tt) in a.records.iter().zip(&t.true_time) {
            assert!(r.time <= *tt);
        }
    }

    #[test]
    fn standardizer_centers_training_features() {
        let d = small(0.3, 500, 8);
        let s = Standardizer::fit(&d);
        let z = s.apply(&d);
        let again = Standardizer::fit(&z);
        for (m, sd) in again.mean.iter().zip(&again.std) {
            assert!(m.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
    }

    fn labelled(rows: &[(f64, bool)]) -> Dataset {
        Dataset {
            records: rows.iter().map(|&(t, e)| SurvivalRecord { time: t, event: e, covariates: vec![t] }).collect(),
            feature_names: vec!["t".into()],
            provenance: Provenance::Csv { path: PathBuf::new() },
            truth: None,
        }
    }

    #[test]
    fn pairs_have_later_controls() {
        let d = small(0.3, 300, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sampler = RiskSetSampler::new(&d, 2).unwrap();
        for _ in 0..100 {
            let batch = sampler.sample(&d, 32, &mut rng).unwrap();
            assert_eq!(batch.x.shape(), &[32, 2, 3]);
            for b in 0..32 {
                let set = batch.set_labels(b);
                let case = &set[batch.cases[b]];
                let control = &set[1 - batch.cases[b]];
                assert!(case.event);
                assert!(control.time > case.time || (control.time == case.time && !control.event));
            }
        }
    }

    #[test]
    fn single_event_is_always_the_case() {
        let d = labelled(&[(1.0, true), (2.0, false), (3.0, false), (1.0, false), (0.5, false)]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let batch = sample_risk_sets(&d, 4, 4, &mut rng).unwrap();
            for b in 0..4 {
                assert_eq!(batch.indices[b * 4 + batch.cases[b]], 0);
                // the 0.5 censoring is never at risk
                assert!(!batch.indices[b * 4..b * 4 + 4].contains(&4));
            }
        }
        assert!(matches!(sample_risk_sets(&d, 1, 5, &mut rng), Err(Error::InsufficientRiskSet(_))));
        assert!(sample_risk_sets(&d, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn tied_events_are_not_controls() {
        let d = labelled(&[(1.0, true), (1.0, true), (2.0, true)]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let batch = sample_risk_sets(&d, 50, 2, &mut rng).unwrap();
        for b in 0..50 {
            let set = batch.set_labels(b);
            let case = &set[batch.cases[b]];
            let control = &set[1 - batch.cases[b]];
            assert!(control.time > case.time);
        }
    }

    #[test]
    fn case_slot_is_shuffled() {
        let d = small(0.0, 200, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let batch = sample_risk_sets(&d, 400, 4, &mut rng).unwrap();
        let mut counts = [0; 4];
        for &c in &batch.cases {
            counts[c] += 1;
        }
        assert!(counts.iter().all(|&c| c > 60), "{counts:?}");
    }
}
