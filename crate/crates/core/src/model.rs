//! Multilayer perceptron risk model.
//!
//! Parameters live outside any tape as plain tensors; each training step binds
//! them to a fresh tape with [`Mlp::bind`].

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DSRV";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config {
                field: "input_dim".into(),
                msg: "must be at least 1".into(),
            });
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config {
                field: "hidden_sizes".into(),
                msg: "every hidden layer needs at least one unit".into(),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config {
                field: "dropout_rate".into(),
                msg: format!("{} not in [0, 1)", self.dropout_rate),
            });
        }
        Ok(())
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden_sizes);
        sizes.push(1);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Linear>,
}

pub struct BoundMlp<'t> {
    params: Vec<(Var<'t>, Var<'t>)>,
    dropout_rate: f64,
}

impl Mlp {
    /// Glorot-uniform weights and zero biases.
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config
            .dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                Ok(Linear {
                    weight: Tensor::new(vec![fan_in, fan_out], w)?,
                    bias: Tensor::zeros(&[fan_out]),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { config, layers })
    }

    pub fn from_layers(layers: Vec<Linear>, dropout_rate: f64) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::ParamFormat("no layers".into()))?;
        let config = MlpConfig {
            input_dim: first.weight.shape()[0],
            hidden_sizes: layers[..layers.len() - 1].iter().map(|l| l.weight.shape()[1]).collect(),
            dropout_rate,
            seed: 0,
        };
        config.validate()?;
        for (layer, (i, o)) in layers.iter().zip(config.dims()) {
            if layer.weight.shape() != [i, o] || layer.bias.shape() != [o] {
                return Err(Error::ParamFormat(format!(
                    "layer shapes {:?}/{:?} do not chain",
                    layer.weight.shape(),
                    layer.bias.shape()
                )));
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    /// Flat parameter list: weight then bias for each layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundMlp<'t> {
        BoundMlp {
            params: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
            dropout_rate: self.config.dropout_rate,
        }
    }

    /// Evaluation-mode scores for a row-major `[rows, input_dim]` matrix,
    /// computed without a tape.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.config.input_dim;
        if !x.len().is_multiple_of(d) {
            return Err(Error::Shape(format!("{} values is not a multiple of input dim {d}", x.len())));
        }
        let mut act = x.to_vec();
        let mut width = d;
        for (l, layer) in self.layers.iter().enumerate() {
            let out = layer.weight.shape()[1];
            let w = layer.weight.data();
            let rows = act.len() / width;
            let mut next = Vec::with_capacity(rows * out);
            for r in 0..rows {
                let row = &act[r * width..(r + 1) * width];
                for o in 0..out {
                    let mut s = layer.bias.data()[o];
                    for (k, v) in row.iter().enumerate() {
                        s += v * w[k * out + o];
                    }
                    next.push(if l + 1 < self.layers.len() { s.max(0.0) } else { s });
                }
            }
            act = next;
            width = out;
        }
        Ok(act)
    }

    /// Rewrites the first layer so that raw inputs give the scores the model
    /// produced on `(x - mean) / std`.
    pub fn fold_standardization(&mut self, mean: &[f64], std: &[f64]) -> Result<()> {
        let d = self.config.input_dim;
        if mean.len() != d || std.len() != d {
            return Err(Error::Shape(format!("standardization for {} features, model has {d}", mean.len())));
        }
        let first = &mut self.layers[0];
        let out = first.weight.shape()[1];
        let w = first.weight.data_mut();
        let b = first.bias.data_mut();
        for k in 0..d {
            for o in 0..out {
                w[k * out + o] /= std[k];
                b[o] -= mean[k] * w[k * out + o];
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            for dim in l.weight.shape() {
                bytes.extend_from_slice(&(*dim as u32).to_le_bytes());
            }
        }
        for l in &self.layers {
            for v in l.weight.data().iter().chain(l.bias.data()) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::File::create(path)?.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = &bytes[..];
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::ParamFormat("file truncated".into()));
            }
            let (head, rest) = cursor.split_at(n);
            cursor = rest;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(Error::ParamFormat("bad magic".into()));
        }
        let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
        let version = read_u32(take(4)?);
        if version != FORMAT_VERSION as usize {
            return Err(Error::ParamFormat(format!("unsupported version {version}")));
        }
        let count = read_u32(take(4)?);
        if count == 0 || count > 1024 {
            return Err(Error::ParamFormat(format!("implausible layer count {count}")));
        }
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            dims.push((read_u32(take(4)?), read_u32(take(4)?)));
        }
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            Ok(take(n * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let mut layers = Vec::with_capacity(count);
        for (i, o) in dims {
            let weight = Tensor::new(vec![i, o], read_f64s(i * o)?)
                .map_err(|e| Error::ParamFormat(e.to_string()))?;
            let bias = Tensor::new(vec![o], read_f64s(o)?).map_err(|e| Error::ParamFormat(e.to_string()))?;
            layers.push(Linear { weight, bias });
        }
        if !cursor.is_empty() {
            return Err(Error::ParamFormat(format!("{} trailing bytes", cursor.len())));
        }
        Self::from_layers(layers, 0.0)
    }
}

impl<'t> BoundMlp<'t> {
    /// Rebuilds a bound model from variables laid out as in [`Mlp::params`].
    pub fn from_vars(vars: &[Var<'t>], dropout_rate: f64) -> Result<Self> {
        if vars.is_empty() || !vars.len().is_multiple_of(2) {
            return Err(Error::Shape(format!("{} parameter variables do not form layers", vars.len())));
        }
        Ok(Self { params: vars.chunks(2).map(|c| (c[0], c[1])).collect(), dropout_rate })
    }

    /// Leaf variables in the same order as [`Mlp::params`].
    pub fn vars(&self) -> Vec<Var<'t>> {
        self.params.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// Scores for `x` of shape `[..., d]`, returning shape `[...]`. Passing an
    /// RNG turns on inverted dropout after each hidden activation.
    pub fn forward(&self, x: Var<'t>, mut dropout: Option<&mut ChaCha8Rng>) -> Result<Var<'t>> {
        let shape = x.shape();
        let d = self.params[0].0.shape()[0];
        if shape.len() < 2 || shape[shape.len() - 1] != d {
            return Err(Error::Shape(format!("expected [..., {d}] input, got {shape:?}")));
        }
        let mut act = x;
        for (l, &(w, b)) in self.params.iter().enumerate() {
            act = act.matmul(w)?.add(b)?;
            if l + 1 < self.params.len() {
                act = act.relu();
                if let (Some(rng), true) = (dropout.as_deref_mut(), self.dropout_rate > 0.0) {
                    let keep = 1.0 - self.dropout_rate;
                    let mask: Vec<f64> = (0..act.value().len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    act = act.mul(act.tape().constant(Tensor::new(act.shape(), mask)?))?;
                }
            }
        }
        act.reshape(&shape[..shape.len() - 1])
    }
}
