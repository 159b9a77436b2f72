//! Relaxed execution of a comparator schedule.
//!
//! Each layer becomes a doubly-stochastic block matrix built from the values
//! currently on the wires. The returned permutation matrix has one row per
//! input element and one column per output rank, so entry `(i, j)` is the
//! probability that input `i` lands at rank `j`. The running product is
//! accumulated by left-multiplying with each transposed layer matrix and
//! transposing once at the end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Sigmoid, Var};
use crate::error::{Error, Result};
use crate::sortnet::{ComparatorSchedule, NetworkKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationKind {
    Logistic,
    Cauchy,
}

impl fmt::Display for RelaxationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelaxationKind::Logistic => "logistic",
            RelaxationKind::Cauchy => "cauchy",
        })
    }
}

impl FromStr for RelaxationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(RelaxationKind::Logistic),
            "cauchy" => Ok(RelaxationKind::Cauchy),
            other => Err(Error::InvalidArgument(format!(
                "unknown relaxation `{other}` (expected logistic or cauchy)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub kind: RelaxationKind,
    pub beta: f64,
}

impl RelaxationConfig {
    pub fn new(kind: RelaxationKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be positive, got {beta}"
            )));
        }
        Ok(Self { kind, beta })
    }

    pub fn logistic(beta: f64) -> Result<Self> {
        Self::new(RelaxationKind::Logistic, beta)
    }

    pub fn cauchy(beta: f64) -> Result<Self> {
        Self::new(RelaxationKind::Cauchy, beta)
    }

    pub fn sigmoid(&self) -> Sigmoid {
        match self.kind {
            RelaxationKind::Logistic => Sigmoid::Logistic { beta: self.beta },
            RelaxationKind::Cauchy => Sigmoid::Cauchy { beta: self.beta },
        }
    }
}

/// Doubly-stochastic relaxation of the sorting permutation.
#[derive(Clone, Copy, Debug)]
pub struct RelaxedPermutation<'t> {
    /// `[..., n, n]`: row = input element, column = rank.
    pub matrix: Var<'t>,
    /// `[..., n]`: relaxed ascending values, equal to `zᵀ P`.
    pub relaxed_sorted: Var<'t>,
}

/// Relaxed swap matrix of one layer for wire values `z` (shape `[..., n]`).
pub fn layer_matrix<'t>(
    layer: &[(usize, usize)],
    z: Var<'t>,
    relax: RelaxationConfig,
) -> Result<Var<'t>> {
    z.tape().swap_matrix(z, layer, relax.sigmoid())
}

/// Runs `schedule` on `z` (shape `[n]` or `[batch, n]`) with relaxed
/// conditional swaps.
///
/// The values fed to each layer are the relaxed min/max outputs of the
/// previous one, i.e. `a ← a · P_l`, which on a compared pair gives
/// `a_i σ(a_j − a_i) + a_j σ(a_i − a_j)` on the lower wire.
pub fn relaxed_sort<'t>(
    schedule: &ComparatorSchedule,
    z: Var<'t>,
    relax: RelaxationConfig,
) -> Result<RelaxedPermutation<'t>> {
    let shape = z.shape();
    let n = schedule.n();
    if shape.last() != Some(&n) || shape.len() > 2 {
        return Err(Error::Shape(format!(
            "relaxed sort over {n} wires got input of shape {shape:?}"
        )));
    }
    let mut row_shape = shape.clone();
    row_shape.insert(row_shape.len() - 1, 1);

    let mut values = z;
    let mut running: Option<Var<'t>> = None;
    for layer in schedule.layers() {
        let p_l = layer_matrix(layer, values, relax)?;
        let p_l_t = p_l.transpose()?;
        running = Some(match running {
            None => p_l_t,
            Some(acc) => p_l_t.matmul(acc)?,
        });
        values = values.reshape(&row_shape)?.matmul(p_l)?.reshape(&shape)?;
    }
    let matrix = match running {
        Some(acc) => acc.transpose()?,
        None => unreachable!("schedules always have at least one layer"),
    };
    Ok(RelaxedPermutation {
        matrix,
        relaxed_sorted: values,
    })
}

/// Steepness schedule tied to the risk-set size: `2n` for odd-even networks
/// and `log2(n) (1 + log2(n))` for bitonic ones.
pub fn default_beta(kind: NetworkKind, n: usize) -> Result<f64> {
    match kind {
        NetworkKind::OddEven if n >= 2 => Ok(2.0 * n as f64),
        NetworkKind::Bitonic if n >= 2 && n.is_power_of_two() => {
            let lg = n.trailing_zeros() as f64;
            Ok(lg * (1.0 + lg))
        }
        _ => Err(Error::InvalidArgument(format!(
            "no default steepness for {kind} with n = {n}"
        ))),
    }
}
