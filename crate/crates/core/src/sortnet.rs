//! Comparator schedules for odd-even transposition and bitonic sorting
//! networks.
//!
//! Every comparator `(i, j)` has `i < j` and leaves the minimum on wire `i`,
//! so all networks sort ascending.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    OddEven,
    Bitonic,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::OddEven => "odd-even",
            NetworkKind::Bitonic => "bitonic",
        })
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odd-even" | "odd_even" | "oddeven" => Ok(NetworkKind::OddEven),
            "bitonic" => Ok(NetworkKind::Bitonic),
            other => Err(Error::InvalidArgument(format!(
                "unknown network `{other}` (expected odd-even or bitonic)"
            ))),
        }
    }
}

pub type Layer = Vec<(usize, usize)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparatorSchedule {
    kind: NetworkKind,
    n: usize,
    layers: Vec<Layer>,
}

impl ComparatorSchedule {
    pub fn new(kind: NetworkKind, n: usize) -> Result<Self> {
        match kind {
            NetworkKind::OddEven => odd_even_schedule(n),
            NetworkKind::Bitonic => bitonic_schedule(n),
        }
    }

    /// Builds a schedule from explicit layers, checking orientation and
    /// disjointness. Whether it actually sorts is not checked here.
    pub fn from_layers(kind: NetworkKind, n: usize, layers: Vec<Layer>) -> Result<Self> {
        for (l, layer) in layers.iter().enumerate() {
            let mut used = vec![false; n];
            for &(i, j) in layer {
                if !(i < j && j < n) {
                    return Err(Error::InvalidArgument(format!(
                        "layer {l}: comparator ({i},{j}) invalid for {n} wires"
                    )));
                }
                if used[i] || used[j] {
                    return Err(Error::InvalidArgument(format!(
                        "layer {l}: wire reused at ({i},{j})"
                    )));
                }
                used[i] = true;
                used[j] = true;
            }
        }
        Ok(Self { kind, n, layers })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn comparator_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

impl fmt::Display for ComparatorSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, layer) in self.layers.iter().enumerate() {
            write!(f, "{l}:")?;
            for (i, j) in layer {
                write!(f, " ({i},{j})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Odd-even transposition network: `n` layers alternating between the pairs
/// `(0,1),(2,3),…` and `(1,2),(3,4),…`. For `n = 2` the odd layer is empty.
pub fn odd_even_schedule(n: usize) -> Result<ComparatorSchedule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "odd-even network needs n >= 2, got {n}"
        )));
    }
    let layers = (0..n)
        .map(|l| {
            (l % 2..n - 1)
                .step_by(2)
                .map(|i| (i, i + 1))
                .collect::<Layer>()
        })
        .collect();
    Ok(ComparatorSchedule {
        kind: NetworkKind::OddEven,
        n,
        layers,
    })
}

/// Bitonic sorter for a power-of-two `n`.
///
/// Each merge stage opens with a mirrored layer (wire `i` against wire
/// `block_end - i`) instead of the textbook direction flags, which keeps every
/// comparator ascending.
pub fn bitonic_schedule(n: usize) -> Result<ComparatorSchedule> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "bitonic network needs a power of two >= 2, got {n}"
        )));
    }
    let mut layers = Vec::new();
    let mut block = 2;
    while block <= n {
        let mirror: Layer = (0..n)
            .filter_map(|i| {
                let partner = i ^ (block - 1);
                (partner > i).then_some((i, partner))
            })
            .collect();
        layers.push(mirror);
        let mut stride = block / 4;
        while stride >= 1 {
            let layer: Layer = (0..n)
                .filter_map(|i| {
                    let partner = i ^ stride;
                    (partner > i).then_some((i, partner))
                })
                .collect();
            layers.push(layer);
            stride /= 2;
        }
        block *= 2;
    }
    Ok(ComparatorSchedule {
        kind: NetworkKind::Bitonic,
        n,
        layers,
    })
}

/// Runs the schedule with exact comparators.
///
/// Returns the ascending values and, for each input position, the rank it
/// ends up at. Equal values are never swapped.
pub fn hard_sort(schedule: &ComparatorSchedule, values: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    if values.len() != schedule.n {
        return Err(Error::Shape(format!(
            "schedule has {} wires, got {} values",
            schedule.n,
            values.len()
        )));
    }
    let mut wires: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
    for layer in &schedule.layers {
        for &(i, j) in layer {
            if wires[i].0 > wires[j].0 {
                wires.swap(i, j);
            }
        }
    }
    let mut permutation = vec![0; values.len()];
    for (rank, &(_, origin)) in wires.iter().enumerate() {
        permutation[origin] = rank;
    }
    Ok((wires.into_iter().map(|(v, _)| v).collect(), permutation))
}

/// Checks the zero-one principle by pushing every binary input through the
/// network. Only practical for small `n` (2^n inputs).
pub fn sorts_all_binary(schedule: &ComparatorSchedule) -> bool {
    let n = schedule.n;
    assert!(n < 32, "exhaustive binary check limited to n < 32");
    let all = (1u64 << n) - 1;
    (0..=all).all(|input| {
        let mut bits = input;
        for layer in &schedule.layers {
            for &(i, j) in layer {
                let bi = (bits >> i) & 1;
                let bj = (bits >> j) & 1;
                if bi > bj {
                    bits ^= (1 << i) | (1 << j);
                }
            }
        }
        let ones = input.count_ones() as usize;
        bits == all & !((1u64 << (n - ones)) - 1)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<f64>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, (n - 1) as f64);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn odd_even_small_cases() {
        let s2 = odd_even_schedule(2).unwrap();
        // the odd layer of a two-wire network has nothing to compare
        assert_eq!(s2.layers(), &[vec![(0, 1)], vec![]]);
        let s3 = odd_even_schedule(3).unwrap();
        assert_eq!(s3.layers(), &[vec![(0, 1)], vec![(1, 2)], vec![(0, 1)]]);
        for p in permutations(3) {
            let (sorted, _) = hard_sort(&s3, &p).unwrap();
            assert_eq!(sorted, vec![0.0, 1.0, 2.0]);
        }
        assert!(odd_even_schedule(1).is_err());
    }

    #[test]
    fn odd_even_eight_matches_figure_pattern() {
        let s = odd_even_schedule(8).unwrap();
        assert_eq!(s.layers().len(), 8);
        for (l, layer) in s.layers().iter().enumerate() {
            let expected: Layer = if l % 2 == 0 {
                vec![(0, 1), (2, 3), (4, 5), (6, 7)]
            } else {
                vec![(1, 2), (3, 4), (5, 6)]
            };
            assert_eq!(layer, &expected);
        }
        assert!(sorts_all_binary(&s));
    }

    #[test]
    fn bitonic_layer_counts_and_sorting() {
        assert_eq!(bitonic_schedule(2).unwrap().layers(), &[vec![(0, 1)]]);
        for (n, layers) in [(4, 3), (8, 6), (16, 10)] {
            let s = bitonic_schedule(n).unwrap();
            assert_eq!(s.layers().len(), layers);
            assert!(s.layers().iter().all(|l| l.len() == n / 2));
            assert!(sorts_all_binary(&s), "bitonic {n}");
        }
        assert!(bitonic_schedule(6).is_err());
        assert!(bitonic_schedule(1).is_err());
    }

    #[test]
    fn bitonic_eight_opens_with_figure_mirrors() {
        let s = bitonic_schedule(8).unwrap();
        assert_eq!(s.layers()[3], vec![(0, 7), (1, 6), (2, 5), (3, 4)]);
    }

    #[test]
    fn layers_are_disjoint_and_oriented() {
        for n in 2..=12 {
            let s = odd_even_schedule(n).unwrap();
            assert!(ComparatorSchedule::from_layers(s.kind(), n, s.layers().to_vec()).is_ok());
        }
        for n in [2, 4, 8, 16, 32] {
            let s = bitonic_schedule(n).unwrap();
            assert!(ComparatorSchedule::from_layers(s.kind(), n, s.layers().to_vec()).is_ok());
        }
        assert!(ComparatorSchedule::from_layers(NetworkKind::OddEven, 3, vec![vec![(0, 1), (1, 2)]]).is_err());
        assert!(ComparatorSchedule::from_layers(NetworkKind::OddEven, 3, vec![vec![(2, 1)]]).is_err());
    }

    #[test]
    fn hard_sort_examples() {
        let s = odd_even_schedule(3).unwrap();
        let (sorted, perm) = hard_sort(&s, &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(sorted, vec![1.0, 2.0, 3.0]);
        assert_eq!(perm, vec![2, 0, 1]);
        let (_, perm) = hard_sort(&s, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
        assert!(hard_sort(&s, &[1.0]).is_err());
    }

    #[test]
    fn hard_sort_agrees_with_library_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..1000 {
            let kind = if trial % 2 == 0 { NetworkKind::OddEven } else { NetworkKind::Bitonic };
            let n = match kind {
                NetworkKind::OddEven => rng.random_range(2..20),
                NetworkKind::Bitonic => 1 << rng.random_range(1..6),
            };
            let s = ComparatorSchedule::new(kind, n).unwrap();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (sorted, perm) = hard_sort(&s, &values).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let expected: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            assert_eq!(sorted, expected);
            for (rank, &i) in order.iter().enumerate() {
                assert_eq!(perm[i], rank);
            }
        }
    }

    #[test]
    fn display_format() {
        let text = odd_even_schedule(3).unwrap().to_string();
        assert_eq!(text, "0: (0,1)\n1: (1,2)\n2: (0,1)\n");
        assert_eq!("bitonic".parse::<NetworkKind>().unwrap(), NetworkKind::Bitonic);
        assert!("aks".parse::<NetworkKind>().is_err());
    }
}
