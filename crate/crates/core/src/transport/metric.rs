//! Bounded transforms of the alphabet metric and product metrics on pairs.

use serde::{Deserialize, Serialize};

use crate::measure::Alphabet;

/// `d / (1 + d)`: bounded by 1 and topologically equivalent to `d`.
#[inline]
pub fn tilde(d: f64) -> f64 {
    d / (1.0 + d)
}

pub fn tilde_metric(alphabet: &Alphabet, i: usize, j: usize) -> f64 {
    tilde(alphabet.distance(i, j))
}

/// Whether the alphabet metric is used as is or through [`tilde`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BaseMetric {
    Raw,
    #[default]
    Tilde,
}

impl BaseMetric {
    pub fn distance(self, alphabet: &Alphabet, i: usize, j: usize) -> f64 {
        let d = alphabet.distance(i, j);
        match self {
            BaseMetric::Raw => d,
            BaseMetric::Tilde => tilde(d),
        }
    }
}

/// How the two coordinate distances of a pair are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    Max,
    Sum,
}

/// Ground metric on `Σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairGround {
    pub base: BaseMetric,
    pub mode: PairMode,
}

impl PairGround {
    /// `d̃(x₁,y₁) + d̃(x₂,y₂)`, the ground metric of the couplings.
    pub const TILDE_SUM: PairGround = PairGround {
        base: BaseMetric::Tilde,
        mode: PairMode::Sum,
    };

    /// `max(d̃(x₁,y₁), d̃(x₂,y₂))`.
    pub const TILDE_MAX: PairGround = PairGround {
        base: BaseMetric::Tilde,
        mode: PairMode::Max,
    };

    pub fn distance(self, alphabet: &Alphabet, p: (usize, usize), q: (usize, usize)) -> f64 {
        pair_metric(alphabet, p, q, self.base, self.mode)
    }

    /// Full `k² × k²` distance matrix over row-major cells.
    pub fn matrix(self, alphabet: &Alphabet) -> Vec<Vec<f64>> {
        let k = alphabet.len();
        (0..k * k)
            .map(|a| {
                (0..k * k)
                    .map(|b| self.distance(alphabet, (a / k, a % k), (b / k, b % k)))
                    .collect()
            })
            .collect()
    }
}

pub fn pair_metric(
    alphabet: &Alphabet,
    p: (usize, usize),
    q: (usize, usize),
    base: BaseMetric,
    mode: PairMode,
) -> f64 {
    let first = base.distance(alphabet, p.0, q.0);
    let second = base.distance(alphabet, p.1, q.1);
    match mode {
        PairMode::Max => first.max(second),
        PairMode::Sum => first + second,
    }
}

pub(crate) fn point_matrix(alphabet: &Alphabet, base: BaseMetric) -> Vec<Vec<f64>> {
    let k = alphabet.len();
    (0..k)
        .map(|i| (0..k).map(|j| base.distance(alphabet, i, j)).collect())
        .collect()
}
