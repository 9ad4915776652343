//! Problem encoders: max-cut and 0/1 knapsack to Ising form, and decoding
//! of spin vectors back into problem-level solutions.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ising::{IsingModel, ModelError, SpinVector};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("edge ({i}, {j}) is out of range for {n} nodes")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("self-loop on node {i}")]
    SelfLoop { i: usize },
    #[error("duplicate undirected edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("edge ({i}, {j}) has non-finite weight")]
    NonFiniteWeight { i: usize, j: usize },
    #[error("instance must have at least one node")]
    EmptyGraph,
    #[error("knapsack instance must have at least one item")]
    NoItems,
    #[error("item {index} has non-positive value {value}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("item {index} has non-positive weight {weight}")]
    NonPositiveWeight { index: usize, weight: u64 },
    #[error("capacity must be positive")]
    NonPositiveCapacity,
    #[error("penalty weight must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error("this encoding is not a knapsack encoding")]
    NotKnapsack,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Weighted undirected graph for the max-cut problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxCutInstance {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl MaxCutInstance {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, EncodeError> {
        if n == 0 {
            return Err(EncodeError::EmptyGraph);
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j, w) in &edges {
            if i >= n || j >= n {
                return Err(EncodeError::EdgeOutOfRange { i, j, n });
            }
            if i == j {
                return Err(EncodeError::SelfLoop { i });
            }
            if !w.is_finite() {
                return Err(EncodeError::NonFiniteWeight { i, j });
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(EncodeError::DuplicateEdge { i, j });
            }
        }
        Ok(Self { n, edges })
    }

    /// Dense random instance in the style of hardware benchmarks: every pair
    /// draws an integer coupling coefficient from `j_range` with probability
    /// `density`; zero draws mean "no edge". The edge weight is `-J/2`, so
    /// the encoded coupling matrix reproduces the drawn coefficients.
    pub fn random(
        n: usize,
        j_range: std::ops::RangeInclusive<i64>,
        density: f64,
        seed: u64,
    ) -> Result<Self, EncodeError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if density < 1.0 && !rng.random_bool(density.clamp(0.0, 1.0)) {
                    continue;
                }
                let c = rng.random_range(j_range.clone());
                if c != 0 {
                    edges.push((i, j, -(c as f64) / 2.0));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Cut size: sum over edges of `w * (1 - s_i s_j) / 2`.
    pub fn cut_value(&self, spins: &SpinVector) -> Result<f64, EncodeError> {
        if spins.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                got: spins.len(),
            }
            .into());
        }
        Ok(self
            .edges
            .iter()
            .map(|&(i, j, w)| w * f64::from(1 - spins[i] * spins[j]) / 2.0)
            .sum())
    }
}

/// 0/1 knapsack instance with integer weights and capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    n: usize,
    values: Vec<f64>,
    weights: Vec<u64>,
    capacity: u64,
}

impl KnapsackInstance {
    pub fn new(values: Vec<f64>, weights: Vec<u64>, capacity: u64) -> Result<Self, EncodeError> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(EncodeError::NoItems);
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EncodeError::NonPositiveValue { index, value });
            }
        }
        for (index, &weight) in weights.iter().enumerate() {
            if weight == 0 {
                return Err(EncodeError::NonPositiveWeight { index, weight });
            }
        }
        if capacity == 0 {
            return Err(EncodeError::NonPositiveCapacity);
        }
        let n = values.len();
        Ok(Self {
            n,
            values,
            weights,
            capacity,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Role of one spin in an encoded model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarTag {
    /// Problem-level decision variable (graph node or knapsack item).
    Item(usize),
    /// Binary slack bit with weight `2^b`.
    Slack(u32),
    /// Spin fixed to +1 that carries the field after embedding.
    Ancilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

/// The problem an encoding was built from, kept so spins can be decoded
/// without side tables.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceProblem {
    MaxCut(MaxCutInstance),
    Knapsack(KnapsackInstance),
}

/// An Ising model together with the variable map and decode rules tying
/// spins back to problem-level decisions.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub model: IsingModel,
    pub var_map: Vec<VarTag>,
    pub penalty: f64,
    pub sense: ObjectiveSense,
    pub problem: SourceProblem,
}

impl Encoding {
    pub fn ancilla_index(&self) -> Option<usize> {
        self.var_map.iter().position(|t| *t == VarTag::Ancilla)
    }

    /// Problem-level objective of a full spin assignment: the cut value for
    /// max-cut, the decoded total value for knapsack (0 when infeasible).
    pub fn objective(&self, spins: &SpinVector) -> Result<f64, EncodeError> {
        match &self.problem {
            SourceProblem::MaxCut(g) => g.cut_value(spins),
            SourceProblem::Knapsack(_) => {
                let sol = decode_knapsack(self, spins)?;
                Ok(if sol.feasible { sol.total_value } else { 0.0 })
            }
        }
    }

    pub fn is_feasible(&self, spins: &SpinVector) -> Result<bool, EncodeError> {
        match &self.problem {
            SourceProblem::MaxCut(_) => Ok(true),
            SourceProblem::Knapsack(_) => Ok(decode_knapsack(self, spins)?.feasible),
        }
    }
}

/// Energy of a max-cut encoding is exactly `-CUT_ENERGY_SLOPE * cut`: the
/// coupling term contributes `2 * sum_w - 4 * cut` and the model offset
/// `-2 * sum_w`.
pub const CUT_ENERGY_SLOPE: f64 = 4.0;
/// Constant term of the energy/cut relation after offset folding.
pub const CUT_ENERGY_SHIFT: f64 = 0.0;

/// Encodes max-cut: `J[i][j] = J[j][i] = -2 w_ij` per edge, zero field, and
/// an offset such that `energy(s) = -CUT_ENERGY_SLOPE * cut(s)` exactly, so
/// the energy argmin is the cut argmax.
pub fn encode_maxcut(g: &MaxCutInstance) -> Encoding {
    let n = g.n();
    let mut j = vec![0.0; n * n];
    for &(a, b, w) in g.edges() {
        j[a * n + b] = -2.0 * w;
        j[b * n + a] = -2.0 * w;
    }
    let offset = -2.0 * g.total_weight();
    let model = IsingModel::from_parts_unchecked(n, j, vec![0.0; n], offset);
    Encoding {
        model,
        var_map: (0..n).map(VarTag::Item).collect(),
        penalty: 0.0,
        sense: ObjectiveSense::Maximize,
        problem: SourceProblem::MaxCut(g.clone()),
    }
}

/// Number of slack bits for a capacity: `floor(log2(W)) + 1`, with bit
/// weights `2^0 .. 2^(m-1)` so every slack value in `[0, W]` is exactly
/// representable.
pub fn slack_bits(capacity: u64) -> u32 {
    u64::BITS - capacity.leading_zeros()
}

/// Default penalty weight: twice the largest item value, which makes
/// dropping any over-capacity item always energetically favorable.
pub fn default_penalty(inst: &KnapsackInstance) -> f64 {
    2.0 * inst.max_value()
}

/// Encodes 0/1 knapsack as value cost plus a squared capacity-equality
/// penalty over a binary slack register, then folds the resulting field into
/// the coupling matrix with an ancilla spin so a coupling-only engine path
/// can solve it.
///
/// With `u_k = (1 + s_k)/2` the penalized objective is
///
/// ```text
/// H = -sum_k c_k u_k + lambda * (sum_b 2^b u_slack_b + sum_k w_k u_k - W)^2
/// ```
///
/// expanded into quadratic, linear and constant Ising terms.
pub fn encode_knapsack(inst: &KnapsackInstance, penalty: f64) -> Result<Encoding, EncodeError> {
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(EncodeError::NonPositivePenalty(penalty));
    }
    let n = inst.n();
    let m = slack_bits(inst.capacity());
    let nv = n + m as usize;

    // Linear form L(s) = sum_k alpha_k s_k + beta equal to
    // (used weight + slack - capacity).
    let mut alpha = Vec::with_capacity(nv);
    for &w in inst.weights() {
        alpha.push(w as f64 / 2.0);
    }
    for b in 0..m {
        alpha.push(f64::from(1u32 << b) / 2.0);
    }
    let beta = alpha.iter().sum::<f64>() - inst.capacity() as f64;

    let mut j = vec![0.0; nv * nv];
    let mut h = vec![0.0; nv];
    let mut alpha_sq = 0.0;
    for k in 0..nv {
        alpha_sq += alpha[k] * alpha[k];
        h[k] = -2.0 * penalty * beta * alpha[k];
        for l in 0..nv {
            if l != k {
                j[k * nv + l] = -2.0 * penalty * alpha[k] * alpha[l];
            }
        }
    }
    let mut offset = penalty * (alpha_sq + beta * beta);
    for (k, &c) in inst.values().iter().enumerate() {
        h[k] += c / 2.0;
        offset -= c / 2.0;
    }

    let flat = IsingModel::from_parts_unchecked(nv, j, h, offset);
    let model = flat.embed_field();

    let mut var_map: Vec<VarTag> = (0..n).map(VarTag::Item).collect();
    var_map.extend((0..m).map(VarTag::Slack));
    var_map.push(VarTag::Ancilla);

    Ok(Encoding {
        model,
        var_map,
        penalty,
        sense: ObjectiveSense::Maximize,
        problem: SourceProblem::Knapsack(inst.clone()),
    })
}

/// Decoded knapsack solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSolution {
    pub selected: Vec<usize>,
    pub total_value: f64,
    pub total_weight: f64,
    pub feasible: bool,
}

/// Reads the item spins of a knapsack encoding: item `k` is selected iff its
/// spin is +1. Slack and ancilla spins are ignored.
pub fn decode_knapsack(enc: &Encoding, spins: &SpinVector) -> Result<KnapsackSolution, EncodeError> {
    let SourceProblem::Knapsack(inst) = &enc.problem else {
        return Err(EncodeError::NotKnapsack);
    };
    if spins.len() != enc.model.n() {
        return Err(ModelError::DimensionMismatch {
            expected: enc.model.n(),
            got: spins.len(),
        }
        .into());
    }
    let mut selected = Vec::new();
    let mut total_value = 0.0;
    let mut total_weight = 0u64;
    for (idx, tag) in enc.var_map.iter().enumerate() {
        if let VarTag::Item(k) = *tag {
            if spins[idx] == 1 {
                selected.push(k);
                total_value += inst.values()[k];
                total_weight += inst.weights()[k];
            }
        }
    }
    Ok(KnapsackSolution {
        selected,
        total_value,
        total_weight: total_weight as f64,
        feasible: total_weight <= inst.capacity(),
    })
}
