//! The mixed HK update: opinion graph, profile, and one synchronous step
//! under group or pair interaction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, EdgeSet, Matching, SocialGraph, VertexId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("vertex {0} is not active")]
    Inactive(VertexId),
    #[error("duplicate vertex {0} in opinion state")]
    Duplicate(VertexId),
    #[error("opinion of vertex {vertex} has dimension {got}, expected {expected}")]
    Dimension { vertex: VertexId, got: usize, expected: usize },
    #[error("opinion of vertex {0} has a non-finite coordinate")]
    NonFinite(VertexId),
    #[error("no stubbornness value for active vertex {0}")]
    MissingAlpha(VertexId),
    #[error("stubbornness {1} at vertex {0} is outside [0, 1]")]
    AlphaRange(VertexId, f64),
    #[error("rate mu = {0} is outside (0, 1/2]")]
    InvalidMu(f64),
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Group,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub epsilon: f64,
    pub mode: Mode,
}

impl ModelParams {
    pub fn new(epsilon: f64, mode: Mode) -> Result<Self, DynamicsError> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(DynamicsError::InvalidEpsilon(epsilon));
        }
        Ok(ModelParams { epsilon, mode })
    }
}

/// Opinions of a finite set of active vertices, each a vector in `R^d`.
///
/// Vertices are kept in ascending order with coordinates stored row-major,
/// so iteration order is always ascending vertex id.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState {
    ids: Vec<VertexId>,
    dim: usize,
    coords: Vec<f64>,
}

impl OpinionState {
    pub fn new(
        dim: usize,
        entries: impl IntoIterator<Item = (VertexId, Vec<f64>)>,
    ) -> Result<Self, DynamicsError> {
        let mut sorted: Vec<(VertexId, Vec<f64>)> = entries.into_iter().collect();
        sorted.sort_by_key(|(v, _)| *v);
        let mut ids = Vec::with_capacity(sorted.len());
        let mut coords = Vec::with_capacity(sorted.len() * dim);
        for (v, x) in sorted {
            if ids.last() == Some(&v) {
                return Err(DynamicsError::Duplicate(v));
            }
            if x.len() != dim {
                return Err(DynamicsError::Dimension { vertex: v, got: x.len(), expected: dim });
            }
            if x.iter().any(|c| !c.is_finite()) {
                return Err(DynamicsError::NonFinite(v));
            }
            ids.push(v);
            coords.extend_from_slice(&x);
        }
        Ok(OpinionState { ids, dim, coords })
    }

    /// One-dimensional state from `(vertex, value)` pairs.
    pub fn scalar(entries: impl IntoIterator<Item = (VertexId, f64)>) -> Result<Self, DynamicsError> {
        Self::new(1, entries.into_iter().map(|(v, x)| (v, vec![x])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.ids.binary_search(&v).ok()
    }

    pub fn is_active(&self, v: VertexId) -> bool {
        self.index_of(v).is_some()
    }

    pub fn get(&self, v: VertexId) -> Option<&[f64]> {
        self.index_of(v).map(|k| self.row(k))
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, &[f64])> {
        self.ids.iter().copied().zip(self.coords.chunks_exact(self.dim.max(1)))
    }

    /// Same vertex set, same dimension.
    pub fn same_support(&self, other: &OpinionState) -> bool {
        self.dim == other.dim && self.ids == other.ids
    }

    /// Euclidean distance between the opinions of two active vertices.
    pub fn distance(&self, a: VertexId, b: VertexId) -> Result<f64, DynamicsError> {
        let xa = self.get(a).ok_or(DynamicsError::Inactive(a))?;
        let xb = self.get(b).ok_or(DynamicsError::Inactive(b))?;
        Ok(euclidean(xa, xb))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Stubbornness values for one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlphaDraw(BTreeMap<VertexId, f64>);

impl AlphaDraw {
    pub fn new(values: impl IntoIterator<Item = (VertexId, f64)>) -> Result<Self, DynamicsError> {
        let mut map = BTreeMap::new();
        for (v, a) in values {
            if !(0.0..=1.0).contains(&a) {
                return Err(DynamicsError::AlphaRange(v, a));
            }
            map.insert(v, a);
        }
        Ok(AlphaDraw(map))
    }

    /// The same value on every listed vertex.
    pub fn uniform(vertices: impl IntoIterator<Item = VertexId>, a: f64) -> Result<Self, DynamicsError> {
        Self::new(vertices.into_iter().map(|v| (v, a)))
    }

    pub fn get(&self, v: VertexId) -> Option<f64> {
        self.0.get(&v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.0.iter().map(|(&v, &a)| (v, a))
    }

    fn require(&self, v: VertexId) -> Result<f64, DynamicsError> {
        self.get(v).ok_or(DynamicsError::MissingAlpha(v))
    }
}

/// Candidates whose endpoints are within `eps` of each other. Inclusive.
pub fn opinion_edges<'a>(
    s: &OpinionState,
    eps: f64,
    candidates: impl IntoIterator<Item = &'a Edge>,
) -> Result<EdgeSet, DynamicsError> {
    let mut out = EdgeSet::new();
    for e in candidates {
        if s.distance(e.lo(), e.hi())? <= eps {
            out.insert(*e);
        }
    }
    Ok(out)
}

/// `update_edges ∩ E ∩ opinion graph`. Edges touching inactive vertices are dropped.
pub fn profile<'a>(
    g: &SocialGraph,
    update_edges: impl IntoIterator<Item = &'a Edge>,
    s: &OpinionState,
    eps: f64,
) -> EdgeSet {
    update_edges
        .into_iter()
        .filter(|e| g.has_edge(e.lo(), e.hi()))
        .filter(|e| matches!(s.distance(e.lo(), e.hi()), Ok(d) if d <= eps))
        .copied()
        .collect()
}

/// Writes `alpha·x_i + (1 − alpha)·mean(members)` into `out`, evaluated as
/// `x_i + (1 − alpha)·(mean − x_i)` so that a vertex whose mean equals its own
/// opinion keeps it bit for bit. `members` must be sorted ascending by vertex
/// id; the sum runs in that order and is divided once.
fn mix_into(s: &OpinionState, own: usize, members: &[usize], alpha: f64, out: &mut [f64]) {
    let d = s.dim;
    out.fill(0.0);
    for &k in members {
        for (acc, x) in out.iter_mut().zip(s.row(k)) {
            *acc += *x;
        }
    }
    let count = members.len() as f64;
    let xi = s.row(own);
    for c in 0..d {
        let mean = out[c] / count;
        out[c] = xi[c] + (1.0 - alpha) * (mean - xi[c]);
    }
}

/// Group interaction on the active set: every active vertex mixes its opinion
/// with the mean over itself and its active social neighbors within `eps`.
/// Neighbors outside the active set are ignored.
pub fn step_group(
    s: &OpinionState,
    g: &SocialGraph,
    alpha: &AlphaDraw,
    eps: f64,
) -> Result<OpinionState, DynamicsError> {
    let mut next = s.clone();
    let mut members: Vec<usize> = Vec::with_capacity(g.degree_bound() + 1);
    let mut buf = vec![0.0; s.dim];
    for (k, &i) in s.ids.iter().enumerate() {
        let a = alpha.require(i)?;
        members.clear();
        members.push(k);
        let xi = s.row(k);
        for j in g.neighbors(i) {
            if let Some(kj) = s.index_of(j) {
                if euclidean(xi, s.row(kj)) <= eps {
                    members.push(kj);
                }
            }
        }
        members.sort_unstable();
        mix_into(s, k, &members, a, &mut buf);
        next.coords[k * s.dim..(k + 1) * s.dim].copy_from_slice(&buf);
    }
    Ok(next)
}

/// Pair interaction: each matched social edge within `eps` moves both
/// endpoints toward their midpoint, each at its own stubbornness. Every
/// other vertex keeps its opinion.
pub fn step_pair(
    s: &OpinionState,
    g: &SocialGraph,
    m: &Matching,
    alpha: &AlphaDraw,
    eps: f64,
) -> Result<OpinionState, DynamicsError> {
    let mut next = s.clone();
    let mut buf = vec![0.0; s.dim];
    for e in m.iter() {
        let (i, j) = e.endpoints();
        let ki = s.index_of(i).ok_or(DynamicsError::Inactive(i))?;
        let kj = s.index_of(j).ok_or(DynamicsError::Inactive(j))?;
        if !g.has_edge(i, j) || euclidean(s.row(ki), s.row(kj)) > eps {
            continue;
        }
        let pair = [ki, kj];
        for (own, v) in [(ki, i), (kj, j)] {
            mix_into(s, own, &pair, alpha.require(v)?, &mut buf);
            next.coords[own * s.dim..(own + 1) * s.dim].copy_from_slice(&buf);
        }
    }
    Ok(next)
}

/// Deffuant rate `mu` expressed as the equivalent stubbornness `1 − 2mu`.
pub fn deffuant_alpha(mu: f64) -> Result<f64, DynamicsError> {
    if mu > 0.0 && mu <= 0.5 {
        Ok(1.0 - 2.0 * mu)
    } else {
        Err(DynamicsError::InvalidMu(mu))
    }
}

/// One Deffuant interaction on `edge`.
pub fn deffuant_step(
    s: &OpinionState,
    g: &SocialGraph,
    edge: Edge,
    mu: f64,
    eps: f64,
) -> Result<OpinionState, DynamicsError> {
    let a = deffuant_alpha(mu)?;
    let alpha = AlphaDraw::uniform([edge.lo(), edge.hi()], a)?;
    step_pair(s, g, &Matching::single(edge), &alpha, eps)
}
