//! Social graphs: finite explicit adjacency plus procedurally defined
//! bounded-degree families that are never materialized.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertex label. Signed so that both `1, 2, 3, ...` and `..., -1, 0, 1, ...`
/// indexed families share one representation.
pub type VertexId = i64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid graph parameter: {0}")]
    InvalidParameter(String),
    #[error("explicit adjacency is not symmetric: {0} -> {1} has no reverse entry")]
    Asymmetric(VertexId, VertexId),
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("edge ({0}, {1}) is not a social edge")]
    NotAnEdge(VertexId, VertexId),
    #[error("graph is not regular on the sampled vertices: degree {0} at {1}, degree {2} at {3}")]
    NotRegular(usize, VertexId, usize, VertexId),
    #[error("edge sample is empty")]
    EmptySample,
    #[error("vertex {0} appears in more than one matched pair")]
    NotAMatching(VertexId),
}

/// Undirected edge stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(VertexId, VertexId)", into = "(VertexId, VertexId)")]
pub struct Edge {
    lo: VertexId,
    hi: VertexId,
}

impl Edge {
    pub fn new(a: VertexId, b: VertexId) -> Result<Self, GraphError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Edge { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Ok(Edge { lo: b, hi: a }),
            std::cmp::Ordering::Equal => Err(GraphError::SelfLoop(a)),
        }
    }

    pub fn lo(&self) -> VertexId {
        self.lo
    }

    pub fn hi(&self) -> VertexId {
        self.hi
    }

    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.lo, self.hi)
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.lo == v || self.hi == v
    }
}

impl TryFrom<(VertexId, VertexId)> for Edge {
    type Error = GraphError;

    fn try_from((a, b): (VertexId, VertexId)) -> Result<Self, Self::Error> {
        Edge::new(a, b)
    }
}

impl From<Edge> for (VertexId, VertexId) {
    fn from(e: Edge) -> Self {
        (e.lo, e.hi)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

pub type EdgeSet = BTreeSet<Edge>;

/// True when no vertex appears in two edges. The empty set is a matching.
pub fn is_matching<'a>(edges: impl IntoIterator<Item = &'a Edge>) -> bool {
    let mut seen = BTreeSet::new();
    edges
        .into_iter()
        .all(|e| seen.insert(e.lo) && seen.insert(e.hi))
}

/// A set of pairwise nonadjacent edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Edge>", into = "Vec<Edge>")]
pub struct Matching(EdgeSet);

impl Matching {
    pub fn new(edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        let mut set = EdgeSet::new();
        let mut seen = BTreeSet::new();
        for e in edges {
            for v in [e.lo, e.hi] {
                if !seen.insert(v) {
                    return Err(GraphError::NotAMatching(v));
                }
            }
            set.insert(e);
        }
        Ok(Matching(set))
    }

    pub fn empty() -> Self {
        Matching(EdgeSet::new())
    }

    pub fn single(e: Edge) -> Self {
        Matching(std::iter::once(e).collect())
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Edge> {
        self.0.iter()
    }
}

impl TryFrom<Vec<Edge>> for Matching {
    type Error = GraphError;

    fn try_from(v: Vec<Edge>) -> Result<Self, Self::Error> {
        Matching::new(v)
    }
}

impl From<Matching> for Vec<Edge> {
    fn from(m: Matching) -> Self {
        m.0.into_iter().collect()
    }
}

/// Family descriptor as it appears in scenario JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    /// Half-infinite path on `1, 2, 3, ...` with edges `(i, i+1)`.
    Path,
    /// Bi-infinite path on the integers.
    Bipath,
    /// Complete graph on `1..=n`.
    Complete { n: i64 },
    /// Cocktail-party graph on `1..=2m`: complete minus the perfect matching
    /// `(1,2), (3,4), ...`.
    Cocktail { m: i64 },
    /// Circulant on the integers, `i ~ i±1, ..., i±k`.
    Circulant { k: i64 },
    /// Finite path `1 - 2 - ... - n`.
    FinitePath { n: i64 },
    /// Explicit adjacency list. Every listed vertex exists, even if isolated.
    Explicit {
        #[serde(with = "vertex_keyed")]
        adjacency: BTreeMap<VertexId, Vec<VertexId>>,
    },
}

/// JSON object keys are strings; vertex-keyed maps parse them as integers.
pub(crate) mod vertex_keyed {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::VertexId;

    pub fn serialize<T: Serialize, S: Serializer>(
        map: &BTreeMap<VertexId, T>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let strs: BTreeMap<String, &T> = map.iter().map(|(k, v)| (k.to_string(), v)).collect();
        strs.serialize(ser)
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<VertexId, T>, D::Error> {
        BTreeMap::<String, T>::deserialize(de)?
            .into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<VertexId>()
                    .map(|id| (id, v))
                    .map_err(|_| D::Error::custom(format!("vertex key '{k}' is not an integer")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    HalfPath,
    BiPath,
    Complete(i64),
    Cocktail(i64),
    Circulant(i64),
    FinitePath(i64),
    Explicit(BTreeMap<VertexId, Vec<VertexId>>),
}

/// Immutable undirected social graph with a declared degree bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    family: Family,
    degree_bound: usize,
}

pub fn make_graph(spec: &GraphSpec) -> Result<SocialGraph, GraphError> {
    let positive = |name: &str, v: i64| {
        if v >= 1 {
            Ok(v)
        } else {
            Err(GraphError::InvalidParameter(format!("{name} must be >= 1, got {v}")))
        }
    };
    let (family, degree_bound) = match spec {
        GraphSpec::Path => (Family::HalfPath, 2),
        GraphSpec::Bipath => (Family::BiPath, 2),
        GraphSpec::Complete { n } => {
            let n = positive("n", *n)?;
            (Family::Complete(n), (n - 1) as usize)
        }
        GraphSpec::Cocktail { m } => {
            let m = positive("m", *m)?;
            (Family::Cocktail(m), (2 * m - 2) as usize)
        }
        GraphSpec::Circulant { k } => {
            let k = positive("k", *k)?;
            (Family::Circulant(k), (2 * k) as usize)
        }
        GraphSpec::FinitePath { n } => {
            let n = positive("n", *n)?;
            (Family::FinitePath(n), if n >= 3 { 2 } else { (n - 1) as usize })
        }
        GraphSpec::Explicit { adjacency } => {
            let mut adj: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
            for (&v, nbrs) in adjacency {
                let mut nbrs = nbrs.clone();
                nbrs.sort_unstable();
                nbrs.dedup();
                if nbrs.binary_search(&v).is_ok() {
                    return Err(GraphError::SelfLoop(v));
                }
                adj.insert(v, nbrs);
            }
            for (&v, nbrs) in &adj {
                for &u in nbrs {
                    let back = adj.get(&u).is_some_and(|b| b.binary_search(&v).is_ok());
                    if !back {
                        return Err(GraphError::Asymmetric(v, u));
                    }
                }
            }
            let bound = adj.values().map(Vec::len).max().unwrap_or(0);
            (Family::Explicit(adj), bound)
        }
    };
    Ok(SocialGraph { family, degree_bound })
}

impl SocialGraph {
    pub fn from_edges(
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let mut adjacency: BTreeMap<VertexId, Vec<VertexId>> =
            vertices.into_iter().map(|v| (v, Vec::new())).collect();
        for e in edges {
            adjacency.entry(e.lo).or_default().push(e.hi);
            adjacency.entry(e.hi).or_default().push(e.lo);
        }
        make_graph(&GraphSpec::Explicit { adjacency })
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn is_finite(&self) -> bool {
        matches!(
            self.family,
            Family::Complete(_) | Family::Cocktail(_) | Family::FinitePath(_) | Family::Explicit(_)
        )
    }

    /// True for the families whose vertex ids enumerate a path in order.
    pub fn is_path_family(&self) -> bool {
        matches!(self.family, Family::HalfPath | Family::BiPath | Family::FinitePath(_))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match &self.family {
            Family::HalfPath => v >= 1,
            Family::BiPath | Family::Circulant(_) => true,
            Family::Complete(n) | Family::FinitePath(n) => (1..=*n).contains(&v),
            Family::Cocktail(m) => (1..=2 * m).contains(&v),
            Family::Explicit(adj) => adj.contains_key(&v),
        }
    }

    /// All vertices of a finite graph in ascending order; `None` for infinite families.
    pub fn vertices(&self) -> Option<Vec<VertexId>> {
        match &self.family {
            Family::Complete(n) | Family::FinitePath(n) => Some((1..=*n).collect()),
            Family::Cocktail(m) => Some((1..=2 * m).collect()),
            Family::Explicit(adj) => Some(adj.keys().copied().collect()),
            _ => None,
        }
    }

    /// Neighbors of `v` in ascending order. Empty if `v` is not a vertex.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        if !self.contains(v) {
            return Vec::new();
        }
        match &self.family {
            Family::HalfPath => {
                if v == 1 {
                    vec![2]
                } else {
                    vec![v - 1, v + 1]
                }
            }
            Family::BiPath => vec![v - 1, v + 1],
            Family::Circulant(k) => (1..=*k)
                .rev()
                .map(|s| v - s)
                .chain((1..=*k).map(|s| v + s))
                .collect(),
            Family::Complete(n) => (1..=*n).filter(|&u| u != v).collect(),
            Family::Cocktail(m) => {
                let partner = cocktail_partner(v);
                (1..=2 * m).filter(|&u| u != v && u != partner).collect()
            }
            Family::FinitePath(n) => [v - 1, v + 1]
                .into_iter()
                .filter(|u| (1..=*n).contains(u))
                .collect(),
            Family::Explicit(adj) => adj[&v].clone(),
        }
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors(v).len()
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        if a == b || !self.contains(a) || !self.contains(b) {
            return false;
        }
        match &self.family {
            Family::HalfPath | Family::BiPath | Family::FinitePath(_) => (a - b).abs() == 1,
            Family::Circulant(k) => (a - b).abs() <= *k,
            Family::Complete(_) => true,
            Family::Cocktail(_) => cocktail_partner(a) != b,
            Family::Explicit(adj) => adj[&a].binary_search(&b).is_ok(),
        }
    }

    /// Edges with both endpoints in `window`, ascending.
    pub fn edges_within(&self, window: &BTreeSet<VertexId>) -> Vec<Edge> {
        let mut out = Vec::new();
        for &v in window {
            for u in self.neighbors(v) {
                if u > v && window.contains(&u) {
                    out.push(Edge { lo: v, hi: u });
                }
            }
        }
        out
    }

    /// All edges of a finite graph.
    pub fn edges(&self) -> Option<Vec<Edge>> {
        self.vertices()
            .map(|vs| self.edges_within(&vs.into_iter().collect()))
    }

    /// Edge sample that determines the global minimum of the common-neighbor
    /// count. One representative per edge orbit for the vertex-transitive
    /// families, every edge for finite ones, `None` for the half-infinite path.
    pub fn orbit_edges(&self) -> Option<EdgeSet> {
        let e = |a, b| Edge { lo: a, hi: b };
        match &self.family {
            Family::HalfPath => None,
            Family::BiPath => Some([e(0, 1)].into()),
            Family::Circulant(k) => Some((1..=*k).map(|s| e(0, s)).collect()),
            Family::Complete(1) => Some(EdgeSet::new()),
            Family::Complete(_) => Some([e(1, 2)].into()),
            Family::Cocktail(1) => Some(EdgeSet::new()),
            Family::Cocktail(_) => Some([e(1, 3)].into()),
            Family::FinitePath(_) | Family::Explicit(_) => {
                self.edges().map(|v| v.into_iter().collect())
            }
        }
    }
}

fn cocktail_partner(v: VertexId) -> VertexId {
    if v % 2 == 1 { v + 1 } else { v - 1 }
}

/// `neighbors(i) ∪ {i}`.
pub fn closed_neighborhood(g: &SocialGraph, i: VertexId) -> BTreeSet<VertexId> {
    let mut out: BTreeSet<VertexId> = g.neighbors(i).into_iter().collect();
    out.insert(i);
    out
}

/// Every vertex within graph distance `radius` of `targets`.
pub fn ball(g: &SocialGraph, targets: &BTreeSet<VertexId>, radius: usize) -> BTreeSet<VertexId> {
    let mut seen: BTreeSet<VertexId> = targets.clone();
    let mut frontier: VecDeque<(VertexId, usize)> = targets.iter().map(|&v| (v, 0)).collect();
    while let Some((v, d)) = frontier.pop_front() {
        if d == radius {
            continue;
        }
        for u in g.neighbors(v) {
            if seen.insert(u) {
                frontier.push_back((u, d + 1));
            }
        }
    }
    seen
}

/// Returns `(r, margin)` where `r` is the closed-neighborhood size and
/// `margin = min over sampled edges of 3·|N_i ∩ N_j| − 2r`.
pub fn regularity_margin(g: &SocialGraph, sample_edges: &EdgeSet) -> Result<(i64, i64), GraphError> {
    let first = sample_edges.iter().next().ok_or(GraphError::EmptySample)?;
    let degree = g.degree(first.lo);
    for e in sample_edges {
        if !g.has_edge(e.lo, e.hi) {
            return Err(GraphError::NotAnEdge(e.lo, e.hi));
        }
        for v in [e.lo, e.hi] {
            let dv = g.degree(v);
            if dv != degree {
                return Err(GraphError::NotRegular(degree, first.lo, dv, v));
            }
        }
    }
    let r = degree as i64 + 1;
    let margin = sample_edges
        .iter()
        .map(|e| {
            let common = closed_neighborhood(g, e.lo)
                .intersection(&closed_neighborhood(g, e.hi))
                .count() as i64;
            3 * common - 2 * r
        })
        .min()
        .expect("nonempty sample");
    Ok((r, margin))
}
