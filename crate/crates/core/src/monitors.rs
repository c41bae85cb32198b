//! Lyapunov-style quantities and one-step contracts.
//!
//! All pair sums run over ordered pairs `(i, j)`, `i != j`. On windowed
//! infinite graphs the sums cover the window only.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Mode, OpinionState, euclidean};
use crate::graph::{Edge, GraphError, SocialGraph, VertexId, regularity_margin};

/// Relative slack on the supermartingale decrease.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Relative slack on the regular-graph contraction bound.
pub const REGULAR_BOUND_TOLERANCE: f64 = 1e-12;
/// Absolute slack on delta-triviality.
pub const DELTA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("states have different vertex sets or dimensions")]
    SupportMismatch,
    #[error("contract {0} does not apply: {1}")]
    Inapplicable(Contract, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Sum of squared opinion distances over ordered pairs.
pub fn z_pair(s: &OpinionState) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            total += sq_dist(s.row(a), s.row(b));
        }
    }
    2.0 * total
}

/// Ordered-pair sum of `min(gap², eps²)` over social edges plus `eps²` for
/// every non-adjacent pair.
pub fn z_group(s: &OpinionState, g: &SocialGraph, eps: f64) -> f64 {
    let eps2 = eps * eps;
    let ids = s.ids();
    let mut total = 0.0;
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            total += if g.has_edge(ids[a], ids[b]) {
                sq_dist(s.row(a), s.row(b)).min(eps2)
            } else {
                eps2
            };
        }
    }
    2.0 * total
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Per-step displacement summary: `(max_i |Δx_i|, Σ_i |Δx_i|²)`.
pub fn displacement(prev: &OpinionState, next: &OpinionState) -> Result<(f64, f64), MonitorError> {
    if !prev.same_support(next) {
        return Err(MonitorError::SupportMismatch);
    }
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for k in 0..prev.len() {
        let d2 = sq_dist(prev.row(k), next.row(k));
        max = max.max(d2.sqrt());
        sum += d2;
    }
    Ok((max, sum))
}

/// `Z(t) − Z(t+1) − 4 Σ_i |x_i(t) − x_i(t+1)|²` with `Z = z_pair` in pair
/// mode and `Z = z_group` in group mode. Also returns `Z(t)`.
pub fn supermartingale_residual(
    prev: &OpinionState,
    next: &OpinionState,
    mode: Mode,
    g: &SocialGraph,
    eps: f64,
) -> Result<(f64, f64), MonitorError> {
    let (_, moved) = displacement(prev, next)?;
    let (z0, z1) = match mode {
        Mode::Pair => (z_pair(prev), z_pair(next)),
        Mode::Group => (z_group(prev, g, eps), z_group(next, g, eps)),
    };
    Ok((z0 - z1 - 4.0 * moved, z0))
}

/// Largest Euclidean gap across `edges`; 0 when empty. Edges with an
/// inactive endpoint are skipped.
pub fn max_edge_gap<'a>(s: &OpinionState, edges: impl IntoIterator<Item = &'a Edge>) -> f64 {
    edges
        .into_iter()
        .filter_map(|e| s.distance(e.lo(), e.hi()).ok())
        .fold(0.0, f64::max)
}

/// Largest gap over all pairs of active vertices.
pub fn diameter(s: &OpinionState) -> f64 {
    let n = s.len();
    let mut best = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            best = best.max(euclidean(s.row(a), s.row(b)));
        }
    }
    best
}

/// Quantities that can be recorded along a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum MonitorKind {
    ZPair,
    ZGroup,
    MaxEdgeGap,
    Diameter,
    MaxDisplacement,
    SumSqDisplacement,
    Residual,
}

impl MonitorKind {
    pub const ALL: [MonitorKind; 7] = [
        MonitorKind::ZPair,
        MonitorKind::ZGroup,
        MonitorKind::MaxEdgeGap,
        MonitorKind::Diameter,
        MonitorKind::MaxDisplacement,
        MonitorKind::SumSqDisplacement,
        MonitorKind::Residual,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MonitorKind::ZPair => "window_z_pair",
            MonitorKind::ZGroup => "window_z_group",
            MonitorKind::MaxEdgeGap => "max_edge_gap",
            MonitorKind::Diameter => "diameter",
            MonitorKind::MaxDisplacement => "max_displacement",
            MonitorKind::SumSqDisplacement => "sum_sq_displacement",
            MonitorKind::Residual => "residual",
        }
    }

    /// Whether the monitor is defined at `t = 0`.
    pub fn needs_previous(&self) -> bool {
        matches!(
            self,
            MonitorKind::MaxDisplacement | MonitorKind::SumSqDisplacement | MonitorKind::Residual
        )
    }
}

impl From<MonitorKind> for &'static str {
    fn from(m: MonitorKind) -> Self {
        m.name()
    }
}

impl TryFrom<String> for MonitorKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for MonitorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim();
        MonitorKind::ALL
            .into_iter()
            .find(|m| m.name() == key || m.name().strip_prefix("window_") == Some(key))
            .ok_or_else(|| format!("unknown monitor '{key}'"))
    }
}

/// Step contracts derived from the one-step lemmas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contract {
    /// On a path with group interaction, a profile equal to the social graph stays equal.
    PathProfile,
    /// On a path in one dimension, a monotone profile-preserving state stays monotone.
    Order,
    /// On a regular graph with uniform stubbornness, the max edge gap contracts
    /// by the common-neighbor factor and the profile stays complete.
    RegularBound,
    /// A δ-trivial state stays δ-trivial.
    DeltaTrivial,
    /// The supermartingale decrease holds on a finite system.
    Supermartingale,
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        write!(f, "{}", s.as_str().unwrap_or("?"))
    }
}

/// One contract evaluation, serialized as `{contract, t, pass, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractOutcome {
    pub contract: Contract,
    pub t: u64,
    pub pass: bool,
    pub detail: String,
}

/// What a step check needs to know besides the two states.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub graph: &'a SocialGraph,
    pub epsilon: f64,
    pub mode: Mode,
    /// Time of `prev`.
    pub t: u64,
    /// Vertices whose values at `t` are exact. `None` means all active vertices.
    pub region_before: Option<&'a BTreeSet<VertexId>>,
    /// Vertices whose values at `t + 1` are exact.
    pub region_after: Option<&'a BTreeSet<VertexId>>,
    /// The common stubbornness used for this step, when all vertices share one.
    pub uniform_alpha: Option<f64>,
    /// Width for the δ-triviality contract.
    pub delta: Option<f64>,
}

impl<'a> StepContext<'a> {
    pub fn new(graph: &'a SocialGraph, epsilon: f64, mode: Mode, t: u64) -> Self {
        StepContext {
            graph,
            epsilon,
            mode,
            t,
            region_before: None,
            region_after: None,
            uniform_alpha: None,
            delta: None,
        }
    }
}

fn region(s: &OpinionState, r: Option<&BTreeSet<VertexId>>) -> Vec<VertexId> {
    match r {
        Some(set) => s.ids().iter().copied().filter(|v| set.contains(v)).collect(),
        None => s.ids().to_vec(),
    }
}

fn region_edges(g: &SocialGraph, vertices: &[VertexId]) -> Vec<Edge> {
    g.edges_within(&vertices.iter().copied().collect())
}

fn all_within(s: &OpinionState, edges: &[Edge], eps: f64) -> Option<Edge> {
    edges
        .iter()
        .find(|e| s.distance(e.lo(), e.hi()).map_or(true, |d| d > eps))
        .copied()
}

fn monotone(s: &OpinionState, path: &[VertexId]) -> (bool, bool) {
    let vals: Vec<f64> = path.iter().map(|&v| s.get(v).expect("active")[0]).collect();
    let up = vals.windows(2).all(|w| w[0] <= w[1]);
    let down = vals.windows(2).all(|w| w[0] >= w[1]);
    (up, down)
}

/// Evaluate `contracts` on one step `prev -> next`. A contract whose
/// hypothesis fails at `prev` passes vacuously and says so in `detail`.
pub fn check_step_contracts(
    prev: &OpinionState,
    next: &OpinionState,
    ctx: &StepContext<'_>,
    contracts: &[Contract],
) -> Result<Vec<ContractOutcome>, MonitorError> {
    if !prev.same_support(next) {
        return Err(MonitorError::SupportMismatch);
    }
    let before = region(prev, ctx.region_before);
    let after = region(next, ctx.region_after);
    let eps = ctx.epsilon;
    let g = ctx.graph;
    let mut out = Vec::with_capacity(contracts.len());
    for &c in contracts {
        let outcome = |pass: bool, detail: String| ContractOutcome { contract: c, t: ctx.t, pass, detail };
        let inapplicable = |why: &str| MonitorError::Inapplicable(c, why.to_string());
        match c {
            Contract::PathProfile | Contract::Order => {
                if !g.is_path_family() {
                    return Err(inapplicable("social graph is not a path"));
                }
                if ctx.mode != Mode::Group {
                    return Err(inapplicable("requires group interaction"));
                }
                if c == Contract::Order && prev.dim() != 1 {
                    return Err(inapplicable("requires one-dimensional opinions"));
                }
                let edges_before = region_edges(g, &before);
                if let Some(e) = all_within(prev, &edges_before, eps) {
                    out.push(outcome(true, format!("vacuous: edge {e} outside profile at t")));
                    continue;
                }
                let edges_after = region_edges(g, &after);
                let broken = all_within(next, &edges_after, eps);
                if c == Contract::PathProfile {
                    out.push(match broken {
                        None => outcome(true, format!("{} edges kept", edges_after.len())),
                        Some(e) => outcome(false, format!("edge {e} left the profile")),
                    });
                    continue;
                }
                let (up, down) = monotone(prev, &before);
                if !up && !down {
                    out.push(outcome(true, "vacuous: not monotone at t".into()));
                    continue;
                }
                let (up2, down2) = monotone(next, &after);
                let pass = broken.is_none() && (!up || up2) && (!down || down2);
                let dir = if up { "nondecreasing" } else { "nonincreasing" };
                out.push(outcome(pass, format!("{dir} over {} vertices", after.len())));
            }
            Contract::RegularBound => {
                if ctx.mode != Mode::Group {
                    return Err(inapplicable("requires group interaction"));
                }
                let alpha = ctx
                    .uniform_alpha
                    .ok_or_else(|| inapplicable("stubbornness is not uniform"))?;
                let sample = g
                    .orbit_edges()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| inapplicable("no certified edge sample"))?;
                let (r, margin) = regularity_margin(g, &sample)?;
                if margin < 0 {
                    return Err(inapplicable("common neighborhoods smaller than 2r/3"));
                }
                let edges_before = region_edges(g, &before);
                if let Some(e) = all_within(prev, &edges_before, eps) {
                    out.push(outcome(true, format!("vacuous: edge {e} outside profile at t")));
                    continue;
                }
                let a0 = max_edge_gap(prev, &edges_before);
                let edges_after = region_edges(g, &after);
                let a1 = max_edge_gap(next, &edges_after);
                let r = r as f64;
                let factor = (r - margin as f64 * (1.0 - alpha)) / r;
                let bound = a0 * factor + REGULAR_BOUND_TOLERANCE * a0;
                let complete = all_within(next, &edges_after, eps).is_none();
                out.push(outcome(
                    a1 <= bound && complete,
                    format!("A_t={a0:e} A_t+1={a1:e} factor={factor}"),
                ));
            }
            Contract::DeltaTrivial => {
                let delta = ctx.delta.ok_or_else(|| inapplicable("no delta given"))?;
                if !(delta >= 0.0 && delta <= eps) {
                    return Err(inapplicable("requires 0 <= delta <= epsilon"));
                }
                let d0 = diameter_over(prev, &before);
                if d0 > delta {
                    out.push(outcome(true, format!("vacuous: diameter {d0:e} > delta")));
                    continue;
                }
                let d1 = diameter_over(next, &after);
                out.push(outcome(d1 <= delta + DELTA_TOLERANCE, format!("diameter {d0:e} -> {d1:e}")));
            }
            Contract::Supermartingale => {
                let whole = g
                    .vertices()
                    .is_some_and(|vs| vs.as_slice() == prev.ids());
                if !whole {
                    return Err(inapplicable("requires a finite graph with every vertex active"));
                }
                let (res, z0) = supermartingale_residual(prev, next, ctx.mode, g, eps)?;
                let floor = -RESIDUAL_TOLERANCE * z0.max(1.0);
                out.push(outcome(res >= floor, format!("residual {res:e}, Z(t) {z0:e}")));
            }
        }
    }
    Ok(out)
}

fn diameter_over(s: &OpinionState, vertices: &[VertexId]) -> f64 {
    let rows: Vec<&[f64]> = vertices.iter().map(|&v| s.get(v).expect("active")).collect();
    let mut best = 0.0f64;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            best = best.max(euclidean(rows[a], rows[b]));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AlphaDraw, step_group, step_pair};
    use crate::graph::{GraphSpec, Matching, make_graph};

    fn graph(spec: GraphSpec) -> SocialGraph {
        make_graph(&spec).unwrap()
    }

    fn scalar(v: &[f64]) -> OpinionState {
        OpinionState::scalar(v.iter().enumerate().map(|(k, &x)| (k as i64 + 1, x))).unwrap()
    }

    #[test]
    fn z_pair_values() {
        assert_eq!(z_pair(&scalar(&[0.0, 1.0])), 2.0);
        assert_eq!(z_pair(&scalar(&[0.0, 1.0, 2.0])), 12.0);
        assert_eq!(z_pair(&scalar(&[0.3, 0.3, 0.3])), 0.0);
    }

    #[test]
    fn z_group_values() {
        let k2 = graph(GraphSpec::Complete { n: 2 });
        assert_eq!(z_group(&scalar(&[0.0, 2.0]), &k2, 1.0), 2.0);
        let apart = graph(GraphSpec::Explicit { adjacency: [(1, vec![]), (2, vec![])].into() });
        assert_eq!(z_group(&scalar(&[0.0, 0.1]), &apart, 0.5), 0.5);
        let k3 = graph(GraphSpec::Complete { n: 3 });
        assert_eq!(z_group(&scalar(&[0.4, 0.4, 0.4]), &k3, 1.0), 0.0);
    }

    #[test]
    fn deffuant_midpoint_is_tight() {
        let k2 = graph(GraphSpec::Complete { n: 2 });
        let s = scalar(&[0.0, 1.0]);
        let m = Matching::single(Edge::new(1, 2).unwrap());
        let a = AlphaDraw::uniform([1, 2], 0.0).unwrap();
        let next = step_pair(&s, &k2, &m, &a, 1.0).unwrap();
        let (_, moved) = displacement(&s, &next).unwrap();
        assert_eq!(moved, 0.5);
        let (res, z0) = supermartingale_residual(&s, &next, Mode::Pair, &k2, 1.0).unwrap();
        assert_eq!(z0, 2.0);
        assert!(res.abs() <= 1e-12);
    }

    #[test]
    fn frozen_step_has_zero_residual() {
        let k3 = graph(GraphSpec::Complete { n: 3 });
        let s = scalar(&[0.1, 0.5, 0.8]);
        for mode in [Mode::Group, Mode::Pair] {
            assert_eq!(supermartingale_residual(&s, &s, mode, &k3, 1.0).unwrap().0, 0.0);
        }
    }

    #[test]
    fn edge_gaps() {
        let k3 = graph(GraphSpec::Complete { n: 3 });
        let s = scalar(&[0.0, 0.5, 1.0]);
        let edges = k3.edges().unwrap();
        assert_eq!(max_edge_gap(&s, &edges), 1.0);
        assert_eq!(max_edge_gap(&s, &[]), 0.0);
        let a = AlphaDraw::uniform(1..=3, 0.0).unwrap();
        let next = step_group(&s, &k3, &a, 1.0).unwrap();
        assert_eq!(max_edge_gap(&next, &edges), 0.0);
    }

    #[test]
    fn monitor_names_parse() {
        assert_eq!("z_pair".parse::<MonitorKind>(), Ok(MonitorKind::ZPair));
        assert_eq!("window_z_group".parse::<MonitorKind>(), Ok(MonitorKind::ZGroup));
        assert!("bogus".parse::<MonitorKind>().is_err());
    }

    #[test]
    fn path_contracts_pass_on_monotone_path() {
        let p = graph(GraphSpec::FinitePath { n: 5 });
        let s = scalar(&[1.0, 0.8, 0.5, 0.45, 0.1]);
        let a = AlphaDraw::new([(1, 0.2), (2, 0.9), (3, 0.0), (4, 0.5), (5, 1.0)]).unwrap();
        let next = step_group(&s, &p, &a, 0.5).unwrap();
        let ctx = StepContext::new(&p, 0.5, Mode::Group, 0);
        let rep = check_step_contracts(&s, &next, &ctx, &[Contract::PathProfile, Contract::Order]).unwrap();
        assert!(rep.iter().all(|o| o.pass), "{rep:?}");
    }

    #[test]
    fn cocktail_bound() {
        let c = graph(GraphSpec::Cocktail { m: 3 });
        let s = scalar(&[0.0, 0.3, 0.9, 0.1, 0.6, 0.2]);
        let a = AlphaDraw::uniform(1..=6, 0.5).unwrap();
        let next = step_group(&s, &c, &a, 1.0).unwrap();
        let mut ctx = StepContext::new(&c, 1.0, Mode::Group, 0);
        ctx.uniform_alpha = Some(0.5);
        let rep = check_step_contracts(&s, &next, &ctx, &[Contract::RegularBound]).unwrap();
        assert!(rep[0].pass, "{rep:?}");
        assert!(rep[0].detail.contains("factor=0.8"));
    }

    #[test]
    fn violated_bound_is_reported() {
        let k3 = graph(GraphSpec::Complete { n: 3 });
        let s = scalar(&[0.0, 0.5, 1.0]);
        let mut ctx = StepContext::new(&k3, 1.0, Mode::Group, 4);
        ctx.uniform_alpha = Some(0.0);
        // A step that did not move at all cannot meet the factor-0 bound.
        let rep = check_step_contracts(&s, &s, &ctx, &[Contract::RegularBound]).unwrap();
        assert!(!rep[0].pass);
        assert_eq!(rep[0].t, 4);
    }

    #[test]
    fn delta_triviality() {
        let k4 = graph(GraphSpec::Complete { n: 4 });
        let s = scalar(&[0.0, 0.2, 0.3, 0.25]);
        let a = AlphaDraw::uniform(1..=4, 0.3).unwrap();
        let next = step_group(&s, &k4, &a, 0.5).unwrap();
        let mut ctx = StepContext::new(&k4, 0.5, Mode::Group, 0);
        ctx.delta = Some(0.3);
        let rep = check_step_contracts(&s, &next, &ctx, &[Contract::DeltaTrivial]).unwrap();
        assert!(rep[0].pass);
    }

    #[test]
    fn inapplicable_contexts() {
        let k3 = graph(GraphSpec::Complete { n: 3 });
        let s = scalar(&[0.0, 0.5, 1.0]);
        let ctx = StepContext::new(&k3, 1.0, Mode::Group, 0);
        assert!(matches!(
            check_step_contracts(&s, &s, &ctx, &[Contract::Order]),
            Err(MonitorError::Inapplicable(Contract::Order, _))
        ));
        assert!(matches!(
            check_step_contracts(&s, &s, &ctx, &[Contract::RegularBound]),
            Err(MonitorError::Inapplicable(..))
        ));
        let p = graph(GraphSpec::FinitePath { n: 2 });
        let s2 = OpinionState::new(2, [(1, vec![0.0, 0.0]), (2, vec![0.1, 0.1])]).unwrap();
        let ctx = StepContext::new(&p, 1.0, Mode::Group, 0);
        assert!(check_step_contracts(&s2, &s2, &ctx, &[Contract::Order]).is_err());
        assert!(check_step_contracts(&s2, &s2, &ctx, &[Contract::PathProfile]).is_ok());
    }

    #[test]
    fn outcome_json() {
        let o = ContractOutcome { contract: Contract::RegularBound, t: 3, pass: true, detail: "ok".into() };
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["contract"], "regular_bound");
        assert_eq!(v["t"], 3);
    }
}
