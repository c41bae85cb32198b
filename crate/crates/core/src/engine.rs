//! Finite-horizon simulation of possibly infinite systems.
//!
//! A vertex's opinion after `t` steps depends only on initial opinions within
//! graph distance `t`. Simulating on `ball(targets, T)` is therefore exact for
//! the targets up to time `T`. Every window vertex carries a depth, its
//! distance to the nearest vertex outside the window; its value is exact at
//! time `t` iff `depth > t`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    AlphaDraw, DynamicsError, Mode, ModelParams, OpinionState, step_group, step_pair,
};
use crate::graph::{Edge, GraphError, GraphSpec, Matching, SocialGraph, VertexId, ball, make_graph};
use crate::monitors::{
    Contract, ContractOutcome, MonitorError, MonitorKind, StepContext, check_step_contracts,
    diameter, displacement, max_edge_gap, supermartingale_residual, z_group, z_pair,
};
use crate::sampling::{
    AlphaSchedule, MatchingSampler, Preset, SamplingError, Seed, Stream, keyed_rng, preset,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("target set is empty")]
    NoTargets,
    #[error("target {0} is not a vertex of the social graph")]
    TargetNotVertex(VertexId),
    #[error("initial rule is undefined at vertex {0}")]
    InitialUndefined(VertexId),
    #[error("invalid initial rule: {0}")]
    InvalidInitial(String),
    #[error("already at horizon t = {0}")]
    PastHorizon(u64),
    #[error("pair interaction needs a matching sampler")]
    MissingSampler,
    #[error("schedule {0} only applies to pair interaction")]
    PairOnlySchedule(&'static str),
    #[error("window radius {radius} is smaller than the horizon {horizon}")]
    WindowTooSmall { radius: u64, horizon: u64 },
}

/// Opinion at time zero as a function of the vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitialRule {
    /// `x_i = 1/i`, defined for `i >= 1`.
    Harmonic,
    /// `x_i = i`.
    Identity,
    Constant { value: Vec<f64> },
    Explicit {
        #[serde(with = "crate::graph::vertex_keyed")]
        values: BTreeMap<VertexId, Vec<f64>>,
    },
    /// Independent uniform coordinates in `[lo, hi)^dim`, keyed by vertex.
    UniformBox { lo: f64, hi: f64, dim: usize },
}

impl InitialRule {
    pub fn dim(&self) -> usize {
        match self {
            InitialRule::Harmonic | InitialRule::Identity => 1,
            InitialRule::Constant { value } => value.len(),
            InitialRule::Explicit { values } => values.values().next().map_or(1, Vec::len),
            InitialRule::UniformBox { dim, .. } => *dim,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        match self {
            InitialRule::UniformBox { lo, hi, dim } if !(lo < hi) || *dim == 0 => Err(
                EngineError::InvalidInitial(format!("uniform box needs lo < hi and dim >= 1, got [{lo}, {hi}), dim {dim}")),
            ),
            InitialRule::Constant { value } if value.is_empty() => {
                Err(EngineError::InvalidInitial("constant value is empty".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, v: VertexId, seed: Seed) -> Result<Vec<f64>, EngineError> {
        match self {
            InitialRule::Harmonic if v >= 1 => Ok(vec![1.0 / v as f64]),
            InitialRule::Harmonic => Err(EngineError::InitialUndefined(v)),
            InitialRule::Identity => Ok(vec![v as f64]),
            InitialRule::Constant { value } => Ok(value.clone()),
            InitialRule::Explicit { values } => {
                values.get(&v).cloned().ok_or(EngineError::InitialUndefined(v))
            }
            InitialRule::UniformBox { lo, hi, dim } => {
                let mut rng = keyed_rng(seed, Stream::Initial, v, 0, 0);
                Ok((0..*dim).map(|_| rng.gen_range(*lo..*hi)).collect())
            }
        }
    }
}

/// Interaction model: one of the named special cases or a custom combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ModelSpec {
    SynchronousHk,
    AsynchronousHk { window: Vec<VertexId> },
    Deffuant { mu: f64 },
    Custom {
        mode: Mode,
        alpha: AlphaSchedule,
        #[serde(default)]
        sampler: Option<MatchingSampler>,
    },
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<(Mode, AlphaSchedule, Option<MatchingSampler>), SamplingError> {
        let named = match self {
            ModelSpec::SynchronousHk => Preset::SynchronousHk,
            ModelSpec::AsynchronousHk { window } => Preset::AsynchronousHk { window: window.clone() },
            ModelSpec::Deffuant { mu } => Preset::Deffuant { mu: *mu },
            ModelSpec::Custom { mode, alpha, sampler } => {
                alpha.validate()?;
                if let Some(s) = sampler {
                    s.validate()?;
                }
                return Ok((*mode, alpha.clone(), sampler.clone()));
            }
        };
        let parts = preset(&named)?;
        Ok((parts.mode, parts.alpha, parts.sampler))
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub graph: GraphSpec,
    pub initial: InitialRule,
    pub epsilon: f64,
    pub model: ModelSpec,
    pub targets: Vec<VertexId>,
    pub horizon: u64,
    #[serde(default)]
    pub seed: Seed,
    #[serde(default)]
    pub monitors: Vec<MonitorKind>,
}

/// Draws used for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDraws {
    pub alpha: AlphaDraw,
    pub matching: Option<Matching>,
    /// Set when every vertex used the same stubbornness.
    pub uniform_alpha: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct World {
    graph: SocialGraph,
    params: ModelParams,
    alpha: AlphaSchedule,
    sampler: Option<MatchingSampler>,
    seed: Seed,
    horizon: u64,
    t: u64,
    targets: Vec<VertexId>,
    window: BTreeSet<VertexId>,
    window_edges: Vec<Edge>,
    depth: BTreeMap<VertexId, u64>,
    state: OpinionState,
}

impl World {
    pub fn init(cfg: &WorldConfig) -> Result<Self, EngineError> {
        Self::with_radius(cfg, cfg.horizon)
    }

    /// Like [`World::init`] but with window `ball(targets, radius)`, `radius >= T`.
    pub fn with_radius(cfg: &WorldConfig, radius: u64) -> Result<Self, EngineError> {
        if radius < cfg.horizon {
            return Err(EngineError::WindowTooSmall { radius, horizon: cfg.horizon });
        }
        let graph = make_graph(&cfg.graph)?;
        let params = ModelParams::new(cfg.epsilon, Mode::Group)?;
        let (mode, alpha, sampler) = cfg.model.resolve()?;
        let params = ModelParams { mode, ..params };
        if mode == Mode::Pair && sampler.is_none() {
            return Err(EngineError::MissingSampler);
        }
        if mode == Mode::Group && matches!(alpha, AlphaSchedule::PerPairConstant { .. }) {
            return Err(EngineError::PairOnlySchedule("per_pair_constant"));
        }
        cfg.initial.validate()?;
        if cfg.targets.is_empty() {
            return Err(EngineError::NoTargets);
        }
        let targets: BTreeSet<VertexId> = cfg.targets.iter().copied().collect();
        if let Some(&v) = targets.iter().find(|&&v| !graph.contains(v)) {
            return Err(EngineError::TargetNotVertex(v));
        }
        let window = ball(&graph, &targets, radius as usize);
        let entries = window
            .iter()
            .map(|&v| cfg.initial.eval(v, cfg.seed).map(|x| (v, x)))
            .collect::<Result<Vec<_>, _>>()?;
        let state = OpinionState::new(cfg.initial.dim(), entries)?;
        let window_edges = graph.edges_within(&window);
        let depth = boundary_depth(&graph, &window);
        Ok(World {
            graph,
            params,
            alpha,
            sampler,
            seed: cfg.seed,
            horizon: cfg.horizon,
            t: 0,
            targets: targets.into_iter().collect(),
            window,
            window_edges,
            depth,
            state,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn state(&self) -> &OpinionState {
        &self.state
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn targets(&self) -> &[VertexId] {
        &self.targets
    }

    pub fn window(&self) -> &BTreeSet<VertexId> {
        &self.window
    }

    pub fn window_edges(&self) -> &[Edge] {
        &self.window_edges
    }

    /// Whether `v`'s current value equals that of the untruncated system.
    pub fn is_valid(&self, v: VertexId) -> bool {
        self.valid_at(v, self.t)
    }

    fn valid_at(&self, v: VertexId, t: u64) -> bool {
        self.depth.get(&v).is_some_and(|&d| d > t)
    }

    /// Window vertices that are exact at time `t`.
    pub fn valid_region(&self, t: u64) -> BTreeSet<VertexId> {
        self.window.iter().copied().filter(|&v| self.valid_at(v, t)).collect()
    }

    /// Stubbornness and matching for step `t -> t + 1`.
    pub fn draws(&self) -> Result<StepDraws, EngineError> {
        let (seed, t) = (self.seed, self.t);
        match self.params.mode {
            Mode::Group => {
                let alpha = AlphaDraw::new(self.window.iter().map(|&v| (v, self.alpha.draw(seed, v, t))))?;
                let uniform_alpha = self
                    .alpha
                    .is_uniform_across_vertices()
                    .then(|| self.alpha.draw(seed, 0, t));
                Ok(StepDraws { alpha, matching: None, uniform_alpha })
            }
            Mode::Pair => {
                let sampler = self.sampler.as_ref().ok_or(EngineError::MissingSampler)?;
                let matching = sampler.draw_from_edges(&self.window_edges, seed, t)?;
                let mut values = Vec::with_capacity(2 * matching.len());
                for e in matching.iter() {
                    match self.alpha.draw_pair(seed, *e, t) {
                        Some(a) => values.extend([(e.lo(), a), (e.hi(), a)]),
                        None => values.extend([
                            (e.lo(), self.alpha.draw(seed, e.lo(), t)),
                            (e.hi(), self.alpha.draw(seed, e.hi(), t)),
                        ]),
                    }
                }
                let uniform_alpha = self
                    .alpha
                    .is_uniform_across_vertices()
                    .then(|| self.alpha.draw(seed, 0, t));
                Ok(StepDraws { alpha: AlphaDraw::new(values)?, matching: Some(matching), uniform_alpha })
            }
        }
    }

    /// Advance one step and return the draws that were used.
    pub fn step(&mut self) -> Result<StepDraws, EngineError> {
        if self.t >= self.horizon {
            return Err(EngineError::PastHorizon(self.t));
        }
        let draws = self.draws()?;
        let eps = self.params.epsilon;
        self.state = match &draws.matching {
            None => step_group(&self.state, &self.graph, &draws.alpha, eps)?,
            Some(m) => step_pair(&self.state, &self.graph, m, &draws.alpha, eps)?,
        };
        self.t += 1;
        Ok(draws)
    }

    fn target_rows(&self) -> Vec<TargetRow> {
        self.targets
            .iter()
            .map(|&v| TargetRow {
                vertex: v,
                valid: self.is_valid(v),
                x: self.state.get(v).expect("targets lie in the window").to_vec(),
            })
            .collect()
    }

    fn monitor_values(
        &self,
        prev: Option<&OpinionState>,
        kinds: &[MonitorKind],
    ) -> Result<Vec<(MonitorKind, f64)>, EngineError> {
        let s = &self.state;
        let eps = self.params.epsilon;
        let mut out = Vec::with_capacity(kinds.len());
        for &k in kinds {
            let value = match (k, prev) {
                (MonitorKind::ZPair, _) => z_pair(s),
                (MonitorKind::ZGroup, _) => z_group(s, &self.graph, eps),
                (MonitorKind::MaxEdgeGap, _) => max_edge_gap(s, &self.window_edges),
                (MonitorKind::Diameter, _) => diameter(s),
                (MonitorKind::MaxDisplacement, Some(p)) => displacement(p, s)?.0,
                (MonitorKind::SumSqDisplacement, Some(p)) => displacement(p, s)?.1,
                (MonitorKind::Residual, Some(p)) => {
                    supermartingale_residual(p, s, self.params.mode, &self.graph, eps)?.0
                }
                (_, None) => continue,
            };
            out.push((k, value));
        }
        Ok(out)
    }
}

/// Distance from each window vertex to the nearest vertex outside the
/// window; `u64::MAX` when the window is a union of components.
fn boundary_depth(g: &SocialGraph, window: &BTreeSet<VertexId>) -> BTreeMap<VertexId, u64> {
    let mut depth: BTreeMap<VertexId, u64> = window.iter().map(|&v| (v, u64::MAX)).collect();
    let mut queue = VecDeque::new();
    for &v in window {
        if g.neighbors(v).iter().any(|u| !window.contains(u)) {
            depth.insert(v, 1);
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        for u in g.neighbors(v) {
            if let Some(du) = depth.get_mut(&u) {
                if *du == u64::MAX {
                    *du = d + 1;
                    queue.push_back(u);
                }
            }
        }
    }
    depth
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetRow {
    pub vertex: VertexId,
    pub valid: bool,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: u64,
    pub targets: Vec<TargetRow>,
    pub monitors: Vec<(MonitorKind, f64)>,
    /// Stubbornness of targets for the step that produced this state.
    pub alpha: Vec<(VertexId, f64)>,
    pub matching: Option<Matching>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dim: usize,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    /// First coordinate of `v` over time.
    pub fn series(&self, v: VertexId) -> Vec<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.targets.iter().find(|r| r.vertex == v).map(|r| r.x[0]))
            .collect()
    }

    pub fn monitor_series(&self, kind: MonitorKind) -> Vec<(u64, f64)> {
        self.steps
            .iter()
            .filter_map(|s| s.monitors.iter().find(|(k, _)| *k == kind).map(|&(_, v)| (s.t, v)))
            .collect()
    }

    /// `t,vertex,valid,x0[,x1,...]`
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t,vertex,valid")?;
        for c in 0..self.dim {
            write!(w, ",x{c}")?;
        }
        writeln!(w)?;
        for step in &self.steps {
            for row in &step.targets {
                write!(w, "{},{},{}", step.t, row.vertex, row.valid)?;
                for x in &row.x {
                    write!(w, ",{x:?}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// `t,monitor,value`
    pub fn write_monitor_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,monitor,value")?;
        for step in &self.steps {
            for (k, v) in &step.monitors {
                writeln!(w, "{},{},{v:?}", step.t, k.name())?;
            }
        }
        Ok(())
    }
}

/// Run to the horizon, evaluating `contracts` after every step.
pub fn run_checked(
    cfg: &WorldConfig,
    contracts: &[Contract],
    delta: Option<f64>,
) -> Result<(Trace, Vec<ContractOutcome>), EngineError> {
    let mut world = World::init(cfg)?;
    let mut steps = Vec::with_capacity(cfg.horizon as usize + 1);
    steps.push(TraceStep {
        t: 0,
        targets: world.target_rows(),
        monitors: world.monitor_values(None, &cfg.monitors)?,
        alpha: Vec::new(),
        matching: None,
    });
    let mut outcomes = Vec::new();
    while world.t < world.horizon {
        let prev = world.state.clone();
        let t = world.t;
        let draws = world.step()?;
        if !contracts.is_empty() {
            let before = world.valid_region(t);
            let after = world.valid_region(t + 1);
            let ctx = StepContext {
                region_before: Some(&before),
                region_after: Some(&after),
                uniform_alpha: draws.uniform_alpha,
                delta,
                ..StepContext::new(&world.graph, world.params.epsilon, world.params.mode, t)
            };
            outcomes.extend(check_step_contracts(&prev, &world.state, &ctx, contracts)?);
        }
        steps.push(TraceStep {
            t: world.t,
            targets: world.target_rows(),
            monitors: world.monitor_values(Some(&prev), &cfg.monitors)?,
            alpha: world
                .targets
                .iter()
                .filter_map(|&v| draws.alpha.get(v).map(|a| (v, a)))
                .collect(),
            matching: draws.matching,
        });
    }
    Ok((Trace { dim: world.state.dim(), steps }, outcomes))
}

pub fn run(cfg: &WorldConfig) -> Result<Trace, EngineError> {
    run_checked(cfg, &[], None).map(|(trace, _)| trace)
}
