//! Randomized finite instances and the supermartingale suite run over them.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{AlphaDraw, DynamicsError, Mode, OpinionState, step_group, step_pair};
use crate::graph::{GraphSpec, Matching, SocialGraph, VertexId, make_graph};
use crate::monitors::{
    Contract, ContractOutcome, MonitorError, RESIDUAL_TOLERANCE, supermartingale_residual,
};
use crate::sampling::{MatchingSampler, Seed, Stream, keyed_rng};

/// Largest stubbornness drawn for a non-stubborn agent.
pub const MAX_FREE_ALPHA: f64 = 1.0 - 2e-3;

#[derive(Debug, Clone)]
pub struct FiniteInstance {
    pub graph: SocialGraph,
    pub state: OpinionState,
    pub eps: f64,
}

pub fn trial_rng(seed: Seed, trial: u64) -> ChaCha8Rng {
    keyed_rng(seed, Stream::Suite, trial as i64, 0, 0)
}

/// Adjacency on `1..=n`. Connected graphs start from a random recursive tree;
/// every remaining pair is then added with probability `p`.
pub fn random_adjacency(rng: &mut impl Rng, n: usize, p: f64, connected: bool) -> BTreeMap<VertexId, Vec<VertexId>> {
    let mut adj: BTreeMap<VertexId, Vec<VertexId>> = (1..=n as VertexId).map(|v| (v, Vec::new())).collect();
    let link = |adj: &mut BTreeMap<VertexId, Vec<VertexId>>, a: VertexId, b: VertexId| {
        if !adj[&a].contains(&b) {
            adj.get_mut(&a).unwrap().push(b);
            adj.get_mut(&b).unwrap().push(a);
        }
    };
    if connected {
        for v in 2..=n as VertexId {
            let u = rng.gen_range(1..v);
            link(&mut adj, u, v);
        }
    }
    for a in 1..=n as VertexId {
        for b in a + 1..=n as VertexId {
            if rng.gen_bool(p) {
                link(&mut adj, a, b);
            }
        }
    }
    for nbrs in adj.values_mut() {
        nbrs.sort_unstable();
    }
    adj
}

/// `2 <= n <= n_max`, `1 <= d <= d_max`, opinions in the unit box and a
/// threshold in `[0.1, 1.5)`.
pub fn random_instance(rng: &mut impl Rng, n_max: usize, d_max: usize, connected: bool) -> FiniteInstance {
    let n = rng.gen_range(2..=n_max);
    let d = rng.gen_range(1..=d_max);
    let p = rng.gen_range(0.0..0.5);
    let adjacency = random_adjacency(rng, n, p, connected);
    let graph = make_graph(&GraphSpec::Explicit { adjacency }).expect("generated adjacency is symmetric");
    let state = OpinionState::new(
        d,
        (1..=n as VertexId).map(|v| (v, (0..d).map(|_| rng.r#gen::<f64>()).collect())),
    )
    .expect("finite opinions");
    let eps = rng.gen_range(0.1..1.5);
    FiniteInstance { graph, state, eps }
}

/// A stubbornness value: absolutely stubborn with probability 1/5, otherwise
/// uniform on `[0, MAX_FREE_ALPHA]`.
pub fn random_alpha(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.2) { 1.0 } else { rng.gen_range(0.0..=MAX_FREE_ALPHA) }
}

/// Random draws for one step on a finite instance. Pair mode gives both
/// endpoints of every matched pair the same stubbornness.
pub fn random_step_draws(
    rng: &mut impl Rng,
    inst: &FiniteInstance,
    mode: Mode,
    sampler: &MatchingSampler,
    seed: Seed,
    t: u64,
) -> (AlphaDraw, Option<Matching>) {
    match mode {
        Mode::Group => {
            let alpha = AlphaDraw::new(inst.state.ids().iter().map(|&v| (v, random_alpha(rng))))
                .expect("alpha in range");
            (alpha, None)
        }
        Mode::Pair => {
            let edges = inst.graph.edges().expect("finite graph");
            let m = sampler.draw_from_edges(&edges, seed, t).unwrap_or_default();
            let alpha = AlphaDraw::new(m.iter().flat_map(|e| {
                let a = random_alpha(rng);
                [(e.lo(), a), (e.hi(), a)]
            }))
            .expect("alpha in range");
            (alpha, Some(m))
        }
    }
}

pub fn apply(inst: &FiniteInstance, alpha: &AlphaDraw, m: Option<&Matching>) -> Result<OpinionState, DynamicsError> {
    match m {
        None => step_group(&inst.state, &inst.graph, alpha, inst.eps),
        Some(m) => step_pair(&inst.state, &inst.graph, m, alpha, inst.eps),
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteResult {
    pub trials: u64,
    pub steps_checked: u64,
    /// Minimum of `residual / max(1, Z(t))` seen.
    pub worst_scaled_residual: f64,
    /// Failing steps as `(trial, outcome)`.
    pub failures: Vec<(u64, ContractOutcome)>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `trials` random instances of `mode`, `steps` steps each, checking the
/// supermartingale decrease after every step.
pub fn supermartingale_suite(mode: Mode, trials: u64, steps: u64, seed: Seed) -> Result<SuiteResult, MonitorError> {
    let sampler = MatchingSampler::RandomMaximalMatching;
    let mut result = SuiteResult { worst_scaled_residual: f64::INFINITY, ..Default::default() };
    for trial in 0..trials {
        let mut rng = trial_rng(seed ^ mode_salt(mode), trial);
        let mut inst = random_instance(&mut rng, 40, 3, false);
        for t in 0..steps {
            let (alpha, m) = random_step_draws(&mut rng, &inst, mode, &sampler, seed.wrapping_add(trial), t);
            let next = apply(&inst, &alpha, m.as_ref()).expect("draws cover the active set");
            let (res, z0) = supermartingale_residual(&inst.state, &next, mode, &inst.graph, inst.eps)?;
            let scale = z0.max(1.0);
            result.worst_scaled_residual = result.worst_scaled_residual.min(res / scale);
            result.steps_checked += 1;
            if res < -RESIDUAL_TOLERANCE * scale {
                result.failures.push((
                    trial,
                    ContractOutcome {
                        contract: Contract::Supermartingale,
                        t,
                        pass: false,
                        detail: format!("trial {trial}: residual {res:e}, Z(t) {z0:e}"),
                    },
                ));
            }
            inst.state = next;
        }
        result.trials += 1;
    }
    Ok(result)
}

fn mode_salt(mode: Mode) -> u64 {
    match mode {
        Mode::Group => 0,
        Mode::Pair => 0x9E37_79B9_7F4A_7C15,
    }
}
