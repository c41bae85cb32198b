//! Acceptance criteria. One line per criterion; exits nonzero if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use mixed_hk::dynamics::{deffuant_step, step_group, step_pair};
use mixed_hk::graph::ball;
use mixed_hk::monitors::{diameter, displacement, supermartingale_residual};
use mixed_hk::oracle::{DenseInstance, naive_step};
use mixed_hk::suite::{
    FiniteInstance, apply, random_adjacency, random_instance, random_step_draws, supermartingale_suite,
    trial_rng,
};
use mixed_hk::{
    AlphaDraw, AlphaSchedule, Contract, Edge, GraphSpec, InitialRule, MatchingSampler, Matching, Mode,
    ModelSpec, MonitorKind, OpinionState, VertexId, World, WorldConfig, make_graph, run, run_checked,
};
use rand::Rng;
use rand::seq::SliceRandom;

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn explicit_initial(s: &OpinionState) -> InitialRule {
    InitialRule::Explicit { values: s.iter().map(|(v, x)| (v, x.to_vec())).collect() }
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

fn config(graph: GraphSpec, initial: InitialRule, epsilon: f64, model: ModelSpec, targets: Vec<VertexId>, horizon: u64) -> WorldConfig {
    WorldConfig { graph, initial, epsilon, model, targets, horizon, seed: 0, monitors: Vec::new() }
}

fn counterexample() -> Outcome {
    let cfg = config(GraphSpec::Bipath, InitialRule::Identity, 1.0, ModelSpec::SynchronousHk, (-5..=5).collect(), 50);
    let trace = run(&cfg).expect("run");
    for step in &trace.steps {
        for row in &step.targets {
            if !row.valid || bits(&row.x) != bits(&[row.vertex as f64]) {
                return ok(false, format!("x_{}({}) = {:?}, valid {}", row.vertex, step.t, row.x, row.valid));
            }
        }
    }
    ok(true, format!("{} steps, 11 targets fixed bitwise", trace.steps.len() - 1))
}

fn harmonic_path() -> Outcome {
    let cfg = config(GraphSpec::Path, InitialRule::Harmonic, 0.5, ModelSpec::SynchronousHk, (1..=10).collect(), 300);
    let trace = run(&cfg).expect("run");
    let series: Vec<Vec<f64>> = (1..=10).map(|v| trace.series(v)).collect();
    let mut problems = Vec::new();
    let x1 = &series[0];
    if let Some(t) = x1.windows(2).position(|w| w[1] > w[0]) {
        problems.push(format!("x_1 increases at t={t}"));
    }
    if x1[300] < 0.5 {
        problems.push(format!("x_1(300) = {:.6} < 0.5", x1[300]));
    }
    for (k, s) in series.iter().enumerate().skip(1) {
        if let Some(t) = s.windows(2).position(|w| w[1] < w[0]) {
            problems.push(format!("x_{} decreases at t={t}", k + 1));
        }
        if s[300] > 1.0 {
            problems.push(format!("x_{}(300) > 1", k + 1));
        }
    }
    let tail = series.iter().map(|s| (s[300] - s[299]).abs()).fold(0.0, f64::max);
    if tail >= 1e-6 {
        problems.push(format!("tail increment {tail:.3e} >= 1e-6"));
    }
    if problems.is_empty() {
        ok(true, format!("x_1(300) = {:.6}, tail increment {tail:.3e}", x1[300]))
    } else {
        let shown = problems.len().min(4);
        ok(false, format!("{} ({} violations)", problems[..shown].join("; "), problems.len()))
    }
}

/// Monotone values with consecutive gaps below `eps`.
fn monotone_values(rng: &mut impl Rng, vertices: &[VertexId], eps: f64) -> BTreeMap<VertexId, Vec<f64>> {
    let up = rng.gen_bool(0.5);
    let mut x: f64 = rng.gen_range(-1.0..1.0);
    let mut out = BTreeMap::new();
    for &v in vertices {
        out.insert(v, vec![x]);
        let inc = rng.gen_range(0.0..0.9 * eps);
        x = if up { x + inc } else { x - inc };
    }
    out
}

fn path_order() -> Outcome {
    let mut checked = 0;
    for trial in 0..200u64 {
        let mut rng = trial_rng(3, trial);
        let horizon = 20;
        let eps = rng.gen_range(0.05..1.0);
        let (graph, targets) = match trial % 3 {
            0 => {
                let n = rng.gen_range(2..=50);
                (GraphSpec::FinitePath { n }, (1..=n).collect::<Vec<_>>())
            }
            1 => {
                let a = rng.gen_range(1..=30);
                (GraphSpec::Path, (a..a + rng.gen_range(1..=5)).collect())
            }
            _ => {
                let a = rng.gen_range(-30..=30);
                (GraphSpec::Bipath, (a..a + rng.gen_range(1..=5)).collect())
            }
        };
        let g = make_graph(&graph).expect("graph");
        let window: Vec<VertexId> = ball(&g, &targets.iter().copied().collect(), horizon as usize).into_iter().collect();
        let values = monotone_values(&mut rng, &window, eps);
        let alpha = if rng.gen_bool(0.5) {
            AlphaSchedule::Uniform01
        } else {
            AlphaSchedule::TwoPoint { a: 1.0, b: rng.gen_range(0.0..1.0), p: rng.gen_range(0.0..1.0) }
        };
        let mut cfg = config(
            graph,
            InitialRule::Explicit { values },
            eps,
            ModelSpec::Custom { mode: Mode::Group, alpha, sampler: None },
            targets,
            horizon,
        );
        cfg.seed = trial;
        let (_, outcomes) = run_checked(&cfg, &[Contract::PathProfile, Contract::Order], None).expect("run");
        if let Some(f) = outcomes.iter().find(|o| !o.pass) {
            return ok(false, format!("trial {trial}: {} at t={}: {}", f.contract, f.t, f.detail));
        }
        if let Some(v) = outcomes.iter().find(|o| o.detail.starts_with("vacuous")) {
            return ok(false, format!("trial {trial}: hypothesis lost at t={}: {}", v.t, v.detail));
        }
        checked += outcomes.len();
    }
    ok(true, format!("200 instances, {checked} step checks"))
}

fn regular_decay() -> Outcome {
    let alpha = AlphaSchedule::Periodic { values: vec![0.9, 0.9, 0.9, 0.9, 0.2] };
    let mut cases: Vec<(String, GraphSpec, BTreeMap<VertexId, Vec<f64>>)> = Vec::new();
    for n in 3..=8i64 {
        // Antisymmetric pairs keep the consensus at exactly zero.
        let values = (1..=n)
            .map(|v| {
                let k = (v + 1) / 2;
                let x = if v == n && n % 2 == 1 { 0.0 } else { 0.4 / k as f64 };
                (v, vec![if v % 2 == 0 { -x } else { x }])
            })
            .collect();
        cases.push((format!("K_{n}"), GraphSpec::Complete { n }, values));
    }
    let values = [0.4, -0.4, 0.0, 0.0, 0.0, 0.0].iter().enumerate().map(|(k, &x)| (k as VertexId + 1, vec![x])).collect();
    cases.push(("K_3x2".into(), GraphSpec::Cocktail { m: 3 }, values));
    let mut summary = Vec::new();
    for (name, graph, values) in cases {
        let targets: Vec<VertexId> = values.keys().copied().collect();
        let mut cfg = config(
            graph,
            InitialRule::Explicit { values },
            1.0,
            ModelSpec::Custom { mode: Mode::Group, alpha: alpha.clone(), sampler: None },
            targets,
            500,
        );
        cfg.monitors = vec![MonitorKind::MaxEdgeGap];
        let (trace, outcomes) = run_checked(&cfg, &[Contract::RegularBound], None).expect("run");
        if let Some(f) = outcomes.iter().find(|o| !o.pass || o.detail.starts_with("vacuous")) {
            return ok(false, format!("{name} at t={}: {}", f.t, f.detail));
        }
        let a500 = trace.monitor_series(MonitorKind::MaxEdgeGap).last().expect("monitor").1;
        if !(a500 < 1e-8) {
            return ok(false, format!("{name}: A_500 = {a500:e}"));
        }
        summary.push(format!("{name} {a500:.1e}"));
    }
    ok(true, format!("A_500: {}", summary.join(", ")))
}

fn supermartingale() -> Outcome {
    let mut parts = Vec::new();
    for mode in [Mode::Group, Mode::Pair] {
        let r = supermartingale_suite(mode, 500, 20, 1).expect("suite");
        if let Some((trial, f)) = r.failures.first() {
            return ok(false, format!("{mode:?} trial {trial} t={}: {}", f.t, f.detail));
        }
        parts.push(format!("{mode:?}: {} steps, worst scaled residual {:.2e}", r.steps_checked, r.worst_scaled_residual));
    }
    let g = make_graph(&GraphSpec::Explicit { adjacency: [(1, vec![2]), (2, vec![1])].into() }).expect("graph");
    let s = OpinionState::scalar([(1, 0.0), (2, 1.0)]).expect("state");
    let next = deffuant_step(&s, &g, Edge::new(1, 2).expect("edge"), 0.5, 1.0).expect("step");
    let (res, _) = supermartingale_residual(&s, &next, Mode::Pair, &g, 1.0).expect("residual");
    parts.push(format!("two-agent tight case residual {res:e}"));
    ok(res.abs() <= 1e-12, parts.join("; "))
}

fn vanishing_displacement() -> Outcome {
    let sampler = MatchingSampler::SingleUniformEdge;
    let mut worst = (0.0f64, 0u64);
    let mut failing = 0;
    for trial in 0..500u64 {
        let mut rng = trial_rng(6, trial);
        let mut inst = random_instance(&mut rng, 40, 3, true);
        let mut last = 0.0;
        for t in 0..2000 {
            let (alpha, m) = random_step_draws(&mut rng, &inst, Mode::Pair, &sampler, 6 + trial, t);
            let next = apply(&inst, &alpha, m.as_ref()).expect("step");
            last = displacement(&inst.state, &next).expect("support").0;
            inst.state = next;
        }
        if last >= 1e-6 {
            failing += 1;
        }
        if last > worst.0 {
            worst = (last, trial);
        }
    }
    ok(
        failing == 0,
        format!("500 instances, {failing} with final displacement >= 1e-6, worst {:.3e} (trial {})", worst.0, worst.1),
    )
}

fn pair_gossip() -> Outcome {
    let mut worst = 0.0f64;
    let mut steps = 0u64;
    for trial in 0..20u64 {
        let mut rng = trial_rng(42, trial);
        let n = rng.gen_range(2..=20);
        let p = rng.gen_range(0.0..0.4);
        let adjacency = random_adjacency(&mut rng, n, p, true);
        let edges: usize = adjacency.values().map(Vec::len).sum::<usize>() / 2;
        let d = rng.gen_range(1..=3);
        let values: BTreeMap<VertexId, Vec<f64>> =
            adjacency.keys().map(|&v| (v, (0..d).map(|_| rng.r#gen::<f64>()).collect())).collect();
        let s0 = OpinionState::new(d, values.clone()).expect("state");
        let horizon = 200 * n as u64 * edges as u64;
        let mut cfg = config(
            GraphSpec::Explicit { adjacency },
            InitialRule::Explicit { values },
            // Start epsilon-trivial so the threshold never splits the graph.
            diameter(&s0).max(1e-9),
            ModelSpec::Custom {
                mode: Mode::Pair,
                alpha: AlphaSchedule::PerPairConstant {
                    inner: Box::new(AlphaSchedule::TwoPoint { a: 0.8, b: 0.0, p: 0.5 }),
                },
                sampler: Some(MatchingSampler::SingleUniformEdge),
            },
            (1..=n as VertexId).collect(),
            horizon,
        );
        cfg.seed = 42;
        let mut world = World::init(&cfg).expect("world");
        while world.t() < horizon {
            world.step().expect("step");
        }
        steps += horizon;
        let gap = diameter(world.state());
        if gap >= 1e-4 {
            return ok(false, format!("trial {trial} (n={n}, |E|={edges}): gap {gap:e} at T={horizon}"));
        }
        worst = worst.max(gap);
    }
    ok(true, format!("20 graphs, {steps} steps, worst final gap {worst:.3e}"))
}

fn random_matchings(rng: &mut impl Rng, edges: &[Edge], count: usize) -> Vec<Matching> {
    (0..count)
        .map(|_| {
            let mut order = edges.to_vec();
            order.shuffle(rng);
            let mut used = BTreeSet::new();
            Matching::new(order.into_iter().filter(|e| used.insert(e.lo()) & used.insert(e.hi())).collect::<Vec<_>>())
                .unwrap_or_default()
        })
        .collect()
}

fn light_cone() -> Outcome {
    let mut compared = 0;
    for trial in 0..100u64 {
        let mut rng = trial_rng(8, trial);
        let (graph, lo) = match trial % 3 {
            0 => (GraphSpec::Path, 1),
            1 => (GraphSpec::Bipath, -30),
            _ => (GraphSpec::Circulant { k: rng.gen_range(1..=3) }, -30),
        };
        let g = make_graph(&graph).expect("graph");
        let targets: BTreeSet<VertexId> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(lo..=30)).collect();
        let horizon = rng.gen_range(1..=25);
        let near: Vec<VertexId> = ball(&g, &targets, 1).into_iter().collect();
        let model = match rng.gen_range(0..5) {
            0 => ModelSpec::SynchronousHk,
            1 => ModelSpec::Custom { mode: Mode::Group, alpha: AlphaSchedule::Uniform01, sampler: None },
            2 => ModelSpec::Custom {
                mode: Mode::Group,
                alpha: AlphaSchedule::Periodic { values: vec![0.0, 0.5, 0.9] },
                sampler: None,
            },
            3 => ModelSpec::AsynchronousHk { window: near.clone() },
            _ => ModelSpec::Custom {
                mode: Mode::Pair,
                alpha: AlphaSchedule::TwoPoint { a: 0.7, b: 0.1, p: 0.5 },
                sampler: Some(MatchingSampler::FixedCycle {
                    matchings: random_matchings(&mut rng, &g.edges_within(&near.iter().copied().collect()), 3),
                }),
            },
        };
        let mut cfg = config(
            graph,
            InitialRule::UniformBox { lo: 0.0, hi: 1.0, dim: rng.gen_range(1..=2) },
            rng.gen_range(0.05..1.0),
            model,
            targets.into_iter().collect(),
            horizon,
        );
        cfg.seed = trial;
        let mut small = World::init(&cfg).expect("world");
        let mut large = World::with_radius(&cfg, horizon + 10).expect("world");
        loop {
            for &v in small.targets() {
                let a = small.state().get(v).expect("target");
                let b = large.state().get(v).expect("target");
                if !small.is_valid(v) || bits(a) != bits(b) {
                    return ok(false, format!("trial {trial}: vertex {v} differs at t={}", small.t()));
                }
                compared += 1;
            }
            if small.t() == horizon {
                break;
            }
            small.step().expect("step");
            large.step().expect("step");
        }
    }
    ok(true, format!("100 configs, {compared} target values identical"))
}

fn dense(inst: &FiniteInstance, alpha: &AlphaDraw, m: Option<&Matching>) -> DenseInstance {
    let ids = inst.state.ids();
    let n = ids.len();
    let pos = |v: VertexId| ids.binary_search(&v).expect("active");
    DenseInstance {
        adjacency: (0..n).map(|a| (0..n).map(|b| inst.graph.has_edge(ids[a], ids[b])).collect()).collect(),
        opinions: (0..n).map(|k| inst.state.row(k).to_vec()).collect(),
        alpha: ids.iter().map(|&v| alpha.get(v).unwrap_or(1.0)).collect(),
        eps: inst.eps,
        matching: m.map(|m| m.iter().map(|e| (pos(e.lo()), pos(e.hi()))).collect()),
    }
}

fn oracle_equivalence() -> Outcome {
    for trial in 0..100u64 {
        let mut rng = trial_rng(9, trial);
        let inst = random_instance(&mut rng, 40, 3, false);
        let mode = if trial % 2 == 0 { Mode::Group } else { Mode::Pair };
        let (alpha, sampler) = match mode {
            Mode::Group => (AlphaSchedule::Uniform01, None),
            Mode::Pair => (
                AlphaSchedule::PerPairConstant { inner: Box::new(AlphaSchedule::Uniform01) },
                Some(MatchingSampler::RandomMaximalMatching),
            ),
        };
        let adjacency = inst.state.ids().iter().map(|&v| (v, inst.graph.neighbors(v))).collect();
        let mut cfg = config(
            GraphSpec::Explicit { adjacency },
            explicit_initial(&inst.state),
            inst.eps,
            ModelSpec::Custom { mode, alpha, sampler },
            inst.state.ids().to_vec(),
            20,
        );
        cfg.seed = trial;
        let mut world = World::init(&cfg).expect("world");
        while world.t() < 20 {
            let draws = world.draws().expect("draws");
            let view = FiniteInstance { graph: inst.graph.clone(), state: world.state().clone(), eps: inst.eps };
            let expected = naive_step(&dense(&view, &draws.alpha, draws.matching.as_ref()));
            let t = world.t();
            world.step().expect("step");
            for (k, row) in expected.iter().enumerate() {
                if bits(row) != bits(world.state().row(k)) {
                    return ok(false, format!("trial {trial} ({mode:?}) t={t} agent {}", k + 1));
                }
            }
        }
    }
    ok(true, "100 instances x 20 steps bitwise equal")
}

fn delta_trivial() -> Outcome {
    let sampler = MatchingSampler::RandomMaximalMatching;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..200u64 {
        let mut rng = trial_rng(10, trial);
        let n = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=3);
        let side = rng.gen_range(0.01..1.0);
        let centre: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let state = OpinionState::new(
            d,
            (1..=n as VertexId).map(|v| (v, centre.iter().map(|c| c + side * rng.r#gen::<f64>()).collect())),
        )
        .expect("state");
        let delta = diameter(&state);
        let eps = delta * rng.gen_range(1.0..2.0);
        let graph = make_graph(&GraphSpec::Complete { n: n as i64 }).expect("graph");
        let inst = FiniteInstance { graph, state, eps };
        let mode = if trial % 2 == 0 { Mode::Group } else { Mode::Pair };
        let (alpha, m) = random_step_draws(&mut rng, &inst, mode, &sampler, trial, 0);
        let next = apply(&inst, &alpha, m.as_ref()).expect("step");
        let excess = diameter(&next) - delta;
        worst = worst.max(excess);
        if excess > 1e-12 {
            return ok(false, format!("trial {trial} ({mode:?}): diameter exceeds delta by {excess:e}"));
        }
    }
    ok(true, format!("200 instances, max diameter growth {worst:.2e}"))
}

fn preset_equivalence() -> Outcome {
    for trial in 0..100u64 {
        let mut rng = trial_rng(11, trial);
        let inst = random_instance(&mut rng, 30, 3, true);
        let mu = rng.gen_range(0.01..=0.5);
        let edges = inst.graph.edges().expect("finite");
        let adjacency: BTreeMap<_, _> = inst.state.ids().iter().map(|&v| (v, inst.graph.neighbors(v))).collect();
        let targets = inst.state.ids().to_vec();
        let mut cfg = config(
            GraphSpec::Explicit { adjacency: adjacency.clone() },
            explicit_initial(&inst.state),
            inst.eps,
            ModelSpec::Deffuant { mu },
            targets.clone(),
            30,
        );
        cfg.seed = trial;
        let mut world = World::init(&cfg).expect("world");
        let mut by_deffuant = inst.state.clone();
        let mut by_pair = inst.state.clone();
        let a = 1.0 - 2.0 * mu;
        for t in 0..30 {
            let m = MatchingSampler::SingleUniformEdge.draw_from_edges(&edges, trial, t).expect("edge");
            let e = *m.iter().next().expect("one edge");
            by_deffuant = deffuant_step(&by_deffuant, &inst.graph, e, mu, inst.eps).expect("step");
            let alpha = AlphaDraw::uniform([e.lo(), e.hi()], a).expect("alpha");
            by_pair = step_pair(&by_pair, &inst.graph, &m, &alpha, inst.eps).expect("step");
            world.step().expect("step");
            if *world.state() != by_deffuant || by_pair != by_deffuant {
                return ok(false, format!("Deffuant trial {trial} diverges at t={}", t + 1));
            }
        }
        cfg.model = ModelSpec::SynchronousHk;
        let mut world = World::init(&cfg).expect("world");
        let mut manual = inst.state.clone();
        let zero = AlphaDraw::uniform(targets.iter().copied(), 0.0).expect("alpha");
        for t in 0..30 {
            manual = step_group(&manual, &inst.graph, &zero, inst.eps).expect("step");
            world.step().expect("step");
            if *world.state() != manual {
                return ok(false, format!("synchronous HK trial {trial} diverges at t={}", t + 1));
            }
        }
    }
    ok(true, "100 instances: Deffuant preset, deffuant_step and step_pair agree; synchronous HK agrees")
}

fn main() {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("counterexample fixed point", 1, counterexample),
        ("harmonic path monotone limits", 1, harmonic_path),
        ("path and order preservation", 5, path_order),
        ("regular graph decay bound", 2, regular_decay),
        ("supermartingale inequality", 10, supermartingale),
        ("vanishing displacements", 10, vanishing_displacement),
        ("pair gossip convergence", 30, pair_gossip),
        ("light-cone exactness", 10, light_cone),
        ("oracle equivalence", 5, oracle_equivalence),
        ("delta-triviality preservation", 2, delta_trivial),
        ("preset equivalences", 2, preset_equivalence),
    ];
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time { String::new() } else { " [over time limit]".to_string() };
        println!(
            "{} {:>2}. {name}: {} ({:.2}s, limit {limit}s){timing}",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            out.detail,
            elapsed.as_secs_f64(),
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
