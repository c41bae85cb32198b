//! Seeded schedules for stubbornness and for the interacting sets.
//!
//! Every draw is derived from a fresh ChaCha8 stream keyed by
//! `(seed, stream, a, b, t)`, so a value depends only on its key and never on
//! the order in which other values were requested. Two simulations over
//! different windows see the same randomness on the vertices they share.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Mode, deffuant_alpha};
use crate::graph::{Edge, Matching, SocialGraph, VertexId};

pub type Seed = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("stubbornness value {0} is outside [0, 1]")]
    AlphaRange(f64),
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("periodic schedule needs at least one value")]
    EmptyPeriod,
    #[error("fixed cycle needs at least one matching")]
    EmptyCycle,
    #[error("selection window is empty")]
    EmptyWindow,
    #[error("window contains no social edge")]
    NoEdge,
    #[error("rate mu = {0} is outside (0, 1/2]")]
    InvalidMu(f64),
}

/// Independent stream identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Alpha = 1,
    PairAlpha = 2,
    Matching = 3,
    AsyncSelect = 4,
    Initial = 5,
    Suite = 6,
}

/// A generator that depends only on its key.
pub fn keyed_rng(seed: Seed, stream: Stream, a: i64, b: i64, t: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([seed, stream as u64, a as u64, t])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(b as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    Constant {
        value: f64,
    },
    /// `a` with probability `p`, otherwise `b`.
    TwoPoint {
        a: f64,
        b: f64,
        p: f64,
    },
    Uniform01,
    /// `values[t mod len]`, the same for every vertex.
    Periodic {
        values: Vec<f64>,
    },
    /// Pair mode: both endpoints of a matched pair share one draw of `inner`.
    PerPairConstant {
        inner: Box<AlphaSchedule>,
    },
    /// One vertex of `window`, chosen uniformly each step, gets 0; all others 1.
    AsyncSingle {
        window: Vec<VertexId>,
    },
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let unit = |v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SamplingError::AlphaRange(v))
            }
        };
        match self {
            AlphaSchedule::Constant { value } => unit(*value),
            AlphaSchedule::TwoPoint { a, b, p } => {
                unit(*a)?;
                unit(*b)?;
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(SamplingError::Probability(*p))
                }
            }
            AlphaSchedule::Uniform01 => Ok(()),
            AlphaSchedule::Periodic { values } => {
                if values.is_empty() {
                    return Err(SamplingError::EmptyPeriod);
                }
                values.iter().try_for_each(|v| unit(*v))
            }
            AlphaSchedule::PerPairConstant { inner } => inner.validate(),
            AlphaSchedule::AsyncSingle { window } => {
                if window.is_empty() {
                    Err(SamplingError::EmptyWindow)
                } else {
                    Ok(())
                }
            }
        }
    }

    /// True when every vertex receives the same value at each step.
    pub fn is_uniform_across_vertices(&self) -> bool {
        matches!(self, AlphaSchedule::Constant { .. } | AlphaSchedule::Periodic { .. })
    }

    /// Stubbornness of vertex `i` at time `t`.
    pub fn draw(&self, seed: Seed, i: VertexId, t: u64) -> f64 {
        match self {
            AlphaSchedule::Constant { value } => *value,
            AlphaSchedule::TwoPoint { a, b, p } => {
                let u: f64 = keyed_rng(seed, Stream::Alpha, i, 0, t).r#gen();
                if u < *p { *a } else { *b }
            }
            AlphaSchedule::Uniform01 => keyed_rng(seed, Stream::Alpha, i, 0, t).r#gen(),
            AlphaSchedule::Periodic { values } => values[(t % values.len() as u64) as usize],
            AlphaSchedule::PerPairConstant { inner } => inner.draw(seed, i, t),
            AlphaSchedule::AsyncSingle { .. } => {
                if self.async_selected(seed, t) == Some(i) { 0.0 } else { 1.0 }
            }
        }
    }

    /// Shared stubbornness of the matched pair `e` at time `t`, or `None` when
    /// endpoints draw independently.
    pub fn draw_pair(&self, seed: Seed, e: Edge, t: u64) -> Option<f64> {
        match self {
            AlphaSchedule::PerPairConstant { inner } => {
                Some(inner.draw_keyed(seed, Stream::PairAlpha, e.lo(), e.hi(), t))
            }
            _ => None,
        }
    }

    fn draw_keyed(&self, seed: Seed, stream: Stream, a: i64, b: i64, t: u64) -> f64 {
        match self {
            AlphaSchedule::TwoPoint { a: va, b: vb, p } => {
                let u: f64 = keyed_rng(seed, stream, a, b, t).r#gen();
                if u < *p { *va } else { *vb }
            }
            AlphaSchedule::Uniform01 => keyed_rng(seed, stream, a, b, t).r#gen(),
            AlphaSchedule::PerPairConstant { inner } => inner.draw_keyed(seed, stream, a, b, t),
            other => other.draw(seed, a, t),
        }
    }

    /// The vertex released at time `t` by an `AsyncSingle` schedule.
    pub fn async_selected(&self, seed: Seed, t: u64) -> Option<VertexId> {
        match self {
            AlphaSchedule::AsyncSingle { window } if !window.is_empty() => {
                let mut rng = keyed_rng(seed, Stream::AsyncSelect, 0, 0, t);
                Some(window[rng.gen_range(0..window.len())])
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchingSampler {
    /// One social edge inside the window, uniformly at random.
    SingleUniformEdge,
    /// Greedy matching over a uniformly shuffled edge list; always maximal.
    RandomMaximalMatching,
    /// `matchings[t mod len]`.
    FixedCycle { matchings: Vec<Matching> },
}

impl MatchingSampler {
    pub fn validate(&self) -> Result<(), SamplingError> {
        match self {
            MatchingSampler::FixedCycle { matchings } if matchings.is_empty() => {
                Err(SamplingError::EmptyCycle)
            }
            _ => Ok(()),
        }
    }

    /// Draw from a precomputed, ascending list of window edges.
    pub fn draw_from_edges(&self, edges: &[Edge], seed: Seed, t: u64) -> Result<Matching, SamplingError> {
        match self {
            MatchingSampler::SingleUniformEdge => {
                if edges.is_empty() {
                    return Err(SamplingError::NoEdge);
                }
                let mut rng = keyed_rng(seed, Stream::Matching, 0, 0, t);
                Ok(Matching::single(edges[rng.gen_range(0..edges.len())]))
            }
            MatchingSampler::RandomMaximalMatching => {
                let mut order = edges.to_vec();
                order.shuffle(&mut keyed_rng(seed, Stream::Matching, 0, 0, t));
                let mut used = BTreeSet::new();
                let mut chosen = Vec::new();
                for e in order {
                    if !used.contains(&e.lo()) && !used.contains(&e.hi()) {
                        used.insert(e.lo());
                        used.insert(e.hi());
                        chosen.push(e);
                    }
                }
                Ok(Matching::new(chosen).expect("greedy selection is a matching"))
            }
            MatchingSampler::FixedCycle { matchings } => {
                if matchings.is_empty() {
                    return Err(SamplingError::EmptyCycle);
                }
                Ok(matchings[(t % matchings.len() as u64) as usize].clone())
            }
        }
    }
}

pub fn draw_matching(
    ms: &MatchingSampler,
    g: &SocialGraph,
    window: &BTreeSet<VertexId>,
    t: u64,
    seed: Seed,
) -> Result<Matching, SamplingError> {
    ms.draw_from_edges(&g.edges_within(window), seed, t)
}

/// Named special cases of the mixed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    SynchronousHk,
    AsynchronousHk { window: Vec<VertexId> },
    Deffuant { mu: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetParts {
    pub mode: Mode,
    pub alpha: AlphaSchedule,
    pub sampler: Option<MatchingSampler>,
}

pub fn preset(p: &Preset) -> Result<PresetParts, SamplingError> {
    match p {
        Preset::SynchronousHk => Ok(PresetParts {
            mode: Mode::Group,
            alpha: AlphaSchedule::Constant { value: 0.0 },
            sampler: None,
        }),
        Preset::AsynchronousHk { window } => {
            let alpha = AlphaSchedule::AsyncSingle { window: window.clone() };
            alpha.validate()?;
            Ok(PresetParts { mode: Mode::Group, alpha, sampler: None })
        }
        Preset::Deffuant { mu } => {
            let value = deffuant_alpha(*mu).map_err(|_| SamplingError::InvalidMu(*mu))?;
            Ok(PresetParts {
                mode: Mode::Pair,
                alpha: AlphaSchedule::Constant { value },
                sampler: Some(MatchingSampler::SingleUniformEdge),
            })
        }
    }
}
