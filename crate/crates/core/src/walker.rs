//! Coupled, synchronized, constrained biased random walks.
//!
//! One walker per layer. At every step the top walker moves over its
//! out-neighbours with probability proportional to edge weight; each lower
//! walker then moves the same way, restricted to the values compatible with
//! the choice just made one layer up.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;

use crate::corpus::{Item, SequenceRecord, MIXED_GENRE};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::hierarchy::Hierarchy;
use crate::par;
use crate::rng::{self, StageRng};

#[derive(Debug, Clone)]
pub struct WalkerState {
    positions: Vec<NodeId>,
    rng: StageRng,
    steps: u64,
    restarts: u64,
}

/// Draws proportionally to `weight`, or uniformly if every weight is zero.
fn pick(rng: &mut StageRng, candidates: &[NodeId], weight: impl Fn(NodeId) -> f64) -> NodeId {
    match candidates.choose_weighted(rng, |&v| weight(v)) {
        Ok(&v) => v,
        Err(_) => *candidates
            .choose(rng)
            .expect("candidate set is never empty"),
    }
}

fn sample_start(h: &Hierarchy, rng: &mut StageRng) -> Vec<NodeId> {
    let top = h.graph(0);
    let all: Vec<NodeId> = (0..top.node_count() as NodeId).collect();
    let mut positions = Vec::with_capacity(h.layer_count());
    positions.push(pick(rng, &all, |v| top.out_weight(v)));
    for layer in 1..h.layer_count() {
        let graph = h.graph(layer);
        let allowed = h.compat_slice(layer - 1, positions[layer - 1]);
        positions.push(pick(rng, allowed, |v| graph.out_weight(v)));
    }
    positions
}

fn check_non_empty(h: &Hierarchy) -> Result<()> {
    match h.graphs().iter().position(|g| g.node_count() == 0) {
        Some(layer) => Err(Error::Argument(format!(
            "layer `{}` of the hierarchy is empty",
            h.attributes()[layer]
        ))),
        None => Ok(()),
    }
}

impl WalkerState {
    /// Start positions: the top layer by out-weight, each lower layer by
    /// out-weight among values compatible with the layer above.
    pub fn init(h: &Hierarchy, seed: u64) -> Result<Self> {
        check_non_empty(h)?;
        let mut rng = rng::rng_from_seed(seed);
        let positions = sample_start(h, &mut rng);
        Ok(WalkerState {
            positions,
            rng,
            steps: 0,
            restarts: 0,
        })
    }

    /// A walker placed at explicit positions, which must be mutually compatible.
    pub fn at(h: &Hierarchy, positions: Vec<NodeId>, seed: u64) -> Result<Self> {
        check_non_empty(h)?;
        if positions.len() != h.layer_count() {
            return Err(Error::Argument(format!(
                "{} positions for {} layers",
                positions.len(),
                h.layer_count()
            )));
        }
        for (layer, &p) in positions.iter().enumerate() {
            if p as usize >= h.graph(layer).node_count() {
                return Err(Error::lookup("node", p.to_string()));
            }
            if layer > 0 && !h.compat_slice(layer - 1, positions[layer - 1]).contains(&p) {
                return Err(Error::Argument(format!(
                    "position {p} at layer {layer} is incompatible with the layer above"
                )));
            }
        }
        Ok(WalkerState {
            positions,
            rng: rng::rng_from_seed(seed),
            steps: 0,
            restarts: 0,
        })
    }

    /// Current node per layer, top first.
    pub fn positions(&self) -> &[NodeId] {
        &self.positions
    }

    pub fn bottom(&self) -> NodeId {
        *self.positions.last().expect("at least one layer")
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Steps that hit a top-layer dead end and restarted from fresh positions.
    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    /// Advances every layer once, top to bottom, and returns the new track.
    pub fn step(&mut self, h: &Hierarchy) -> Result<NodeId> {
        if self.positions.len() != h.layer_count() {
            return Err(Error::Argument(
                "walker does not match this hierarchy".into(),
            ));
        }
        self.steps += 1;
        for layer in 0..h.layer_count() {
            let allowed = (layer > 0).then(|| h.compat_slice(layer - 1, self.positions[layer - 1]));
            let enabled: Vec<(NodeId, f64)> = h
                .enabled_iter(layer, self.positions[layer], allowed)
                .collect();
            self.positions[layer] = match (enabled.choose_weighted(&mut self.rng, |e| e.1), allowed)
            {
                (Ok(&(v, _)), _) => v,
                // Nothing enabled: jump uniformly within the parent's values.
                (Err(_), Some(allowed)) => *allowed
                    .choose(&mut self.rng)
                    .expect("compat sets are non-empty"),
                (Err(_), None) => {
                    self.positions = sample_start(h, &mut self.rng);
                    self.restarts += 1;
                    break;
                }
            };
        }
        Ok(self.bottom())
    }
}

/// Transition probabilities `s(i, j) / sum over N_t` at one layer. Empty when
/// the enabled set is empty.
pub fn transition_distribution(
    h: &Hierarchy,
    layer: usize,
    current: NodeId,
    parent_choice: Option<NodeId>,
) -> Result<Vec<(NodeId, f64)>> {
    let enabled: Vec<(NodeId, f64)> = h.enabled_edges(layer, current, parent_choice)?.collect();
    let total: f64 = enabled.iter().map(|e| e.1).sum();
    Ok(enabled.into_iter().map(|(v, w)| (v, w / total)).collect())
}

/// Positions at every step of one generated walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    /// `positions[t][layer]`
    pub positions: Vec<Vec<NodeId>>,
    pub restarts: u64,
}

impl WalkTrace {
    pub fn tracks(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.positions
            .iter()
            .map(|p| *p.last().expect("at least one layer"))
    }
}

pub fn walk(h: &Hierarchy, length: usize, seed: u64) -> Result<WalkTrace> {
    if length == 0 {
        return Err(Error::Argument("walk length must be at least 1".into()));
    }
    let mut state = WalkerState::init(h, seed)?;
    let mut positions = Vec::with_capacity(length);
    positions.push(state.positions().to_vec());
    for _ in 1..length {
        state.step(h)?;
        positions.push(state.positions().to_vec());
    }
    Ok(WalkTrace {
        positions,
        restarts: state.restarts(),
    })
}

fn to_record(h: &Hierarchy, trace: &WalkTrace, id: String) -> SequenceRecord {
    let mut genre_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let items = trace
        .tracks()
        .map(|t| {
            let o = h.object(t);
            if let Some(g) = o.genre.as_deref() {
                *genre_counts.entry(g).or_insert(0) += 1;
            }
            Item::new(o.track.clone(), o.artist.clone())
        })
        .collect();
    // Ties go to the lexicographically smallest genre.
    let label = genre_counts
        .iter()
        .fold(None::<(&str, usize)>, |best, (&g, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((g, c)),
        })
        .map_or(MIXED_GENRE, |(g, _)| g);
    SequenceRecord::new(id, label, items)
}

/// One sequence of exactly `length` tracks: the start plus `length - 1`
/// steps, labelled with the most frequent genre among its tracks.
pub fn generate(h: &Hierarchy, length: usize, seed: u64) -> Result<SequenceRecord> {
    let trace = walk(h, length, seed)?;
    Ok(to_record(h, &trace, format!("walk-{seed}")))
}

/// `count` independent sequences; sequence `i` uses a seed derived from
/// `(seed, i)`, so the output does not depend on scheduling.
pub fn generate_many(
    h: &Hierarchy,
    length: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SequenceRecord>> {
    par::map_range(count as u64, |i| {
        let trace = walk(h, length, rng::indexed_seed(seed, i))?;
        Ok(to_record(h, &trace, format!("walk-{seed}-{i}")))
    })
    .into_iter()
    .collect()
}
