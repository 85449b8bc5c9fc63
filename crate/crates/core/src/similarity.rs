//! Decayed, asymmetric co-occurrence similarity over value sequences.
//!
//! For every ordered pair of positions `t < t'` inside one sequence the pair
//! `(v_t, v_t')` accumulates `f(t' - t)`. Sequences never interact: corpus
//! similarity is the sum of per-sequence similarities.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::corpus::{ObjectTable, SequenceRecord};
use crate::error::{Error, Result};
use crate::hierarchy::Attribute;
use crate::par;

/// Sequences per work unit when accumulating a corpus. Fixed so that the
/// floating-point summation order is independent of the thread count.
const SEQUENCES_PER_CHUNK: usize = 512;

/// Gap decay function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decay {
    /// `f(t) = 1 / t`
    InverseLinear,
    /// `f(t) = exp(-(t - 1))`
    ExponentialShifted,
    /// `f(1) = 1`, zero for every longer gap.
    AdjacentIndicator,
}

impl Decay {
    pub const ALL: [Decay; 3] = [
        Decay::InverseLinear,
        Decay::ExponentialShifted,
        Decay::AdjacentIndicator,
    ];

    pub fn eval(self, gap: usize) -> Result<f64> {
        if gap < 1 {
            return Err(Error::Argument("decay gap must be at least 1".into()));
        }
        Ok(self.eval_unchecked(gap))
    }

    fn eval_unchecked(self, gap: usize) -> f64 {
        match self {
            Decay::InverseLinear => 1.0 / gap as f64,
            Decay::ExponentialShifted => (-((gap - 1) as f64)).exp(),
            Decay::AdjacentIndicator => {
                if gap == 1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest gap that can carry non-zero weight, if bounded.
    fn max_gap(self) -> Option<usize> {
        match self {
            Decay::AdjacentIndicator => Some(1),
            _ => None,
        }
    }

    /// Short tag used on the command line and in file headers.
    pub fn tag(self) -> &'static str {
        match self {
            Decay::InverseLinear => "inv",
            Decay::ExponentialShifted => "exp",
            Decay::AdjacentIndicator => "adj",
        }
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inv" | "inverse-linear" => Ok(Decay::InverseLinear),
            "exp" | "exponential-shifted" => Ok(Decay::ExponentialShifted),
            "adj" | "adjacent-indicator" => Ok(Decay::AdjacentIndicator),
            other => Err(Error::Argument(format!(
                "unknown decay `{other}` (expected inv, exp or adj)"
            ))),
        }
    }
}

/// Ordered-pair weights. Only strictly positive weights are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap<K: Hash + Eq> {
    weights: HashMap<(K, K), f64>,
}

impl<K: Hash + Eq> Default for WeightMap<K> {
    fn default() -> Self {
        WeightMap {
            weights: HashMap::new(),
        }
    }
}

impl<K: Hash + Eq + Clone> WeightMap<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, src: K, dst: K, weight: f64) {
        if weight > 0.0 {
            *self.weights.entry((src, dst)).or_insert(0.0) += weight;
        }
    }

    pub fn get(&self, src: &K, dst: &K) -> f64 {
        // Tuple keys force a clone for lookup; pairs are small ids or short strings.
        self.weights
            .get(&(src.clone(), dst.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn contains(&self, src: &K, dst: &K) -> bool {
        self.weights.contains_key(&(src.clone(), dst.clone()))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &K, f64)> {
        self.weights.iter().map(|((s, d), w)| (s, d, *w))
    }

    /// Adds every entry of `other` into `self`.
    pub fn merge(&mut self, other: WeightMap<K>) {
        for ((s, d), w) in other.weights {
            self.add(s, d, w);
        }
    }

    pub fn total_weight(&self) -> f64 {
        let mut values: Vec<f64> = self.weights.values().copied().collect();
        values.sort_by(f64::total_cmp);
        par::pairwise_sum(&values)
    }
}

impl<K: Hash + Eq + Clone + Ord> WeightMap<K> {
    /// Entries sorted by `(src, dst)`.
    pub fn to_sorted_vec(&self) -> Vec<(K, K, f64)> {
        let mut out: Vec<(K, K, f64)> = self
            .weights
            .iter()
            .map(|((s, d), w)| (s.clone(), d.clone(), *w))
            .collect();
        out.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        out
    }
}

impl<K: Hash + Eq + Clone> FromIterator<(K, K, f64)> for WeightMap<K> {
    fn from_iter<I: IntoIterator<Item = (K, K, f64)>>(iter: I) -> Self {
        let mut map = WeightMap::new();
        for (s, d, w) in iter {
            map.add(s, d, w);
        }
        map
    }
}

/// Maps a record onto the values of one attribute, position by position.
pub fn project_sequence<'a>(
    record: &SequenceRecord,
    objects: &'a ObjectTable,
    attribute: Attribute,
) -> Result<Vec<&'a str>> {
    record
        .items
        .iter()
        .map(|item| {
            let object = objects
                .get(&item.track)
                .ok_or_else(|| Error::lookup("track", item.track.as_str()))?;
            attribute.value_of(object).ok_or_else(|| {
                Error::Validation(format!(
                    "track `{}` has no {} (run genre assignment first)",
                    object.track,
                    attribute.name()
                ))
            })
        })
        .collect()
}

/// Similarity of one sequence, accumulated into `out`.
fn accumulate_sequence<K: Hash + Eq + Clone>(
    sequence: &[K],
    decay: Decay,
    table: &[f64],
    out: &mut WeightMap<K>,
) {
    let n = sequence.len();
    let reach = decay.max_gap().unwrap_or(n);
    for (t, src) in sequence.iter().enumerate() {
        let end = n.min(t + reach + 1);
        for (later, dst) in sequence[t + 1..end].iter().enumerate() {
            out.add(src.clone(), dst.clone(), table[later + 1]);
        }
    }
}

fn decay_table(decay: Decay, max_gap: usize) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((1..=max_gap).map(|g| decay.eval_unchecked(g)))
        .collect()
}

/// Similarity over a collection of sequences.
///
/// Fails if any sequence is empty.
pub fn pairwise_similarity<K, S>(sequences: &[S], decay: Decay) -> Result<WeightMap<K>>
where
    K: Hash + Eq + Clone + Send + Sync,
    S: AsRef<[K]> + Sync,
{
    if let Some(pos) = sequences.iter().position(|s| s.as_ref().is_empty()) {
        return Err(Error::Argument(format!("sequence {pos} is empty")));
    }
    let longest = sequences
        .iter()
        .map(|s| s.as_ref().len())
        .max()
        .unwrap_or(0);
    let table = decay_table(decay, longest);

    let partials = par::map_chunks(sequences, SEQUENCES_PER_CHUNK, |chunk| {
        let mut local = WeightMap::new();
        for seq in chunk {
            accumulate_sequence(seq.as_ref(), decay, &table, &mut local);
        }
        local
    });
    let mut partials = partials.into_iter();
    let mut total = partials.next().unwrap_or_default();
    for part in partials {
        total.merge(part);
    }
    Ok(total)
}
