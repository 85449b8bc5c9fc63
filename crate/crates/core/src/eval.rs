//! Likelihood evaluation of sequence models on held-out playlists.
//!
//! A model assigns each consecutive pair of a test playlist a transition
//! probability; the playlist's log-likelihood is the sum of their logs and a
//! model is scored by the mean over the test set. Transition probabilities
//! are additively smoothed with `1 / |A|`, where `|A|` is the size of the
//! layer's training vocabulary:
//!
//! ```text
//! P(j | i) = (s(i, j) + 1/|A|) / (sum_{o in N_t} s(i, o) + |N_t| / |A|)
//! ```
//!
//! and `P = 1/|A|` when `N_t` is empty.

use std::f64::consts::LN_10;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::corpus::{split_corpus, Corpus, ObjectTable, SequenceRecord, TrackObject};
use crate::error::{Error, Result};
use crate::graph::{NodeId, SimilarityGraph};
use crate::hierarchy::{build_adjacency_hierarchy, build_hierarchy, Attribute, Hierarchy};
use crate::par;
use crate::similarity::Decay;

pub const DEFAULT_SPLITS: [f64; 3] = [0.5, 0.7, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Coupled genre / artist / track graphs with decayed similarity.
    Hierarchical,
    /// Track graph only, decayed similarity.
    MultiHop,
    /// Undirected track graph weighted by adjacency counts.
    SingleHop,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::Hierarchical,
        ModelKind::MultiHop,
        ModelKind::SingleHop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hierarchical => "hierarchical",
            ModelKind::MultiHop => "multi-hop",
            ModelKind::SingleHop => "single-hop",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub decay: Decay,
    pub layers: Vec<Attribute>,
    /// When false, transitions use the raw weight ratio and unseen
    /// transitions have probability zero.
    pub smoothing: bool,
}

impl ModelSpec {
    pub fn hierarchical() -> Self {
        ModelSpec {
            kind: ModelKind::Hierarchical,
            decay: Decay::ExponentialShifted,
            layers: vec![Attribute::Genre, Attribute::Artist, Attribute::Track],
            smoothing: true,
        }
    }

    pub fn multi_hop() -> Self {
        ModelSpec {
            kind: ModelKind::MultiHop,
            decay: Decay::ExponentialShifted,
            layers: vec![Attribute::Track],
            smoothing: true,
        }
    }

    pub fn single_hop() -> Self {
        ModelSpec {
            kind: ModelKind::SingleHop,
            decay: Decay::AdjacentIndicator,
            layers: vec![Attribute::Track],
            smoothing: true,
        }
    }

    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Hierarchical => Self::hierarchical(),
            ModelKind::MultiHop => Self::multi_hop(),
            ModelKind::SingleHop => Self::single_hop(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    hierarchy: Hierarchy,
}

impl Model {
    pub fn new(spec: ModelSpec, hierarchy: Hierarchy) -> Self {
        Model { spec, hierarchy }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }
}

pub fn build_model(spec: &ModelSpec, train: &Corpus) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::Argument(
            "cannot build a model from an empty corpus".into(),
        ));
    }
    let hierarchy = match spec.kind {
        ModelKind::SingleHop => build_adjacency_hierarchy(train)?,
        ModelKind::Hierarchical | ModelKind::MultiHop => {
            build_hierarchy(train, spec.decay, &spec.layers)?
        }
    };
    Ok(Model::new(spec.clone(), hierarchy))
}

pub fn build_single_hop_model(train: &Corpus) -> Result<Model> {
    build_model(&ModelSpec::single_hop(), train)
}

fn smoothing_formula(s: f64, sum: f64, enabled: usize, domain_size: usize) -> f64 {
    let eps = 1.0 / domain_size as f64;
    if enabled == 0 {
        eps
    } else {
        (s + eps) / (sum + enabled as f64 * eps)
    }
}

/// Smoothed probability of moving from `src` to `dst` given the enabled set
/// `candidates`. `dst = None` stands for a value the graph has never seen.
pub fn smoothed_prob(
    graph: &SimilarityGraph,
    candidates: &[NodeId],
    src: NodeId,
    dst: Option<NodeId>,
    domain_size: usize,
) -> Result<f64> {
    if domain_size == 0 {
        return Err(Error::Argument("domain size must be at least 1".into()));
    }
    let sum: f64 = candidates.iter().map(|&o| graph.weight(src, o)).sum();
    let s = dst.map_or(0.0, |d| graph.weight(src, d));
    Ok(smoothing_formula(s, sum, candidates.len(), domain_size))
}

/// Log-probability of one transition and whether any layer hit `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionScore {
    pub log_prob: f64,
    pub smoothed: bool,
}

/// Scores `from -> to`. Layer 0 uses the full out-neighbourhood; every lower
/// layer restricts it to the values compatible with `to`'s value one layer up.
pub fn score_transition(model: &Model, from: &TrackObject, to: &TrackObject) -> TransitionScore {
    let h = &model.hierarchy;
    let mut log_prob = 0.0;
    let mut smoothed = false;
    for (layer, attribute) in h.attributes().iter().enumerate() {
        let graph = h.graph(layer);
        let domain = graph.node_count();
        let src = attribute.value_of(from).and_then(|v| graph.node(v));
        let dst = attribute.value_of(to).and_then(|v| graph.node(v));
        let allowed: Option<&[NodeId]> = (layer > 0).then(|| {
            let upper = h.attributes()[layer - 1];
            upper
                .value_of(to)
                .and_then(|v| h.graph(layer - 1).node(v))
                .map_or(&[][..], |p| h.compat_slice(layer - 1, p))
        });

        let (s, sum, enabled, dst_enabled) = match src {
            Some(src) => {
                let mut sum = 0.0;
                let mut enabled = 0;
                let mut dst_enabled = false;
                for (v, w) in h.enabled_iter(layer, src, allowed) {
                    sum += w;
                    enabled += 1;
                    dst_enabled |= Some(v) == dst;
                }
                let s = dst.map_or(0.0, |d| graph.weight(src, d));
                (s, sum, enabled, dst_enabled)
            }
            None => (0.0, 0.0, 0, false),
        };
        smoothed |= s == 0.0;
        let p = if model.spec.smoothing {
            smoothing_formula(s, sum, enabled, domain)
        } else if dst_enabled {
            s / sum
        } else {
            0.0
        };
        log_prob += p.ln();
    }
    TransitionScore { log_prob, smoothed }
}

pub fn transition_log_prob(model: &Model, from: &TrackObject, to: &TrackObject) -> f64 {
    score_transition(model, from, to).log_prob
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceScore {
    pub log_likelihood: f64,
    pub transitions: usize,
    pub smoothed_transitions: usize,
}

pub fn score_sequence(
    model: &Model,
    objects: &ObjectTable,
    record: &SequenceRecord,
) -> Result<SequenceScore> {
    if record.len() < 2 {
        return Err(Error::Argument(format!(
            "record `{}` has no transition to score",
            record.id
        )));
    }
    let resolved = record
        .items
        .iter()
        .map(|it| {
            objects
                .get(&it.track)
                .ok_or_else(|| Error::lookup("track", it.track.as_str()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut score = SequenceScore {
        log_likelihood: 0.0,
        transitions: 0,
        smoothed_transitions: 0,
    };
    for pair in resolved.windows(2) {
        let t = score_transition(model, pair[0], pair[1]);
        score.log_likelihood += t.log_prob;
        score.transitions += 1;
        score.smoothed_transitions += usize::from(t.smoothed);
    }
    Ok(score)
}

/// Natural-log likelihood of one playlist: the sum over consecutive pairs.
pub fn sequence_log_likelihood(
    model: &Model,
    objects: &ObjectTable,
    record: &SequenceRecord,
) -> Result<f64> {
    Ok(score_sequence(model, objects, record)?.log_likelihood)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusScore {
    pub avg_log_likelihood: f64,
    pub sequences: usize,
    pub smoothed_transitions: u64,
}

pub fn score_corpus(model: &Model, test: &Corpus) -> Result<CorpusScore> {
    if test.is_empty() {
        return Err(Error::Argument("test corpus is empty".into()));
    }
    let scores = par::map(test.records(), |r| score_sequence(model, test.objects(), r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<f64> = scores.iter().map(|s| s.log_likelihood).collect();
    Ok(CorpusScore {
        avg_log_likelihood: mean(&logs),
        sequences: scores.len(),
        smoothed_transitions: scores.iter().map(|s| s.smoothed_transitions as u64).sum(),
    })
}

/// Mean log-likelihood of the test playlists.
pub fn average_log_likelihood(model: &Model, test: &Corpus) -> Result<f64> {
    Ok(score_corpus(model, test)?.avg_log_likelihood)
}

/// Pairwise-summed mean; fails on an empty slice.
pub fn mean_log_likelihood(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("no playlists to average".into()));
    }
    Ok(mean(values))
}

fn mean(values: &[f64]) -> f64 {
    par::pairwise_sum(values) / values.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: ModelKind,
    pub split: f64,
    pub avg_loglik_nat: f64,
    pub n_test: usize,
    pub smoothed_transitions: u64,
}

impl ReportRow {
    /// The same likelihood in decades.
    pub fn avg_loglik_log10(&self) -> f64 {
        self.avg_loglik_nat / LN_10
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn get(&self, model: ModelKind, split: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.split == split)
    }

    pub fn splits(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.split) {
                out.push(r.split);
            }
        }
        out
    }

    /// `L(better) - L(worse)` in decades for one split.
    pub fn gap_log10(&self, better: ModelKind, worse: ModelKind, split: f64) -> Option<f64> {
        Some(
            self.get(better, split)?.avg_loglik_log10()
                - self.get(worse, split)?.avg_loglik_log10(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "model,split,avg_loglik_nat,avg_loglik_log10,n_test,smoothed_transitions"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.model,
                r.split,
                r.avg_loglik_nat,
                r.avg_loglik_log10(),
                r.n_test,
                r.smoothed_transitions
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub splits: Vec<f64>,
    pub seed: u64,
    /// Decay of the hierarchical and multi-hop models.
    pub decay: Decay,
    /// Layers of the hierarchical model.
    pub layers: Vec<Attribute>,
    pub smoothing: bool,
}

impl BenchmarkOptions {
    pub fn new(seed: u64) -> Self {
        BenchmarkOptions {
            splits: DEFAULT_SPLITS.to_vec(),
            seed,
            decay: Decay::ExponentialShifted,
            layers: ModelSpec::hierarchical().layers,
            smoothing: true,
        }
    }

    fn spec(&self, kind: ModelKind) -> ModelSpec {
        let mut spec = ModelSpec::for_kind(kind);
        spec.smoothing = self.smoothing;
        if kind != ModelKind::SingleHop {
            spec.decay = self.decay;
        }
        if kind == ModelKind::Hierarchical {
            spec.layers = self.layers.clone();
        }
        spec
    }
}

/// Splits the annotated corpus at every fraction, builds the three models on
/// each training half and scores them on the matching test half.
pub fn run_benchmark(corpus: &Corpus, options: &BenchmarkOptions) -> Result<EvalReport> {
    if !corpus.is_annotated() {
        return Err(Error::Validation(
            "benchmark corpus must have genres assigned".into(),
        ));
    }
    let mut report = EvalReport::default();
    for &split in &options.splits {
        let (train, test) = split_corpus(corpus, split, options.seed)?;
        for kind in ModelKind::ALL {
            let model = build_model(&options.spec(kind), &train)?;
            let score = score_corpus(&model, &test)?;
            report.rows.push(ReportRow {
                model: kind,
                split,
                avg_loglik_nat: score.avg_log_likelihood,
                n_test: score.sequences,
                smoothed_transitions: score.smoothed_transitions,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{assign_genres, Item};
    use crate::similarity::WeightMap;
    use crate::walker::transition_distribution;
    use proptest::prelude::*;

    fn corpus(records: &[(&str, &[(&str, &str)])]) -> Corpus {
        let records = records
            .iter()
            .enumerate()
            .map(|(i, (label, items))| {
                SequenceRecord::new(
                    format!("p{i}"),
                    *label,
                    items.iter().map(|(t, a)| Item::new(*t, *a)).collect(),
                )
            })
            .collect();
        assign_genres(Corpus::from_records(records).unwrap()).unwrap()
    }

    fn graph(edges: &[(&str, &str, f64)]) -> SimilarityGraph {
        let map: WeightMap<String> = edges
            .iter()
            .map(|(s, d, w)| (s.to_string(), d.to_string(), *w))
            .collect();
        SimilarityGraph::from_weights(&map)
    }

    fn obj(track: &str, artist: &str, genre: &str) -> TrackObject {
        TrackObject {
            track: track.into(),
            artist: artist.into(),
            genre: Some(genre.into()),
        }
    }

    #[test]
    fn smoothing_hand_example() {
        // s(src,x) = 3, y is a candidate with no edge. Add a y->x edge so y is a node.
        let g = graph(&[("src", "x", 3.0), ("y", "x", 1.0)]);
        let (src, x, y) = (
            g.node("src").unwrap(),
            g.node("x").unwrap(),
            g.node("y").unwrap(),
        );
        let px = smoothed_prob(&g, &[x, y], src, Some(x), 10).unwrap();
        let py = smoothed_prob(&g, &[x, y], src, Some(y), 10).unwrap();
        assert_eq!(px, 3.1 / 3.2);
        assert_eq!(py, 0.1 / 3.2);
        assert!((px - 0.96875).abs() < 1e-15 && (py - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn smoothing_outside_candidates_and_empty() {
        let g = graph(&[("src", "x", 3.0), ("y", "x", 1.0), ("z", "x", 1.0)]);
        let (src, x, y, z) = (
            g.node("src").unwrap(),
            g.node("x").unwrap(),
            g.node("y").unwrap(),
            g.node("z").unwrap(),
        );
        let p = smoothed_prob(&g, &[x, y], src, Some(z), 10).unwrap();
        assert!((p - 0.03125).abs() < 1e-15);
        assert_eq!(smoothed_prob(&g, &[], src, Some(x), 4).unwrap(), 0.25);
        assert_eq!(smoothed_prob(&g, &[x], src, None, 10).unwrap(), 0.1 / 3.1);
        assert!(matches!(
            smoothed_prob(&g, &[x], src, Some(x), 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn multi_hop_certain_transition() {
        let c = corpus(&[("G", &[("t1", "a"), ("t2", "a")])]);
        let model = build_model(&ModelSpec::multi_hop(), &c).unwrap();
        let lp = transition_log_prob(&model, &obj("t1", "a", "G"), &obj("t2", "a", "G"));
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn hierarchical_hand_example() {
        // One genre, one artist, record t1 t2 t1 with f(t) = exp(-(t-1)).
        // Track layer: s(t1,t2) = 1, s(t1,t1) = e^-1, |A_3| = 2.
        // Genre and artist terms are certain (single value, single edge).
        let c = corpus(&[("G", &[("t1", "a"), ("t2", "a"), ("t1", "a")])]);
        let model = build_model(&ModelSpec::hierarchical(), &c).unwrap();
        let e1 = (-1.0f64).exp();
        let expected = (1.5 / (1.0 + e1 + 1.0)).ln();
        let lp = transition_log_prob(&model, &obj("t1", "a", "G"), &obj("t2", "a", "G"));
        assert!((lp - expected).abs() < 1e-12, "{lp} vs {expected}");

        // t2 -> t1: only out-edge of t2 is t1 (weight 1), so P = 1.
        let lp = transition_log_prob(&model, &obj("t2", "a", "G"), &obj("t1", "a", "G"));
        assert!(lp.abs() < 1e-15);
    }

    #[test]
    fn hierarchical_three_factor_product() {
        // Two genres so every layer contributes a non-trivial factor.
        let c = corpus(&[
            ("R", &[("t1", "a1"), ("t2", "a2"), ("t3", "a1")]),
            ("P", &[("t4", "a3"), ("t5", "a3")]),
            ("R", &[("t2", "a2"), ("t4", "a3")]),
        ]);
        let model = build_model(&ModelSpec::hierarchical(), &c).unwrap();
        let objects = c.objects();
        let (from, to) = (&objects["t2"], &objects["t4"]);
        // t2: R/a2; t4: genre by counts P×1, R×1 -> P (lexicographic).
        assert_eq!(to.genre.as_deref(), Some("P"));

        let e1 = (-1.0f64).exp();
        // Genre sequences: [R,R,R], [P,P], [R,P]; genres {P,R}, |A_1| = 2.
        // s(R,P) = 1, s(R,R) = 1 + e^-1 + 1.
        let sum_r = 1.0 + (2.0 + e1);
        let p_genre = (1.0 + 0.5) / (sum_r + 2.0 * 0.5);
        // Artists: [a1,a2,a1], [a3,a3], [a2,a3]; |A_2| = 3; compat(P) = {a3}.
        // Out-edges of a2: a1 (1), a3 (1); restricted to {a3}.
        let p_artist: f64 = (1.0 + 1.0 / 3.0) / (1.0 + 1.0 / 3.0);
        // Tracks: [t1,t2,t3], [t4,t5], [t2,t4]; |A_3| = 5; compat(a3) = {t4,t5}.
        // Out-edges of t2: t3 (1), t4 (1); restricted to {t4, t5} -> {t4}.
        let p_track: f64 = (1.0 + 0.2) / (1.0 + 0.2);
        let expected = p_genre.ln() + p_artist.ln() + p_track.ln();
        let lp = transition_log_prob(&model, from, to);
        assert!((lp - expected).abs() < 1e-12, "{lp} vs {expected}");
    }

    #[test]
    fn unknown_destination_uses_numerator_branch() {
        let c = corpus(&[("G", &[("t1", "a"), ("t2", "a"), ("t3", "a")])]);
        let model = build_model(&ModelSpec::multi_hop(), &c).unwrap();
        let e1 = (-1.0f64).exp();
        // From t1: s(t1,t2) = 1, s(t1,t3) = e^-1; |A| = 3.
        let lp = transition_log_prob(&model, &obj("t1", "a", "G"), &obj("new", "a", "G"));
        let expected = ((1.0 / 3.0) / (1.0 + e1 + 2.0 / 3.0)).ln();
        assert!((lp - expected).abs() < 1e-12);
        // Unknown source: uniform 1/|A|.
        let lp = transition_log_prob(&model, &obj("new", "a", "G"), &obj("t1", "a", "G"));
        assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        let score = score_transition(&model, &obj("new", "a", "G"), &obj("t1", "a", "G"));
        assert!(score.smoothed);
    }

    #[test]
    fn sequence_decomposes_into_pairs() {
        let c = corpus(&[("G", &[("t1", "a"), ("t2", "a"), ("t3", "a"), ("t1", "a")])]);
        let model = build_model(&ModelSpec::multi_hop(), &c).unwrap();
        let o = c.objects();
        let rec = |tracks: &[&str]| {
            SequenceRecord::new(
                "x",
                "G",
                tracks.iter().map(|t| Item::new(*t, "a")).collect(),
            )
        };
        let two = sequence_log_likelihood(&model, o, &rec(&["t1", "t2"])).unwrap();
        assert_eq!(two, transition_log_prob(&model, &o["t1"], &o["t2"]));
        let three = sequence_log_likelihood(&model, o, &rec(&["t1", "t2", "t3"])).unwrap();
        let parts = transition_log_prob(&model, &o["t1"], &o["t2"])
            + transition_log_prob(&model, &o["t2"], &o["t3"]);
        assert_eq!(three, parts);
        assert!(sequence_log_likelihood(&model, o, &rec(&["t1"])).is_err());
        assert!(sequence_log_likelihood(&model, o, &rec(&["t1", "zz"])).is_err());
    }

    #[test]
    fn certain_playlist_scores_zero() {
        let c = corpus(&[
            ("G", &[("t1", "a"), ("t2", "a")]),
            ("G", &[("t2", "a"), ("t3", "a")]),
        ]);
        let model = build_model(&ModelSpec::single_hop(), &c).unwrap();
        // Single-hop: t1's only neighbour is t2.
        let rec = SequenceRecord::new("x", "G", vec![Item::new("t1", "a"), Item::new("t2", "a")]);
        assert_eq!(
            sequence_log_likelihood(&model, c.objects(), &rec).unwrap(),
            0.0
        );
        let test = Corpus::with_objects(vec![rec], c.shared_objects()).unwrap();
        assert_eq!(average_log_likelihood(&model, &test).unwrap(), 0.0);
    }

    #[test]
    fn mean_of_playlists() {
        assert_eq!(mean_log_likelihood(&[-2.0, -4.0]).unwrap(), -3.0);
        assert!(mean_log_likelihood(&[]).is_err());
    }

    #[test]
    fn empty_test_corpus_is_rejected() {
        let c = corpus(&[("G", &[("t1", "a"), ("t2", "a")])]);
        let model = build_model(&ModelSpec::multi_hop(), &c).unwrap();
        let empty = Corpus::with_objects(vec![], c.shared_objects()).unwrap();
        assert!(matches!(
            average_log_likelihood(&model, &empty),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn unsmoothed_reduces_to_weight_ratio() {
        let c = corpus(&[
            ("G", &[("t1", "a"), ("t2", "a"), ("t3", "a")]),
            ("G", &[("t1", "a"), ("t3", "a")]),
        ]);
        let mut spec = ModelSpec::multi_hop();
        spec.smoothing = false;
        let model = build_model(&spec, &c).unwrap();
        let h = model.hierarchy();
        let t1 = h.graph(0).node("t1").unwrap();
        let dist = transition_distribution(h, 0, t1, None).unwrap();
        let o = c.objects();
        for (v, p) in dist {
            let to = &o[h.graph(0).label(v)];
            assert!((transition_log_prob(&model, &o["t1"], to) - p.ln()).abs() < 1e-15);
        }
        // Unseen transitions are impossible without smoothing.
        assert_eq!(
            transition_log_prob(&model, &o["t3"], &o["t1"]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn single_hop_model_weights() {
        let c = corpus(&[("G", &[("a", "x"), ("b", "x"), ("a", "x")])]);
        let model = build_single_hop_model(&c).unwrap();
        let g = model.hierarchy().graph(0);
        assert_eq!(g.weight_by_label("a", "b"), 2.0);
        assert_eq!(g.weight_by_label("b", "a"), 2.0);
        assert_eq!(model.spec().kind, ModelKind::SingleHop);
    }

    #[test]
    fn report_csv_layout() {
        let report = EvalReport {
            rows: vec![ReportRow {
                model: ModelKind::MultiHop,
                split: 0.7,
                avg_loglik_nat: -LN_10 * 2.0,
                n_test: 3,
                smoothed_transitions: 4,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("model,split,avg_loglik_nat,avg_loglik_log10,n_test,smoothed_transitions")
        );
        assert_eq!(
            lines.next(),
            Some("multi-hop,0.7,-4.605170185988092,-2,3,4")
        );
    }

    fn counting_oracle(seqs: &[Vec<u8>]) -> std::collections::HashMap<(u8, u8), f64> {
        let mut out = std::collections::HashMap::new();
        for s in seqs {
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if j == i + 1 || i == j + 1 {
                        *out.entry((s[i], s[j])).or_insert(0.0) += 1.0;
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn single_hop_matches_adjacency_count(seqs in prop::collection::vec(prop::collection::vec(0u8..5, 2..=12), 1..4)) {
            let records: Vec<SequenceRecord> = seqs
                .iter()
                .enumerate()
                .map(|(i, s)| SequenceRecord::new(
                    format!("p{i}"),
                    "G",
                    s.iter().map(|t| Item::new(format!("t{t}"), "a")).collect(),
                ))
                .collect();
            let c = assign_genres(Corpus::from_records(records).unwrap()).unwrap();
            let g = build_single_hop_model(&c).unwrap().hierarchy().graph(0).clone();
            let expected = counting_oracle(&seqs);
            prop_assert_eq!(g.edge_count(), expected.len());
            for ((a, b), w) in expected {
                prop_assert_eq!(g.weight_by_label(&format!("t{a}"), &format!("t{b}")), w);
            }
        }

        #[test]
        fn smoothed_candidates_sum_to_one(
            edges in prop::collection::vec((0u8..6, 0u8..6, 0.01f64..10.0), 1..25),
            extra in prop::collection::vec(0u8..6, 0..4),
            domain in 1usize..50,
        ) {
            let map: WeightMap<String> = edges
                .iter()
                .map(|(s, d, w)| (format!("n{s}"), format!("n{d}"), *w))
                .collect();
            let g = SimilarityGraph::from_weights(&map);
            let src = g.node(&format!("n{}", edges[0].0)).unwrap();
            let mut candidates: Vec<NodeId> = g.out_neighbors(src).to_vec();
            for e in extra {
                if let Some(v) = g.node(&format!("n{e}")) {
                    if !candidates.contains(&v) { candidates.push(v); }
                }
            }
            let total: f64 = candidates
                .iter()
                .map(|&c| smoothed_prob(&g, &candidates, src, Some(c), domain).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }
    }
}
