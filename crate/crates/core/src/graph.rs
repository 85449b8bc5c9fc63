//! Directed weighted similarity graphs.
//!
//! Nodes are string-labelled values kept in lexicographic order, so a node id
//! is the rank of its label. Out-neighbours are stored in CSR form sorted by
//! id.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::similarity::WeightMap;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<f64>,
    out_weight: Vec<f64>,
    in_weight: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

impl SimilarityGraph {
    /// Graph whose nodes are exactly the endpoints of `weights`.
    pub fn from_weights(weights: &WeightMap<String>) -> Self {
        let labels: BTreeSet<&String> = weights.iter().flat_map(|(s, d, _)| [s, d]).collect();
        let labels: Vec<String> = labels.into_iter().cloned().collect();
        let index = label_index(&labels);
        let edges = weights
            .iter()
            .map(|(s, d, w)| (index[s], index[d], w))
            .collect();
        Self::assemble(labels, index, edges)
    }

    /// Graph over `labels` (strictly increasing) with edges given by node id.
    pub fn from_indexed(labels: Vec<String>, weights: &WeightMap<NodeId>) -> Result<Self> {
        check_sorted(&labels)?;
        let n = labels.len();
        let mut edges = Vec::with_capacity(weights.len());
        for (&s, &d, w) in weights.iter() {
            if s as usize >= n || d as usize >= n {
                return Err(Error::Argument(format!(
                    "edge ({s}, {d}) outside {n} nodes"
                )));
            }
            edges.push((s, d, w));
        }
        let index = label_index(&labels);
        Ok(Self::assemble(labels, index, edges))
    }

    /// Graph over `labels` (strictly increasing) from labelled edge triples.
    /// Duplicate edges and non-positive or non-finite weights are rejected.
    pub fn from_labeled_edges(
        labels: Vec<String>,
        edges: impl IntoIterator<Item = (String, String, f64)>,
    ) -> Result<Self> {
        check_sorted(&labels)?;
        let index = label_index(&labels);
        let mut resolved = Vec::new();
        for (s, d, w) in edges {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!("edge ({s}, {d}) has weight {w}")));
            }
            let si = *index
                .get(&s)
                .ok_or_else(|| Error::lookup("node", s.as_str()))?;
            let di = *index
                .get(&d)
                .ok_or_else(|| Error::lookup("node", d.as_str()))?;
            resolved.push((si, di, w));
        }
        resolved.sort_by_key(|&(s, d, _)| (s, d));
        if let Some(pair) = resolved
            .windows(2)
            .find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1))
        {
            return Err(Error::Validation(format!(
                "duplicate edge ({}, {})",
                labels[pair[0].0 as usize], labels[pair[0].1 as usize]
            )));
        }
        Ok(Self::assemble(labels, index, resolved))
    }

    fn assemble(
        labels: Vec<String>,
        index: HashMap<String, NodeId>,
        mut edges: Vec<(NodeId, NodeId, f64)>,
    ) -> Self {
        edges.sort_by_key(|&(s, d, _)| (s, d));
        let n = labels.len();
        let mut offsets = vec![0usize; n + 1];
        for &(s, _, _) in &edges {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<NodeId> = edges.iter().map(|e| e.1).collect();
        let weights: Vec<f64> = edges.iter().map(|e| e.2).collect();

        let mut out_weight = vec![0.0; n];
        let mut in_weight = vec![0.0; n];
        for &(s, d, w) in &edges {
            out_weight[s as usize] += w;
            in_weight[d as usize] += w;
        }
        SimilarityGraph {
            labels,
            index,
            offsets,
            targets,
            weights,
            out_weight,
            in_weight,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node as usize]
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    /// Out-neighbours of `node` and the matching weights, sorted by id.
    pub fn out_edges(&self, node: NodeId) -> (&[NodeId], &[f64]) {
        let range = self.offsets[node as usize]..self.offsets[node as usize + 1];
        (&self.targets[range.clone()], &self.weights[range])
    }

    pub fn out_neighbors(&self, node: NodeId) -> &[NodeId] {
        self.out_edges(node).0
    }

    /// `s(src, dst)`, zero when the edge is absent.
    pub fn weight(&self, src: NodeId, dst: NodeId) -> f64 {
        let (targets, weights) = self.out_edges(src);
        targets.binary_search(&dst).map_or(0.0, |pos| weights[pos])
    }

    pub fn weight_by_label(&self, src: &str, dst: &str) -> f64 {
        match (self.node(src), self.node(dst)) {
            (Some(s), Some(d)) => self.weight(s, d),
            _ => 0.0,
        }
    }

    /// W⁺(node)
    pub fn out_weight(&self, node: NodeId) -> f64 {
        self.out_weight[node as usize]
    }

    /// W⁻(node)
    pub fn in_weight(&self, node: NodeId) -> f64 {
        self.in_weight[node as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count() as NodeId).flat_map(move |s| {
            let (t, w) = self.out_edges(s);
            t.iter().zip(w).map(move |(&d, &w)| (s, d, w))
        })
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Writes the edge list as TSV, preceded by the versioned header line.
    pub fn write_tsv<W: Write>(&self, mut out: W, layer: &str, decay: &str) -> Result<()> {
        writeln!(out, "{GRAPH_MAGIC} layer={layer} decay={decay}")?;
        for (s, d, w) in self.edges() {
            // `{}` on f64 prints the shortest representation that parses back
            // to the same bits.
            writeln!(out, "{}\t{}\t{}", self.label(s), self.label(d), w)?;
        }
        out.flush()?;
        Ok(())
    }
}

const GRAPH_MAGIC: &str = "# seqwalk-graph v1";

/// Header fields and edge triples of a graph TSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub layer: String,
    pub decay: String,
    pub edges: Vec<(String, String, f64)>,
}

impl EdgeList {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing graph header".into(),
        })?;
        let fields = header
            .strip_prefix(GRAPH_MAGIC)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected `{GRAPH_MAGIC} ...` header"),
            })?;
        let mut layer = None;
        let mut decay = None;
        for field in fields.split_whitespace() {
            match field.split_once('=') {
                Some(("layer", v)) => layer = Some(v.to_owned()),
                Some(("decay", v)) => decay = Some(v.to_owned()),
                _ => {}
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 1,
            message: format!("graph header lacks `{what}=`"),
        };
        let layer = layer.ok_or_else(|| missing("layer"))?;
        let decay = decay.ok_or_else(|| missing("decay"))?;

        let mut edges = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let mut cols = line.split('\t');
            let (Some(s), Some(d), Some(w), None) =
                (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(bad("expected src<TAB>dst<TAB>weight".into()));
            };
            let w: f64 = w.parse().map_err(|_| bad(format!("bad weight `{w}`")))?;
            edges.push((s.to_owned(), d.to_owned(), w));
        }
        Ok(EdgeList {
            layer,
            decay,
            edges,
        })
    }

    /// Graph whose nodes are the endpoints of the listed edges.
    pub fn into_graph(self) -> Result<SimilarityGraph> {
        let labels: BTreeSet<&String> = self.edges.iter().flat_map(|(s, d, _)| [s, d]).collect();
        let labels: Vec<String> = labels.into_iter().cloned().collect();
        SimilarityGraph::from_labeled_edges(labels, self.edges)
    }
}

fn label_index(labels: &[String]) -> HashMap<String, NodeId> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i as NodeId))
        .collect()
}

fn check_sorted(labels: &[String]) -> Result<()> {
    if labels.len() > NodeId::MAX as usize {
        return Err(Error::Argument("too many nodes".into()));
    }
    match labels.windows(2).find(|w| w[0] >= w[1]) {
        Some(w) => Err(Error::Argument(format!(
            "node labels must be strictly increasing (`{}` before `{}`)",
            w[0], w[1]
        ))),
        None => Ok(()),
    }
}

/// Weakly connected components, largest first. Ties are ordered by their
/// smallest node id; members are sorted.
pub fn weakly_connected_components(graph: &SimilarityGraph) -> Vec<Vec<NodeId>> {
    let n = graph.node_count();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        while parent[x] != root {
            let next = parent[x];
            parent[x] = root;
            x = next;
        }
        root
    }

    for (s, d, _) in graph.edges() {
        let (a, b) = (find(&mut parent, s as usize), find(&mut parent, d as usize));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }

    let mut groups: HashMap<usize, Vec<NodeId>> = HashMap::new();
    for v in 0..n {
        let root = find(&mut parent, v);
        groups.entry(root).or_default().push(v as NodeId);
    }
    let mut components: Vec<Vec<NodeId>> = groups.into_values().collect();
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    components
}

/// Total in- or out-weight per node, in node order.
pub fn node_weight_distribution(
    graph: &SimilarityGraph,
    direction: Direction,
) -> Vec<(String, f64)> {
    (0..graph.node_count() as NodeId)
        .map(|v| {
            let w = match direction {
                Direction::In => graph.in_weight(v),
                Direction::Out => graph.out_weight(v),
            };
            (graph.label(v).to_owned(), w)
        })
        .collect()
}

/// One row of an empirical CCDF: the fraction of samples `>= value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdfPoint {
    pub value: f64,
    pub fraction: f64,
}

/// Empirical complementary CDF, one row per distinct value, ascending.
pub fn ccdf(values: &[f64]) -> Result<Vec<CcdfPoint>> {
    if values.is_empty() {
        return Err(Error::Argument("CCDF of an empty sample".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Argument(format!(
            "CCDF samples must be finite and non-negative, got {v}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut rows = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i];
        rows.push(CcdfPoint {
            value,
            fraction: (sorted.len() - i) as f64 / n,
        });
        while i < sorted.len() && sorted[i] == value {
            i += 1;
        }
    }
    Ok(rows)
}

pub fn write_ccdf_csv<W: Write>(mut out: W, rows: &[CcdfPoint]) -> Result<()> {
    writeln!(out, "value,ccdf")?;
    for row in rows {
        writeln!(out, "{},{}", row.value, row.fraction)?;
    }
    out.flush()?;
    Ok(())
}
