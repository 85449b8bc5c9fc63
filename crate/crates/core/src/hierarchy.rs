//! Stacks of per-attribute similarity graphs coupled through objects.
//!
//! Layer 0 is the coarsest attribute (genre) and the last layer is always the
//! track layer. For every adjacent pair of layers the hierarchy keeps a
//! compatibility map: the child values that co-occur with a parent value on at
//! least one object.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{Corpus, TrackObject};
use crate::error::{Error, Result};
use crate::graph::{EdgeList, NodeId, SimilarityGraph};
use crate::similarity::{pairwise_similarity, Decay, WeightMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Genre,
    Artist,
    Track,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Genre => "genre",
            Attribute::Artist => "artist",
            Attribute::Track => "track",
        }
    }

    pub fn value_of(self, object: &TrackObject) -> Option<&str> {
        match self {
            Attribute::Genre => object.genre.as_deref(),
            Attribute::Artist => Some(&object.artist),
            Attribute::Track => Some(&object.track),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genre" => Ok(Attribute::Genre),
            "artist" => Ok(Attribute::Artist),
            "track" => Ok(Attribute::Track),
            other => Err(Error::Argument(format!(
                "unknown layer `{other}` (expected genre, artist or track)"
            ))),
        }
    }
}

/// Parses a comma-separated layer list such as `genre,artist,track`.
pub fn parse_layers(list: &str) -> Result<Vec<Attribute>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

pub fn format_layers(layers: &[Attribute]) -> String {
    layers
        .iter()
        .map(|a| a.name())
        .collect::<Vec<_>>()
        .join(",")
}

fn check_layers(attributes: &[Attribute]) -> Result<()> {
    if attributes.last() != Some(&Attribute::Track) {
        return Err(Error::Build("the last layer must be `track`".into()));
    }
    let unique: BTreeSet<Attribute> = attributes.iter().copied().collect();
    if unique.len() != attributes.len() {
        return Err(Error::Build(format!(
            "layer list `{}` repeats a layer",
            format_layers(attributes)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    attributes: Vec<Attribute>,
    decay: Decay,
    graphs: Vec<SimilarityGraph>,
    /// `compat[l][v]`: sorted layer-(l+1) nodes compatible with node `v` of layer `l`.
    compat: Vec<Vec<Vec<NodeId>>>,
    /// Indexed by track node id.
    objects: Vec<TrackObject>,
    /// Row-major `[track][layer]` node ids.
    object_nodes: Vec<NodeId>,
}

/// Sorted vocabulary of one attribute over `objects`.
fn vocabulary(objects: &[TrackObject], attribute: Attribute) -> Result<Vec<String>> {
    let values: Option<BTreeSet<&str>> = objects.iter().map(|o| attribute.value_of(o)).collect();
    let values = values.ok_or_else(|| {
        Error::Build(format!(
            "layer `{attribute}` requested but some tracks have no {attribute} (assign genres first)"
        ))
    })?;
    Ok(values.into_iter().map(str::to_owned).collect())
}

/// Per-layer node ids for each object, row-major.
fn index_objects(objects: &[TrackObject], vocabs: &[(Attribute, Vec<String>)]) -> Vec<NodeId> {
    let lookups: Vec<HashMap<&str, NodeId>> = vocabs
        .iter()
        .map(|(_, v)| {
            v.iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i as NodeId))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(objects.len() * vocabs.len());
    for object in objects {
        for ((attribute, _), lookup) in vocabs.iter().zip(&lookups) {
            // vocabularies were built from these objects
            let value = attribute.value_of(object).expect("attribute present");
            out.push(lookup[value]);
        }
    }
    out
}

/// Builds one graph per layer from the training records.
pub fn build_hierarchy(
    train: &Corpus,
    decay: Decay,
    attributes: &[Attribute],
) -> Result<Hierarchy> {
    check_layers(attributes)?;
    let objects: Vec<TrackObject> = train.used_objects().into_iter().cloned().collect();
    let vocabs = attributes
        .iter()
        .map(|&a| Ok((a, vocabulary(&objects, a)?)))
        .collect::<Result<Vec<_>>>()?;
    let object_nodes = index_objects(&objects, &vocabs);
    let k = attributes.len();

    let track_index: HashMap<&str, usize> = objects
        .iter()
        .enumerate()
        .map(|(i, o)| (o.track.as_str(), i))
        .collect();
    let sequences: Vec<Vec<usize>> = train
        .records()
        .iter()
        .map(|r| {
            r.items
                .iter()
                .map(|it| track_index[it.track.as_str()])
                .collect()
        })
        .collect();

    let mut graphs = Vec::with_capacity(k);
    for (layer, (_, labels)) in vocabs.into_iter().enumerate() {
        let projected: Vec<Vec<NodeId>> = sequences
            .iter()
            .map(|seq| seq.iter().map(|&o| object_nodes[o * k + layer]).collect())
            .collect();
        let weights = pairwise_similarity(&projected, decay)?;
        graphs.push(SimilarityGraph::from_indexed(labels, &weights)?);
    }
    Hierarchy::from_parts(attributes.to_vec(), decay, graphs, objects)
}

impl Hierarchy {
    /// Assembles a hierarchy from prebuilt layer graphs. Each graph's node set
    /// must equal the vocabulary of its attribute over `objects`.
    pub fn from_parts(
        attributes: Vec<Attribute>,
        decay: Decay,
        graphs: Vec<SimilarityGraph>,
        mut objects: Vec<TrackObject>,
    ) -> Result<Self> {
        check_layers(&attributes)?;
        if graphs.len() != attributes.len() {
            return Err(Error::Build(format!(
                "{} layers named but {} graphs given",
                attributes.len(),
                graphs.len()
            )));
        }
        objects.sort_by(|a, b| a.track.cmp(&b.track));
        if let Some(w) = objects.windows(2).find(|w| w[0].track == w[1].track) {
            return Err(Error::Build(format!("track `{}` listed twice", w[0].track)));
        }
        let vocabs = attributes
            .iter()
            .map(|&a| Ok((a, vocabulary(&objects, a)?)))
            .collect::<Result<Vec<_>>>()?;
        for ((attribute, vocab), graph) in vocabs.iter().zip(&graphs) {
            if graph.labels() != vocab.as_slice() {
                return Err(Error::Build(format!(
                    "nodes of the `{attribute}` graph do not match the object table"
                )));
            }
        }
        for (l, pair) in graphs.windows(2).enumerate() {
            let (upper, lower) = (pair[0].node_count(), pair[1].node_count());
            if upper > lower {
                return Err(Error::Build(format!(
                    "layer `{}` has {upper} values but the layer below it, `{}`, has only {lower}",
                    attributes[l],
                    attributes[l + 1]
                )));
            }
        }

        let k = attributes.len();
        let object_nodes = index_objects(&objects, &vocabs);
        let mut compat: Vec<Vec<BTreeSet<NodeId>>> = graphs[..k - 1]
            .iter()
            .map(|g| vec![BTreeSet::new(); g.node_count()])
            .collect();
        for row in object_nodes.chunks(k) {
            for l in 0..k - 1 {
                compat[l][row[l] as usize].insert(row[l + 1]);
            }
        }
        let compat = compat
            .into_iter()
            .map(|layer| layer.into_iter().map(|s| s.into_iter().collect()).collect())
            .collect();

        Ok(Hierarchy {
            attributes,
            decay,
            graphs,
            compat,
            objects,
            object_nodes,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    pub fn graph(&self, layer: usize) -> &SimilarityGraph {
        &self.graphs[layer]
    }

    pub fn graphs(&self) -> &[SimilarityGraph] {
        &self.graphs
    }

    pub fn layer_of(&self, attribute: Attribute) -> Option<usize> {
        self.attributes.iter().position(|&a| a == attribute)
    }

    pub fn track_layer(&self) -> usize {
        self.attributes.len() - 1
    }

    /// Domain size of each layer, top to bottom.
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.graphs
            .iter()
            .map(SimilarityGraph::node_count)
            .collect()
    }

    /// Objects in track-id order; the position is the track-layer node id.
    pub fn objects(&self) -> &[TrackObject] {
        &self.objects
    }

    /// The object behind a track-layer node.
    pub fn object(&self, track: NodeId) -> &TrackObject {
        &self.objects[track as usize]
    }

    /// Node id of the object's value at every layer.
    pub fn object_values(&self, track: NodeId) -> &[NodeId] {
        let k = self.layer_count();
        &self.object_nodes[track as usize * k..(track as usize + 1) * k]
    }

    fn check_node(&self, layer: usize, node: NodeId) -> Result<()> {
        if layer >= self.layer_count() {
            return Err(Error::Argument(format!("layer {layer} out of range")));
        }
        if node as usize >= self.graphs[layer].node_count() {
            return Err(Error::lookup("node", node.to_string()));
        }
        Ok(())
    }

    /// Values at `parent_layer + 1` that appear on objects carrying `parent`.
    pub fn compatible_values(&self, parent_layer: usize, parent: NodeId) -> Result<&[NodeId]> {
        if parent_layer + 1 >= self.layer_count() {
            return Err(Error::Argument(format!(
                "layer {parent_layer} has no layer below it"
            )));
        }
        self.check_node(parent_layer, parent)?;
        Ok(&self.compat[parent_layer][parent as usize])
    }

    pub fn compatible_labels(&self, parent_layer: usize, parent: &str) -> Result<Vec<&str>> {
        let node = self
            .graphs
            .get(parent_layer)
            .and_then(|g| g.node(parent))
            .ok_or_else(|| Error::lookup("value", parent))?;
        let ids = self.compatible_values(parent_layer, node)?;
        let child = &self.graphs[parent_layer + 1];
        Ok(ids.iter().map(|&v| child.label(v)).collect())
    }

    pub(crate) fn compat_slice(&self, parent_layer: usize, parent: NodeId) -> &[NodeId] {
        &self.compat[parent_layer][parent as usize]
    }

    /// Out-edges of `current` whose target is compatible with the parent
    /// layer's choice. Layer 0 takes no parent and is unconstrained.
    pub fn enabled_edges(
        &self,
        layer: usize,
        current: NodeId,
        parent_choice: Option<NodeId>,
    ) -> Result<impl Iterator<Item = (NodeId, f64)> + '_> {
        self.check_node(layer, current)?;
        let allowed = match (layer, parent_choice) {
            (0, None) => None,
            (0, Some(_)) => {
                return Err(Error::Argument(
                    "the top layer takes no parent choice".into(),
                ))
            }
            (_, None) => {
                return Err(Error::Argument(format!(
                    "layer {layer} needs a parent choice"
                )))
            }
            (l, Some(p)) => {
                self.check_node(l - 1, p)?;
                Some(self.compat_slice(l - 1, p))
            }
        };
        Ok(self.enabled_iter(layer, current, allowed))
    }

    pub(crate) fn enabled_iter<'a>(
        &'a self,
        layer: usize,
        current: NodeId,
        allowed: Option<&'a [NodeId]>,
    ) -> impl Iterator<Item = (NodeId, f64)> + 'a {
        let (targets, weights) = self.graphs[layer].out_edges(current);
        targets
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .filter(move |(t, _)| allowed.is_none_or(|a| a.binary_search(t).is_ok()))
    }

    /// The enabled set `N_t` as node ids.
    pub fn enabled_set(
        &self,
        layer: usize,
        current: NodeId,
        parent_choice: Option<NodeId>,
    ) -> Result<Vec<NodeId>> {
        Ok(self
            .enabled_edges(layer, current, parent_choice)?
            .map(|(v, _)| v)
            .collect())
    }

    /// Checks that every track edge projects onto an edge at every layer.
    pub fn verify_edge_projection(&self) -> Result<()> {
        let bottom = self.track_layer();
        for (s, d, _) in self.graphs[bottom].edges() {
            let (sv, dv) = (self.object_values(s), self.object_values(d));
            for l in 0..bottom {
                if self.graphs[l].weight(sv[l], dv[l]) <= 0.0 {
                    return Err(Error::Validation(format!(
                        "track edge ({}, {}) has no `{}` edge ({}, {})",
                        self.graphs[bottom].label(s),
                        self.graphs[bottom].label(d),
                        self.attributes[l],
                        self.graphs[l].label(sv[l]),
                        self.graphs[l].label(dv[l])
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the model directory: manifest, one edge list per layer, one
    /// compatibility table per adjacent layer pair and the object table.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = BufWriter::new(File::create(dir.join(MANIFEST))?);
        writeln!(manifest, "format = {MODEL_FORMAT}")?;
        writeln!(manifest, "layers = {}", format_layers(&self.attributes))?;
        writeln!(manifest, "decay = {}", self.decay.tag())?;
        manifest.flush()?;

        for (attribute, graph) in self.attributes.iter().zip(&self.graphs) {
            let file = File::create(dir.join(layer_file(*attribute)))?;
            graph.write_tsv(BufWriter::new(file), attribute.name(), self.decay.tag())?;
        }

        for l in 0..self.layer_count() - 1 {
            let (parent, child) = (self.attributes[l], self.attributes[l + 1]);
            let mut out = BufWriter::new(File::create(dir.join(compat_file(parent, child)))?);
            writeln!(out, "{COMPAT_MAGIC} parent={parent} child={child}")?;
            for (v, children) in self.compat[l].iter().enumerate() {
                for &c in children {
                    writeln!(
                        out,
                        "{}\t{}",
                        self.graphs[l].label(v as NodeId),
                        self.graphs[l + 1].label(c)
                    )?;
                }
            }
            out.flush()?;
        }

        let mut out = BufWriter::new(File::create(dir.join(OBJECTS_FILE))?);
        writeln!(out, "{OBJECTS_MAGIC}")?;
        for o in &self.objects {
            writeln!(
                out,
                "{}\t{}\t{}",
                o.track,
                o.artist,
                o.genre.as_deref().unwrap_or("")
            )?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a model directory written by [`Hierarchy::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(&dir.join(MANIFEST))?;
        let field = |key: &str| {
            manifest
                .get(key)
                .ok_or_else(|| Error::Validation(format!("model manifest lacks `{key}`")))
        };
        if field("format")? != MODEL_FORMAT {
            return Err(Error::Validation(format!(
                "unsupported model format `{}`",
                field("format")?
            )));
        }
        let attributes = parse_layers(field("layers")?)?;
        check_layers(&attributes)?;
        let decay: Decay = field("decay")?.parse()?;
        let objects = read_objects(&dir.join(OBJECTS_FILE))?;

        let mut graphs = Vec::with_capacity(attributes.len());
        for &attribute in &attributes {
            let list =
                EdgeList::read(BufReader::new(File::open(dir.join(layer_file(attribute)))?))?;
            if list.layer != attribute.name() || list.decay != decay.tag() {
                return Err(Error::Validation(format!(
                    "`{}` declares layer={} decay={}, manifest expects layer={} decay={}",
                    layer_file(attribute),
                    list.layer,
                    list.decay,
                    attribute,
                    decay
                )));
            }
            let labels = vocabulary(&objects, attribute)?;
            graphs.push(SimilarityGraph::from_labeled_edges(labels, list.edges)?);
        }
        let hierarchy = Hierarchy::from_parts(attributes, decay, graphs, objects)?;

        for l in 0..hierarchy.layer_count() - 1 {
            let (parent, child) = (hierarchy.attributes[l], hierarchy.attributes[l + 1]);
            let stored = read_compat(&dir.join(compat_file(parent, child)))?;
            let derived: BTreeSet<(String, String)> = hierarchy.compat[l]
                .iter()
                .enumerate()
                .flat_map(|(v, cs)| {
                    let h = &hierarchy;
                    cs.iter().map(move |&c| {
                        (
                            h.graphs[l].label(v as NodeId).to_owned(),
                            h.graphs[l + 1].label(c).to_owned(),
                        )
                    })
                })
                .collect();
            if stored != derived {
                return Err(Error::Validation(format!(
                    "`{}` disagrees with the object table",
                    compat_file(parent, child)
                )));
            }
        }
        Ok(hierarchy)
    }
}

const MANIFEST: &str = "manifest.txt";
const MODEL_FORMAT: &str = "seqwalk-model v1";
const OBJECTS_FILE: &str = "objects.tsv";
const OBJECTS_MAGIC: &str = "# seqwalk-objects v1";
const COMPAT_MAGIC: &str = "# seqwalk-compat v1";

pub fn layer_file(attribute: Attribute) -> String {
    format!("layer-{attribute}.tsv")
}

fn compat_file(parent: Attribute, child: Attribute) -> String {
    format!("compat-{parent}-{child}.tsv")
}

/// Parses a flat `key = value` file; `#` starts a comment line.
pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `key = value`".into(),
        })?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

fn tsv_rows(path: &Path, magic: &str, columns: usize) -> Result<Vec<Vec<String>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if !line.starts_with(magic) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("{} should start with `{magic}`", path.display()),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if cols.len() != columns {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("{}: expected {columns} columns", path.display()),
            });
        }
        rows.push(cols);
    }
    Ok(rows)
}

fn read_objects(path: &Path) -> Result<Vec<TrackObject>> {
    Ok(tsv_rows(path, OBJECTS_MAGIC, 3)?
        .into_iter()
        .map(|mut row| {
            let genre = row.pop().filter(|g| !g.is_empty());
            let artist = row.pop().unwrap_or_default();
            let track = row.pop().unwrap_or_default();
            TrackObject {
                track,
                artist,
                genre,
            }
        })
        .collect())
}

fn read_compat(path: &Path) -> Result<BTreeSet<(String, String)>> {
    Ok(tsv_rows(path, COMPAT_MAGIC, 2)?
        .into_iter()
        .map(|mut row| {
            let child = row.pop().unwrap_or_default();
            let parent = row.pop().unwrap_or_default();
            (parent, child)
        })
        .collect())
}

/// Undirected adjacency-count weights: every consecutive pair adds one to
/// both directions.
pub fn adjacency_weights(sequences: &[Vec<NodeId>]) -> WeightMap<NodeId> {
    let mut weights = WeightMap::new();
    for seq in sequences {
        for pair in seq.windows(2) {
            weights.add(pair[0], pair[1], 1.0);
            weights.add(pair[1], pair[0], 1.0);
        }
    }
    weights
}

/// Single-layer track hierarchy whose graph is the undirected adjacency
/// graph of the training records.
pub fn build_adjacency_hierarchy(train: &Corpus) -> Result<Hierarchy> {
    let objects: Vec<TrackObject> = train.used_objects().into_iter().cloned().collect();
    let labels: Vec<String> = objects.iter().map(|o| o.track.clone()).collect();
    let index: HashMap<&str, NodeId> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as NodeId))
        .collect();
    let sequences: Vec<Vec<NodeId>> = train
        .records()
        .iter()
        .map(|r| r.items.iter().map(|it| index[it.track.as_str()]).collect())
        .collect();
    let graph = SimilarityGraph::from_indexed(labels.clone(), &adjacency_weights(&sequences))?;
    Hierarchy::from_parts(
        vec![Attribute::Track],
        Decay::AdjacentIndicator,
        vec![graph],
        objects,
    )
}
