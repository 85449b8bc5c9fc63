//! Browser bindings for the demo page in `www/`. Every export returns JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use seqwalk::graph::{node_weight_distribution, Direction};
use seqwalk::hierarchy::Attribute;
use seqwalk::walker::walk;
use seqwalk::{
    assign_genres, build_hierarchy, ccdf, pairwise_similarity, planted_corpus, Decay, Hierarchy,
    SynthConfig,
};

#[derive(Serialize)]
struct Edge<'a> {
    src: &'a str,
    dst: &'a str,
    weight: f64,
}

/// `sequences` is whitespace-separated symbols, one sequence per line.
pub fn similarity_edges(sequences: &str, decay: &str) -> Result<String, String> {
    let decay: Decay = decay.parse().map_err(|e: seqwalk::Error| e.to_string())?;
    let seqs: Vec<Vec<&str>> = sequences
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    let weights = pairwise_similarity(&seqs, decay).map_err(|e| e.to_string())?;
    let edges: Vec<Edge> = weights
        .to_sorted_vec()
        .into_iter()
        .map(|(src, dst, weight)| Edge { src, dst, weight })
        .collect();
    serde_json::to_string(&edges).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Step {
    genre: String,
    artist: String,
    track: String,
}

#[derive(Serialize)]
struct Point {
    value: f64,
    ccdf: f64,
}

pub struct Model {
    hierarchy: Hierarchy,
}

impl Model {
    pub fn planted(playlists: usize, seed: u64) -> Result<Model, String> {
        let config = SynthConfig {
            playlists,
            ..SynthConfig::default()
        };
        let corpus = planted_corpus(&config, seed)
            .and_then(assign_genres)
            .map_err(|e| e.to_string())?;
        let layers = [Attribute::Genre, Attribute::Artist, Attribute::Track];
        let hierarchy = build_hierarchy(&corpus, Decay::ExponentialShifted, &layers)
            .map_err(|e| e.to_string())?;
        Ok(Model { hierarchy })
    }

    /// One walk as the per-step positions of all three layers.
    pub fn walk_steps(&self, length: usize, seed: u64) -> Result<String, String> {
        let h = &self.hierarchy;
        let trace = walk(h, length, seed).map_err(|e| e.to_string())?;
        let steps: Vec<Step> = trace
            .positions
            .iter()
            .map(|p| Step {
                genre: h.graph(0).label(p[0]).to_owned(),
                artist: h.graph(1).label(p[1]).to_owned(),
                track: h.graph(2).label(p[2]).to_owned(),
            })
            .collect();
        serde_json::to_string(&steps).map_err(|e| e.to_string())
    }

    /// CCDF of node out-strength (`out`), in-strength (`in`) or edge weight (`edge`).
    pub fn strength_ccdf(&self, layer: usize, kind: &str) -> Result<String, String> {
        let g = self
            .hierarchy
            .graphs()
            .get(layer)
            .ok_or_else(|| format!("no layer {layer}"))?;
        let values: Vec<f64> = match kind {
            "out" | "in" => {
                let dir = if kind == "out" {
                    Direction::Out
                } else {
                    Direction::In
                };
                node_weight_distribution(g, dir)
                    .into_iter()
                    .map(|(_, w)| w)
                    .collect()
            }
            "edge" => g.edge_weights().to_vec(),
            other => return Err(format!("unknown distribution `{other}`")),
        };
        let points: Vec<Point> = ccdf(&values)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| Point {
                value: p.value,
                ccdf: p.fraction,
            })
            .collect();
        serde_json::to_string(&points).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
pub fn similarity(sequences: &str, decay: &str) -> Result<String, JsError> {
    similarity_edges(sequences, decay).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Demo {
    model: Model,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(playlists: usize, seed: u32) -> Result<Demo, JsError> {
        Model::planted(playlists, seed.into())
            .map(|model| Demo { model })
            .map_err(|e| JsError::new(&e))
    }

    pub fn generate(&self, length: usize, seed: u32) -> Result<String, JsError> {
        self.model
            .walk_steps(length, seed.into())
            .map_err(|e| JsError::new(&e))
    }

    pub fn ccdf(&self, layer: usize, kind: &str) -> Result<String, JsError> {
        self.model
            .strength_ccdf(layer, kind)
            .map_err(|e| JsError::new(&e))
    }
}
