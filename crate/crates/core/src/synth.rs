//! Synthetic playlists drawn from a planted genre / artist / track hierarchy.
//!
//! Every artist belongs to one genre and every track to one artist. A
//! playlist is a Markov chain over genres (mostly staying put), then over
//! artists (each artist has its own skewed successor preferences), then a
//! track drawn by popularity within the chosen artist.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Corpus, Item, SequenceRecord, MIXED_GENRE};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{indexed_seed, rng_from_seed, stream_seed, StageRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub genres: usize,
    pub artists_per_genre: usize,
    pub tracks_per_artist: usize,
    pub playlists: usize,
    pub length: usize,
    /// Probability that the next item keeps the current genre.
    pub genre_stay: f64,
    /// Zipf exponent of artist successor and track popularity weights.
    pub zipf: f64,
    /// Fraction of playlists labelled `MIXED GENRE`.
    pub mixed_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            genres: 10,
            artists_per_genre: 10,
            tracks_per_artist: 10,
            playlists: 5000,
            length: 20,
            genre_stay: 0.85,
            zipf: 1.2,
            mixed_fraction: 0.1,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.genres == 0 || self.artists_per_genre == 0 || self.tracks_per_artist == 0 {
            return Err(Error::Argument(
                "synthetic domain sizes must be positive".into(),
            ));
        }
        if self.length < 2 {
            return Err(Error::Argument(
                "synthetic playlists need length >= 2".into(),
            ));
        }
        for (name, p) in [
            ("genre_stay", self.genre_stay),
            ("mixed_fraction", self.mixed_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.zipf.is_finite() && self.zipf >= 0.0) {
            return Err(Error::Argument(
                "zipf exponent must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub fn genre_name(g: usize) -> String {
    format!("g{g}")
}

pub fn artist_name(g: usize, a: usize) -> String {
    format!("g{g}a{a}")
}

pub fn track_name(g: usize, a: usize, t: usize) -> String {
    format!("g{g}a{a}t{t}")
}

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-exponent)).collect()
}

/// Zipf weights assigned to a random permutation of `0..n`.
fn shuffled_zipf(n: usize, exponent: f64, rng: &mut StageRng) -> WeightedIndex<f64> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let ranks = zipf_weights(n, exponent);
    let mut weights = vec![0.0; n];
    for (rank, &slot) in order.iter().enumerate() {
        weights[slot] = ranks[rank];
    }
    WeightedIndex::new(weights).expect("zipf weights are positive")
}

struct Planted {
    /// Next genre given a genre switch, excluding staying.
    genre_next: Vec<WeightedIndex<f64>>,
    artist_popularity: Vec<WeightedIndex<f64>>,
    /// Per (genre, artist): next artist within the same genre.
    artist_next: Vec<Vec<WeightedIndex<f64>>>,
    track_popularity: Vec<Vec<WeightedIndex<f64>>>,
}

impl Planted {
    fn new(config: &SynthConfig, seed: u64) -> Self {
        let mut rng = rng_from_seed(stream_seed(seed, "synth-structure"));
        let (g, a, t) = (
            config.genres,
            config.artists_per_genre,
            config.tracks_per_artist,
        );
        let others = g.saturating_sub(1).max(1);
        let genre_next = (0..g)
            .map(|_| shuffled_zipf(others, config.zipf, &mut rng))
            .collect();
        let artist_popularity = (0..g)
            .map(|_| shuffled_zipf(a, config.zipf, &mut rng))
            .collect();
        let artist_next = (0..g)
            .map(|_| {
                (0..a)
                    .map(|_| shuffled_zipf(a, config.zipf, &mut rng))
                    .collect()
            })
            .collect();
        let track_popularity = (0..g)
            .map(|_| {
                (0..a)
                    .map(|_| shuffled_zipf(t, config.zipf, &mut rng))
                    .collect()
            })
            .collect();
        Planted {
            genre_next,
            artist_popularity,
            artist_next,
            track_popularity,
        }
    }

    fn playlist(&self, config: &SynthConfig, id: String, rng: &mut StageRng) -> SequenceRecord {
        let mut genre = rng.random_range(0..config.genres);
        let mut artist = self.artist_popularity[genre].sample(rng);
        let mixed = rng.random::<f64>() < config.mixed_fraction;
        let mut counts = vec![0usize; config.genres];
        let mut items = Vec::with_capacity(config.length);
        for step in 0..config.length {
            if step > 0 {
                if config.genres > 1 && rng.random::<f64>() >= config.genre_stay {
                    let offset = self.genre_next[genre].sample(rng);
                    genre = (genre + 1 + offset) % config.genres;
                    artist = self.artist_popularity[genre].sample(rng);
                } else {
                    artist = self.artist_next[genre][artist].sample(rng);
                }
            }
            let track = self.track_popularity[genre][artist].sample(rng);
            counts[genre] += 1;
            items.push(Item::new(
                track_name(genre, artist, track),
                artist_name(genre, artist),
            ));
        }
        let label = if mixed {
            MIXED_GENRE.to_string()
        } else {
            // Majority genre, lowest index on ties.
            let best = (0..config.genres)
                .rev()
                .max_by_key(|&g| counts[g])
                .unwrap_or(0);
            genre_name(best)
        };
        SequenceRecord::new(id, label, items)
    }
}

/// Draws `config.playlists` playlists; ids are `syn-{i}`. The output is not
/// annotated; run genre assignment on it before building hierarchies.
pub fn planted_corpus(config: &SynthConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let planted = Planted::new(config, seed);
    let records = par::map_range(config.playlists as u64, |i| {
        let mut rng = rng_from_seed(indexed_seed(seed, i));
        planted.playlist(config, format!("syn-{i}"), &mut rng)
    });
    Corpus::from_records(records)
}
