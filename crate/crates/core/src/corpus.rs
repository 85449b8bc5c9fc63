//! Playlist corpora: JSONL ingest, augmentation, genre assignment and
//! train/test splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Playlist label that carries no information about a track's genre.
pub const MIXED_GENRE: &str = "MIXED GENRE";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    #[serde(rename = "t")]
    pub track: String,
    #[serde(rename = "a")]
    pub artist: String,
}

impl Item {
    pub fn new(track: impl Into<String>, artist: impl Into<String>) -> Self {
        Item {
            track: track.into(),
            artist: artist.into(),
        }
    }
}

/// One ordered sequence of tracks with its playlist-level genre label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    #[serde(rename = "genre")]
    pub label: String,
    #[serde(rename = "tracks")]
    pub items: Vec<Item>,
}

impl SequenceRecord {
    pub fn new(id: impl Into<String>, label: impl Into<String>, items: Vec<Item>) -> Self {
        SequenceRecord {
            id: id.into(),
            label: label.into(),
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn with_items(&self, suffix: &str, items: Vec<Item>) -> SequenceRecord {
        SequenceRecord {
            id: format!("{}~{}", self.id, suffix),
            label: self.label.clone(),
            items,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackObject {
    pub track: String,
    pub artist: String,
    /// `None` until [`assign_genres`] has run.
    pub genre: Option<String>,
}

pub type ObjectTable = BTreeMap<String, TrackObject>;

/// Validated records plus the object table they reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<SequenceRecord>,
    objects: Arc<ObjectTable>,
}

/// Number of distinct values per attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainSizes {
    /// `None` while any object is missing its genre.
    pub genres: Option<usize>,
    pub artists: usize,
    pub tracks: usize,
}

impl Corpus {
    pub fn empty() -> Self {
        Corpus {
            records: Vec::new(),
            objects: Arc::new(ObjectTable::new()),
        }
    }

    /// Builds a corpus from records, deriving the object table from the items.
    pub fn from_records(records: Vec<SequenceRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut objects = ObjectTable::new();
        for record in &records {
            if record.is_empty() {
                return Err(Error::Validation(format!(
                    "record `{}` is empty",
                    record.id
                )));
            }
            if !seen.insert(record.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate record id `{}`",
                    record.id
                )));
            }
            register_items(&mut objects, record)?;
        }
        Ok(Corpus {
            records,
            objects: Arc::new(objects),
        })
    }

    /// Builds a corpus against an existing object table. Every track in the
    /// records must be present in `objects`.
    pub fn with_objects(records: Vec<SequenceRecord>, objects: Arc<ObjectTable>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if !seen.insert(record.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate record id `{}`",
                    record.id
                )));
            }
            for item in &record.items {
                match objects.get(&item.track) {
                    None => return Err(Error::lookup("track", item.track.as_str())),
                    Some(o) if o.artist != item.artist => {
                        return Err(artist_conflict(&item.track, &o.artist, &item.artist))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Corpus { records, objects })
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn objects(&self) -> &ObjectTable {
        &self.objects
    }

    pub fn shared_objects(&self) -> Arc<ObjectTable> {
        Arc::clone(&self.objects)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_annotated(&self) -> bool {
        self.objects.values().all(|o| o.genre.is_some())
    }

    pub fn domain_sizes(&self) -> DomainSizes {
        let artists: BTreeSet<&str> = self.objects.values().map(|o| o.artist.as_str()).collect();
        let genres: Option<BTreeSet<&str>> =
            self.objects.values().map(|o| o.genre.as_deref()).collect();
        DomainSizes {
            genres: genres.map(|g| g.len()),
            artists: artists.len(),
            tracks: self.objects.len(),
        }
    }

    /// Objects referenced by at least one record, in track-id order.
    pub fn used_objects(&self) -> Vec<&TrackObject> {
        let used: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.items.iter().map(|i| i.track.as_str()))
            .collect();
        used.into_iter().map(|t| &self.objects[t]).collect()
    }
}

fn artist_conflict(track: &str, a: &str, b: &str) -> Error {
    Error::Validation(format!(
        "track `{track}` is credited to both `{a}` and `{b}`"
    ))
}

fn register_items(objects: &mut ObjectTable, record: &SequenceRecord) -> Result<()> {
    for item in &record.items {
        match objects.get(&item.track) {
            Some(o) if o.artist != item.artist => {
                return Err(artist_conflict(&item.track, &o.artist, &item.artist))
            }
            Some(_) => {}
            None => {
                objects.insert(
                    item.track.clone(),
                    TrackObject {
                        track: item.track.clone(),
                        artist: item.artist.clone(),
                        genre: None,
                    },
                );
            }
        }
    }
    Ok(())
}

/// Result of [`parse_corpus`].
#[derive(Debug, Clone)]
pub struct Ingest {
    pub corpus: Corpus,
    /// Records dropped because they hold fewer than two items.
    pub dropped_short: usize,
}

fn check_id(kind: &str, id: &str, line: usize) -> Result<()> {
    if id.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("empty {kind} id"),
        });
    }
    if id.contains(['\t', '\n', '\r']) {
        return Err(Error::Parse {
            line,
            message: format!("{kind} id {id:?} contains a tab or line break"),
        });
    }
    Ok(())
}

/// Reads a JSONL corpus, one record per line. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Ingest> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut objects = ObjectTable::new();
    let mut dropped_short = 0;

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SequenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        check_id("record", &record.id, line_no)?;
        check_id("genre", &record.label, line_no)?;
        for item in &record.items {
            check_id("track", &item.track, line_no)?;
            check_id("artist", &item.artist, line_no)?;
        }
        if !ids.insert(record.id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate record id `{}` on line {line_no}",
                record.id
            )));
        }
        if record.len() < 2 {
            dropped_short += 1;
            continue;
        }
        register_items(&mut objects, &record)?;
        records.push(record);
    }

    Ok(Ingest {
        corpus: Corpus {
            records,
            objects: Arc::new(objects),
        },
        dropped_short,
    })
}

/// Writes records as JSONL in corpus order.
pub fn write_corpus<W: Write>(mut out: W, records: &[SequenceRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Number of single-deletion variants produced per source record.
pub const DELETION_VARIANTS: usize = 9;

/// Result of [`augment_corpus`].
#[derive(Debug, Clone)]
pub struct Augmented {
    pub corpus: Corpus,
    /// Records left out because they hold fewer than three items.
    pub skipped_short: usize,
}

/// `items[p..] ++ items[..p]`; `pivot` counts items moved to the back.
pub fn rotate_at<T: Clone>(items: &[T], pivot: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(items.len());
    out.extend_from_slice(&items[pivot..]);
    out.extend_from_slice(&items[..pivot]);
    out
}

fn augment_record(record: &SequenceRecord, seed: u64) -> Vec<SequenceRecord> {
    let mut rng = rng::rng_from_seed(rng::stream_seed(seed, &record.id));
    let n = record.len();
    let mut out = Vec::with_capacity(DELETION_VARIANTS + 1);
    for k in 1..=DELETION_VARIANTS {
        let mut items = record.items.clone();
        items.remove(rng.random_range(0..n));
        out.push(record.with_items(&format!("d{k}"), items));
    }
    let pivot = rng.random_range(1..n);
    out.push(record.with_items("r", rotate_at(&record.items, pivot)));
    out
}

/// Replaces every record of length >= 3 with nine single-deletion variants
/// and one rotation. Variants keep the source label; originals are dropped.
pub fn augment_corpus(corpus: &Corpus, seed: u64) -> Result<Augmented> {
    let eligible: Vec<&SequenceRecord> = corpus.records.iter().filter(|r| r.len() >= 3).collect();
    let skipped_short = corpus.len() - eligible.len();
    let records: Vec<SequenceRecord> = par::map(&eligible, |r| augment_record(r, seed))
        .into_iter()
        .flatten()
        .collect();
    Ok(Augmented {
        corpus: Corpus::with_objects(records, corpus.shared_objects())?,
        skipped_short,
    })
}

/// Sets each track's genre to the playlist label it appears under most often,
/// ignoring [`MIXED_GENRE`] unless that is the only label seen.
pub fn assign_genres(corpus: Corpus) -> Result<Corpus> {
    assign_genres_excluding(corpus, MIXED_GENRE)
}

pub fn assign_genres_excluding(mut corpus: Corpus, mixed_label: &str) -> Result<Corpus> {
    let mut counts: HashMap<&str, BTreeMap<&str, u64>> = HashMap::new();
    for record in &corpus.records {
        for item in &record.items {
            *counts
                .entry(item.track.as_str())
                .or_default()
                .entry(record.label.as_str())
                .or_insert(0) += 1;
        }
    }

    let mut genres: Vec<(String, String)> = Vec::with_capacity(corpus.objects.len());
    for track in corpus.objects.keys() {
        let per_label = counts.get(track.as_str()).ok_or_else(|| {
            Error::Validation(format!("track `{track}` does not appear in any record"))
        })?;
        genres.push((track.clone(), pick_genre(per_label, mixed_label).to_owned()));
    }
    drop(counts);

    let objects = Arc::make_mut(&mut corpus.objects);
    for (track, genre) in genres {
        if let Some(o) = objects.get_mut(&track) {
            o.genre = Some(genre);
        }
    }
    Ok(corpus)
}

fn pick_genre<'a>(per_label: &BTreeMap<&'a str, u64>, mixed_label: &'a str) -> &'a str {
    // BTreeMap iterates in lexicographic order, so a strict `>` keeps the
    // smallest label among ties.
    let mut best: Option<(&str, u64)> = None;
    for (&label, &count) in per_label {
        if label == mixed_label {
            continue;
        }
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map_or(mixed_label, |(label, _)| label)
}

/// Shuffles records with `seed` and sends the first `ceil(fraction * n)` to
/// the training half. Both halves share the object table.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from_seed(seed));
    let n_train = train_count(n, train_fraction);

    let pick = |idx: &[usize]| -> Vec<SequenceRecord> {
        idx.iter().map(|&i| corpus.records[i].clone()).collect()
    };
    let train = Corpus {
        records: pick(&order[..n_train]),
        objects: corpus.shared_objects(),
    };
    let test = Corpus {
        records: pick(&order[n_train..]),
        objects: corpus.shared_objects(),
    };
    Ok((train, test))
}

fn train_count(n: usize, fraction: f64) -> usize {
    // Guard against products like 0.7 * 10 landing a hair above 7.
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let count = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (count as usize).min(n)
}
