//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criterion 7 needs the AotM-2011 corpus as JSONL in
//! `SEQWALK_AOTM_CORPUS` and is reported as SKIP without it.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqwalk::corpus::augment_corpus;
use seqwalk::eval::{BenchmarkOptions, EvalReport, ModelKind};
use seqwalk::graph::NodeId;
use seqwalk::hierarchy::Attribute;
use seqwalk::walker::{transition_distribution, WalkerState};
use seqwalk::{
    assign_genres, build_hierarchy, generate_many, pairwise_similarity, parse_corpus,
    planted_corpus, run_benchmark, smoothed_prob, split_corpus, weakly_connected_components,
    write_corpus, Corpus, Decay, Error, Hierarchy, Item, SequenceRecord, SimilarityGraph,
    SynthConfig, WeightMap,
};

const LAYERS: [Attribute; 3] = [Attribute::Genre, Attribute::Artist, Attribute::Track];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(outcome: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    match outcome {
        Outcome::Pass(d) if elapsed > limit => {
            Outcome::Fail(format!("{d}; took {elapsed:.1?}, limit {limit:?}"))
        }
        other => other,
    }
}

fn decay_oracle(decay: Decay, gap: usize) -> f64 {
    let t = gap as f64;
    match decay {
        Decay::InverseLinear => 1.0 / t,
        Decay::ExponentialShifted => (-(t - 1.0)).exp(),
        Decay::AdjacentIndicator => {
            if gap == 1 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn similarity_oracle(seqs: &[Vec<u8>], decay: Decay) -> HashMap<(u8, u8), f64> {
    let mut out = HashMap::new();
    for s in seqs {
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let w = decay_oracle(decay, j - i);
                if w > 0.0 {
                    *out.entry((s[i], s[j])).or_insert(0.0) += w;
                }
            }
        }
    }
    out
}

fn matches_oracle(got: &WeightMap<u8>, expected: &HashMap<(u8, u8), f64>) -> bool {
    got.len() == expected.len()
        && expected.iter().all(|((a, b), w)| {
            let g = got.get(a, b);
            (g - w).abs() <= 1e-9 * w.abs().max(f64::MIN_POSITIVE)
        })
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seqs: Vec<Vec<u8>> = (0..1000)
        .map(|_| {
            let alphabet = rng.random_range(1..=5u8);
            let len = rng.random_range(1..=12);
            (0..len).map(|_| rng.random_range(0..alphabet)).collect()
        })
        .collect();
    let mut mismatches = 0;
    for decay in Decay::ALL {
        for s in &seqs {
            let got = pairwise_similarity(std::slice::from_ref(s), decay).unwrap();
            if !matches_oracle(&got, &similarity_oracle(std::slice::from_ref(s), decay)) {
                mismatches += 1;
            }
        }
        let got = pairwise_similarity(&seqs, decay).unwrap();
        if !matches_oracle(&got, &similarity_oracle(&seqs, decay)) {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("3 decays x (1000 sequences + pooled corpus), {mismatches} mismatches"),
    )
}

fn criterion_2() -> Outcome {
    // n0 -> nk with adjacency weight k, k = 1..4.
    let records: Vec<SequenceRecord> = (1..=4)
        .flat_map(|k| {
            (0..k).map(move |r| {
                SequenceRecord::new(
                    format!("p{k}-{r}"),
                    "G",
                    vec![Item::new("n0", "a"), Item::new(format!("n{k}"), "a")],
                )
            })
        })
        .collect();
    let corpus = assign_genres(Corpus::from_records(records).unwrap()).unwrap();
    let h = build_hierarchy(&corpus, Decay::AdjacentIndicator, &[Attribute::Track]).unwrap();
    let g = h.graph(0);
    let n0 = g.node("n0").unwrap();
    let weights: Vec<f64> = (1..=4)
        .map(|k| g.weight_by_label("n0", &format!("n{k}")))
        .collect();
    if g.node_count() != 5 || weights != [1.0, 2.0, 3.0, 4.0] {
        return Outcome::Fail(format!("unexpected fixture graph {weights:?}"));
    }

    let draws = 100_000u64;
    let mut counts = vec![0u64; g.node_count()];
    for seed in 0..draws {
        let mut state = WalkerState::at(&h, vec![n0], seed).unwrap();
        counts[state.step(&h).unwrap() as usize] += 1;
    }
    let total: f64 = weights.iter().sum();
    let kernel = transition_distribution(&h, 0, n0, None).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        let v = g.node(&format!("n{k}")).unwrap();
        let expected = weights[k - 1] / total;
        let reported = kernel.iter().find(|(u, _)| *u == v).map_or(0.0, |e| e.1);
        if (reported - expected).abs() > 1e-12 {
            return Outcome::Fail(format!(
                "kernel reports {reported} for n{k}, expected {expected}"
            ));
        }
        worst = worst.max((counts[v as usize] as f64 / draws as f64 - expected).abs());
    }
    verdict(
        worst <= 0.01,
        format!("{draws} draws, max |freq - w/sum| = {worst:.4}"),
    )
}

fn criterion_3() -> Outcome {
    let map: WeightMap<String> = [("src", "x", 3.0), ("y", "x", 1.0)]
        .into_iter()
        .map(|(s, d, w)| (s.to_owned(), d.to_owned(), w))
        .collect();
    let g = SimilarityGraph::from_weights(&map);
    let (src, x, y) = (
        g.node("src").unwrap(),
        g.node("x").unwrap(),
        g.node("y").unwrap(),
    );
    let px = smoothed_prob(&g, &[x, y], src, Some(x), 10).unwrap();
    let py = smoothed_prob(&g, &[x, y], src, Some(y), 10).unwrap();
    if px != 0.96875 || py != 0.03125 {
        return Outcome::Fail(format!("hand example gave {px}, {py}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let nodes = rng.random_range(2..=12u32);
        let edges = rng.random_range(1..=40);
        let map: WeightMap<String> = (0..edges)
            .map(|_| {
                let s = rng.random_range(0..nodes);
                let d = rng.random_range(0..nodes);
                (
                    format!("v{s}"),
                    format!("v{d}"),
                    rng.random_range(0.001..100.0),
                )
            })
            .collect();
        let g = SimilarityGraph::from_weights(&map);
        let src = rng.random_range(0..g.node_count() as NodeId);
        // Out-neighbours plus a few unconnected candidates.
        let mut candidates: Vec<NodeId> = g.out_neighbors(src).to_vec();
        for _ in 0..rng.random_range(0..3) {
            let v = rng.random_range(0..g.node_count() as NodeId);
            if !candidates.contains(&v) {
                candidates.push(v);
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let domain = rng.random_range(1..=1000);
        let sum: f64 = candidates
            .iter()
            .map(|&c| smoothed_prob(&g, &candidates, src, Some(c), domain).unwrap())
            .sum();
        worst = worst.max((sum - 1.0).abs());
    }
    verdict(
        worst <= 1e-9,
        format!("P = {{{px}, {py}}}; 1000 graphs, max |sum - 1| = {worst:.2e}"),
    )
}

fn random_corpus(rng: &mut ChaCha8Rng, min_len: usize) -> Corpus {
    let tracks = rng.random_range(3..=12);
    let artists = rng.random_range(2..=5);
    let artist_of: Vec<usize> = (0..tracks).map(|_| rng.random_range(0..artists)).collect();
    let labels = ["G0", "G1", "G2", "MIXED GENRE"];
    let records = (0..rng.random_range(1..=8))
        .map(|i| {
            let len = rng.random_range(min_len..=9);
            let items = (0..len)
                .map(|_| {
                    let t = rng.random_range(0..tracks);
                    Item::new(format!("t{t}"), format!("a{}", artist_of[t]))
                })
                .collect();
            SequenceRecord::new(format!("p{i}"), *labels.choose(rng).unwrap(), items)
        })
        .collect();
    Corpus::from_records(records).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut checked, mut edges, mut violations) = (0, 0usize, 0usize);
    while checked < 100 {
        let corpus = assign_genres(random_corpus(&mut rng, 2)).unwrap();
        let decay = *Decay::ALL.choose(&mut rng).unwrap();
        let h = match build_hierarchy(&corpus, decay, &LAYERS) {
            Ok(h) => h,
            // More genres than artists violates the layer size order.
            Err(Error::Build(_)) => continue,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        checked += 1;
        let tracks = h.graph(2);
        for (u, v, _) in tracks.edges() {
            edges += 1;
            let (ou, ov) = (
                &corpus.objects()[tracks.label(u)],
                &corpus.objects()[tracks.label(v)],
            );
            for (l, attribute) in LAYERS[..2].iter().enumerate() {
                let (a, b) = (
                    attribute.value_of(ou).unwrap(),
                    attribute.value_of(ov).unwrap(),
                );
                if h.graph(l).weight_by_label(a, b) <= 0.0 {
                    violations += 1;
                }
            }
        }
        if h.verify_edge_projection().is_err() {
            violations += 1;
        }
    }
    verdict(
        violations == 0,
        format!("{checked} corpora, {edges} track edges scanned, {violations} violations"),
    )
}

fn is_subsequence(short: &[Item], long: &[Item]) -> bool {
    let mut it = long.iter();
    short.iter().all(|x| it.any(|y| y == x))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut problems = Vec::new();
    let (mut sources, mut produced) = (0, 0);
    for round in 0..200 {
        let corpus = random_corpus(&mut rng, 3);
        let out = augment_corpus(&corpus, round).unwrap().corpus;
        sources += corpus.len();
        produced += out.len();
        if out.len() != 10 * corpus.len() {
            problems.push(format!("{} -> {}", corpus.len(), out.len()));
        }
        let by_id: HashMap<&str, &SequenceRecord> = corpus
            .records()
            .iter()
            .map(|r| (r.id.as_str(), r))
            .collect();
        for v in out.records() {
            let (src_id, tag) = v.id.rsplit_once('~').unwrap();
            let src = by_id[src_id];
            let n = src.len();
            let ok = v.label == src.label
                && if tag == "r" {
                    v.len() == n
                        && (1..n).any(|p| {
                            src.items[p..]
                                .iter()
                                .chain(&src.items[..p])
                                .eq(v.items.iter())
                        })
                } else {
                    tag.starts_with('d')
                        && (1..=9).contains(&tag[1..].parse::<u32>().unwrap_or(0))
                        && v.len() == n - 1
                        && is_subsequence(&v.items, &src.items)
                };
            if !ok {
                problems.push(v.id.clone());
            }
        }
    }
    // AotM-2011 grows from 101343 to 1013430 playlists.
    let scaled = 101_343 * produced / sources;
    verdict(
        problems.is_empty() && scaled == 1_013_430,
        format!(
            "{sources} -> {produced} records over 200 corpora, scaling 101343 -> {scaled}, {} problems {:?}",
            problems.len(),
            problems.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5u64 {
        let corpus = assign_genres(planted_corpus(&SynthConfig::default(), seed).unwrap()).unwrap();
        let report: EvalReport = run_benchmark(&corpus, &BenchmarkOptions::new(seed)).unwrap();
        for split in report.splits() {
            let l = |k| report.get(k, split).unwrap().avg_loglik_log10();
            let (hier, multi, single) = (
                l(ModelKind::Hierarchical),
                l(ModelKind::MultiHop),
                l(ModelKind::SingleHop),
            );
            let ordered = hier > multi && multi > single;
            ok &= ordered;
            lines.push(format!(
                "      seed {seed} split {split}: L10 hier {hier:.3} multi {multi:.3} single {single:.3} | gaps {:.3} / {:.3} / {:.3} decades{}",
                hier - multi,
                multi - single,
                hier - single,
                if ordered { "" } else { "  <-- out of order" }
            ));
        }
    }
    for l in &lines {
        println!("{l}");
    }
    verdict(
        ok,
        "5 seeds x 3 splits on the 10/100/1000 planted corpus".into(),
    )
}

fn criterion_7() -> Outcome {
    let Some(path) = std::env::var_os("SEQWALK_AOTM_CORPUS") else {
        return Outcome::Skip("SEQWALK_AOTM_CORPUS not set".into());
    };
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) => return Outcome::Fail(format!("{}: {e}", Path::new(&path).display())),
    };
    let corpus = match parse_corpus(BufReader::new(file)).and_then(|i| assign_genres(i.corpus)) {
        Ok(c) => c,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let sizes = corpus.domain_sizes();
    let sizes_ok = sizes.genres == Some(43) && sizes.artists == 174_566 && sizes.tracks == 720_100;
    let h = match build_hierarchy(&corpus, Decay::ExponentialShifted, &LAYERS) {
        Ok(h) => h,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let giant: Vec<f64> = h
        .graphs()
        .iter()
        .map(|g| {
            let comps = weakly_connected_components(g);
            100.0 * comps.first().map_or(0, Vec::len) as f64 / g.node_count() as f64
        })
        .collect();
    let targets = [100.0, 95.6, 89.4];
    let gcc_ok = giant.iter().zip(targets).all(|(g, t)| (g - t).abs() <= 0.5);
    verdict(
        sizes_ok && gcc_ok,
        format!(
            "domains {:?}/{}/{} (want 43/174566/720100); giant component % genre {:.1} artist {:.1} track {:.1} (want 100/95.6/89.4)",
            sizes.genres, sizes.artists, sizes.tracks, giant[0], giant[1], giant[2]
        ),
    )
}

/// Every randomized stage, serialized to bytes.
fn stage_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let corpus_bytes = |name: &str, c: &Corpus| {
        let mut buf = Vec::new();
        write_corpus(&mut buf, c.records()).unwrap();
        (name.to_owned(), buf)
    };
    let config = SynthConfig {
        playlists: 400,
        ..SynthConfig::default()
    };
    let raw = planted_corpus(&config, 21).unwrap();
    out.push(corpus_bytes("synth", &raw));
    let aug = augment_corpus(&raw, 22).unwrap().corpus;
    out.push(corpus_bytes("augment", &aug));
    let annotated = assign_genres(aug).unwrap();
    let (train, test) = split_corpus(&annotated, 0.7, 23).unwrap();
    out.push(corpus_bytes("train", &train));
    out.push(corpus_bytes("test", &test));
    let h = build_hierarchy(&train, Decay::InverseLinear, &LAYERS).unwrap();
    h.save(dir).unwrap();
    let mut names: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    for p in names {
        out.push((
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).unwrap(),
        ));
    }
    let loaded = Hierarchy::load(dir).unwrap();
    let walks = generate_many(&loaded, 15, 200, 24).unwrap();
    let mut buf = Vec::new();
    write_corpus(&mut buf, &walks).unwrap();
    out.push(("generate".into(), buf));
    let mut options = BenchmarkOptions::new(25);
    options.splits = vec![0.5, 0.9];
    let report = run_benchmark(&assign_genres(raw).unwrap(), &options).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    out.push(("report".into(), buf));
    out
}

fn criterion_8() -> Outcome {
    let runs: Vec<Vec<(String, Vec<u8>)>> = [1usize, 4, 4]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| stage_outputs(dir.path()))
        })
        .collect();
    let mut differing = Vec::new();
    for other in &runs[1..] {
        for ((name, a), (_, b)) in runs[0].iter().zip(other) {
            if a != b {
                differing.push(name.clone());
            }
        }
    }
    verdict(
        differing.is_empty() && runs.iter().all(|r| r.len() == runs[0].len()),
        format!(
            "{} artifacts compared across 1, 4, 4 threads; differing: {differing:?}",
            runs[0].len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "similarity oracle equivalence",
            criterion_1,
            Duration::from_secs(10),
        ),
        (
            "transition kernel frequencies",
            criterion_2,
            Duration::from_secs(5),
        ),
        (
            "smoothing example and normalization",
            criterion_3,
            Duration::MAX,
        ),
        ("edge-projection invariant", criterion_4, Duration::MAX),
        (
            "augmentation 10x with structural checks",
            criterion_5,
            Duration::MAX,
        ),
        (
            "model ordering on planted hierarchy",
            criterion_6,
            Duration::from_secs(300),
        ),
        (
            "AotM-2011 domain sizes and giant components",
            criterion_7,
            Duration::MAX,
        ),
        (
            "determinism under fixed seeds and threads",
            criterion_8,
            Duration::MAX,
        ),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (tag, detail) = match within(outcome, elapsed, limit) {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{}] {name}: {detail} ({elapsed:.2?})", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
