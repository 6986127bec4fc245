//! Synthetic fixture: a small corpus with every sidecar, training targets,
//! an annotation export and a run configuration.

#![allow(dead_code)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mslr_eval::corpus::AnnotationLog;
use mslr_eval::humaneval::{
    Agreement, Annotation, Effect, FacetAnnotation, Fluency, PairwiseAnnotation, Preference, Strength,
};

pub const SYSTEMS: [&str; 3] = ["sysA", "sysB", "sysC"];
pub const N_REVIEWS: usize = 12;

const WORDS: [&str; 16] = [
    "metformin",
    "insulin",
    "women",
    "children",
    "pain",
    "blood",
    "pressure",
    "trials",
    "placebo",
    "therapy",
    "reduced",
    "improved",
    "mortality",
    "risk",
    "outcomes",
    "dose",
];
const STOCK: &str = "there is insufficient evidence to support the use of";

pub struct Fixture {
    pub dir: PathBuf,
    pub config: PathBuf,
}

pub fn review_id(i: usize) -> String {
    format!("r{:02}", i + 1)
}

fn sentence(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_lines(path: &Path, lines: &[Value]) {
    let mut f = fs::File::create(path).unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().any(|x| x.abs() > 0.1) {
            return v;
        }
    }
}

fn dist(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let a: f64 = rng.random_range(0.0..1.0);
    let b: f64 = rng.random_range(0.0..(1.0 - a));
    [a, b, 1.0 - a - b]
}

fn direction(rng: &mut ChaCha8Rng) -> &'static str {
    ["-1", "0", "+1"].choose(rng).unwrap()
}

pub struct Options {
    pub annotations: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self { annotations: true }
    }
}

pub fn write(dir: &Path, opts: Options) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    fs::create_dir_all(dir).unwrap();

    let mut reviews = Vec::new();
    let mut texts: Vec<(String, String, String)> = Vec::new();
    let mut statements = Vec::new();
    for i in 0..N_REVIEWS {
        let rid = review_id(i);
        let target = format!("{} {}", sentence(&mut rng, 8), if i % 3 == 0 { STOCK } else { "" });
        let inputs: Vec<Value> = (0..2 + i % 2)
            .map(|d| {
                let doc = format!("d{d}");
                statements.push(json!({
                    "review_id": rid, "doc_id": doc,
                    "statement": sentence(&mut rng, 6), "direction": direction(&mut rng),
                }));
                json!({"doc_id": doc, "abstract": sentence(&mut rng, 20)})
            })
            .collect();
        reviews.push(json!({"review_id": rid, "target": target.trim(), "inputs": inputs}));
        texts.push(("target".into(), rid.clone(), target.trim().to_string()));
    }
    let mut generated = Vec::new();
    for (si, s) in SYSTEMS.iter().enumerate() {
        for i in 0..N_REVIEWS {
            let rid = review_id(i);
            let stock = if (i + si) % 2 == 0 { STOCK } else { "" };
            let summary = format!("{} {}", stock, sentence(&mut rng, 7 + si)).trim().to_string();
            generated.push(json!({"system_id": s, "review_id": rid, "summary": summary}));
            texts.push((s.to_string(), rid, summary));
        }
    }
    write_lines(&dir.join("reviews.jsonl"), &reviews);
    write_lines(&dir.join("generated.jsonl"), &generated);
    write_lines(&dir.join("statements.jsonl"), &statements);

    let train: Vec<Value> = (0..20)
        .map(|i| {
            let t = if i % 4 == 0 {
                format!("{STOCK} {}", sentence(&mut rng, 5))
            } else {
                sentence(&mut rng, 10)
            };
            json!({"review_id": format!("t{i}"), "target": t, "inputs": []})
        })
        .collect();
    write_lines(&dir.join("train.jsonl"), &train);

    let (mut pio, mut evidence, mut directions, mut emb) = (vec![], vec![], vec![], vec![]);
    for (origin, rid, text) in &texts {
        // Holes exercise undefined instances: the first target has no spans,
        // one summary has no evidence record and one no sentence embedding.
        let spans: Vec<Value> = if origin == "target" && rid == "r01" {
            vec![]
        } else {
            (0..rng.random_range(1..4))
                .map(|_| json!({"label": *["P", "I", "O"].choose(&mut rng).unwrap(), "text": sentence(&mut rng, 2)}))
                .collect()
        };
        pio.push(json!({"origin": origin, "review_id": rid, "spans": spans}));
        if !(origin == "sysB" && rid == "r02") {
            let pairs: Vec<Value> = (0..rng.random_range(1..3))
                .map(|p| json!({"intervention": WORDS[p], "outcome": WORDS[p + 8], "dist": dist(&mut rng)}))
                .collect();
            evidence.push(json!({"origin": origin, "review_id": rid, "pairs": pairs}));
        }
        directions.push(json!({"origin": origin, "review_id": rid, "direction": direction(&mut rng)}));
        for enc in ["nli", "sts", "claimver"] {
            if enc == "sts" && origin == "sysC" && rid == "r03" {
                continue;
            }
            emb.push(json!({"origin": origin, "review_id": rid, "encoder_id": enc, "vector": unit_vec(&mut rng, 4)}));
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let vectors: Vec<Vec<f64>> = tokens.iter().map(|_| unit_vec(&mut rng, 4)).collect();
        emb.push(json!({"origin": origin, "review_id": rid, "encoder_id": "bertscore", "tokens": tokens, "vectors": vectors}));
    }
    write_lines(&dir.join("pio.jsonl"), &pio);
    write_lines(&dir.join("evidence.jsonl"), &evidence);
    write_lines(&dir.join("directions.jsonl"), &directions);
    write_lines(&dir.join("embeddings.jsonl"), &emb);

    let log = AnnotationLog::open(&dir.join("annotations.jsonl")).unwrap();
    if opts.annotations {
        for a in annotations(&mut rng) {
            log.append(a).unwrap();
        }
    }
    drop(log);

    let config = dir.join("mslr-eval.toml");
    fs::write(&config, CONFIG).unwrap();
    Fixture {
        dir: dir.to_path_buf(),
        config,
    }
}

fn annotations(rng: &mut ChaCha8Rng) -> Vec<Annotation> {
    let mut out = Vec::new();
    let mut n = 0;
    let mut next_id = || {
        n += 1;
        format!("ann-{n:04}")
    };
    let facet = |rng: &mut ChaCha8Rng, annotator: &str, system: &str, review: String, id: String| {
        let ag = |rng: &mut ChaCha8Rng| {
            *[
                Agreement::Yes,
                Agreement::Partially,
                Agreement::No,
                Agreement::NotApplicable,
            ]
            .choose(rng)
            .unwrap()
        };
        let ef = |rng: &mut ChaCha8Rng| {
            *[
                Effect::Positive,
                Effect::NoEffect,
                Effect::Negative,
                Effect::NotApplicable,
            ]
            .choose(rng)
            .unwrap()
        };
        let st = |rng: &mut ChaCha8Rng| {
            *[
                Strength::Strong,
                Strength::Moderate,
                Strength::Weak,
                Strength::Insufficient,
                Strength::NotApplicable,
            ]
            .choose(rng)
            .unwrap()
        };
        Annotation::Facet(FacetAnnotation {
            annotation_id: id,
            annotator_id: annotator.into(),
            review_id: review,
            system_id: system.into(),
            fluency: *Fluency::ALL.choose(rng).unwrap(),
            population: ag(rng),
            intervention: ag(rng),
            outcome: ag(rng),
            effect_target: ef(rng),
            effect_generated: ef(rng),
            strength_target: st(rng),
            strength_generated: st(rng),
            comment: None,
        })
    };
    for s in SYSTEMS {
        for i in 0..6 {
            out.push(facet(rng, "a1", s, review_id(i), next_id()));
        }
    }
    for s in SYSTEMS {
        for i in 0..4 {
            out.push(facet(rng, "a2", s, review_id(i), next_id()));
        }
    }
    for annotator in ["p1", "p2", "p3"] {
        for _ in 0..8 {
            let mut pair: Vec<&str> = SYSTEMS.choose_multiple(rng, 2).copied().collect();
            pair.sort();
            let preference = *[Preference::A, Preference::B, Preference::Neither].choose(rng).unwrap();
            out.push(Annotation::Pairwise(PairwiseAnnotation {
                annotation_id: next_id(),
                annotator_id: annotator.into(),
                review_id: review_id(rng.random_range(0..N_REVIEWS)),
                system_a: pair[0].into(),
                system_b: pair[1].into(),
                preference,
                justification: None,
            }));
        }
    }
    out
}

const CONFIG: &str = r#"
output_dir = "out"
seed = 7
annotations = "annotations.jsonl"

[corpus]
reviews = "reviews.jsonl"
generated = "generated.jsonl"
train_targets = "train.jsonl"

[sidecars]
pio = "pio.jsonl"
evidence = "evidence.jsonl"
statements = "statements.jsonl"
directions = "directions.jsonl"
embeddings = ["embeddings.jsonl"]

[selfrep]
ns = [1, 2, 4, 8]
coverage_n = 4
top_n = 8

[bootstrap]
samples = 200

[campaign]
plan = "out/plan.jsonl"
log = "out/served.jsonl"

[campaign.facet]
systems = ["sysA", "sysB", "sysC"]
n_overlap = 4
n_random = 2
annotators = ["a1", "a2"]
n_overlap_dual = 1
n_random_dual = 1

[campaign.pairwise]
quotas = { p1 = 6, p2 = 4 }
overlap_fraction = 0.5

[serve]
addr = "127.0.0.1:0"
"#;

/// Reads every file below `dir` as (relative path, bytes), sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
