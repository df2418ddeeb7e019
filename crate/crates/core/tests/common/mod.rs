//! Slow, literal reference implementations used as test oracles.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use std::collections::BTreeSet;

/// Tokens are maximal runs of word characters of length two or more, lowercased.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Dense TF-IDF rows over the sorted vocabulary: raw counts, smoothed idf
/// `ln((1 + n) / (1 + df)) + 1`, then L2 normalization.
pub fn brute_force_tfidf<S: AsRef<str>>(corpus: &[S]) -> (Vec<String>, Vec<Vec<f64>>) {
    let docs: Vec<Vec<String>> = corpus.iter().map(|d| oracle_tokens(d.as_ref())).collect();
    let vocab: Vec<String> = docs.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n = docs.len() as f64;
    let mut rows = Vec::new();
    for doc in &docs {
        let mut row = Vec::new();
        for term in &vocab {
            let mut tf = 0.0;
            for tok in doc {
                if tok == term {
                    tf += 1.0;
                }
            }
            let mut df = 0.0;
            for other in &docs {
                if other.contains(term) {
                    df += 1.0;
                }
            }
            let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            row.push(tf * idf);
        }
        let mut sq = 0.0;
        for x in &row {
            sq += x * x;
        }
        if sq > 0.0 {
            let norm = sq.sqrt();
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        rows.push(row);
    }
    (vocab, rows)
}

/// Cosine similarity of every pair of dense rows, clamped to `[0, 1]`;
/// zero rows are similar to nothing, including themselves.
pub fn brute_force_similarity(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (mut dot, mut ni, mut nj) = (0.0, 0.0, 0.0);
            for t in 0..rows[i].len() {
                dot += rows[i][t] * rows[j][t];
                ni += rows[i][t] * rows[i][t];
                nj += rows[j][t] * rows[j][t];
            }
            out[i][j] = if ni == 0.0 || nj == 0.0 { 0.0 } else { (dot / (ni.sqrt() * nj.sqrt())).clamp(0.0, 1.0) };
        }
    }
    out
}

fn average(pairs: Vec<(usize, usize)>, m: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for &(i, j) in &pairs {
        total += m[i][j];
    }
    total / pairs.len() as f64
}

pub fn enumerate_within(m: &[Vec<f64>], n: usize, g: usize) -> f64 {
    let mut pairs = Vec::new();
    for i in g * n..(g + 1) * n {
        for j in g * n..(g + 1) * n {
            if i < j {
                pairs.push((i, j));
            }
        }
    }
    average(pairs, m)
}

pub fn enumerate_successive(m: &[Vec<f64>], n: usize, g: usize) -> f64 {
    let mut pairs = Vec::new();
    for i in g * n..(g + 1) * n {
        for j in (g - 1) * n..g * n {
            pairs.push((i, j));
        }
    }
    average(pairs, m)
}

pub fn enumerate_first(m: &[Vec<f64>], n: usize, g: usize) -> f64 {
    let mut pairs = Vec::new();
    for i in g * n..(g + 1) * n {
        for j in 0..n {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    average(pairs, m)
}

use cultsim::backend::{BackendConfig, GenerationParams, MockRule};
use cultsim::results::AnalysisOptions;
use cultsim::{PersonalityAssignment, PromptSet, SimulationConfig, TopologyKind};

/// A mock-backed experiment with the built-in story prompts.
pub fn mock_config(topology: TopologyKind, n_agents: usize, n_generations: usize, rule: MockRule) -> SimulationConfig {
    SimulationConfig {
        name: "test".into(),
        n_agents,
        n_generations,
        n_seeds: 1,
        topology,
        prompts: PromptSet::new("tell_story", cultsim::agents::TELL_ME_A_STORY, cultsim::agents::COMBINE_TWO),
        personalities: PersonalityAssignment::default(),
        backend: BackendConfig::mock(rule),
        params: GenerationParams::default(),
        rng_seed: 0,
        shuffle_neighbors: false,
        analysis: AnalysisOptions::default(),
    }
}

/// Every file under `root`, relative path -> bytes.
pub fn snapshot(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}
