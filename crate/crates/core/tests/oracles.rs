//! Independent reference computations checked against the library.
#![allow(clippy::needless_range_loop)]

mod common;

use common::{brute_force_similarity, brute_force_tfidf, enumerate_first, enumerate_successive, enumerate_within};
use cultsim::analytics::{
    first_generation_similarity, similarity_matrix, successive_similarity, within_generation_similarity,
    SimilarityMatrix, VectorSpace,
};
use cultsim::layout::{spring_layout, LayoutOptions};
use proptest::prelude::*;

const CORPORA: &[&[&str]] = &[
    &["The cat sat on the mat.", "The dog sat on the log.", "A cat and a dog met."],
    &[
        "Once upon a time a fox lived in the forest",
        "The forest was dark and the fox was brave",
        "A brave knight found a dragon",
        "The dragon and the knight became friends in the forest",
    ],
    &["aa bb cc", "aa aa bb", "cc dd ee ee ee", "ff", "aa bb cc dd ee ff gg"],
    &["Magic, magic everywhere!", "No magic here: only rain.", "Rain and magic; rain again."],
];

#[test]
fn vectorizer_matches_brute_force() {
    for corpus in CORPORA {
        let space = VectorSpace::<f64>::fit(corpus).unwrap();
        let (vocab, dense) = brute_force_tfidf(corpus);
        assert_eq!(space.n_terms(), vocab.len());
        for (doc, expected) in corpus.iter().zip(&dense) {
            let v = space.vectorize(doc);
            for (term, &want) in vocab.iter().zip(expected) {
                let got = v.get(space.column(term).unwrap());
                assert!((got - want).abs() < 1e-9, "{term}: {got} vs {want}");
            }
        }
        let m = similarity_matrix(&space, corpus);
        let oracle = brute_force_similarity(&dense);
        for i in 0..corpus.len() {
            for j in 0..corpus.len() {
                assert!((m.get(i, j) - oracle[i][j]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn metrics_match_enumeration() {
    // 3 generations x 3 agents, arbitrary symmetric entries.
    let vals = [
        [1.0, 0.11, 0.27, 0.31, 0.05, 0.42, 0.18, 0.66, 0.09],
        [0.11, 1.0, 0.53, 0.22, 0.74, 0.13, 0.39, 0.08, 0.57],
        [0.27, 0.53, 1.0, 0.61, 0.34, 0.29, 0.71, 0.45, 0.12],
        [0.31, 0.22, 0.61, 1.0, 0.48, 0.83, 0.26, 0.37, 0.64],
        [0.05, 0.74, 0.34, 0.48, 1.0, 0.19, 0.92, 0.55, 0.03],
        [0.42, 0.13, 0.29, 0.83, 0.19, 1.0, 0.44, 0.16, 0.77],
        [0.18, 0.39, 0.71, 0.26, 0.92, 0.44, 1.0, 0.58, 0.21],
        [0.66, 0.08, 0.45, 0.37, 0.55, 0.16, 0.58, 1.0, 0.35],
        [0.09, 0.57, 0.12, 0.64, 0.03, 0.77, 0.21, 0.35, 1.0],
    ];
    let rows: Vec<Vec<f64>> = vals.iter().map(|r| r.to_vec()).collect();
    let m = SimilarityMatrix::from_rows(rows.clone()).unwrap();
    for g in 0..3 {
        let w = within_generation_similarity(&m, 3, g).unwrap().unwrap();
        assert!((w - enumerate_within(&rows, 3, g)).abs() < 1e-12);
        let f = first_generation_similarity(&m, 3, g).unwrap();
        assert!((f - enumerate_first(&rows, 3, g)).abs() < 1e-12);
        if g > 0 {
            let s = successive_similarity(&m, 3, g).unwrap();
            assert!((s - enumerate_successive(&rows, 3, g)).abs() < 1e-12);
        }
    }
}

/// FR energy whose gradient gives the layout's forces (repulsion k²/d,
/// attraction w·d²/k): E = Σ_{i<j} w_ij d³ / (3k) − k² ln d.
fn fr_energy(d_ab: f64, d_ac: f64, d_bc: f64, w: [f64; 3], k: f64) -> f64 {
    [(d_ab, w[0]), (d_ac, w[1]), (d_bc, w[2])]
        .iter()
        .map(|&(d, w)| w * d.powi(3) / (3.0 * k) - k * k * d.ln())
        .sum()
}

#[test]
fn layout_pulls_similar_stories_together() {
    let m = SimilarityMatrix::from_rows(vec![vec![1.0, 0.9, 0.1], vec![0.9, 1.0, 0.1], vec![0.1, 0.1, 1.0]]).unwrap();
    // Brute-force minimization of the energy over triangle side lengths.
    let k = (1.0f64 / 3.0).sqrt();
    let steps = 100;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 1..=steps {
        for b in 1..=steps {
            for c in 1..=steps {
                let (ab, ac, bc) = (a as f64 * 0.03, b as f64 * 0.03, c as f64 * 0.03);
                if ab > ac + bc || ac > ab + bc || bc > ab + ac {
                    continue;
                }
                let e = fr_energy(ab, ac, bc, [0.9, 0.1, 0.1], k);
                if e < best.0 {
                    best = (e, ab, ac);
                }
            }
        }
    }
    assert!(best.1 < best.2, "energy minimum should have AB closer than AC");
    for seed in 0..10 {
        let g = spring_layout(&m, &LayoutOptions { seed, iterations: 200, ..Default::default() });
        assert!(g.distance(0, 1) < g.distance(0, 2), "seed {seed}");
        assert!(g.distance(0, 1) < g.distance(1, 2), "seed {seed}");
    }
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["owl", "fox", "moon", "river", "stone", "magic", "the", "a", "Owl", "x1", "tree"])
        .prop_map(str::to_string)
}

fn doc() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 0..8).prop_map(|ws| ws.join(" "))
}

proptest! {
    #[test]
    fn vectorizer_equivalence_on_random_corpora(corpus in prop::collection::vec(doc(), 1..=5)) {
        let space = VectorSpace::<f64>::fit(&corpus).unwrap();
        let (vocab, dense) = brute_force_tfidf(&corpus);
        let m = similarity_matrix(&space, &corpus);
        let oracle = brute_force_similarity(&dense);
        for (doc, expected) in corpus.iter().zip(&dense) {
            let v = space.vectorize(doc);
            for (term, &want) in vocab.iter().zip(expected) {
                prop_assert!((v.get(space.column(term).unwrap()) - want).abs() < 1e-9);
            }
        }
        for i in 0..corpus.len() {
            for j in 0..corpus.len() {
                prop_assert!((m.get(i, j) - oracle[i][j]).abs() < 1e-9);
            }
        }
        prop_assert!(m.is_symmetric() && m.in_unit_range());
    }

    #[test]
    fn similarity_is_bag_of_words(words in prop::collection::vec(word(), 1..10), other in doc()) {
        let mut shuffled = words.clone();
        shuffled.reverse();
        let text = words.join(" ");
        let corpus = [text.clone(), shuffled.join(" "), other];
        let space = VectorSpace::<f64>::fit(&corpus).unwrap();
        let m = similarity_matrix(&space, &corpus);
        if !space.vectorize(&text).is_zero() {
            prop_assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
            prop_assert_eq!(m.get(0, 0), 1.0);
        }
        prop_assert!((m.get(0, 2) - m.get(1, 2)).abs() < 1e-12);
    }
}
