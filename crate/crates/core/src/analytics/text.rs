use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Lowercased runs of at least two word characters (alphanumeric or `_`), in order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut len = 0;
    let mut flush = |current: &mut String, len: &mut usize| {
        if *len >= 2 {
            tokens.push(current.to_lowercase());
        }
        current.clear();
        *len = 0;
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            current.push(c);
            len += 1;
        } else {
            flush(&mut current, &mut len);
        }
    }
    flush(&mut current, &mut len);
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    /// The bundled English list (`data/stopwords_en.txt`).
    pub fn english() -> Self {
        Self::parse(include_str!("../../data/stopwords_en.txt"))
    }

    /// One word per line; `#` starts a comment line.
    pub fn parse(list: &str) -> Self {
        Stopwords(
            list.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub word: String,
    pub count: usize,
}

/// Top-`k` non-stopword alphanumeric tokens by frequency, ties alphabetical.
pub fn extract_keywords(text: &str, k: usize, stopwords: &Stopwords) -> Vec<Keyword> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for token in tokenize(text) {
        if token.chars().all(char::is_alphanumeric) && !stopwords.contains(&token) {
            *counts.entry(token).or_default() += 1;
        }
    }
    let mut ranked: Vec<Keyword> = counts.into_iter().map(|(word, count)| Keyword { word, count }).collect();
    // Stable sort keeps the alphabetical order of the BTreeMap among ties.
    ranked.sort_by_key(|k| std::cmp::Reverse(k.count));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordChain {
    /// Generations in which any story used the word as a keyword, ascending.
    pub generations: Vec<usize>,
    /// `[g, g + 1]` for each pair of consecutive generations sharing the word.
    pub links: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordChains {
    pub n_generations: usize,
    pub words: BTreeMap<String, WordChain>,
}

/// `per_generation[g]` holds the keyword lists of every story of generation `g`.
pub fn word_chains(per_generation: &[Vec<Vec<Keyword>>]) -> WordChains {
    let mut membership: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (g, stories) in per_generation.iter().enumerate() {
        for kw in stories.iter().flatten() {
            membership.entry(kw.word.clone()).or_default().insert(g);
        }
    }
    let words = membership
        .into_iter()
        .map(|(word, gens)| {
            let generations: Vec<usize> = gens.into_iter().collect();
            let links = generations
                .windows(2)
                .filter(|w| w[1] == w[0] + 1)
                .map(|w| [w[0], w[1]])
                .collect();
            (word, WordChain { generations, links })
        })
        .collect();
    WordChains { n_generations: per_generation.len(), words }
}
