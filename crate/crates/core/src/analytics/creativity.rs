use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::text::{tokenize, Stopwords};
use super::AnalyticsError;
use crate::Scalar;

/// Word vectors, normalized to unit length on load.
///
/// File format: one word per line followed by whitespace-separated
/// components. Blank lines and lines starting with `#` are skipped, as are
/// all-zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<T> {
    dim: usize,
    vectors: HashMap<String, Vec<T>>,
}

impl<T: Scalar> Embeddings<T> {
    pub fn parse(text: &str) -> Result<Self, AnalyticsError> {
        let mut dim = 0;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line").to_lowercase();
            let values = fields
                .map(|f| {
                    f.parse::<f64>().map(T::of).map_err(|e| AnalyticsError::Parse {
                        line: i + 1,
                        message: format!("`{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<T>, _>>()?;
            if values.is_empty() {
                return Err(AnalyticsError::Parse { line: i + 1, message: format!("`{word}` has no components") });
            }
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(AnalyticsError::Parse {
                    line: i + 1,
                    message: format!("expected {dim} components, found {}", values.len()),
                });
            }
            let norm = values.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm > T::zero() {
                vectors.insert(word, values.into_iter().map(|v| v / norm).collect());
            }
        }
        Ok(Embeddings { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, AnalyticsError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_vectors<I: IntoIterator<Item = (String, Vec<T>)>>(items: I) -> Result<Self, AnalyticsError> {
        let text: String = items
            .into_iter()
            .map(|(w, v)| {
                let comps: Vec<String> = v.iter().map(|c| c.as_f64().to_string()).collect();
                format!("{w} {}\n", comps.join(" "))
            })
            .collect();
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Mean cosine distance `1 - cos` over unordered pairs of distinct
/// non-stopword words of `text` that have an embedding. `None` when fewer
/// than two words match.
pub fn creativity<T: Scalar>(
    text: &str,
    embeddings: Option<&Embeddings<T>>,
    stopwords: &Stopwords,
) -> Result<Option<T>, AnalyticsError> {
    let embeddings = embeddings.ok_or(AnalyticsError::MissingEmbeddings)?;
    let words: BTreeSet<String> = tokenize(text).into_iter().filter(|w| !stopwords.contains(w)).collect();
    let matched: Vec<&[T]> = words.iter().filter_map(|w| embeddings.get(w)).collect();
    if matched.len() < 2 {
        return Ok(None);
    }
    let mut total = T::zero();
    let mut pairs = 0usize;
    for i in 0..matched.len() {
        for j in i + 1..matched.len() {
            let cos: T = matched[i].iter().zip(matched[j]).map(|(&a, &b)| a * b).sum();
            total = total + (T::one() - cos);
            pairs += 1;
        }
    }
    Ok(Some(total / T::of_usize(pairs)))
}
