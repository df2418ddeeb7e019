use std::collections::BTreeMap;
use std::io::Write;

use super::text::tokenize;
use super::AnalyticsError;
use crate::Scalar;

/// TF-IDF term space fitted on one corpus.
///
/// Weights are raw term counts times the smoothed inverse document frequency
/// `ln((1 + n) / (1 + df)) + 1`, and every document vector is L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSpace<T> {
    vocabulary: BTreeMap<String, usize>,
    df: Vec<usize>,
    idf: Vec<T>,
    n_documents: usize,
}

impl<T: Scalar> VectorSpace<T> {
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Result<Self, AnalyticsError> {
        if corpus.is_empty() {
            return Err(AnalyticsError::EmptyCorpus);
        }
        let mut df_by_term: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut terms = tokenize(doc.as_ref());
            terms.sort_unstable();
            terms.dedup();
            for term in terms {
                *df_by_term.entry(term).or_default() += 1;
            }
        }
        let n = corpus.len();
        let mut vocabulary = BTreeMap::new();
        let mut df = Vec::with_capacity(df_by_term.len());
        let mut idf = Vec::with_capacity(df_by_term.len());
        for (column, (term, count)) in df_by_term.into_iter().enumerate() {
            let ratio = T::of_usize(1 + n) / T::of_usize(1 + count);
            idf.push(ratio.ln() + T::one());
            df.push(count);
            vocabulary.insert(term, column);
        }
        Ok(VectorSpace { vocabulary, df, idf, n_documents: n })
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.df[c])
    }

    pub fn idf(&self, term: &str) -> Option<T> {
        self.column(term).map(|c| self.idf[c])
    }

    /// Unit-norm TF-IDF vector; out-of-vocabulary tokens are ignored and a
    /// text with no known token maps to the zero vector.
    pub fn vectorize(&self, text: &str) -> SparseVector<T> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for token in tokenize(text) {
            if let Some(c) = self.column(&token) {
                *counts.entry(c).or_default() += 1;
            }
        }
        let mut entries: Vec<(usize, T)> =
            counts.into_iter().map(|(c, n)| (c, T::of_usize(n) * self.idf[c])).collect();
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<T>().sqrt();
        if norm > T::zero() {
            for (_, w) in &mut entries {
                *w = *w / norm;
            }
        }
        SparseVector { entries }
    }
}

/// Sparse vector with entries sorted by column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector<T> {
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseVector<T> {
    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn get(&self, column: usize) -> T {
        self.entries
            .binary_search_by_key(&column, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, w)| w == T::zero())
    }

    pub fn norm(&self) -> T {
        self.entries.iter().map(|&(_, w)| w * w).sum::<T>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        let (mut i, mut j) = (0, 0);
        let mut acc = T::zero();
        while i < self.entries.len() && j < other.entries.len() {
            let (ci, wi) = self.entries[i];
            let (cj, wj) = other.entries[j];
            match ci.cmp(&cj) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc = acc + wi * wj;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Dense symmetric cosine-similarity matrix; rows and columns are story indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    size: usize,
    data: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Pairwise dot products of unit vectors, clamped to `[0, 1]`. The
    /// diagonal is exactly 1, or 0 for an all-zero vector.
    pub fn from_vectors(vectors: &[SparseVector<T>]) -> Self {
        let n = vectors.len();
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = if vectors[i].is_zero() { T::zero() } else { T::one() };
            for j in i + 1..n {
                let s = vectors[i].dot(&vectors[j]).max(T::zero()).min(T::one());
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SimilarityMatrix { size: n, data }
    }

    /// Builds a matrix from row-major values; used for synthetic matrices and
    /// when reading one back from disk. Symmetry is not enforced here.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, AnalyticsError> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(AnalyticsError::Parse {
                    line: i + 1,
                    message: format!("row has {} entries, expected {size}", row.len()),
                });
            }
            data.extend(row);
        }
        Ok(SimilarityMatrix { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.size.max(1)).take(self.size)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (i + 1..self.size).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalyticsError> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.rows() {
            writer.write_record(row.iter().map(|v| v.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, AnalyticsError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|field| {
                    field.trim().parse::<f64>().map(T::of).map_err(|e| AnalyticsError::Parse {
                        line: line + 1,
                        message: format!("`{field}`: {e}"),
                    })
                })
                .collect::<Result<Vec<T>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

/// Cosine similarities of `stories`, ordered by story index, in a fitted space.
pub fn similarity_matrix<T: Scalar, S: AsRef<str>>(space: &VectorSpace<T>, stories: &[S]) -> SimilarityMatrix<T> {
    let vectors: Vec<SparseVector<T>> = stories.iter().map(|s| space.vectorize(s.as_ref())).collect();
    SimilarityMatrix::from_vectors(&vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idf_values() {
        let space = VectorSpace::<f64>::fit(&["aa bb", "aa cc"]).unwrap();
        assert_eq!(space.df("aa"), Some(2));
        assert_eq!(space.idf("aa"), Some(1.0));
        let space = VectorSpace::<f64>::fit(&["aa bb", "cc", "dd"]).unwrap();
        assert!((space.idf("bb").unwrap() - (2.0f64.ln() + 1.0)).abs() < 1e-15);
        assert!((space.idf("bb").unwrap() - 1.6931).abs() < 1e-4);
        assert!(matches!(VectorSpace::<f64>::fit::<&str>(&[]), Err(AnalyticsError::EmptyCorpus)));
    }

    #[test]
    fn single_term_is_unit_basis_vector() {
        let space = VectorSpace::<f64>::fit(&["owl fox", "fox"]).unwrap();
        let v = space.vectorize("owl unknown");
        assert_eq!(v.entries(), &[(space.column("owl").unwrap(), 1.0)]);
        assert_eq!(space.vectorize("owl fox"), space.vectorize("owl fox"));
        assert!(space.vectorize("zz").is_zero());
    }

    #[test]
    fn identical_and_disjoint_texts() {
        let stories = ["the owl flew", "the owl flew", "green fox", "!!"];
        let space = VectorSpace::<f64>::fit(&stories).unwrap();
        let m = similarity_matrix(&space, &stories);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(3, 3), 0.0);
        assert_eq!(m.get(2, 2), 1.0);
        assert!(m.is_symmetric() && m.in_unit_range());
    }

    #[test]
    fn csv_round_trip() {
        let stories = ["one fish two fish", "red fish blue fish", "blue moon"];
        let space = VectorSpace::<f64>::fit(&stories).unwrap();
        let m = similarity_matrix(&space, &stories);
        let back = SimilarityMatrix::<f64>::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert!(SimilarityMatrix::<f64>::from_csv("1,0\n0").is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let stories = ["the owl flew home", "an owl flew away"];
        let space = VectorSpace::<f32>::fit(&stories).unwrap();
        let m = similarity_matrix(&space, &stories);
        assert!(m.get(0, 1) > 0.0 && m.get(0, 1) < 1.0);
    }
}
