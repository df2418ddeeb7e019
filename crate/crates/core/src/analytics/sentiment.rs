use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::tokenize;
use super::AnalyticsError;
use crate::Scalar;

/// Word-level polarity (`[-1, 1]`) and subjectivity (`[0, 1]`) scores.
///
/// File format: `word polarity subjectivity` per line, `#` comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon<T> {
    entries: HashMap<String, (T, T)>,
}

impl<T: Scalar> Lexicon<T> {
    /// The small bundled lexicon (`data/sentiment_lexicon.txt`).
    pub fn english() -> Self {
        Self::parse(include_str!("../../data/sentiment_lexicon.txt")).expect("bundled lexicon parses")
    }

    pub fn parse(text: &str) -> Result<Self, AnalyticsError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |message: String| AnalyticsError::Parse { line: i + 1, message };
            let [word, polarity, subjectivity] = fields[..] else {
                return Err(err(format!("expected `word polarity subjectivity`, got `{line}`")));
            };
            let p: f64 = polarity.parse().map_err(|e| err(format!("polarity `{polarity}`: {e}")))?;
            let s: f64 = subjectivity.parse().map_err(|e| err(format!("subjectivity `{subjectivity}`: {e}")))?;
            if !(-1.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&s) {
                return Err(err(format!("scores for `{word}` out of range")));
            }
            entries.insert(word.to_lowercase(), (T::of(p), T::of(s)));
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self, AnalyticsError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, word: &str) -> Option<(T, T)> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sentiment<T> {
    pub polarity: T,
    pub subjectivity: T,
}

/// Token-mean polarity and subjectivity over lexicon matches; neutral `(0, 0)` without matches.
pub fn sentiment<T: Scalar>(text: &str, lexicon: &Lexicon<T>) -> Sentiment<T> {
    let (mut p, mut s, mut n) = (T::zero(), T::zero(), 0usize);
    for token in tokenize(text) {
        if let Some((tp, ts)) = lexicon.get(&token) {
            p = p + tp;
            s = s + ts;
            n += 1;
        }
    }
    if n == 0 {
        return Sentiment { polarity: T::zero(), subjectivity: T::zero() };
    }
    let n = T::of_usize(n);
    Sentiment { polarity: p / n, subjectivity: s / n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_without_matches() {
        let lex = Lexicon::<f64>::parse("good 0.7 0.6").unwrap();
        assert_eq!(sentiment("purple table", &lex), Sentiment { polarity: 0.0, subjectivity: 0.0 });
    }

    #[test]
    fn single_word_returns_its_entry() {
        let lex = Lexicon::<f64>::parse("bright 0.8 1.0").unwrap();
        assert_eq!(sentiment("A bright day", &lex), Sentiment { polarity: 0.8, subjectivity: 1.0 });
    }

    #[test]
    fn means_over_matches() {
        let lex = Lexicon::<f64>::parse("up 0.5 0.4\ndown -0.5 0.6").unwrap();
        let s = sentiment("up and down", &lex);
        assert!(s.polarity.abs() < 1e-15);
        assert!((s.subjectivity - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bundled_lexicon_and_errors() {
        let lex = Lexicon::<f64>::english();
        assert!(lex.len() > 50);
        assert!(sentiment("a wonderful happy story", &lex).polarity > 0.0);
        assert!(Lexicon::<f64>::parse("good 2 0.5").is_err());
        assert!(Lexicon::<f64>::parse("good 0.5").is_err());
    }
}
