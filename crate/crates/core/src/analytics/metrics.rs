//! Homogenization metrics derived from a similarity matrix whose rows are
//! grouped into consecutive generations of `n_agents` stories.

use serde::{Deserialize, Serialize};

use super::tfidf::SimilarityMatrix;
use super::AnalyticsError;
use crate::Scalar;

pub const WITHIN_GENERATION: &str = "within_generation";
pub const SUCCESSIVE: &str = "successive";
pub const FIRST_GENERATION: &str = "first_generation";

fn n_generations<T: Scalar>(m: &SimilarityMatrix<T>, n_agents: usize) -> Result<usize, AnalyticsError> {
    if n_agents == 0 || !m.size().is_multiple_of(n_agents) {
        return Err(AnalyticsError::Shape { size: m.size(), n_agents });
    }
    Ok(m.size() / n_agents)
}

fn check_generation<T: Scalar>(m: &SimilarityMatrix<T>, n_agents: usize, g: usize) -> Result<(), AnalyticsError> {
    let n_generations = n_generations(m, n_agents)?;
    if g >= n_generations {
        return Err(AnalyticsError::GenerationOutOfRange { generation: g, n_generations });
    }
    Ok(())
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>) -> Option<T> {
    let (sum, count) = values.fold((T::zero(), 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / T::of_usize(count))
}

/// Mean similarity over unordered pairs of distinct stories of generation `g`;
/// `None` with fewer than two stories per generation.
pub fn within_generation_similarity<T: Scalar>(
    m: &SimilarityMatrix<T>,
    n_agents: usize,
    g: usize,
) -> Result<Option<T>, AnalyticsError> {
    check_generation(m, n_agents, g)?;
    let base = g * n_agents;
    Ok(mean((0..n_agents).flat_map(|a| (a + 1..n_agents).map(move |b| m.get(base + a, base + b)))))
}

/// Mean similarity between every story of generation `g` and every story of `g - 1`.
pub fn successive_similarity<T: Scalar>(
    m: &SimilarityMatrix<T>,
    n_agents: usize,
    g: usize,
) -> Result<T, AnalyticsError> {
    check_generation(m, n_agents, g)?;
    if g == 0 {
        return Err(AnalyticsError::GenerationOutOfRange { generation: 0, n_generations: m.size() / n_agents });
    }
    let (cur, prev) = (g * n_agents, (g - 1) * n_agents);
    Ok(mean((0..n_agents).flat_map(|a| (0..n_agents).map(move |b| m.get(cur + a, prev + b))))
        .expect("n_agents >= 1"))
}

/// Mean similarity between stories of generation `g` and of generation 0.
/// At `g = 0` self-pairs are excluded; a single-story generation 0 has no
/// other pair, so its only story is compared with itself.
pub fn first_generation_similarity<T: Scalar>(
    m: &SimilarityMatrix<T>,
    n_agents: usize,
    g: usize,
) -> Result<T, AnalyticsError> {
    check_generation(m, n_agents, g)?;
    let cur = g * n_agents;
    if g == 0 && n_agents == 1 {
        return Ok(m.get(0, 0));
    }
    let pairs = (0..n_agents).flat_map(|a| (0..n_agents).map(move |b| (a, b)));
    Ok(mean(pairs.filter(|&(a, b)| g > 0 || a != b).map(|(a, b)| m.get(cur + a, b))).expect("n_agents >= 1"))
}

/// Per-generation values of one metric for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries<T> {
    pub name: String,
    pub values: Vec<Option<T>>,
}

impl<T: Scalar> MetricSeries<T> {
    pub fn new(name: impl Into<String>, values: Vec<Option<T>>) -> Self {
        MetricSeries { name: name.into(), values }
    }
}

/// The within-generation, successive and first-generation series, in that order.
pub fn similarity_series<T: Scalar>(
    m: &SimilarityMatrix<T>,
    n_agents: usize,
) -> Result<[MetricSeries<T>; 3], AnalyticsError> {
    let gens = n_generations(m, n_agents)?;
    let mut within = Vec::with_capacity(gens);
    let mut successive = Vec::with_capacity(gens);
    let mut first = Vec::with_capacity(gens);
    for g in 0..gens {
        within.push(within_generation_similarity(m, n_agents, g)?);
        successive.push(if g == 0 { None } else { Some(successive_similarity(m, n_agents, g)?) });
        first.push(Some(first_generation_similarity(m, n_agents, g)?));
    }
    Ok([
        MetricSeries::new(WITHIN_GENERATION, within),
        MetricSeries::new(SUCCESSIVE, successive),
        MetricSeries::new(FIRST_GENERATION, first),
    ])
}

/// Cross-seed mean and population standard deviation per generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedSeries<T> {
    pub name: String,
    pub mean: Vec<Option<T>>,
    pub std: Vec<Option<T>>,
    /// Number of seeds contributing a value at each generation.
    pub count: Vec<usize>,
}

/// Aggregates series of the same metric. Generations where no seed has a
/// value stay `None`; shorter series simply contribute fewer points.
pub fn aggregate<T: Scalar>(name: &str, series: &[&MetricSeries<T>]) -> AggregatedSeries<T> {
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let mut out = AggregatedSeries { name: name.to_string(), mean: Vec::new(), std: Vec::new(), count: Vec::new() };
    for g in 0..len {
        let values: Vec<T> = series.iter().filter_map(|s| s.values.get(g).copied().flatten()).collect();
        let m = mean(values.iter().copied());
        let sd = m.map(|m| {
            let var = values.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(values.len());
            var.sqrt()
        });
        out.mean.push(m);
        out.std.push(sd);
        out.count.push(values.len());
    }
    out
}
