//! Results folder layout and the analysis pipeline that fills it.
//!
//! ```text
//! <dir>/config.json
//! <dir>/topology.json
//! <dir>/summary_metrics.json
//! <dir>/seed_<s>/stories.json
//! <dir>/seed_<s>/status.json            (timestamps; not deterministic)
//! <dir>/seed_<s>/similarity_matrix.csv
//! <dir>/seed_<s>/metrics.json
//! <dir>/seed_<s>/keywords.json
//! <dir>/seed_<s>/word_chains.json
//! <dir>/seed_<s>/layout.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{
    self, aggregate, creativity, extract_keywords, sentiment, similarity_series, word_chains, Keyword,
    Stopwords, WordChains,
};
use crate::engine::{now_secs, EngineError, SeedResult, SimulationConfig, StoryRecord};
use crate::layout::{export_layout, spring_layout, LayoutOptions, DEFAULT_EDGE_THRESHOLD, DEFAULT_ITERATIONS};
use crate::topology::Topology;
use crate::{AggregatedSeries, Embeddings, LayoutGraph, Lexicon, MetricSeries, SimilarityMatrix, VectorSpace};

pub const CREATIVITY: &str = "creativity";
pub const POSITIVITY: &str = "positivity";
pub const SUBJECTIVITY: &str = "subjectivity";

fn default_keywords() -> usize {
    analytics::DEFAULT_KEYWORDS
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_threshold() -> f64 {
    DEFAULT_EDGE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    #[serde(default = "default_keywords")]
    pub keywords: usize,
    #[serde(default = "default_iterations")]
    pub layout_iterations: usize,
    #[serde(default = "default_threshold")]
    pub edge_threshold: f64,
    /// Word vector file; creativity is skipped without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Sentiment lexicon; the bundled one is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            keywords: default_keywords(),
            layout_iterations: default_iterations(),
            edge_threshold: default_threshold(),
            embeddings: None,
            lexicon: None,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.keywords == 0 {
            return Err(EngineError::InvalidConfig("keyword count must be at least 1".into()));
        }
        if self.layout_iterations == 0 {
            return Err(EngineError::InvalidConfig("layout needs at least one iteration".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_threshold) {
            return Err(EngineError::InvalidConfig("edge threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Data the analysis needs beyond the stories, loaded once per run.
pub struct AnalysisResources {
    pub stopwords: Stopwords,
    pub lexicon: Lexicon,
    pub embeddings: Option<Embeddings>,
}

impl AnalysisResources {
    pub fn load(options: &AnalysisOptions) -> Result<Self, EngineError> {
        let lexicon = match &options.lexicon {
            Some(path) => Lexicon::load(path)?,
            None => Lexicon::english(),
        };
        let embeddings = options.embeddings.as_deref().map(Embeddings::load).transpose()?;
        Ok(AnalysisResources { stopwords: Stopwords::english(), lexicon, embeddings })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub story_index: usize,
    pub agent_id: usize,
    pub generation: usize,
    pub keywords: Vec<Keyword>,
}

/// `metrics.json` of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub n_generations: usize,
    pub stories_per_generation: usize,
    pub metrics: BTreeMap<String, Vec<Option<f64>>>,
}

impl SeedMetrics {
    pub fn series(&self, name: &str) -> Option<MetricSeries> {
        self.metrics.get(name).map(|v| MetricSeries::new(name, v.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedAnalysis {
    pub matrix: SimilarityMatrix,
    pub metrics: SeedMetrics,
    pub keywords: Vec<KeywordEntry>,
    pub chains: WordChains,
    pub layout: LayoutGraph,
}

fn generation_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Every analytic for one seed's stories, ordered by story index.
pub fn analyze_seed(
    config: &SimulationConfig,
    seed: u64,
    records: &[StoryRecord],
    resources: &AnalysisResources,
) -> Result<SeedAnalysis, EngineError> {
    let width = config.stories_per_generation();
    let n_generations = records.len() / width;
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let space = VectorSpace::fit(&texts)?;
    let matrix = analytics::similarity_matrix(&space, &texts);

    let mut metrics = BTreeMap::new();
    for series in similarity_series(&matrix, width)? {
        metrics.insert(series.name, series.values);
    }
    let per_generation = |f: &dyn Fn(&str) -> Option<f64>| -> Vec<Option<f64>> {
        records.chunks(width).map(|gen| generation_mean(gen.iter().map(|r| f(&r.text)))).collect()
    };
    if let Some(emb) = &resources.embeddings {
        let values = records
            .iter()
            .map(|r| creativity(&r.text, Some(emb), &resources.stopwords))
            .collect::<Result<Vec<_>, _>>()?;
        let means = values.chunks(width).map(|gen| generation_mean(gen.iter().copied())).collect();
        metrics.insert(CREATIVITY.to_string(), means);
    }
    metrics.insert(POSITIVITY.to_string(), per_generation(&|t| Some(sentiment(t, &resources.lexicon).polarity)));
    metrics.insert(
        SUBJECTIVITY.to_string(),
        per_generation(&|t| Some(sentiment(t, &resources.lexicon).subjectivity)),
    );

    let keywords: Vec<KeywordEntry> = records
        .iter()
        .map(|r| KeywordEntry {
            story_index: r.story_index,
            agent_id: r.agent_id,
            generation: r.generation,
            keywords: extract_keywords(&r.text, config.analysis.keywords, &resources.stopwords),
        })
        .collect();
    let grouped: Vec<Vec<Vec<Keyword>>> =
        keywords.chunks(width).map(|gen| gen.iter().map(|k| k.keywords.clone()).collect()).collect();
    let chains = word_chains(&grouped);

    let layout = spring_layout(
        &matrix,
        &LayoutOptions {
            iterations: config.analysis.layout_iterations,
            edge_threshold: config.analysis.edge_threshold,
            seed,
        },
    );
    Ok(SeedAnalysis {
        matrix,
        metrics: SeedMetrics { seed, n_generations, stories_per_generation: width, metrics },
        keywords,
        chains,
        layout,
    })
}

/// `summary_metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub n_seeds: usize,
    pub completed_seeds: Vec<usize>,
    pub failed_seeds: Vec<usize>,
    pub metrics: BTreeMap<String, AggregatedSeries>,
}

impl Summary {
    pub fn shortfall(&self) -> usize {
        self.n_seeds - self.completed_seeds.len()
    }
}

fn summarize(config: &SimulationConfig, analyzed: &[(usize, SeedMetrics)]) -> Summary {
    let mut names: Vec<&String> = analyzed.iter().flat_map(|(_, m)| m.metrics.keys()).collect();
    names.sort();
    names.dedup();
    let metrics = names
        .into_iter()
        .map(|name| {
            let series: Vec<MetricSeries> = analyzed.iter().filter_map(|(_, m)| m.series(name)).collect();
            let refs: Vec<&MetricSeries> = series.iter().collect();
            (name.clone(), aggregate(name, &refs))
        })
        .collect();
    let completed: Vec<usize> = analyzed.iter().map(|(s, _)| *s).collect();
    Summary {
        name: config.name.clone(),
        n_seeds: config.n_seeds,
        failed_seeds: (0..config.n_seeds).filter(|s| !completed.contains(s)).collect(),
        completed_seeds: completed,
        metrics,
    }
}

/// Analyzes completed seeds held in memory and writes outputs when `out` is given.
pub fn analyze_seeds(
    config: &SimulationConfig,
    seeds: &[SeedResult],
    out: Option<&ResultsDir>,
) -> Result<Summary, EngineError> {
    let resources = AnalysisResources::load(&config.analysis)?;
    let mut analyzed = Vec::new();
    for seed in seeds {
        let analysis = analyze_seed(config, seed.seed, &seed.records(), &resources)?;
        if let Some(dir) = out {
            dir.write_analysis(seed.seed_index, &analysis)?;
        }
        analyzed.push((seed.seed_index, analysis.metrics));
    }
    let summary = summarize(config, &analyzed);
    if let Some(dir) = out {
        dir.write_json(&dir.path().join("summary_metrics.json"), &summary)?;
    }
    Ok(summary)
}

/// Recomputes every analytic from the stories stored in `dir`.
pub fn reanalyze(dir: &ResultsDir) -> Result<Summary, EngineError> {
    let config = dir.read_config()?;
    config.validate()?;
    let resources = AnalysisResources::load(&config.analysis)?;
    let expected = config.generations() * config.stories_per_generation();
    let mut analyzed = Vec::new();
    let mut found_any = false;
    for seed_index in 0..config.n_seeds {
        let path = dir.seed_dir(seed_index).join("stories.json");
        if !path.exists() {
            continue;
        }
        found_any = true;
        let records = dir.read_stories(seed_index)?;
        if records.len() != expected {
            continue;
        }
        for (i, r) in records.iter().enumerate() {
            if r.story_index != i {
                return Err(EngineError::MissingResults(format!(
                    "{}: story {i} has index {}",
                    path.display(),
                    r.story_index
                )));
            }
        }
        let seed = config.seed_value(seed_index);
        let analysis = analyze_seed(&config, seed, &records, &resources)?;
        dir.write_analysis(seed_index, &analysis)?;
        analyzed.push((seed_index, analysis.metrics));
    }
    if !found_any {
        return Err(EngineError::MissingResults(format!("no seed_*/stories.json under {}", dir.path().display())));
    }
    let summary = summarize(&config, &analyzed);
    dir.write_json(&dir.path().join("summary_metrics.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Running,
    Complete,
    Failed,
}

/// `status.json` of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedState {
    pub status: SeedStatus,
    pub seed: u64,
    pub generations_completed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_at: f64,
    pub updated_at: f64,
}

impl SeedState {
    fn of(r: &SeedResult, status: SeedStatus, error: Option<String>) -> Self {
        SeedState {
            status,
            seed: r.seed,
            generations_completed: r.generations.len(),
            error,
            started_at: r.started_at,
            updated_at: now_secs(),
        }
    }

    pub fn running(r: &SeedResult) -> Self {
        Self::of(r, SeedStatus::Running, None)
    }

    pub fn complete(r: &SeedResult) -> Self {
        Self::of(r, SeedStatus::Complete, None)
    }

    pub fn failed(r: &SeedResult, error: &EngineError) -> Self {
        Self::of(r, SeedStatus::Failed, Some(error.to_string()))
    }
}

/// Handle on an experiment's results folder.
#[derive(Debug, Clone)]
pub struct ResultsDir {
    root: PathBuf,
}

impl ResultsDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResultsDir { root: root.into() }
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn seed_dir(&self, seed_index: usize) -> PathBuf {
        self.root.join(format!("seed_{seed_index}"))
    }

    fn io(path: &Path) -> impl Fn(std::io::Error) -> EngineError + '_ {
        move |source| EngineError::Io { path: path.display().to_string(), source }
    }

    pub fn write_bytes(&self, path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(Self::io(parent))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, bytes).map_err(Self::io(&tmp))?;
        fs::rename(&tmp, path).map_err(Self::io(path))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> Result<(), EngineError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|source| EngineError::Json { path: path.display().to_string(), source })?;
        text.push('\n');
        self.write_bytes(path, text.as_bytes())
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, path: &Path) -> Result<T, EngineError> {
        let text = fs::read_to_string(path).map_err(Self::io(path))?;
        serde_json::from_str(&text).map_err(|source| EngineError::Json { path: path.display().to_string(), source })
    }

    pub fn init(&self, config: &SimulationConfig, topology: &Topology) -> Result<(), EngineError> {
        self.write_json(&self.root.join("config.json"), config)?;
        self.write_json(&self.root.join("topology.json"), topology)
    }

    pub fn read_config(&self) -> Result<SimulationConfig, EngineError> {
        self.read_json(&self.root.join("config.json"))
    }

    pub fn write_stories(&self, seed_index: usize, records: &[StoryRecord]) -> Result<(), EngineError> {
        self.write_json(&self.seed_dir(seed_index).join("stories.json"), records)
    }

    pub fn read_stories(&self, seed_index: usize) -> Result<Vec<StoryRecord>, EngineError> {
        self.read_json(&self.seed_dir(seed_index).join("stories.json"))
    }

    pub fn write_status(&self, seed_index: usize, state: &SeedState) -> Result<(), EngineError> {
        self.write_json(&self.seed_dir(seed_index).join("status.json"), state)
    }

    pub fn read_status(&self, seed_index: usize) -> Result<SeedState, EngineError> {
        self.read_json(&self.seed_dir(seed_index).join("status.json"))
    }

    pub fn read_summary(&self) -> Result<Summary, EngineError> {
        self.read_json(&self.root.join("summary_metrics.json"))
    }

    pub fn read_matrix(&self, seed_index: usize) -> Result<SimilarityMatrix, EngineError> {
        let path = self.seed_dir(seed_index).join("similarity_matrix.csv");
        let text = fs::read_to_string(&path).map_err(Self::io(&path))?;
        Ok(SimilarityMatrix::from_csv(&text)?)
    }

    pub fn write_analysis(&self, seed_index: usize, analysis: &SeedAnalysis) -> Result<(), EngineError> {
        let dir = self.seed_dir(seed_index);
        self.write_bytes(&dir.join("similarity_matrix.csv"), analysis.matrix.to_csv().as_bytes())?;
        self.write_json(&dir.join("metrics.json"), &analysis.metrics)?;
        self.write_json(&dir.join("keywords.json"), &analysis.keywords)?;
        self.write_json(&dir.join("word_chains.json"), &analysis.chains)?;
        let mut layout = export_layout(&analysis.layout);
        layout.push('\n');
        self.write_bytes(&dir.join("layout.json"), layout.as_bytes())
    }
}
