//! The generation-synchronous simulation loop.
//!
//! Within a generation, agent calls run concurrently up to the backend's
//! parallelism; a generation starts only after every story of the previous
//! one is in. A sequence network runs one agent per generation, so a chain of
//! `N` agents is recorded as `N` generations of a single story each.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    assemble_initialization, assemble_transformation, assign_personalities, AgentError, AgentSpec,
    PersonalityAssignment, PromptSet, Story,
};
use crate::analytics::AnalyticsError;
use crate::backend::{fnv1a, BackendConfig, BackendError, GenerationContext, GenerationParams, TextGenerator};
use crate::results::{AnalysisOptions, ResultsDir, SeedState, Summary};
use crate::topology::{Schedule, Topology, TopologyKind};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("seed {seed}, generation {generation}, agent {agent}: {source}")]
    Backend { seed: u64, generation: usize, agent: usize, source: BackendError },
    #[error(transparent)]
    Prompt(#[from] AgentError),
    #[error("generation {generation} needs the {expected} stories of the previous generation, got {actual}")]
    MissingPrior { generation: usize, expected: usize, actual: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("analysis: {0}")]
    Analytics(#[from] AnalyticsError),
    #[error("missing results: {0}")]
    MissingResults(String),
}

pub fn now_secs() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub name: String,
    pub n_agents: usize,
    pub n_generations: usize,
    pub n_seeds: usize,
    pub topology: TopologyKind,
    pub prompts: PromptSet,
    #[serde(default)]
    pub personalities: PersonalityAssignment,
    pub backend: BackendConfig,
    #[serde(default)]
    pub params: GenerationParams,
    #[serde(default)]
    pub rng_seed: u64,
    /// Shuffle neighbor stories (seeded) instead of presenting them by ascending agent id.
    #[serde(default)]
    pub shuffle_neighbors: bool,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

impl SimulationConfig {
    /// Checks every invariant and returns the network the run will use.
    pub fn validate(&self) -> Result<Topology, EngineError> {
        let invalid = |m: String| Err(EngineError::InvalidConfig(m));
        if self.name.is_empty() {
            return invalid("name must not be empty".into());
        }
        if self.n_agents == 0 {
            return invalid("need at least one agent".into());
        }
        if self.n_generations == 0 {
            return invalid("need at least one generation".into());
        }
        if self.n_seeds == 0 {
            return invalid("need at least one seed".into());
        }
        if self.topology == TopologyKind::Sequence && self.n_generations != self.n_agents {
            return invalid(format!(
                "a sequence of {} agents runs exactly {} generations (one agent each), got {}",
                self.n_agents, self.n_agents, self.n_generations
            ));
        }
        let topology = Topology::build(self.topology, self.n_agents)
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        self.prompts.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        assign_personalities(&self.personalities, self.n_agents)
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        self.backend.kind.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        if self.backend.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        self.params.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        self.analysis.validate()?;
        Ok(topology)
    }

    /// Stories per generation: 1 for a sequence, `n_agents` otherwise.
    pub fn stories_per_generation(&self) -> usize {
        match self.topology {
            TopologyKind::Sequence => 1,
            _ => self.n_agents,
        }
    }

    pub fn generations(&self) -> usize {
        match self.topology {
            TopologyKind::Sequence => self.n_agents,
            _ => self.n_generations,
        }
    }

    pub fn seed_value(&self, seed_index: usize) -> u64 {
        self.rng_seed.wrapping_add(seed_index as u64)
    }
}

/// A story plus the untrimmed backend output it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub story: Story,
    pub raw_response: String,
}

/// Persisted form of one story (`stories.json` entries).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryRecord {
    pub agent_id: usize,
    pub generation: usize,
    pub story_index: usize,
    pub text: String,
    pub raw_response: String,
}

impl From<&Generated> for StoryRecord {
    fn from(g: &Generated) -> Self {
        StoryRecord {
            agent_id: g.story.agent_id,
            generation: g.story.generation,
            story_index: g.story.story_index,
            text: g.story.text.clone(),
            raw_response: g.raw_response.clone(),
        }
    }
}

struct Job {
    slot: usize,
    agent: usize,
    prompt: String,
}

fn neighbor_order(neighbors: &[usize], shuffle: Option<(u64, usize, usize)>) -> Vec<usize> {
    let mut order = neighbors.to_vec();
    if let Some((seed, generation, agent)) = shuffle {
        let key = fnv1a(&[seed.to_le_bytes(), (generation as u64).to_le_bytes(), (agent as u64).to_le_bytes()].concat());
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(key));
    }
    order
}

/// Produces generation `g`, ordered by agent id (slot) regardless of completion order.
///
/// `prior` must hold the complete previous generation for `g >= 1` and be
/// `None` for `g = 0`. On a sequence network only agent `g` writes, reading
/// the single story of generation `g - 1`.
#[allow(clippy::too_many_arguments)]
pub fn run_generation(
    g: usize,
    topology: &Topology,
    agents: &[AgentSpec],
    prompts: &PromptSet,
    backend: &dyn TextGenerator,
    prior: Option<&[Story]>,
    seed: u64,
    shuffle_neighbors: bool,
) -> Result<Vec<Generated>, EngineError> {
    let chain = topology.schedule() == Schedule::SequentialChain;
    let writers: Vec<(usize, usize)> = if chain {
        if g >= topology.n_agents() {
            return Err(EngineError::InvalidConfig(format!(
                "generation {g} beyond the end of a chain of {} agents",
                topology.n_agents()
            )));
        }
        vec![(0, g)]
    } else {
        (0..topology.n_agents()).map(|a| (a, a)).collect()
    };
    let width = writers.len();
    let mut jobs = Vec::with_capacity(width);
    for &(slot, agent) in &writers {
        let spec = &agents[agent];
        let prompt = match (g, prior) {
            (0, None) => assemble_initialization(spec, prompts),
            (0, Some(_)) | (_, None) => {
                return Err(EngineError::MissingPrior { generation: g, expected: width, actual: 0 })
            }
            (_, Some(prior)) => {
                if prior.len() != width {
                    return Err(EngineError::MissingPrior { generation: g, expected: width, actual: prior.len() });
                }
                let neighbors = topology.neighbors(agent).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
                let order = neighbor_order(neighbors, shuffle_neighbors.then_some((seed, g, agent)));
                let texts: Vec<&str> =
                    order.iter().map(|&n| prior[if chain { 0 } else { n }].text.as_str()).collect();
                assemble_transformation(spec, prompts, &texts)?
            }
        };
        jobs.push(Job { slot, agent, prompt });
    }

    let results: Mutex<Vec<Option<Result<Generated, EngineError>>>> = Mutex::new((0..width).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = backend.parallelism().clamp(1, width);
    let work = || loop {
        if abort.load(Ordering::SeqCst) {
            return;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(job) = jobs.get(i) else { return };
        let ctx = GenerationContext { agent_id: job.agent, generation: g, seed };
        let outcome = backend
            .generate(&job.prompt, &ctx)
            .map(|out| Generated {
                story: Story::new(job.slot, g, seed, width, out.text),
                raw_response: out.raw,
            })
            .map_err(|source| EngineError::Backend { seed, generation: g, agent: job.agent, source });
        if outcome.is_err() {
            abort.store(true, Ordering::SeqCst);
        }
        results.lock().unwrap()[job.slot] = Some(outcome);
    };
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut out = Vec::with_capacity(width);
    let mut first_error = None;
    for slot in results.into_inner().unwrap() {
        match slot {
            Some(Ok(g)) => out.push(g),
            Some(Err(e)) => {
                first_error.get_or_insert(e);
            }
            None => {}
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    SeedStarted { seed_index: usize },
    GenerationDone { seed_index: usize, generation: usize },
    SeedFinished { seed_index: usize, ok: bool },
    Analyzing,
}

/// Story grid of one seed: `generations[g][slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed_index: usize,
    pub seed: u64,
    pub generations: Vec<Vec<Generated>>,
    pub started_at: f64,
    pub finished_at: f64,
}

impl SeedResult {
    /// Stories ordered by story index.
    pub fn stories(&self) -> impl Iterator<Item = &Story> {
        self.generations.iter().flatten().map(|g| &g.story)
    }

    pub fn texts(&self) -> Vec<&str> {
        self.stories().map(|s| s.text.as_str()).collect()
    }

    pub fn records(&self) -> Vec<StoryRecord> {
        self.generations.iter().flatten().map(StoryRecord::from).collect()
    }
}

/// A seed that stopped early; `partial` holds the generations completed before the error.
#[derive(Debug)]
pub struct SeedFailure {
    pub partial: SeedResult,
    pub error: EngineError,
}

/// Runs one seed. `on_generation` sees the grid after each completed generation.
pub fn run_simulation(
    config: &SimulationConfig,
    backend: &dyn TextGenerator,
    seed_index: usize,
    on_generation: &mut dyn FnMut(&SeedResult) -> Result<(), EngineError>,
) -> Result<SeedResult, Box<SeedFailure>> {
    let seed = config.seed_value(seed_index);
    let mut result =
        SeedResult { seed_index, seed, generations: Vec::new(), started_at: now_secs(), finished_at: 0.0 };
    let fail = |result: SeedResult, error| Err(Box::new(SeedFailure { partial: result, error }));
    let (topology, agents) = match config
        .validate()
        .and_then(|t| Ok((t, assign_personalities(&config.personalities, config.n_agents)?)))
    {
        Ok(v) => v,
        Err(e) => return fail(result, e),
    };
    for g in 0..config.generations() {
        let prior: Option<Vec<Story>> =
            result.generations.last().map(|gen| gen.iter().map(|s| s.story.clone()).collect());
        match run_generation(
            g,
            &topology,
            &agents,
            &config.prompts,
            backend,
            prior.as_deref(),
            seed,
            config.shuffle_neighbors,
        ) {
            Ok(stories) => result.generations.push(stories),
            Err(e) => {
                result.finished_at = now_secs();
                return fail(result, e);
            }
        }
        if let Err(e) = on_generation(&result) {
            result.finished_at = now_secs();
            return fail(result, e);
        }
    }
    result.finished_at = now_secs();
    Ok(result)
}

/// All seeds of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub seeds: Vec<SeedResult>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub result: SimulationResult,
    pub summary: Summary,
    /// Seeds that failed, with the error that stopped each one.
    pub failures: Vec<(usize, EngineError)>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every seed, persisting stories per generation when `out` is given,
/// then computes per-seed analytics and the cross-seed summary over the
/// seeds that completed.
pub fn run_experiment(
    config: &SimulationConfig,
    backend: &dyn TextGenerator,
    out: Option<&ResultsDir>,
    progress: &(dyn Fn(Progress) + Sync),
) -> Result<ExperimentOutcome, EngineError> {
    let topology = config.validate()?;
    if let Some(dir) = out {
        dir.init(config, &topology)?;
    }
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for seed_index in 0..config.n_seeds {
        progress(Progress::SeedStarted { seed_index });
        let mut flush = |r: &SeedResult| -> Result<(), EngineError> {
            if let Some(dir) = out {
                dir.write_stories(seed_index, &r.records())?;
                dir.write_status(seed_index, &SeedState::running(r))?;
            }
            progress(Progress::GenerationDone { seed_index, generation: r.generations.len() - 1 });
            Ok(())
        };
        match run_simulation(config, backend, seed_index, &mut flush) {
            Ok(r) => {
                if let Some(dir) = out {
                    dir.write_stories(seed_index, &r.records())?;
                    dir.write_status(seed_index, &SeedState::complete(&r))?;
                }
                progress(Progress::SeedFinished { seed_index, ok: true });
                seeds.push(r);
            }
            Err(failure) => {
                let SeedFailure { partial, error } = *failure;
                if let Some(dir) = out {
                    dir.write_stories(seed_index, &partial.records())?;
                    dir.write_status(seed_index, &SeedState::failed(&partial, &error))?;
                }
                progress(Progress::SeedFinished { seed_index, ok: false });
                failures.push((seed_index, error));
            }
        }
    }
    progress(Progress::Analyzing);
    let summary = crate::results::analyze_seeds(config, &seeds, out)?;
    Ok(ExperimentOutcome {
        result: SimulationResult { config: config.clone(), seeds },
        summary,
        failures,
        out_dir: out.map(|d| d.path().to_path_buf()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Backend, Generation, MockRule};

    fn config(kind: TopologyKind, n_agents: usize, n_generations: usize, rule: MockRule) -> SimulationConfig {
        SimulationConfig {
            name: "t".into(),
            n_agents,
            n_generations,
            n_seeds: 1,
            topology: kind,
            prompts: PromptSet::new("p", "Tell me a story", "T"),
            personalities: PersonalityAssignment::default(),
            backend: BackendConfig::mock(rule),
            params: GenerationParams::default(),
            rng_seed: 0,
            shuffle_neighbors: false,
            analysis: AnalysisOptions::default(),
        }
    }

    fn mock(rule: MockRule) -> Backend {
        Backend::new(&BackendConfig::mock(rule), &GenerationParams::default()).unwrap()
    }

    fn stories(texts: &[&str]) -> Vec<Story> {
        texts.iter().enumerate().map(|(i, t)| Story::new(i, 0, 0, texts.len(), t.to_string())).collect()
    }

    fn agents(n: usize) -> Vec<AgentSpec> {
        assign_personalities(&PersonalityAssignment::default(), n).unwrap()
    }

    #[test]
    fn initial_generation_is_distinct_per_agent() {
        let t = Topology::build(TopologyKind::FullyConnected, 3).unwrap();
        let p = PromptSet::new("p", "Tell me a story", "T");
        let out = run_generation(0, &t, &agents(3), &p, &mock(MockRule::Templated), None, 0, false).unwrap();
        assert_eq!(out.len(), 3);
        let distinct: std::collections::BTreeSet<_> = out.iter().map(|g| g.story.text.clone()).collect();
        assert_eq!(distinct.len(), 3);
        assert!(out.iter().enumerate().all(|(i, g)| g.story.agent_id == i && g.story.story_index == i));
    }

    #[test]
    fn echo_copies_lowest_neighbor() {
        let t = Topology::build(TopologyKind::Circle, 3).unwrap();
        let p = PromptSet::new("p", "I", "T");
        let prior = stories(&["A", "B", "C"]);
        let out = run_generation(1, &t, &agents(3), &p, &mock(MockRule::EchoFirst), Some(&prior), 0, false).unwrap();
        let texts: Vec<&str> = out.iter().map(|g| g.story.text.as_str()).collect();
        assert_eq!(texts, ["B", "A", "A"]);
        assert_eq!(out[2].story.story_index, 5);

        let pair = Topology::build(TopologyKind::FullyConnected, 2).unwrap();
        let out = run_generation(1, &pair, &agents(2), &p, &mock(MockRule::EchoFirst), Some(&stories(&["A", "B"])), 0, false)
            .unwrap();
        let texts: Vec<&str> = out.iter().map(|g| g.story.text.as_str()).collect();
        assert_eq!(texts, ["B", "A"]);
    }

    #[test]
    fn prior_must_be_complete() {
        let t = Topology::build(TopologyKind::Circle, 3).unwrap();
        let p = PromptSet::new("p", "I", "T");
        let err = run_generation(1, &t, &agents(3), &p, &mock(MockRule::EchoFirst), Some(&stories(&["A"])), 0, false);
        assert!(matches!(err, Err(EngineError::MissingPrior { expected: 3, actual: 1, .. })));
        let err = run_generation(1, &t, &agents(3), &p, &mock(MockRule::EchoFirst), None, 0, false);
        assert!(matches!(err, Err(EngineError::MissingPrior { .. })));
    }

    #[test]
    fn shuffled_neighbors_are_seeded() {
        let a = neighbor_order(&[0, 1, 2, 3, 4, 5, 6, 7], Some((1, 2, 3)));
        assert_eq!(a, neighbor_order(&[0, 1, 2, 3, 4, 5, 6, 7], Some((1, 2, 3))));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, [0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(neighbor_order(&[3, 1], None), [3, 1]);
    }

    #[test]
    fn echo_chain_is_a_fixed_point() {
        let cfg = config(TopologyKind::Sequence, 50, 50, MockRule::EchoFirst);
        let r = run_simulation(&cfg, &mock(MockRule::EchoFirst), 0, &mut |_| Ok(())).unwrap();
        assert_eq!(r.generations.len(), 50);
        let first = &r.generations[0][0].story.text;
        assert!(r.stories().all(|s| &s.text == first));
        assert!(r.stories().enumerate().all(|(i, s)| s.story_index == i && s.generation == i));
    }

    #[test]
    fn grid_indexing() {
        let cfg = config(TopologyKind::FullyConnected, 10, 10, MockRule::Templated);
        let r = run_simulation(&cfg, &mock(MockRule::Templated), 0, &mut |_| Ok(())).unwrap();
        let all: Vec<&Story> = r.stories().collect();
        assert_eq!(all.len(), 100);
        assert!(all.iter().enumerate().all(|(i, s)| s.story_index == i));
        assert_eq!((all[3].generation, all[3].agent_id), (0, 3));
        assert_eq!((all[13].generation, all[13].agent_id), (1, 3));
    }

    #[test]
    fn config_validation() {
        assert!(config(TopologyKind::Sequence, 5, 4, MockRule::EchoFirst).validate().is_err());
        assert!(config(TopologyKind::Caveman { n_cliques: 3 }, 10, 2, MockRule::EchoFirst).validate().is_err());
        let mut c = config(TopologyKind::Circle, 4, 2, MockRule::EchoFirst);
        c.personalities = PersonalityAssignment::PerAgent(vec!["a".into()]);
        assert!(c.validate().is_err());
        c.personalities = PersonalityAssignment::default();
        c.n_seeds = 0;
        assert!(c.validate().is_err());
    }

    struct FailAt {
        generation: usize,
        agent: usize,
    }

    impl TextGenerator for FailAt {
        fn generate(&self, prompt: &str, ctx: &GenerationContext) -> Result<Generation, BackendError> {
            if ctx.generation == self.generation && ctx.agent_id == self.agent {
                return Err(BackendError::EmptyGeneration);
            }
            Ok(Generation { text: format!("story {} {}", ctx.agent_id, prompt.len()), raw: String::new() })
        }
    }

    #[test]
    fn failure_names_the_agent_and_keeps_partial_grid() {
        let cfg = config(TopologyKind::Circle, 4, 5, MockRule::EchoFirst);
        let failure = run_simulation(&cfg, &FailAt { generation: 2, agent: 1 }, 0, &mut |_| Ok(())).unwrap_err();
        assert_eq!(failure.partial.generations.len(), 2);
        assert!(matches!(
            failure.error,
            EngineError::Backend { generation: 2, agent: 1, source: BackendError::EmptyGeneration, .. }
        ));
    }

    struct Barrier {
        done: Mutex<Vec<usize>>,
        violations: AtomicUsize,
    }

    impl TextGenerator for Barrier {
        fn generate(&self, _prompt: &str, ctx: &GenerationContext) -> Result<Generation, BackendError> {
            if self.done.lock().unwrap().iter().any(|&g| g > ctx.generation) {
                self.violations.fetch_add(1, Ordering::SeqCst);
            }
            let started = self.done.lock().unwrap().iter().filter(|&&g| g + 1 == ctx.generation).count();
            if ctx.generation > 0 && started < 6 {
                self.violations.fetch_add(1, Ordering::SeqCst);
            }
            std::thread::sleep(std::time::Duration::from_millis((ctx.agent_id % 3) as u64));
            self.done.lock().unwrap().push(ctx.generation);
            Ok(Generation { text: format!("agent {} gen {}", ctx.agent_id, ctx.generation), raw: String::new() })
        }

        fn parallelism(&self) -> usize {
            4
        }
    }

    #[test]
    fn generations_are_separated_by_a_barrier() {
        let cfg = config(TopologyKind::FullyConnected, 6, 4, MockRule::EchoFirst);
        let backend = Barrier { done: Mutex::new(Vec::new()), violations: AtomicUsize::new(0) };
        let r = run_simulation(&cfg, &backend, 0, &mut |_| Ok(())).unwrap();
        assert_eq!(backend.violations.load(Ordering::SeqCst), 0);
        for (g, gen) in r.generations.iter().enumerate() {
            for (a, s) in gen.iter().enumerate() {
                assert_eq!(s.story.text, format!("agent {a} gen {g}"));
            }
        }
    }
}
