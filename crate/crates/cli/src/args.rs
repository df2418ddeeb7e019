//! Command-line flags and their translation into a [`SimulationConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cultsim::agents::{PromptKind, PromptLibrary};
use cultsim::backend::{BackendConfig, BackendKind, GenerationParams};
use cultsim::results::AnalysisOptions;
use cultsim::{PersonalityAssignment, PromptSet, SimulationConfig, TopologyKind};

#[derive(Debug, Parser)]
#[command(name = "cultsim", version, about = "Simulate the cultural evolution of stories among text-generating agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its results folder.
    Run(Box<RunArgs>),
    /// Recompute every analytic of a results folder from its stored stories.
    Analyze {
        /// Results folder written by `cultsim run` or the service.
        dir: PathBuf,
    },
    /// Serve the HTTP API used by the web console.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment name, recorded in config.json and the summary.
    #[arg(long, default_value = "experiment")]
    pub name: String,
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    /// Defaults to the number of agents for a sequence, 10 otherwise.
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long, default_value = "fully_connected",
          value_parser = ["fully_connected", "circle", "caveman", "sequence"])]
    pub network: String,
    /// Number of cliques of a caveman network.
    #[arg(long)]
    pub cliques: Option<usize>,
    /// Initialization prompt: a registry name or a text file.
    #[arg(long = "init", default_value = "TellStory")]
    pub init: String,
    /// Transformation prompt: a registry name or a text file.
    #[arg(long = "transform", default_value = "CombineTwo")]
    pub transform: String,
    /// One personality for every agent: a registry name or a text file.
    #[arg(long, conflicts_with = "personalities")]
    pub personality: Option<String>,
    /// Per-agent personalities: a file (JSON array or one per line), or
    /// `half:A,B` to give the first half of the agents A and the rest B.
    #[arg(long)]
    pub personalities: Option<String>,
    /// Directory with extra prompts and personalities.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// `http:URL` (completion API), `chat:URL` (chat API) or `mock:RULE`
    /// with RULE one of `echo`, `concat:K`, `templated`.
    #[arg(long)]
    pub backend: String,
    /// Maximum concurrent backend requests.
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 1024)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120.0)]
    pub timeout: f64,
    /// Retries after a failed request, with exponential backoff.
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    /// Base seed; seed folder s uses rng_seed + s.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Bearer token sent to the backend.
    #[arg(long, env = "CULTSIM_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Present neighbor stories in a seeded random order instead of by agent id.
    #[arg(long)]
    pub shuffle_neighbors: bool,
    /// Word vectors (`word v1 v2 ...` per line) enabling the creativity metric.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Sentiment lexicon (`word polarity subjectivity` per line).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Keywords kept per story.
    #[arg(long, default_value_t = cultsim::analytics::DEFAULT_KEYWORDS)]
    pub keywords: usize,
    #[arg(long, default_value_t = cultsim::layout::DEFAULT_ITERATIONS)]
    pub layout_iterations: usize,
    /// Results folder; defaults to `results/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Do not print progress.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Where job results folders are created.
    #[arg(long, default_value = "results")]
    pub results: PathBuf,
    /// Prompt and personality registry directory.
    #[arg(long, default_value = "registry")]
    pub registry: PathBuf,
    /// Jobs executed at the same time.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Backend requests in flight across all jobs.
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
}

fn label(spec: &str) -> String {
    let path = Path::new(spec);
    if path.is_file() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.to_string())
    } else {
        spec.to_string()
    }
}

impl RunArgs {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results").join(&self.name))
    }

    /// Resolves names and files into a complete configuration. Errors are
    /// user mistakes (exit status 2).
    pub fn to_config(&self) -> Result<SimulationConfig, String> {
        let library = match &self.registry {
            Some(dir) => PromptLibrary::with_registry(dir).map_err(|e| e.to_string())?,
            None => PromptLibrary::builtin(),
        };
        let topology = TopologyKind::parse(&self.network, self.cliques).map_err(|e| e.to_string())?;
        if self.cliques.is_some() && !matches!(topology, TopologyKind::Caveman { .. }) {
            return Err("--cliques only applies to --network caveman".into());
        }
        let n_generations = self.generations.unwrap_or(match topology {
            TopologyKind::Sequence => self.agents,
            _ => 10,
        });
        let prompts = PromptSet::new(
            format!("{}+{}", label(&self.init), label(&self.transform)),
            library.resolve_prompt(PromptKind::Initialization, &self.init).map_err(|e| e.to_string())?,
            library.resolve_prompt(PromptKind::Transformation, &self.transform).map_err(|e| e.to_string())?,
        );
        let personalities = match (&self.personality, &self.personalities) {
            (Some(p), _) => PersonalityAssignment::Uniform(library.resolve_personality(p).map_err(|e| e.to_string())?),
            (None, Some(spec)) => match spec.strip_prefix("half:") {
                Some(pair) => {
                    let (a, b) = pair.split_once(',').ok_or("--personalities half:A,B needs two names")?;
                    let a = library.resolve_personality(a.trim()).map_err(|e| e.to_string())?;
                    let b = library.resolve_personality(b.trim()).map_err(|e| e.to_string())?;
                    PersonalityAssignment::halves(&a, &b, self.agents)
                }
                None => PersonalityAssignment::PerAgent(
                    library.load_per_agent(Path::new(spec)).map_err(|e| e.to_string())?,
                ),
            },
            (None, None) => PersonalityAssignment::default(),
        };
        let mut backend = BackendConfig::new(BackendKind::parse(&self.backend).map_err(|e| e.to_string())?);
        backend.parallelism = self.parallelism;
        backend.bearer_token = self.token.clone();
        let config = SimulationConfig {
            name: self.name.clone(),
            n_agents: self.agents,
            n_generations,
            n_seeds: self.seeds,
            topology,
            prompts,
            personalities,
            backend,
            params: GenerationParams {
                max_tokens: self.max_tokens,
                temperature: self.temperature,
                timeout_secs: self.timeout,
                retries: self.retries,
                ..GenerationParams::default()
            },
            rng_seed: self.rng_seed,
            shuffle_neighbors: self.shuffle_neighbors,
            analysis: AnalysisOptions {
                keywords: self.keywords,
                layout_iterations: self.layout_iterations,
                embeddings: self.embeddings.clone(),
                lexicon: self.lexicon.clone(),
                ..AnalysisOptions::default()
            },
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}
