//! Agent identities and the exact prompt text each agent receives.
//!
//! Template, with `[..]` present only for a non-empty personality:
//!
//! ```text
//! [personality\n\n]initialization
//! [personality\n\n]transformation\n\nStory 1:\n<text>\n\nStory 2:\n<text>...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent {agent} received no neighbor stories")]
    NoNeighborStories { agent: usize },
    #[error("expected {expected} personalities, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("prompt set `{name}` has an empty {field} prompt")]
    EmptyPrompt { name: String, field: &'static str },
    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },
    #[error("invalid registry name `{0}` (use letters, digits, `-` or `_`)")]
    InvalidName(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("parsing {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: usize,
    /// Stored verbatim; empty means no personality.
    pub personality: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub name: String,
    pub initialization: String,
    pub transformation: String,
}

impl PromptSet {
    pub fn new(
        name: impl Into<String>,
        initialization: impl Into<String>,
        transformation: impl Into<String>,
    ) -> Self {
        PromptSet {
            name: name.into(),
            initialization: initialization.into(),
            transformation: transformation.into(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        for (field, text) in [
            ("initialization", &self.initialization),
            ("transformation", &self.transformation),
        ] {
            if text.trim().is_empty() {
                return Err(AgentError::EmptyPrompt { name: self.name.clone(), field });
            }
        }
        Ok(())
    }
}

/// One generated story. `story_index = agent_id + n_agents * generation`,
/// where `n_agents` is the number of stories per generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub agent_id: usize,
    pub generation: usize,
    pub seed: u64,
    pub story_index: usize,
    pub text: String,
}

impl Story {
    pub fn new(agent_id: usize, generation: usize, seed: u64, n_agents: usize, text: String) -> Self {
        Story {
            agent_id,
            generation,
            seed,
            story_index: story_index(agent_id, generation, n_agents),
            text,
        }
    }
}

pub fn story_index(agent_id: usize, generation: usize, n_agents: usize) -> usize {
    agent_id + n_agents * generation
}

/// Inverse of [`story_index`]: `(generation, agent_id)`.
pub fn story_position(story_index: usize, n_agents: usize) -> (usize, usize) {
    (story_index / n_agents, story_index % n_agents)
}

fn with_personality(agent: &AgentSpec, body: &str) -> String {
    if agent.personality.is_empty() {
        body.to_string()
    } else {
        format!("{}\n\n{}", agent.personality, body)
    }
}

pub fn assemble_initialization(agent: &AgentSpec, prompts: &PromptSet) -> String {
    with_personality(agent, &prompts.initialization)
}

/// Builds the transformation prompt. Stories are numbered from 1 in the order given.
pub fn assemble_transformation<S: AsRef<str>>(
    agent: &AgentSpec,
    prompts: &PromptSet,
    neighbor_stories: &[S],
) -> Result<String, AgentError> {
    if neighbor_stories.is_empty() {
        return Err(AgentError::NoNeighborStories { agent: agent.agent_id });
    }
    let mut body = prompts.transformation.clone();
    for (k, story) in neighbor_stories.iter().enumerate() {
        body.push_str(&format!("\n\nStory {}:\n{}", k + 1, story.as_ref()));
    }
    Ok(with_personality(agent, &body))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum PersonalityAssignment {
    Uniform(String),
    PerAgent(Vec<String>),
}

impl Default for PersonalityAssignment {
    fn default() -> Self {
        PersonalityAssignment::Uniform(String::new())
    }
}

impl PersonalityAssignment {
    /// Mixed population: the first half of the agents (by id) get `first`,
    /// the rest get `second`. With an odd count the second group is larger.
    pub fn halves(first: &str, second: &str, n_agents: usize) -> Self {
        let split = n_agents / 2;
        PersonalityAssignment::PerAgent(
            (0..n_agents)
                .map(|i| if i < split { first } else { second }.to_string())
                .collect(),
        )
    }
}

pub fn assign_personalities(
    mode: &PersonalityAssignment,
    n_agents: usize,
) -> Result<Vec<AgentSpec>, AgentError> {
    match mode {
        PersonalityAssignment::Uniform(p) => Ok((0..n_agents)
            .map(|agent_id| AgentSpec { agent_id, personality: p.clone() })
            .collect()),
        PersonalityAssignment::PerAgent(list) => {
            if list.len() != n_agents {
                return Err(AgentError::LengthMismatch { expected: n_agents, actual: list.len() });
            }
            Ok(list
                .iter()
                .enumerate()
                .map(|(agent_id, p)| AgentSpec { agent_id, personality: p.clone() })
                .collect())
        }
    }
}

pub const TELL_ME_A_STORY: &str = "Tell me a story";
pub const KID_STORY_INIT: &str = "Imagine that you are telling a story to your kid. What would that story be? Just output the story, nothing else.";
pub const KID_STORY_RETELL: &str = "Here is one or more stories you were told as a kid. It is now your turn to tell a story at your kid. Tell that story. Write only one story. Do not output anything else.";
pub const COMBINE_TWO: &str = "You will receive stories. Pick the two stories you prefer, and create a story that is combination of these two stories. Just output your story, don\u{2019}t write anything else.";
pub const MINOR_CHANGES: &str = "You will receive a list of one or more stories. Create a new story by making some minor changes to one of those stories. Just output one story, do not output anything else.";
pub const REPEAT: &str = "You will receive stories. Select only one of these stories, and repeat it. Just output the story, don\u{2019}t write anything else.";
pub const MAXIMIZE_DIFFERENCE: &str = "You will receive stories. Create a story that is as different as possible from the stories you received. Just output your story, nothing else.";
pub const CREATIVE: &str = "For what follows, pretend that you are a very creative person.";
pub const NOT_CREATIVE: &str = "For what follows, pretend that you are not a very creative person.";

/// Which registry a prompt lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Initialization,
    Transformation,
}

impl PromptKind {
    fn dir(self) -> &'static str {
        match self {
            PromptKind::Initialization => "initialization",
            PromptKind::Transformation => "transformation",
        }
    }
}

/// Named prompts and personalities. Starts from the built-in set and can be
/// extended from a registry directory laid out as
/// `prompts/initialization/<name>.txt`, `prompts/transformation/<name>.txt`
/// and `personalities/<name>.txt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptLibrary {
    pub initialization: BTreeMap<String, String>,
    pub transformation: BTreeMap<String, String>,
    pub personalities: BTreeMap<String, String>,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        let map = |pairs: &[(&str, &str)]| {
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
        };
        PromptLibrary {
            initialization: map(&[("TellStory", TELL_ME_A_STORY), ("KidStory", KID_STORY_INIT)]),
            transformation: map(&[
                ("CombineTwo", COMBINE_TWO),
                ("MinorChanges", MINOR_CHANGES),
                ("Repeat", REPEAT),
                ("MaximizeDifference", MAXIMIZE_DIFFERENCE),
                ("KidStoryRetell", KID_STORY_RETELL),
            ]),
            personalities: map(&[("NoPersonality", ""), ("Creative", CREATIVE), ("NotCreative", NOT_CREATIVE)]),
        }
    }

    /// Built-ins merged with the contents of `dir`; files override built-ins of the same name.
    pub fn with_registry(dir: &Path) -> Result<Self, AgentError> {
        let mut lib = Self::builtin();
        lib.load_dir(&dir.join("prompts").join("initialization"), PromptKind::Initialization.into())?;
        lib.load_dir(&dir.join("prompts").join("transformation"), PromptKind::Transformation.into())?;
        lib.load_dir(&dir.join("personalities"), Slot::Personality)?;
        Ok(lib)
    }

    fn load_dir(&mut self, dir: &Path, slot: Slot) -> Result<(), AgentError> {
        if !dir.is_dir() {
            return Ok(());
        }
        let io_err = |source| AgentError::Io { path: dir.display().to_string(), source };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            let text = read_text(&path)?;
            self.slot_mut(slot).insert(name.to_string(), text);
        }
        Ok(())
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut BTreeMap<String, String> {
        match slot {
            Slot::Prompt(PromptKind::Initialization) => &mut self.initialization,
            Slot::Prompt(PromptKind::Transformation) => &mut self.transformation,
            Slot::Personality => &mut self.personalities,
        }
    }

    pub fn prompt(&self, kind: PromptKind, name: &str) -> Option<&str> {
        match kind {
            PromptKind::Initialization => self.initialization.get(name),
            PromptKind::Transformation => self.transformation.get(name),
        }
        .map(String::as_str)
    }

    pub fn personality(&self, name: &str) -> Option<&str> {
        self.personalities.get(name).map(String::as_str)
    }

    /// Resolves `spec` as a registry name, falling back to reading it as a file path.
    pub fn resolve_prompt(&self, kind: PromptKind, spec: &str) -> Result<String, AgentError> {
        if let Some(text) = self.prompt(kind, spec) {
            return Ok(text.to_string());
        }
        let path = Path::new(spec);
        if path.is_file() {
            return read_text(path);
        }
        Err(AgentError::UnknownName { what: kind.dir(), name: spec.to_string() })
    }

    pub fn resolve_personality(&self, spec: &str) -> Result<String, AgentError> {
        if let Some(text) = self.personality(spec) {
            return Ok(text.to_string());
        }
        let path = Path::new(spec);
        if path.is_file() {
            return read_text(path);
        }
        Err(AgentError::UnknownName { what: "personality", name: spec.to_string() })
    }

    /// Per-agent personalities from a JSON array of strings or one entry per
    /// line. Each entry that names a registered personality is replaced by its
    /// text; anything else is used literally.
    pub fn load_per_agent(&self, path: &Path) -> Result<Vec<String>, AgentError> {
        let raw = read_text(path)?;
        let entries: Vec<String> = if raw.trim_start().starts_with('[') {
            serde_json::from_str(&raw)
                .map_err(|source| AgentError::Json { path: path.display().to_string(), source })?
        } else {
            raw.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
        };
        Ok(entries
            .into_iter()
            .map(|e| self.personality(&e).map(str::to_string).unwrap_or(e))
            .collect())
    }

    /// Writes a prompt into a registry directory and records it in this library.
    pub fn add_prompt(
        &mut self,
        registry: &Path,
        kind: PromptKind,
        name: &str,
        text: &str,
    ) -> Result<(), AgentError> {
        check_name(name)?;
        let dir = registry.join("prompts").join(kind.dir());
        write_text(&dir, name, text)?;
        self.slot_mut(kind.into()).insert(name.to_string(), text.to_string());
        Ok(())
    }

    pub fn add_personality(&mut self, registry: &Path, name: &str, text: &str) -> Result<(), AgentError> {
        check_name(name)?;
        write_text(&registry.join("personalities"), name, text)?;
        self.personalities.insert(name.to_string(), text.to_string());
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Prompt(PromptKind),
    Personality,
}

impl From<PromptKind> for Slot {
    fn from(kind: PromptKind) -> Self {
        Slot::Prompt(kind)
    }
}

fn check_name(name: &str) -> Result<(), AgentError> {
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(AgentError::InvalidName(name.to_string()))
    }
}

fn read_text(path: &Path) -> Result<String, AgentError> {
    fs::read_to_string(path)
        .map(|s| s.trim_end_matches(['\n', '\r']).to_string())
        .map_err(|source| AgentError::Io { path: path.display().to_string(), source })
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), AgentError> {
    let io_err = |source| AgentError::Io { path: dir.display().to_string(), source };
    fs::create_dir_all(dir).map_err(io_err)?;
    fs::write(dir.join(format!("{name}.txt")), text).map_err(io_err)
}
