//! Text generation backends: remote HTTP endpoints and deterministic mocks.
//!
//! Wire formats (request keys are emitted in exactly this order):
//!
//! * completion: `POST {"prompt", "max_tokens", "temperature"}` answered by
//!   `{"choices": [{"text": ...}]}`
//! * chat: `POST {"messages": [{"role": "user", "content": ...}], "max_tokens", "temperature"}`
//!   answered by `{"choices": [{"message": {"content": ...}}]}`
//!
//! The personality is part of the single prompt string, never a system message.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable after {attempts} attempt(s): {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("backend returned an empty generation")]
    EmptyGeneration,
    #[error("backend answered HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

fn default_max_tokens() -> u32 {
    1024
}
fn default_temperature() -> f64 {
    1.0
}
fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    2
}
fn default_backoff() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First retry delay in seconds; doubles on each further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_secs: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: default_max_tokens(),
            temperature: default_temperature(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_secs: default_backoff(),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_tokens < 1 {
            return Err(BackendError::InvalidConfig("max_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidConfig("temperature must be a non-negative number".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BackendError::InvalidConfig("timeout must be positive".into()));
        }
        if !(self.backoff_secs >= 0.0 && self.backoff_secs.is_finite()) {
            return Err(BackendError::InvalidConfig("backoff must be non-negative".into()));
        }
        Ok(())
    }
}

/// Deterministic stand-ins for a language model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MockRule {
    /// Returns the first received story verbatim.
    EchoFirst,
    /// Concatenates received stories and keeps the first `k` words.
    ConcatHead(usize),
    /// Recombines sentences of received stories, seeded by agent, generation,
    /// run seed and a hash of the prompt.
    Templated,
}

impl fmt::Display for MockRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockRule::EchoFirst => f.write_str("echo"),
            MockRule::ConcatHead(k) => write!(f, "concat:{k}"),
            MockRule::Templated => f.write_str("templated"),
        }
    }
}

impl FromStr for MockRule {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BackendError::InvalidConfig(format!("unknown mock rule `{s}` (echo, concat:K, templated)"));
        match s.split_once(':') {
            None => match s {
                "echo" | "echo_first" => Ok(MockRule::EchoFirst),
                "templated" => Ok(MockRule::Templated),
                _ => Err(bad()),
            },
            Some(("concat" | "concat_head", k)) => {
                let k: usize = k.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(BackendError::InvalidConfig("concat mock needs k >= 1".into()));
                }
                Ok(MockRule::ConcatHead(k))
            }
            Some(_) => Err(bad()),
        }
    }
}

impl Serialize for MockRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MockRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Completion { url: String },
    Chat { url: String },
    Mock { rule: MockRule },
}

impl BackendKind {
    /// Parses `http:URL`, `chat:URL` or `mock:RULE`.
    pub fn parse(spec: &str) -> Result<Self, BackendError> {
        let kind = match spec.split_once(':') {
            Some(("http" | "completion", rest)) => BackendKind::Completion { url: rest.to_string() },
            Some(("chat", rest)) => BackendKind::Chat { url: rest.to_string() },
            Some(("mock", rest)) => BackendKind::Mock { rule: rest.parse()? },
            _ => {
                return Err(BackendError::InvalidConfig(format!(
                    "backend `{spec}` must look like http:URL, chat:URL or mock:RULE"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self {
            BackendKind::Completion { url } | BackendKind::Chat { url } => {
                let parsed = url::Url::parse(url)
                    .map_err(|e| BackendError::InvalidConfig(format!("bad url `{url}`: {e}")))?;
                if !matches!(parsed.scheme(), "http" | "https") {
                    return Err(BackendError::InvalidConfig(format!("url `{url}` must be http(s)")));
                }
                Ok(())
            }
            BackendKind::Mock { .. } => Ok(()),
        }
    }

    pub fn is_mock(&self) -> bool {
        matches!(self, BackendKind::Mock { .. })
    }
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Accepted on input but never written out, so results folders hold no secrets.
    #[serde(default, skip_serializing)]
    pub bearer_token: Option<String>,
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        BackendConfig { kind, parallelism: default_parallelism(), bearer_token: None }
    }

    pub fn mock(rule: MockRule) -> Self {
        Self::new(BackendKind::Mock { rule })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationContext {
    pub agent_id: usize,
    pub generation: usize,
    pub seed: u64,
}

/// A trimmed story together with the untrimmed text the backend produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub raw: String,
}

impl Generation {
    fn from_raw(raw: String) -> Result<Self, BackendError> {
        let text = raw.trim().to_string();
        if text.is_empty() {
            return Err(BackendError::EmptyGeneration);
        }
        Ok(Generation { text, raw })
    }
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, prompt: &str, ctx: &GenerationContext) -> Result<Generation, BackendError>;

    /// Maximum number of concurrent calls the engine should issue.
    fn parallelism(&self) -> usize {
        1
    }
}

/// Counting semaphore capping in-flight requests; may be shared between backends.
#[derive(Debug)]
pub struct ConcurrencyLimit {
    available: Mutex<usize>,
    freed: Condvar,
    capacity: usize,
}

impl ConcurrencyLimit {
    pub fn new(capacity: usize) -> Arc<Self> {
        let capacity = capacity.max(1);
        Arc::new(ConcurrencyLimit { available: Mutex::new(capacity), freed: Condvar::new(), capacity })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.freed.wait(available).unwrap();
        }
        *available -= 1;
        Permit { limit: self }
    }
}

pub struct Permit<'a> {
    limit: &'a ConcurrencyLimit,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limit.available.lock().unwrap() += 1;
        self.limit.freed.notify_one();
    }
}

/// Backend built from a [`BackendConfig`].
pub struct Backend {
    config: BackendConfig,
    params: GenerationParams,
    limit: Arc<ConcurrencyLimit>,
    agent: Option<ureq::Agent>,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend")
            .field("kind", &self.config.kind)
            .field("parallelism", &self.config.parallelism)
            .finish()
    }
}

impl Backend {
    pub fn new(config: &BackendConfig, params: &GenerationParams) -> Result<Self, BackendError> {
        let limit = ConcurrencyLimit::new(config.parallelism);
        Self::with_limit(config, params, limit)
    }

    /// Uses an externally owned limit, e.g. one shared by every job of a server.
    pub fn with_limit(
        config: &BackendConfig,
        params: &GenerationParams,
        limit: Arc<ConcurrencyLimit>,
    ) -> Result<Self, BackendError> {
        config.kind.validate()?;
        params.validate()?;
        if config.parallelism == 0 {
            return Err(BackendError::InvalidConfig("parallelism must be at least 1".into()));
        }
        let agent = match config.kind {
            BackendKind::Mock { .. } => None,
            _ => Some(
                ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs_f64(params.timeout_secs)))
                    .http_status_as_error(false)
                    .build()
                    .into(),
            ),
        };
        Ok(Backend { config: config.clone(), params: params.clone(), limit, agent })
    }

    pub fn kind(&self) -> &BackendKind {
        &self.config.kind
    }

    fn post_with_retries(&self, url: &str, body: &str) -> Result<String, BackendError> {
        let agent = self.agent.as_ref().expect("http backend has an agent");
        let attempts = self.params.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.params.backoff_secs * 2f64.powi(attempt as i32 - 1);
                std::thread::sleep(Duration::from_secs_f64(delay));
            }
            let mut request = agent.post(url).header("Content-Type", "application/json");
            if let Some(token) = &self.config.bearer_token {
                request = request.header("Authorization", format!("Bearer {token}"));
            }
            let mut response = match request.send(body) {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = response.status().as_u16();
            let text = match response.body_mut().read_to_string() {
                Ok(t) => t,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            if status == 429 || status >= 500 {
                last = format!("HTTP {status}: {text}");
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(BackendError::HttpStatus { status, body: text });
            }
            return Ok(text);
        }
        Err(BackendError::Unreachable { attempts, message: last })
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    messages: [ChatMessage<'a>; 1],
    max_tokens: u32,
    temperature: f64,
}

pub fn completion_request_body(prompt: &str, params: &GenerationParams) -> String {
    serde_json::to_string(&CompletionRequest {
        prompt,
        max_tokens: params.max_tokens,
        temperature: params.temperature,
    })
    .expect("request serializes")
}

pub fn chat_request_body(prompt: &str, params: &GenerationParams) -> String {
    serde_json::to_string(&ChatRequest {
        messages: [ChatMessage { role: "user", content: prompt }],
        max_tokens: params.max_tokens,
        temperature: params.temperature,
    })
    .expect("request serializes")
}

fn first_choice(body: &str) -> Result<serde_json::Value, BackendError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(format!("not JSON: {e}")))?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .cloned()
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0]".into()))
}

pub fn parse_completion_response(body: &str) -> Result<String, BackendError> {
    first_choice(body)?
        .get("text")
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].text".into()))
}

pub fn parse_chat_response(body: &str) -> Result<String, BackendError> {
    first_choice(body)?
        .pointer("/message/content")
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))
}

impl TextGenerator for Backend {
    fn generate(&self, prompt: &str, ctx: &GenerationContext) -> Result<Generation, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let raw = match &self.config.kind {
            BackendKind::Mock { rule } => mock_generate(*rule, prompt, ctx),
            BackendKind::Completion { url } => {
                let _permit = self.limit.acquire();
                let body = self.post_with_retries(url, &completion_request_body(prompt, &self.params))?;
                parse_completion_response(&body)?
            }
            BackendKind::Chat { url } => {
                let _permit = self.limit.acquire();
                let body = self.post_with_retries(url, &chat_request_body(prompt, &self.params))?;
                parse_chat_response(&body)?
            }
        };
        Generation::from_raw(raw)
    }

    fn parallelism(&self) -> usize {
        match self.config.kind {
            BackendKind::Mock { .. } => self.config.parallelism.max(1),
            _ => self.config.parallelism.min(self.limit.capacity()).max(1),
        }
    }
}

/// Splits the numbered story blocks back out of an assembled transformation prompt.
pub fn extract_stories(prompt: &str) -> Vec<&str> {
    let Some(mut start) = find_header(prompt, 1) else { return Vec::new() };
    let mut stories = Vec::new();
    let mut k = 1;
    loop {
        start += format!("Story {k}:\n").len();
        let rest = &prompt[start..];
        let next = format!("\n\nStory {}:\n", k + 1);
        match rest.find(&next) {
            Some(end) => {
                stories.push(&rest[..end]);
                start += end + 2;
                k += 1;
            }
            None => {
                stories.push(rest);
                return stories;
            }
        }
    }
}

fn find_header(prompt: &str, k: usize) -> Option<usize> {
    let header = format!("Story {k}:\n");
    if prompt.starts_with(&header) {
        return Some(0);
    }
    prompt.find(&format!("\n\n{header}")).map(|i| i + 2)
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn mock_rng(prompt: &str, ctx: &GenerationContext) -> ChaCha8Rng {
    let mut key = fnv1a(prompt.as_bytes());
    for part in [ctx.agent_id as u64, ctx.generation as u64, ctx.seed] {
        key = fnv1a(&[key.to_le_bytes(), part.to_le_bytes()].concat());
    }
    ChaCha8Rng::seed_from_u64(key)
}

pub fn mock_generate(rule: MockRule, prompt: &str, ctx: &GenerationContext) -> String {
    let stories = extract_stories(prompt);
    if stories.is_empty() {
        return fresh_story(&mut mock_rng(prompt, ctx));
    }
    match rule {
        MockRule::EchoFirst => stories[0].to_string(),
        MockRule::ConcatHead(k) => stories
            .iter()
            .flat_map(|s| s.split_whitespace())
            .take(k)
            .collect::<Vec<_>>()
            .join(" "),
        MockRule::Templated => recombine(&stories, &mut mock_rng(prompt, ctx)),
    }
}

const NAMES: &[&str] = &["Lila", "Tom", "Ayla", "Marco", "Nina", "Oskar", "Priya", "Felix", "Rosa", "Hugo"];
const CREATURES: &[&str] = &["fox", "dragon", "owl", "rabbit", "wizard", "robot", "whale", "bear", "cat", "knight"];
const PLACES: &[&str] = &[
    "an enchanted forest", "a quiet village", "the edge of the sea", "a floating castle",
    "a snowy mountain", "a busy city", "a hidden valley", "the desert",
];
const QUESTS: &[&str] = &[
    "searched for a lost star", "learned to share", "found a magic key", "helped a lonely giant",
    "built a bridge of light", "discovered an old map", "made an unlikely friend", "saved the harvest",
];
const MORALS: &[&str] = &[
    "kindness is the strongest magic", "courage grows when shared", "home is where friends are",
    "curiosity opens every door", "patience brings rewards", "every voice matters",
];

fn fresh_story(rng: &mut ChaCha8Rng) -> String {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| *xs.choose(rng).expect("non-empty");
    let name = pick(rng, NAMES);
    let creature = pick(rng, CREATURES);
    format!(
        "Once upon a time, in {}, there lived a {} named {}. One day {} {}. Along the way the {} met a {} who {}. In the end {} learned that {}.",
        pick(rng, PLACES),
        creature,
        name,
        name,
        pick(rng, QUESTS),
        creature,
        pick(rng, CREATURES),
        pick(rng, QUESTS),
        name,
        pick(rng, MORALS),
    )
}

fn sentences(story: &str) -> Vec<String> {
    story
        .split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Takes the opening of one received story and the ending of another, with
/// an occasional fresh sentence.
fn recombine(stories: &[&str], rng: &mut ChaCha8Rng) -> String {
    let a = stories[rng.random_range(0..stories.len())];
    let b = stories[rng.random_range(0..stories.len())];
    let (sa, sb) = (sentences(a), sentences(b));
    let head = sa.len().div_ceil(2);
    let tail_start = sb.len() / 2;
    let mut out: Vec<String> = sa[..head].to_vec();
    out.extend(sb[tail_start..].iter().cloned());
    if rng.random_bool(0.2) {
        let creature = *CREATURES.choose(rng).expect("non-empty");
        let quest = *QUESTS.choose(rng).expect("non-empty");
        out.push(format!("Later a {creature} {quest}."));
    }
    out.dedup();
    if out.is_empty() {
        a.to_string()
    } else {
        out.join(" ")
    }
}
