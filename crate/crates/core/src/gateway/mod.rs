//! Patch-producing model backends: scripted stand-ins, a replay store keyed
//! by bundle hash, and a JSON-over-HTTP client. Agentic mode runs a tool loop
//! against the bundle's files and turns the writes into a patch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::migrate::{PromptBundle, PromptMode};
use crate::patch::{check_path, diff_files, render_patch, FileSet, Patch};
use crate::ruleset::Ruleset;

mod extract;
mod http;
mod scripted;

pub use extract::extract_patch;
pub use http::Dialect;
pub use scripted::{scripted_after, Script, SCRIPT_IDS};

pub const DEFAULT_TIMEOUT_S: u64 = 120;
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_AUTH_ENV: &str = "QREADY_API_KEY";

const SYSTEM_PROMPT: &str = "You migrate cryptographic code in Android apps. Follow the instructions exactly.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Backend {
    HttpJson {
        endpoint_url: String,
        model_name: String,
        /// Environment variable holding the bearer token.
        auth_env_var: Option<String>,
        #[serde(default)]
        dialect: Dialect,
    },
    Replay { directory: PathBuf },
    Scripted { script_id: String },
}

/// `scripted:<id>`, `replay:<dir>` or `http:<url>`.
impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("backend {s:?} must look like scripted:<id>, replay:<dir> or http:<url>"))?;
        match kind {
            "scripted" => {
                arg.parse::<Script>()?;
                Ok(Backend::Scripted { script_id: arg.to_string() })
            }
            "replay" => Ok(Backend::Replay { directory: PathBuf::from(arg) }),
            "http" => Ok(Backend::HttpJson {
                endpoint_url: arg.to_string(),
                model_name: "default".into(),
                auth_env_var: Some(DEFAULT_AUTH_ENV.into()),
                dialect: Dialect::Minimal,
            }),
            other => Err(format!("unknown backend kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backend: Backend,
    pub timeout_s: u64,
    pub max_retries: u32,
    pub seed: Option<u64>,
    pub temperature: Option<f64>,
    /// Tool calls allowed per agentic task.
    pub tool_budget: usize,
    /// When set, HTTP conversations are saved here in replay format.
    pub record_dir: Option<PathBuf>,
}

impl ModelConfig {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            timeout_s: DEFAULT_TIMEOUT_S,
            max_retries: DEFAULT_MAX_RETRIES,
            seed: None,
            temperature: None,
            tool_budget: 32,
            record_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out after {after_s}s")]
    Timeout { after_s: u64 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for bundle {hash} (looked for {})", path.display())]
    ReplayMiss { hash: String, path: PathBuf },
    #[error("tool budget of {budget} calls exceeded")]
    BudgetExceeded { budget: usize },
    #[error("environment variable {0} is not set")]
    MissingAuth(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl GatewayError {
    /// Misconfiguration as opposed to a failed exchange.
    pub fn is_config(&self) -> bool {
        matches!(self, GatewayError::Config(_) | GatewayError::MissingAuth(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "snake_case")]
pub enum ToolRequest {
    ListFiles,
    ReadFile { path: String },
    WriteFile { path: String, content: String },
}

/// One model reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolRequest>,
}

impl Turn {
    fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), tool_calls: Vec::new() }
    }
}

/// Replay store entry: `<dir>/<content_hash>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub content_hash: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub request_count: u32,
    /// Wall time; zero for offline backends so runs stay reproducible.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResponse {
    pub raw_text: String,
    pub extracted_patch: Option<Patch>,
    pub diagnostics: Vec<String>,
    pub tool_calls: Vec<ToolCall>,
    pub usage: Usage,
}

impl ModelResponse {
    /// The patch, or why there is none.
    pub fn patch(&self) -> Result<&Patch, String> {
        self.extracted_patch
            .as_ref()
            .ok_or_else(|| self.diagnostics.join("; "))
    }
}

struct ToolResult {
    request: ToolRequest,
    output: Result<String, String>,
}

trait Agent {
    fn turn(&mut self, messages: &[Message], last: Option<&ToolResult>) -> Result<Turn, GatewayError>;
}

struct HttpAgent<'a> {
    client: &'a http::HttpClient,
    tools: bool,
    recorded: Vec<Turn>,
}

impl Agent for HttpAgent<'_> {
    fn turn(&mut self, messages: &[Message], _: Option<&ToolResult>) -> Result<Turn, GatewayError> {
        let t = self.client.send(messages, self.tools)?;
        self.recorded.push(t.clone());
        Ok(t)
    }
}

struct ReplayAgent {
    turns: std::vec::IntoIter<Turn>,
}

impl Agent for ReplayAgent {
    fn turn(&mut self, _: &[Message], _: Option<&ToolResult>) -> Result<Turn, GatewayError> {
        self.turns
            .next()
            .ok_or_else(|| GatewayError::Transport("replay record has no further turns".into()))
    }
}

/// Drives the tool protocol the way a careful agent would: list, read
/// everything, write the changed files, finish.
struct ScriptedAgent<'a> {
    script: Script,
    bundle: &'a PromptBundle,
    rules: &'a Ruleset,
    to_read: Vec<String>,
    read: FileSet,
    writes: Option<Vec<(String, String)>>,
    started: bool,
}

impl ScriptedAgent<'_> {
    fn request(req: ToolRequest) -> Turn {
        Turn::text(serde_json::to_string(&req).expect("tool request serializes"))
    }
}

impl Agent for ScriptedAgent<'_> {
    fn turn(&mut self, _: &[Message], last: Option<&ToolResult>) -> Result<Turn, GatewayError> {
        if !self.started {
            self.started = true;
            return Ok(Self::request(ToolRequest::ListFiles));
        }
        match last {
            Some(ToolResult { request: ToolRequest::ListFiles, output: Ok(listing) }) => {
                self.to_read = listing.lines().rev().map(str::to_string).collect();
            }
            Some(ToolResult { request: ToolRequest::ReadFile { path }, output: Ok(content) }) => {
                self.read.insert(path.clone(), content.clone());
            }
            _ => {}
        }
        if let Some(path) = self.to_read.pop() {
            return Ok(Self::request(ToolRequest::ReadFile { path }));
        }
        if self.writes.is_none() {
            match scripted_after(self.script, &self.bundle.task, &self.read, self.rules) {
                Ok(after) => {
                    let mut changed: Vec<(String, String)> = after
                        .into_iter()
                        .filter(|(p, c)| self.read.get(p) != Some(c))
                        .collect();
                    changed.reverse();
                    self.writes = Some(changed);
                }
                Err(reply) => return Ok(Turn::text(reply)),
            }
        }
        match self.writes.as_mut().and_then(Vec::pop) {
            Some((path, content)) => Ok(Self::request(ToolRequest::WriteFile { path, content })),
            None => Ok(Turn::text("{\"done\": true}")),
        }
    }
}

enum Step {
    Tools(Vec<ToolRequest>),
    Done,
    Final,
}

fn classify_turn(turn: &Turn) -> Step {
    if !turn.tool_calls.is_empty() {
        return Step::Tools(turn.tool_calls.clone());
    }
    let trimmed = turn.text.trim();
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(trimmed) {
        if value.get("done").and_then(serde_json::Value::as_bool) == Some(true) {
            return Step::Done;
        }
        if let Ok(req) = serde_json::from_value::<ToolRequest>(value) {
            return Step::Tools(vec![req]);
        }
    }
    Step::Final
}

fn dir_of(path: &str) -> &str {
    path.rsplit_once('/').map_or("", |(d, _)| d)
}

/// Serves one tool request from the bundle's files. Nothing outside the
/// bundle is readable; writes may only target bundle files or new files
/// beside them.
fn serve(workspace: &FileSet, overlay: &mut FileSet, req: &ToolRequest) -> Result<String, String> {
    match req {
        ToolRequest::ListFiles => Ok(overlay.keys().cloned().collect::<Vec<_>>().join("\n")),
        ToolRequest::ReadFile { path } => {
            let path = check_path(path).map_err(|e| e.to_string())?;
            overlay.get(&path).cloned().ok_or_else(|| format!("{path}: not in the task's file set"))
        }
        ToolRequest::WriteFile { path, content } => {
            let path = check_path(path).map_err(|e| e.to_string())?;
            let allowed = workspace.contains_key(&path)
                || workspace.keys().any(|p| dir_of(p) == dir_of(&path));
            if !allowed {
                return Err(format!("path escapes the task context: {path}"));
            }
            overlay.insert(path.clone(), content.clone());
            Ok(format!("wrote {path}"))
        }
    }
}

fn tool_name(req: &ToolRequest) -> (&'static str, Option<String>) {
    match req {
        ToolRequest::ListFiles => ("list_files", None),
        ToolRequest::ReadFile { path } => ("read_file", Some(path.clone())),
        ToolRequest::WriteFile { path, .. } => ("write_file", Some(path.clone())),
    }
}

fn run(
    bundle: &PromptBundle,
    agent: &mut dyn Agent,
    budget: usize,
) -> Result<(ModelResponse, u32), GatewayError> {
    let mut messages = vec![Message::new("system", SYSTEM_PROMPT), Message::new("user", bundle.render())];
    let mut overlay = bundle.workspace.clone();
    let mut texts = Vec::new();
    let mut tool_calls = Vec::new();
    let mut requests = 0u32;
    let mut last: Option<ToolResult> = None;
    let final_text = loop {
        let turn = agent.turn(&messages, last.as_ref())?;
        requests += 1;
        texts.push(turn.text.clone());
        messages.push(Message::new("assistant", turn.text.clone()));
        let step = match bundle.mode {
            PromptMode::Edit => Step::Final,
            PromptMode::Agentic => classify_turn(&turn),
        };
        match step {
            Step::Final => break Some(turn.text),
            Step::Done => break None,
            Step::Tools(reqs) => {
                for req in reqs {
                    if tool_calls.len() >= budget {
                        return Err(GatewayError::BudgetExceeded { budget });
                    }
                    let output = serve(&bundle.workspace, &mut overlay, &req);
                    let (tool, path) = tool_name(&req);
                    tool_calls.push(ToolCall { tool: tool.into(), path, ok: output.is_ok() });
                    let reply = match &output {
                        Ok(out) => serde_json::json!({ "tool": tool, "ok": true, "output": out }),
                        Err(err) => serde_json::json!({ "tool": tool, "ok": false, "error": err }),
                    };
                    messages.push(Message::new("user", reply.to_string()));
                    last = Some(ToolResult { request: req, output });
                }
            }
        }
    };

    let mut diagnostics = Vec::new();
    let extracted = if overlay != bundle.workspace {
        Some(diff_files(&bundle.workspace, &overlay))
    } else {
        let (patch, diag) = extract_patch(final_text.as_deref().unwrap_or(""));
        diagnostics.extend(diag);
        patch
    };
    let response = ModelResponse {
        raw_text: texts.join("\n"),
        extracted_patch: extracted,
        diagnostics,
        tool_calls,
        usage: Usage { request_count: requests, elapsed_s: 0.0 },
    };
    Ok((response, requests))
}

fn scripted_edit_reply(script: Script, bundle: &PromptBundle, rules: &Ruleset) -> Turn {
    let files: FileSet = bundle.files.iter().map(|f| (f.path.clone(), f.content.clone())).collect();
    match scripted_after(script, &bundle.task, &files, rules) {
        Ok(after) if after == files => Turn::text("The files already satisfy the request."),
        Ok(after) => {
            let diff = render_patch(&diff_files(&files, &after));
            Turn::text(format!("Here is the change.\n\n```diff\n{diff}```\n"))
        }
        Err(reply) => Turn::text(reply),
    }
}

pub fn replay_path(directory: &Path, hash: &str) -> PathBuf {
    directory.join(format!("{hash}.json"))
}

/// A configured backend.
pub struct Gateway<'a> {
    config: ModelConfig,
    rules: &'a Ruleset,
    script: Option<Script>,
    client: Option<http::HttpClient>,
}

impl<'a> Gateway<'a> {
    pub fn new(config: ModelConfig, rules: &'a Ruleset) -> Result<Self, GatewayError> {
        let mut script = None;
        let mut client = None;
        match &config.backend {
            Backend::Scripted { script_id } => {
                script = Some(script_id.parse().map_err(GatewayError::Config)?);
            }
            Backend::Replay { directory } => {
                if !directory.is_dir() {
                    return Err(GatewayError::Config(format!(
                        "replay directory {} does not exist",
                        directory.display()
                    )));
                }
            }
            Backend::HttpJson { endpoint_url, model_name, auth_env_var, dialect } => {
                let token = match auth_env_var {
                    Some(var) => {
                        Some(std::env::var(var).map_err(|_| GatewayError::MissingAuth(var.clone()))?)
                    }
                    None => None,
                };
                client = Some(http::HttpClient::new(
                    endpoint_url.clone(),
                    model_name.clone(),
                    token,
                    *dialect,
                    config.timeout_s,
                    config.max_retries,
                    config.seed,
                    config.temperature,
                ));
            }
        }
        Ok(Self { config, rules, script, client })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Runs one bundle to completion.
    pub fn complete(&self, bundle: &PromptBundle) -> Result<ModelResponse, GatewayError> {
        let budget = self.config.tool_budget;
        match &self.config.backend {
            Backend::Scripted { .. } => {
                let script = self.script.expect("validated in new");
                match bundle.mode {
                    PromptMode::Edit => {
                        let turn = scripted_edit_reply(script, bundle, self.rules);
                        let mut agent = ReplayAgent { turns: vec![turn].into_iter() };
                        Ok(run(bundle, &mut agent, budget)?.0)
                    }
                    PromptMode::Agentic => {
                        let mut agent = ScriptedAgent {
                            script,
                            bundle,
                            rules: self.rules,
                            to_read: Vec::new(),
                            read: FileSet::new(),
                            writes: None,
                            started: false,
                        };
                        Ok(run(bundle, &mut agent, budget)?.0)
                    }
                }
            }
            Backend::Replay { directory } => {
                let hash = bundle.content_hash();
                let path = replay_path(directory, &hash);
                let text = match std::fs::read_to_string(&path) {
                    Ok(t) => t,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        return Err(GatewayError::ReplayMiss { hash, path });
                    }
                    Err(source) => return Err(GatewayError::Io { path, source }),
                };
                let record: ReplayRecord = serde_json::from_str(&text)
                    .map_err(|e| GatewayError::Transport(format!("{}: {e}", path.display())))?;
                let mut agent = ReplayAgent { turns: record.turns.into_iter() };
                Ok(run(bundle, &mut agent, budget)?.0)
            }
            Backend::HttpJson { .. } => {
                let client = self.client.as_ref().expect("built in new");
                let mut agent = HttpAgent {
                    client,
                    tools: bundle.mode == PromptMode::Agentic,
                    recorded: Vec::new(),
                };
                let started = Instant::now();
                let result = run(bundle, &mut agent, budget);
                if let Some(dir) = &self.config.record_dir {
                    let record = ReplayRecord { content_hash: bundle.content_hash(), turns: agent.recorded };
                    let path = replay_path(dir, &record.content_hash);
                    let json = serde_json::to_string_pretty(&record).expect("record serializes");
                    std::fs::create_dir_all(dir)
                        .and_then(|_| std::fs::write(&path, json + "\n"))
                        .map_err(|source| GatewayError::Io { path, source })?;
                }
                let (mut response, _) = result?;
                response.usage.elapsed_s = started.elapsed().as_secs_f64();
                Ok(response)
            }
        }
    }
}

/// One-shot convenience over [`Gateway`].
pub fn complete(
    bundle: &PromptBundle,
    config: &ModelConfig,
    rules: &Ruleset,
) -> Result<ModelResponse, GatewayError> {
    Gateway::new(config.clone(), rules)?.complete(bundle)
}
