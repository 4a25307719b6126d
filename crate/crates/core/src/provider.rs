//! Completion providers: the language model seen as an opaque text-in,
//! text-out service.
//!
//! Two implementations exist. [`MockProvider`] answers from a fixture file
//! keyed by the SHA-256 of the prompt and is fully deterministic.
//! [`HttpProvider`] talks to a chat-completions style endpoint with retry
//! and exponential backoff.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOKEN_ENV: &str = "TFL_PROVIDER_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl CompletionRequest {
    pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 256;
    pub const DEFAULT_TEMPERATURE: f64 = 1.0;

    pub fn new(prompt: impl Into<String>) -> Result<Self> {
        Self::with_params(prompt, Self::DEFAULT_MAX_OUTPUT_TOKENS, Self::DEFAULT_TEMPERATURE)
    }

    pub fn with_params(prompt: impl Into<String>, max_output_tokens: u32, temperature: f64) -> Result<Self> {
        let prompt = prompt.into();
        if prompt.is_empty() {
            return Err(Error::Config("prompt must not be empty".into()));
        }
        if max_output_tokens == 0 {
            return Err(Error::Config("max_output_tokens must be positive".into()));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::Config(format!("temperature must be >= 0, got {temperature}")));
        }
        Ok(Self {
            prompt,
            max_output_tokens,
            temperature,
        })
    }
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

/// Lowercase hex SHA-256 of the prompt bytes; the fixture key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Canned completions keyed by prompt hash. Fixture lines are
/// `prompt-hash<TAB>completion`, with `\n`, `\t`, `\r` and `\\` escaped.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    fixtures: HashMap<String, String>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: &str, completion: impl Into<String>) {
        self.fixtures.insert(prompt_hash(prompt), completion.into());
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    pub fn parse<R: BufRead>(reader: R, source: &Path) -> Result<Self> {
        let mut fixtures = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.is_empty() {
                continue;
            }
            let (hash, completion) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(source, i + 1, "expected prompt-hash<TAB>completion"))?;
            let completion = unescape(completion)
                .ok_or_else(|| Error::format(source, i + 1, "bad escape sequence"))?;
            fixtures.insert(hash.to_ascii_lowercase(), completion);
        }
        Ok(Self { fixtures })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(f), path)
    }

    /// Fixture lines sorted by hash.
    pub fn write(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let mut keys: Vec<_> = self.fixtures.keys().collect();
        keys.sort();
        for k in keys {
            writeln!(w, "{k}\t{}", escape(&self.fixtures[k]))?;
        }
        Ok(())
    }
}

impl CompletionProvider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let hash = prompt_hash(&request.prompt);
        match self.fixtures.get(&hash) {
            Some(c) if c.is_empty() => Err(Error::EmptyCompletion),
            Some(c) => Ok(c.clone()),
            None => Err(Error::MissingFixture(hash)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            max_retries: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(120),
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.initial_backoff
            .checked_mul(factor)
            .unwrap_or(self.max_backoff)
            .min(self.max_backoff)
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Permanent(Error),
    Transient(String),
}

pub struct HttpProvider {
    config: HttpConfig,
    token: String,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("config", &self.config)
            .field("token", &"<redacted>")
            .finish()
    }
}

impl HttpProvider {
    pub fn new(config: HttpConfig, token: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Ok(Self {
            config,
            token: token.into(),
            client,
        })
    }

    /// Reads the bearer token from `TFL_PROVIDER_TOKEN`.
    pub fn from_env(config: HttpConfig) -> Result<Self> {
        let token = std::env::var(TOKEN_ENV)
            .map_err(|_| Error::Config(format!("{TOKEN_ENV} is not set")))?;
        Self::new(config, token)
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, request: &CompletionRequest) -> Attempt {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let resp = match self
            .client
            .post(self.config.endpoint())
            .bearer_auth(&self.token)
            .json(&body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        if status.is_server_error() || status.as_u16() == 408 || status.as_u16() == 429 {
            return Attempt::Transient(format!("HTTP {status}"));
        }
        if !status.is_success() {
            return Attempt::Permanent(Error::PermanentHttp {
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: ChatResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => return Attempt::Permanent(Error::Provider(format!("malformed response: {e}"))),
        };
        match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
            Some(c) if !c.is_empty() => Attempt::Done(c),
            _ => Attempt::Permanent(Error::EmptyCompletion),
        }
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                std::thread::sleep(self.config.backoff(i - 1));
            }
            match self.attempt(request) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Permanent(e) => return Err(e),
                Attempt::Transient(msg) => {
                    tracing::debug!(attempt = i + 1, error = %msg, "transient provider failure");
                    last = msg;
                }
            }
        }
        Err(Error::RetriesExhausted { attempts, last })
    }
}

#[derive(Debug)]
pub enum ProviderKind {
    Mock(MockProvider),
    Http(HttpProvider),
}

impl CompletionProvider for ProviderKind {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        match self {
            ProviderKind::Mock(m) => m.complete(request),
            ProviderKind::Http(h) => h.complete(request),
        }
    }
}

pub fn complete(request: &CompletionRequest, provider: &dyn CompletionProvider) -> Result<String> {
    provider.complete(request)
}

/// Run `requests` with at most `parallelism` in flight. Results come back in
/// request order; failures are reported per item.
pub fn complete_batch(
    requests: &[CompletionRequest],
    provider: &dyn CompletionProvider,
    parallelism: usize,
) -> Result<Vec<Result<String>>> {
    if parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    if parallelism == 1 || requests.len() <= 1 {
        return Ok(requests.iter().map(|r| provider.complete(r)).collect());
    }
    let slots: Vec<Mutex<Option<Result<String>>>> = requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(requests.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(req) = requests.get(i) else { break };
                let out = provider.complete(req);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(out);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .unwrap_or_else(|p| p.into_inner())
                .expect("every slot is filled")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock() -> MockProvider {
        let mut m = MockProvider::new();
        m.insert("p1", "once upon a time");
        m.insert("p2", "two");
        m.insert("p3", "three\nlines\tand \\ slash");
        m
    }

    fn req(p: &str) -> CompletionRequest {
        CompletionRequest::new(p).unwrap()
    }

    #[test]
    fn mock_lookup() {
        assert_eq!(mock().complete(&req("p1")).unwrap(), "once upon a time");
        let e = mock().complete(&req("nope")).unwrap_err();
        assert!(matches!(e, Error::MissingFixture(ref h) if *h == prompt_hash("nope")));
    }

    #[test]
    fn fixture_file_round_trip() {
        let m = mock();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = MockProvider::parse(&buf[..], Path::new("f")).unwrap();
        for p in ["p1", "p2", "p3"] {
            assert_eq!(back.complete(&req(p)).unwrap(), m.complete(&req(p)).unwrap());
        }
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn fixture_parse_errors() {
        assert!(MockProvider::parse(&b"abc\n"[..], Path::new("f")).is_err());
        assert!(MockProvider::parse(&b"abc\tbad \\q\n"[..], Path::new("f")).is_err());
    }

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("").is_err());
        assert!(CompletionRequest::with_params("x", 0, 1.0).is_err());
        assert!(CompletionRequest::with_params("x", 1, -0.1).is_err());
        let r = req("x");
        assert_eq!((r.max_output_tokens, r.temperature), (256, 1.0));
    }

    #[test]
    fn batch_preserves_order_and_itemizes_failures() {
        let m = mock();
        let reqs = vec![req("p1"), req("missing"), req("p2")];
        let out = complete_batch(&reqs, &m, 2).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].as_ref().unwrap(), "once upon a time");
        assert!(matches!(out[1], Err(Error::MissingFixture(_))));
        assert_eq!(out[2].as_ref().unwrap(), "two");
    }

    #[test]
    fn batch_parallelism_does_not_change_output() {
        let mut m = MockProvider::new();
        let reqs: Vec<_> = (0..50)
            .map(|i| {
                let p = format!("prompt {i}");
                if i % 7 != 3 {
                    m.insert(&p, format!("completion {i}"));
                }
                req(&p)
            })
            .collect();
        let render = |v: Vec<Result<String>>| -> Vec<String> {
            v.into_iter()
                .map(|r| match r {
                    Ok(s) => s,
                    Err(e) => format!("ERR {e}"),
                })
                .collect()
        };
        let serial = render(complete_batch(&reqs, &m, 1).unwrap());
        let parallel = render(complete_batch(&reqs, &m, 8).unwrap());
        assert_eq!(serial, parallel);
        assert!(complete_batch(&reqs, &m, 0).is_err());
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let mut c = HttpConfig::new("http://x", "m");
        c.initial_backoff = Duration::from_millis(100);
        c.max_backoff = Duration::from_millis(350);
        assert_eq!(c.backoff(0), Duration::from_millis(100));
        assert_eq!(c.backoff(1), Duration::from_millis(200));
        assert_eq!(c.backoff(2), Duration::from_millis(350));
        assert_eq!(c.backoff(40), Duration::from_millis(350));
        assert_eq!(c.endpoint(), "http://x/chat/completions");
    }
}
