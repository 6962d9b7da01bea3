//! Adapter for full-scale encoders running in a separate process.
//!
//! The child speaks newline-delimited JSON on stdin/stdout, one response
//! per request:
//!
//! ```text
//! {"op":"info"}                    -> {"dim": 1024}
//! {"op":"tokenize","text":"..."}   -> {"tokens": [ ... ]}
//! {"op":"encode","tokens":[ ... ]} -> {"features": [ ... ]}
//! ```
//!
//! Any response may instead be `{"error": "..."}`. The encoder is frozen
//! from this side: only the classifier head is trained.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::Deserialize;
use serde_json::json;

use crate::truncation::{TokenId, TokenSequence};

use super::{BackendError, Encoder, EncoderBackend, Tokenizer};

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    command: Vec<String>,
    n_special: usize,
}

impl ExternalBackend {
    pub fn new(command: Vec<String>, n_special: usize) -> Result<Self, BackendError> {
        if command.is_empty() {
            return Err(BackendError::Config("external backend command is empty".into()));
        }
        Ok(Self { command, n_special })
    }
}

impl EncoderBackend for ExternalBackend {
    fn id(&self) -> String {
        format!("external:{}", self.command.join(" "))
    }

    fn n_special(&self) -> usize {
        self.n_special
    }

    fn build(&self, _seed: u64) -> Result<Box<dyn Encoder>, BackendError> {
        Ok(Box::new(ExternalEncoder::spawn(&self.command)?))
    }
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ExternalEncoder {
    channel: Mutex<Channel>,
    dim: usize,
}

#[derive(Deserialize)]
struct Response {
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    tokens: Option<Vec<TokenId>>,
    #[serde(default)]
    features: Option<Vec<f64>>,
}

impl Channel {
    fn call(&mut self, request: serde_json::Value) -> Result<Response, BackendError> {
        let mut line = serde_json::to_vec(&request).map_err(|e| BackendError::Protocol(e.to_string()))?;
        line.push(b'\n');
        self.stdin.write_all(&line)?;
        self.stdin.flush()?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply)? == 0 {
            return Err(BackendError::Protocol("external encoder closed its output".into()));
        }
        let response: Response =
            serde_json::from_str(&reply).map_err(|e| BackendError::Protocol(format!("bad reply {reply:?}: {e}")))?;
        if let Some(err) = response.error {
            return Err(BackendError::Protocol(err));
        }
        Ok(response)
    }
}

impl ExternalEncoder {
    pub fn spawn(command: &[String]) -> Result<Self, BackendError> {
        let (program, args) = command.split_first().ok_or_else(|| BackendError::Config("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut channel = Channel { child, stdin, stdout };
        let dim = channel
            .call(json!({"op": "info"}))?
            .dim
            .ok_or_else(|| BackendError::Protocol("info reply lacks `dim`".into()))?;
        Ok(Self { channel: Mutex::new(channel), dim })
    }

    fn call(&self, request: serde_json::Value) -> Result<Response, BackendError> {
        self.channel.lock().expect("external channel poisoned").call(request)
    }
}

impl Drop for ExternalEncoder {
    fn drop(&mut self) {
        if let Ok(ch) = self.channel.get_mut() {
            let _ = ch.child.kill();
            let _ = ch.child.wait();
        }
    }
}

impl Tokenizer for ExternalEncoder {
    fn tokenize(&self, text: &str) -> Result<TokenSequence, BackendError> {
        let tokens = self
            .call(json!({"op": "tokenize", "text": text}))?
            .tokens
            .ok_or_else(|| BackendError::Protocol("tokenize reply lacks `tokens`".into()))?;
        Ok(TokenSequence(tokens))
    }
}

impl Encoder for ExternalEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        let features = self
            .call(json!({"op": "encode", "tokens": tokens}))?
            .features
            .ok_or_else(|| BackendError::Protocol("encode reply lacks `features`".into()))?;
        if features.len() != self.dim {
            return Err(BackendError::Protocol(format!("expected {} features, got {}", self.dim, features.len())));
        }
        Ok(features)
    }
}
