//! Offline provider driven by a script file.
//!
//! ```json
//! {
//!   "id": "my-script",
//!   "rules": [
//!     {"contains": "[Lookup Task]", "response": "Pages: 1, 3"},
//!     {"regex": "code of (\\w+)", "response": "[[2]]"},
//!     {"prompt_sha256": "ab12…", "response": "exact hit"}
//!   ],
//!   "default": "[[1]]"
//! }
//! ```
//!
//! Rules are tried in order; the first match answers. Without a matching
//! rule or a default, the call fails.

use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{LmProvider, LmRequest, ProviderError, ProviderReply};
use crate::retrieval::sha256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptRule {
    Contains { contains: String, response: String },
    Regex { regex: String, response: String },
    PromptHash { prompt_sha256: String, response: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptFile {
    #[serde(default = "default_id")]
    id: String,
    #[serde(default)]
    rules: Vec<ScriptRule>,
    #[serde(default)]
    default: Option<String>,
}

fn default_id() -> String {
    "scripted".into()
}

enum Matcher {
    Contains(String),
    Regex(Regex),
    Hash(String),
}

pub struct ScriptedProvider {
    id: String,
    rules: Vec<(Matcher, String)>,
    default: Option<String>,
}

impl ScriptedProvider {
    pub fn new(id: impl Into<String>, rules: Vec<ScriptRule>, default: Option<String>) -> Result<Self, String> {
        let rules = rules
            .into_iter()
            .map(|rule| match rule {
                ScriptRule::Contains { contains, response } => Ok((Matcher::Contains(contains), response)),
                ScriptRule::Regex { regex, response } => Regex::new(&regex)
                    .map(|r| (Matcher::Regex(r), response))
                    .map_err(|e| format!("bad rule regex `{regex}`: {e}")),
                ScriptRule::PromptHash {
                    prompt_sha256,
                    response,
                } => Ok((Matcher::Hash(prompt_sha256.to_ascii_lowercase()), response)),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            id: id.into(),
            rules,
            default,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(json).map_err(|e| format!("bad script: {e}"))?;
        Self::new(file.id, file.rules, file.default)
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let json = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&json)
    }

    fn respond(&self, prompt: &str) -> Option<&str> {
        let mut hash = None;
        for (matcher, response) in &self.rules {
            let hit = match matcher {
                Matcher::Contains(s) => prompt.contains(s.as_str()),
                Matcher::Regex(r) => r.is_match(prompt),
                Matcher::Hash(h) => *h == *hash.get_or_insert_with(|| hex::encode(sha256(prompt.as_bytes()))),
            };
            if hit {
                return Some(response);
            }
        }
        self.default.as_deref()
    }
}

impl LmProvider for ScriptedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn call(&self, req: &LmRequest) -> Result<ProviderReply, ProviderError> {
        self.respond(&req.prompt)
            .map(|text| ProviderReply::counted(&req.prompt, text.to_string()))
            .ok_or_else(|| ProviderError::Fatal("no script rule matched the prompt".into()))
    }
}
