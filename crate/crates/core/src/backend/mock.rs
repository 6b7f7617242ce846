//! Scripted provider for tests and offline runs.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{whitespace_tokens, BackendError, ChatProvider, GenerationRequest, GenerationResult, RequestTag};
use crate::problem::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockErrorKind {
    RateLimited,
    Transient,
    Auth,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Error { error: MockErrorKind },
}

/// Matches a request when every given field agrees. Replies are used in
/// order for repeated identical requests; the last one then repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<MockReply>,
}

impl MockEntry {
    pub fn reply(stage: Stage, task_id: &str, text: &str) -> Self {
        MockEntry {
            stage: Some(stage),
            task_id: Some(task_id.to_string()),
            model: None,
            sample_index: None,
            run_index: None,
            attempt: None,
            prompt_contains: None,
            response: Some(text.to_string()),
            responses: Vec::new(),
        }
    }

    fn matches(&self, req: &GenerationRequest) -> bool {
        let t = &req.tag;
        self.stage.is_none_or(|s| s == t.stage)
            && self.task_id.as_ref().is_none_or(|id| *id == t.task_id)
            && self.model.as_ref().is_none_or(|m| *m == req.model)
            && self.sample_index.is_none_or(|s| s == t.sample_index)
            && self.run_index.is_none_or(|r| r == t.run_index)
            && self.attempt.is_none_or(|a| a == t.attempt)
            && self.prompt_contains.as_ref().is_none_or(|s| req.prompt.contains(s.as_str()))
    }

    fn replies(&self) -> Vec<MockReply> {
        let mut v: Vec<MockReply> = self.response.iter().map(|t| MockReply::Text(t.clone())).collect();
        v.extend(self.responses.iter().cloned());
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Object { entries: Vec<MockEntry> },
    List(Vec<MockEntry>),
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScriptFile = serde_path_to_error::deserialize(de).map_err(|e| BackendError::Config(format!("mock script: {e}")))?;
        let entries = match file {
            ScriptFile::Object { entries } | ScriptFile::List(entries) => entries,
        };
        for (i, e) in entries.iter().enumerate() {
            if e.response.is_none() && e.responses.is_empty() {
                return Err(BackendError::Config(format!("mock script entry {i} has no response")));
            }
        }
        Ok(MockScript { entries })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }
}

/// Replays a [`MockScript`]. The first matching entry answers.
pub struct MockProvider {
    script: MockScript,
    counters: Mutex<HashMap<(usize, String, RequestTag), usize>>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        MockProvider { script, counters: Mutex::new(HashMap::new()) }
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let t = &req.tag;
        let Some((idx, entry)) = self.script.entries.iter().enumerate().find(|(_, e)| e.matches(req)) else {
            return Err(BackendError::NoScriptEntry(format!(
                "{} stage {} sample {} run {} attempt {} (model {})",
                t.task_id, t.stage, t.sample_index, t.run_index, t.attempt, req.model
            )));
        };
        let replies = entry.replies();
        let n = {
            let mut c = self.counters.lock().unwrap_or_else(|e| e.into_inner());
            let slot = c.entry((idx, req.model.clone(), t.clone())).or_insert(0);
            let n = *slot;
            *slot += 1;
            n
        };
        match &replies[n.min(replies.len() - 1)] {
            MockReply::Text(text) => Ok(GenerationResult {
                text: text.clone(),
                input_tokens: whitespace_tokens(&req.prompt),
                output_tokens: whitespace_tokens(text),
                model: req.model.clone(),
                latency_ms: 0,
                cached: false,
            }),
            MockReply::Error { error } => Err(match error {
                MockErrorKind::RateLimited => BackendError::RateLimited("scripted".into()),
                MockErrorKind::Transient => BackendError::Transient("scripted".into()),
                MockErrorKind::Auth => BackendError::Auth("scripted".into()),
                MockErrorKind::Malformed => BackendError::Malformed { message: "scripted".into(), raw: String::new() },
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(stage: Stage, task: &str, prompt: &str) -> GenerationRequest {
        GenerationRequest {
            model: "m".into(),
            prompt: prompt.into(),
            temperature: 0.6,
            top_p: 0.99,
            top_k: None,
            max_output_tokens: None,
            tag: RequestTag { task_id: task.into(), stage, sample_index: 0, run_index: 0, attempt: 0 },
        }
    }

    #[test]
    fn matches_stage_and_task() {
        let s = MockScript { entries: vec![MockEntry::reply(Stage::Cls1, "counter", "sequential")] };
        let p = MockProvider::new(s);
        let r = p.complete(&req(Stage::Cls1, "counter", "classify this")).unwrap();
        assert_eq!(r.text, "sequential");
        assert!(!r.cached);
        assert_eq!(r.input_tokens, 2);
        assert!(matches!(p.complete(&req(Stage::Cls2, "counter", "")), Err(BackendError::NoScriptEntry(_))));
    }

    #[test]
    fn whitespace_token_rule() {
        let p = MockProvider::new(MockScript::from_json(r#"[{"response": "a b c"}]"#).unwrap());
        assert_eq!(p.complete(&req(Stage::Final, "x", "")).unwrap().output_tokens, 3);
    }

    #[test]
    fn prompt_substring_matcher_and_object_form() {
        let s = MockScript::from_json(r#"{"entries": [{"prompt_contains": "adder", "response": "A"}, {"response": "B"}]}"#).unwrap();
        let p = MockProvider::new(s);
        assert_eq!(p.complete(&req(Stage::Final, "x", "full adder")).unwrap().text, "A");
        assert_eq!(p.complete(&req(Stage::Final, "x", "counter")).unwrap().text, "B");
    }

    #[test]
    fn bad_scripts_are_rejected() {
        assert!(MockScript::from_json(r#"[{"stage": "final"}]"#).is_err());
        assert!(MockScript::from_json(r#"[{"stage": "final", "reponse": "typo"}]"#).is_err());
    }
}
