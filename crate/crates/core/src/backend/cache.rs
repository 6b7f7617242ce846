use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationRequest, GenerationResult};

#[derive(Serialize)]
struct KeyFields<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    top_k: Option<u32>,
    max_output_tokens: Option<u32>,
    sample_index: u32,
    run_index: u32,
    attempt: u32,
}

/// Hex SHA-256 over the fields that make two requests interchangeable.
pub fn cache_key(req: &GenerationRequest) -> String {
    let fields = KeyFields {
        model: &req.model,
        prompt: &req.prompt,
        temperature: req.temperature,
        top_p: req.top_p,
        top_k: req.top_k,
        max_output_tokens: req.max_output_tokens,
        sample_index: req.tag.sample_index,
        run_index: req.tag.run_index,
        attempt: req.tag.attempt,
    };
    let bytes = serde_json::to_vec(&fields).expect("key serialization cannot fail");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Serialize, Deserialize)]
struct Entry {
    model: String,
    prompt: String,
    text: String,
    input_tokens: u64,
    output_tokens: u64,
    latency_ms: u64,
}

/// Content-addressed response store, in memory and optionally on disk
/// (`<dir>/<first two hex digits>/<key>.json`).
pub struct ResponseCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, GenerationResult>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache { dir: None, mem: Mutex::new(HashMap::new()) }
    }

    pub fn on_disk(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache { dir: Some(dir.to_path_buf()), mem: Mutex::new(HashMap::new()) })
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<GenerationResult> {
        if let Some(r) = self.mem.lock().unwrap_or_else(|e| e.into_inner()).get(key) {
            return Some(r.clone());
        }
        let text = std::fs::read_to_string(self.path(key)?).ok()?;
        let e: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(err) => {
                log::warn!("ignoring unreadable cache entry {key}: {err}");
                return None;
            }
        };
        let r = GenerationResult {
            text: e.text,
            input_tokens: e.input_tokens,
            output_tokens: e.output_tokens,
            model: e.model,
            latency_ms: e.latency_ms,
            cached: false,
        };
        self.mem.lock().unwrap_or_else(|e| e.into_inner()).insert(key.to_string(), r.clone());
        Some(r)
    }

    pub fn put(&self, key: &str, req: &GenerationRequest, r: &GenerationResult) {
        self.mem.lock().unwrap_or_else(|e| e.into_inner()).insert(key.to_string(), r.clone());
        let Some(path) = self.path(key) else { return };
        let entry = Entry {
            model: r.model.clone(),
            prompt: req.prompt.clone(),
            text: r.text.clone(),
            input_tokens: r.input_tokens,
            output_tokens: r.output_tokens,
            latency_ms: r.latency_ms,
        };
        if let Err(e) = write_atomic(&path, &serde_json::to_vec_pretty(&entry).expect("entry serializes")) {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().expect("cache paths have a parent");
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::RequestTag;
    use crate::problem::Stage;

    fn req(sample: u32) -> GenerationRequest {
        GenerationRequest {
            model: "m".into(),
            prompt: "p".into(),
            temperature: 0.6,
            top_p: 0.99,
            top_k: None,
            max_output_tokens: None,
            tag: RequestTag { task_id: "t".into(), stage: Stage::Final, sample_index: sample, run_index: 0, attempt: 0 },
        }
    }

    #[test]
    fn samples_are_never_collapsed() {
        assert_ne!(cache_key(&req(0)), cache_key(&req(1)));
        assert_eq!(cache_key(&req(0)), cache_key(&req(0)));
        assert_eq!(cache_key(&req(0)).len(), 64);
    }

    #[test]
    fn survives_a_new_process() {
        let dir = tempfile::tempdir().unwrap();
        let r = GenerationResult { text: "hi".into(), input_tokens: 1, output_tokens: 1, model: "m".into(), latency_ms: 3, cached: false };
        let k = cache_key(&req(0));
        ResponseCache::on_disk(dir.path()).unwrap().put(&k, &req(0), &r);
        let again = ResponseCache::on_disk(dir.path()).unwrap().get(&k).unwrap();
        assert_eq!(again, r);
    }
}
