use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub struct CompileError {
    pub file: Option<String>,
    pub line: u32,
    pub message: String,
}

impl CompileError {
    pub fn new(line: u32, message: impl Into<String>) -> Self {
        CompileError { file: None, line, message: message.into() }
    }

    pub fn in_file(mut self, file: &str) -> Self {
        if self.file.is_none() {
            self.file = Some(file.to_string());
        }
        self
    }
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(file) => write!(f, "{file}:{}: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RuntimeError {
    #[error("step budget of {0} exhausted (zero-delay loop?)")]
    StepBudget(u64),
    #[error("wall-clock deadline exceeded at simulation time {0}")]
    Deadline(u64),
}
