//! Deterministic token-volume approximation used by all payload accounting.
//!
//! The default counts `ceil(bytes / 4)`, which is stable across platforms and
//! close enough to real tokenizers for relative comparisons. A whitespace
//! mode is available for callers that want word-level counts instead.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenCounter {
    #[default]
    BytesOver4,
    Whitespace,
}

impl TokenCounter {
    pub fn count(&self, text: &str) -> u64 {
        match self {
            TokenCounter::BytesOver4 => (text.len() as u64).div_ceil(4),
            TokenCounter::Whitespace => text.split_whitespace().count() as u64,
        }
    }
}
