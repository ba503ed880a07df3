use serde::{Deserialize, Serialize};

/// The two competing versions of a conflict region plus, when known, their
/// common ancestor. Lines never carry their terminator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConflictChunk {
    pub base: Option<Vec<String>>,
    pub v1: Vec<String>,
    pub v2: Vec<String>,
}

impl ConflictChunk {
    pub fn new<S: Into<String>>(v1: impl IntoIterator<Item = S>, v2: impl IntoIterator<Item = S>) -> Self {
        ConflictChunk {
            base: None,
            v1: v1.into_iter().map(Into::into).collect(),
            v2: v2.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_base<S: Into<String>>(mut self, base: impl IntoIterator<Item = S>) -> Self {
        self.base = Some(base.into_iter().map(Into::into).collect());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty() && self.v2.is_empty()
    }

    /// Number of source lines the search can draw from.
    pub fn source_len(&self) -> usize {
        self.v1.len() + self.v2.len()
    }
}
