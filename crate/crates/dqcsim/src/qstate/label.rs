use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of one qubit register.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitLabel(pub String);

impl QubitLabel {
    pub fn new(s: impl Into<String>) -> QubitLabel {
        QubitLabel(s.into())
    }

    /// Label for the `index`-th register held by `party`.
    pub fn party(party: &str, index: usize) -> QubitLabel {
        QubitLabel(format!("{party}.{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QubitLabel {
    fn from(s: &str) -> Self {
        QubitLabel(s.to_string())
    }
}

impl From<String> for QubitLabel {
    fn from(s: String) -> Self {
        QubitLabel(s)
    }
}

impl From<&QubitLabel> for QubitLabel {
    fn from(l: &QubitLabel) -> Self {
        l.clone()
    }
}

/// Shorthand for building label lists in tests and examples.
pub fn labels<I, S>(items: I) -> Vec<QubitLabel>
where
    I: IntoIterator<Item = S>,
    S: Into<QubitLabel>,
{
    items.into_iter().map(Into::into).collect()
}
