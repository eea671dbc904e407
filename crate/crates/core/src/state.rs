//! Node sequences used as keys for multi-order states and centrality scores.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Separator between the member nodes of a composite state.
pub const STATE_SEPARATOR: char = '|';
/// Separator between consecutive nodes on a path line.
pub const PATH_SEPARATOR: char = ',';

/// An ordered tuple of one or more node identifiers.
///
/// Ordering is lexicographic over the member tuple; this is the canonical
/// order used for every sorted output.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(Vec<String>);

impl State {
    pub fn new(nodes: Vec<String>) -> Self {
        debug_assert!(!nodes.is_empty());
        State(nodes)
    }

    pub fn single(node: &str) -> Self {
        State(vec![node.to_owned()])
    }

    /// Parses `a|b|c`. Each member must be non-empty.
    pub fn parse(text: &str) -> Option<Self> {
        let nodes: Vec<String> = text.split(STATE_SEPARATOR).map(str::to_owned).collect();
        if nodes.iter().any(|n| n.is_empty()) {
            return None;
        }
        Some(State(nodes))
    }

    pub fn nodes(&self) -> &[String] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn last(&self) -> &str {
        self.0.last().expect("state is non-empty")
    }

    /// The last `min(h, order)` nodes.
    pub fn suffix(&self, h: usize) -> State {
        let start = self.0.len().saturating_sub(h);
        State(self.0[start..].to_vec())
    }

    pub fn has_suffix(&self, other: &State) -> bool {
        other.0.len() <= self.0.len() && self.0.ends_with(&other.0)
    }

    /// Appends `node`, dropping the oldest member when the result would
    /// exceed `max_order`.
    pub fn advance(&self, node: &str, max_order: usize) -> State {
        let mut nodes = self.0.clone();
        nodes.push(node.to_owned());
        if nodes.len() > max_order {
            nodes.remove(0);
        }
        State(nodes)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "{STATE_SEPARATOR}")?;
            }
            f.write_str(node)?;
        }
        Ok(())
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        State::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid state `{text}`")))
    }
}

/// Returns true when `node` is usable as a node identifier.
pub fn is_valid_node(node: &str) -> bool {
    !node.is_empty() && !node.contains(PATH_SEPARATOR) && !node.contains(STATE_SEPARATOR)
}
