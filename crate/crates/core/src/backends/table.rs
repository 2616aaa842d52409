//! Token-to-token lookup model learned by counting aligned token pairs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lang::Direction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableModel {
    pub direction: Direction,
    /// source token -> target token -> co-occurrence count
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl TableModel {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            counts: BTreeMap::new(),
        }
    }

    /// Counts position-aligned tokens of a pair. Pairs with different token
    /// counts carry no alignment and are skipped; returns whether it counted.
    pub fn observe(&mut self, source: &str, target: &str) -> bool {
        let src: Vec<&str> = source.split_whitespace().collect();
        let tgt: Vec<&str> = target.split_whitespace().collect();
        if src.len() != tgt.len() || src.is_empty() {
            return false;
        }
        for (s, t) in src.into_iter().zip(tgt) {
            *self
                .counts
                .entry(s.to_string())
                .or_default()
                .entry(t.to_string())
                .or_default() += 1;
        }
        true
    }

    /// Most frequent target for `token`; ties go to the smallest string.
    pub fn best(&self, token: &str) -> Option<&str> {
        let row = self.counts.get(token)?;
        let max = *row.values().max()?;
        row.iter().find(|(_, &n)| n == max).map(|(t, _)| t.as_str())
    }

    /// Token-by-token lookup; unknown tokens are copied through.
    pub fn translate(&self, text: &str) -> String {
        text.split_whitespace()
            .map(|tok| self.best(tok).unwrap_or(tok))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn mapping(&self) -> BTreeMap<&str, &str> {
        self.counts
            .keys()
            .filter_map(|s| self.best(s).map(|t| (s.as_str(), t)))
            .collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_vec(self).expect("table serializes"))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_majority_and_copies_unknown() {
        let mut t = TableModel::new(Direction::YUE_EN);
        assert!(t.observe("甲 乙", "a b"));
        assert!(t.observe("甲 丙", "a c"));
        assert!(t.observe("甲", "x"));
        assert!(!t.observe("甲 乙", "a"));
        assert_eq!(t.best("甲"), Some("a"));
        assert_eq!(t.translate("甲 丙 丁"), "a c 丁");
    }

    #[test]
    fn tie_prefers_smallest_target() {
        let mut t = TableModel::new(Direction::YUE_EN);
        t.observe("甲", "z");
        t.observe("甲", "b");
        assert_eq!(t.best("甲"), Some("b"));
    }
}
