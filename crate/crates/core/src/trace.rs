//! Real-system transitions and the growing dataset built from them.

use serde::{Deserialize, Serialize};

use crate::env::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Action,
    pub r: f64,
    pub c: u8,
    pub s_next: Vec<f64>,
}

/// All transitions collected so far, in order, with the index at which each
/// epoch starts. Epoch 0 is the initial random episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    transitions: Vec<Transition>,
    epoch_starts: Vec<usize>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin_epoch(&mut self) {
        self.epoch_starts.push(self.transitions.len());
    }

    pub fn push(&mut self, t: Transition) {
        if self.epoch_starts.is_empty() {
            self.epoch_starts.push(0);
        }
        self.transitions.push(t);
    }

    /// Appends a whole epoch.
    pub fn extend_epoch(&mut self, epoch: impl IntoIterator<Item = Transition>) {
        self.begin_epoch();
        self.transitions.extend(epoch);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn n_epochs(&self) -> usize {
        self.epoch_starts.len()
    }

    pub fn epoch_starts(&self) -> &[usize] {
        &self.epoch_starts
    }

    pub fn epoch(&self, i: usize) -> &[Transition] {
        let start = self.epoch_starts[i];
        let end = self.epoch_starts.get(i + 1).copied().unwrap_or(self.transitions.len());
        &self.transitions[start..end]
    }

    pub fn epochs(&self) -> impl Iterator<Item = &[Transition]> {
        (0..self.n_epochs()).map(move |i| self.epoch(i))
    }

    /// Within each epoch, every transition starts where the previous ended.
    pub fn is_chained(&self) -> bool {
        self.epochs().all(|ep| ep.windows(2).all(|w| w[0].s_next == w[1].s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(s: f64, n: f64) -> Transition {
        Transition {
            s: vec![s],
            a: 0.0,
            r: 0.0,
            c: 0,
            s_next: vec![n],
        }
    }

    #[test]
    fn epochs_and_chaining() {
        let mut t = Trace::new();
        t.extend_epoch([tr(0.0, 1.0), tr(1.0, 2.0)]);
        t.extend_epoch([tr(5.0, 6.0)]);
        assert_eq!(t.len(), 3);
        assert_eq!(t.n_epochs(), 2);
        assert_eq!(t.epoch(1).len(), 1);
        assert!(t.is_chained());
        t.push(tr(9.0, 9.0));
        assert!(!t.is_chained());
    }
}
