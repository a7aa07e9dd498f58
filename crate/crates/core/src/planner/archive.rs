//! MAP-Elites behavior grid: at most one elite per cell.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cost_key;
use crate::policy::{BehaviorDescriptor, BehaviorSpace, Policy};

/// When a challenger takes over an occupied cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    /// Strictly higher return.
    RewardOnly,
    /// Strictly lower cost, or equal cost and strictly higher return.
    Safe,
}

impl Replacement {
    /// Whether a challenger `(return, cost)` replaces the incumbent.
    pub fn beats(self, challenger: (f64, f64), incumbent: (f64, f64)) -> bool {
        match self {
            Replacement::RewardOnly => challenger.0 > incumbent.0,
            Replacement::Safe => {
                let (kc, ki) = (cost_key(challenger.1), cost_key(incumbent.1));
                kc < ki || (kc == ki && challenger.0 > incumbent.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub policy: Policy,
    pub ret: f64,
    pub cost: f64,
    pub descriptor: BehaviorDescriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertOutcome {
    Added,
    Replaced,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertEvent {
    pub cell: usize,
    pub ret: f64,
    pub cost: f64,
    pub outcome: InsertOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub events: usize,
    /// Events whose recorded outcome disagrees with the replacement rule.
    pub rule_violations: usize,
    /// Cells whose final occupant disagrees with the replayed state.
    pub content_mismatches: usize,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.rule_violations == 0 && self.content_mismatches == 0
    }
}

#[derive(Debug, Clone)]
pub struct Archive {
    space: BehaviorSpace,
    rule: Replacement,
    cells: Vec<Option<Elite>>,
    filled: usize,
    log: Vec<InsertEvent>,
}

#[derive(Serialize)]
struct EliteRecord<'a> {
    cell: (usize, usize),
    descriptor: [f64; 2],
    ret: f64,
    cost: f64,
    params: &'a [f64],
}

impl Archive {
    pub fn new(space: BehaviorSpace, rule: Replacement) -> Self {
        let cells = vec![None; space.n_cells()];
        Self {
            space,
            rule,
            cells,
            filled: 0,
            log: Vec::new(),
        }
    }

    pub fn space(&self) -> &BehaviorSpace {
        &self.space
    }

    pub fn rule(&self) -> Replacement {
        self.rule
    }

    pub fn insert(&mut self, elite: Elite) -> InsertOutcome {
        let cell = self.space.flat(elite.descriptor.cell);
        let (ret, cost) = (elite.ret, elite.cost);
        let outcome = match &self.cells[cell] {
            None => InsertOutcome::Added,
            Some(inc) if self.rule.beats((ret, cost), (inc.ret, inc.cost)) => InsertOutcome::Replaced,
            Some(_) => InsertOutcome::Rejected,
        };
        match outcome {
            InsertOutcome::Added => {
                self.filled += 1;
                self.cells[cell] = Some(elite);
            }
            InsertOutcome::Replaced => self.cells[cell] = Some(elite),
            InsertOutcome::Rejected => {}
        }
        self.log.push(InsertEvent {
            cell,
            ret,
            cost,
            outcome,
        });
        outcome
    }

    pub fn len(&self) -> usize {
        self.filled
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    pub fn fill_ratio(&self) -> f64 {
        self.filled as f64 / self.cells.len() as f64
    }

    pub fn get(&self, cell: usize) -> Option<&Elite> {
        self.cells.get(cell).and_then(Option::as_ref)
    }

    /// Occupied cells in flat-index order.
    pub fn elites(&self) -> impl Iterator<Item = (usize, &Elite)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|e| (i, e)))
    }

    pub fn log(&self) -> &[InsertEvent] {
        &self.log
    }

    /// Replays the insertion log from an empty grid and checks every
    /// recorded outcome and the final contents against the rule.
    pub fn replay(&self) -> ReplayReport {
        let mut state: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        let mut report = ReplayReport {
            events: self.log.len(),
            ..ReplayReport::default()
        };
        for ev in &self.log {
            let expected = match state.get(&ev.cell) {
                None => InsertOutcome::Added,
                Some(&inc) if self.rule.beats((ev.ret, ev.cost), inc) => InsertOutcome::Replaced,
                Some(_) => InsertOutcome::Rejected,
            };
            if expected != ev.outcome {
                report.rule_violations += 1;
            }
            // Follow what the log claims happened so that content checks
            // catch a log that disagrees with the archive.
            if ev.outcome != InsertOutcome::Rejected {
                state.insert(ev.cell, (ev.ret, ev.cost));
            }
        }
        for (cell, slot) in self.cells.iter().enumerate() {
            let actual = slot.as_ref().map(|e| (e.ret, e.cost));
            if actual != state.get(&cell).copied() {
                report.content_mismatches += 1;
            }
        }
        report
    }

    /// Elites with their flat parameter vectors, as JSON.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let records: Vec<EliteRecord> = self
            .elites()
            .map(|(_, e)| EliteRecord {
                cell: e.descriptor.cell,
                descriptor: e.descriptor.b,
                ret: e.ret,
                cost: e.cost,
                params: e.policy.params(),
            })
            .collect();
        serde_json::to_string(&records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ActionSpace;
    use crate::policy::{PolicyArch, Projection};
    use std::sync::Arc;

    fn space() -> BehaviorSpace {
        BehaviorSpace::new(Projection::Dims([0, 1]), [(0.0, 1.0), (0.0, 1.0)])
    }

    fn elite(cell: (usize, usize), ret: f64, cost: f64) -> Elite {
        let arch = Arc::new(PolicyArch::new(
            1,
            vec![],
            ActionSpace::Continuous { lo: -1.0, hi: 1.0 },
        ));
        Elite {
            policy: Policy::from_params(arch, vec![ret, cost]),
            ret,
            cost,
            descriptor: BehaviorDescriptor { b: [0.0, 0.0], cell },
        }
    }

    #[test]
    fn safe_rule_prefers_lower_cost_regardless_of_return() {
        let mut a = Archive::new(space(), Replacement::Safe);
        assert_eq!(a.insert(elite((1, 1), 100.0, 1.0)), InsertOutcome::Added);
        assert_eq!(a.insert(elite((1, 1), -5.0, 0.0)), InsertOutcome::Replaced);
        assert_eq!(a.insert(elite((1, 1), 50.0, 1.0)), InsertOutcome::Rejected);
        assert_eq!(a.insert(elite((1, 1), -4.0, 0.0)), InsertOutcome::Replaced);
        assert_eq!(a.insert(elite((1, 1), -4.0, 0.0)), InsertOutcome::Rejected);
        assert_eq!(a.len(), 1);
        let e = a.get(space().flat((1, 1))).unwrap();
        assert_eq!((e.ret, e.cost), (-4.0, 0.0));
        assert!(a.replay().is_clean());
    }

    #[test]
    fn reward_rule_ignores_cost() {
        let mut a = Archive::new(space(), Replacement::RewardOnly);
        a.insert(elite((0, 0), 1.0, 0.0));
        assert_eq!(a.insert(elite((0, 0), 2.0, 5.0)), InsertOutcome::Replaced);
        assert_eq!(a.insert(elite((0, 0), 1.5, 0.0)), InsertOutcome::Rejected);
        assert!(a.replay().is_clean());
    }

    #[test]
    fn distinct_cells_fill_up() {
        let mut a = Archive::new(space(), Replacement::Safe);
        for i in 0..10 {
            a.insert(elite((i, 49 - i), i as f64, 0.0));
        }
        assert_eq!(a.len(), 10);
        assert_eq!(a.fill_ratio(), 10.0 / 2500.0);
        let cells: Vec<usize> = a.elites().map(|(c, _)| c).collect();
        let mut sorted = cells.clone();
        sorted.sort_unstable();
        assert_eq!(cells, sorted);
    }

    #[test]
    fn replay_detects_a_tampered_log() {
        let mut a = Archive::new(space(), Replacement::Safe);
        a.insert(elite((0, 0), 1.0, 0.0));
        a.insert(elite((0, 0), 3.0, 1.0));
        assert!(a.replay().is_clean());
        a.log[1].outcome = InsertOutcome::Replaced;
        let report = a.replay();
        assert_eq!(report.rule_violations, 1);
        assert_eq!(report.content_mismatches, 1);
    }

    #[test]
    fn json_export_has_flat_params() {
        let mut a = Archive::new(space(), Replacement::Safe);
        a.insert(elite((2, 3), 1.0, 0.0));
        let v: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(v[0]["params"].as_array().unwrap().len(), 2);
        assert_eq!(v[0]["cell"][1], 3);
    }
}
