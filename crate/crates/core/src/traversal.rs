//! Per-worker local computation for one iteration: previsit, forward-push
//! and backward-pull visits, and the per-subgraph direction decision.
//!
//! All visits read labels as they stood at the start of the iteration and
//! write into separate output buffers, so subgraph visits may run in any
//! order within an iteration.

use serde::{Deserialize, Serialize};

use crate::bitmask::Bitmask;
use crate::store::{ColumnIndex, Csr};

pub const UNREACHED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelState {
    /// Local normal id to level.
    pub normal_levels: Vec<u32>,
    pub delegate_visited: Bitmask,
    pub delegate_levels: Vec<u32>,
    pub iteration: u32,
}

impl LevelState {
    pub fn new(local_count: usize, d: usize) -> Self {
        LevelState {
            normal_levels: vec![UNREACHED; local_count],
            delegate_visited: Bitmask::new(d),
            delegate_levels: vec![UNREACHED; d],
            iteration: 0,
        }
    }

    /// Marks delegate `x` visited at `level`. Returns whether it was new.
    pub fn visit_delegate(&mut self, x: usize, level: u32) -> bool {
        if self.delegate_visited.set(x) {
            self.delegate_levels[x] = level;
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Subgraph kinds that take part in direction optimization. nn never does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoKind {
    Dd,
    Dn,
    Nd,
}

impl DoKind {
    pub const ALL: [DoKind; 3] = [DoKind::Dd, DoKind::Dn, DoKind::Nd];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DoKind::Dd => "dd",
            DoKind::Dn => "dn",
            DoKind::Nd => "nd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchFactors {
    /// Forward to backward when `FV > factor0 * BV`.
    pub factor0: f64,
    /// Backward to forward when `FV < factor1 * BV`.
    pub factor1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionFactors {
    pub dd: SwitchFactors,
    pub dn: SwitchFactors,
    pub nd: SwitchFactors,
    /// When false a subgraph that went backward stays backward.
    pub allow_switch_back: bool,
}

impl Default for DirectionFactors {
    fn default() -> Self {
        DirectionFactors::from_factor0(0.5, 0.05, 1e-7)
    }
}

impl DirectionFactors {
    /// `factor1` defaults to a tenth of `factor0`.
    pub fn from_factor0(dd: f64, dn: f64, nd: f64) -> Self {
        let f = |f0: f64| SwitchFactors {
            factor0: f0,
            factor1: f0 / 10.0,
        };
        DirectionFactors {
            dd: f(dd),
            dn: f(dn),
            nd: f(nd),
            allow_switch_back: true,
        }
    }

    /// Never leaves forward: plain BFS.
    pub fn forward_only() -> Self {
        let f = SwitchFactors {
            factor0: f64::INFINITY,
            factor1: 0.0,
        };
        DirectionFactors {
            dd: f,
            dn: f,
            nd: f,
            allow_switch_back: false,
        }
    }

    pub fn get(&self, kind: DoKind) -> SwitchFactors {
        match kind {
            DoKind::Dd => self.dd,
            DoKind::Dn => self.dn,
            DoKind::Nd => self.nd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionState {
    pub current: [Direction; 3],
    pub factors: DirectionFactors,
}

impl DirectionState {
    pub fn new(factors: DirectionFactors) -> Self {
        DirectionState {
            current: [Direction::Forward; 3],
            factors,
        }
    }

    pub fn get(&self, kind: DoKind) -> Direction {
        self.current[kind.index()]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEstimate {
    /// Sum of out-degrees over the forward queue.
    pub fv: u64,
    /// Estimated parents checked by a backward visit.
    pub bv: f64,
    /// Unvisited sources of the reverse subgraph.
    pub u_size: u64,
    /// Forward queue length.
    pub q: u64,
    /// Unvisited sources of the forward subgraph.
    pub s: u64,
}

impl WorkloadEstimate {
    pub fn new(fv: u64, u_size: u64, q: u64, s: u64) -> Self {
        WorkloadEstimate {
            fv,
            bv: estimate_backward_workload(u_size, q, s),
            u_size,
            q,
            s,
        }
    }
}

/// `|U| (q + s) / q`, the expected number of parents checked when each
/// parent is newly visited with probability `q / (q + s)`. Infinite for an
/// empty frontier.
pub fn estimate_backward_workload(u_size: u64, q: u64, s: u64) -> f64 {
    if q == 0 {
        return f64::INFINITY;
    }
    u_size as f64 * (q + s) as f64 / q as f64
}

/// Applies the switching rule for one subgraph kind and records the result.
pub fn decide_direction(est: &WorkloadEstimate, ds: &mut DirectionState, kind: DoKind) -> Direction {
    let SwitchFactors { factor0, factor1 } = ds.factors.get(kind);
    let fv = est.fv as f64;
    let next = match ds.get(kind) {
        Direction::Forward => {
            // inf * 0 would be NaN; an infinite factor never switches.
            if factor0.is_finite() && fv > factor0 * est.bv {
                Direction::Backward
            } else {
                Direction::Forward
            }
        }
        Direction::Backward => {
            let back = ds.factors.allow_switch_back && factor1 > 0.0 && fv < factor1 * est.bv;
            if back {
                Direction::Forward
            } else {
                Direction::Backward
            }
        }
    };
    ds.current[kind.index()] = next;
    next
}

/// Labels every not-yet-visited input with `level`, dropping duplicates.
/// Returns the newly labeled ids in input order.
pub fn label_new(inputs: &[u32], levels: &mut [u32], level: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(inputs.len());
    for &u in inputs {
        let slot = &mut levels[u as usize];
        if *slot == UNREACHED {
            *slot = level;
            out.push(u);
        }
    }
    out
}

/// Keeps the vertices with at least one edge in `csr`; returns the queue and
/// its forward workload.
pub fn build_queue<C: ColumnIndex>(frontier: &[u32], csr: &Csr<C>) -> (Vec<u32>, u64) {
    let mut fv = 0u64;
    let queue = frontier
        .iter()
        .copied()
        .filter(|&u| {
            let deg = csr.degree(u as usize) as u64;
            fv += deg;
            deg > 0
        })
        .collect();
    (queue, fv)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Previsit {
    /// Newly labeled inputs, including zero-degree ones.
    pub labeled: Vec<u32>,
    /// Labeled inputs with edges in the subgraph.
    pub queue: Vec<u32>,
    pub fv: u64,
}

/// Dedup, drop visited, label, and drop zero-out-degree vertices with
/// respect to `csr`.
pub fn previsit<C: ColumnIndex>(inputs: &[u32], levels: &mut [u32], level: u32, csr: &Csr<C>) -> Previsit {
    let labeled = label_new(inputs, levels, level);
    let (queue, fv) = build_queue(&labeled, csr);
    Previsit { labeled, queue, fv }
}

/// Forward push: scans every edge out of `queue` and emits each destination
/// that `is_visited` rejects. Returns the number of edges inspected.
pub fn visit_forward<C: ColumnIndex>(
    csr: &Csr<C>,
    queue: &[u32],
    is_visited: impl Fn(C) -> bool,
    mut emit: impl FnMut(C),
) -> u64 {
    let mut inspected = 0u64;
    for &u in queue {
        let row = csr.row(u as usize);
        inspected += row.len() as u64;
        for &v in row {
            if !is_visited(v) {
                emit(v);
            }
        }
    }
    inspected
}

/// Backward pull: every candidate scans its parent list in `reverse_csr`
/// and stops at the first visited parent, emitting itself. Returns the
/// number of parents inspected, the found parent included.
pub fn visit_backward<C: ColumnIndex>(
    reverse_csr: &Csr<C>,
    candidates: impl IntoIterator<Item = u32>,
    parent_visited: impl Fn(C) -> bool,
    mut emit: impl FnMut(u32),
) -> u64 {
    let mut inspected = 0u64;
    for u in candidates {
        for &parent in reverse_csr.row(u as usize) {
            inspected += 1;
            if parent_visited(parent) {
                emit(u);
                break;
            }
        }
    }
    inspected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::EdgeKind;

    fn csr(rows: usize, pairs: &[(u32, u32)]) -> Csr<u32> {
        Csr::from_pairs(EdgeKind::Dd, rows, pairs).unwrap()
    }

    #[test]
    fn previsit_dedups_and_skips_visited() {
        let g = csr(6, &[(3, 0), (5, 1)]);
        let mut levels = vec![UNREACHED; 6];
        levels[5] = 0;
        let pv = previsit(&[3, 3, 5], &mut levels, 1, &g);
        assert_eq!(pv.queue, vec![3]);
        assert_eq!(pv.fv, 1);
        assert_eq!(levels[3], 1);
    }

    #[test]
    fn previsit_zero_degree_inputs() {
        let g = csr(4, &[]);
        let mut levels = vec![UNREACHED; 4];
        let pv = previsit(&[0, 1, 2], &mut levels, 2, &g);
        assert!(pv.queue.is_empty());
        assert_eq!(pv.fv, 0);
        assert_eq!(pv.labeled, vec![0, 1, 2]);
    }

    #[test]
    fn forward_single_edge() {
        let g = csr(2, &[(0, 1)]);
        let levels = [0, UNREACHED];
        let mut out = Vec::new();
        let n = visit_forward(&g, &[0], |v| levels[v as usize] != UNREACHED, |v| out.push(v));
        assert_eq!(out, vec![1]);
        assert_eq!(n, 1);
    }

    #[test]
    fn forward_empty_queue() {
        let g = csr(2, &[(0, 1)]);
        let mut out = Vec::<u32>::new();
        assert_eq!(visit_forward(&g, &[], |_| false, |v| out.push(v)), 0);
        assert!(out.is_empty());
    }

    #[test]
    fn backward_early_exit() {
        // vertex 0 has parents [1, 2, 3]; 1 visited.
        let g = csr(4, &[(0, 1), (0, 2), (0, 3)]);
        let visited = [false, true, false, false];
        let mut found = Vec::new();
        let n = visit_backward(&g, [0], |p| visited[p as usize], |u| found.push(u));
        assert_eq!(n, 1);
        assert_eq!(found, vec![0]);
    }

    #[test]
    fn backward_no_parent_visited() {
        let g = csr(4, &[(0, 1), (0, 2), (0, 3)]);
        let mut found = Vec::new();
        let n = visit_backward(&g, [0], |_| false, |u| found.push(u));
        assert_eq!(n, 3);
        assert!(found.is_empty());
    }

    #[test]
    fn bv_formula() {
        assert_eq!(estimate_backward_workload(100, 10, 30), 400.0);
        assert_eq!(estimate_backward_workload(77, 5, 0), 77.0);
        assert!(estimate_backward_workload(10, 0, 3).is_infinite());
    }

    #[test]
    fn switching_rule() {
        let mut ds = DirectionState::new(DirectionFactors::default());
        let est = WorkloadEstimate {
            fv: 1000,
            bv: 100.0,
            ..Default::default()
        };
        assert_eq!(decide_direction(&est, &mut ds, DoKind::Dd), Direction::Backward);
        // other kinds untouched
        assert_eq!(ds.get(DoKind::Dn), Direction::Forward);
        let small = WorkloadEstimate {
            fv: 1,
            bv: 100.0,
            ..Default::default()
        };
        // 1 < 0.05 * 100 -> back to forward
        assert_eq!(decide_direction(&small, &mut ds, DoKind::Dd), Direction::Forward);
    }

    #[test]
    fn hold_when_between_thresholds() {
        let mut ds = DirectionState::new(DirectionFactors::default());
        ds.current[DoKind::Dd.index()] = Direction::Backward;
        let est = WorkloadEstimate {
            fv: 10,
            bv: 100.0,
            ..Default::default()
        };
        assert_eq!(decide_direction(&est, &mut ds, DoKind::Dd), Direction::Backward);
    }

    #[test]
    fn infinite_factor_stays_forward() {
        let mut ds = DirectionState::new(DirectionFactors::forward_only());
        for bv in [0.0, 1.0, f64::INFINITY] {
            let est = WorkloadEstimate {
                fv: u64::MAX,
                bv,
                ..Default::default()
            };
            for k in DoKind::ALL {
                assert_eq!(decide_direction(&est, &mut ds, k), Direction::Forward);
            }
        }
    }

    #[test]
    fn switch_back_can_be_disabled() {
        let mut ds = DirectionState::new(DirectionFactors {
            allow_switch_back: false,
            ..Default::default()
        });
        ds.current = [Direction::Backward; 3];
        let est = WorkloadEstimate {
            fv: 0,
            bv: 1e9,
            ..Default::default()
        };
        assert_eq!(decide_direction(&est, &mut ds, DoKind::Nd), Direction::Backward);
    }

    #[test]
    fn default_factor0_per_kind() {
        let f = DirectionFactors::default();
        assert_eq!(f.dd.factor0, 0.5);
        assert_eq!(f.dn.factor0, 0.05);
        assert_eq!(f.nd.factor0, 1e-7);
    }
}
