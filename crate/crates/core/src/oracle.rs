//! Brute-force reference implementations used to check the main path.
//!
//! Nothing here calls into the partitioner, the store, the traversal
//! kernels or the engine. Full-graph oracles are meant for `n <= 2^20`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edge_list::EdgeList;

pub const UNREACHED: u32 = u32::MAX;

/// Adjacency lists in a `Vec<Vec<_>>`; deliberately not CSR.
fn adjacency(g: &EdgeList) -> Vec<Vec<u64>> {
    let mut adj = vec![Vec::new(); g.n as usize];
    for &(u, v) in &g.edges {
        adj[u as usize].push(v);
        if !g.symmetric {
            adj[v as usize].push(u);
        }
    }
    adj
}

/// Queue-based BFS hop distances on the undirected multigraph. Directed
/// inputs are treated as undirected.
pub fn reference_bfs(g: &EdgeList, source: u64) -> Vec<u32> {
    let adj = adjacency(g);
    let mut level = vec![UNREACHED; g.n as usize];
    if source >= g.n {
        return level;
    }
    let mut queue = VecDeque::new();
    level[source as usize] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = level[u as usize] + 1;
        for &v in &adj[u as usize] {
            if level[v as usize] == UNREACHED {
                level[v as usize] = next;
                queue.push_back(v);
            }
        }
    }
    level
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    NormalNormal,
    NormalDelegate,
    DelegateNormal,
    DelegateDelegate,
}

/// Edge placement transcribed rule by rule. Returns `(rank, gpu, kind)`.
pub fn oracle_distribute(
    edge: (u64, u64),
    degrees: &[u64],
    theta: u64,
    p_rank: u64,
    p_gpu: u64,
) -> (u64, u64, OracleKind) {
    let (u, v) = edge;
    let rank_of = |x: u64| x % p_rank;
    let gpu_of = |x: u64| (x / p_rank) % p_gpu;
    let out_degree = |x: u64| degrees[x as usize];
    let is_normal = |x: u64| out_degree(x) <= theta;

    let kind = match (is_normal(u), is_normal(v)) {
        (true, true) => OracleKind::NormalNormal,
        (true, false) => OracleKind::NormalDelegate,
        (false, true) => OracleKind::DelegateNormal,
        (false, false) => OracleKind::DelegateDelegate,
    };

    if is_normal(u) {
        (rank_of(u), gpu_of(u), kind)
    } else if is_normal(v) {
        (rank_of(v), gpu_of(v), kind)
    } else if out_degree(u) < out_degree(v) {
        (rank_of(u), gpu_of(u), kind)
    } else if out_degree(u) > out_degree(v) {
        (rank_of(v), gpu_of(v), kind)
    } else {
        let w = u.min(v);
        (rank_of(w), gpu_of(w), kind)
    }
}

/// Single-processor DOBFS over the whole symmetric graph, returning the
/// number of edges inspected. The direction rule and workload estimates are
/// the per-subgraph ones applied to the whole graph: `FV` is the frontier's
/// degree sum, `q` the frontier length, and the unvisited non-isolated
/// vertices play both `U` and `s`.
pub fn oracle_dobfs_inspections(g: &EdgeList, source: u64, factor0: f64, factor1: f64) -> u64 {
    let adj = adjacency(g);
    let n = g.n as usize;
    let mut level = vec![UNREACHED; n];
    if source >= g.n {
        return 0;
    }
    level[source as usize] = 0;
    let mut frontier = vec![source as usize];
    let mut backward = false;
    let mut inspections = 0u64;
    let mut depth = 0u32;

    while !frontier.is_empty() {
        let queue: Vec<usize> = frontier.iter().copied().filter(|&u| !adj[u].is_empty()).collect();
        let fv: u64 = queue.iter().map(|&u| adj[u].len() as u64).sum();
        let unvisited = (0..n).filter(|&v| level[v] == UNREACHED && !adj[v].is_empty()).count() as f64;
        let q = queue.len() as f64;
        let bv = if q == 0.0 { f64::INFINITY } else { unvisited * (q + unvisited) / q };
        let fv = fv as f64;
        if !backward {
            if factor0.is_finite() && fv > factor0 * bv {
                backward = true;
            }
        } else if factor1 > 0.0 && fv < factor1 * bv {
            backward = false;
        }

        // Newly found vertices get depth + 1 right away; backward scans only
        // accept parents at depth or less.
        let mut next = Vec::new();
        if backward {
            for v in 0..n {
                if level[v] != UNREACHED {
                    continue;
                }
                for &parent in &adj[v] {
                    inspections += 1;
                    if level[parent as usize] <= depth {
                        next.push(v);
                        break;
                    }
                }
            }
            for &v in &next {
                level[v] = depth + 1;
            }
        } else {
            for &u in &queue {
                for &v in &adj[u] {
                    inspections += 1;
                    if level[v as usize] == UNREACHED {
                        level[v as usize] = depth + 1;
                        next.push(v as usize);
                    }
                }
            }
        }
        depth += 1;
        frontier = next;
    }
    inspections
}

/// Simulates backward scans where each parent is independently newly
/// visited with probability `a`; returns the mean number of parents checked
/// per vertex (at most `od` each).
pub fn monte_carlo_backward_inspections(u_size: usize, od: usize, a: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0u64;
    for _ in 0..u_size {
        let mut checked = 0u64;
        for _ in 0..od {
            checked += 1;
            if rng.gen::<f64>() < a {
                break;
            }
        }
        total += checked;
    }
    total as f64 / u_size as f64
}
