//! Bulk-synchronous BFS driver over a [`PartitionedGraph`].
//!
//! One iteration: every worker builds its queues, picks a direction for each
//! of dd/dn/nd, visits its four subgraphs, then the delegate masks are
//! reduced and nn records exchanged at the barrier. Updates become visible
//! at the next iteration's previsit. The run ends at global quiescence: no
//! newly labeled normal vertex anywhere and no new delegate bit.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmask::Bitmask;
use crate::comm::{
    exchange_normal_vertices, reduce_delegate_masks, CommStats, DelegateMask, ExchangeOptions, IterationComm, Outbox,
};
use crate::error::{Error, Result};
use crate::partition::{ClusterShape, EdgeKind, NOT_DELEGATE};
use crate::store::{PartitionedGraph, WorkerGraph};
use crate::traversal::{
    build_queue, decide_direction, label_new, visit_backward, visit_forward, Direction, DirectionFactors,
    DirectionState, DoKind, LevelState, WorkloadEstimate, UNREACHED,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bfs,
    Dobfs,
}

/// Which MPI reduction a real deployment would use. Both simulate the same
/// way; the choice is only recorded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMode {
    #[default]
    Blocking,
    NonBlocking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfsOptions {
    pub mode: Mode,
    pub factors: DirectionFactors,
    pub local_all2all: bool,
    pub uniquify: bool,
    pub source: u64,
    pub seed: u64,
    pub reduction: ReductionMode,
}

impl Default for BfsOptions {
    fn default() -> Self {
        BfsOptions {
            mode: Mode::Dobfs,
            factors: DirectionFactors::default(),
            local_all2all: false,
            uniquify: false,
            source: 0,
            seed: 0,
            reduction: ReductionMode::default(),
        }
    }
}

impl BfsOptions {
    pub fn effective_factors(&self) -> DirectionFactors {
        match self.mode {
            Mode::Bfs => DirectionFactors::forward_only(),
            Mode::Dobfs => self.factors,
        }
    }

    pub fn with_source(&self, source: u64) -> Self {
        BfsOptions {
            source,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub nn: u64,
    pub nd: u64,
    pub dn: u64,
    pub dd: u64,
}

impl KindCounts {
    pub fn total(&self) -> u64 {
        self.nn + self.nd + self.dn + self.dd
    }

    pub fn add(&mut self, kind: EdgeKind, x: u64) {
        match kind {
            EdgeKind::Nn => self.nn += x,
            EdgeKind::Nd => self.nd += x,
            EdgeKind::Dn => self.dn += x,
            EdgeKind::Dd => self.dd += x,
        }
    }

    pub fn merge(&mut self, other: &KindCounts) {
        self.nn += other.nn;
        self.nd += other.nd;
        self.dn += other.dn;
        self.dd += other.dd;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: u32,
    /// Normal vertices labeled at the start of this iteration, all workers.
    pub normal_frontier: u64,
    /// Delegates with this iteration's level.
    pub delegate_frontier: u64,
    /// Per worker: directions for dd, dn, nd.
    pub directions: Vec<[Direction; 3]>,
    pub forward_inspections: KindCounts,
    pub backward_inspections: KindCounts,
    /// Backward inspections made while a delegate searched for a parent.
    pub delegate_backward_inspections: u64,
    pub comm: IterationComm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub compute_secs: f64,
    pub reduce_secs: f64,
    pub exchange_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfsRun {
    pub source: u64,
    pub levels: Vec<u32>,
    /// Iterations executed (`S`).
    pub iterations: u32,
    pub per_iteration: Vec<IterationStats>,
    pub forward_inspections: KindCounts,
    pub backward_inspections: KindCounts,
    pub delegate_backward_inspections: u64,
    pub comm: CommStats,
    /// Single-processor DOBFS inspections, filled in by callers that run the
    /// oracle.
    pub m_prime: Option<u64>,
    /// Mean backward parents checked per delegate per worker.
    pub b: f64,
    pub elapsed_secs: f64,
    pub phases: PhaseTimes,
    pub teps: f64,
}

impl BfsRun {
    pub fn total_inspections(&self) -> u64 {
        self.forward_inspections.total() + self.backward_inspections.total()
    }

    pub fn reached(&self) -> usize {
        self.levels.iter().filter(|&&l| l != UNREACHED).count()
    }

    pub fn levels_digest(&self) -> u64 {
        levels_digest(&self.levels)
    }
}

/// FNV-1a (64-bit) over the little-endian bytes of the level array.
pub fn levels_digest(levels: &[u32]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for l in levels {
        for b in l.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

/// Traversed edges per second over `m / 2`, `m` being the doubled
/// (symmetrized) edge count.
pub fn compute_teps(m: u64, elapsed_secs: f64) -> f64 {
    debug_assert!(elapsed_secs > 0.0);
    (m as f64 / 2.0) / elapsed_secs
}

pub fn geometric_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

struct WorkerState {
    levels: LevelState,
    dirs: DirectionState,
    frontier: Vec<u32>,
    pending: Vec<u32>,
}

struct StepOutput {
    outbox: Outbox,
    updates: Bitmask,
    directions: [Direction; 3],
    forward: KindCounts,
    backward: KindCounts,
    delegate_backward: u64,
}

fn count_unvisited(mask: &Bitmask, visited: &Bitmask) -> u64 {
    mask.words()
        .iter()
        .zip(visited.words())
        .map(|(a, b)| (a & !b).count_ones() as u64)
        .sum()
}

fn step(
    wg: &WorkerGraph,
    st: &mut WorkerState,
    delegate_frontier: &[u32],
    shape: &ClusterShape,
    adaptive: bool,
) -> StepOutput {
    let d = st.levels.delegate_visited.len();
    let mut outbox = Outbox::new(shape.p());
    let mut updates = Bitmask::new(d);
    let mut forward = KindCounts::default();
    let mut backward = KindCounts::default();
    let mut delegate_backward = 0u64;

    let (nn_q, _) = build_queue(&st.frontier, &wg.nn);
    let (nd_q, nd_fv) = build_queue(&st.frontier, &wg.nd);
    let (dn_q, dn_fv) = build_queue(delegate_frontier, &wg.dn);
    let (dd_q, dd_fv) = build_queue(delegate_frontier, &wg.dd);

    let levels = &st.levels;
    let visited = &levels.delegate_visited;
    let unvisited_nd_sources = wg
        .nd_sources
        .iter()
        .filter(|&&u| levels.normal_levels[u as usize] == UNREACHED)
        .count() as u64;
    let unvisited_dn_sources = count_unvisited(&wg.dn_source_mask, visited);
    let unvisited_dd_sources = count_unvisited(&wg.dd_source_mask, visited);

    let mut directions = [Direction::Forward; 3];
    if adaptive {
        let estimates = [
            (DoKind::Dd, WorkloadEstimate::new(dd_fv, unvisited_dd_sources, dd_q.len() as u64, unvisited_dd_sources)),
            (DoKind::Dn, WorkloadEstimate::new(dn_fv, unvisited_nd_sources, dn_q.len() as u64, unvisited_dn_sources)),
            (DoKind::Nd, WorkloadEstimate::new(nd_fv, unvisited_dn_sources, nd_q.len() as u64, unvisited_nd_sources)),
        ];
        for (kind, est) in estimates {
            directions[kind.index()] = decide_direction(&est, &mut st.dirs, kind);
        }
    }

    let normal_levels = &st.levels.normal_levels;
    let visited = &st.levels.delegate_visited;
    let normal_seen = |l: u32| normal_levels[l as usize] != UNREACHED;
    let delegate_seen = |x: u32| visited.get(x as usize);

    // nn: always forward, every destination goes through the exchange.
    forward.nn = visit_forward(&wg.nn, &nn_q, |_| false, |v| outbox.push(shape, v));

    // nd: normal -> delegate.
    match directions[DoKind::Nd.index()] {
        Direction::Forward => {
            forward.nd = visit_forward(&wg.nd, &nd_q, delegate_seen, |x| {
                updates.set(x as usize);
            });
        }
        Direction::Backward => {
            let candidates = wg.dn_source_mask.iter_ones().filter(|&x| !visited.get(x)).map(|x| x as u32);
            let n = visit_backward(&wg.dn, candidates, normal_seen, |x| {
                updates.set(x as usize);
            });
            backward.nd = n;
            delegate_backward += n;
        }
    }

    // dn: delegate -> normal, always local.
    let pending = &mut st.pending;
    match directions[DoKind::Dn.index()] {
        Direction::Forward => {
            forward.dn = visit_forward(&wg.dn, &dn_q, normal_seen, |l| pending.push(l));
        }
        Direction::Backward => {
            let candidates = wg.nd_sources.iter().copied().filter(|&u| !normal_seen(u));
            backward.dn = visit_backward(&wg.nd, candidates, delegate_seen, |u| pending.push(u));
        }
    }

    // dd: delegate -> delegate.
    match directions[DoKind::Dd.index()] {
        Direction::Forward => {
            forward.dd = visit_forward(&wg.dd, &dd_q, delegate_seen, |x| {
                updates.set(x as usize);
            });
        }
        Direction::Backward => {
            let candidates = wg.dd_source_mask.iter_ones().filter(|&x| !visited.get(x)).map(|x| x as u32);
            let n = visit_backward(&wg.dd, candidates, delegate_seen, |x| {
                updates.set(x as usize);
            });
            backward.dd = n;
            delegate_backward += n;
        }
    }

    StepOutput {
        outbox,
        updates,
        directions,
        forward,
        backward,
        delegate_backward,
    }
}

pub fn run_bfs(pg: &PartitionedGraph, opts: &BfsOptions) -> Result<BfsRun> {
    if opts.source >= pg.n {
        return Err(Error::SourceOutOfRange {
            source_vertex: opts.source,
            n: pg.n,
        });
    }
    let shape = pg.shape;
    let d = pg.d();
    let factors = opts.effective_factors();
    let adaptive = opts.mode == Mode::Dobfs;
    let exchange_opts = ExchangeOptions {
        local_all2all: opts.local_all2all,
        uniquify: opts.uniquify,
    };
    let start = Instant::now();
    let mut phases = PhaseTimes::default();

    let mut states: Vec<WorkerState> = pg
        .workers
        .iter()
        .map(|w| WorkerState {
            levels: LevelState::new(w.local_count as usize, d),
            dirs: DirectionState::new(factors),
            frontier: Vec::new(),
            pending: Vec::new(),
        })
        .collect();

    let source_delegate = pg.delegates.binary_search(&opts.source).ok();
    let mut delegate_frontier: Vec<u32> = Vec::new();
    match source_delegate {
        Some(x) => {
            for st in &mut states {
                st.levels.visit_delegate(x, 0);
            }
            delegate_frontier.push(x as u32);
        }
        None => {
            let owner = shape.home(opts.source);
            let local = shape.local_id(opts.source) as u32;
            let st = &mut states[owner];
            st.frontier = label_new(&[local], &mut st.levels.normal_levels, 0);
        }
    }

    let mut per_iteration = Vec::new();
    let mut comm = CommStats::default();
    let mut forward = KindCounts::default();
    let mut backward = KindCounts::default();
    let mut delegate_backward = 0u64;
    let mut iteration: u32 = 0;

    loop {
        let normal_frontier: u64 = states.iter().map(|s| s.frontier.len() as u64).sum();
        if normal_frontier == 0 && delegate_frontier.is_empty() {
            break;
        }

        let t0 = Instant::now();
        let outputs: Vec<StepOutput> = pg
            .workers
            .par_iter()
            .zip(states.par_iter_mut())
            .map(|(wg, st)| step(wg, st, &delegate_frontier, &shape, adaptive))
            .collect();
        phases.compute_secs += t0.elapsed().as_secs_f64();

        let mut stats = IterationStats {
            iteration,
            normal_frontier,
            delegate_frontier: delegate_frontier.len() as u64,
            ..Default::default()
        };
        let mut masks = Vec::with_capacity(outputs.len());
        let mut outboxes = Vec::with_capacity(outputs.len());
        for (out, st) in outputs.into_iter().zip(&states) {
            stats.directions.push(out.directions);
            stats.forward_inspections.merge(&out.forward);
            stats.backward_inspections.merge(&out.backward);
            stats.delegate_backward_inspections += out.delegate_backward;
            let dirty = out.updates.any();
            let mut bits = st.levels.delegate_visited.clone();
            bits.or_assign(&out.updates);
            masks.push(DelegateMask { bits, dirty });
            outboxes.push(out.outbox);
        }

        let t1 = Instant::now();
        let reduction = reduce_delegate_masks(&masks, &shape)?;
        phases.reduce_secs += t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let (inboxes, exchange) = exchange_normal_vertices(outboxes, &shape, exchange_opts)?;
        phases.exchange_secs += t2.elapsed().as_secs_f64();

        let next_level = iteration + 1;
        delegate_frontier = if reduction.performed {
            reduction
                .mask
                .difference(&states[0].levels.delegate_visited)
                .iter_ones()
                .map(|x| x as u32)
                .collect()
        } else {
            Vec::new()
        };

        states
            .par_iter_mut()
            .zip(inboxes.into_par_iter())
            .for_each(|(st, inbox)| {
                for &x in &delegate_frontier {
                    st.levels.visit_delegate(x as usize, next_level);
                }
                let mut pending = std::mem::take(&mut st.pending);
                pending.extend(inbox);
                st.frontier = label_new(&pending, &mut st.levels.normal_levels, next_level);
                st.levels.iteration = next_level;
            });

        let it_comm = IterationComm {
            reduction_performed: reduction.performed,
            mask_bits: reduction.wire_bits,
            mask_bytes: reduction.wire_bits as f64 / 8.0,
            exchange,
        };
        comm.record(it_comm.clone());
        stats.comm = it_comm;
        forward.merge(&stats.forward_inspections);
        backward.merge(&stats.backward_inspections);
        delegate_backward += stats.delegate_backward_inspections;
        per_iteration.push(stats);
        iteration = next_level;
    }

    let levels = assemble_levels(pg, &states);
    let elapsed_secs = start.elapsed().as_secs_f64().max(1e-9);
    let b = if d == 0 {
        0.0
    } else {
        delegate_backward as f64 / (d as f64 * pg.p() as f64)
    };
    Ok(BfsRun {
        source: opts.source,
        levels,
        iterations: iteration,
        per_iteration,
        forward_inspections: forward,
        backward_inspections: backward,
        delegate_backward_inspections: delegate_backward,
        comm,
        m_prime: None,
        b,
        elapsed_secs,
        phases,
        teps: compute_teps(pg.m(), elapsed_secs),
    })
}

fn assemble_levels(pg: &PartitionedGraph, states: &[WorkerState]) -> Vec<u32> {
    let mut levels = vec![UNREACHED; pg.n as usize];
    for (w, st) in states.iter().enumerate() {
        for (local, &l) in st.levels.normal_levels.iter().enumerate() {
            if l != UNREACHED {
                levels[pg.shape.global_id(w, local as u64) as usize] = l;
            }
        }
    }
    if let Some(st) = states.first() {
        for (x, &g) in pg.delegates.iter().enumerate() {
            debug_assert_ne!(x as u32, NOT_DELEGATE);
            levels[g as usize] = st.levels.delegate_levels[x];
        }
    }
    levels
}

/// Textbook BFS hop distances on the undirected multigraph, for checking.
pub fn run_reference_bfs(g: &crate::edge_list::EdgeList, source: u64) -> Vec<u32> {
    crate::oracle::reference_bfs(g, source)
}

/// Up to `count` distinct search keys drawn uniformly from the vertices
/// with at least one edge, reproducible from `seed`.
pub fn pick_sources(out_degree: &[u64], count: usize, seed: u64) -> Vec<u64> {
    let candidates: Vec<u64> = (0..out_degree.len() as u64).filter(|&v| out_degree[v as usize] > 0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.choose_multiple(&mut rng, count.min(candidates.len())).copied().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub source: u64,
    pub iterations: u32,
    pub elapsed_secs: f64,
    pub teps: f64,
    pub total_inspections: u64,
    pub normal_bytes: u64,
    pub mask_bytes: f64,
    pub levels_digest: String,
}

impl RunSummary {
    pub fn of(run: &BfsRun) -> Self {
        RunSummary {
            source: run.source,
            iterations: run.iterations,
            elapsed_secs: run.elapsed_secs,
            teps: run.teps,
            total_inspections: run.total_inspections(),
            normal_bytes: run.comm.normal_bytes,
            mask_bytes: run.comm.mask_bytes,
            levels_digest: format!("{:016x}", run.levels_digest()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub runs: Vec<RunSummary>,
    pub discarded: usize,
    pub geomean_teps: f64,
    pub geomean_elapsed_secs: f64,
    /// Mean seconds per phase over the kept runs.
    pub mean_phases: PhaseTimes,
}

/// Runs every source; runs that finish in a single iteration are dropped.
pub fn benchmark(pg: &PartitionedGraph, sources: &[u64], opts: &BfsOptions) -> Result<BenchmarkReport> {
    let mut kept = Vec::new();
    let mut discarded = 0;
    for &s in sources {
        let run = run_bfs(pg, &opts.with_source(s))?;
        if run.iterations <= 1 {
            discarded += 1;
        } else {
            kept.push(run);
        }
    }
    summarize(kept, discarded)
}

pub fn summarize(kept: Vec<BfsRun>, discarded: usize) -> Result<BenchmarkReport> {
    if kept.is_empty() {
        return Err(Error::EmptyReport(discarded));
    }
    let teps: Vec<f64> = kept.iter().map(|r| r.teps).collect();
    let elapsed: Vec<f64> = kept.iter().map(|r| r.elapsed_secs).collect();
    let k = kept.len() as f64;
    let mean_phases = PhaseTimes {
        compute_secs: kept.iter().map(|r| r.phases.compute_secs).sum::<f64>() / k,
        reduce_secs: kept.iter().map(|r| r.phases.reduce_secs).sum::<f64>() / k,
        exchange_secs: kept.iter().map(|r| r.phases.exchange_secs).sum::<f64>() / k,
    };
    Ok(BenchmarkReport {
        runs: kept.iter().map(RunSummary::of).collect(),
        discarded,
        geomean_teps: geometric_mean(&teps),
        geomean_elapsed_secs: geometric_mean(&elapsed),
        mean_phases,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub iterations: u32,
    pub reached: usize,
    pub forward_inspections: KindCounts,
    pub backward_inspections: KindCounts,
    pub total_inspections: u64,
    pub delegate_backward_inspections: u64,
    pub m_prime: Option<u64>,
    pub b: f64,
    pub mask_bits: u64,
    pub mask_bytes: f64,
    pub normal_bytes: u64,
    pub local_bytes: u64,
    pub message_count: u64,
    pub pair_count: u64,
    pub s_prime: u64,
    pub elapsed_secs: f64,
    pub phases: PhaseTimes,
    pub teps: f64,
}

/// JSON run report: parameters, per-iteration stats, totals and a digest of
/// the level array (hex FNV-1a) in place of the labels themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport<P> {
    pub params: P,
    pub per_iteration: Vec<IterationStats>,
    pub totals: RunTotals,
    pub levels_digest: String,
}

impl<P> RunReport<P> {
    pub fn new(params: P, run: &BfsRun) -> Self {
        RunReport {
            params,
            per_iteration: run.per_iteration.clone(),
            totals: RunTotals {
                iterations: run.iterations,
                reached: run.reached(),
                forward_inspections: run.forward_inspections,
                backward_inspections: run.backward_inspections,
                total_inspections: run.total_inspections(),
                delegate_backward_inspections: run.delegate_backward_inspections,
                m_prime: run.m_prime,
                b: run.b,
                mask_bits: run.comm.mask_bits,
                mask_bytes: run.comm.mask_bytes,
                normal_bytes: run.comm.normal_bytes,
                local_bytes: run.comm.local_bytes,
                message_count: run.comm.message_count,
                pair_count: run.comm.pair_count,
                s_prime: run.comm.s_prime,
                elapsed_secs: run.elapsed_secs,
                phases: run.phases,
                teps: run.teps,
            },
            levels_digest: format!("{:016x}", run.levels_digest()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge_list::EdgeList;
    use crate::partition::partition;

    fn path3() -> EdgeList {
        EdgeList::new(3, vec![(0, 1), (1, 2)]).symmetrize()
    }

    #[test]
    fn path_levels() {
        let (pg, _) = partition(&path3(), 100, &ClusterShape::new(2, 1).unwrap()).unwrap();
        let run = run_bfs(&pg, &BfsOptions::default()).unwrap();
        assert_eq!(run.levels, vec![0, 1, 2]);
        assert_eq!(run.iterations, 3);
    }

    #[test]
    fn isolated_source() {
        let g = EdgeList::new(4, vec![(0, 1)]).symmetrize();
        let (pg, _) = partition(&g, 100, &ClusterShape::single()).unwrap();
        let run = run_bfs(&pg, &BfsOptions::default().with_source(3)).unwrap();
        assert_eq!(run.levels, vec![UNREACHED, UNREACHED, UNREACHED, 0]);
        assert_eq!(run.iterations, 1);
    }

    #[test]
    fn source_out_of_range() {
        let (pg, _) = partition(&path3(), 100, &ClusterShape::single()).unwrap();
        let err = run_bfs(&pg, &BfsOptions::default().with_source(3)).unwrap_err();
        assert!(matches!(err, Error::SourceOutOfRange { .. }));
    }

    #[test]
    fn delegate_source() {
        let g = EdgeList::new(6, (1..6).map(|l| (0, l)).collect()).symmetrize();
        let (pg, _) = partition(&g, 2, &ClusterShape::new(2, 2).unwrap()).unwrap();
        assert_eq!(pg.delegates, vec![0]);
        let run = run_bfs(&pg, &BfsOptions::default()).unwrap();
        assert_eq!(run.levels, vec![0, 1, 1, 1, 1, 1]);
        let run = run_bfs(&pg, &BfsOptions::default().with_source(4)).unwrap();
        assert_eq!(run.levels, vec![1, 2, 2, 2, 0, 2]);
    }

    #[test]
    fn sources_skip_isolated_and_repeat() {
        let deg = [0, 3, 0, 1, 5, 0];
        let a = pick_sources(&deg, 10, 4);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|&v| deg[v as usize] > 0));
        assert_eq!(a, pick_sources(&deg, 10, 4));
        assert_eq!(pick_sources(&deg, 2, 9).len(), 2);
    }

    #[test]
    fn teps_formula() {
        let m = (1u64 << 20) * 32;
        assert_eq!(compute_teps(m, 1.0), (1u64 << 20) as f64 * 16.0);
        assert_eq!(compute_teps(m, 0.5), 2.0 * compute_teps(m, 1.0));
    }

    #[test]
    fn geomean() {
        assert!((geometric_mean(&[1.0, 4.0]) - 2.0).abs() < 1e-12);
        assert!((geometric_mean(&[3.5]) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn all_isolated_sources_empty_report() {
        let g = EdgeList::new(4, vec![(0, 1)]).symmetrize();
        let (pg, _) = partition(&g, 100, &ClusterShape::single()).unwrap();
        let err = benchmark(&pg, &[2, 3], &BfsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyReport(2)));
        let rep = benchmark(&pg, &[2, 0], &BfsOptions::default()).unwrap();
        assert_eq!(rep.runs.len(), 1);
        assert_eq!(rep.discarded, 1);
        assert!((rep.geomean_teps - rep.runs[0].teps).abs() <= 1e-9 * rep.runs[0].teps);
    }

    #[test]
    fn digest_changes_with_levels() {
        assert_ne!(levels_digest(&[0, 1, 2]), levels_digest(&[0, 2, 1]));
        assert_eq!(levels_digest(&[]), 0xcbf2_9ce4_8422_2325);
    }
}
