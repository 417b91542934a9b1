//! Degree separation and edge distribution.
//!
//! Vertices with out-degree above the threshold become delegates, renumbered
//! densely in ascending global-id order. Every directed edge is then sent to
//! exactly one worker:
//!
//! 1. normal source: the source's home;
//! 2. otherwise normal destination: the destination's home;
//! 3. both delegates: the home of the lower out-degree endpoint, or of
//!    `min(u, v)` on a degree tie.
//!
//! A vertex's home is `(v mod p_rank, (v / p_rank) mod p_gpu)`, which makes
//! the owner's local id `v / p` dense and invertible.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmask::Bitmask;
use crate::edge_list::EdgeList;
use crate::error::{Error, Result};
use crate::store::{Csr, PartitionedGraph, WorkerGraph};

pub const NOT_DELEGATE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterShape {
    pub p_rank: usize,
    pub p_gpu: usize,
}

impl ClusterShape {
    pub fn new(p_rank: usize, p_gpu: usize) -> Result<Self> {
        if p_rank == 0 || p_gpu == 0 {
            return Err(Error::InvalidParam {
                field: "shape",
                message: format!("p_rank = {p_rank} and p_gpu = {p_gpu} must both be positive"),
            });
        }
        Ok(ClusterShape { p_rank, p_gpu })
    }

    pub fn single() -> Self {
        ClusterShape { p_rank: 1, p_gpu: 1 }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p_rank * self.p_gpu
    }

    #[inline]
    pub fn rank_of(&self, v: u64) -> usize {
        (v % self.p_rank as u64) as usize
    }

    #[inline]
    pub fn gpu_of(&self, v: u64) -> usize {
        ((v / self.p_rank as u64) % self.p_gpu as u64) as usize
    }

    /// Worker index of `(rank, gpu)`, rank-major.
    #[inline]
    pub fn worker(&self, rank: usize, gpu: usize) -> usize {
        rank * self.p_gpu + gpu
    }

    #[inline]
    pub fn rank_gpu(&self, worker: usize) -> (usize, usize) {
        (worker / self.p_gpu, worker % self.p_gpu)
    }

    #[inline]
    pub fn home(&self, v: u64) -> usize {
        self.worker(self.rank_of(v), self.gpu_of(v))
    }

    /// Smallest global id owned by `worker`.
    #[inline]
    pub fn base(&self, worker: usize) -> u64 {
        let (rank, gpu) = self.rank_gpu(worker);
        (rank + self.p_rank * gpu) as u64
    }

    #[inline]
    pub fn local_id(&self, v: u64) -> u64 {
        v / self.p() as u64
    }

    #[inline]
    pub fn global_id(&self, worker: usize, local: u64) -> u64 {
        self.base(worker) + self.p() as u64 * local
    }

    /// Number of ids in `[0, n)` owned by `worker`.
    pub fn owned_count(&self, worker: usize, n: u64) -> u64 {
        let base = self.base(worker);
        if base >= n {
            0
        } else {
            (n - base).div_ceil(self.p() as u64)
        }
    }
}

impl fmt::Display for ClusterShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x1x{}", self.p_rank, self.p_gpu)
    }
}

/// Parses `nodes x ranks x gpus` (e.g. `4x1x2`); nodes and ranks-per-node
/// collapse into `p_rank`.
impl FromStr for ClusterShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X', '×']).collect();
        let bad = || Error::InvalidParam {
            field: "shape",
            message: format!("`{s}` is not of the form NODESxRANKSxGPUS"),
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        ClusterShape::new(nums[0] * nums[1], nums[2])
    }
}

/// Degree threshold following the suggested curve: 64 at scale 30, growing
/// by a factor of sqrt(2) per scale, clamped to [16, 512].
pub fn suggested_theta(scale: u32) -> u64 {
    let t = 64.0 * std::f64::consts::SQRT_2.powi(scale as i32 - 30);
    t.round().clamp(16.0, 512.0) as u64
}

pub fn compute_out_degrees(g: &EdgeList) -> Vec<u64> {
    let mut deg = vec![0u64; g.n as usize];
    for &(u, _) in &g.edges {
        deg[u as usize] += 1;
    }
    deg
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexClassification {
    pub theta: u64,
    pub out_degree: Vec<u64>,
    /// Global id to delegate id, `NOT_DELEGATE` for normal vertices.
    pub delegate_id: Vec<u32>,
    /// Delegate id to global id, ascending.
    pub delegates: Vec<u64>,
}

impl VertexClassification {
    pub fn d(&self) -> usize {
        self.delegates.len()
    }

    pub fn n(&self) -> u64 {
        self.out_degree.len() as u64
    }

    #[inline]
    pub fn is_delegate(&self, v: u64) -> bool {
        self.delegate_id[v as usize] != NOT_DELEGATE
    }
}

pub fn classify_vertices(degrees: &[u64], theta: u64) -> Result<VertexClassification> {
    let mut delegate_id = vec![NOT_DELEGATE; degrees.len()];
    let mut delegates = Vec::new();
    for (v, &deg) in degrees.iter().enumerate() {
        if deg > theta {
            if delegates.len() >= NOT_DELEGATE as usize {
                return Err(Error::Capacity("delegate count exceeds 32-bit ids".into()));
            }
            delegate_id[v] = delegates.len() as u32;
            delegates.push(v as u64);
        }
    }
    Ok(VertexClassification {
        theta,
        out_degree: degrees.to_vec(),
        delegate_id,
        delegates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Nn,
    Nd,
    Dn,
    Dd,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [EdgeKind::Nn, EdgeKind::Nd, EdgeKind::Dn, EdgeKind::Dd];

    pub fn of(src_delegate: bool, dst_delegate: bool) -> Self {
        match (src_delegate, dst_delegate) {
            (false, false) => EdgeKind::Nn,
            (false, true) => EdgeKind::Nd,
            (true, false) => EdgeKind::Dn,
            (true, true) => EdgeKind::Dd,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EdgeKind::Nn => "nn",
            EdgeKind::Nd => "nd",
            EdgeKind::Dn => "dn",
            EdgeKind::Dd => "dd",
        }
    }
}

/// Per-worker edges, still in global ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkerBuckets {
    pub nn: Vec<(u64, u64)>,
    pub nd: Vec<(u64, u64)>,
    pub dn: Vec<(u64, u64)>,
    pub dd: Vec<(u64, u64)>,
}

impl WorkerBuckets {
    pub fn get(&self, kind: EdgeKind) -> &Vec<(u64, u64)> {
        match kind {
            EdgeKind::Nn => &self.nn,
            EdgeKind::Nd => &self.nd,
            EdgeKind::Dn => &self.dn,
            EdgeKind::Dd => &self.dd,
        }
    }

    fn get_mut(&mut self, kind: EdgeKind) -> &mut Vec<(u64, u64)> {
        match kind {
            EdgeKind::Nn => &mut self.nn,
            EdgeKind::Nd => &mut self.nd,
            EdgeKind::Dn => &mut self.dn,
            EdgeKind::Dd => &mut self.dd,
        }
    }

    pub fn total(&self) -> usize {
        self.nn.len() + self.nd.len() + self.dn.len() + self.dd.len()
    }

    fn append(&mut self, other: &mut WorkerBuckets) {
        for kind in EdgeKind::ALL {
            self.get_mut(kind).append(other.get_mut(kind));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeBuckets {
    pub shape: ClusterShape,
    pub workers: Vec<WorkerBuckets>,
}

impl EdgeBuckets {
    pub fn total(&self) -> usize {
        self.workers.iter().map(WorkerBuckets::total).sum()
    }

    pub fn kind_total(&self, kind: EdgeKind) -> usize {
        self.workers.iter().map(|w| w.get(kind).len()).sum()
    }
}

/// Worker and kind for one edge.
#[inline]
pub fn route_edge(u: u64, v: u64, cls: &VertexClassification, shape: &ClusterShape) -> (usize, EdgeKind) {
    let du = cls.is_delegate(u);
    let dv = cls.is_delegate(v);
    let owner = if !du {
        u
    } else if !dv {
        v
    } else {
        let (deg_u, deg_v) = (cls.out_degree[u as usize], cls.out_degree[v as usize]);
        match deg_u.cmp(&deg_v) {
            std::cmp::Ordering::Less => u,
            std::cmp::Ordering::Greater => v,
            std::cmp::Ordering::Equal => u.min(v),
        }
    };
    (shape.home(owner), EdgeKind::of(du, dv))
}

pub fn distribute_edges(g: &EdgeList, cls: &VertexClassification, shape: &ClusterShape) -> EdgeBuckets {
    let p = shape.p();
    let chunks: Vec<Vec<WorkerBuckets>> = g
        .edges
        .par_chunks(1 << 16)
        .map(|chunk| {
            let mut out = vec![WorkerBuckets::default(); p];
            for &(u, v) in chunk {
                let (w, kind) = route_edge(u, v, cls, shape);
                out[w].get_mut(kind).push((u, v));
            }
            out
        })
        .collect();
    let mut workers = vec![WorkerBuckets::default(); p];
    for mut chunk in chunks {
        for (dst, src) in workers.iter_mut().zip(chunk.iter_mut()) {
            dst.append(src);
        }
    }
    EdgeBuckets {
        shape: *shape,
        workers,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub edges_per_worker: Vec<usize>,
    pub normals_per_worker: Vec<usize>,
    pub delegates_per_worker: Vec<usize>,
    pub normal_bound: u64,
    pub max_edges: usize,
    pub min_edges: usize,
    /// `(max - min) / mean` of edges per worker.
    pub imbalance: f64,
}

/// Checks reversal closure of the delegate-touching edges on each worker,
/// ownership and size bounds of the local vertex sets, and reports balance.
pub fn verify_buckets(buckets: &EdgeBuckets, cls: &VertexClassification, shape: &ClusterShape) -> Result<BucketReport> {
    if buckets.workers.len() != shape.p() {
        return Err(Error::Structural(format!(
            "{} bucket sets for {} workers",
            buckets.workers.len(),
            shape.p()
        )));
    }
    let n = cls.n();
    let normal_bound = n.div_ceil(shape.p() as u64);
    let mut normals_per_worker = Vec::with_capacity(shape.p());
    let mut delegates_per_worker = Vec::with_capacity(shape.p());

    for (w, wb) in buckets.workers.iter().enumerate() {
        let mut balance: HashMap<(u64, u64), i64> = HashMap::new();
        for kind in [EdgeKind::Nd, EdgeKind::Dn, EdgeKind::Dd] {
            for &(u, v) in wb.get(kind) {
                let expected = EdgeKind::of(cls.is_delegate(u), cls.is_delegate(v));
                if expected != kind {
                    return Err(Error::Verification {
                        worker: w,
                        message: format!("edge ({u}, {v}) stored as {} but is {}", kind.name(), expected.name()),
                    });
                }
                if u != v {
                    *balance.entry((u.min(v), u.max(v))).or_default() += if u < v { 1 } else { -1 };
                }
            }
        }
        if let Some((&(a, b), _)) = balance.iter().filter(|(_, &c)| c != 0).min() {
            return Err(Error::Verification {
                worker: w,
                message: format!("edges ({a}, {b}) and ({b}, {a}) have different multiplicities"),
            });
        }

        let mut normals = std::collections::HashSet::new();
        let mut delegates = std::collections::HashSet::new();
        let local = wb
            .nn
            .iter()
            .map(|&(u, _)| u)
            .chain(wb.nd.iter().map(|&(u, _)| u))
            .chain(wb.dn.iter().map(|&(_, v)| v));
        for v in local {
            if cls.is_delegate(v) {
                return Err(Error::Verification {
                    worker: w,
                    message: format!("delegate {v} in a normal endpoint slot"),
                });
            }
            if shape.home(v) != w {
                return Err(Error::Verification {
                    worker: w,
                    message: format!("normal vertex {v} is owned by worker {}", shape.home(v)),
                });
            }
            normals.insert(v);
        }
        for &(u, v) in wb.nd.iter().chain(&wb.dn).chain(&wb.dd) {
            for x in [u, v] {
                if cls.is_delegate(x) {
                    delegates.insert(x);
                }
            }
        }
        if normals.len() as u64 > normal_bound {
            return Err(Error::Verification {
                worker: w,
                message: format!("{} local normal vertices exceed bound {normal_bound}", normals.len()),
            });
        }
        if delegates.len() > cls.d() {
            return Err(Error::Verification {
                worker: w,
                message: format!("{} delegates exceed d = {}", delegates.len(), cls.d()),
            });
        }
        normals_per_worker.push(normals.len());
        delegates_per_worker.push(delegates.len());
    }

    let edges_per_worker: Vec<usize> = buckets.workers.iter().map(WorkerBuckets::total).collect();
    let max_edges = edges_per_worker.iter().copied().max().unwrap_or(0);
    let min_edges = edges_per_worker.iter().copied().min().unwrap_or(0);
    let total: usize = edges_per_worker.iter().sum();
    let mean = total as f64 / shape.p() as f64;
    let imbalance = if mean > 0.0 {
        (max_edges - min_edges) as f64 / mean
    } else {
        0.0
    };
    Ok(BucketReport {
        edges_per_worker,
        normals_per_worker,
        delegates_per_worker,
        normal_bound,
        max_edges,
        min_edges,
        imbalance,
    })
}

fn local_u32(shape: &ClusterShape, v: u64) -> Result<u32> {
    u32::try_from(shape.local_id(v)).map_err(|_| Error::Capacity(format!("local id of vertex {v} exceeds 32 bits")))
}

/// Builds the four CSR subgraphs and the backward-direction source sets for
/// every worker.
pub fn build_partitioned_graph(
    buckets: &EdgeBuckets,
    cls: &VertexClassification,
    shape: &ClusterShape,
) -> Result<PartitionedGraph> {
    let n = cls.n();
    let d = cls.d();
    if buckets.workers.len() != shape.p() {
        return Err(Error::Structural("bucket count does not match shape".into()));
    }
    let workers = buckets
        .workers
        .par_iter()
        .enumerate()
        .map(|(w, wb)| -> Result<WorkerGraph> {
            let local_count = shape.owned_count(w, n);
            if local_count > u32::MAX as u64 {
                return Err(Error::Capacity(format!(
                    "worker {w} owns {local_count} vertices, more than 32-bit ids allow"
                )));
            }
            let rows = local_count as usize;
            let did = |v: u64| cls.delegate_id[v as usize];

            let nn = wb
                .nn
                .iter()
                .map(|&(u, v)| Ok((local_u32(shape, u)?, v)))
                .collect::<Result<Vec<_>>>()?;
            let nd = wb
                .nd
                .iter()
                .map(|&(u, v)| Ok((local_u32(shape, u)?, did(v))))
                .collect::<Result<Vec<_>>>()?;
            let dn = wb
                .dn
                .iter()
                .map(|&(u, v)| Ok((did(u), local_u32(shape, v)?)))
                .collect::<Result<Vec<_>>>()?;
            let dd: Vec<(u32, u32)> = wb.dd.iter().map(|&(u, v)| (did(u), did(v))).collect();

            let nn = Csr::from_pairs(EdgeKind::Nn, rows, &nn)?;
            let nd = Csr::from_pairs(EdgeKind::Nd, rows, &nd)?;
            let dn = Csr::from_pairs(EdgeKind::Dn, d, &dn)?;
            let dd = Csr::from_pairs(EdgeKind::Dd, d, &dd)?;

            let nd_sources: Vec<u32> = (0..rows as u32).filter(|&u| nd.degree(u as usize) > 0).collect();
            let mut dn_source_mask = Bitmask::new(d);
            let mut dd_source_mask = Bitmask::new(d);
            for x in 0..d {
                if dn.degree(x) > 0 {
                    dn_source_mask.set(x);
                }
                if dd.degree(x) > 0 {
                    dd_source_mask.set(x);
                }
            }
            Ok(WorkerGraph {
                worker: w,
                local_count: local_count as u32,
                nn,
                nd,
                dn,
                dd,
                nd_sources,
                dn_source_mask,
                dd_source_mask,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PartitionedGraph {
        shape: *shape,
        n,
        theta: cls.theta,
        delegates: cls.delegates.clone(),
        workers,
    })
}

/// Degree count, classification, distribution, verification and CSR build
/// in one call.
pub fn partition(g: &EdgeList, theta: u64, shape: &ClusterShape) -> Result<(PartitionedGraph, BucketReport)> {
    let degrees = compute_out_degrees(g);
    let cls = classify_vertices(&degrees, theta)?;
    let buckets = distribute_edges(g, &cls, shape);
    let report = verify_buckets(&buckets, &cls, shape)?;
    let pg = build_partitioned_graph(&buckets, &cls, shape)?;
    Ok((pg, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(leaves: u64) -> EdgeList {
        EdgeList::new(leaves + 1, (1..=leaves).map(|l| (0, l)).collect()).symmetrize()
    }

    #[test]
    fn out_degrees() {
        let g = EdgeList::new(3, vec![(0, 1), (0, 2)]);
        assert_eq!(compute_out_degrees(&g), vec![2, 0, 0]);
        let s = star(4);
        let mut indeg = vec![0u64; 5];
        for &(_, v) in &s.edges {
            indeg[v as usize] += 1;
        }
        assert_eq!(compute_out_degrees(&s), indeg);
    }

    #[test]
    fn fig2_style_delegates() {
        let mut deg = vec![1u64; 12];
        deg[7] = 6;
        deg[8] = 7;
        let cls = classify_vertices(&deg, 5).unwrap();
        assert_eq!(cls.delegates, vec![7, 8]);
        assert_eq!(cls.delegate_id[7], 0);
        assert_eq!(cls.delegate_id[8], 1);
    }

    #[test]
    fn theta_above_max_has_no_delegates() {
        let deg = vec![3, 9, 2];
        assert_eq!(classify_vertices(&deg, 9).unwrap().d(), 0);
    }

    #[test]
    fn star_center_only_delegate() {
        let s = star(10);
        let cls = classify_vertices(&compute_out_degrees(&s), 5).unwrap();
        assert_eq!(cls.delegates, vec![0]);
    }

    #[test]
    fn home_rule() {
        let shape = ClusterShape::new(3, 2).unwrap();
        assert_eq!(shape.rank_of(5), 2);
        assert_eq!(shape.gpu_of(5), 1);
        assert_eq!(shape.home(5), shape.worker(2, 1));
    }

    #[test]
    fn local_ids_dense_and_invertible() {
        let shape = ClusterShape::new(3, 2).unwrap();
        let n = 50u64;
        let mut seen = vec![Vec::new(); shape.p()];
        for v in 0..n {
            let w = shape.home(v);
            let l = shape.local_id(v);
            assert_eq!(shape.global_id(w, l), v);
            seen[w].push(l);
        }
        for (w, ids) in seen.iter().enumerate() {
            let expect: Vec<u64> = (0..shape.owned_count(w, n)).collect();
            assert_eq!(ids, &expect, "worker {w}");
        }
    }

    #[test]
    fn single_worker_still_splits_kinds() {
        let s = star(10);
        let cls = classify_vertices(&compute_out_degrees(&s), 5).unwrap();
        let b = distribute_edges(&s, &cls, &ClusterShape::single());
        assert_eq!(b.workers.len(), 1);
        assert_eq!(b.workers[0].dn.len(), 10);
        assert_eq!(b.workers[0].nd.len(), 10);
        assert!(b.workers[0].nn.is_empty());
        verify_buckets(&b, &cls, &ClusterShape::single()).unwrap();
    }

    #[test]
    fn self_loop_delegate_goes_to_own_home() {
        let mut edges: Vec<(u64, u64)> = (1..=6).map(|l| (4, l)).collect();
        edges.push((4, 4));
        let g = EdgeList::new(8, edges).symmetrize();
        let cls = classify_vertices(&compute_out_degrees(&g), 3).unwrap();
        let shape = ClusterShape::new(2, 2).unwrap();
        let (w, kind) = route_edge(4, 4, &cls, &shape);
        assert_eq!(kind, EdgeKind::Dd);
        assert_eq!(w, shape.home(4));
    }

    #[test]
    fn asymmetric_input_fails_verification() {
        let mut edges: Vec<(u64, u64)> = (1..=6).map(|l| (0, l)).collect();
        edges.extend((1..=6).map(|l| (l, 0)));
        edges.push((3, 0));
        let g = EdgeList::new(7, edges);
        let cls = classify_vertices(&compute_out_degrees(&g), 5).unwrap();
        let shape = ClusterShape::new(2, 1).unwrap();
        let b = distribute_edges(&g, &cls, &shape);
        let err = verify_buckets(&b, &cls, &shape).unwrap_err();
        assert!(matches!(err, Error::Verification { .. }), "{err}");
    }

    #[test]
    fn shape_parsing() {
        let s: ClusterShape = "4x2x2".parse().unwrap();
        assert_eq!((s.p_rank, s.p_gpu), (8, 2));
        assert!("4x2".parse::<ClusterShape>().is_err());
        assert!("0x1x1".parse::<ClusterShape>().is_err());
    }

    #[test]
    fn suggested_theta_curve() {
        assert_eq!(suggested_theta(30), 64);
        assert_eq!(suggested_theta(32), 128);
        assert_eq!(suggested_theta(12), 16);
        assert_eq!(suggested_theta(50), 512);
        for s in 0..60 {
            assert!((16..=512).contains(&suggested_theta(s)));
        }
    }

    #[test]
    fn empty_buckets_build_empty_csrs() {
        let g = EdgeList::new(8, vec![]);
        let (pg, _) = partition(&g, 4, &ClusterShape::new(2, 1).unwrap()).unwrap();
        for w in &pg.workers {
            assert!(w.nn.col_indices.is_empty() && w.dd.col_indices.is_empty());
            assert!(w.nn.row_offsets.iter().all(|&o| o == 0));
            assert!(w.nd.row_offsets.iter().all(|&o| o == 0));
            assert_eq!(w.nn.rows(), 4);
        }
    }

    #[test]
    fn single_dn_edge_construction() {
        // Delegate 0 (global 0) with edges to many normals; worker 0 of a
        // single-worker shape sees dn row 0 containing every local normal.
        let mut edges: Vec<(u64, u64)> = (1..=3).map(|l| (0, l)).collect();
        edges.extend((1..=3).map(|l| (l, 0)));
        let g = EdgeList::new(4, edges);
        let (pg, _) = partition(&g, 2, &ClusterShape::single()).unwrap();
        let w = &pg.workers[0];
        assert_eq!(w.dn.row(0), &[1, 2, 3]);
        assert_eq!(w.nd_sources, vec![1, 2, 3]);
        assert!(w.dn_source_mask.get(0));
        assert!(!w.dd_source_mask.get(0));
    }
}
