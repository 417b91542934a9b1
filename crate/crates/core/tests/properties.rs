use std::collections::BTreeMap;

use delegate_bfs::comm::{exchange_normal_vertices, reduce_delegate_masks, DelegateMask, ExchangeOptions, Outbox};
use delegate_bfs::edge_list::{EdgeFormat, EdgeList};
use delegate_bfs::engine::{run_bfs, BfsOptions, Mode};
use delegate_bfs::oracle::{oracle_distribute, reference_bfs, OracleKind};
use delegate_bfs::partition::{classify_vertices, compute_out_degrees, partition, route_edge, ClusterShape, EdgeKind};
use delegate_bfs::store::PartitionedGraph;
use delegate_bfs::traversal::DirectionFactors;
use proptest::prelude::*;

fn symmetric_graph() -> impl Strategy<Value = EdgeList> {
    (1u64..160).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..500).prop_map(move |edges| EdgeList::new(n, edges).symmetrize())
    })
}

fn cluster() -> impl Strategy<Value = ClusterShape> {
    (1usize..5, 1usize..4).prop_map(|(r, g)| ClusterShape::new(r, g).unwrap())
}

fn sorted(mut v: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    v.sort_unstable();
    v
}

fn opts(mode: Mode, source: u64) -> BfsOptions {
    BfsOptions {
        mode,
        source,
        ..BfsOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn router_agrees_with_oracle(g in symmetric_graph(), theta in 0u64..12, shape in cluster()) {
        let deg = compute_out_degrees(&g);
        let cls = classify_vertices(&deg, theta).unwrap();
        for &(u, v) in &g.edges {
            let (w, kind) = route_edge(u, v, &cls, &shape);
            let (r, gpu, okind) = oracle_distribute((u, v), &deg, theta, shape.p_rank as u64, shape.p_gpu as u64);
            let okind = match okind {
                OracleKind::NormalNormal => EdgeKind::Nn,
                OracleKind::NormalDelegate => EdgeKind::Nd,
                OracleKind::DelegateNormal => EdgeKind::Dn,
                OracleKind::DelegateDelegate => EdgeKind::Dd,
            };
            prop_assert_eq!(shape.rank_gpu(w), (r as usize, gpu as usize));
            prop_assert_eq!(kind, okind);
        }
    }

    #[test]
    fn partition_reconstructs_edges(g in symmetric_graph(), theta in 0u64..12, shape in cluster()) {
        let (pg, report) = partition(&g, theta, &shape).unwrap();
        pg.check().unwrap();
        prop_assert_eq!(sorted(pg.reconstruct_edges()), sorted(g.edges.clone()));
        prop_assert_eq!(report.edges_per_worker.iter().sum::<usize>(), g.len());
        let footprint = pg.memory_footprint();
        let deg = compute_out_degrees(&g);
        let e_nn = g.edges.iter().filter(|&&(u, v)| deg[u as usize] <= theta && deg[v as usize] <= theta).count() as u64;
        let d = deg.iter().filter(|&&x| x > theta).count() as u64;
        let expected = 8 * g.n + 8 * d * shape.p() as u64 + 4 * g.len() as u64 + 4 * e_nn;
        prop_assert_eq!(footprint.total_bytes, expected);
    }

    #[test]
    fn levels_match_reference(
        g in symmetric_graph(),
        theta in 0u64..12,
        shape in cluster(),
        source_pick in any::<u64>(),
        dobfs in any::<bool>(),
        l in any::<bool>(),
        u in any::<bool>(),
    ) {
        let source = source_pick % g.n;
        let (pg, _) = partition(&g, theta, &shape).unwrap();
        let run = run_bfs(&pg, &BfsOptions {
            local_all2all: l,
            uniquify: u,
            ..opts(if dobfs { Mode::Dobfs } else { Mode::Bfs }, source)
        }).unwrap();
        prop_assert_eq!(run.levels, reference_bfs(&g, source));
    }

    #[test]
    fn levels_independent_of_shape_and_factors(
        g in symmetric_graph(),
        theta in 0u64..12,
        a in cluster(),
        b in cluster(),
        f in (0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0),
        source_pick in any::<u64>(),
    ) {
        let source = source_pick % g.n;
        let (pa, _) = partition(&g, theta, &a).unwrap();
        let (pb, _) = partition(&g, theta, &b).unwrap();
        let first = run_bfs(&pa, &opts(Mode::Dobfs, source)).unwrap();
        let second = run_bfs(&pb, &BfsOptions {
            factors: DirectionFactors::from_factor0(f.0, f.1, f.2),
            ..opts(Mode::Dobfs, source)
        }).unwrap();
        prop_assert_eq!(first.levels_digest(), second.levels_digest());
    }

    #[test]
    fn uniquify_never_adds_traffic(g in symmetric_graph(), theta in 0u64..12, shape in cluster(), source_pick in any::<u64>(), l in any::<bool>()) {
        let source = source_pick % g.n;
        let (pg, _) = partition(&g, theta, &shape).unwrap();
        let base = BfsOptions { local_all2all: l, ..opts(Mode::Bfs, source) };
        let off = run_bfs(&pg, &base).unwrap();
        let on = run_bfs(&pg, &BfsOptions { uniquify: true, ..base }).unwrap();
        prop_assert!(on.comm.normal_bytes <= off.comm.normal_bytes);
        prop_assert!(off.comm.normal_bytes <= 4 * pg.kind_count(EdgeKind::Nn));
        prop_assert_eq!(on.levels, off.levels);
    }

    #[test]
    fn exchange_delivers_every_record_to_its_owner(
        shape in cluster(),
        records in prop::collection::vec((0usize..12, 0u64..400), 0..300),
        l in any::<bool>(),
        u in any::<bool>(),
    ) {
        let p = shape.p();
        let mut outboxes: Vec<Outbox> = (0..p).map(|_| Outbox::new(p)).collect();
        let mut expected: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for &(src, v) in &records {
            outboxes[src % p].push(&shape, v);
            expected.entry(shape.home(v)).or_default().push(shape.local_id(v) as u32);
        }
        let (inboxes, stats) = exchange_normal_vertices(outboxes, &shape, ExchangeOptions { local_all2all: l, uniquify: u }).unwrap();
        prop_assert_eq!(stats.records_sent, records.len() as u64);
        for (w, inbox) in inboxes.into_iter().enumerate() {
            let mut got = inbox;
            got.sort_unstable();
            let mut want = expected.remove(&w).unwrap_or_default();
            want.sort_unstable();
            if u {
                // Duplicates may survive only when they arrive from different senders.
                want.dedup();
                let mut distinct = got.clone();
                distinct.dedup();
                prop_assert_eq!(distinct, want);
            } else {
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn reduction_is_bitwise_or(shape in cluster(), d in 0usize..150, bits in prop::collection::vec((0usize..12, 0usize..150), 0..60)) {
        let p = shape.p();
        let mut masks: Vec<DelegateMask> = (0..p).map(|_| DelegateMask::new(d)).collect();
        let mut want = vec![false; d];
        for &(w, x) in &bits {
            if x < d {
                masks[w % p].bits.set(x);
                masks[w % p].dirty = true;
                want[x] = true;
            }
        }
        let r = reduce_delegate_masks(&masks, &shape).unwrap();
        let any_dirty = masks.iter().any(|m| m.dirty);
        prop_assert_eq!(r.performed, any_dirty);
        prop_assert_eq!(r.wire_bits, if any_dirty { 2 * d as u64 * shape.p_rank as u64 } else { 0 });
        for (x, &w) in want.iter().enumerate() {
            prop_assert_eq!(r.mask.get(x), w);
        }
    }

    #[test]
    fn edge_list_round_trips(g in symmetric_graph(), binary in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let (path, format) = if binary {
            (dir.path().join("g.bin"), EdgeFormat::Binary)
        } else {
            (dir.path().join("g.txt"), EdgeFormat::Text)
        };
        g.write(&path, format).unwrap();
        let back = EdgeList::load(&path, format).unwrap();
        prop_assert_eq!(back.edges, g.edges);
        prop_assert_eq!(back.n, g.n);
    }

    #[test]
    fn saved_partition_loads_identically(g in symmetric_graph(), theta in 0u64..12, shape in cluster()) {
        let (pg, _) = partition(&g, theta, &shape).unwrap();
        let dir = tempfile::tempdir().unwrap();
        pg.save(dir.path()).unwrap();
        let back = PartitionedGraph::load(dir.path()).unwrap();
        prop_assert_eq!(back, pg);
    }
}
