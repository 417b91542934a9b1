//! Simulated two-tier communication with wire-volume accounting.
//!
//! Delegate visited masks are combined with a two-phase OR reduction (GPUs
//! of a rank, then ranks). Normal vertices discovered through nn edges are
//! binned by owning worker and delivered point-to-point, optionally after a
//! rank-local regrouping (local all2all) and per-bin deduplication
//! (uniquify).
//!
//! Wire volume follows the model, not in-memory sizes: a performed mask
//! reduction costs `2 * d * p_rank` bits, a normal vertex record costs 4
//! bytes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::bitmask::Bitmask;
use crate::error::{Error, Result};
use crate::partition::ClusterShape;

pub const NORMAL_RECORD_BYTES: u64 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelegateMask {
    pub bits: Bitmask,
    /// Set when this worker added bits during the current iteration.
    pub dirty: bool,
}

impl DelegateMask {
    pub fn new(d: usize) -> Self {
        DelegateMask {
            bits: Bitmask::new(d),
            dirty: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub mask: Bitmask,
    pub performed: bool,
    pub wire_bits: u64,
}

/// Global OR of the per-worker masks, computed rank-locally first and then
/// across ranks. Skipped (no traffic) when no worker is dirty, in which case
/// every worker already holds the agreed mask and worker 0's is returned.
pub fn reduce_delegate_masks(masks: &[DelegateMask], shape: &ClusterShape) -> Result<Reduction> {
    if masks.len() != shape.p() {
        return Err(Error::Structural(format!(
            "{} masks for {} workers",
            masks.len(),
            shape.p()
        )));
    }
    let d = masks[0].bits.len();
    if let Some((w, m)) = masks.iter().enumerate().find(|(_, m)| m.bits.len() != d) {
        return Err(Error::Structural(format!(
            "worker {w} mask has {} bits, expected {d}",
            m.bits.len()
        )));
    }
    if !masks.iter().any(|m| m.dirty) {
        return Ok(Reduction {
            mask: masks[0].bits.clone(),
            performed: false,
            wire_bits: 0,
        });
    }

    // Local phase: every GPU of a rank pushes its mask to GPU 0.
    let rank_masks: Vec<Bitmask> = (0..shape.p_rank)
        .map(|rank| {
            let mut acc = masks[shape.worker(rank, 0)].bits.clone();
            for gpu in 1..shape.p_gpu {
                acc.or_assign(&masks[shape.worker(rank, gpu)].bits);
            }
            acc
        })
        .collect();

    // Global phase across ranks.
    let mut global = rank_masks[0].clone();
    for m in &rank_masks[1..] {
        global.or_assign(m);
    }

    Ok(Reduction {
        mask: global,
        performed: true,
        wire_bits: 2 * d as u64 * shape.p_rank as u64,
    })
}

/// Outgoing normal-vertex records of one worker, one bin per destination
/// worker, global ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outbox {
    pub bins: Vec<Vec<u64>>,
}

impl Outbox {
    pub fn new(p: usize) -> Self {
        Outbox { bins: vec![Vec::new(); p] }
    }

    #[inline]
    pub fn push(&mut self, shape: &ClusterShape, v: u64) {
        self.bins[shape.home(v)].push(v);
    }

    pub fn len(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(Vec::is_empty)
    }
}

/// Received records, already converted to receiver-local ids.
pub type Inbox = Vec<u32>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeOptions {
    pub local_all2all: bool,
    pub uniquify: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeStats {
    /// Records handed to the exchange by the visits.
    pub records_sent: u64,
    /// Records arriving at their owner (after uniquify).
    pub records_delivered: u64,
    /// Point-to-point bytes between distinct workers.
    pub normal_bytes: u64,
    /// Bytes moved between GPUs of one rank by local all2all.
    pub local_bytes: u64,
    /// Non-empty point-to-point messages between distinct workers.
    pub message_count: u64,
    /// Sender/receiver channels the point-to-point phase serves.
    pub pair_count: u64,
}

/// Rank-local regrouping: every record bound for `(r', g)` is first moved to
/// GPU `g` of the sender's rank, so the remote phase only connects equal GPU
/// indices. Returns the moved byte count alongside.
pub fn local_all2all(outboxes: Vec<Outbox>, shape: &ClusterShape) -> (Vec<Outbox>, u64) {
    let p = shape.p();
    if shape.p_gpu == 1 {
        return (outboxes, 0);
    }
    let mut regrouped: Vec<Outbox> = (0..p).map(|_| Outbox::new(p)).collect();
    let mut moved = 0u64;
    for (src, outbox) in outboxes.into_iter().enumerate() {
        let (rank, src_gpu) = shape.rank_gpu(src);
        for (dst, mut bin) in outbox.bins.into_iter().enumerate() {
            if bin.is_empty() {
                continue;
            }
            let (_, dst_gpu) = shape.rank_gpu(dst);
            let gatherer = shape.worker(rank, dst_gpu);
            if dst_gpu != src_gpu {
                moved += bin.len() as u64 * NORMAL_RECORD_BYTES;
            }
            regrouped[gatherer].bins[dst].append(&mut bin);
        }
    }
    (regrouped, moved)
}

/// Drops repeated ids from a bin, keeping first occurrences in order.
pub fn uniquify(bin: &mut Vec<u64>) {
    let mut seen = HashSet::with_capacity(bin.len());
    bin.retain(|v| seen.insert(*v));
}

/// Delivers every record exactly once to its owner and converts it to the
/// owner's local id.
pub fn exchange_normal_vertices(
    outboxes: Vec<Outbox>,
    shape: &ClusterShape,
    opts: ExchangeOptions,
) -> Result<(Vec<Inbox>, ExchangeStats)> {
    let p = shape.p();
    if outboxes.len() != p || outboxes.iter().any(|o| o.bins.len() != p) {
        return Err(Error::Structural("outbox shape does not match the cluster".into()));
    }
    let mut stats = ExchangeStats {
        records_sent: outboxes.iter().map(|o| o.len() as u64).sum(),
        ..Default::default()
    };
    let mut outboxes = if opts.local_all2all {
        let (regrouped, moved) = local_all2all(outboxes, shape);
        stats.local_bytes = moved;
        regrouped
    } else {
        outboxes
    };
    if opts.uniquify {
        outboxes.iter_mut().flat_map(|o| o.bins.iter_mut()).for_each(uniquify);
    }

    let mut inboxes: Vec<Inbox> = vec![Vec::new(); p];
    for (src, outbox) in outboxes.into_iter().enumerate() {
        let (_, src_gpu) = shape.rank_gpu(src);
        for (dst, bin) in outbox.bins.into_iter().enumerate() {
            if opts.local_all2all && shape.rank_gpu(dst).1 != src_gpu {
                if !bin.is_empty() {
                    return Err(Error::Structural(format!(
                        "worker {src} holds records for {dst} after local all2all"
                    )));
                }
                continue;
            }
            stats.pair_count += 1;
            if bin.is_empty() {
                continue;
            }
            if src != dst {
                stats.message_count += 1;
                stats.normal_bytes += bin.len() as u64 * NORMAL_RECORD_BYTES;
            }
            stats.records_delivered += bin.len() as u64;
            let inbox = &mut inboxes[dst];
            inbox.reserve(bin.len());
            for v in bin {
                let owner = shape.home(v);
                if owner != dst {
                    return Err(Error::Routing {
                        vertex: v,
                        sent_to: dst,
                        owner,
                    });
                }
                let local = shape.local_id(v);
                inbox.push(u32::try_from(local).map_err(|_| Error::Capacity(format!("local id {local} exceeds 32 bits")))?);
            }
        }
    }
    Ok((inboxes, stats))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationComm {
    pub reduction_performed: bool,
    pub mask_bits: u64,
    pub mask_bytes: f64,
    #[serde(flatten)]
    pub exchange: ExchangeStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommStats {
    pub per_iteration: Vec<IterationComm>,
    pub mask_bits: u64,
    pub mask_bytes: f64,
    pub normal_bytes: u64,
    pub local_bytes: u64,
    pub message_count: u64,
    pub pair_count: u64,
    pub records_sent: u64,
    pub records_delivered: u64,
    /// Iterations that performed a delegate mask reduction.
    pub s_prime: u64,
}

impl CommStats {
    pub fn record(&mut self, it: IterationComm) {
        self.mask_bits += it.mask_bits;
        self.mask_bytes = self.mask_bits as f64 / 8.0;
        self.normal_bytes += it.exchange.normal_bytes;
        self.local_bytes += it.exchange.local_bytes;
        self.message_count += it.exchange.message_count;
        self.pair_count += it.exchange.pair_count;
        self.records_sent += it.exchange.records_sent;
        self.records_delivered += it.exchange.records_delivered;
        self.s_prime += it.reduction_performed as u64;
        self.per_iteration.push(it);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(r: usize, g: usize) -> ClusterShape {
        ClusterShape::new(r, g).unwrap()
    }

    #[test]
    fn zero_masks_skip_reduction() {
        let s = shape(2, 2);
        let masks = vec![DelegateMask::new(10); 4];
        let r = reduce_delegate_masks(&masks, &s).unwrap();
        assert!(!r.performed);
        assert_eq!(r.wire_bits, 0);
        assert_eq!(r.mask.count_ones(), 0);
    }

    #[test]
    fn one_bit_reaches_everyone() {
        let s = shape(2, 2);
        let mut masks = vec![DelegateMask::new(10); 4];
        masks[3].bits.set(7);
        masks[3].dirty = true;
        let r = reduce_delegate_masks(&masks, &s).unwrap();
        assert!(r.performed);
        assert_eq!(r.mask.iter_ones().collect::<Vec<_>>(), vec![7]);
        assert_eq!(r.wire_bits, 2 * 10 * 2);
    }

    #[test]
    fn length_mismatch() {
        let s = shape(1, 2);
        let masks = vec![DelegateMask::new(10), DelegateMask::new(11)];
        assert!(matches!(reduce_delegate_masks(&masks, &s), Err(Error::Structural(_))));
    }

    #[test]
    fn empty_exchange() {
        let s = shape(2, 2);
        let (inboxes, st) = exchange_normal_vertices(vec![Outbox::new(4); 4], &s, ExchangeOptions::default()).unwrap();
        assert!(inboxes.iter().all(Vec::is_empty));
        assert_eq!(st.normal_bytes, 0);
        assert_eq!(st.pair_count, 16);
    }

    #[test]
    fn misrouted_record() {
        let s = shape(2, 1);
        let mut outboxes = vec![Outbox::new(2); 2];
        outboxes[0].bins[1].push(4); // 4 is owned by worker 0
        let err = exchange_normal_vertices(outboxes, &s, ExchangeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Routing { vertex: 4, sent_to: 1, owner: 0 }));
    }

    #[test]
    fn uniquify_bins() {
        let mut b = vec![5, 5, 9];
        uniquify(&mut b);
        assert_eq!(b, vec![5, 9]);
        let mut b = vec![3, 1, 2];
        uniquify(&mut b);
        assert_eq!(b, vec![3, 1, 2]);
    }

    #[test]
    fn local_all2all_noop_single_gpu() {
        let s = shape(3, 1);
        let mut outboxes = vec![Outbox::new(3); 3];
        outboxes[0].push(&s, 4);
        let (after, moved) = local_all2all(outboxes.clone(), &s);
        assert_eq!(after, outboxes);
        assert_eq!(moved, 0);
    }

    #[test]
    fn local_ids_on_delivery() {
        let s = shape(2, 2);
        let mut outboxes = vec![Outbox::new(4); 4];
        for v in [0u64, 5, 9, 13] {
            outboxes[0].push(&s, v);
        }
        let (inboxes, st) = exchange_normal_vertices(outboxes, &s, ExchangeOptions::default()).unwrap();
        // 5 -> rank 1, gpu 0 -> worker 2, local 1; 9 and 13 likewise.
        assert_eq!(inboxes[0], vec![0]);
        assert_eq!(inboxes[2], vec![1, 2, 3]);
        assert_eq!(st.normal_bytes, 12);
        assert_eq!(st.message_count, 1);
    }
}
