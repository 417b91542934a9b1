//! Graph500-style RMAT generation.
//!
//! Every edge is drawn independently from its own ChaCha8 stream (stream
//! index = edge index, key = seed), so the output is a pure function of the
//! parameters no matter how the work is split across threads. One uniform
//! `f64` is drawn per recursion level; no per-level noise is applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge_list::EdgeList;
use crate::error::{Error, Result};

pub const DEFAULT_SCALE_CAP: u32 = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmatParams {
    pub scale: u32,
    pub edge_factor: u64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_quad: f64,
    pub seed: u64,
    pub scale_cap: u32,
}

impl Default for RmatParams {
    fn default() -> Self {
        RmatParams {
            scale: 10,
            edge_factor: 16,
            a: 0.57,
            b: 0.19,
            c: 0.19,
            d_quad: 0.05,
            seed: 1,
            scale_cap: DEFAULT_SCALE_CAP,
        }
    }
}

impl RmatParams {
    pub fn with_scale(scale: u32, seed: u64) -> Self {
        RmatParams {
            scale,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale > self.scale_cap {
            return Err(Error::Resource(format!(
                "RMAT scale {} exceeds the configured cap of {}",
                self.scale, self.scale_cap
            )));
        }
        if self.scale >= 63 {
            return Err(Error::Resource(format!("RMAT scale {} is not addressable", self.scale)));
        }
        if self.edge_factor == 0 {
            return Err(Error::InvalidParam {
                field: "edge_factor",
                message: "must be at least 1".into(),
            });
        }
        let probs = [self.a, self.b, self.c, self.d_quad];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParam {
                field: "a,b,c,d",
                message: format!("probabilities {probs:?} must lie in [0, 1]"),
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam {
                field: "a,b,c,d",
                message: format!("probabilities sum to {sum}, expected 1"),
            });
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> u64 {
        1u64 << self.scale
    }

    /// Directed edges before symmetrization.
    pub fn edge_count(&self) -> u64 {
        self.vertex_count() * self.edge_factor
    }
}

/// Generates `2^scale * edge_factor` directed edges. Self-loops and
/// duplicates are kept.
pub fn generate_rmat(params: &RmatParams) -> Result<EdgeList> {
    params.validate()?;
    let m = params.edge_count();
    let base = ChaCha8Rng::seed_from_u64(params.seed);
    let ab = params.a + params.b;
    let abc = ab + params.c;
    let scale = params.scale;
    let a = params.a;

    let edges: Vec<(u64, u64)> = (0..m)
        .into_par_iter()
        .map(|idx| {
            let mut rng = base.clone();
            rng.set_stream(idx);
            let (mut u, mut v) = (0u64, 0u64);
            for _ in 0..scale {
                let r: f64 = rng.gen();
                let (bu, bv) = if r < a {
                    (0, 0)
                } else if r < ab {
                    (0, 1)
                } else if r < abc {
                    (1, 0)
                } else {
                    (1, 1)
                };
                u = (u << 1) | bu;
                v = (v << 1) | bv;
            }
            (u, v)
        })
        .collect();

    Ok(EdgeList::new(params.vertex_count(), edges))
}

/// Vertex relabeling applied after generation.
///
/// `Mix` is a bijection on `bits`-bit integers built only from invertible
/// steps modulo `2^bits`: xor with a key, multiplication by an odd constant,
/// and xor-shift right. Constants:
///
/// * keys `k0 = splitmix64(seed)`, `k1 = splitmix64(k0)`
/// * multipliers `0xbf58476d1ce4e5b9` and `0x94d049bb133111eb`
/// * shift `max(1, bits / 2)`
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexHash {
    Identity,
    Mix { seed: u64 },
}

const MUL0: u64 = 0xbf58_476d_1ce4_e5b9;
const MUL1: u64 = 0x94d0_49bb_1331_11eb;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(MUL0);
    z = (z ^ (z >> 27)).wrapping_mul(MUL1);
    z ^ (z >> 31)
}

impl VertexHash {
    /// Maps `x < 2^bits` to a value `< 2^bits`.
    pub fn apply(&self, x: u64, bits: u32) -> u64 {
        match *self {
            VertexHash::Identity => x,
            VertexHash::Mix { seed } => {
                let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
                let shift = (bits / 2).max(1);
                let k0 = splitmix64(seed);
                let k1 = splitmix64(k0);
                let mut z = (x ^ k0) & mask;
                z = z.wrapping_mul(MUL0) & mask;
                z ^= z >> shift;
                z = (z ^ k1).wrapping_mul(MUL1) & mask;
                z ^= z >> shift;
                z
            }
        }
    }
}

/// Relabels every vertex through `hash`. Only defined for power-of-two `n`;
/// any other graph is returned unchanged.
pub fn hash_randomize_vertices(g: &EdgeList, hash: VertexHash) -> EdgeList {
    if !g.n.is_power_of_two() || hash == VertexHash::Identity {
        return g.clone();
    }
    let bits = g.n.trailing_zeros();
    let edges = g
        .edges
        .par_iter()
        .map(|&(u, v)| (hash.apply(u, bits), hash.apply(v, bits)))
        .collect();
    EdgeList {
        edges,
        n: g.n,
        symmetric: g.symmetric,
    }
}

/// The full pipeline used for benchmarks: generate, relabel, symmetrize.
pub fn graph500_graph(params: &RmatParams) -> Result<EdgeList> {
    let g = generate_rmat(params)?;
    let g = hash_randomize_vertices(&g, VertexHash::Mix { seed: params.seed });
    Ok(g.symmetrize())
}
