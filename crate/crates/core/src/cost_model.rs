//! Closed-form communication cost for 1D, 2D and delegate partitioning.
//! Logarithms are base 2; `g` is seconds per byte.

use serde::{Deserialize, Serialize};

use crate::engine::BfsRun;
use crate::error::{Error, Result};
use crate::partition::EdgeKind;
use crate::store::PartitionedGraph;
use crate::traversal::Direction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub n: f64,
    pub m: f64,
    pub p: u64,
    pub p_rank: u64,
    pub p_gpu: u64,
    pub g: f64,
    /// BFS iterations.
    pub s: f64,
    /// Iterations run backward.
    pub s_b: f64,
    /// Vertices visited in forward iterations.
    pub n_t: f64,
    pub d: f64,
    pub e_nn: f64,
}

impl CostModelParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.n, self.m, self.g, self.s, self.s_b, self.n_t, self.d, self.e_nn];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("cost model inputs must be finite and nonnegative".into()));
        }
        if self.p == 0 || self.p != self.p_rank * self.p_gpu {
            return Err(Error::Domain(format!(
                "p = {} must equal p_rank * p_gpu = {} * {}",
                self.p, self.p_rank, self.p_gpu
            )));
        }
        Ok(())
    }

    /// Graph sizes from a partitioned graph and `S`, `S_b`, `n_t` measured
    /// from a run on it. An iteration counts as backward if any worker ran
    /// any subgraph backward; `n_t` sums the frontiers of the others.
    pub fn from_run(pg: &PartitionedGraph, run: &BfsRun, g: f64) -> Self {
        let mut s_b = 0u64;
        let mut n_t = 0u64;
        for it in &run.per_iteration {
            let any_backward = it.directions.iter().flatten().any(|&dir| dir == Direction::Backward);
            if any_backward {
                s_b += 1;
            } else {
                n_t += it.normal_frontier + it.delegate_frontier;
            }
        }
        CostModelParams {
            n: pg.n as f64,
            m: pg.m() as f64,
            p: pg.p() as u64,
            p_rank: pg.shape.p_rank as u64,
            p_gpu: pg.shape.p_gpu as u64,
            g,
            s: run.iterations as f64,
            s_b: s_b as f64,
            n_t: n_t as f64,
            d: pg.d() as f64,
            e_nn: pg.kind_count(EdgeKind::Nn) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cost1d {
    pub volume: f64,
    pub time: f64,
}

pub fn cost_1d(params: &CostModelParams) -> Result<Cost1d> {
    params.validate()?;
    let volume = 8.0 * params.m;
    Ok(Cost1d {
        volume,
        time: volume / params.p as f64 * params.g,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cost2d {
    pub forward_volume: f64,
    pub backward_volume: f64,
    pub time: f64,
}

fn exact_sqrt(p: u64) -> Option<u64> {
    let r = (p as f64).sqrt().round() as u64;
    (r.checked_mul(r) == Some(p)).then_some(r)
}

/// Square processor grid with tree reductions along rows and columns.
pub fn cost_2d(params: &CostModelParams) -> Result<Cost2d> {
    params.validate()?;
    let side = exact_sqrt(params.p)
        .ok_or_else(|| Error::Domain(format!("p = {} is not a perfect square", params.p)))?;
    let sqrt_p = side as f64;
    let log_sqrt_p = sqrt_p.log2();
    Ok(Cost2d {
        forward_volume: 8.0 * params.n_t * sqrt_p * log_sqrt_p,
        backward_volume: 2.0 * params.n * params.s_b * sqrt_p * log_sqrt_p / 8.0,
        time: (4.0 * params.n_t + params.n * params.s_b / 8.0) * (log_sqrt_p / sqrt_p) * params.g,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostDelegate {
    /// Upper bound: mask reduction every iteration plus every nn edge cut.
    pub volume: f64,
    pub time: f64,
    pub mask_volume: f64,
    pub normal_volume: f64,
    /// `n log(p_rank) / p * S * g`: the mask term alone with `d = 4n/p`.
    pub simplified_time: f64,
}

pub fn cost_delegate(params: &CostModelParams) -> Result<CostDelegate> {
    params.validate()?;
    let log_pr = (params.p_rank as f64).log2();
    let p = params.p as f64;
    let mask_volume = params.d * params.p_rank as f64 / 4.0 * params.s;
    let normal_volume = 4.0 * params.e_nn;
    Ok(CostDelegate {
        volume: mask_volume + normal_volume,
        time: (params.d * log_pr / 4.0 * params.s + normal_volume / p) * params.g,
        mask_volume,
        normal_volume,
        simplified_time: params.n * log_pr / p * params.s * params.g,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub p: u64,
    pub p_rank: u64,
    pub p_gpu: u64,
    pub n: f64,
    pub m: f64,
    pub cost_1d_volume: f64,
    pub cost_1d_time: f64,
    pub cost_2d_forward_volume: f64,
    pub cost_2d_backward_volume: f64,
    /// `None` when p is not a perfect square.
    pub cost_2d_time: Option<f64>,
    pub delegate_volume: f64,
    pub delegate_time: f64,
    pub delegate_simplified_time: f64,
}

/// Template for weak scaling: per-worker quantities are multiplied by `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakScaling {
    pub vertices_per_worker: f64,
    pub edge_factor: f64,
    pub p_gpu: u64,
    pub g: f64,
    pub s: f64,
    pub s_b: f64,
    /// Share of vertices visited in forward iterations.
    pub forward_share: f64,
    /// `d` as a multiple of `n / p`.
    pub delegates_per_worker_share: f64,
    /// `|E_nn|` as a share of `m`.
    pub nn_share: f64,
}

impl WeakScaling {
    /// Scale-20 per worker, doubled edge factor 32, four GPUs per rank and
    /// `d = 4n/p`, `|E_nn| = 5% m`.
    pub fn typical() -> Self {
        WeakScaling {
            vertices_per_worker: (1u64 << 20) as f64,
            edge_factor: 32.0,
            p_gpu: 4,
            g: 1.0 / 12.5e9,
            s: 8.0,
            s_b: 3.0,
            forward_share: 0.1,
            delegates_per_worker_share: 4.0,
            nn_share: 0.05,
        }
    }

    pub fn params(&self, p: u64) -> Result<CostModelParams> {
        if self.p_gpu == 0 || !p.is_multiple_of(self.p_gpu) {
            return Err(Error::Domain(format!("p = {p} not divisible by p_gpu = {}", self.p_gpu)));
        }
        let n = self.vertices_per_worker * p as f64;
        let m = n * self.edge_factor;
        Ok(CostModelParams {
            n,
            m,
            p,
            p_rank: p / self.p_gpu,
            p_gpu: self.p_gpu,
            g: self.g,
            s: self.s,
            s_b: self.s_b,
            n_t: self.forward_share * n,
            d: self.delegates_per_worker_share * n / p as f64,
            e_nn: self.nn_share * m,
        })
    }
}

pub fn cost_row(params: &CostModelParams) -> Result<CostRow> {
    let c1 = cost_1d(params)?;
    let c2 = cost_2d(params).ok();
    let cd = cost_delegate(params)?;
    Ok(CostRow {
        p: params.p,
        p_rank: params.p_rank,
        p_gpu: params.p_gpu,
        n: params.n,
        m: params.m,
        cost_1d_volume: c1.volume,
        cost_1d_time: c1.time,
        cost_2d_forward_volume: c2.map_or(f64::NAN, |c| c.forward_volume),
        cost_2d_backward_volume: c2.map_or(f64::NAN, |c| c.backward_volume),
        cost_2d_time: c2.map(|c| c.time),
        delegate_volume: cd.volume,
        delegate_time: cd.time,
        delegate_simplified_time: cd.simplified_time,
    })
}

pub fn weak_scaling_sweep(template: &WeakScaling, ps: &[u64]) -> Result<Vec<CostRow>> {
    ps.iter().map(|&p| cost_row(&template.params(p)?)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    LinearFit {
        intercept,
        slope,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> CostModelParams {
        CostModelParams {
            n: (1u64 << 20) as f64,
            m: (1u64 << 25) as f64,
            p: 4,
            p_rank: 2,
            p_gpu: 2,
            g: 1e-9,
            s: 6.0,
            s_b: 3.0,
            n_t: (1u64 << 20) as f64,
            d: 1000.0,
            e_nn: 5000.0,
        }
    }

    #[test]
    fn one_d_formula() {
        let c = cost_1d(&base()).unwrap();
        assert_eq!(c.volume, (1u64 << 28) as f64);
        assert!((c.time - (1u64 << 26) as f64 * 1e-9).abs() < 1e-15);
        let single = CostModelParams {
            p: 1,
            p_rank: 1,
            p_gpu: 1,
            ..base()
        };
        assert_eq!(cost_1d(&single).unwrap().time, 8.0 * single.m * 1e-9);
        let doubled = CostModelParams {
            p: 8,
            p_rank: 4,
            ..base()
        };
        let cd = cost_1d(&doubled).unwrap();
        assert_eq!(cd.volume, c.volume);
        assert!((cd.time - c.time / 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_d_degenerate_and_domain() {
        let single = CostModelParams {
            p: 1,
            p_rank: 1,
            p_gpu: 1,
            ..base()
        };
        let c = cost_2d(&single).unwrap();
        assert_eq!((c.forward_volume, c.backward_volume, c.time), (0.0, 0.0, 0.0));
        let bad = CostModelParams {
            p: 8,
            p_rank: 4,
            ..base()
        };
        assert!(matches!(cost_2d(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn two_d_monotone_under_weak_scaling() {
        let w = WeakScaling::typical();
        let mut prev = 0.0;
        for p in [4u64, 16, 64, 256, 1024, 4096] {
            let t = cost_2d(&w.params(p).unwrap()).unwrap().time;
            assert!(t > prev, "p = {p}");
            prev = t;
        }
    }

    #[test]
    fn delegate_single_rank() {
        let p = CostModelParams {
            p_rank: 1,
            p_gpu: 4,
            ..base()
        };
        let c = cost_delegate(&p).unwrap();
        assert!((c.time - 4.0 * p.e_nn / 4.0 * p.g).abs() < 1e-18);
    }

    #[test]
    fn delegate_simplified_identity() {
        let mut p = base();
        p.d = 4.0 * p.n / p.p as f64;
        let c = cost_delegate(&p).unwrap();
        let mask_time = p.d * (p.p_rank as f64).log2() / 4.0 * p.s * p.g;
        assert!((mask_time - c.simplified_time).abs() <= 1e-12 * c.simplified_time);
    }

    #[test]
    fn p_mismatch_rejected() {
        let p = CostModelParams { p: 5, ..base() };
        assert!(cost_1d(&p).is_err());
    }

    #[test]
    fn fit_exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
