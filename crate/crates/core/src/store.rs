//! CSR subgraphs, the per-worker bundle, memory accounting and the `DPG1`
//! on-disk layout.
//!
//! Memory accounting uses the semantic widths of the model: 4-byte row
//! offsets per row, 8-byte column indices for nn (global destinations) and
//! 4-byte column indices otherwise. Summed over workers this is
//! `8n + 8dp + 4m + 4|E_nn|` when every worker holds its share of rows.
//! Resident bytes (what the containers actually hold, including the extra
//! trailing offset per CSR) are reported separately.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::mem::size_of;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::bitmask::Bitmask;
use crate::error::{Error, Result};
use crate::partition::{ClusterShape, EdgeKind};

pub const DPG_MAGIC: &[u8; 4] = b"DPG1";
pub const DPG_VERSION: u32 = 1;

/// Column index types: `u32` for local/delegate ids, `u64` for global ids.
pub trait ColumnIndex: Copy + Default + Send + Sync + 'static {
    const WIDTH: usize;
    fn to_u64(self) -> u64;
    fn write<W: Write>(self, w: &mut W) -> std::io::Result<()>;
    fn read<R: Read>(r: &mut R) -> std::io::Result<Self>;
}

impl ColumnIndex for u32 {
    const WIDTH: usize = 4;
    fn to_u64(self) -> u64 {
        self as u64
    }
    fn write<W: Write>(self, w: &mut W) -> std::io::Result<()> {
        w.write_u32::<LittleEndian>(self)
    }
    fn read<R: Read>(r: &mut R) -> std::io::Result<Self> {
        r.read_u32::<LittleEndian>()
    }
}

impl ColumnIndex for u64 {
    const WIDTH: usize = 8;
    fn to_u64(self) -> u64 {
        self
    }
    fn write<W: Write>(self, w: &mut W) -> std::io::Result<()> {
        w.write_u64::<LittleEndian>(self)
    }
    fn read<R: Read>(r: &mut R) -> std::io::Result<Self> {
        r.read_u64::<LittleEndian>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr<C> {
    pub kind: EdgeKind,
    pub row_offsets: Vec<u32>,
    pub col_indices: Vec<C>,
}

impl<C: ColumnIndex> Csr<C> {
    pub fn empty(kind: EdgeKind, rows: usize) -> Self {
        Csr {
            kind,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
        }
    }

    /// Stable counting sort by row; edges within a row keep input order.
    pub fn from_pairs(kind: EdgeKind, rows: usize, pairs: &[(u32, C)]) -> Result<Self> {
        if pairs.len() > u32::MAX as usize {
            return Err(Error::Capacity(format!(
                "{} subgraph with {} edges overflows 32-bit offsets",
                kind.name(),
                pairs.len()
            )));
        }
        let mut counts = vec![0u32; rows + 1];
        for &(r, _) in pairs {
            let r = r as usize;
            if r >= rows {
                return Err(Error::Structural(format!(
                    "{} row {r} out of range ({rows} rows)",
                    kind.name()
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut cursor = counts;
        let mut col_indices = vec![C::default(); pairs.len()];
        for &(r, c) in pairs {
            let slot = &mut cursor[r as usize];
            col_indices[*slot as usize] = c;
            *slot += 1;
        }
        Ok(Csr {
            kind,
            row_offsets,
            col_indices,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C] {
        &self.col_indices[self.row_offsets[r] as usize..self.row_offsets[r + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, r: usize) -> usize {
        (self.row_offsets[r + 1] - self.row_offsets[r]) as usize
    }

    /// Offsets are monotone, end at `nnz`, and every column is below `bound`.
    pub fn check(&self, col_bound: u64) -> Result<()> {
        if self.row_offsets.first() != Some(&0) {
            return Err(Error::Structural(format!("{} offsets do not start at 0", self.kind.name())));
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Structural(format!("{} offsets decrease", self.kind.name())));
        }
        if *self.row_offsets.last().unwrap() as usize != self.nnz() {
            return Err(Error::Structural(format!("{} last offset != nnz", self.kind.name())));
        }
        if let Some(c) = self.col_indices.iter().find(|c| c.to_u64() >= col_bound) {
            return Err(Error::Structural(format!(
                "{} column {} outside bound {col_bound}",
                self.kind.name(),
                c.to_u64()
            )));
        }
        Ok(())
    }

    /// Model bytes: 4 per row, `WIDTH` per column index.
    pub fn model_bytes(&self) -> (u64, u64) {
        ((self.rows() * 4) as u64, (self.nnz() * C::WIDTH) as u64)
    }

    pub fn resident_bytes(&self) -> u64 {
        (self.row_offsets.len() * size_of::<u32>() + self.col_indices.len() * size_of::<C>()) as u64
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_u64::<LittleEndian>(self.rows() as u64)?;
        w.write_u64::<LittleEndian>(self.nnz() as u64)?;
        for &o in &self.row_offsets {
            w.write_u32::<LittleEndian>(o)?;
        }
        for &c in &self.col_indices {
            c.write(w)?;
        }
        Ok(())
    }

    fn read_from<R: Read>(kind: EdgeKind, r: &mut R) -> Result<Self> {
        let rows = r.read_u64::<LittleEndian>()? as usize;
        let nnz = r.read_u64::<LittleEndian>()? as usize;
        let row_offsets = (0..=rows).map(|_| r.read_u32::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
        let col_indices = (0..nnz).map(|_| C::read(r)).collect::<std::io::Result<Vec<_>>>()?;
        let csr = Csr {
            kind,
            row_offsets,
            col_indices,
        };
        csr.check(u64::MAX)?;
        Ok(csr)
    }
}

/// One worker's share of the graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkerGraph {
    pub worker: usize,
    pub local_count: u32,
    /// Rows: local normal ids; columns: global ids.
    pub nn: Csr<u64>,
    /// Rows: local normal ids; columns: delegate ids.
    pub nd: Csr<u32>,
    /// Rows: delegate ids; columns: local normal ids.
    pub dn: Csr<u32>,
    /// Rows and columns: delegate ids.
    pub dd: Csr<u32>,
    /// Local normals with at least one nd edge, ascending.
    pub nd_sources: Vec<u32>,
    /// Delegates with at least one dn edge here.
    pub dn_source_mask: Bitmask,
    /// Delegates with at least one dd edge here.
    pub dd_source_mask: Bitmask,
}

impl WorkerGraph {
    pub fn edge_count(&self) -> usize {
        self.nn.nnz() + self.nd.nnz() + self.dn.nnz() + self.dd.nnz()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedGraph {
    pub shape: ClusterShape,
    pub n: u64,
    pub theta: u64,
    /// Delegate id to global id.
    pub delegates: Vec<u64>,
    pub workers: Vec<WorkerGraph>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindBytes {
    pub offsets: u64,
    pub indices: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub n: u64,
    pub m: u64,
    pub d: u64,
    pub p: u64,
    pub e_nn: u64,
    pub nn: KindBytes,
    pub nd: KindBytes,
    pub dn: KindBytes,
    pub dd: KindBytes,
    pub offsets_bytes: u64,
    pub indices_bytes: u64,
    pub total_bytes: u64,
    /// `16m`, a plain 64-bit edge list.
    pub edge_list_bytes: u64,
    /// `8n + 8m`, an undivided CSR.
    pub plain_csr_bytes: u64,
    pub ratio_vs_edge_list: f64,
    pub ratio_vs_plain_csr: f64,
    /// What the in-memory containers occupy, including source lists/masks.
    pub resident_bytes: u64,
}

impl PartitionedGraph {
    pub fn p(&self) -> usize {
        self.shape.p()
    }

    pub fn d(&self) -> usize {
        self.delegates.len()
    }

    pub fn m(&self) -> u64 {
        self.workers.iter().map(|w| w.edge_count() as u64).sum()
    }

    pub fn kind_count(&self, kind: EdgeKind) -> u64 {
        self.workers
            .iter()
            .map(|w| match kind {
                EdgeKind::Nn => w.nn.nnz(),
                EdgeKind::Nd => w.nd.nnz(),
                EdgeKind::Dn => w.dn.nnz(),
                EdgeKind::Dd => w.dd.nnz(),
            } as u64)
            .sum()
    }

    /// Structural checks of every CSR against its kind's column bound.
    pub fn check(&self) -> Result<()> {
        let d = self.d() as u64;
        for w in &self.workers {
            let local_bound = self.n.div_ceil(self.p() as u64);
            w.nn.check(self.n)?;
            w.nd.check(d)?;
            w.dn.check(local_bound)?;
            w.dd.check(d)?;
            if w.nn.rows() != w.local_count as usize || w.nd.rows() != w.local_count as usize {
                return Err(Error::Structural(format!("worker {} normal row count mismatch", w.worker)));
            }
            if w.dn.rows() != self.d() || w.dd.rows() != self.d() {
                return Err(Error::Structural(format!("worker {} delegate row count mismatch", w.worker)));
            }
        }
        Ok(())
    }

    /// Every stored edge mapped back to global ids.
    pub fn reconstruct_edges(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::with_capacity(self.m() as usize);
        for w in &self.workers {
            let g = |l: u32| self.shape.global_id(w.worker, l as u64);
            for r in 0..w.nn.rows() {
                out.extend(w.nn.row(r).iter().map(|&v| (g(r as u32), v)));
                out.extend(w.nd.row(r).iter().map(|&x| (g(r as u32), self.delegates[x as usize])));
            }
            for x in 0..self.d() {
                let gx = self.delegates[x];
                out.extend(w.dn.row(x).iter().map(|&l| (gx, g(l))));
                out.extend(w.dd.row(x).iter().map(|&y| (gx, self.delegates[y as usize])));
            }
        }
        out
    }

    pub fn memory_footprint(&self) -> MemoryReport {
        let mut nn = KindBytes::default();
        let mut nd = KindBytes::default();
        let mut dn = KindBytes::default();
        let mut dd = KindBytes::default();
        let mut resident = 0u64;
        let add = |acc: &mut KindBytes, (o, i): (u64, u64)| {
            acc.offsets += o;
            acc.indices += i;
        };
        for w in &self.workers {
            add(&mut nn, w.nn.model_bytes());
            add(&mut nd, w.nd.model_bytes());
            add(&mut dn, w.dn.model_bytes());
            add(&mut dd, w.dd.model_bytes());
            resident += w.nn.resident_bytes() + w.nd.resident_bytes() + w.dn.resident_bytes() + w.dd.resident_bytes();
            resident += (w.nd_sources.len() * 4) as u64;
            resident += ((w.dn_source_mask.words().len() + w.dd_source_mask.words().len()) * 8) as u64;
        }
        let offsets_bytes = nn.offsets + nd.offsets + dn.offsets + dd.offsets;
        let indices_bytes = nn.indices + nd.indices + dn.indices + dd.indices;
        let total_bytes = offsets_bytes + indices_bytes;
        let m = self.m();
        let edge_list_bytes = 16 * m;
        let plain_csr_bytes = 8 * self.n + 8 * m;
        let ratio = |den: u64| if den == 0 { 0.0 } else { total_bytes as f64 / den as f64 };
        MemoryReport {
            n: self.n,
            m,
            d: self.d() as u64,
            p: self.p() as u64,
            e_nn: self.kind_count(EdgeKind::Nn),
            nn,
            nd,
            dn,
            dd,
            offsets_bytes,
            indices_bytes,
            total_bytes,
            edge_list_bytes,
            plain_csr_bytes,
            ratio_vs_edge_list: ratio(edge_list_bytes),
            ratio_vs_plain_csr: ratio(plain_csr_bytes),
            resident_bytes: resident,
        }
    }

    /// Writes `worker-NNNNN.dpg` per worker into `dir`.
    ///
    /// Layout (little-endian):
    ///
    /// ```text
    /// "DPG1" | u32 version | u32 worker | u32 p_rank | u32 p_gpu | u32 0
    /// u64 n | u64 theta | u64 d | u64 local_count
    /// 4 x CSR in order nn, nd, dn, dd:
    ///     u64 rows | u64 nnz | (rows+1) x u32 offsets | nnz x column
    ///     (columns are u64 for nn, u32 otherwise)
    /// d x u64 delegate global ids
    /// u64 len | len x u32 nd source list
    /// u64 words | words x u64 dn source mask
    /// u64 words | words x u64 dd source mask
    /// ```
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for w in &self.workers {
            let mut f = BufWriter::new(File::create(dir.join(worker_file_name(w.worker)))?);
            f.write_all(DPG_MAGIC)?;
            f.write_u32::<LittleEndian>(DPG_VERSION)?;
            f.write_u32::<LittleEndian>(w.worker as u32)?;
            f.write_u32::<LittleEndian>(self.shape.p_rank as u32)?;
            f.write_u32::<LittleEndian>(self.shape.p_gpu as u32)?;
            f.write_u32::<LittleEndian>(0)?;
            f.write_u64::<LittleEndian>(self.n)?;
            f.write_u64::<LittleEndian>(self.theta)?;
            f.write_u64::<LittleEndian>(self.d() as u64)?;
            f.write_u64::<LittleEndian>(w.local_count as u64)?;
            w.nn.write_to(&mut f)?;
            w.nd.write_to(&mut f)?;
            w.dn.write_to(&mut f)?;
            w.dd.write_to(&mut f)?;
            for &g in &self.delegates {
                f.write_u64::<LittleEndian>(g)?;
            }
            f.write_u64::<LittleEndian>(w.nd_sources.len() as u64)?;
            for &s in &w.nd_sources {
                f.write_u32::<LittleEndian>(s)?;
            }
            for mask in [&w.dn_source_mask, &w.dd_source_mask] {
                f.write_u64::<LittleEndian>(mask.words().len() as u64)?;
                for &word in mask.words() {
                    f.write_u64::<LittleEndian>(word)?;
                }
            }
            f.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<PartitionedGraph> {
        let dir = dir.as_ref();
        let first = read_worker(&dir.join(worker_file_name(0)))?;
        let shape = first.shape;
        let mut workers = vec![first];
        for w in 1..shape.p() {
            let part = read_worker(&dir.join(worker_file_name(w)))?;
            let head = &workers[0];
            if part.shape != shape || part.n != head.n || part.theta != head.theta || part.delegates != head.delegates {
                return Err(Error::Format(format!("worker file {w} disagrees with worker 0 header")));
            }
            if part.graph.worker != w {
                return Err(Error::Format(format!("file for worker {w} claims worker {}", part.graph.worker)));
            }
            workers.push(part);
        }
        let head = &workers[0];
        let pg = PartitionedGraph {
            shape,
            n: head.n,
            theta: head.theta,
            delegates: head.delegates.clone(),
            workers: workers.into_iter().map(|p| p.graph).collect(),
        };
        pg.check()?;
        Ok(pg)
    }
}

pub fn worker_file_name(worker: usize) -> String {
    format!("worker-{worker:05}.dpg")
}

struct WorkerFile {
    shape: ClusterShape,
    n: u64,
    theta: u64,
    delegates: Vec<u64>,
    graph: WorkerGraph,
}

fn read_worker(path: &Path) -> Result<WorkerFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DPG_MAGIC {
        return Err(Error::Format(format!("{} is not a DPG1 file", path.display())));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != DPG_VERSION {
        return Err(Error::Format(format!("unsupported DPG version {version}")));
    }
    let worker = r.read_u32::<LittleEndian>()? as usize;
    let p_rank = r.read_u32::<LittleEndian>()? as usize;
    let p_gpu = r.read_u32::<LittleEndian>()? as usize;
    let _reserved = r.read_u32::<LittleEndian>()?;
    let shape = ClusterShape::new(p_rank, p_gpu)?;
    let n = r.read_u64::<LittleEndian>()?;
    let theta = r.read_u64::<LittleEndian>()?;
    let d = r.read_u64::<LittleEndian>()? as usize;
    let local_count = r.read_u64::<LittleEndian>()?;
    let local_count = u32::try_from(local_count).map_err(|_| Error::Format("local count exceeds 32 bits".into()))?;
    let nn = Csr::<u64>::read_from(EdgeKind::Nn, &mut r)?;
    let nd = Csr::<u32>::read_from(EdgeKind::Nd, &mut r)?;
    let dn = Csr::<u32>::read_from(EdgeKind::Dn, &mut r)?;
    let dd = Csr::<u32>::read_from(EdgeKind::Dd, &mut r)?;
    let delegates = (0..d).map(|_| r.read_u64::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
    let len = r.read_u64::<LittleEndian>()? as usize;
    let nd_sources = (0..len).map(|_| r.read_u32::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
    let mut masks = Vec::with_capacity(2);
    for _ in 0..2 {
        let words = r.read_u64::<LittleEndian>()? as usize;
        let words = (0..words).map(|_| r.read_u64::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
        masks.push(Bitmask::from_words(words, d).ok_or_else(|| Error::Format("source mask length mismatch".into()))?);
    }
    let dd_source_mask = masks.pop().unwrap();
    let dn_source_mask = masks.pop().unwrap();
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(format!("{} has trailing bytes", path.display())));
    }
    Ok(WorkerFile {
        shape,
        n,
        theta,
        delegates,
        graph: WorkerGraph {
            worker,
            local_count,
            nn,
            nd,
            dn,
            dd,
            nd_sources,
            dn_source_mask,
            dd_source_mask,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_from_pairs_keeps_order() {
        let csr = Csr::from_pairs(EdgeKind::Dd, 3, &[(2, 7u32), (0, 1), (2, 5), (0, 9)]).unwrap();
        assert_eq!(csr.row_offsets, vec![0, 2, 2, 4]);
        assert_eq!(csr.row(0), &[1, 9]);
        assert_eq!(csr.row(2), &[7, 5]);
        assert_eq!(csr.degree(1), 0);
        csr.check(10).unwrap();
        assert!(csr.check(9).is_err());
    }

    #[test]
    fn csr_row_out_of_range() {
        assert!(Csr::from_pairs(EdgeKind::Nd, 1, &[(1, 0u32)]).is_err());
    }

    #[test]
    fn model_bytes_widths() {
        let nn = Csr::from_pairs(EdgeKind::Nn, 2, &[(0, 5u64), (1, 6)]).unwrap();
        assert_eq!(nn.model_bytes(), (8, 16));
        let nd = Csr::from_pairs(EdgeKind::Nd, 2, &[(0, 5u32)]).unwrap();
        assert_eq!(nd.model_bytes(), (8, 4));
        assert_eq!(nd.resident_bytes(), 3 * 4 + 4);
    }
}
