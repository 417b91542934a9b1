//! Flat directed edge lists and their on-disk formats.
//!
//! Text format: one `src dst` decimal pair per line. Lines starting with `#`
//! are comments; a comment of the form `# n = 1234` sets the vertex count.
//!
//! Binary format: an optional 16-byte header (`b"DEL1"`, four reserved zero
//! bytes, little-endian `u64` vertex count) followed by little-endian
//! `(u64 src, u64 dst)` pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"DEL1";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    pub edges: Vec<(u64, u64)>,
    pub n: u64,
    pub symmetric: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeFormat {
    Text,
    Binary,
}

impl EdgeFormat {
    /// Picks a format from the file extension: `.bin`/`.del` are binary,
    /// everything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("del") => EdgeFormat::Binary,
            _ => EdgeFormat::Text,
        }
    }
}

impl EdgeList {
    pub fn new(n: u64, edges: Vec<(u64, u64)>) -> Self {
        EdgeList {
            edges,
            n,
            symmetric: false,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Checks that every id is below `n`.
    pub fn validate(&self) -> Result<()> {
        if let Some(&(u, v)) = self.edges.iter().find(|&&(u, v)| u >= self.n || v >= self.n) {
            return Err(Error::Format(format!(
                "edge ({u}, {v}) has an endpoint outside [0, {})",
                self.n
            )));
        }
        Ok(())
    }

    /// Multiset check: every `(u, v)` has a matching `(v, u)` with equal
    /// multiplicity.
    pub fn check_symmetric(&self) -> bool {
        let mut fwd = self.edges.clone();
        let mut rev: Vec<(u64, u64)> = self.edges.iter().map(|&(u, v)| (v, u)).collect();
        fwd.sort_unstable();
        rev.sort_unstable();
        fwd == rev
    }

    /// Appends the reverse of every edge. Self-loops get a second copy.
    pub fn symmetrize(&self) -> EdgeList {
        let mut edges = Vec::with_capacity(self.edges.len() * 2);
        for &(u, v) in &self.edges {
            edges.push((u, v));
            edges.push((v, u));
        }
        EdgeList {
            edges,
            n: self.n,
            symmetric: true,
        }
    }

    pub fn load(path: impl AsRef<Path>, format: EdgeFormat) -> Result<EdgeList> {
        let file = File::open(path.as_ref())?;
        match format {
            EdgeFormat::Text => read_text(BufReader::new(file)),
            EdgeFormat::Binary => read_binary(BufReader::new(file)),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: EdgeFormat) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        match format {
            EdgeFormat::Text => {
                writeln!(w, "# n = {}", self.n)?;
                for &(u, v) in &self.edges {
                    writeln!(w, "{u} {v}")?;
                }
            }
            EdgeFormat::Binary => {
                w.write_all(BINARY_MAGIC)?;
                w.write_u32::<LittleEndian>(0)?;
                w.write_u64::<LittleEndian>(self.n)?;
                for &(u, v) in &self.edges {
                    w.write_u64::<LittleEndian>(u)?;
                    w.write_u64::<LittleEndian>(v)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn finish(edges: Vec<(u64, u64)>, header_n: Option<u64>) -> Result<EdgeList> {
    let max_id = edges.iter().map(|&(u, v)| u.max(v)).max();
    let needed = match max_id {
        None => 0,
        Some(id) => id
            .checked_add(1)
            .ok_or_else(|| Error::Format(format!("vertex id {id} leaves no room for n")))?,
    };
    let n = match header_n {
        Some(n) if n < needed => {
            return Err(Error::Format(format!(
                "header declares n = {n} but ids reach {}",
                needed - 1
            )))
        }
        Some(n) => n,
        None => needed,
    };
    Ok(EdgeList::new(n, edges))
}

fn parse_header_n(comment: &str) -> Option<u64> {
    let rest = comment.trim_start_matches('#').trim();
    let rest = rest.strip_prefix('n')?.trim_start();
    let rest = rest.strip_prefix('=')?.trim();
    rest.parse().ok()
}

fn parse_id(tok: &str, line: usize) -> Result<u64> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Parse {
            line,
            message: format!("`{tok}` is not a vertex id"),
        });
    }
    tok.parse::<u64>()
        .map_err(|_| Error::Format(format!("line {line}: vertex id {tok} overflows 64 bits")))
}

pub fn read_text<R: BufRead>(reader: R) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut header_n = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(n) = parse_header_n(trimmed) {
                header_n = Some(n);
            }
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `src dst`, got `{trimmed}`"),
            });
        };
        edges.push((parse_id(a, line_no)?, parse_id(b, line_no)?));
    }
    finish(edges, header_n)
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<EdgeList> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let (header_n, body) = if bytes.len() >= 16 && &bytes[..4] == BINARY_MAGIC {
        (Some(LittleEndian::read_u64(&bytes[8..16])), &bytes[16..])
    } else {
        (None, &bytes[..])
    };
    if body.len() % 16 != 0 {
        return Err(Error::Format(format!(
            "binary edge payload of {} bytes is not a whole number of 16-byte pairs",
            body.len()
        )));
    }
    let edges = body
        .chunks_exact(16)
        .map(|c| (LittleEndian::read_u64(&c[..8]), LittleEndian::read_u64(&c[8..])))
        .collect();
    finish(edges, header_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_two_edges() {
        let g = read_text("0 1\n1 0\n".as_bytes()).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
        assert_eq!(g.n, 2);
    }

    #[test]
    fn empty_input() {
        let g = read_text("".as_bytes()).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.n, 0);
        let g = read_binary(&[][..]).unwrap();
        assert_eq!(g.n, 0);
    }

    #[test]
    fn comments_and_header() {
        let g = read_text("# n = 10\n# just a note\n3 4\n".as_bytes()).unwrap();
        assert_eq!(g.n, 10);
        assert_eq!(g.edges, vec![(3, 4)]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read_text("0 1\n2 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_text("0 1\n\n5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn id_overflow_is_format_error() {
        let err = read_text("0 18446744073709551616\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
        let err = read_text("0 18446744073709551615\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn header_smaller_than_ids_rejected() {
        let err = read_text("# n = 2\n0 5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn truncated_binary_rejected() {
        let err = read_binary(&[0u8; 20][..]).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn symmetrize_basic() {
        let g = EdgeList::new(2, vec![(0, 1)]).symmetrize();
        assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
        assert!(g.symmetric);
        let g = EdgeList::new(4, vec![(3, 3)]).symmetrize();
        assert_eq!(g.edges, vec![(3, 3), (3, 3)]);
        assert!(g.check_symmetric());
    }

    #[test]
    fn symmetrize_twice_doubles_multiplicity() {
        let g = EdgeList::new(3, vec![(0, 1), (1, 2), (0, 1)]);
        let once = g.symmetrize();
        let twice = once.symmetrize();
        assert_eq!(twice.len(), 4 * g.len());
        assert!(twice.check_symmetric());
        let count = |e: &EdgeList, x: (u64, u64)| e.edges.iter().filter(|&&y| y == x).count();
        assert_eq!(count(&twice, (0, 1)), 2 * count(&once, (0, 1)));
    }

    #[test]
    fn asymmetric_detected() {
        assert!(!EdgeList::new(2, vec![(0, 1), (0, 1), (1, 0)]).check_symmetric());
    }
}
