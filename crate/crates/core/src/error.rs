use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParam { field: &'static str, message: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("routing error: record for global vertex {vertex} sent to worker {sent_to}, owner is {owner}")]
    Routing {
        vertex: u64,
        sent_to: usize,
        owner: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("source vertex {source_vertex} out of range (n = {n})")]
    SourceOutOfRange { source_vertex: u64, n: u64 },

    #[error("bucket verification failed on worker {worker}: {message}")]
    Verification { worker: usize, message: String },

    #[error("no run qualified for the report ({0} runs discarded)")]
    EmptyReport(usize),
}
